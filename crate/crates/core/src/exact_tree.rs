//! Exact cylinder-level computation of the density process.
//!
//! Everything here is brute force over the prefix tree: this module is the
//! oracle tier the faster engines are checked against.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::models::{KernelPairModel, KernelStep, Measure, Prefix};
use crate::scalar::Scalar;

/// Environment variable overriding [`AtomBudget::default`].
pub const ATOM_BUDGET_ENV: &str = "MACONT_ATOM_BUDGET";

/// Cap on the number of atoms an enumeration may materialize.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AtomBudget(pub u64);

impl Default for AtomBudget {
    fn default() -> Self {
        AtomBudget(1 << 20)
    }
}

impl AtomBudget {
    /// The default, unless [`ATOM_BUDGET_ENV`] holds a positive integer.
    pub fn from_env() -> Self {
        std::env::var(ATOM_BUDGET_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<u64>().ok())
            .filter(|&v| v > 0)
            .map(AtomBudget)
            .unwrap_or_default()
    }
}

/// `Φₙ` on the atom `prefix`, `n = |prefix| + 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityState<S> {
    pub prefix: Prefix,
    pub log_phi: f64,
    pub phi: S,
}

/// Values attached to atoms of one depth.
pub type AtomMap<S> = BTreeMap<Prefix, S>;

fn require_discrete<S: Scalar>(model: &KernelPairModel<S>) -> Result<()> {
    if model.is_discrete() {
        Ok(())
    } else {
        Err(Error::ContinuousCoordinate(1))
    }
}

/// Kernels along the path of `prefix`: entry `i` is the law of coordinate `i + 1`.
pub(crate) fn path_kernels<S: Scalar>(
    model: &KernelPairModel<S>,
    prefix: &Prefix,
) -> Result<Vec<KernelStep<S>>> {
    (0..prefix.len())
        .map(|i| model.conditional_kernels(&prefix.truncate(i)))
        .collect()
}

fn unreachable(prefix: &Prefix) -> Error {
    Error::InvalidArgument(format!("prefix {prefix} has zero mass"))
}

pub fn density<S: Scalar>(model: &KernelPairModel<S>, prefix: &Prefix) -> Result<DensityState<S>> {
    require_discrete(model)?;
    let mut log_phi = 0.0;
    let mut ratios = Vec::with_capacity(prefix.len());
    for (step, &x) in path_kernels(model, prefix)?.iter().zip(prefix.symbols()) {
        if step.p[x].is_zero() {
            return Err(unreachable(prefix));
        }
        log_phi += step.q[x].to_f64().ln() - step.p[x].to_f64().ln();
        ratios.push(step.ratio(x));
    }
    let phi = if S::EXACT {
        S::product(ratios)
    } else {
        S::from_f64(log_phi.exp())
    };
    Ok(DensityState {
        prefix: prefix.clone(),
        log_phi,
        phi,
    })
}

/// `Φ_{|prefix|+1}` on the atom: the product of `q/p` along the prefix.
pub fn phi<S: Scalar>(model: &KernelPairModel<S>, prefix: &Prefix) -> Result<S> {
    Ok(density(model, prefix)?.phi)
}

/// The increment `φₙ = qₙ(xₙ|·)/pₙ(xₙ|·)` read off the prefix (`1 ≤ n ≤ |prefix|`).
pub fn small_phi<S: Scalar>(model: &KernelPairModel<S>, prefix: &Prefix, n: usize) -> Result<S> {
    require_discrete(model)?;
    if n == 0 || n > prefix.len() {
        return Err(Error::IndexOutOfRange {
            index: n,
            limit: prefix.len(),
        });
    }
    let step = model.conditional_kernels(&prefix.truncate(n - 1))?;
    let x = prefix.symbols()[n - 1];
    if step.p[x].is_zero() {
        return Err(unreachable(prefix));
    }
    Ok(step.ratio(x))
}

fn weights<S: Scalar>(step: &KernelStep<S>, measure: Measure) -> &[S] {
    match measure {
        Measure::P => &step.p,
        Measure::Q => &step.q,
    }
}

/// Reachable atoms of depth `depth`, in lexicographic order.
pub fn reachable_prefixes<S: Scalar>(
    model: &KernelPairModel<S>,
    depth: usize,
    budget: AtomBudget,
) -> Result<Vec<Prefix>> {
    Ok(enumerate_cylinders(model, depth, budget)?
        .atoms
        .into_iter()
        .map(|a| a.prefix)
        .collect())
}

/// `𝔼(f | 𝔉ₙ)` for `f` defined on the depth-`k` atoms; the result lives on depth `n − 1`.
///
/// Weighted by ℙ's kernels, or by ℙ''s with `Measure::Q`.
pub fn conditional_expectation<S: Scalar>(
    model: &KernelPairModel<S>,
    f: &AtomMap<S>,
    n: usize,
    measure: Measure,
    budget: AtomBudget,
) -> Result<AtomMap<S>> {
    require_discrete(model)?;
    let k = match f.keys().next() {
        Some(p) => p.len(),
        None => return Err(Error::InvalidArgument("empty function".into())),
    };
    if f.keys().any(|p| p.len() != k) {
        return Err(Error::InvalidArgument(
            "function must live on a single depth".into(),
        ));
    }
    if n == 0 || n > k + 1 {
        return Err(Error::DepthExceeded {
            requested: n,
            horizon: k + 1,
        });
    }
    let mut out = AtomMap::new();
    for prefix in reachable_prefixes(model, n - 1, budget)? {
        let v = average_below(model, f, &prefix, k, measure)?;
        out.insert(prefix, v);
    }
    Ok(out)
}

fn average_below<S: Scalar>(
    model: &KernelPairModel<S>,
    f: &AtomMap<S>,
    prefix: &Prefix,
    k: usize,
    measure: Measure,
) -> Result<S> {
    if prefix.len() == k {
        return f.get(prefix).cloned().ok_or_else(|| {
            Error::InvalidArgument(format!("function has no value on atom {prefix}"))
        });
    }
    let step = model.conditional_kernels(prefix)?;
    let w = weights(&step, measure);
    let mut acc = S::zero();
    for a in step.support() {
        acc = acc + w[a].clone() * average_below(model, f, &prefix.child(a), k, measure)?;
    }
    Ok(acc)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Atom<S> {
    pub prefix: Prefix,
    pub p_mass: S,
    pub q_mass: S,
    /// `Φ_{depth+1}` on the atom.
    pub phi: S,
    pub log_phi: f64,
}

/// Exhaustive atom table of one depth.
#[derive(Clone, Debug, PartialEq)]
pub struct CylinderWeights<S> {
    pub depth: usize,
    pub atoms: Vec<Atom<S>>,
}

impl<S: Scalar> CylinderWeights<S> {
    pub fn total(&self, measure: Measure) -> S {
        self.atoms.iter().fold(S::zero(), |acc, a| {
            acc + match measure {
                Measure::P => a.p_mass.clone(),
                Measure::Q => a.q_mass.clone(),
            }
        })
    }

    pub fn get(&self, prefix: &Prefix) -> Option<&Atom<S>> {
        self.atoms
            .binary_search_by(|a| a.prefix.cmp(prefix))
            .ok()
            .map(|i| &self.atoms[i])
    }

    /// CSV with header `prefix,p_mass,q_mass,phi`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["prefix", "p_mass", "q_mass", "phi"]).unwrap();
        for a in &self.atoms {
            w.write_record([
                a.prefix.to_string(),
                format_value(&a.p_mass),
                format_value(&a.q_mass),
                format_value(&a.phi),
            ])
            .unwrap();
        }
        String::from_utf8(w.into_inner().unwrap()).unwrap()
    }
}

/// Plain `.`-decimal rendering (rational text in exact mode).
pub(crate) fn format_value<S: Scalar>(x: &S) -> String {
    x.to_text()
}

/// All reachable atoms of depth `depth` with their masses under both measures.
/// Matched-zero branches are pruned.
pub fn enumerate_cylinders<S: Scalar>(
    model: &KernelPairModel<S>,
    depth: usize,
    budget: AtomBudget,
) -> Result<CylinderWeights<S>> {
    if depth > 0 {
        require_discrete(model)?;
    }
    if let Some(h) = model.horizon() {
        if depth > h {
            return Err(Error::DepthExceeded {
                requested: depth,
                horizon: h,
            });
        }
    }
    let mut level = vec![Atom {
        prefix: Prefix::empty(),
        p_mass: S::one(),
        q_mass: S::one(),
        phi: S::one(),
        log_phi: 0.0,
    }];
    for _ in 0..depth {
        let steps: Vec<KernelStep<S>> = level
            .iter()
            .map(|a| model.conditional_kernels(&a.prefix))
            .collect::<Result<_>>()?;
        let count: u128 = steps.iter().map(|s| s.support().count() as u128).sum();
        if count > budget.0 as u128 {
            return Err(Error::BudgetExceeded {
                atoms: count,
                budget: budget.0,
            });
        }
        let mut next = Vec::with_capacity(count as usize);
        for (atom, step) in level.iter().zip(&steps) {
            for a in step.support() {
                let log_phi =
                    atom.log_phi + step.q[a].to_f64().ln() - step.p[a].to_f64().ln();
                let phi = if S::EXACT {
                    atom.phi.clone() * step.ratio(a)
                } else {
                    S::from_f64(log_phi.exp())
                };
                next.push(Atom {
                    prefix: atom.prefix.child(a),
                    p_mass: atom.p_mass.clone() * step.p[a].clone(),
                    q_mass: atom.q_mass.clone() * step.q[a].clone(),
                    phi,
                    log_phi,
                });
            }
        }
        level = next;
    }
    Ok(CylinderWeights {
        depth,
        atoms: level,
    })
}
