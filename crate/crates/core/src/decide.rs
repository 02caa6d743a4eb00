//! Verdicts: equivalent, singular, or inconclusive, each with its evidence.
//!
//! Criteria run independently and return a [`CriterionResult`]; the verdict
//! is a fold over them. Only certified criteria (exact identities, analytic
//! tail bounds, spectral certificates) may move the decision away from
//! `Inconclusive`.

use std::collections::BTreeMap;

use num_traits::ToPrimitive;
use serde::Serialize;

use crate::affinity::{self, LimitStatus};
use crate::error::{Error, Result};
use crate::exact_tree::{self, AtomBudget};
use crate::models::{KernelPairModel, MarkovModel, Measure, Prefix};
use crate::scalar::Scalar;

/// Spectral radii at or above `1 − SPECTRAL_EPS` never certify anything.
pub const SPECTRAL_EPS: f64 = 1e-9;

/// Slack added to float-mode witness bounds.
pub const FLOAT_WITNESS_SLACK: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Decision {
    Equivalent,
    Singular,
    Inconclusive,
}

impl Decision {
    /// Process exit status of the CLI for this decision.
    pub fn exit_code(self) -> i32 {
        match self {
            Decision::Equivalent => 0,
            Decision::Singular => 10,
            Decision::Inconclusive => 20,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Basis {
    Exact,
    SpectralCertificate,
    AnalyticTail,
    TruncationOnly,
}

impl Basis {
    pub fn is_certified(self) -> bool {
        self != Basis::TruncationOnly
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum CriterionName {
    MCriterion,
    PredictableSum,
    Kakutani,
    MarkovSpectral,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CriterionResult {
    pub name: CriterionName,
    pub contribution: Decision,
    pub basis: Basis,
    pub values: BTreeMap<String, f64>,
    pub bounds: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl CriterionResult {
    fn new(name: CriterionName) -> Self {
        CriterionResult {
            name,
            contribution: Decision::Inconclusive,
            basis: Basis::TruncationOnly,
            values: BTreeMap::new(),
            bounds: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    fn value(mut self, key: &str, v: f64) -> Self {
        if v.is_finite() {
            self.values.insert(key.to_string(), v);
        }
        self
    }

    fn bound(mut self, key: &str, v: f64) -> Self {
        if v.is_finite() {
            self.bounds.insert(key.to_string(), v);
        }
        self
    }

    fn certify(mut self, decision: Decision, basis: Basis) -> Self {
        self.contribution = decision;
        self.basis = basis;
        self
    }

    fn note(mut self, text: impl Into<String>) -> Self {
        self.notes.push(text.into());
        self
    }

    pub fn is_certified(&self) -> bool {
        self.contribution != Decision::Inconclusive && self.basis.is_certified()
    }
}

/// `B = {Φ_{k+1} > 1}` on the depth-`k` atoms with its masses, as exact values of the mode.
#[derive(Clone, Debug, PartialEq)]
pub struct Witness<S> {
    pub k: usize,
    pub p_mass: S,
    pub q_complement_mass: S,
    /// `E_{ℙ'}[M_{1,k}] = E_ℙ[√Φ_{k+1}]`, which bounds each of the two masses.
    pub bound: S,
    pub method: WitnessMethod,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WitnessMethod {
    Enumeration,
    RatioClassDp,
}

/// Serializable summary of a [`Witness`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WitnessSet {
    pub k: usize,
    pub description: String,
    pub p_mass: f64,
    pub q_complement_mass: f64,
    pub bound: f64,
    /// `2·bound + slack` (slack is 0 in exact mode).
    pub certified_bound: f64,
    pub method: WitnessMethod,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact: Option<BTreeMap<String, String>>,
}

impl<S: Scalar> Witness<S> {
    /// Both per-set inequalities `ℙ(B) ≤ bound`, `ℙ'(Ω∖B) ≤ bound`.
    pub fn bounds_hold(&self, tol: f64) -> bool {
        self.p_mass.le_within(&self.bound, tol) && self.q_complement_mass.le_within(&self.bound, tol)
    }

    pub fn summary(&self) -> WitnessSet {
        let slack = if S::EXACT { 0.0 } else { FLOAT_WITNESS_SLACK };
        let exact = S::EXACT.then(|| {
            BTreeMap::from([
                ("p_mass".to_string(), self.p_mass.to_text()),
                ("q_complement_mass".to_string(), self.q_complement_mass.to_text()),
                ("bound".to_string(), self.bound.to_text()),
            ])
        });
        WitnessSet {
            k: self.k,
            description: format!("depth-{} atoms with Phi_{} > 1", self.k, self.k + 1),
            p_mass: self.p_mass.to_f64(),
            q_complement_mass: self.q_complement_mass.to_f64(),
            bound: self.bound.to_f64(),
            certified_bound: 2.0 * self.bound.to_f64() + slack,
            method: self.method,
            exact,
        }
    }
}

/// Witness set at depth `k`. Markov pairs whose atom count exceeds the budget
/// are handled by a dynamic program over (state, counts of each likelihood-ratio value).
pub fn witness_set<S: Scalar>(
    model: &KernelPairModel<S>,
    k: usize,
    budget: AtomBudget,
) -> Result<Witness<S>> {
    if let KernelPairModel::Markov(m) = model {
        let atoms = (m.states as f64).powi(k as i32);
        if atoms > budget.0 as f64 {
            return markov_witness(model, m, k, budget);
        }
    }
    enumeration_witness(model, k, budget)
}

/// Witness set by full enumeration of the depth-`k` atoms.
pub fn enumeration_witness<S: Scalar>(
    model: &KernelPairModel<S>,
    k: usize,
    budget: AtomBudget,
) -> Result<Witness<S>> {
    let atoms = exact_tree::enumerate_cylinders(model, k, budget)?;
    let mut p_mass = S::zero();
    let mut q_in = S::zero();
    for a in &atoms.atoms {
        let above = if S::EXACT {
            a.phi.cmp_value(&S::one()).is_gt()
        } else {
            a.log_phi > 0.0
        };
        if above {
            p_mass = p_mass + a.p_mass.clone();
            q_in = q_in + a.q_mass.clone();
        }
    }
    let bound = if k == 0 {
        S::one()
    } else {
        affinity::m_nk(model, &Prefix::empty(), 1, k)?
    };
    Ok(Witness {
        k,
        p_mass,
        q_complement_mass: S::one() - q_in,
        bound,
        method: WitnessMethod::Enumeration,
    })
}

fn markov_witness<S: Scalar>(
    model: &KernelPairModel<S>,
    m: &MarkovModel<S>,
    k: usize,
    budget: AtomBudget,
) -> Result<Witness<S>> {
    // distinct likelihood ratios other than 1
    let mut classes: Vec<S> = Vec::new();
    let mut class_of = |r: S| -> Option<usize> {
        if r == S::one() {
            return None;
        }
        Some(match classes.iter().position(|c| *c == r) {
            Some(i) => i,
            None => {
                classes.push(r);
                classes.len() - 1
            }
        })
    };
    let init = m.initial();
    let init_class: Vec<Option<usize>> = (0..m.states)
        .map(|s| if init.p[s].is_zero() { None } else { class_of(init.ratio(s)) })
        .collect();
    let step_class: Vec<Vec<Option<usize>>> = (0..m.states)
        .map(|s| {
            let row = m.row(s);
            (0..m.states)
                .map(|t| if row.p[t].is_zero() { None } else { class_of(row.ratio(t)) })
                .collect()
        })
        .collect();
    let c = classes.len();
    type Layer<S> = BTreeMap<(usize, Vec<u32>), (S, S)>;
    let bump = |counts: &[u32], class: Option<usize>| {
        let mut v = counts.to_vec();
        if let Some(i) = class {
            v[i] += 1;
        }
        v
    };
    let mut layer: Layer<S> = BTreeMap::new();
    for s in init.support() {
        let key = (s, bump(&vec![0; c], init_class[s]));
        let e = layer.entry(key).or_insert((S::zero(), S::zero()));
        e.0 = e.0.clone() + init.p[s].clone();
        e.1 = e.1.clone() + init.q[s].clone();
    }
    for _ in 1..k {
        let mut next: Layer<S> = BTreeMap::new();
        for ((s, counts), (pm, qm)) in &layer {
            let row = m.row(*s);
            for t in row.support() {
                let key = (t, bump(counts, step_class[*s][t]));
                let e = next.entry(key).or_insert((S::zero(), S::zero()));
                e.0 = e.0.clone() + pm.clone() * row.p[t].clone();
                e.1 = e.1.clone() + qm.clone() * row.q[t].clone();
            }
        }
        if next.len() as u64 > budget.0 {
            return Err(Error::BudgetExceeded {
                atoms: next.len() as u128,
                budget: budget.0,
            });
        }
        layer = next;
    }
    let logs: Vec<f64> = classes.iter().map(|r| r.to_f64().ln()).collect();
    let powers: Vec<Vec<S>> = if S::EXACT {
        classes
            .iter()
            .map(|r| {
                let mut v = vec![S::one()];
                for j in 0..k {
                    let next = v[j].clone() * r.clone();
                    v.push(next);
                }
                v
            })
            .collect()
    } else {
        Vec::new()
    };
    let mut p_mass = S::zero();
    let mut q_in = S::zero();
    for ((_, counts), (pm, qm)) in layer {
        let above = if S::EXACT {
            let phi = S::product(
                counts
                    .iter()
                    .enumerate()
                    .map(|(i, &n)| powers[i][n as usize].clone()),
            );
            phi.cmp_value(&S::one()).is_gt()
        } else {
            counts
                .iter()
                .zip(&logs)
                .map(|(&n, l)| n.to_f64().unwrap() * l)
                .sum::<f64>()
                > 0.0
        };
        if above {
            p_mass = p_mass + pm;
            q_in = q_in + qm;
        }
    }
    let bound = if k == 0 {
        S::one()
    } else {
        affinity::m_nk(model, &Prefix::empty(), 1, k)?
    };
    Ok(Witness {
        k,
        p_mass,
        q_complement_mass: S::one() - q_in,
        bound,
        method: WitnessMethod::RatioClassDp,
    })
}

/// Partial sums `Σ_{n≤N} |ln ρₙ(x_{<n})|` along `path`, `N = 1..=n_max`.
///
/// Product models ignore the path; other models need `|path| ≥ n_max − 1`.
pub fn predictable_sum_path<S: Scalar>(
    model: &KernelPairModel<S>,
    path: &Prefix,
    n_max: usize,
) -> Result<Vec<f64>> {
    if let Some(h) = model.horizon() {
        if n_max > h {
            return Err(Error::DepthExceeded {
                requested: n_max,
                horizon: h,
            });
        }
    }
    let mut out = Vec::with_capacity(n_max);
    let mut acc = 0.0;
    for n in 1..=n_max {
        let term = if model.is_product() {
            model.coordinate_log_affinity(n)?
        } else {
            if path.len() < n - 1 {
                return Err(Error::InvalidArgument(format!(
                    "path of length {} is too short for n = {n}",
                    path.len()
                )));
            }
            model.step_log_affinity(&path.truncate(n - 1))?
        };
        acc += term.abs();
        out.push(acc);
    }
    Ok(out)
}

/// Per-atom partial sums at depth `depth`: `Σ_{n≤depth} |ln ρₙ(x_{<n})|` on each atom.
pub fn predictable_sum_atoms<S: Scalar>(
    model: &KernelPairModel<S>,
    depth: usize,
    budget: AtomBudget,
) -> Result<exact_tree::AtomMap<f64>> {
    let atoms = exact_tree::enumerate_cylinders(model, depth, budget)?;
    atoms
        .atoms
        .iter()
        .map(|a| {
            let sums = if depth == 0 {
                Vec::new()
            } else {
                predictable_sum_path(model, &a.prefix, depth)?
            };
            Ok((a.prefix.clone(), sums.last().copied().unwrap_or(0.0)))
        })
        .collect()
}

/// `E[Σ_{n≤N} |ln ρₙ|]` under the selected measure for `N = 1..=n_max`.
pub fn predictable_sum_expected<S: Scalar>(
    model: &KernelPairModel<S>,
    n_max: usize,
    under: Measure,
    budget: AtomBudget,
) -> Result<Vec<f64>> {
    let mut terms = Vec::with_capacity(n_max);
    match model {
        KernelPairModel::Product(_) | KernelPairModel::GaussianProduct(_) => {
            return predictable_sum_path(model, &Prefix::empty(), n_max);
        }
        KernelPairModel::Markov(m) => {
            let KernelPairModel::Markov(fm) = model.to_float() else {
                unreachable!()
            };
            let row_logs: Vec<f64> = (0..fm.states)
                .map(|s| fm.row(s).affinity().ln().abs())
                .collect();
            terms.push(m.initial().affinity().to_f64().ln().abs());
            let (init, rows) = match under {
                Measure::P => (&fm.init_p, &fm.p),
                Measure::Q => (&fm.init_q, &fm.q),
            };
            let mut dist = init.clone();
            for _ in 2..=n_max {
                terms.push(dist.iter().zip(&row_logs).map(|(d, l)| d * l).sum());
                dist = (0..fm.states)
                    .map(|t| (0..fm.states).map(|s| dist[s] * rows[s][t]).sum())
                    .collect();
            }
        }
        KernelPairModel::Tree(_) => {
            if let Some(h) = model.horizon() {
                if n_max > h {
                    return Err(Error::DepthExceeded {
                        requested: n_max,
                        horizon: h,
                    });
                }
            }
            for n in 1..=n_max {
                let atoms = exact_tree::enumerate_cylinders(model, n - 1, budget)?;
                let mut t = 0.0;
                for a in &atoms.atoms {
                    let mass = match under {
                        Measure::P => a.p_mass.to_f64(),
                        Measure::Q => a.q_mass.to_f64(),
                    };
                    t += mass * model.step_log_affinity(&a.prefix)?.abs();
                }
                terms.push(t);
            }
        }
    }
    let mut acc = 0.0;
    Ok(terms
        .into_iter()
        .map(|t| {
            acc += t;
            acc
        })
        .collect())
}

/// Kakutani's test on a product model, `k_max` explicit coordinates plus the analytic tail.
pub fn kakutani_decide<S: Scalar>(model: &KernelPairModel<S>, k_max: usize) -> Result<CriterionResult> {
    if !model.is_product() {
        return Err(Error::NotProduct);
    }
    let k = model.horizon().map_or(k_max, |h| k_max.min(h));
    let mut hellinger = 0.0;
    let mut log_product = 0.0;
    for i in 1..=k {
        let l = model.coordinate_log_affinity(i)?;
        log_product += l;
        hellinger += -l.exp_m1();
    }
    let mut r = CriterionResult::new(CriterionName::Kakutani)
        .value("k", k as f64)
        .value("hellinger_partial_sum", hellinger)
        .value("log_affinity_partial_sum", log_product)
        .value("affinity_product_upper", log_product.exp());
    if model.kernels_identical() {
        return Ok(r.certify(Decision::Equivalent, Basis::Exact));
    }
    let tail = model.tail();
    if model.horizon().is_some() || tail.is_some_and(|t| t.is_identity()) {
        // finitely many differing coordinates
        let rest = affinity::product_tail_bound(model, k)?.unwrap_or(0.0);
        return Ok(r
            .bound("tail_bound", rest)
            .note("finitely many coordinates differ")
            .certify(Decision::Equivalent, Basis::Exact));
    }
    if let Some(b) = affinity::product_tail_bound(model, k)? {
        r = r.bound("tail_bound", b);
        if affinity::product_max_increment(model, k)? <= 0.5 {
            r = r.bound("affinity_product_lower", log_product.exp() * (-2.0 * b).exp());
        }
        return Ok(r.certify(Decision::Equivalent, Basis::AnalyticTail));
    }
    let first = model.stored_coordinates() + 1;
    if let Some(minorant) = tail.and_then(|t| t.divergence_minorant(first)) {
        let from = first.max(1);
        r = r
            .bound("minorant_coefficient", minorant.coefficient)
            .bound("minorant_exponent", minorant.exponent);
        if k >= from {
            r = r.bound("minorant_partial_sum", minorant.partial_sum(from, k));
        }
        return Ok(r
            .note("tail increments dominate a divergent power series")
            .certify(Decision::Singular, Basis::AnalyticTail));
    }
    Ok(r.note("no analytic tail information"))
}

/// Spectral rule on the Markov affinity operator `H`.
pub fn markov_spectral_decide<S: Scalar>(model: &KernelPairModel<S>) -> Result<CriterionResult> {
    let KernelPairModel::Markov(m) = model else {
        return Err(Error::NotMarkov);
    };
    let op = affinity::markov_operator(model)?;
    let r = CriterionResult::new(CriterionName::MarkovSpectral)
        .value("spectral_radius", op.spectral_radius)
        .value("iterations", op.iterations as f64)
        .bound("spectral_lower", op.spectral_lower)
        .bound("spectral_upper", op.spectral_upper);
    if m.transitions_identical() {
        return Ok(r
            .note("transition kernels coincide; initial laws have matched supports")
            .certify(Decision::Equivalent, Basis::Exact));
    }
    if !op.irreducible {
        return Ok(r.note("affinity operator is reducible; no spectral certificate"));
    }
    if op.spectral_upper <= 1.0 - SPECTRAL_EPS {
        return Ok(r
            .bound("certificate_constant", op.certificate_constant)
            .note("M_{n,k} <= C * lambda^(k-n+1) with lambda = spectral_upper")
            .certify(Decision::Singular, Basis::SpectralCertificate));
    }
    Ok(r.note("spectral radius within tolerance of 1"))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DecideConfig {
    /// Enumeration depth for witness sets and per-atom tables.
    pub depth: usize,
    pub k_max: usize,
    pub tol: f64,
    #[serde(skip)]
    pub budget: AtomBudget,
}

impl Default for DecideConfig {
    fn default() -> Self {
        DecideConfig {
            depth: 4,
            k_max: 1000,
            tol: 1e-10,
            budget: AtomBudget::default(),
        }
    }
}

/// Supporting data reported with every verdict.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Evidence {
    /// `(k, upper bound on M_{1,k})`, nonincreasing in `k`.
    pub m_upper: Vec<(usize, f64)>,
    /// `(N, E_ℙ[Σ_{n≤N} |ln ρₙ|])`.
    pub predictable_sum: Vec<(usize, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m_limit: Option<affinity::MLimitEstimate>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Verdict {
    pub decision: Decision,
    pub basis: Basis,
    pub criteria: Vec<CriterionResult>,
    pub witness: Option<WitnessSet>,
    pub evidence: Evidence,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

/// At most about `count` distinct values in `1..=k_max`, log-spaced, always including both ends.
pub fn sample_points(k_max: usize, count: usize) -> Vec<usize> {
    if k_max <= count {
        return (1..=k_max).collect();
    }
    let mut out: Vec<usize> = (0..count)
        .map(|i| {
            let t = i as f64 / (count - 1) as f64;
            (k_max as f64).powf(t).round() as usize
        })
        .collect();
    out.push(k_max);
    out.dedup();
    out.retain(|&k| k >= 1);
    out.sort_unstable();
    out.dedup();
    out
}

/// `(k, M_{1,k})` at the requested `k`, in float, for any model.
pub fn m_trajectory(model: &KernelPairModel<f64>, ks: &[usize]) -> Result<Vec<(usize, f64)>> {
    let Some(&last) = ks.last() else {
        return Ok(Vec::new());
    };
    let mut out = Vec::with_capacity(ks.len());
    match model {
        KernelPairModel::Product(_) | KernelPairModel::GaussianProduct(_) => {
            let mut log = 0.0;
            let mut idx = 0;
            for i in 1..=last {
                log += model.coordinate_log_affinity(i)?;
                if ks[idx] == i {
                    out.push((i, log.exp()));
                    idx += 1;
                }
            }
        }
        _ => {
            for &k in ks {
                out.push((k, affinity::m_nk(model, &Prefix::empty(), 1, k)?));
            }
        }
    }
    Ok(out)
}

fn m_criterion(
    fm: &KernelPairModel<f64>,
    identical: bool,
    k_max: usize,
) -> Result<(CriterionResult, affinity::MLimitEstimate)> {
    let est = affinity::estimate_m_limit(fm, &Prefix::empty(), k_max.max(1), None)?;
    let mut r = CriterionResult::new(CriterionName::MCriterion)
        .value("k", est.k as f64)
        .value("m_1k_upper", est.upper)
        .bound("m_1_upper", est.upper);
    if let Some(l) = est.lower {
        r = r.bound("m_1_lower", l);
    }
    if identical {
        return Ok((
            r.note("kernels coincide, so M_{n,k} = 1 for all n, k")
                .certify(Decision::Equivalent, Basis::Exact),
            est,
        ));
    }
    if let Some(h) = fm.horizon() {
        return Ok((
            r.note(format!(
                "finite horizon {h}: M_n = 1 for n > {h}, so M = 1"
            ))
            .certify(Decision::Equivalent, Basis::Exact),
            est,
        ));
    }
    let r = match (fm, est.status, est.lower) {
        (KernelPairModel::Markov(_), LimitStatus::Bracketed, Some(0.0)) => r
            .note("spectral certificate gives M_{n,k} -> 0 geometrically")
            .certify(Decision::Singular, Basis::SpectralCertificate),
        (KernelPairModel::Product(_) | KernelPairModel::GaussianProduct(_), LimitStatus::Bracketed, Some(l))
            if l > 0.0 =>
        {
            r.note("product model: M_n >= M_1 > 0 and M_n -> 1 under the tail bound")
                .certify(Decision::Equivalent, Basis::AnalyticTail)
        }
        _ => r.note("truncation value only; M_{1,k_max} is an upper bound"),
    };
    Ok((r, est))
}

fn predictable_criterion(sums: &[(usize, f64)]) -> CriterionResult {
    let mut r = CriterionResult::new(CriterionName::PredictableSum)
        .note("evidence only; partial sums cannot certify convergence or divergence");
    if let Some(&(n, s)) = sums.last() {
        r = r.value("n", n as f64).value("expected_partial_sum", s);
    }
    r
}

/// Runs every applicable criterion and folds them into a verdict.
pub fn decide_equivalence<S: Scalar>(
    model: &KernelPairModel<S>,
    config: &DecideConfig,
) -> Result<Verdict> {
    if config.k_max == 0 {
        return Err(Error::InvalidArgument("k_max must be at least 1".into()));
    }
    let fm = model.to_float();
    let identical = model.kernels_identical();
    let mut criteria = Vec::new();
    let mut notes = Vec::new();

    let (m_result, estimate) = m_criterion(&fm, identical, config.k_max)?;
    criteria.push(m_result);

    let horizon_k = fm.horizon().map_or(config.k_max, |h| config.k_max.min(h));
    let ks = sample_points(horizon_k, 64);
    let m_upper = m_trajectory(&fm, &ks)?;

    let sum_n = match &fm {
        KernelPairModel::Tree(_) => config.depth.min(horizon_k),
        _ => horizon_k,
    };
    let predictable = match predictable_sum_expected(&fm, sum_n, Measure::P, config.budget) {
        Ok(sums) => {
            let pick = sample_points(sums.len(), 64);
            pick.into_iter().map(|n| (n, sums[n - 1])).collect()
        }
        Err(Error::BudgetExceeded { .. }) => {
            notes.push("predictable-sum expectation skipped: atom budget".into());
            Vec::new()
        }
        Err(e) => return Err(e),
    };
    criteria.push(predictable_criterion(&predictable));

    if model.is_product() {
        criteria.push(kakutani_decide(&fm, config.k_max)?);
    }
    if let KernelPairModel::Markov(_) = model {
        criteria.push(markov_spectral_decide(model)?);
    }

    let witness = if model.is_discrete() {
        let k = fm.horizon().map_or(config.depth, |h| config.depth.min(h));
        match witness_set(model, k, config.budget) {
            Ok(w) => Some(w.summary()),
            Err(Error::BudgetExceeded { .. }) => {
                notes.push(format!("witness set at depth {k} skipped: atom budget"));
                None
            }
            Err(e) => return Err(e),
        }
    } else {
        None
    };

    let (decision, basis) = fold_criteria(&criteria)?;
    Ok(Verdict {
        decision,
        basis,
        criteria,
        witness,
        evidence: Evidence {
            m_upper,
            predictable_sum: predictable,
            m_limit: Some(estimate),
        },
        notes,
    })
}

/// Certified Singular wins, certified Equivalent next, otherwise Inconclusive.
/// Two certified criteria that disagree are an error.
pub fn fold_criteria(criteria: &[CriterionResult]) -> Result<(Decision, Basis)> {
    let certified: Vec<&CriterionResult> = criteria.iter().filter(|c| c.is_certified()).collect();
    let has = |d: Decision| certified.iter().any(|c| c.contribution == d);
    if has(Decision::Singular) && has(Decision::Equivalent) {
        let names: Vec<String> = certified
            .iter()
            .map(|c| format!("{:?}={:?}", c.name, c.contribution))
            .collect();
        return Err(Error::InconsistentCriteria(names.join(", ")));
    }
    for d in [Decision::Singular, Decision::Equivalent] {
        if let Some(basis) = certified
            .iter()
            .filter(|c| c.contribution == d)
            .map(|c| c.basis)
            .min()
        {
            return Ok((d, basis));
        }
    }
    Ok((Decision::Inconclusive, Basis::TruncationOnly))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::scalar::Surd;

    fn cfg(k_max: usize) -> DecideConfig {
        DecideConfig {
            k_max,
            ..DecideConfig::default()
        }
    }

    #[test]
    fn witness_on_bernoulli_depth_two() {
        let m = fixtures::bernoulli_iid_exact();
        let w = witness_set(&m, 2, AtomBudget::default()).unwrap();
        assert_eq!(w.p_mass, Surd::from_ratio(1, 4));
        assert_eq!(w.q_complement_mass, Surd::from_ratio(7, 16));
        assert!(w.bounds_hold(0.0));
        let s = w.summary();
        assert_eq!(s.exact.unwrap()["p_mass"], "1/4");
    }

    #[test]
    fn witness_for_identical_kernels_is_vacuous() {
        let m = fixtures::identical_bernoulli_exact();
        let w = witness_set(&m, 3, AtomBudget::default()).unwrap();
        assert_eq!(w.p_mass, Surd::zero());
        assert_eq!(w.q_complement_mass, Surd::one());
        assert_eq!(w.bound, Surd::one());
        assert_eq!(w.summary().certified_bound, 2.0);
    }

    #[test]
    fn markov_dp_matches_enumeration() {
        let m = fixtures::markov_two_state_exact();
        for k in 1..=8 {
            let a = enumeration_witness(&m, k, AtomBudget::default()).unwrap();
            let KernelPairModel::Markov(mm) = &m else { unreachable!() };
            let b = markov_witness(&m, mm, k, AtomBudget::default()).unwrap();
            assert_eq!(a.p_mass, b.p_mass, "k={k}");
            assert_eq!(a.q_complement_mass, b.q_complement_mass, "k={k}");
            assert_eq!(a.bound, b.bound);
        }
        for seed in 0..5 {
            let m = fixtures::random_rational_markov(seed, 3);
            let KernelPairModel::Markov(mm) = &m else { unreachable!() };
            for k in 1..=5 {
                let a = enumeration_witness(&m, k, AtomBudget::default()).unwrap();
                let b = markov_witness(&m, mm, k, AtomBudget::default()).unwrap();
                assert_eq!((a.p_mass, a.q_complement_mass), (b.p_mass, b.q_complement_mass));
            }
        }
    }

    #[test]
    fn markov_witness_decays() {
        let m = fixtures::markov_two_state();
        let w100 = witness_set(&m, 100, AtomBudget::default()).unwrap();
        let w200 = witness_set(&m, 200, AtomBudget::default()).unwrap();
        assert_eq!(w200.method, WitnessMethod::RatioClassDp);
        assert!(w200.bound < w100.bound);
        assert!(w200.bound < 0.2);
        assert!(w200.bounds_hold(1e-12));
    }

    #[test]
    fn predictable_sums() {
        let iid = fixtures::bernoulli_iid();
        let s = predictable_sum_path(&iid, &Prefix::empty(), 10).unwrap();
        let step = -((6f64.sqrt() + 2f64.sqrt()) / 4.0).ln();
        assert!((step - 0.034668).abs() < 1e-6);
        for (i, v) in s.iter().enumerate() {
            assert!((v - step * (i + 1) as f64).abs() < 1e-12);
        }
        let same = fixtures::identical_bernoulli_exact();
        assert!(predictable_sum_path(&same, &Prefix::empty(), 5)
            .unwrap()
            .iter()
            .all(|&v| v == 0.0));
        let g = fixtures::gaussian_family(1.0);
        let s = predictable_sum_path(&g, &Prefix::empty(), 20_000).unwrap();
        let zeta2_8 = std::f64::consts::PI.powi(2) / 48.0;
        assert!((s.last().unwrap() - zeta2_8).abs() < 1e-5);
        assert!(s.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn predictable_expectation_agrees_with_atoms() {
        let m = fixtures::random_rational_tree(5, 3, 4);
        let depth = m.horizon().unwrap();
        let per_atom = predictable_sum_atoms(&m, depth, AtomBudget::default()).unwrap();
        let atoms = exact_tree::enumerate_cylinders(&m, depth, AtomBudget::default()).unwrap();
        let mean: f64 = atoms
            .atoms
            .iter()
            .map(|a| a.p_mass.to_f64() * per_atom[&a.prefix])
            .sum();
        let e = predictable_sum_expected(&m, depth, Measure::P, AtomBudget::default()).unwrap();
        assert!((e[depth - 1] - mean).abs() < 1e-12);
        let mk = fixtures::markov_two_state();
        let e = predictable_sum_expected(&mk, 4, Measure::P, AtomBudget::default()).unwrap();
        let brute = predictable_sum_atoms(&mk, 4, AtomBudget::default()).unwrap();
        let atoms = exact_tree::enumerate_cylinders(&mk, 4, AtomBudget::default()).unwrap();
        let mean: f64 = atoms.atoms.iter().map(|a| a.p_mass * brute[&a.prefix]).sum();
        assert!((e[3] - mean).abs() < 1e-12);
    }

    #[test]
    fn kakutani_cases() {
        let g = fixtures::gaussian_family(1.0);
        let r = kakutani_decide(&g, 1000).unwrap();
        assert_eq!((r.contribution, r.basis), (Decision::Equivalent, Basis::AnalyticTail));
        let g = fixtures::gaussian_family(0.5);
        let r = kakutani_decide(&g, 1000).unwrap();
        assert_eq!((r.contribution, r.basis), (Decision::Singular, Basis::AnalyticTail));
        let finite = fixtures::random_rational_product(1, 3, 4);
        let r = kakutani_decide(&finite, 10).unwrap();
        assert_eq!((r.contribution, r.basis), (Decision::Equivalent, Basis::Exact));
        assert_eq!(
            kakutani_decide(&fixtures::bernoulli_tree(2), 3).unwrap_err(),
            Error::NotProduct
        );
    }

    #[test]
    fn spectral_cases() {
        let r = markov_spectral_decide(&fixtures::markov_two_state()).unwrap();
        assert_eq!(r.contribution, Decision::Singular);
        assert_eq!(r.basis, Basis::SpectralCertificate);
        let lambda = 0.72f64.sqrt() + 0.02f64.sqrt();
        assert!((r.values["spectral_radius"] - lambda).abs() < 1e-10);
        let same = KernelPairModel::Markov(MarkovModel {
            states: 2,
            p: vec![vec![0.5, 0.5], vec![0.2, 0.8]],
            q: vec![vec![0.5, 0.5], vec![0.2, 0.8]],
            init_p: vec![0.5, 0.5],
            init_q: vec![0.9, 0.1],
        });
        let r = markov_spectral_decide(&same).unwrap();
        assert_eq!((r.contribution, r.basis), (Decision::Equivalent, Basis::Exact));
        // rows differ only by 1e-12: radius within SPECTRAL_EPS of 1
        let close = KernelPairModel::Markov(MarkovModel {
            states: 2,
            p: vec![vec![0.5, 0.5], vec![0.2, 0.8]],
            q: vec![vec![0.5 + 1e-12, 0.5 - 1e-12], vec![0.2, 0.8]],
            init_p: vec![0.5, 0.5],
            init_q: vec![0.5, 0.5],
        });
        let r = markov_spectral_decide(&close).unwrap();
        assert_eq!(r.contribution, Decision::Inconclusive);
        let reducible = KernelPairModel::Markov(MarkovModel {
            states: 2,
            p: vec![vec![1.0, 0.0], vec![0.5, 0.5]],
            q: vec![vec![1.0, 0.0], vec![0.25, 0.75]],
            init_p: vec![0.5, 0.5],
            init_q: vec![0.5, 0.5],
        });
        let r = markov_spectral_decide(&reducible).unwrap();
        assert_eq!(r.contribution, Decision::Inconclusive);
        assert!(r.notes[0].contains("reducible"));
    }

    #[test]
    fn verdicts_on_fixtures() {
        let v = decide_equivalence(&fixtures::identical_bernoulli_exact(), &cfg(100)).unwrap();
        assert_eq!((v.decision, v.basis), (Decision::Equivalent, Basis::Exact));
        let v = decide_equivalence(&fixtures::gaussian_family(1.0), &cfg(1000)).unwrap();
        assert_eq!((v.decision, v.basis), (Decision::Equivalent, Basis::AnalyticTail));
        let v = decide_equivalence(&fixtures::bernoulli_iid_exact(), &cfg(100)).unwrap();
        assert_eq!(v.decision, Decision::Singular);
        let w = v.witness.unwrap();
        assert!(w.p_mass + w.q_complement_mass <= w.certified_bound);
        let v = decide_equivalence(&fixtures::markov_two_state(), &cfg(200)).unwrap();
        assert_eq!((v.decision, v.basis), (Decision::Singular, Basis::SpectralCertificate));
        assert!(v
            .evidence
            .m_upper
            .windows(2)
            .all(|w| w[0].0 < w[1].0 && w[1].1 <= w[0].1));
    }

    #[test]
    fn kakutani_boundary_for_both_families() {
        for alpha in [0.4, 0.5, 0.6, 0.75, 1.0] {
            let expected = if 2.0 * alpha > 1.0 {
                Decision::Equivalent
            } else {
                Decision::Singular
            };
            let g = fixtures::gaussian_family(alpha);
            assert_eq!(decide_equivalence(&g, &cfg(1000)).unwrap().decision, expected, "{alpha}");
            let b = fixtures::bernoulli_family(0.5, 0.25, alpha);
            assert_eq!(decide_equivalence(&b, &cfg(1000)).unwrap().decision, expected, "{alpha}");
        }
    }

    #[test]
    fn conflicting_certificates_are_an_error() {
        let a = CriterionResult::new(CriterionName::Kakutani).certify(Decision::Singular, Basis::AnalyticTail);
        let b = CriterionResult::new(CriterionName::MCriterion).certify(Decision::Equivalent, Basis::Exact);
        assert!(matches!(
            fold_criteria(&[a.clone(), b]),
            Err(Error::InconsistentCriteria(_))
        ));
        let weak = CriterionResult::new(CriterionName::PredictableSum);
        assert_eq!(
            fold_criteria(&[a, weak.clone()]).unwrap(),
            (Decision::Singular, Basis::AnalyticTail)
        );
        assert_eq!(
            fold_criteria(&[weak]).unwrap(),
            (Decision::Inconclusive, Basis::TruncationOnly)
        );
    }

    #[test]
    fn sample_points_are_sorted_and_bounded() {
        assert_eq!(sample_points(5, 64), vec![1, 2, 3, 4, 5]);
        let s = sample_points(10_000, 64);
        assert_eq!(*s.first().unwrap(), 1);
        assert_eq!(*s.last().unwrap(), 10_000);
        assert!(s.len() <= 65);
        assert!(s.windows(2).all(|w| w[0] < w[1]));
    }
}
