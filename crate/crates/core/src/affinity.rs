//! Conditional affinities `M_{n,k} = 𝔼(√(φₙ⋯φ_k) | 𝔉ₙ)` and the objects built on them.
//!
//! Three engines compute `M_{n,k}`:
//! - [`Engine::TreeDp`]: backward recursion over the prefix tree, any discrete model;
//! - [`Engine::ProductClosedForm`]: `∏_{i=n}^{k} ρᵢ` for product models (Gaussian included);
//! - [`Engine::MarkovPower`]: `(H^{k−n+1}𝟙)(state)` with `H[s,t] = √(P[s,t] Q[s,t])`.
//!
//! `n = k + 1` is accepted and gives the empty product 1.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact_tree::{self, AtomBudget, AtomMap};
use crate::models::{KernelPairModel, KernelStep, MarkovModel, Measure, Prefix};
use crate::scalar::Scalar;

/// Power iteration stops when successive iterates differ by less than this (max norm).
pub const POWER_TOL: f64 = 1e-12;
pub const POWER_MAX_ITERS: usize = 100_000;

/// A Markov limit bracket `[0, upper]` counts as tight below this width.
pub const LIMIT_BRACKET_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    TreeDp,
    ProductClosedForm,
    MarkovPower,
}

impl Engine {
    /// The engine matching the model variant.
    pub fn for_model<S: Scalar>(model: &KernelPairModel<S>) -> Engine {
        match model {
            KernelPairModel::Tree(_) => Engine::TreeDp,
            KernelPairModel::Markov(_) => Engine::MarkovPower,
            KernelPairModel::Product(_) | KernelPairModel::GaussianProduct(_) => {
                Engine::ProductClosedForm
            }
        }
    }
}

fn check_indices<S: Scalar>(
    model: &KernelPairModel<S>,
    prefix: &Prefix,
    n: usize,
    k: usize,
) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidArgument("n starts at 1".into()));
    }
    if prefix.len() != n - 1 {
        return Err(Error::InvalidArgument(format!(
            "prefix {prefix} has length {}, expected n - 1 = {}",
            prefix.len(),
            n - 1
        )));
    }
    if n > k + 1 {
        return Err(Error::InvalidArgument(format!("need n <= k, got n={n}, k={k}")));
    }
    if let Some(h) = model.horizon() {
        if k > h {
            return Err(Error::DepthExceeded {
                requested: k,
                horizon: h,
            });
        }
    }
    if let Some(a) = model.alphabet() {
        prefix.check_alphabet(a)?;
    }
    Ok(())
}

/// `Σ √(p q)`, or the dual form `Σ q √(p/q)` which is the same number.
fn step_weight<S: Scalar>(step: &KernelStep<S>, dual: bool) -> impl Fn(usize) -> S + '_ {
    move |a| {
        if dual {
            step.q[a].clone() * step.p[a].div(&step.q[a]).sqrt()
        } else {
            (step.p[a].clone() * step.q[a].clone()).sqrt()
        }
    }
}

fn tree_dp<S: Scalar>(
    model: &KernelPairModel<S>,
    prefix: &Prefix,
    k: usize,
    dual: bool,
) -> Result<S> {
    if prefix.len() >= k {
        return Ok(S::one());
    }
    let step = model.conditional_kernels(prefix)?;
    let w = step_weight(&step, dual);
    let mut acc = S::zero();
    for a in step.support() {
        acc = acc + w(a) * tree_dp(model, &prefix.child(a), k, dual)?;
    }
    Ok(acc)
}

fn product_closed_form<S: Scalar>(
    model: &KernelPairModel<S>,
    n: usize,
    k: usize,
    dual: bool,
) -> Result<S> {
    match model {
        KernelPairModel::GaussianProduct(_) => {
            let mut log = 0.0;
            for i in n..=k {
                log += model.coordinate_log_affinity(i)?;
            }
            Ok(S::from_f64(log.exp()))
        }
        KernelPairModel::Product(_) => {
            let factors = (n..=k)
                .map(|i| {
                    let step = model.product_kernel(i)?;
                    let w = step_weight(&step, dual);
                    Ok(step.support().fold(S::zero(), |acc, a| acc + w(a)))
                })
                .collect::<Result<Vec<S>>>()?;
            Ok(S::product(factors))
        }
        _ => Err(Error::EngineMismatch(format!(
            "product closed form needs prefix-free kernels, got a {} model",
            model.kind()
        ))),
    }
}

/// `H` (or its dual form) for a Markov pair.
fn markov_h<S: Scalar>(m: &MarkovModel<S>, dual: bool) -> Vec<Vec<S>> {
    (0..m.states)
        .map(|s| {
            let row = m.row(s);
            let w = step_weight(&row, dual);
            (0..m.states)
                .map(|t| if row.p[t].is_zero() { S::zero() } else { w(t) })
                .collect()
        })
        .collect()
}

fn mat_vec<S: Scalar>(h: &[Vec<S>], v: &[S]) -> Vec<S> {
    h.iter()
        .map(|row| {
            row.iter()
                .zip(v)
                .filter(|(x, _)| !x.is_zero())
                .fold(S::zero(), |acc, (x, y)| acc + x.clone() * y.clone())
        })
        .collect()
}

/// `H^j 𝟙`.
fn markov_tail_vector<S: Scalar>(h: &[Vec<S>], j: usize) -> Vec<S> {
    let mut v = vec![S::one(); h.len()];
    for _ in 0..j {
        v = mat_vec(h, &v);
    }
    v
}

fn markov_power<S: Scalar>(
    model: &KernelPairModel<S>,
    prefix: &Prefix,
    n: usize,
    k: usize,
    dual: bool,
) -> Result<S> {
    let KernelPairModel::Markov(m) = model else {
        return Err(Error::EngineMismatch(format!(
            "matrix-power engine needs a Markov model, got a {} model",
            model.kind()
        )));
    };
    if n == k + 1 {
        return Ok(S::one());
    }
    let h = markov_h(m, dual);
    match prefix.last() {
        Some(s) => Ok(markov_tail_vector(&h, k - n + 1).swap_remove(s)),
        None => {
            let w = markov_tail_vector(&h, k - 1);
            let init = m.initial();
            let iw = step_weight(&init, dual);
            Ok(init
                .support()
                .fold(S::zero(), |acc, s| acc + iw(s) * w[s].clone()))
        }
    }
}

fn m_nk_impl<S: Scalar>(
    model: &KernelPairModel<S>,
    engine: Engine,
    prefix: &Prefix,
    n: usize,
    k: usize,
    dual: bool,
) -> Result<S> {
    check_indices(model, prefix, n, k)?;
    match engine {
        Engine::TreeDp => tree_dp(model, prefix, k, dual),
        Engine::ProductClosedForm => product_closed_form(model, n, k, dual),
        Engine::MarkovPower => markov_power(model, prefix, n, k, dual),
    }
}

/// `M_{n,k}` on the atom `prefix` (`|prefix| = n − 1`), with the model's own engine.
pub fn m_nk<S: Scalar>(model: &KernelPairModel<S>, prefix: &Prefix, n: usize, k: usize) -> Result<S> {
    m_nk_impl(model, Engine::for_model(model), prefix, n, k, false)
}

/// `M_{n,k}` with an explicit engine; a mismatched engine is an error.
pub fn m_nk_with<S: Scalar>(
    model: &KernelPairModel<S>,
    engine: Engine,
    prefix: &Prefix,
    n: usize,
    k: usize,
) -> Result<S> {
    m_nk_impl(model, engine, prefix, n, k, false)
}

/// `M'_{n,k} = 𝔼'(√(φ'ₙ⋯φ'_k) | 𝔉ₙ)` with `φ' = p/q`, weighted by ℙ'.
pub fn m_nk_dual<S: Scalar>(
    model: &KernelPairModel<S>,
    prefix: &Prefix,
    n: usize,
    k: usize,
) -> Result<S> {
    m_nk_impl(model, Engine::for_model(model), prefix, n, k, true)
}

/// `N_{n,k} = √Φₙ · M_{n,k}` on the atom.
pub fn n_nk<S: Scalar>(model: &KernelPairModel<S>, prefix: &Prefix, n: usize, k: usize) -> Result<S> {
    let m = m_nk(model, prefix, n, k)?;
    if prefix.is_empty() {
        return Ok(m);
    }
    Ok(sqrt_phi(model, prefix)? * m)
}

fn sqrt_phi<S: Scalar>(model: &KernelPairModel<S>, prefix: &Prefix) -> Result<S> {
    let d = exact_tree::density(model, prefix)?;
    Ok(if S::EXACT {
        d.phi.sqrt()
    } else {
        S::from_f64((0.5 * d.log_phi).exp())
    })
}

/// Law of the state after `steps ≥ 1` coordinates under the selected measure.
fn markov_marginal<S: Scalar>(m: &MarkovModel<S>, steps: usize, measure: Measure) -> Vec<S> {
    let (init, rows) = match measure {
        Measure::P => (&m.init_p, &m.p),
        Measure::Q => (&m.init_q, &m.q),
    };
    let mut dist = init.clone();
    for _ in 1..steps {
        dist = (0..m.states)
            .map(|t| {
                (0..m.states)
                    .filter(|&s| !rows[s][t].is_zero())
                    .fold(S::zero(), |acc, s| acc + dist[s].clone() * rows[s][t].clone())
            })
            .collect();
    }
    dist
}

/// `Σ` over depth-`(n−1)` atoms of the selected measure's mass times `M_{n,k}`.
///
/// Under ℙ' this is the cross term `E_ℙ[√(Φₙ Φ_{k+1})]`.
pub fn expected_m<S: Scalar>(
    model: &KernelPairModel<S>,
    n: usize,
    k: usize,
    under: Measure,
    budget: AtomBudget,
) -> Result<S> {
    if n == 0 || n > k + 1 {
        return Err(Error::InvalidArgument(format!("need 1 <= n <= k, got n={n}, k={k}")));
    }
    match model {
        KernelPairModel::Product(_) | KernelPairModel::GaussianProduct(_) => {
            check_indices(model, &Prefix::empty(), 1, k)?;
            product_closed_form(model, n, k, false)
        }
        KernelPairModel::Markov(m) if n >= 2 => {
            let h = markov_h(m, false);
            let w = markov_tail_vector(&h, k + 1 - n);
            let dist = markov_marginal(m, n - 1, under);
            Ok(dist
                .into_iter()
                .zip(w)
                .fold(S::zero(), |acc, (d, x)| acc + d * x))
        }
        _ => {
            let atoms = exact_tree::enumerate_cylinders(model, n - 1, budget)?;
            let values: Vec<S> = atoms
                .atoms
                .par_iter()
                .map(|a| m_nk(model, &a.prefix, n, k))
                .collect::<Result<_>>()?;
            Ok(atoms
                .atoms
                .iter()
                .zip(values)
                .fold(S::zero(), |acc, (a, v)| {
                    let mass = match under {
                        Measure::P => a.p_mass.clone(),
                        Measure::Q => a.q_mass.clone(),
                    };
                    acc + mass * v
                }))
        }
    }
}

/// Both sides of `E_ℙ[(√Φₙ − √Φ_{k+1})²] = 2(1 − E_{ℙ'}[M_{n,k}])`.
///
/// The left side is brute force over the depth-`k` atoms.
#[derive(Clone, Debug, PartialEq)]
pub struct HellingerIdentity<S> {
    pub lhs: S,
    pub rhs: S,
}

impl<S: Scalar> HellingerIdentity<S> {
    pub fn holds(&self, tol: f64) -> bool {
        self.lhs.close_to(&self.rhs, tol)
    }
}

pub fn hellinger_identity<S: Scalar>(
    model: &KernelPairModel<S>,
    n: usize,
    k: usize,
    budget: AtomBudget,
) -> Result<HellingerIdentity<S>> {
    if n == 0 || n > k {
        return Err(Error::InvalidArgument(format!("need 1 <= n <= k, got n={n}, k={k}")));
    }
    let atoms = exact_tree::enumerate_cylinders(model, k, budget)?;
    let mut sqrt_head: BTreeMap<Prefix, S> = BTreeMap::new();
    let mut lhs = S::zero();
    for a in &atoms.atoms {
        let head = a.prefix.truncate(n - 1);
        if !sqrt_head.contains_key(&head) {
            let v = sqrt_phi(model, &head)?;
            sqrt_head.insert(head.clone(), v);
        }
        let tail = if S::EXACT {
            a.phi.sqrt()
        } else {
            S::from_f64((0.5 * a.log_phi).exp())
        };
        let d = sqrt_head[&head].clone() - tail;
        lhs = lhs + a.p_mass.clone() * d.clone() * d;
    }
    let e = expected_m(model, n, k, Measure::Q, budget)?;
    let rhs = S::from_f64(2.0) * (S::one() - e);
    Ok(HellingerIdentity { lhs, rhs })
}

/// The affinity operator of a Markov pair with its spectral data.
///
/// Spectral quantities are computed in floating point from `H`; `spectral_upper`
/// is a Collatz–Wielandt bound `max_i (Hx)_i / x_i ≥ λ` for the final iterate `x`,
/// so `H^j 𝟙 ≤ certificate_constant · spectral_upper^j` holds entrywise.
#[derive(Clone, Debug, PartialEq)]
pub struct MarkovAffinityOperator<S> {
    pub h: Vec<Vec<S>>,
    pub row_sums: Vec<S>,
    pub spectral_radius: f64,
    pub spectral_lower: f64,
    pub spectral_upper: f64,
    pub perron_vector: Option<Vec<f64>>,
    /// `1 / min_i x_i` for the final iterate.
    pub certificate_constant: f64,
    pub irreducible: bool,
    pub iterations: usize,
    pub converged: bool,
}

pub fn markov_operator<S: Scalar>(model: &KernelPairModel<S>) -> Result<MarkovAffinityOperator<S>> {
    let KernelPairModel::Markov(m) = model else {
        return Err(Error::NotMarkov);
    };
    let h = markov_h(m, false);
    let row_sums: Vec<S> = h
        .iter()
        .map(|r| r.iter().cloned().fold(S::zero(), |a, b| a + b))
        .collect();
    let hf: Vec<Vec<f64>> = h
        .iter()
        .map(|r| r.iter().map(Scalar::to_f64).collect())
        .collect();
    let irreducible = strongly_connected(&hf);
    let power = power_iteration(&hf);
    Ok(MarkovAffinityOperator {
        h,
        row_sums,
        spectral_radius: 0.5 * (power.lower + power.upper),
        spectral_lower: power.lower,
        spectral_upper: power.upper,
        perron_vector: irreducible.then(|| power.vector.clone()),
        certificate_constant: 1.0 / power.vector.iter().cloned().fold(f64::INFINITY, f64::min),
        irreducible,
        iterations: power.iterations,
        converged: power.converged,
    })
}

fn strongly_connected(h: &[Vec<f64>]) -> bool {
    let n = h.len();
    let reach = |forward: bool| {
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(s) = stack.pop() {
            for t in 0..n {
                let edge = if forward { h[s][t] } else { h[t][s] };
                if edge > 0.0 && !seen[t] {
                    seen[t] = true;
                    stack.push(t);
                }
            }
        }
        seen.into_iter().all(|x| x)
    };
    reach(true) && reach(false)
}

struct PowerResult {
    vector: Vec<f64>,
    lower: f64,
    upper: f64,
    iterations: usize,
    converged: bool,
}

/// Power iteration on the lazy operator `(H + I)/2`, which has the same Perron
/// vector as `H` and no periodicity. Start vector 𝟙, max-norm normalization.
fn power_iteration(h: &[Vec<f64>]) -> PowerResult {
    let n = h.len();
    let apply = |x: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| h[i].iter().zip(x).map(|(a, b)| a * b).sum::<f64>())
            .collect()
    };
    let mut x = vec![1.0; n];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < POWER_MAX_ITERS {
        iterations += 1;
        let hx = apply(&x);
        let mut y: Vec<f64> = hx.iter().zip(&x).map(|(a, b)| 0.5 * (a + b)).collect();
        let norm = y.iter().cloned().fold(0.0, f64::max);
        y.iter_mut().for_each(|v| *v /= norm);
        let diff = y
            .iter()
            .zip(&x)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        x = y;
        if diff < POWER_TOL {
            converged = true;
            break;
        }
    }
    let hx = apply(&x);
    let ratios: Vec<f64> = hx.iter().zip(&x).map(|(a, b)| a / b).collect();
    PowerResult {
        lower: ratios.iter().cloned().fold(f64::INFINITY, f64::min),
        // one ulp-scale allowance for the rounding in Hx
        upper: ratios.iter().cloned().fold(0.0, f64::max) * (1.0 + 4.0 * f64::EPSILON * n as f64),
        vector: x,
        iterations,
        converged,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitStatus {
    Bracketed,
    UpperOnly,
}

/// A bracket on `Mₙ = lim_k M_{n,k}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MLimitEstimate {
    pub n: usize,
    /// Largest `k` actually used.
    pub k: usize,
    pub upper: f64,
    pub lower: Option<f64>,
    pub status: LimitStatus,
}

impl MLimitEstimate {
    pub fn width(&self) -> Option<f64> {
        self.lower.map(|l| self.upper - l)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower.is_some_and(|l| l <= x) && x <= self.upper
    }
}

/// Upper bound on `Σ_{i>k} (1 − ρᵢ)` for a product model, `None` when unavailable.
pub fn product_tail_bound<S: Scalar>(model: &KernelPairModel<S>, k: usize) -> Result<Option<f64>> {
    if !model.is_product() {
        return Err(Error::NotProduct);
    }
    let stored = model.stored_coordinates();
    let mut head = 0.0;
    for i in (k + 1)..=stored {
        head += -(model.coordinate_log_affinity(i)?).exp_m1();
    }
    Ok(match model.tail() {
        None => Some(head),
        Some(t) => t.hellinger_tail_bound(k.max(stored)).map(|b| head + b),
    })
}

/// Upper bound on `1 − ρᵢ` over all product coordinates `i > k`.
pub fn product_max_increment<S: Scalar>(model: &KernelPairModel<S>, k: usize) -> Result<f64> {
    if !model.is_product() {
        return Err(Error::NotProduct);
    }
    let stored = model.stored_coordinates();
    let mut worst: f64 = 0.0;
    for i in (k + 1)..=stored {
        worst = worst.max(-(model.coordinate_log_affinity(i)?).exp_m1());
    }
    if let Some(t) = model.tail() {
        worst = worst.max(t.max_tail_increment(k.max(stored)));
    }
    Ok(worst)
}

/// Brackets `Mₙ` on the atom `prefix` (`n = |prefix| + 1`) from `M_{n,k_max}`.
///
/// `upper` is always `M_{n,k}` with `k = k_max` clipped to the horizon. A lower
/// end comes from a finite horizon (exact), a product tail bound (`tail_bound`
/// overrides the generator's), or a spectral certificate on Markov pairs.
pub fn estimate_m_limit<S: Scalar>(
    model: &KernelPairModel<S>,
    prefix: &Prefix,
    k_max: usize,
    tail_bound: Option<f64>,
) -> Result<MLimitEstimate> {
    let n = prefix.len() + 1;
    if k_max < n {
        return Err(Error::InvalidArgument(format!("need n <= k_max, got n={n}, k_max={k_max}")));
    }
    let k = model.horizon().map_or(k_max, |h| k_max.min(h));
    let upper = if k < n {
        1.0
    } else {
        m_nk(model, prefix, n, k)?.to_f64()
    };
    let exact = |upper: f64| MLimitEstimate {
        n,
        k,
        upper,
        lower: Some(upper),
        status: LimitStatus::Bracketed,
    };
    if model.kernels_identical() {
        return Ok(exact(1.0));
    }
    if model.horizon().is_some_and(|h| k_max >= h) {
        return Ok(exact(upper));
    }
    let upper_only = MLimitEstimate {
        n,
        k,
        upper,
        lower: None,
        status: LimitStatus::UpperOnly,
    };
    match model {
        KernelPairModel::Product(_) | KernelPairModel::GaussianProduct(_) => {
            let bound = match tail_bound {
                Some(b) => Some(b),
                None => product_tail_bound(model, k)?,
            };
            match bound {
                Some(b) if product_max_increment(model, k)? <= 0.5 => Ok(MLimitEstimate {
                    lower: Some(upper * (-2.0 * b).exp()),
                    status: LimitStatus::Bracketed,
                    ..upper_only
                }),
                _ => Ok(upper_only),
            }
        }
        KernelPairModel::Markov(m) => {
            if m.transitions_identical() && n >= 2 {
                return Ok(exact(upper));
            }
            let op = markov_operator(model)?;
            if op.irreducible && op.spectral_upper < 1.0 && upper <= LIMIT_BRACKET_TOL {
                Ok(MLimitEstimate {
                    lower: Some(0.0),
                    status: LimitStatus::Bracketed,
                    ..upper_only
                })
            } else {
                Ok(upper_only)
            }
        }
        KernelPairModel::Tree(_) => Ok(upper_only),
    }
}

/// `M_{n,k}` for fixed `k` on every reachable atom of every depth `0..=k` by one
/// backward pass; entry `d` holds the atoms of depth `d` (so `n = d + 1`).
/// With `dual`, the same pass with the weights `q √(p/q)`.
pub fn m_column<S: Scalar>(
    model: &KernelPairModel<S>,
    k: usize,
    dual: bool,
    budget: AtomBudget,
) -> Result<Vec<AtomMap<S>>> {
    let mut levels: Vec<AtomMap<S>> = Vec::with_capacity(k + 1);
    levels.push(
        exact_tree::reachable_prefixes(model, k, budget)?
            .into_iter()
            .map(|p| (p, S::one()))
            .collect(),
    );
    for d in (0..k).rev() {
        let below = levels.last().unwrap();
        let mut level = AtomMap::new();
        for prefix in exact_tree::reachable_prefixes(model, d, budget)? {
            let step = model.conditional_kernels(&prefix)?;
            let w = step_weight(&step, dual);
            let v = step
                .support()
                .fold(S::zero(), |acc, a| acc + w(a) * below[&prefix.child(a)].clone());
            level.insert(prefix, v);
        }
        levels.push(level);
    }
    levels.reverse();
    Ok(levels)
}

/// `M_{n,k}` for one `n`, every atom of depth `n − 1`, and `k = n..=k_max`.
#[derive(Clone, Debug, PartialEq)]
pub struct AffinityTable<S> {
    pub n: usize,
    pub entries: BTreeMap<usize, AtomMap<S>>,
    /// `E_{ℙ'}[M_{n,k}]` per `k`.
    pub expected: BTreeMap<usize, S>,
}

pub fn affinity_table<S: Scalar>(
    model: &KernelPairModel<S>,
    n: usize,
    k_max: usize,
    budget: AtomBudget,
) -> Result<AffinityTable<S>> {
    if n == 0 || n > k_max {
        return Err(Error::InvalidArgument(format!("need 1 <= n <= k_max, got n={n}, k_max={k_max}")));
    }
    let atoms = if model.is_discrete() {
        exact_tree::enumerate_cylinders(model, n - 1, budget)?.atoms
    } else if n == 1 {
        exact_tree::enumerate_cylinders(model, 0, budget)?.atoms
    } else {
        return Err(Error::ContinuousCoordinate(1));
    };
    let mut entries = BTreeMap::new();
    let mut expected = BTreeMap::new();
    for k in n..=k_max {
        let values: Vec<S> = atoms
            .par_iter()
            .map(|a| m_nk(model, &a.prefix, n, k))
            .collect::<Result<_>>()?;
        let e = atoms
            .iter()
            .zip(&values)
            .fold(S::zero(), |acc, (a, v)| acc + a.q_mass.clone() * v.clone());
        expected.insert(k, e);
        entries.insert(
            k,
            atoms.iter().map(|a| a.prefix.clone()).zip(values).collect(),
        );
    }
    Ok(AffinityTable {
        n,
        entries,
        expected,
    })
}

impl<S: Scalar> AffinityTable<S> {
    /// CSV with header `n,k,prefix,m_value`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["n", "k", "prefix", "m_value"]).unwrap();
        self.write_rows(&mut w);
        String::from_utf8(w.into_inner().unwrap()).unwrap()
    }

    pub(crate) fn write_rows<W: std::io::Write>(&self, w: &mut csv::Writer<W>) {
        for (k, row) in &self.entries {
            for (prefix, v) in row {
                w.write_record([
                    self.n.to_string(),
                    k.to_string(),
                    prefix.to_string(),
                    v.to_text(),
                ])
                .unwrap();
            }
        }
    }
}

/// `N_{n,k}` for `n = 1..=n_max`, `k = n..=k_max`.
#[derive(Clone, Debug, PartialEq)]
pub struct NTable<S> {
    pub entries: BTreeMap<(usize, usize), AtomMap<S>>,
}

pub fn n_table<S: Scalar>(
    model: &KernelPairModel<S>,
    n_max: usize,
    k_max: usize,
    budget: AtomBudget,
) -> Result<NTable<S>> {
    let mut entries = BTreeMap::new();
    for n in 1..=n_max.min(k_max) {
        let prefixes = exact_tree::reachable_prefixes(model, n - 1, budget)?;
        for k in n..=k_max {
            let values: Vec<S> = prefixes
                .par_iter()
                .map(|p| n_nk(model, p, n, k))
                .collect::<Result<_>>()?;
            entries.insert((n, k), prefixes.iter().cloned().zip(values).collect());
        }
    }
    Ok(NTable { entries })
}
