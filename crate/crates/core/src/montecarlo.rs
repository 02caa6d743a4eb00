//! Path sampling under either measure and the diagnostics built on it.
//!
//! Path `j` of a run with seed `s` draws from a ChaCha8 stream keyed by
//! `(s, j)`, so every trace is reproducible on its own and the ensemble does
//! not depend on the thread count or schedule.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::statistics::{Data, OrderStatistics};

use crate::affinity;
use crate::error::{Error, Result};
use crate::exact_tree::{self, AtomBudget};
use crate::models::{GaussianCoordinate, KernelPairModel, KernelStep, Measure, Prefix};
use crate::scalar::Scalar;

/// Default cap on `count · length`.
pub const DEFAULT_STEP_BUDGET: u64 = 200_000_000;

/// Seed of the resampling stream used by bootstrap estimates.
const BOOTSTRAP_SEED: u64 = 0x5eed_b007;
const BOOTSTRAP_ROUNDS: usize = 400;

/// Normal quantile of a two-sided 95% interval.
const Z95: f64 = 1.959_963_984_540_054;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Outcome {
    Symbol(usize),
    Real(f64),
}

impl std::fmt::Display for Outcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Outcome::Symbol(s) => write!(f, "{s}"),
            Outcome::Real(x) => write!(f, "{x}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PathTrace {
    pub seed: u64,
    pub path_id: u64,
    pub measure: Measure,
    pub outcomes: Vec<Outcome>,
    /// `log_phi_trace[i] = ln Φ_{i+1}`; entry 0 is 0.
    pub log_phi_trace: Vec<f64>,
    /// `rho_trace[i] = ρ_{i+1}` on the prefix before step `i + 1`.
    pub rho_trace: Vec<f64>,
    /// `√Φₙ · M_{n,k}` for `n = 1..=min(length, k)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_nk_proxy: Option<Vec<f64>>,
}

impl PathTrace {
    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    /// The sampled symbols as a prefix; `None` for real-valued paths.
    pub fn prefix(&self, len: usize) -> Option<Prefix> {
        self.outcomes[..len]
            .iter()
            .map(|o| match o {
                Outcome::Symbol(s) => Some(*s),
                Outcome::Real(_) => None,
            })
            .collect::<Option<Vec<_>>>()
            .map(Prefix::new)
    }

    /// `Φₙ` for `n = 1..=len + 1`.
    pub fn phi(&self, n: usize) -> f64 {
        self.log_phi_trace[n - 1].exp()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SampleOptions {
    /// Attach `√Φₙ · M_{n,k}` with this `k`.
    pub proxy_k: Option<usize>,
    pub step_budget: u64,
}

impl Default for SampleOptions {
    fn default() -> Self {
        SampleOptions {
            proxy_k: None,
            step_budget: DEFAULT_STEP_BUDGET,
        }
    }
}

/// Per-model sampling tables, built once per run.
enum Sampler<'a> {
    Tree(&'a KernelPairModel<f64>),
    Markov {
        init: KernelStep<f64>,
        rows: Vec<KernelStep<f64>>,
        init_rho: f64,
        row_rho: Vec<f64>,
    },
    Product {
        steps: Vec<KernelStep<f64>>,
        rho: Vec<f64>,
    },
    Gaussian(Vec<GaussianCoordinate>),
}

impl<'a> Sampler<'a> {
    fn new(model: &'a KernelPairModel<f64>, length: usize) -> Result<Self> {
        if let Some(h) = model.horizon() {
            if length > h {
                return Err(Error::DepthExceeded {
                    requested: length,
                    horizon: h,
                });
            }
        }
        Ok(match model {
            KernelPairModel::Tree(_) => Sampler::Tree(model),
            KernelPairModel::Markov(m) => {
                let rows: Vec<_> = (0..m.states).map(|s| m.row(s)).collect();
                Sampler::Markov {
                    init: m.initial(),
                    init_rho: m.initial().affinity(),
                    row_rho: rows.iter().map(KernelStep::affinity).collect(),
                    rows,
                }
            }
            KernelPairModel::Product(_) => {
                let steps = (1..=length)
                    .map(|i| model.product_kernel(i))
                    .collect::<Result<Vec<_>>>()?;
                Sampler::Product {
                    rho: steps.iter().map(KernelStep::affinity).collect(),
                    steps,
                }
            }
            KernelPairModel::GaussianProduct(g) => Sampler::Gaussian(
                (1..=length).map(|i| g.coordinate(i)).collect::<Result<_>>()?,
            ),
        })
    }

    fn draw_symbol(step: &KernelStep<f64>, measure: Measure, rng: &mut ChaCha8Rng) -> usize {
        let w = match measure {
            Measure::P => &step.p,
            Measure::Q => &step.q,
        };
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut last = 0;
        for a in step.support() {
            acc += w[a];
            last = a;
            if u < acc {
                return a;
            }
        }
        last
    }

    fn path(&self, measure: Measure, length: usize, rng: &mut ChaCha8Rng) -> Result<(Vec<Outcome>, Vec<f64>, Vec<f64>)> {
        let mut outcomes = Vec::with_capacity(length);
        let mut log_phi = Vec::with_capacity(length + 1);
        let mut rho = Vec::with_capacity(length);
        log_phi.push(0.0);
        let mut symbols: Vec<usize> = Vec::with_capacity(length);
        for i in 0..length {
            let current = *log_phi.last().unwrap();
            let (outcome, inc, r) = match self {
                Sampler::Gaussian(coords) => {
                    let c = &coords[i];
                    let (mean, sd) = match measure {
                        Measure::P => (c.mu, c.sigma),
                        Measure::Q => (c.mu_q, c.sigma_q),
                    };
                    let x = Normal::new(mean, sd)
                        .map_err(|e| Error::InvalidArgument(e.to_string()))?
                        .sample(rng);
                    (Outcome::Real(x), c.log_ratio(x), c.affinity())
                }
                _ => {
                    let owned;
                    let (step, r): (&KernelStep<f64>, f64) = match self {
                        Sampler::Tree(m) => {
                            let KernelPairModel::Tree(t) = m else { unreachable!() };
                            owned = t.kernels.get(symbols.as_slice()).cloned().ok_or_else(|| {
                                Error::InvalidArgument(format!(
                                    "no kernel stored for prefix {}",
                                    Prefix::new(symbols.clone())
                                ))
                            })?;
                            (&owned, owned.affinity())
                        }
                        Sampler::Markov {
                            init,
                            rows,
                            init_rho,
                            row_rho,
                        } => match symbols.last() {
                            None => (init, *init_rho),
                            Some(&s) => (&rows[s], row_rho[s]),
                        },
                        Sampler::Product { steps, rho } => (&steps[i], rho[i]),
                        Sampler::Gaussian(_) => unreachable!(),
                    };
                    let a = Self::draw_symbol(step, measure, rng);
                    symbols.push(a);
                    (Outcome::Symbol(a), step.q[a].ln() - step.p[a].ln(), r)
                }
            };
            outcomes.push(outcome);
            log_phi.push(current + inc);
            rho.push(r);
        }
        Ok((outcomes, log_phi, rho))
    }
}

/// `M_{n,k}` along sampled paths, with per-model caching.
pub struct MProxy<'a> {
    model: &'a KernelPairModel<f64>,
    k: usize,
    kind: ProxyKind,
}

enum ProxyKind {
    /// Indexed by `n`.
    PrefixFree(Vec<f64>),
    /// `tail[j] = H^j 𝟙`, `first = M_{1,k}`.
    Markov { tail: Vec<Vec<f64>>, first: f64 },
    Tree,
}

impl<'a> MProxy<'a> {
    pub fn new(model: &'a KernelPairModel<f64>, k: usize) -> Result<Self> {
        let kind = match model {
            KernelPairModel::Product(_) | KernelPairModel::GaussianProduct(_) => {
                // suffix products ∏_{i=n}^{k} ρᵢ in log space
                let mut v = vec![1.0; k + 2];
                let mut log = 0.0;
                for n in (1..=k).rev() {
                    log += model.coordinate_log_affinity(n)?;
                    v[n] = log.exp();
                }
                ProxyKind::PrefixFree(v)
            }
            KernelPairModel::Markov(_) => {
                let op = affinity::markov_operator(model)?;
                let mut tail = vec![vec![1.0; op.h.len()]];
                for _ in 0..k {
                    let prev = tail.last().unwrap();
                    let next = op
                        .h
                        .iter()
                        .map(|row| row.iter().zip(prev).map(|(a, b)| a * b).sum())
                        .collect();
                    tail.push(next);
                }
                let first = if k == 0 {
                    1.0
                } else {
                    affinity::m_nk(model, &Prefix::empty(), 1, k)?
                };
                ProxyKind::Markov { tail, first }
            }
            KernelPairModel::Tree(_) => {
                if let Some(h) = model.horizon() {
                    if k > h {
                        return Err(Error::DepthExceeded {
                            requested: k,
                            horizon: h,
                        });
                    }
                }
                ProxyKind::Tree
            }
        };
        Ok(MProxy { model, k, kind })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// `M_{n,k}` on the first `n − 1` outcomes of `trace` (`n ≤ k + 1`).
    pub fn value(&self, trace: &PathTrace, n: usize) -> Result<f64> {
        match &self.kind {
            ProxyKind::PrefixFree(v) => Ok(v[n]),
            ProxyKind::Markov { tail, first } => {
                if n == 1 {
                    return Ok(*first);
                }
                let Outcome::Symbol(s) = trace.outcomes[n - 2] else {
                    unreachable!()
                };
                Ok(tail[self.k + 1 - n][s])
            }
            ProxyKind::Tree => {
                let prefix = trace
                    .prefix(n - 1)
                    .ok_or_else(|| Error::InvalidArgument("tree path with real outcomes".into()))?;
                affinity::m_nk(self.model, &prefix, n, self.k)
            }
        }
    }
}

/// `count` paths of `length` coordinates under `measure`.
pub fn sample_paths<S: Scalar>(
    model: &KernelPairModel<S>,
    measure: Measure,
    length: usize,
    count: usize,
    seed: u64,
) -> Result<Vec<PathTrace>> {
    sample_paths_with(model, measure, length, count, seed, &SampleOptions::default())
}

pub fn sample_paths_with<S: Scalar>(
    model: &KernelPairModel<S>,
    measure: Measure,
    length: usize,
    count: usize,
    seed: u64,
    options: &SampleOptions,
) -> Result<Vec<PathTrace>> {
    let steps = (count as u128) * (length.max(1) as u128);
    if steps > options.step_budget as u128 {
        return Err(Error::BudgetExceeded {
            atoms: steps,
            budget: options.step_budget,
        });
    }
    let fm = model.to_float();
    let sampler = Sampler::new(&fm, length)?;
    let proxy = match options.proxy_k {
        Some(k) => Some(MProxy::new(&fm, k)?),
        None => None,
    };
    (0..count as u64)
        .into_par_iter()
        .map(|path_id| {
            let mut rng = path_rng(seed, path_id);
            let (outcomes, log_phi_trace, rho_trace) = sampler.path(measure, length, &mut rng)?;
            let mut trace = PathTrace {
                seed,
                path_id,
                measure,
                outcomes,
                log_phi_trace,
                rho_trace,
                n_nk_proxy: None,
            };
            if let Some(p) = &proxy {
                let upto = length.min(p.k());
                let v = (1..=upto)
                    .map(|n| Ok((0.5 * trace.log_phi_trace[n - 1]).exp() * p.value(&trace, n)?))
                    .collect::<Result<Vec<f64>>>()?;
                trace.n_nk_proxy = Some(v);
            }
            Ok(trace)
        })
        .collect()
}

/// The random stream of one path: ChaCha8 keyed by `seed`, stream number `path_id`.
pub fn path_rng(seed: u64, path_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path_id);
    rng
}

/// CSV with header `path_id,step,symbol_or_value,log_phi,rho`; `log_phi` is `ln Φ_{step+1}`.
pub fn traces_to_csv(traces: &[PathTrace]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["path_id", "step", "symbol_or_value", "log_phi", "rho"])
        .unwrap();
    for t in traces {
        for (i, o) in t.outcomes.iter().enumerate() {
            w.write_record([
                t.path_id.to_string(),
                (i + 1).to_string(),
                o.to_string(),
                t.log_phi_trace[i + 1].to_string(),
                t.rho_trace[i].to_string(),
            ])
            .unwrap();
        }
    }
    String::from_utf8(w.into_inner().unwrap()).unwrap()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CiMethod {
    Normal,
    Bootstrap,
}

/// A Monte Carlo mean with a 95% interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub samples: usize,
    pub method: CiMethod,
}

impl McEstimate {
    /// `|estimate − x| ≤ sigmas · std_error`.
    pub fn within(&self, x: f64, sigmas: f64) -> bool {
        (self.estimate - x).abs() <= sigmas * self.std_error
    }
}

/// Sample mean with a normal-approximation interval, or a percentile
/// bootstrap below 100 samples.
pub fn mean_estimate(values: &[f64]) -> McEstimate {
    let n = values.len();
    if n == 0 {
        return McEstimate {
            estimate: f64::NAN,
            std_error: f64::NAN,
            ci_low: f64::NAN,
            ci_high: f64::NAN,
            samples: 0,
            method: CiMethod::Normal,
        };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = if n > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    let se = (var / n as f64).sqrt();
    if n >= 100 {
        return McEstimate {
            estimate: mean,
            std_error: se,
            ci_low: mean - Z95 * se,
            ci_high: mean + Z95 * se,
            samples: n,
            method: CiMethod::Normal,
        };
    }
    let means = bootstrap(values, |s| s.iter().sum::<f64>() / s.len() as f64);
    let mut data = Data::new(means);
    McEstimate {
        estimate: mean,
        std_error: se,
        ci_low: data.quantile(0.025),
        ci_high: data.quantile(0.975),
        samples: n,
        method: CiMethod::Bootstrap,
    }
}

fn bootstrap(values: &[f64], stat: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(BOOTSTRAP_SEED);
    let mut buf = vec![0.0; values.len()];
    (0..BOOTSTRAP_ROUNDS)
        .map(|_| {
            for b in buf.iter_mut() {
                *b = values[rng.random_range(0..values.len())];
            }
            stat(&buf)
        })
        .collect()
}

fn std_dev(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let m = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt()
}

fn median(values: &[f64]) -> f64 {
    Data::new(values.to_vec()).median_value()
}

trait MedianValue {
    fn median_value(&mut self) -> f64;
}

impl MedianValue for Data<Vec<f64>> {
    fn median_value(&mut self) -> f64 {
        self.quantile(0.5)
    }
}

pub const QUANTILE_LEVELS: [f64; 5] = [0.05, 0.25, 0.5, 0.75, 0.95];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DepthSummary {
    /// Index of `Φₙ`.
    pub n: usize,
    /// Quantiles of `ln Φₙ` at [`QUANTILE_LEVELS`]; quantiles of `Φₙ` are their exponentials.
    pub log_phi_quantiles: Vec<f64>,
    pub phi_mean: McEstimate,
    pub fraction_below: f64,
    pub fraction_above: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnsembleSummary {
    pub measure: Measure,
    pub count: usize,
    pub length: usize,
    pub quantile_levels: Vec<f64>,
    /// `Φₙ < low` and `Φₙ > high` are counted.
    pub thresholds: (f64, f64),
    pub depths: Vec<DepthSummary>,
}

pub fn summarize(traces: &[PathTrace], thresholds: (f64, f64)) -> Result<EnsembleSummary> {
    let first = traces
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty ensemble".into()))?;
    let length = first.len();
    if traces.iter().any(|t| t.len() != length || t.measure != first.measure) {
        return Err(Error::InvalidArgument(
            "ensemble mixes lengths or measures".into(),
        ));
    }
    let count = traces.len() as f64;
    let (low, high) = (thresholds.0.ln(), thresholds.1.ln());
    let depths = (1..=length + 1)
        .map(|n| {
            let logs: Vec<f64> = traces.iter().map(|t| t.log_phi_trace[n - 1]).collect();
            let phis: Vec<f64> = logs.iter().map(|l| l.exp()).collect();
            let mut data = Data::new(logs.clone());
            DepthSummary {
                n,
                log_phi_quantiles: QUANTILE_LEVELS.iter().map(|&q| data.quantile(q)).collect(),
                phi_mean: mean_estimate(&phis),
                fraction_below: logs.iter().filter(|&&l| l < low).count() as f64 / count,
                fraction_above: logs.iter().filter(|&&l| l > high).count() as f64 / count,
            }
        })
        .collect();
    Ok(EnsembleSummary {
        measure: first.measure,
        count: traces.len(),
        length,
        quantile_levels: QUANTILE_LEVELS.to_vec(),
        thresholds,
        depths,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Trend {
    Increasing,
    Decreasing,
    Stable,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DriftReport {
    pub measure: Measure,
    /// Median over paths of the least-squares slope of `ln Φₙ` on the last half of the horizon.
    pub median_slope: f64,
    pub bootstrap_se: f64,
    pub trend: Trend,
    pub final_median_log_phi: f64,
    pub final_variance_log_phi: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Advisory {
    ConsistentWithEquivalence,
    SuggestsSingularity,
    Mixed,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhiLimitReport {
    pub horizon: usize,
    pub under_p: DriftReport,
    pub under_q: DriftReport,
    pub advisory: Advisory,
}

fn last_half_slope(trace: &PathTrace) -> f64 {
    let len = trace.log_phi_trace.len();
    let start = (len - 1) / 2;
    let xs: Vec<f64> = (start..len).map(|i| i as f64).collect();
    let ys = &trace.log_phi_trace[start..];
    let mx = xs.iter().sum::<f64>() / xs.len() as f64;
    let my = ys.iter().sum::<f64>() / ys.len() as f64;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

fn drift(traces: &[PathTrace], measure: Measure) -> Result<DriftReport> {
    if traces.is_empty() || traces.iter().any(|t| t.measure != measure) {
        return Err(Error::InvalidArgument(format!(
            "expected a nonempty ensemble under {measure:?}"
        )));
    }
    let slopes: Vec<f64> = traces.iter().map(last_half_slope).collect();
    let m = median(&slopes);
    let se = std_dev(&bootstrap(&slopes, median));
    let trend = if m.abs() > 3.0 * se {
        if m > 0.0 {
            Trend::Increasing
        } else {
            Trend::Decreasing
        }
    } else {
        Trend::Stable
    };
    let finals: Vec<f64> = traces.iter().map(|t| *t.log_phi_trace.last().unwrap()).collect();
    let fm = finals.iter().sum::<f64>() / finals.len() as f64;
    let var = finals.iter().map(|v| (v - fm).powi(2)).sum::<f64>() / (finals.len() as f64 - 1.0).max(1.0);
    Ok(DriftReport {
        measure,
        median_slope: m,
        bootstrap_se: se,
        trend,
        final_median_log_phi: median(&finals),
        final_variance_log_phi: var,
    })
}

/// Trend of `ln Φₙ` under both measures. Advisory only.
///
/// Drift to +∞ under ℙ' or to −∞ under ℙ suggests singularity; stable
/// traces under both are consistent with equivalence.
pub fn phi_limit_diagnostic(under_p: &[PathTrace], under_q: &[PathTrace]) -> Result<PhiLimitReport> {
    let horizon = under_p.first().map_or(0, PathTrace::len);
    if horizon < 2 || under_q.first().map_or(0, PathTrace::len) != horizon {
        return Err(Error::InvalidArgument(
            "ensembles need equal horizons of at least 2".into(),
        ));
    }
    let p = drift(under_p, Measure::P)?;
    let q = drift(under_q, Measure::Q)?;
    let advisory = match (p.trend, q.trend) {
        (Trend::Stable, Trend::Stable) => Advisory::ConsistentWithEquivalence,
        (Trend::Decreasing, _) | (_, Trend::Increasing) => Advisory::SuggestsSingularity,
        _ => Advisory::Mixed,
    };
    Ok(PhiLimitReport {
        horizon,
        under_p: p,
        under_q: q,
        advisory,
    })
}

/// Thresholds of the N/M relation check.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NmThresholds {
    /// An N-proxy at or above this counts as large.
    pub n_high: f64,
    /// An M-proxy at or below this counts as near zero.
    pub m_low: f64,
}

impl Default for NmThresholds {
    fn default() -> Self {
        NmThresholds {
            n_high: 0.5,
            m_low: 0.01,
        }
    }
}

pub const M_BIN_COUNT: usize = 10;
pub const N_BIN_EDGES: [f64; 6] = [0.0, 0.1, 0.5, 1.0, 2.0, 5.0];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NmStep {
    pub n: usize,
    pub mean_m: f64,
    pub mean_n: f64,
    pub median_n: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NmReport {
    pub k: usize,
    pub thresholds: NmThresholds,
    pub steps: Vec<NmStep>,
    /// `histogram[i][j]`: M-proxy in bin `i` of `[0, 1]` (width 1/10), N-proxy in bin `j` of [`N_BIN_EDGES`] (last bin open).
    pub histogram: Vec<Vec<u64>>,
    pub points: u64,
    pub violations: u64,
    /// `(m_low / n_high)²`: the largest violation rate the relation `N = √Φ·M` allows under ℙ, by Markov's inequality.
    pub allowed_rate: f64,
    pub red: bool,
}

/// Joint behaviour of `M_{n,k}` and `√Φₙ·M_{n,k}` along ℙ-paths.
pub fn nm_relation_diagnostic<S: Scalar>(
    model: &KernelPairModel<S>,
    traces: &[PathTrace],
    k_max: usize,
    thresholds: NmThresholds,
) -> Result<NmReport> {
    let fm = model.to_float();
    let proxy = MProxy::new(&fm, k_max)?;
    let length = traces.first().map_or(0, PathTrace::len);
    let upto = length.min(k_max);
    let per_path: Vec<Vec<(f64, f64)>> = traces
        .par_iter()
        .map(|t| {
            (1..=upto)
                .map(|n| {
                    let m = proxy.value(t, n)?;
                    Ok((m, (0.5 * t.log_phi_trace[n - 1]).exp() * m))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let mut histogram = vec![vec![0u64; N_BIN_EDGES.len()]; M_BIN_COUNT];
    let mut violations = 0;
    let mut points = 0;
    for path in &per_path {
        for &(m, n) in path {
            let i = ((m * M_BIN_COUNT as f64) as usize).min(M_BIN_COUNT - 1);
            let j = N_BIN_EDGES.iter().rposition(|&e| n >= e).unwrap_or(0);
            histogram[i][j] += 1;
            points += 1;
            if n >= thresholds.n_high && m <= thresholds.m_low {
                violations += 1;
            }
        }
    }
    let steps = (1..=upto)
        .map(|n| {
            let ms: Vec<f64> = per_path.iter().map(|p| p[n - 1].0).collect();
            let ns: Vec<f64> = per_path.iter().map(|p| p[n - 1].1).collect();
            NmStep {
                n,
                mean_m: ms.iter().sum::<f64>() / ms.len() as f64,
                mean_n: ns.iter().sum::<f64>() / ns.len() as f64,
                median_n: median(&ns),
            }
        })
        .collect();
    let allowed_rate = (thresholds.m_low / thresholds.n_high).powi(2);
    let pts = points.max(1) as f64;
    let rate = violations as f64 / pts;
    let red = rate > allowed_rate + 3.0 * (allowed_rate * (1.0 - allowed_rate) / pts).sqrt();
    Ok(NmReport {
        k: k_max,
        thresholds,
        steps,
        histogram,
        points,
        violations,
        allowed_rate,
        red,
    })
}

/// Monte Carlo estimate of `E_ℙ[(√Φₙ − √Φ_{k+1})²]` from ℙ-paths.
pub fn empirical_hellinger(traces: &[PathTrace], n: usize, k: usize) -> Result<McEstimate> {
    if n == 0 || n > k {
        return Err(Error::InvalidArgument(format!("need 1 <= n <= k, got n={n}, k={k}")));
    }
    if traces.iter().any(|t| t.measure != Measure::P) {
        return Err(Error::InvalidArgument("paths must be sampled under P".into()));
    }
    if traces.iter().any(|t| t.len() < k) {
        return Err(Error::IndexOutOfRange {
            index: k,
            limit: traces.iter().map(PathTrace::len).min().unwrap_or(0),
        });
    }
    let values: Vec<f64> = traces
        .iter()
        .map(|t| {
            let d = (0.5 * t.log_phi_trace[n - 1]).exp() - (0.5 * t.log_phi_trace[k]).exp();
            d * d
        })
        .collect();
    Ok(mean_estimate(&values))
}

/// Pearson goodness of fit of sampled depth-`depth` atoms against exact masses.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GoodnessOfFit {
    pub statistic: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
}

pub fn atom_frequency_test<S: Scalar>(
    model: &KernelPairModel<S>,
    traces: &[PathTrace],
    depth: usize,
    budget: AtomBudget,
) -> Result<GoodnessOfFit> {
    let measure = traces
        .first()
        .map(|t| t.measure)
        .ok_or_else(|| Error::InvalidArgument("empty ensemble".into()))?;
    let atoms = exact_tree::enumerate_cylinders(model, depth, budget)?;
    let mut counts: BTreeMap<Prefix, u64> = BTreeMap::new();
    for t in traces {
        let p = t
            .prefix(depth)
            .ok_or(Error::ContinuousCoordinate(1))?;
        *counts.entry(p).or_default() += 1;
    }
    let total = traces.len() as f64;
    let mut statistic = 0.0;
    for a in &atoms.atoms {
        let mass = match measure {
            Measure::P => a.p_mass.to_f64(),
            Measure::Q => a.q_mass.to_f64(),
        };
        let expected = mass * total;
        let observed = counts.remove(&a.prefix).unwrap_or(0) as f64;
        statistic += (observed - expected).powi(2) / expected;
    }
    if !counts.is_empty() {
        return Err(Error::InvalidArgument("sampled an atom of zero mass".into()));
    }
    let dof = atoms.atoms.len().saturating_sub(1).max(1);
    let chi = ChiSquared::new(dof as f64).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(GoodnessOfFit {
        statistic,
        degrees_of_freedom: dof,
        p_value: chi.sf(statistic),
    })
}

/// `ℙ'(atom)` estimated from ℙ-paths as the mean of `1_atom · Φ_{depth+1}`.
pub fn reweighted_atom_masses<S: Scalar>(
    model: &KernelPairModel<S>,
    traces: &[PathTrace],
    depth: usize,
    budget: AtomBudget,
) -> Result<BTreeMap<Prefix, McEstimate>> {
    if traces.iter().any(|t| t.measure != Measure::P || t.len() < depth) {
        return Err(Error::InvalidArgument(
            "need P-paths of at least the requested depth".into(),
        ));
    }
    let atoms = exact_tree::reachable_prefixes(model, depth, budget)?;
    let prefixes: Vec<Prefix> = traces
        .iter()
        .map(|t| t.prefix(depth).ok_or(Error::ContinuousCoordinate(1)))
        .collect::<Result<_>>()?;
    Ok(atoms
        .into_iter()
        .map(|atom| {
            let values: Vec<f64> = traces
                .iter()
                .zip(&prefixes)
                .map(|(t, p)| if *p == atom { t.phi(depth + 1) } else { 0.0 })
                .collect();
            (atom, mean_estimate(&values))
        })
        .collect())
}
