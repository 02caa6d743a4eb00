//! Run configurations and the self-contained reports the CLI writes.
//!
//! Everything except the `metadata` block is a pure function of the model
//! file and the config, so two runs produce byte-identical JSON once that
//! block is dropped.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::affinity;
use crate::decide::{self, DecideConfig, Decision, Verdict};
use crate::error::{Error, Result};
use crate::exact_tree::AtomBudget;
use crate::invariants::{self, CheckOutcome, SuiteConfig};
use crate::models::{parse_model, serialize_model, AnyModel, KernelPairModel, Measure};
use crate::montecarlo::{self, EnsembleSummary, NmReport, NmThresholds, PhiLimitReport};
use crate::number::Number;
use crate::scalar::Scalar;
use crate::with_model;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Analyze,
    Verify,
    Sweep,
    Sample,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub mode: Mode,
    pub model_path: PathBuf,
    pub depth: usize,
    pub k_max: usize,
    pub tol: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub count: usize,
    pub length: usize,
    pub measure: Measure,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub param: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub values: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    pub atom_budget: u64,
}

impl RunConfig {
    pub fn new(mode: Mode, model_path: impl Into<PathBuf>) -> Self {
        let d = DecideConfig::default();
        RunConfig {
            mode,
            model_path: model_path.into(),
            depth: d.depth,
            k_max: d.k_max,
            tol: d.tol,
            seed: None,
            count: 1000,
            length: 20,
            measure: Measure::P,
            param: None,
            values: Vec::new(),
            out: None,
            csv: None,
            atom_budget: AtomBudget::default().0,
        }
    }

    pub fn budget(&self) -> AtomBudget {
        AtomBudget(self.atom_budget)
    }

    pub fn decide_config(&self) -> DecideConfig {
        DecideConfig {
            depth: self.depth,
            k_max: self.k_max,
            tol: self.tol,
            budget: self.budget(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidArgument(what.to_string()));
        if self.depth == 0 {
            return bad("depth must be at least 1");
        }
        if self.k_max == 0 {
            return bad("kmax must be at least 1");
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return bad("tolerance must be positive and finite");
        }
        if self.atom_budget == 0 {
            return bad("atom budget must be positive");
        }
        match self.mode {
            Mode::Sample => {
                if self.seed.is_none() {
                    return bad("sample needs a seed");
                }
                if self.count == 0 || self.length == 0 {
                    return bad("count and length must be at least 1");
                }
            }
            Mode::Sweep => {
                if self.param.is_none() || self.values.is_empty() {
                    return bad("sweep needs a parameter name and at least one value");
                }
            }
            Mode::Analyze | Mode::Verify => {}
        }
        Ok(())
    }
}

/// A parsed model file and the digest of its bytes.
#[derive(Clone, Debug)]
pub struct LoadedModel {
    pub digest: String,
    pub model: AnyModel,
}

pub fn load_model(path: &Path) -> Result<LoadedModel> {
    let bytes = std::fs::read(path)
        .map_err(|e| Error::Schema(format!("cannot read model file {}: {e}", path.display())))?;
    let text = std::str::from_utf8(&bytes)
        .map_err(|_| Error::Schema(format!("{} is not UTF-8", path.display())))?;
    let model = parse_model(text)?;
    Ok(LoadedModel {
        digest: hex::encode(Sha256::digest(&bytes)),
        model,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ToolInfo {
    pub name: &'static str,
    pub version: &'static str,
}

const TOOL: ToolInfo = ToolInfo {
    name: "macont",
    version: env!("CARGO_PKG_VERSION"),
};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModelInfo {
    /// SHA-256 of the model file bytes.
    pub digest: String,
    pub kind: &'static str,
    pub numeric_mode: &'static str,
    /// The model as parsed, in canonical form.
    pub document: Value,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TableRow {
    pub k: usize,
    pub prefix: String,
    pub m_value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact: Option<String>,
}

/// `M_{n,k}` on every depth-`(n − 1)` atom.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TableReport {
    pub n: usize,
    pub rows: Vec<TableRow>,
    /// `E_ℙ'[M_{n,k}]` keyed by `k`.
    pub expected: BTreeMap<usize, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SampleReport {
    pub measure: Measure,
    pub seed: u64,
    pub summary: EnsembleSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi_limit: Option<PhiLimitReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nm_relation: Option<NmReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: String,
    /// `Σ_{i≤k} (1 − ρᵢ)` over the explicit coordinates.
    pub hellinger_partial_sum: Option<f64>,
    pub tail_bound: Option<f64>,
    pub decision: Decision,
    pub basis: decide::Basis,
    pub m1k_upper: Option<f64>,
}

/// Wall-clock data, kept apart so the rest of a report is reproducible.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Metadata {
    pub timing_ms: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub tool: ToolInfo,
    pub config: RunConfig,
    pub model: ModelInfo,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdict: Option<Verdict>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub tables: Vec<TableReport>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub invariants: Vec<CheckOutcome>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub sweep: Vec<SweepRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample: Option<SampleReport>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    pub metadata: Metadata,
}

impl Report {
    fn new(config: &RunConfig, loaded: &LoadedModel) -> Self {
        Report {
            tool: TOOL,
            config: config.clone(),
            model: ModelInfo {
                digest: loaded.digest.clone(),
                kind: loaded.model.kind(),
                numeric_mode: if loaded.model.is_exact() { "exact" } else { "float" },
                document: serialize_model(&loaded.model),
            },
            verdict: None,
            tables: Vec::new(),
            invariants: Vec::new(),
            sweep: Vec::new(),
            sample: None,
            notes: Vec::new(),
            metadata: Metadata::default(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// The report as JSON with the `metadata` block removed.
    pub fn reproducible_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("report serializes");
        if let Value::Object(o) = &mut v {
            o.remove("metadata");
        }
        serde_json::to_string_pretty(&v).expect("report serializes")
    }

    /// Process exit status for this report's mode.
    pub fn exit_code(&self) -> i32 {
        match self.config.mode {
            Mode::Verify => {
                if self.invariants.iter().all(|c| c.passed) {
                    0
                } else {
                    VERIFY_FAILED
                }
            }
            _ => self.verdict.as_ref().map_or(0, |v| v.decision.exit_code()),
        }
    }

    /// Plot-ready affinity rows with header `n,k,prefix,m_value`.
    pub fn tables_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["n", "k", "prefix", "m_value"]).unwrap();
        for t in &self.tables {
            for r in &t.rows {
                w.write_record([
                    t.n.to_string(),
                    r.k.to_string(),
                    r.prefix.clone(),
                    r.m_value.to_string(),
                ])
                .unwrap();
            }
        }
        String::from_utf8(w.into_inner().unwrap()).unwrap()
    }

    pub fn sweep_csv(&self) -> String {
        let name = self.config.param.as_deref().unwrap_or("value");
        let opt = |x: Option<f64>| x.map_or(String::new(), |v| v.to_string());
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            name,
            "hellinger_partial_sum",
            "tail_bound",
            "verdict",
            "basis",
            "m1k_upper",
        ])
        .unwrap();
        for r in &self.sweep {
            w.write_record([
                r.value.clone(),
                opt(r.hellinger_partial_sum),
                opt(r.tail_bound),
                label(&r.decision),
                label(&r.basis),
                opt(r.m1k_upper),
            ])
            .unwrap();
        }
        String::from_utf8(w.into_inner().unwrap()).unwrap()
    }
}

/// Exit status of `verify` when any check fails.
pub const VERIFY_FAILED: i32 = 30;

fn label<T: Serialize>(x: &T) -> String {
    match serde_json::to_value(x) {
        Ok(Value::String(s)) => s,
        _ => String::new(),
    }
}

struct Clock(BTreeMap<String, f64>);

impl Clock {
    fn time<T>(&mut self, phase: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.0
            .insert(phase.to_string(), start.elapsed().as_secs_f64() * 1e3);
        out
    }
}

/// Notes a budget overrun instead of failing.
fn soft<T>(r: Result<T>, what: &str, notes: &mut Vec<String>) -> Result<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::BudgetExceeded { atoms, budget }) => {
            notes.push(format!("{what} skipped: needs {atoms} atoms, budget {budget}"));
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

fn tables<S: Scalar>(model: &KernelPairModel<S>, config: &RunConfig) -> Result<Vec<TableReport>> {
    let mut k_top = config.k_max.min(config.depth);
    if let Some(h) = model.horizon() {
        k_top = k_top.min(h);
    }
    let n_top = if model.is_discrete() { k_top } else { k_top.min(1) };
    (1..=n_top)
        .map(|n| {
            let t = affinity::affinity_table(model, n, k_top, config.budget())?;
            let rows = t
                .entries
                .iter()
                .flat_map(|(&k, row)| {
                    row.iter().map(move |(prefix, v)| TableRow {
                        k,
                        prefix: prefix.to_string(),
                        m_value: v.to_f64(),
                        exact: S::EXACT.then(|| v.to_text()),
                    })
                })
                .collect();
            Ok(TableReport {
                n,
                rows,
                expected: t.expected.iter().map(|(&k, v)| (k, v.to_f64())).collect(),
            })
        })
        .collect()
}

fn suite<S: Scalar>(model: &KernelPairModel<S>, config: &RunConfig) -> Result<Vec<CheckOutcome>> {
    let depth = model.horizon().map_or(config.depth, |h| config.depth.min(h));
    invariants::run_suite(
        model,
        &SuiteConfig {
            depth,
            tol: config.tol,
            budget: config.budget(),
        },
    )
}

fn start(config: &RunConfig, mode: Mode) -> Result<(LoadedModel, Report)> {
    if config.mode != mode {
        return Err(Error::InvalidArgument(format!(
            "config is for {:?}, not {mode:?}",
            config.mode
        )));
    }
    config.validate()?;
    let loaded = load_model(&config.model_path)?;
    let report = Report::new(config, &loaded);
    Ok((loaded, report))
}

/// Verdict, per-atom affinity tables up to `min(depth, k_max)`, and the invariant suite.
pub fn run_analyze(config: &RunConfig) -> Result<Report> {
    let (loaded, mut report) = start(config, Mode::Analyze)?;
    let mut clock = Clock(BTreeMap::new());
    let mut notes = Vec::new();
    with_model!(&loaded.model, m => {
        let verdict = clock.time("decide", || decide::decide_equivalence(m, &config.decide_config()))?;
        report.verdict = Some(verdict);
        if let Some(t) = soft(clock.time("tables", || tables(m, config)), "affinity tables", &mut notes)? {
            report.tables = t;
        }
        if m.is_discrete() {
            if let Some(s) = soft(clock.time("invariants", || suite(m, config)), "invariant suite", &mut notes)? {
                report.invariants = s;
            }
        }
    });
    report.notes = notes;
    report.metadata.timing_ms = clock.0;
    Ok(report)
}

/// The invariant suite on a discrete model.
pub fn run_verify(config: &RunConfig) -> Result<Report> {
    let (loaded, mut report) = start(config, Mode::Verify)?;
    let mut clock = Clock(BTreeMap::new());
    with_model!(&loaded.model, m => {
        if !m.is_discrete() {
            return Err(Error::ContinuousCoordinate(1));
        }
        report.invariants = clock.time("invariants", || suite(m, config))?;
    });
    report.metadata.timing_ms = clock.0;
    Ok(report)
}

fn set_tail<S: Scalar>(model: &KernelPairModel<S>, param: &str, value: &str) -> Result<KernelPairModel<S>> {
    let field = format!("{param}={value}");
    let number = Number::parse_str(value)
        .map_err(|e| Error::validation(field.clone(), e.to_string()))?;
    let mut out = model.clone();
    let tail = match &mut out {
        KernelPairModel::Product(p) => &mut p.tail,
        KernelPairModel::GaussianProduct(g) => &mut g.tail,
        _ => return Err(Error::NotProduct),
    };
    let t = tail.as_ref().ok_or(Error::NotProduct)?;
    *tail = Some(t.with_param(param, number)?);
    out.validate().map_err(|e| Error::validation(field, e.to_string()))?;
    Ok(out)
}

/// One verdict per parameter value of the model's tail family, in the given order.
pub fn run_sweep(config: &RunConfig) -> Result<Report> {
    let (loaded, mut report) = start(config, Mode::Sweep)?;
    let param = config.param.as_deref().unwrap_or_default();
    let mut clock = Clock(BTreeMap::new());
    with_model!(&loaded.model, m => {
        let variants = config
            .values
            .iter()
            .map(|v| set_tail(m, param, v))
            .collect::<Result<Vec<_>>>()?;
        let rows = clock.time("sweep", || {
            variants
                .iter()
                .zip(&config.values)
                .map(|(variant, value)| {
                    let verdict = decide::decide_equivalence(variant, &config.decide_config())?;
                    let kakutani = verdict
                        .criteria
                        .iter()
                        .find(|c| c.name == decide::CriterionName::Kakutani);
                    Ok(SweepRow {
                        value: value.clone(),
                        hellinger_partial_sum: kakutani
                            .and_then(|c| c.values.get("hellinger_partial_sum").copied()),
                        tail_bound: kakutani.and_then(|c| c.bounds.get("tail_bound").copied()),
                        decision: verdict.decision,
                        basis: verdict.basis,
                        m1k_upper: verdict.evidence.m_upper.last().map(|&(_, v)| v),
                    })
                })
                .collect::<Result<Vec<_>>>()
        })?;
        report.sweep = rows;
    });
    report.metadata.timing_ms = clock.0;
    Ok(report)
}

/// Sampled traces plus their summary; the opposite measure is sampled too
/// for the Φ-limit diagnostic.
pub fn run_sample(config: &RunConfig) -> Result<(Report, Vec<montecarlo::PathTrace>)> {
    let (loaded, mut report) = start(config, Mode::Sample)?;
    let seed = config.seed.expect("validated");
    let mut clock = Clock(BTreeMap::new());
    let mut notes = Vec::new();
    let traces = with_model!(&loaded.model, m => {
        let traces = clock.time("sample", || {
            montecarlo::sample_paths(m, config.measure, config.length, config.count, seed)
        })?;
        let summary = montecarlo::summarize(&traces, (0.1, 10.0))?;
        let phi_limit = if config.length >= 2 {
            let other = match config.measure {
                Measure::P => Measure::Q,
                Measure::Q => Measure::P,
            };
            let others = clock.time("sample_other", || {
                montecarlo::sample_paths(m, other, config.length, config.count, seed)
            })?;
            let (p, q) = match config.measure {
                Measure::P => (&traces, &others),
                Measure::Q => (&others, &traces),
            };
            Some(montecarlo::phi_limit_diagnostic(p, q)?)
        } else {
            None
        };
        let nm_relation = if config.measure == Measure::P {
            soft(
                clock.time("nm_relation", || {
                    montecarlo::nm_relation_diagnostic(m, &traces, config.length, NmThresholds::default())
                }),
                "N/M relation diagnostic",
                &mut notes,
            )?
        } else {
            None
        };
        report.sample = Some(SampleReport {
            measure: config.measure,
            seed,
            summary,
            phi_limit,
            nm_relation,
        });
        traces
    });
    report.notes = notes;
    report.metadata.timing_ms = clock.0;
    Ok((report, traces))
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents)
        .map_err(|e| Error::Io(format!("cannot write {}: {e}", path.display())))
}
