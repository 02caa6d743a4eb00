//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Reference values come from brute-force enumeration written here against
//! the raw kernels, or from closed forms, never from the engines under test.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use macont_core::affinity;
use macont_core::decide::{self, Basis, DecideConfig, Decision};
use macont_core::fixtures;
use macont_core::montecarlo;
use macont_core::{AtomBudget, KernelPairModel, Measure, Prefix, Scalar, Surd};

const CORPUS_SIZE: usize = 200;
const CORPUS_SEED: u64 = 1;
const FLOAT_TOL: f64 = 1e-10;

type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($fmt)+));
        }
    };
}

/// A depth-`depth` atom with its masses and `Φ₁, …, Φ_{depth+1}` along it.
struct Leaf<S> {
    prefix: Prefix,
    p: S,
    q: S,
    phis: Vec<S>,
}

fn leaves<S: Scalar>(m: &KernelPairModel<S>, depth: usize) -> Vec<Leaf<S>> {
    fn walk<S: Scalar>(m: &KernelPairModel<S>, depth: usize, leaf: Leaf<S>, out: &mut Vec<Leaf<S>>) {
        if leaf.prefix.len() == depth {
            out.push(leaf);
            return;
        }
        let step = m.conditional_kernels(&leaf.prefix).unwrap();
        for a in 0..step.p.len() {
            let (pa, qa) = (&step.p[a], &step.q[a]);
            assert_eq!(pa.is_zero(), qa.is_zero(), "oracle needs matched supports");
            if pa.is_zero() {
                continue;
            }
            let mut phis = leaf.phis.clone();
            let last = phis.last().unwrap().clone();
            phis.push(last * qa.div(pa));
            walk(
                m,
                depth,
                Leaf {
                    prefix: leaf.prefix.child(a),
                    p: leaf.p.clone() * pa.clone(),
                    q: leaf.q.clone() * qa.clone(),
                    phis,
                },
                out,
            );
        }
    }
    let mut out = Vec::new();
    let root = Leaf {
        prefix: Prefix::empty(),
        p: S::one(),
        q: S::one(),
        phis: vec![S::one()],
    };
    walk(m, depth, root, &mut out);
    out
}

/// `Σ_ext w(ext | x) · √(ratio(ext))` over extensions of `x` to depth `k`; the
/// direct `M_{n,k}(x)` with `w = p`, `ratio = q/p`, or its dual with the roles swapped.
fn brute_m<S: Scalar>(m: &KernelPairModel<S>, x: &Prefix, k: usize, dual: bool) -> S {
    fn walk<S: Scalar>(m: &KernelPairModel<S>, x: &Prefix, k: usize, dual: bool, w: S, r: S) -> S {
        if x.len() == k {
            return w * r.sqrt();
        }
        let step = m.conditional_kernels(x).unwrap();
        let mut acc = S::zero();
        for a in 0..step.p.len() {
            if step.p[a].is_zero() {
                continue;
            }
            let (weight, ratio) = if dual {
                (&step.q[a], step.p[a].div(&step.q[a]))
            } else {
                (&step.p[a], step.q[a].div(&step.p[a]))
            };
            acc = acc + walk(m, &x.child(a), k, dual, w.clone() * weight.clone(), r.clone() * ratio);
        }
        acc
    }
    walk(m, x, k, dual, S::one(), S::one())
}

fn equal<S: Scalar>(a: &S, b: &S) -> bool {
    if S::EXACT {
        a.close_to(b, 0.0)
    } else {
        (a.to_f64() - b.to_f64()).abs() <= FLOAT_TOL
    }
}

fn le<S: Scalar>(a: &S, b: &S) -> bool {
    if S::EXACT {
        a.le(b)
    } else {
        a.to_f64() <= b.to_f64() + FLOAT_TOL
    }
}

fn corpus() -> Vec<KernelPairModel<Surd>> {
    fixtures::corpus(CORPUS_SIZE, CORPUS_SEED)
}

fn horizon<S: Scalar>(m: &KernelPairModel<S>) -> usize {
    m.horizon().unwrap()
}

fn hellinger_on<S: Scalar>(m: &KernelPairModel<S>, k_cap: usize) -> Result<usize, String> {
    let budget = AtomBudget::default();
    let mut checked = 0;
    for k in 1..=k_cap.min(horizon(m)) {
        let atoms = leaves(m, k);
        for n in 1..=k {
            // E_ℙ[(√Φₙ − √Φ_{k+1})²] by enumeration
            let lhs = atoms.iter().fold(S::zero(), |acc, l| {
                let d = l.phis[n - 1].sqrt() + S::from_f64(-1.0) * l.phis[k].sqrt();
                acc + l.p.clone() * d.clone() * d
            });
            // 2(1 − E_ℙ'[M_{n,k}]) with M from the engine
            let e = leaves(m, n - 1).iter().fold(S::zero(), |acc, l| {
                acc + l.q.clone() * affinity::m_nk(m, &l.prefix, n, k).unwrap()
            });
            let rhs = S::from_f64(2.0) * (S::one() + S::from_f64(-1.0) * e.clone());
            ensure!(equal(&lhs, &rhs), "n={n} k={k}: {} vs {}", lhs.to_text(), rhs.to_text());
            let lib = affinity::hellinger_identity(m, n, k, budget).map_err(|e| e.to_string())?;
            ensure!(equal(&lib.lhs, &lhs) && equal(&lib.rhs, &rhs), "library identity differs at n={n} k={k}");
            checked += 1;
        }
    }
    Ok(checked)
}

fn criterion_1() -> Check {
    let mut checked = 0;
    for (i, m) in corpus().iter().enumerate() {
        checked += hellinger_on(m, 4).map_err(|e| format!("model {i} exact: {e}"))?;
        checked += hellinger_on(&m.to_float(), 4).map_err(|e| format!("model {i} float: {e}"))?;
    }
    Ok(format!("{checked} (n,k) pairs, exact and float"))
}

fn dual_and_monotone<S: Scalar>(m: &KernelPairModel<S>) -> Result<usize, String> {
    let h = horizon(m);
    let mut checked = 0;
    for k in 1..=h {
        for n in 1..=k {
            for l in leaves(m, n - 1) {
                let x = &l.prefix;
                let direct = affinity::m_nk(m, x, n, k).unwrap();
                let dual = affinity::m_nk_dual(m, x, n, k).unwrap();
                ensure!(equal(&direct, &brute_m(m, x, k, false)), "M differs from enumeration at n={n} k={k} x={x}");
                ensure!(equal(&dual, &brute_m(m, x, k, true)), "dual differs from enumeration at n={n} k={k} x={x}");
                ensure!(equal(&direct, &dual), "M ≠ M' at n={n} k={k} x={x}");
                ensure!(le(&direct, &S::one()) && le(&S::zero(), &direct), "M outside [0,1] at n={n} k={k} x={x}");
                if k < h {
                    let next = affinity::m_nk(m, x, n, k + 1).unwrap();
                    ensure!(le(&next, &direct), "M_{{n,k+1}} > M_{{n,k}} at n={n} k={k} x={x}");
                }
                checked += 1;
            }
        }
    }
    Ok(checked)
}

fn criterion_2() -> Check {
    let mut checked = 0;
    for (i, m) in corpus().iter().enumerate() {
        checked += dual_and_monotone(m).map_err(|e| format!("model {i}: {e}"))?;
    }
    Ok(format!("{checked} atom checks, exact"))
}

fn martingale_steps<S: Scalar>(m: &KernelPairModel<S>) -> Result<usize, String> {
    let h = horizon(m);
    let mut checked = 0;
    for k in 1..=h {
        for n in 1..=k {
            for l in leaves(m, n - 1) {
                let x = &l.prefix;
                let step = m.conditional_kernels(x).unwrap();
                let m_here = affinity::m_nk(m, x, n, k).unwrap();
                let n_here = l.phis[n - 1].sqrt() * m_here.clone();
                let mut m_sq_next = S::zero();
                let mut n_next = S::zero();
                for a in 0..step.p.len() {
                    if step.p[a].is_zero() {
                        continue;
                    }
                    let child = x.child(a);
                    let phi_child = l.phis[n - 1].clone() * step.q[a].div(&step.p[a]);
                    let m_child = affinity::m_nk(m, &child, n + 1, k).unwrap();
                    m_sq_next = m_sq_next + step.p[a].clone() * m_child.clone() * m_child.clone();
                    n_next = n_next + step.p[a].clone() * phi_child.sqrt() * m_child;
                }
                // N_{·,k} is a ℙ-martingale; M_{·,k}² a ℙ-submartingale
                ensure!(equal(&n_here, &n_next), "N step fails at n={n} k={k} x={x}");
                ensure!(le(&(m_here.clone() * m_here), &m_sq_next), "M² step fails at n={n} k={k} x={x}");
                checked += 1;
            }
        }
    }
    Ok(checked)
}

fn criterion_3() -> Check {
    let mut checked = 0;
    for (i, m) in corpus().iter().enumerate() {
        checked += martingale_steps(m).map_err(|e| format!("model {i} exact: {e}"))?;
        checked += martingale_steps(&m.to_float()).map_err(|e| format!("model {i} float: {e}"))?;
    }
    Ok(format!("{checked} atom steps, exact and float"))
}

fn criterion_4() -> Check {
    let budget = AtomBudget::default();
    let mut checked = 0;
    for (i, m) in corpus().iter().enumerate() {
        for k in 1..=horizon(m).min(5) {
            let atoms = leaves(m, k);
            let (mut p_b, mut q_not_b) = (Surd::zero(), Surd::zero());
            for l in &atoms {
                if Surd::one().cmp_value(&l.phis[k]).is_lt() {
                    p_b = p_b + l.p.clone();
                } else {
                    q_not_b = q_not_b + l.q.clone();
                }
            }
            let bound = brute_m(m, &Prefix::empty(), k, false);
            ensure!(Scalar::le(&p_b, &bound) && Scalar::le(&q_not_b, &bound), "model {i} k={k}: bounds fail");
            let w = decide::witness_set(m, k, budget).map_err(|e| e.to_string())?;
            ensure!(
                w.p_mass == p_b && w.q_complement_mass == q_not_b && w.bound == bound,
                "model {i} k={k}: witness differs from enumeration"
            );
            checked += 1;
        }
    }
    let markov = fixtures::markov_two_state();
    let lambda = 0.72f64.sqrt() + 0.02f64.sqrt();
    let bound = |k| decide::witness_set(&markov, k, budget).map(|w| w.bound).map_err(|e| e.to_string());
    let ks: Vec<usize> = (190..=200).collect();
    let bounds = ks.iter().map(|&k| bound(k)).collect::<Result<Vec<f64>, _>>()?;
    let b200 = *bounds.last().unwrap();
    ensure!(b200 < 0.2, "Markov bound at k=200 is {b200}");
    ensure!(bounds.windows(2).all(|w| w[1] < w[0]), "Markov bounds not decreasing: {bounds:?}");
    let rate = bounds[10] / bounds[9];
    ensure!((rate - lambda).abs() < 1e-9, "rate {rate} vs √.72+√.02 = {lambda}");
    let w = decide::witness_set(&markov, 200, budget).map_err(|e| e.to_string())?;
    ensure!(w.p_mass <= w.bound && w.q_complement_mass <= w.bound, "Markov witness bounds fail at k=200");
    Ok(format!(
        "{checked} corpus witnesses; Markov bound(200) = {b200:.6}, rate {rate:.6} (λ = {lambda:.6})"
    ))
}

fn criterion_5() -> Check {
    let target = (-std::f64::consts::PI.powi(2) / 48.0).exp();
    let config = DecideConfig {
        k_max: 10_000,
        ..DecideConfig::default()
    };
    let mut out = Vec::new();
    for (alpha, expected) in [
        (0.4, Decision::Singular),
        (0.5, Decision::Singular),
        (0.6, Decision::Equivalent),
        (0.75, Decision::Equivalent),
        (1.0, Decision::Equivalent),
    ] {
        let v = decide::decide_equivalence(&fixtures::gaussian_family(alpha), &config)
            .map_err(|e| e.to_string())?;
        ensure!(v.decision == expected, "alpha={alpha}: {:?}, expected {expected:?}", v.decision);
        out.push(format!("{alpha}:{:?}", v.decision));
        if alpha == 1.0 {
            let b = v.evidence.m_limit.ok_or("no M-limit bracket")?;
            let width = b.width().ok_or("bracket has no lower end")?;
            ensure!(b.contains(target), "bracket {:?}..{} misses exp(-ζ(2)/8) = {target}", b.lower, b.upper);
            ensure!(width < 1e-3, "bracket width {width}");
            out.push(format!("bracket [{:.7}, {:.7}] ∋ {target:.7}", b.lower.unwrap(), b.upper));
        }
    }
    Ok(out.join(", "))
}

fn criterion_6() -> Check {
    let config = DecideConfig {
        k_max: 20,
        ..DecideConfig::default()
    };
    let mut identical = 0;
    for (i, m) in corpus().iter().enumerate() {
        if !m.kernels_identical() {
            continue;
        }
        identical += 1;
        let v = decide::decide_equivalence(m, &config).map_err(|e| e.to_string())?;
        ensure!(
            v.decision == Decision::Equivalent && v.basis == Basis::Exact,
            "model {i}: {:?}/{:?}",
            v.decision,
            v.basis
        );
        for k in 1..=horizon(m) {
            let m1k = affinity::m_nk(m, &Prefix::empty(), 1, k).unwrap();
            ensure!(m1k == Surd::one(), "model {i}: M_{{1,{k}}} = {}", m1k.to_text());
        }
    }
    ensure!(identical > 0, "corpus has no identical-kernel model");

    let m = fixtures::bernoulli_iid_exact();
    let rho = Surd::from_ratio(3, 8).sqrt() + Surd::from_ratio(1, 8).sqrt();
    ensure!((rho.to_f64() - 0.965926).abs() < 5e-7, "ρ = {}", rho.to_f64());
    let mut power = Surd::one();
    for k in 1..=20 {
        power = power * rho.clone();
        let m1k = affinity::m_nk(&m, &Prefix::empty(), 1, k).unwrap();
        ensure!(m1k == power, "M_{{1,{k}}} = {} vs ρ^{k} = {}", m1k.to_text(), power.to_text());
    }
    let v = decide::decide_equivalence(&m, &config).map_err(|e| e.to_string())?;
    ensure!(v.decision == Decision::Singular, "Bernoulli decision {:?}", v.decision);
    Ok(format!(
        "{identical} identical-kernel models Equivalent/Exact; Bernoulli Singular, M_{{1,k}} = ρ^k exactly for k ≤ 20"
    ))
}

fn criterion_7() -> Check {
    let m = fixtures::bernoulli_iid();
    let count = 100_000;
    let exact = 2.0 - (6f64.sqrt() + 2f64.sqrt()) / 2.0;
    ensure!((exact - 0.068148).abs() < 5e-7, "closed form {exact}");
    let traces = montecarlo::sample_paths(&m, Measure::P, 1, count, 2024).map_err(|e| e.to_string())?;
    let e = montecarlo::empirical_hellinger(&traces, 1, 1).map_err(|e| e.to_string())?;
    ensure!(e.within(exact, 3.0), "estimate {} ± {} vs {exact}", e.estimate, e.std_error);

    let traces = montecarlo::sample_paths(&m, Measure::P, 19, count, 7).map_err(|e| e.to_string())?;
    let summary = montecarlo::summarize(&traces, (0.1, 10.0)).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for d in &summary.depths {
        // exact spread: E_ℙ[Φₙ²] = (Σ q²/p)^(n−1) = 1.25^(n−1)
        let se = ((1.25f64.powi(d.n as i32 - 1) - 1.0) / count as f64).sqrt();
        let dev = (d.phi_mean.estimate - 1.0).abs();
        ensure!(dev <= 3.0 * se, "mean Φ_{} = {} (se {se})", d.n, d.phi_mean.estimate);
        if se > 0.0 {
            worst = worst.max(dev / se);
        }
    }
    ensure!(summary.depths.len() == 20, "checked {} depths", summary.depths.len());
    Ok(format!(
        "Hellinger {:.6} ± {:.6} vs {exact:.6}; mean Φₙ within {worst:.2}σ for n ≤ 20",
        e.estimate, e.std_error
    ))
}

fn models_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../models")
}

fn run_cli(args: &[&str]) -> Result<i32, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_macont"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    out.status.code().ok_or_else(|| "killed by signal".into())
}

fn without_metadata(path: &Path) -> Result<String, String> {
    let text = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
    let mut v: serde_json::Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    v.as_object_mut().ok_or("report is not an object")?.remove("metadata");
    Ok(v.to_string())
}

fn criterion_8() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let report = dir.path().join("report.json");
    let traces = dir.path().join("traces.csv");
    let r = report.to_str().unwrap();
    let t = traces.to_str().unwrap();
    let mut compared = 0;
    for (model, length) in [
        ("markov_two_state.json", "30"),
        ("bernoulli_iid.json", "30"),
        ("gaussian_alpha_1.json", "30"),
        ("tree_depth2.json", "2"),
    ] {
        let path = models_dir().join(model);
        let p = path.to_str().unwrap();
        let analyze = ["analyze", "--model", p, "--depth", "3", "--kmax", "200", "--out", r];
        let sample = [
            "sample", "--model", p, "--measure", "q", "--length", length, "--count", "500", "--seed", "99", "--csv", t,
            "--out", r,
        ];
        for args in [&analyze[..], &sample[..]] {
            let mut runs = Vec::new();
            for _ in 0..2 {
                let code = run_cli(args)?;
                ensure!([0, 10, 20].contains(&code), "{model} {}: exit {code}", args[0]);
                let csv = if args[0] == "sample" {
                    std::fs::read(&traces).map_err(|e| e.to_string())?
                } else {
                    Vec::new()
                };
                runs.push((without_metadata(&report)?, csv));
            }
            ensure!(runs[0] == runs[1], "{model} {}: outputs differ", args[0]);
            compared += 1;
        }
    }
    Ok(format!("{compared} command pairs byte-identical"))
}

struct Criterion {
    id: u32,
    title: &'static str,
    limit: Option<Duration>,
    run: fn() -> Check,
}

fn main() {
    let criteria = [
        Criterion { id: 1, title: "Hellinger L2 identity on the random corpus", limit: Some(Duration::from_secs(60)), run: criterion_1 },
        Criterion { id: 2, title: "dual equality and monotonicity of M", limit: None, run: criterion_2 },
        Criterion { id: 3, title: "N martingale and M submartingale steps", limit: None, run: criterion_3 },
        Criterion { id: 4, title: "witness-set bounds", limit: None, run: criterion_4 },
        Criterion { id: 5, title: "Kakutani boundary of the Gaussian family", limit: Some(Duration::from_secs(10)), run: criterion_5 },
        Criterion { id: 6, title: "verdicts for identical kernels and Bernoulli 1/2 vs 3/4", limit: None, run: criterion_6 },
        Criterion { id: 7, title: "Monte Carlo cross-validation", limit: Some(Duration::from_secs(30)), run: criterion_7 },
        Criterion { id: 8, title: "CLI determinism", limit: None, run: criterion_8 },
    ];
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let mut result = (c.run)();
        let elapsed = start.elapsed();
        if let (Ok(_), Some(limit)) = (&result, c.limit) {
            if elapsed > limit {
                result = Err(format!("took {elapsed:.1?}, limit {limit:?}"));
            }
        }
        let (status, detail) = match &result {
            Ok(d) => ("PASS", d.as_str()),
            Err(d) => ("FAIL", d.as_str()),
        };
        if result.is_err() {
            failed += 1;
        }
        println!("criterion {} {status} {} ({elapsed:.2?}): {detail}", c.id, c.title);
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
