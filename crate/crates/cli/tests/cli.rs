use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn model(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../models").join(name)
}

fn macont(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_macont"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("stdout is a JSON report")
}

#[test]
fn analyze_exit_codes_follow_the_decision() {
    for (file, expected, decision) in [
        ("identical.json", 0, "Equivalent"),
        ("gaussian_alpha_1.json", 0, "Equivalent"),
        ("gaussian_alpha_0.5.json", 10, "Singular"),
        ("bernoulli_iid.json", 10, "Singular"),
        ("markov_two_state.json", 10, "Singular"),
        ("tree_depth2.json", 0, "Equivalent"),
    ] {
        let p = model(file);
        let o = macont(&["analyze", "--model", p.to_str().unwrap(), "--kmax", "200"]);
        assert_eq!(code(&o), expected, "{file}: {}", String::from_utf8_lossy(&o.stderr));
        let r = stdout_json(&o);
        assert_eq!(r["verdict"]["decision"], decision, "{file}");
        assert!(o.stderr.is_empty(), "{file}");
    }
}

#[test]
fn identical_model_is_exact() {
    let p = model("identical.json");
    let r = stdout_json(&macont(&["analyze", "--model", p.to_str().unwrap()]));
    assert_eq!(r["verdict"]["basis"], "Exact");
    assert_eq!(r["model"]["numeric_mode"], "exact");
    assert_eq!(r["config"]["depth"], 4);
}

#[test]
fn report_lists_criteria_with_evidence() {
    let p = model("markov_two_state.json");
    let r = stdout_json(&macont(&["analyze", "--model", p.to_str().unwrap(), "--kmax", "300"]));
    let names: Vec<&str> = r["verdict"]["criteria"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert_eq!(names, ["MCriterion", "PredictableSum", "MarkovSpectral"]);
    for c in r["verdict"]["criteria"].as_array().unwrap() {
        assert!(c["values"].is_object() && c["bounds"].is_object());
    }
    let w = &r["verdict"]["witness"];
    for key in ["k", "p_mass", "q_complement_mass", "bound"] {
        assert!(!w[key].is_null(), "witness.{key}");
    }
    assert!(r["invariants"].as_array().unwrap().iter().all(|c| c["passed"] == true));
    assert!(r["metadata"]["timing_ms"].is_object());
}

#[test]
fn missing_model_file() {
    let o = macont(&["analyze", "--model", "/no/such/model.json"]);
    assert_eq!(code(&o), 1);
    assert!(o.stdout.is_empty());
    assert!(String::from_utf8_lossy(&o.stderr).contains("schema error"));
}

#[test]
fn usage_errors() {
    assert_eq!(code(&macont(&[])), 2);
    assert_eq!(code(&macont(&["analyze"])), 2);
    let p = model("bernoulli_iid.json");
    let p = p.to_str().unwrap();
    assert_eq!(code(&macont(&["sample", "--model", p, "--length", "3", "--count", "3"])), 2);
    assert_eq!(code(&macont(&["analyze", "--model", p, "--depth", "0"])), 2);
    assert_eq!(code(&macont(&["analyze", "--model", p, "--tol", "-1"])), 2);
}

#[test]
fn verify_passes_on_valid_models() {
    for file in ["markov_two_state.json", "tree_depth2.json", "bernoulli_iid.json"] {
        let p = model(file);
        let o = macont(&["verify", "--model", p.to_str().unwrap(), "--depth", "5"]);
        assert_eq!(code(&o), 0, "{file}: {}", String::from_utf8_lossy(&o.stderr));
        let r = stdout_json(&o);
        let checks = r["invariants"].as_array().unwrap();
        assert_eq!(checks.len(), 10);
        assert!(checks.iter().all(|c| c["passed"] == true));
    }
}

#[test]
fn verify_float_model_within_tolerance() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("float.json");
    std::fs::write(
        &p,
        r#"{"type": "markov", "markov": {"states": 3,
            "P": [[0.2, 0.5, 0.3], [0.1, 0.1, 0.8], [0.6, 0.3, 0.1]],
            "Q": [[0.3, 0.4, 0.3], [0.25, 0.25, 0.5], [0.5, 0.2, 0.3]],
            "init_p": [0.3, 0.3, 0.4], "init_q": [0.2, 0.5, 0.3]}}"#,
    )
    .unwrap();
    let o = macont(&["verify", "--model", p.to_str().unwrap(), "--depth", "5"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout_json(&o)["model"]["numeric_mode"], "float");
}

#[test]
fn corrupted_row_is_a_validation_error() {
    let p = model("corrupted_row.json");
    let o = macont(&["verify", "--model", p.to_str().unwrap()]);
    assert_eq!(code(&o), 3);
    assert!(o.stdout.is_empty());
    assert!(String::from_utf8_lossy(&o.stderr).contains("markov.row[0]"));
}

#[test]
fn verify_rejects_continuous_models() {
    let p = model("gaussian_alpha_1.json");
    assert_eq!(code(&macont(&["verify", "--model", p.to_str().unwrap()])), 2);
}

#[test]
fn budget_overrun_has_its_own_code() {
    let p = model("markov_two_state.json");
    let o = Command::new(env!("CARGO_BIN_EXE_macont"))
        .args(["verify", "--model", p.to_str().unwrap(), "--depth", "5"])
        .env("MACONT_ATOM_BUDGET", "8")
        .output()
        .unwrap();
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn sweep_flips_at_one_half() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.csv");
    let p = model("gaussian_alpha_1.json");
    let o = macont(&[
        "sweep", "--model", p.to_str().unwrap(), "--param", "alpha", "--values", "0.4,0.5,0.6,0.75,1.0",
        "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let mut rows = csv::Reader::from_reader(text.as_bytes());
    assert_eq!(
        rows.headers().unwrap(),
        vec!["alpha", "hellinger_partial_sum", "tail_bound", "verdict", "basis", "m1k_upper"]
    );
    let verdicts: Vec<(String, String)> = rows
        .records()
        .map(|r| {
            let r = r.unwrap();
            (r[0].to_string(), r[3].to_string())
        })
        .collect();
    let expected = [
        ("0.4", "Singular"),
        ("0.5", "Singular"),
        ("0.6", "Equivalent"),
        ("0.75", "Equivalent"),
        ("1.0", "Equivalent"),
    ];
    assert_eq!(verdicts.len(), expected.len());
    for ((a, v), (ea, ev)) in verdicts.iter().zip(expected) {
        assert_eq!((a.as_str(), v.as_str()), (ea, ev));
    }
}

#[test]
fn sweep_single_point_and_bad_values() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("one.csv");
    let p = model("bernoulli_iid.json");
    let p = p.to_str().unwrap();
    let o = macont(&["sweep", "--model", p, "--param", "alpha", "--values", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert_eq!(std::fs::read_to_string(&out).unwrap().lines().count(), 2);

    let o = macont(&["sweep", "--model", p, "--param", "alpha", "--values", "1,-0.5", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("alpha=-0.5"));

    let m = model("markov_two_state.json");
    let o = macont(&["sweep", "--model", m.to_str().unwrap(), "--param", "alpha", "--values", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("not a product"));
}

#[test]
fn sample_writes_traces() {
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("t.csv");
    let p = model("markov_two_state.json");
    let o = macont(&[
        "sample", "--model", p.to_str().unwrap(), "--measure", "p", "--length", "4", "--count", "3", "--seed", "5",
        "--csv", csv_path.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let text = std::fs::read_to_string(&csv_path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "path_id,step,symbol_or_value,log_phi,rho");
    assert_eq!(lines.len(), 1 + 3 * 4);
    let r = stdout_json(&o);
    assert_eq!(r["sample"]["seed"], 5);
    assert_eq!(r["sample"]["summary"]["depths"].as_array().unwrap().len(), 5);
}

#[test]
fn analyze_csv_has_header() {
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("m.csv");
    let out = dir.path().join("r.json");
    let p = model("tree_depth2.json");
    let o = macont(&[
        "analyze", "--model", p.to_str().unwrap(), "--csv", csv_path.to_str().unwrap(), "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    assert!(o.stdout.is_empty());
    let text = std::fs::read_to_string(&csv_path).unwrap();
    assert!(text.starts_with("n,k,prefix,m_value\n"));
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(r["tables"].as_array().unwrap().len(), 2);
}
