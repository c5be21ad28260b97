//! End-to-end runs of the `ppda` binary against the fixtures.
//!
//! Golden documents live in `tests/golden`; set `UPDATE_GOLDEN=1` to
//! rewrite them. The `provenance.solver` field depends on the machine and
//! is left out of the comparison.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

/// Relative to the workspace root, where the binary runs, so that file
/// names in golden documents do not depend on the checkout location.
fn fixture(name: &str) -> String {
    format!("fixtures/{name}")
}

fn ppda(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ppda"))
        .args(args)
        .current_dir(root())
        .env_remove("PPDA_SOLVER")
        .output()
        .expect("binary runs")
}

fn document(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}):\n{}\nstderr:\n{}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

/// Every number is a count and every fraction a string.
fn assert_exact(v: &Value, path: &str) {
    match v {
        Value::Number(n) => assert!(n.is_u64(), "{path}: non-integer number {n}"),
        Value::Array(items) => items.iter().enumerate().for_each(|(i, x)| assert_exact(x, &format!("{path}[{i}]"))),
        Value::Object(map) => map.iter().for_each(|(k, x)| assert_exact(x, &format!("{path}.{k}"))),
        _ => {}
    }
}

fn is_rational(s: &str) -> bool {
    let (n, d) = s.split_once('/').unwrap_or((s, "1"));
    let n = n.strip_prefix('-').unwrap_or(n);
    !n.is_empty() && !d.is_empty() && n.chars().chain(d.chars()).all(|c| c.is_ascii_digit())
}

fn interval(v: &Value) -> (String, String) {
    let pair = v.as_array().expect("interval is a pair");
    let lo = pair[0].as_str().expect("rational string").to_string();
    let hi = pair[1].as_str().expect("rational string").to_string();
    assert!(is_rational(&lo) && is_rational(&hi), "{lo} {hi}");
    (lo, hi)
}

fn golden(name: &str, args: &[&str]) -> Value {
    let out = ppda(args);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!out.stderr.is_empty(), "a summary goes to standard error");
    let mut doc = document(&out);
    assert_exact(&doc, "$");
    doc["provenance"]
        .as_object_mut()
        .expect("provenance")
        .remove("solver");
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(format!("{name}.json"));
    let rendered = serde_json::to_string_pretty(&doc).unwrap() + "\n";
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, &rendered).unwrap();
    } else {
        let expected = std::fs::read_to_string(&path).unwrap_or_else(|_| panic!("missing golden file {}", path.display()));
        let expected: Value = serde_json::from_str(&expected).unwrap();
        assert_eq!(doc, expected, "output of `{name}` changed:\n{rendered}");
    }
    doc
}

#[test]
fn validate_reports_sizes() {
    let doc = golden(
        "validate",
        &[
            "validate",
            &fixture("bernoulli-1-2.ppda"),
            "--defs",
            &fixture("bernoulli.sets"),
            "--observer",
            &fixture("bernoulli.observer"),
            "--muller",
            &fixture("bernoulli.muller"),
        ],
    );
    assert_eq!(doc["result"]["symbols"], serde_json::json!(["Z", "I", "D"]));
}

#[test]
fn until_brackets_the_walk() {
    let model = fixture("bernoulli-2-3.ppda");
    let doc = golden(
        "until",
        &[
            "until", &model, "--c2", "atZ", "--config", "IIZ", "--width", "1/100", "--threshold", ">= 1/4", "--lambda",
            "1/64",
        ],
    );
    let r = &doc["result"];
    let (lo, hi) = interval(&r["interval"]);
    let parse = |s: &str| {
        let (n, d) = s.split_once('/').unwrap_or((s, "1"));
        n.parse::<f64>().unwrap() / d.parse::<f64>().unwrap()
    };
    assert!(parse(&lo) <= 0.25 && 0.25 <= parse(&hi));
    assert!(parse(&hi) - parse(&lo) <= 0.01);
    assert_eq!(r["threshold"]["verdict"], "true");
    assert_eq!(doc["provenance"]["bisection_rounds"], 6);
}

#[test]
fn until_with_a_regular_target() {
    golden(
        "until-regular",
        &[
            "until",
            &fixture("bernoulli-1-3.ppda"),
            "--defs",
            &fixture("bernoulli.sets"),
            "--c2",
            "high",
            "--config",
            "Z",
        ],
    );
}

#[test]
fn irun_of_a_two_state_system() {
    golden("irun", &["irun", &fixture("two-state.ppda"), "--config", "p:X Y"]);
}

#[test]
fn pctl_qualitative() {
    let doc = golden(
        "pctl",
        &[
            "pctl",
            &fixture("bernoulli-2-3.ppda"),
            "--formula",
            "X[=1] (tt U[=1] atZ)",
            "--config",
            "Z",
            "--config",
            "DZ",
        ],
    );
    let results = doc["result"]["results"].as_array().unwrap();
    assert_eq!(results[0]["verdict"], "false");
    assert_eq!(results[1]["verdict"], "true");
}

#[test]
fn pctl_error_tolerant() {
    golden(
        "pctl-approx",
        &[
            "pctl-approx",
            &fixture("bernoulli-2-3.ppda"),
            "--formula",
            "tt U[>=1/5] atZ",
            "--config",
            "IZ",
            "--config",
            "IIIIZ",
            "--lambda",
            "1/10",
        ],
    );
}

#[test]
fn omega_with_observer_and_muller() {
    let doc = golden(
        "omega-observer",
        &[
            "omega",
            &fixture("bernoulli-1-2.ppda"),
            "--observer",
            &fixture("bernoulli.observer"),
            "--config",
            "Z",
            "--threshold",
            ">= 1",
        ],
    );
    assert_eq!(doc["result"]["threshold"]["verdict"], "true");
    let doc = golden(
        "omega-muller",
        &[
            "omega",
            &fixture("bernoulli-3-4.ppda"),
            "--muller",
            &fixture("bernoulli.muller"),
            "--config",
            "IIZ",
        ],
    );
    assert_eq!(interval(&doc["result"]["interval"]), ("0".into(), "0".into()));
}

#[test]
fn chain_dump() {
    let doc = golden(
        "chain",
        &["chain", &fixture("bernoulli-3-4.ppda"), "--observer", &fixture("bernoulli.observer")],
    );
    for state in doc["result"]["states"].as_array().unwrap() {
        for e in state["edges"].as_array().unwrap() {
            interval(&e["probability"]);
        }
    }
    let out = ppda(&["chain", &fixture("bernoulli-3-4.ppda"), "--observer", &fixture("bernoulli.observer"), "--text"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("state (Z, a1)\n  -> (Z, a1) [1/2, 1/2]"), "{text}");
}

#[test]
fn export_smt_script() {
    let doc = golden(
        "export-smt",
        &["export-smt", &fixture("bernoulli-1-2.ppda"), "--query", "I.eps >= 1"],
    );
    let script = doc["result"]["script"].as_str().unwrap();
    assert!(script.starts_with("(set-logic QF_NRA)"));
    assert!(script.contains("(check-sat)"));
}

#[test]
fn export_smt_checked_by_the_solver() {
    let Some(z3) = ["/usr/local/bin/z3", "/usr/bin/z3"].into_iter().find(|p| Path::new(p).is_file()) else {
        eprintln!("no z3 found; skipping");
        return;
    };
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("query.smt2");
    let solver = format!("{z3} -in");
    let out = ppda(&[
        "export-smt",
        &fixture("bernoulli-1-2.ppda"),
        "--query",
        "I.eps >= 1",
        "--output",
        script.to_str().unwrap(),
        "--check",
        "--solver-cmd",
        &solver,
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let doc = document(&out);
    assert_eq!(doc["result"]["check"]["verdict"], "true");
    assert!(std::fs::read_to_string(&script).unwrap().contains("(check-sat)"));
    // Termination is certain at x = 1/2 but not at x = 2/3 from I.
    let out = ppda(&[
        "export-smt",
        &fixture("bernoulli-2-3.ppda"),
        "--query",
        "I.eps >= 1",
        "--check",
        "--solver-cmd",
        &solver,
    ]);
    assert_eq!(document(&out)["result"]["check"]["verdict"], "false");
}

#[test]
fn simulation_is_reproducible() {
    let args = [
        "simulate",
        &fixture("bernoulli-2-3.ppda"),
        "--config",
        "IIZ",
        "--c2",
        "atZ",
        "--runs",
        "2000",
        "--horizon",
        "500",
        "--seed",
        "7",
    ];
    let doc = golden("simulate", &args);
    assert_eq!(doc["result"]["runs"], 2000);
}

#[test]
fn malformed_model_exits_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.ppda");
    std::fs::write(&path, "pbpa\nalphabet X;\nX -> 1/2 Y;\n").unwrap();
    let out = ppda(&["validate", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let doc = document(&out);
    assert_eq!(doc["ok"], false);
    assert_eq!(doc["error"]["kind"], "input");
    assert_eq!(doc["error"]["line"], 3);
    assert!(doc["error"]["col"].as_u64().is_some());
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.ppda:3:"));
}

#[test]
fn probabilities_must_sum_to_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("short.ppda");
    std::fs::write(&path, "pbpa\nalphabet X;\nX -> 1/2 eps;\n").unwrap();
    let out = ppda(&["validate", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(document(&out)["error"]["message"].as_str().unwrap().contains("sum to 1/2"));
}

#[test]
fn usage_errors_are_input_errors() {
    let out = ppda(&["until", &fixture("bernoulli-1-2.ppda"), "--c2", "atZ", "--config", "Z", "--width", "wide"]);
    assert_eq!(out.status.code(), Some(1));
    let out = ppda(&["until", &fixture("bernoulli-1-2.ppda"), "--c2", "atQ", "--config", "Z"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(document(&out)["error"]["kind"], "input");
    let out = ppda(&["pctl-approx", &fixture("two-state.ppda"), "--formula", "tt U[>=1/2] tt", "--config", "p:X"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn undecided_thresholds_exit_successfully() {
    // Intervals alone cannot separate a value from a bound it equals.
    let out = ppda(&[
        "until",
        &fixture("bernoulli-1-2.ppda"),
        "--backend",
        "intervals",
        "--c2",
        "atZ",
        "--config",
        "IZ",
        "--threshold",
        ">= 1",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(document(&out)["result"]["threshold"]["verdict"], "unknown");
}
