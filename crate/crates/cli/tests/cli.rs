use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_missmass"));
    c.env_remove("MISSMASS_THREADS");
    c
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn json_ok(args: &[&str]) -> Value {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("JSON on stdout")
}

const FIXTURES: [&str; 7] = [
    "regular.json",
    "delta_s_zero.json",
    "all_singletons.json",
    "y_zero.json",
    "good_turing.json",
    "single_point.json",
    "two_point.json",
];

#[test]
fn good_turing_fixture() {
    let f = fixture("good_turing.json");
    let v = json_ok(&["estimate", f.to_str().unwrap(), "--method", "gt"]);
    assert_eq!(v["method"], "gt");
    assert_eq!(v["W_over_Z"].as_f64().unwrap(), 0.4);
    assert_eq!(v["diagnostics"]["N"], 5);
    assert_eq!(v["diagnostics"]["V"].as_f64().unwrap(), 10.0);
}

#[test]
fn proportional_sample_is_point_mass() {
    let f = fixture("delta_s_zero.json");
    for method in ["mixed", "bayes", "profile"] {
        let v = json_ok(&["infer", f.to_str().unwrap(), "--method", method]);
        assert_eq!(v["singular_case"], "DeltaS_zero");
        // Y·V/X = 0.5 · 1 / 0.5
        assert_eq!(v["point_mass"].as_f64().unwrap(), 1.0);
        assert_eq!(v["alpha"]["value"], "inf");
    }
}

#[test]
fn all_singletons_give_infinite_z() {
    let f = fixture("all_singletons.json");
    for method in ["ipw-fixed", "ipw-poisson", "gt-rb", "gt"] {
        let v = json_ok(&["estimate", f.to_str().unwrap(), "--method", method]);
        assert_eq!(v["Z"], "inf", "{method}");
        assert!(v["reason"].is_string(), "{method}");
    }
    let v = json_ok(&["infer", f.to_str().unwrap(), "--method", "moment-match", "--strategy", "C"]);
    assert_eq!(v["params"]["lambda"].as_f64().unwrap(), 0.0);
    assert_eq!(v["verdict"]["kind"], "lambda_zero");
}

#[test]
fn every_fixture_runs_end_to_end() {
    for name in FIXTURES {
        let f = fixture(name);
        let f = f.to_str().unwrap();
        for method in ["ipw-poisson", "gt", "gt-rb", "gtoulmin", "rb-poisson"] {
            json_ok(&["estimate", f, "--method", method]);
        }
        for method in ["bayes", "profile", "mixed", "mle"] {
            let v = json_ok(&["infer", f, "--method", method]);
            let q = &v["quantiles"];
            assert!(q["5"].as_f64().unwrap() <= q["95"].as_f64().unwrap(), "{name} {method}");
        }
    }
}

#[test]
fn simulate_then_estimate_then_infer() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.json");
    let data_s = data.to_str().unwrap();
    let sim = [
        "simulate", "--model", "gamma-poisson", "--domain", "60", "--alpha", "30", "--b", "1", "--lambda", "0.5",
        "--order", "z-dirichlet", "--seed", "11", "--out", data_s,
    ];
    assert!(run(&sim).status.success());
    let first = std::fs::read(&data).unwrap();
    assert!(run(&sim).status.success());
    assert_eq!(first, std::fs::read(&data).unwrap(), "same seed, same bytes");
    let truth: Value = serde_json::from_slice(&first).unwrap();
    assert!(truth["model"]["Z"].as_f64().unwrap() > 0.0);

    let z = json_ok(&["estimate", data_s, "--method", "rb-exact", "--pi", "fixed-n"]);
    assert!(z["Z"].as_f64().unwrap() >= z["diagnostics"]["V"].as_f64().unwrap());

    let csv = dir.path().join("w.csv");
    let args = ["infer", data_s, "--method", "bayes", "--grid-points", "101", "--out-csv", csv.to_str().unwrap()];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout, "deterministic output");
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("W,density,cumulative"));
    let cum: Vec<f64> = lines.map(|l| l.split(',').nth(2).unwrap().parse().unwrap()).collect();
    assert_eq!(cum.len(), 101);
    assert!(cum.windows(2).all(|w| w[1] >= w[0]));
    assert!((cum.last().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn explicit_and_toy_models() {
    let dir = tempfile::tempdir().unwrap();
    let masses = dir.path().join("m.json");
    std::fs::write(&masses, r#"{"p": [1.0, 2.0, 0.5, 0.25]}"#).unwrap();
    let v = json_ok(&["simulate", "--model", "explicit", "--masses-file", masses.to_str().unwrap(), "--n", "10"]);
    assert_eq!(v["c"].as_array().unwrap().iter().map(|c| c.as_u64().unwrap()).sum::<u64>(), 10);

    let toy = dir.path().join("toy.json");
    let toy_s = toy.to_str().unwrap();
    let out = run(&["simulate", "--model", "toy-physics", "--spins", "8", "--seed", "2", "--out", toy_s]);
    assert!(out.status.success());
    let truth: Value = serde_json::from_slice(&std::fs::read(&toy).unwrap()).unwrap();
    let z_exact = truth["model"]["Z"].as_f64().unwrap();
    for gamma in ["0", "0.5", "1"] {
        let v = json_ok(&["estimate", toy_s, "--method", "mixture", "--gamma", gamma]);
        let z = v["Z"].as_f64().unwrap();
        assert!((z / z_exact - 1.0).abs() < 0.25, "gamma {gamma}: {z} vs {z_exact}");
        assert_eq!(v["diagnostics"]["R_ipw"].as_array().unwrap().len(), 3);
    }
}

#[test]
fn harmonic_mean_needs_h() {
    let f = fixture("two_point.json");
    let out = run(&["estimate", f.to_str().unwrap(), "--method", "hm"]);
    assert_eq!(out.status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let h = dir.path().join("h.json");
    std::fs::write(&h, "[0.125, 0.125]").unwrap();
    let v = json_ok(&["estimate", f.to_str().unwrap(), "--method", "hm", "--h-file", h.to_str().unwrap(), "--H", "1"]);
    // N·H / Σ c h/p = 5 / (4·0.125/0.9 + 0.125/0.2)
    let expected = 5.0 / (4.0 * 0.125 / 0.9 + 0.125 / 0.2);
    assert!((v["Z"].as_f64().unwrap() / expected - 1.0).abs() < 1e-14);
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["estimate", "--bogus"]).status.code(), Some(2));
    assert_eq!(run(&["estimate", "/no/such/file.json", "--method", "gt"]).status.code(), Some(2));
    let f = fixture("regular.json");
    let f = f.to_str().unwrap();
    assert_eq!(run(&["infer", f, "--method", "moment-match"]).status.code(), Some(2));
    assert_eq!(run(&["infer", f, "--method", "mixed", "--out-json", "/no/dir/x.json"]).status.code(), Some(2));
    let out = bin().args(["estimate", f, "--method", "gt"]).env("MISSMASS_THREADS", "zero").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(run(&["--help"]).status.success());

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\n  \"domain_size\": 2,\n  \"x\": [0.5, 0.5,\n}").unwrap();
    let out = run(&["estimate", bad.to_str().unwrap(), "--method", "gt"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 4"));

    std::fs::write(&bad, r#"{"domain_size": 2, "x": [0.5, 0.6], "entries": [{"i": 0, "p": 1.0, "c": 1}]}"#).unwrap();
    let out = run(&["estimate", bad.to_str().unwrap(), "--method", "gt"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sums to"));
}

#[test]
fn verify_subset() {
    let dir = tempfile::tempdir().unwrap();
    let out_json = dir.path().join("checks.json");
    let out = run(&["verify", "--only", "1,2,7", "--level", "quick", "--out-json", out_json.to_str().unwrap()]);
    assert!(out.status.success());
    let table = String::from_utf8_lossy(&out.stdout);
    assert_eq!(table.matches("[PASS]").count(), 3);
    let checks: Value = serde_json::from_slice(&std::fs::read(&out_json).unwrap()).unwrap();
    assert_eq!(checks.as_array().unwrap().len(), 3);
    assert_eq!(run(&["verify", "--only", "13"]).status.code(), Some(2));
}
