use rmt_lab_cli::{config_digest, experiments, ExperimentConfig, SuiteName};
use serde_json::{json, Value};
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rmt-lab"))
}

fn write_config(dir: &Path, name: &str, v: &Value) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn manifest(out: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn law_semicircle_records_endpoints_and_inventory() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(
        d.path(),
        "law.json",
        &json!({
            "schema": 1, "kind": "law", "measure": {"kind": "atoms", "atoms": [[0.0, 1.0]]},
            "params": {"classical_n": 50, "expected_support": [-2.0, 2.0]},
            "thresholds": {"endpoint_tol": 1e-10}
        }),
    );
    let out = d.path().join("out");
    let o = run(&["law", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m = manifest(&out);
    assert!((m["results"]["L_minus"].as_f64().unwrap() + 2.0).abs() < 1e-10);
    assert!((m["results"]["L_plus"].as_f64().unwrap() - 2.0).abs() < 1e-10);
    assert_eq!(m["passed"], true);
    let listed: Vec<&str> = m["files"].as_array().unwrap().iter().map(|f| f["path"].as_str().unwrap()).collect();
    for entry in std::fs::read_dir(&out).unwrap() {
        let name = entry.unwrap().file_name().into_string().unwrap();
        assert!(listed.contains(&name.as_str()), "{name} missing from manifest");
    }
    for f in ["law.csv", "law.json", "classical_locations.csv", "config.json", "manifest.json"] {
        assert!(listed.contains(&f), "{f}");
    }
    let csv = std::fs::read_to_string(out.join("law.csv")).unwrap();
    assert!(csv.starts_with("E,rho\n"));
    assert_eq!(m["overrides"].as_array().unwrap().len(), 1);
}

fn rigidity_config(samples: usize) -> Value {
    json!({
        "schema": 1, "kind": "rigidity", "seed": 17, "samples": samples,
        "measure": {"kind": "atoms", "atoms": [[-0.5, 0.5], [0.5, 0.5]]},
        "ensemble": {"beta": 1, "N": 60, "potential": "iid"}
    })
}

#[test]
fn same_config_and_seed_give_identical_outputs() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), "r.json", &rigidity_config(6));
    let (a, b) = (d.path().join("a"), d.path().join("b"));
    for out in [&a, &b] {
        let o = run(&["rigidity", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["rigidity.csv", "rigidity_samples.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    // The stored configs differ only in the output directory.
    let stored = |p: &Path| {
        let mut v: Value = serde_json::from_str(&std::fs::read_to_string(p.join("config.json")).unwrap()).unwrap();
        v.as_object_mut().unwrap().remove("out");
        v
    };
    assert_eq!(stored(&a), stored(&b));
    let (ma, mb) = (manifest(&a), manifest(&b));
    assert_eq!(ma["seeds"], mb["seeds"]);
    assert_eq!(ma["files"].as_array().unwrap().len(), mb["files"].as_array().unwrap().len());
    // A different seed changes the samples.
    let c = d.path().join("c");
    let o = run(&["rigidity", "--config", cfg.to_str().unwrap(), "--out", c.to_str().unwrap(), "--seed", "18"]);
    assert_eq!(code(&o), 0);
    assert_ne!(std::fs::read(a.join("rigidity.csv")).unwrap(), std::fs::read(c.join("rigidity.csv")).unwrap());
    assert!(manifest(&c)["overrides"][0].as_str().unwrap().starts_with("seed: 17 -> 18"));
}

#[test]
fn adding_samples_keeps_existing_ones() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), "r.json", &rigidity_config(3));
    let (a, b) = (d.path().join("a"), d.path().join("b"));
    assert_eq!(code(&run(&["rigidity", "--config", cfg.to_str().unwrap(), "--out", a.to_str().unwrap()])), 0);
    assert_eq!(code(&run(&["rigidity", "--config", cfg.to_str().unwrap(), "--out", b.to_str().unwrap(), "--samples", "5"])), 0);
    let rows = |p: &Path| std::fs::read_to_string(p.join("rigidity_samples.csv")).unwrap().lines().map(String::from).collect::<Vec<_>>();
    let (ra, rb) = (rows(&a), rows(&b));
    assert_eq!(ra.len(), 4);
    assert_eq!(rb.len(), 6);
    assert_eq!(ra[..], rb[..4]);
}

#[test]
fn paircorr_window_rule_is_a_config_error() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(
        d.path(),
        "p.json",
        &json!({
            "schema": 1, "kind": "paircorr", "samples": 100,
            "measure": {"kind": "atoms", "atoms": [[-0.5, 0.5], [0.5, 0.5]]},
            "ensemble": {"beta": 2, "N": 1000, "potential": "iid"},
            "params": {"b": 0.02}
        }),
    );
    let o = run(&["paircorr", "--config", cfg.to_str().unwrap(), "--out", d.path().join("o").to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("params.b") && err.contains("N^{-1/2+delta}"), "{err}");
    assert!(!d.path().join("o").exists());
}

#[test]
fn malformed_configs_exit_with_code_two() {
    let d = tempfile::tempdir().unwrap();
    let cases = [
        json!({"schema": 2, "kind": "law"}),
        json!({"schema": 1, "kind": "law", "bogus": 1}),
        json!({"schema": 1, "kind": "rigidity"}),
        json!({"schema": 1, "kind": "moments", "params": {"m3": 0.0, "m4": 1.0, "gamma": 0.1}}),
        json!({"schema": 1, "kind": "law", "thresholds": {"ks_max": 0.1}}),
        json!({"schema": 1, "kind": "beta", "ensemble": {"beta": 2, "N": 500}}),
        json!({"schema": 1, "kind": "locallaw", "ensemble": {"beta": 1, "N": 100}, "params": {"etas": [0.01]}}),
    ];
    for (k, c) in cases.iter().enumerate() {
        let kind = c["kind"].as_str().unwrap();
        let p = write_config(d.path(), &format!("c{k}.json"), c);
        let o = run(&[kind, "--config", p.to_str().unwrap(), "--out", d.path().join(format!("o{k}")).to_str().unwrap()]);
        assert_eq!(code(&o), 2, "case {k}: {}", String::from_utf8_lossy(&o.stderr));
    }
    // Kind mismatch between subcommand and document.
    let p = write_config(d.path(), "m.json", &json!({"schema": 1, "kind": "law"}));
    assert_eq!(code(&run(&["moments", "--config", p.to_str().unwrap()])), 2);
    assert_eq!(code(&run(&["law", "--config", d.path().join("missing.json").to_str().unwrap()])), 2);
}

#[test]
fn threshold_and_runtime_failures_have_distinct_codes() {
    let d = tempfile::tempdir().unwrap();
    let fail = write_config(
        d.path(),
        "f.json",
        &json!({"schema": 1, "kind": "law", "params": {"expected_support": [-1.0, 1.0]}, "thresholds": {"endpoint_tol": 1e-6}}),
    );
    let o = run(&["law", "--config", fail.to_str().unwrap(), "--out", d.path().join("f").to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert_eq!(manifest(&d.path().join("f"))["passed"], false);
    // E far outside the support is only detectable once the law is solved.
    let rt = write_config(
        d.path(),
        "r.json",
        &json!({"schema": 1, "kind": "locallaw", "samples": 2, "ensemble": {"beta": 1, "N": 50}, "params": {"energies": [40.0]}}),
    );
    let o = run(&["locallaw", "--config", rt.to_str().unwrap(), "--out", d.path().join("r").to_str().unwrap()]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("local-law"));
}

#[test]
fn thread_count_comes_from_flag_or_environment() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), "r.json", &rigidity_config(4));
    let (a, b) = (d.path().join("a"), d.path().join("b"));
    let o = bin()
        .args(["rigidity", "--config", cfg.to_str().unwrap(), "--out", a.to_str().unwrap()])
        .env("RMT_LAB_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    let o = run(&["rigidity", "--config", cfg.to_str().unwrap(), "--out", b.to_str().unwrap(), "--threads", "1"]);
    assert_eq!(code(&o), 0);
    assert_eq!(std::fs::read(a.join("rigidity_samples.csv")).unwrap(), std::fs::read(b.join("rigidity_samples.csv")).unwrap());
    assert_eq!(code(&run(&["rigidity", "--config", cfg.to_str().unwrap(), "--threads", "0"])), 2);
}

#[test]
fn digest_ignores_field_order() {
    let a = ExperimentConfig::from_json(r#"{"schema": 1, "kind": "moments", "seed": 4, "params": {"m3": 0.0, "m4": 3.0, "gamma": 0.1}}"#).unwrap();
    let b = ExperimentConfig::from_json(r#"{"params": {"gamma": 0.1, "m4": 3.0, "m3": 0.0}, "seed": 4, "kind": "moments", "schema": 1}"#).unwrap();
    assert_eq!(config_digest(&a), config_digest(&b));
    let c = ExperimentConfig { seed: 5, ..a.clone() };
    assert_ne!(config_digest(&a), config_digest(&c));
}

#[test]
fn suite_configs_validate() {
    for name in [SuiteName::Quick, SuiteName::Full] {
        let list = experiments(name);
        assert!(list.len() >= 13);
        for (id, c) in &list {
            c.validate(None).unwrap_or_else(|e| panic!("{id}: {e}"));
            let back = ExperimentConfig::from_json(&serde_json::to_string(c).unwrap()).unwrap();
            assert_eq!(&back, c, "{id} round-trips");
        }
    }
}

#[test]
fn moments_run_writes_matched_law() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(
        d.path(),
        "m.json",
        &json!({"schema": 1, "kind": "moments", "params": {"m3": 0.2, "m4": 3.5, "gamma": 0.1}, "thresholds": {"m4_tol": 0.5}}),
    );
    let out = d.path().join("o");
    assert_eq!(code(&run(&["moments", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])), 0);
    let m: Value = serde_json::from_str(&std::fs::read_to_string(out.join("moments.json")).unwrap()).unwrap();
    let mom: Vec<f64> = m["moments"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert!(mom[0].abs() < 1e-10 && (mom[1] - 1.0).abs() < 1e-10 && (mom[2] - 0.2).abs() < 1e-10);
}

#[test]
fn shipped_configs_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let p = entry.unwrap().path();
        let c = ExperimentConfig::load(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        c.validate(p.parent()).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        n += 1;
    }
    assert!(n >= 5);
}
