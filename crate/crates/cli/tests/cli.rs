use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const SINGLET: &str = r#"{"dims":[2,2],"re":[0,0.7071067811865476,-0.7071067811865476,0],"im":[0,0,0,0]}"#;
const ZERO_ZERO: &str = r#"{"dims":[2,2],"re":[1,0,0,0],"im":[0,0,0,0]}"#;
const BELL_PREP: &str = r#"{"inputs":[],"ancillas":[{"label":"A","dim":2},{"label":"B","dim":2}],
  "gates":[{"kind":"h","targets":["A"]},{"kind":"cnot","targets":["A","B"]}]}"#;
const BELL_MAP: &str = r#"{"inputs":[{"label":"A","dim":2}],"ancillas":[{"label":"B","dim":2}],
  "gates":[{"kind":"h","targets":["A"]},{"kind":"cnot","targets":["A","B"]}]}"#;
const ACCEPT_PREP: &str = r#"{"inputs":[],"ancillas":[{"label":"D","dim":2},{"label":"G","dim":2}],
  "gates":[{"kind":"x","targets":["D"]}]}"#;

struct Fixture {
    dir: TempDir,
}

impl Fixture {
    fn new() -> Self {
        let f = Self { dir: tempfile::tempdir().unwrap() };
        for (name, body) in [
            ("singlet.json", SINGLET),
            ("zz.json", ZERO_ZERO),
            ("bell_prep.json", BELL_PREP),
            ("bell_map.json", BELL_MAP),
            ("accept.json", ACCEPT_PREP),
        ] {
            std::fs::write(f.path(name), body).unwrap();
        }
        f
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_septest")).current_dir(self.dir.path()).args(args).output().unwrap()
    }

    fn json(&self, args: &[&str]) -> Value {
        let out = self.run(args);
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stdout));
        serde_json::from_slice(&out.stdout).unwrap()
    }
}

fn num(v: &Value, key: &str) -> f64 {
    v[key].as_f64().unwrap_or_else(|| panic!("missing {key} in {v}"))
}

#[test]
fn product_test_paths_agree() {
    let f = Fixture::new();
    let a = f.json(&["test", "--kind", "product", "--state", "singlet.json", "--cut", "0:1"]);
    let c = f.json(&["test", "--kind", "product", "--state", "singlet.json", "--cut", "0:1", "--method", "circuit"]);
    // (1 + 2 Tr rho_A^2 + 1) / 4 with purity 1/2
    assert!((num(&a, "probability") - 0.75).abs() < 1e-12);
    assert!((num(&c, "probability") - 0.75).abs() < 1e-9);
    assert_eq!(c["method"], "circuit");
}

#[test]
fn swap_test_of_orthogonal_states() {
    let f = Fixture::new();
    let v = f.json(&["test", "--kind", "swap", "--state", "singlet.json", "--other", "zz.json"]);
    assert!((num(&v, "probability") - 0.5).abs() < 1e-12);
}

#[test]
fn singlet_test_is_seeded() {
    let f = Fixture::new();
    let args = ["singlet-test", "--n", "1", "--state", "zz.json", "--trials", "300", "--seed", "9"];
    let a = f.run(&args);
    let b = f.run(&args);
    assert_eq!(a.stdout, b.stdout);
    let v: Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["seed"], 9);
    // |00> is anti-correlated with probability 0 in Z and 1/2 in X and Y
    assert!((num(&v, "analytic") - 1.0 / 3.0).abs() < 1e-12);
    assert!((num(&v, "mc_frequency") - 1.0 / 3.0).abs() < 0.1);
}

#[test]
fn missing_seed_is_echoed() {
    let f = Fixture::new();
    let v = f.json(&["singlet-test", "--n", "1", "--state", "singlet.json", "--trials", "10"]);
    assert!(v["seed"].is_u64());
}

#[test]
fn kext_of_product_and_singlet() {
    let f = Fixture::new();
    let p = f.json(&["kext", "--k", "2", "--state", "zz.json", "--cut", "0:1"]);
    assert_eq!(p["feasible"], true);
    assert!(p["extension"].is_object());
    let s = f.json(&["kext", "--k", "2", "--state", "singlet.json", "--cut", "0:1", "--party", "1"]);
    assert_eq!(s["feasible"], false);
    assert!(s["extension"].is_null());
}

#[test]
fn nearest_sep_bounds_singlet() {
    let f = Fixture::new();
    let v = f.json(&["nearest-sep", "--state", "singlet.json", "--seed", "1", "--restarts", "2", "--iters", "100"]);
    // the closest separable state to a Bell state is at trace distance 1 in the [0, 2] norm
    assert!((num(&v, "distance_upper") - 1.0).abs() < 1e-3);
    assert!(v["ensemble"]["weights"].is_array());
}

#[test]
fn bounds_as_csv() {
    let f = Fixture::new();
    let out = f.run(&["bounds", "--n", "3", "--format", "csv"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[0].split(',').any(|h| h == "locc_sep_bound"));
}

#[test]
fn out_flag_writes_file() {
    let f = Fixture::new();
    let out = f.run(&["bounds", "--n", "1", "--out", "b.json"]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(f.path("b.json")).unwrap()).unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 1);
}

#[test]
fn reduce_then_verify_qma2() {
    let f = Fixture::new();
    let out = f.run(&["reduce", "--kind", "prod2sim", "--in", "bell_prep.json", "--cut", "A:B", "--alpha", "0.1", "--beta", "1.5", "--out", "inst.json"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let inst: Value = serde_json::from_str(&std::fs::read_to_string(f.path("inst.json")).unwrap()).unwrap();
    assert_eq!(inst["tag"], "QuantumStateSimilarity");
    let probe = f.json(&["verify", "--protocol", "qma2", "--instance", "inst.json", "--prover", "probe", "--seed", "1", "--iters", "50"]);
    // best product claim against a Bell pair: 1/2 + 1/2 * 1/2
    assert!((num(&probe, "probability") - 0.75).abs() < 1e-9);
    let honest = f.json(&["verify", "--protocol", "qma2", "--instance", "inst.json", "--seed", "1"]);
    assert!(num(&honest, "probability") <= 0.75 + 1e-9);
}

#[test]
fn verify_qma_on_a_circuit() {
    let f = Fixture::new();
    let v = f.json(&["verify", "--protocol", "qma", "--circuit", "bell_map.json", "--cut", "A:B", "--k", "2", "--prover", "probe", "--iters", "50", "--seed", "2"]);
    // input |+> maps to the product |00>, so some witness is accepted with certainty
    assert!((num(&v, "probability") - 1.0).abs() < 1e-9);
    assert_eq!(v["per_seed"].as_array().unwrap().len(), 3);
}

#[test]
fn oversized_witness_is_rejected_fast() {
    let f = Fixture::new();
    assert!(f.run(&["reduce", "--kind", "bqp", "--in", "accept.json", "--out", "bqp.json"]).status.success());
    let out = f.run(&["verify", "--protocol", "qma", "--instance", "bqp.json"]);
    assert_eq!(out.status.code(), Some(1));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["error"]["code"], "DimensionCap");
}

#[test]
fn io_error_exit_code() {
    let f = Fixture::new();
    let out = f.run(&["test", "--kind", "product", "--state", "nope.json"]);
    assert_eq!(out.status.code(), Some(1));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["error"]["code"], "Io");
    assert!(v["error"]["message"].as_str().unwrap().contains("nope.json"));
}

#[test]
fn usage_errors_exit_two() {
    let f = Fixture::new();
    assert_eq!(f.run(&["test", "--kind", "bogus", "--state", "x"]).status.code(), Some(2));
    assert_eq!(f.run(&["report", "--suite", "unknown"]).status.code(), Some(2));
    assert_eq!(f.run(&["test", "--kind", "swap", "--state", "singlet.json"]).status.code(), Some(2));
    let bad_cut = f.run(&["test", "--kind", "product", "--state", "singlet.json", "--cut", "0:7"]);
    assert_eq!(bad_cut.status.code(), Some(2));
}

#[test]
fn dim_cap_override_applies() {
    let f = Fixture::new();
    let out = f.run(&["--dim-cap", "2", "kext", "--k", "2", "--state", "zz.json"]);
    assert_eq!(out.status.code(), Some(1));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["error"]["code"], "DimensionCap");
}
