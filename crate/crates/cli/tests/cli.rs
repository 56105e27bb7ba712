use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn bornlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bornlab")).args(args).output().expect("binary runs")
}

fn run_config(name: &str, out: &Path, extra: &[&str]) -> Output {
    let cfg = configs().join(name);
    let mut args = vec!["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    bornlab(&args)
}

fn summary(out: &Path, run: &str) -> Value {
    let text = std::fs::read_to_string(out.join(run).join("summary.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn check<'a>(s: &'a Value, name: &str) -> &'a Value {
    s["checks"].as_array().unwrap().iter().find(|c| c["name"] == name).unwrap_or_else(|| panic!("no check {name}"))
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn expect_hydrogen_reports_lz() {
    let out = tempfile::tempdir().unwrap();
    let o = run_config("hydrogen_211_expect.json", out.path(), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = summary(out.path(), "hydrogen-211");
    assert_eq!(s["passed"], true);
    let lz = check(&s, "angular_momentum.z");
    assert!((lz["value"].as_f64().unwrap() - 1.0).abs() <= 1e-6);
    assert_eq!(lz["provenance"], "oracle");
    for c in s["checks"].as_array().unwrap() {
        assert!(c["tolerance"].is_number() && c["provenance"].is_string(), "{c}");
    }
    assert!(!out.path().join("hydrogen-211/fields.csv").exists());
}

#[test]
fn madelung_check_on_eigenstate_passes() {
    let out = tempfile::tempdir().unwrap();
    let o = run_config("oscillator_madelung.json", out.path(), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = summary(out.path(), "oscillator-madelung");
    assert_eq!(s["data"]["snapshots"], "analytic");
    assert!(check(&s, "continuity.l2")["passed"].as_bool().unwrap());
}

#[test]
fn moments_table_shows_the_gap() {
    let out = tempfile::tempdir().unwrap();
    let o = run_config("oscillator_moments.json", out.path(), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = summary(out.path(), "oscillator-moments");
    let row = s["data"]["rows"].as_array().unwrap().iter().find(|r| r["observable"] == "energy" && r["order"] == 2).unwrap();
    let gap = row["qm"].as_f64().unwrap() - row["kolmogorov"].as_f64().unwrap();
    assert!((gap - 0.533_771_526_724_264_3).abs() <= 1e-6, "{gap}");
}

#[test]
fn evolve_writes_fields() {
    let out = tempfile::tempdir().unwrap();
    let o = run_config("gaussian_evolve.json", out.path(), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(out.path().join("gaussian-evolve/fields.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "x0,rho,v0,energy,mask");
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first.len(), 5);
    assert!(first[0].starts_with("-9.9609375000000000e0"), "{}", first[0]);
    assert_eq!(csv.lines().count(), 257);
    let s = summary(out.path(), "gaussian-evolve");
    assert_eq!(s["data"]["method"], "split_step");
    assert_eq!(s["data"]["times"].as_array().unwrap().len(), 21);
}

#[test]
fn uncertainty_decomposition_passes() {
    let out = tempfile::tempdir().unwrap();
    let o = run_config("gaussian_uncertainty.json", out.path(), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = summary(out.path(), "gaussian-uncertainty");
    assert_eq!(check(&s, "decomposition.axis1")["provenance"], "identity");
}

#[test]
fn sampling_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let o = run_config("oscillator_sample.json", dir.path(), &[]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    for file in ["summary.json", "samples.csv"] {
        let x = std::fs::read(a.path().join("oscillator-sample").join(file)).unwrap();
        let y = std::fs::read(b.path().join("oscillator-sample").join(file)).unwrap();
        assert!(x == y, "{file} differs between identical runs");
    }
    let o = run_config("oscillator_sample.json", b.path(), &["--seed", "7"]);
    assert_eq!(o.status.code(), Some(0));
    let x = std::fs::read(a.path().join("oscillator-sample/samples.csv")).unwrap();
    let y = std::fs::read(b.path().join("oscillator-sample/samples.csv")).unwrap();
    assert!(x != y);
    assert_eq!(summary(b.path(), "oscillator-sample")["seed"], 7);
}

#[test]
fn sampling_without_seed_is_a_config_error() {
    let out = tempfile::tempdir().unwrap();
    let o = run_config("oscillator_sample.json", out.path(), &["--override", "seed=null"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("seed"));
}

#[test]
fn unknown_key_exits_with_usage_code() {
    let out = tempfile::tempdir().unwrap();
    let o = run_config("oscillator_madelung.json", out.path(), &["--override", "potental=1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("potental"));
    let o = bornlab(&["--bogus"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn failed_check_exits_one() {
    let out = tempfile::tempdir().unwrap();
    let o = run_config("oscillator_madelung.json", out.path(), &["--override", "tolerances.force.body0.l2=-1"]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    let o = run_config("oscillator_madelung.json", out.path(), &["--override", "tolerances.no.such.check=1"]);
    assert_eq!(o.status.code(), Some(2));
    let cfg = std::fs::read_to_string(configs().join("oscillator_madelung.json")).unwrap();
    let mut v: Value = serde_json::from_str(&cfg).unwrap();
    v["tolerances"] = serde_json::json!({"continuity.l2": -1.0});
    let path = out.path().join("strict.json");
    std::fs::write(&path, v.to_string()).unwrap();
    let o = bornlab(&["--config", path.to_str().unwrap(), "--out", out.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    let s = summary(out.path(), "oscillator-madelung");
    assert_eq!(s["passed"], false);
    assert_eq!(s["failures"], serde_json::json!(["continuity.l2"]));
    assert!(stderr(&o).contains("continuity.l2"));
}

#[test]
fn blown_up_step_exits_three() {
    let out = tempfile::tempdir().unwrap();
    let o = run_config("gaussian_evolve.json", out.path(), &["--override", "evolution.dt=1e308"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn list_states_without_config() {
    let out = tempfile::tempdir().unwrap();
    let o = bornlab(&["list-states", "--out", out.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let s = summary(out.path(), "list-states");
    assert_eq!(s["data"]["states"].as_array().unwrap().len(), 4);
}

#[test]
fn double_slit_default_passes() {
    let out = tempfile::tempdir().unwrap();
    let o = run_config("double_slit.json", out.path(), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = summary(out.path(), "double-slit");
    assert!(check(&s, "distance")["value"].as_f64().unwrap() >= 0.1);
    let csv = std::fs::read_to_string(out.path().join("double-slit/histogram.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "y_lo,y_hi,sigma_double,sigma_left,sigma_right,mixture");
    assert_eq!(csv.lines().count(), 257);
}
