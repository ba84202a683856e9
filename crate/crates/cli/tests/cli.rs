use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use amalgam_cli::ExperimentConfig;
use amalgam_core::ncpoly::read_tuples;
use amalgam_core::verify::Harness;

fn amalgam(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_amalgam"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let p = dir.join("config.toml");
    fs::write(&p, text).unwrap();
    p
}

const SEMICIRCLE: &str = r#"
name = "one-semicircle"
seed = 1
polynomials = ["f1.g0^4", "f1.g0^2 f2.g0^2"]

[model.factor1]
bound = 3.0
recipe = { kind = "seeded_gue", count = 1, seed = 1 }

[model.factor2]
bound = 1.0
recipe = { kind = "quantile_diagonal", law = [[-1.0, 0.5], [1.0, 0.5]] }

[schedule]
k_list = [8]
samples = 4

[sample]
k = 8
count = 3

[cover]
k_list = [4]
points = 12
families = [["f1.g0"], ["f1.g0", "f2.g0"]]
eps = [0.3, 0.6]
observables = ["f1.g0^2"]
"#;

#[test]
fn oracle_tabulates_catalan_number() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SEMICIRCLE);
    let out = dir.path().join("out");
    let o = amalgam(&["oracle"], &cfg, &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("oracle.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "poly,re,im,cond_exp_norm");
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[0], "f1.g0^4");
    assert_eq!(row[1].parse::<f64>().unwrap(), 2.0);
    // tau(a^2 b^2) = tau(a^2) tau(b^2) = 1
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert!((row[1].parse::<f64>().unwrap() - 1.0).abs() < 1e-12);
    let moments = fs::read_to_string(out.join("moments.csv")).unwrap();
    assert!(moments.lines().any(|l| l == "f1.g0^2,1e0,0e0"), "{moments}");

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["status"], "complete");
    assert_eq!(manifest["pass"], true);
    assert_eq!(manifest["files"], serde_json::json!(["oracle.csv", "moments.csv"]));
    assert!(!out.join(".amalgam.lock").exists());
}

#[test]
fn malformed_weights_exit_2_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let text = SEMICIRCLE.replace("[1.0, 0.5]]", "[1.0, 0.4]]");
    let cfg = write_config(dir.path(), &text);
    let o = amalgam(&["verify"], &cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("model.factor2.recipe"), "{err}");
    assert!(err.contains("0.9"), "{err}");
    // nothing is computed or written for an invalid config
    assert!(!dir.path().join("out").exists());
}

#[test]
fn unknown_key_and_missing_section_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &SEMICIRCLE.replace("seed = 1\n", "seed = 1\ncolour = 3\n"));
    let o = amalgam(&["oracle"], &cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("colour"));

    let text = SEMICIRCLE.split("[sample]").next().unwrap().to_string();
    let cfg = write_config(dir.path(), &text);
    let o = amalgam(&["sample"], &cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn io_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let o = amalgam(&["verify"], &dir.path().join("missing.toml"), &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(3));

    let cfg = write_config(dir.path(), SEMICIRCLE);
    let out = dir.path().join("locked");
    fs::create_dir_all(&out).unwrap();
    fs::write(out.join(".amalgam.lock"), "").unwrap();
    let o = amalgam(&["oracle"], &cfg, &out);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("another run"));
}

#[test]
fn sample_dumps_the_verify_draws() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SEMICIRCLE);
    let out = dir.path().join("out");
    let o = amalgam(&["sample", "--seed", "77"], &cfg, &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let tuples = read_tuples(fs::File::open(out.join("samples_k8.bin")).unwrap()).unwrap();
    assert_eq!(tuples.len(), 3);
    let config = ExperimentConfig::parse(SEMICIRCLE).unwrap();
    let expected = Harness::new(config.model, 77).unwrap().draw(8, 3).unwrap();
    assert_eq!(tuples, expected);
}

#[test]
fn cover_writes_sandwiched_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SEMICIRCLE);
    let out = dir.path().join("out");
    let o = amalgam(&["cover"], &cfg, &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let mut r = csv::Reader::from_path(out.join("cover.csv")).unwrap();
    let headers = r.headers().unwrap().clone();
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let (lo, up) = (col("lower"), col("upper"));
    let rows: Vec<csv::StringRecord> = r.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 4);
    for row in &rows {
        let l: usize = row[lo].parse().unwrap();
        let u: usize = row[up].parse().unwrap();
        assert!(1 <= l && l <= u && u <= 12);
    }
    assert!(out.join("cover_concentration.csv").exists());
}

const TWO_FREE: &str = r#"
name = "two-free-semicirculars"
seed = 20240601
polynomials = ["f1.g0^2", "f1.g0 f2.g0", "f1.g0^2 f2.g0^2", "f1.g0 f2.g0 f1.g0 f2.g0", "f1.g0 f2.g0^2 f1.g0"]

[model.factor1]
bound = 2.5
recipe = { kind = "seeded_gue", count = 1, seed = 11 }

[model.factor2]
bound = 2.5
recipe = { kind = "seeded_gue", count = 1, seed = 12 }

[schedule]
k_list = [128]
samples = 60

[concentration]
k_list = [32, 64, 128]
samples = 50
observables = ["f1.g0 f2.g0"]
"#;

#[test]
fn verify_two_free_semicirculars_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TWO_FREE);
    let out = dir.path().join("out");
    let o = amalgam(&["verify", "--jobs", "2"], &cfg, &out);
    let rows = fs::read_to_string(out.join("rows.csv")).unwrap();
    assert_eq!(o.status.code(), Some(0), "{rows}");
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    let hyps: Vec<&str> = report["reports"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["hypothesis"].as_str().unwrap())
        .collect();
    assert_eq!(hyps, ["1", "2", "3", "4", "collapse"]);
    assert_eq!(report["pass"], true);
    assert_eq!(report["metadata"]["seeded_microstates"], true);
    for h in report["reports"].as_array().unwrap() {
        assert!(!h["rows"].as_array().unwrap().is_empty());
    }
}
