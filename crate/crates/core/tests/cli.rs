use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_radial-compose");

const GROSSE: &str = r#"{
  "schema": "radial-compose/recipe/v1",
  "engine": "grosse",
  "potentials": {
    "V0": {"name": "exponential", "params": {"lambda": 1.0}},
    "V1": {"name": "inverse_square_shape", "params": {"lambda": -35.0}}
  },
  "outputs": {"report": true, "plot": true}
}"#;

fn write_recipe(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn run(args: &[&str], out_env: Option<&Path>) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.args(args).env_remove("RADIAL_COMPOSE_OUT");
    if let Some(dir) = out_env {
        cmd.env("RADIAL_COMPOSE_OUT", dir);
    }
    cmd.output().unwrap()
}

#[test]
fn compose_writes_report_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let recipe = write_recipe(dir.path(), "well.json", GROSSE);
    let out = dir.path().join("out");
    let o = run(&["compose", recipe.to_str().unwrap(), "--out", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("overall: PASS"));

    let report: Value = serde_json::from_str(&fs::read_to_string(out.join("well.report.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], Value::Bool(true));
    assert_eq!(report["levels"][0]["node_count_inner"], 2);
    assert_eq!(report["levels"][0]["node_count_composed"], 2);

    let csv = fs::read_to_string(out.join("well.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("r,V,phi,x"));
    let row: Vec<f64> = lines.next().unwrap().split(',').map(|s| s.parse().unwrap()).collect();
    assert_eq!(row.len(), 4);
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let recipe = write_recipe(dir.path(), "env.json", GROSSE);
    let out = dir.path().join("from_env");
    let o = run(&["compose", recipe.to_str().unwrap()], Some(&out));
    assert_eq!(o.status.code(), Some(0));
    assert!(out.join("env.report.json").exists());
    assert!(out.join("env.csv").exists());
}

#[test]
fn tight_tolerance_fails_verification() {
    let dir = tempfile::tempdir().unwrap();
    let recipe = write_recipe(dir.path(), "tight.json", GROSSE);
    let o = run(&["verify", recipe.to_str().unwrap(), "--tol", "1e-14"], None);
    assert_eq!(o.status.code(), Some(1));
    let report: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["passed"], Value::Bool(false));
    assert_eq!(report["levels"][0]["checks"]["residual"], Value::Bool(false));
}

#[test]
fn input_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json");
    assert_eq!(run(&["verify", missing.to_str().unwrap()], None).status.code(), Some(2));

    let broken = write_recipe(dir.path(), "broken.json", "{ not json");
    assert_eq!(run(&["verify", broken.to_str().unwrap()], None).status.code(), Some(2));

    let unknown = write_recipe(dir.path(), "unknown.json", &GROSSE.replace("exponential", "yukawa"));
    let o = run(&["verify", unknown.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(!String::from_utf8_lossy(&o.stderr).is_empty());

    let recipe = write_recipe(dir.path(), "ok.json", GROSSE);
    assert_eq!(run(&["verify", recipe.to_str().unwrap(), "--tol", "-1"], None).status.code(), Some(2));
}

#[test]
fn bound_state_constituent_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"{
      "schema": "radial-compose/recipe/v1",
      "engine": "theorem1",
      "potentials": {
        "V0": {"name": "exponential", "params": {"lambda": -3.0}},
        "V": {"name": "zero"}
      }
    }"#;
    let recipe = write_recipe(dir.path(), "bound.json", text);
    let o = run(&["verify", recipe.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bound states"));
}

#[test]
fn reports_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let recipe = write_recipe(dir.path(), "det.json", GROSSE);
    let a = run(&["verify", recipe.to_str().unwrap()], None);
    let b = run(&["verify", recipe.to_str().unwrap()], None);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn export_plot_prints_paths() {
    let dir = tempfile::tempdir().unwrap();
    let recipe = write_recipe(dir.path(), "plot.json", GROSSE);
    let out = dir.path().join("plots");
    let o = run(&["export-plot", recipe.to_str().unwrap(), "--out", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0));
    let printed = String::from_utf8_lossy(&o.stdout);
    assert!(printed.trim_end().ends_with("plot.csv"), "{printed}");
    assert!(out.join("plot.csv").exists());
}

#[test]
fn catalog_listing() {
    let o = run(&["catalog", "--json"], None);
    assert_eq!(o.status.code(), Some(0));
    let list: Value = serde_json::from_slice(&o.stdout).unwrap();
    let names: Vec<&str> = list.as_array().unwrap().iter().map(|e| e["name"].as_str().unwrap()).collect();
    assert_eq!(
        names,
        ["zero", "rational_quartic", "inverse_square_shape", "exponential", "singular_quartic", "coulomb"]
    );

    let o = run(&["catalog", "--filter", "singular"], None);
    let text = String::from_utf8_lossy(&o.stdout);
    assert_eq!(text.lines().count(), 1);
    assert!(text.starts_with("singular_quartic"));
}

#[test]
fn shipped_recipes_verify() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../recipes");
    let mut count = 0;
    for item in fs::read_dir(&dir).unwrap() {
        let path = item.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            let o = run(&["verify", path.to_str().unwrap()], None);
            assert_eq!(o.status.code(), Some(0), "{}: {}", path.display(), String::from_utf8_lossy(&o.stderr));
            count += 1;
        }
    }
    assert!(count >= 4);
}
