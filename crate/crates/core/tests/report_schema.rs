//! Every report the runner writes validates against the shipped schema.

use std::path::Path;

use dcopt::cli::{cmd_run, ExperimentConfig};
use serde_json::Value;
use tempfile::TempDir;

fn schema() -> jsonschema::Validator {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas/report.schema.json");
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    jsonschema::validator_for(&schema).unwrap()
}

fn report_for(cfg: &ExperimentConfig) -> Value {
    let dir = TempDir::new().unwrap();
    cmd_run(cfg, dir.path()).unwrap();
    serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap()
}

fn assert_valid(v: &jsonschema::Validator, report: &Value, label: &str) {
    let errors: Vec<String> = v.iter_errors(report).map(|e| format!("{} at {}", e, e.instance_path())).collect();
    assert!(errors.is_empty(), "{label}: {errors:#?}");
}

#[test]
fn shipped_configs_produce_valid_reports() {
    let v = schema();
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    for name in ["p2.toml", "quadratic_nn.toml", "logistic.toml"] {
        let cfg = ExperimentConfig::load(&root.join(name)).unwrap();
        assert_valid(&v, &report_for(&cfg), name);
    }
}

#[test]
fn every_solver_kind_produces_a_valid_report() {
    let v = schema();
    let base = ExperimentConfig::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/quadratic_admm.toml")).unwrap();
    for solver in &base.solvers {
        let mut cfg = base.clone();
        cfg.solvers = vec![solver.clone()];
        cfg.run.max_iters = 30;
        cfg.diagnostics.rate_checks = true;
        cfg.diagnostics.certify_every = 10;
        assert_valid(&v, &report_for(&cfg), &format!("{:?}", solver.kind));
    }
}

#[test]
fn schema_rejects_malformed_reports() {
    let v = schema();
    let cfg = ExperimentConfig::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/p2.toml")).unwrap();
    let good = report_for(&cfg);
    let mut missing = good.clone();
    missing.as_object_mut().unwrap().remove("ledger");
    assert!(!v.is_valid(&missing));
    let mut wrong = good.clone();
    wrong["ledger"]["total"] = Value::from(-1);
    assert!(!v.is_valid(&wrong));
    let mut extra = good;
    extra["final"]["bogus"] = Value::from(1);
    assert!(!v.is_valid(&extra));
}
