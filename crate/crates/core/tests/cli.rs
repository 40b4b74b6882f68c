//! End-to-end tests of the `dcopt` binary: exit codes, output files, and
//! validation messages.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const P2: &str = r#"
[topology]
kind = "path"
n = 2

[objective]
kind = "centered"
centers = [0.0, 2.0]

[[solver]]
kind = "nn"
K = 0
eps = 1.0
alpha0 = 1.0

[run]
max_iters = 20

[diagnostics]
certify_every = 1
rate_checks = true

[sweep]
alphas = [1.0, 0.1]
"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dcopt"))
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn dcopt(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn csv_rows(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path)
        .unwrap()
        .records()
        .collect::<Result<_, _>>()
        .unwrap()
}

fn field(rec: &csv::StringRecord, i: usize) -> f64 {
    rec[i].parse().unwrap()
}

fn run_config(text: &str) -> (TempDir, Output) {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "exp.toml", text);
    let out_dir = dir.path().join("out");
    let out = dcopt(&["run", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    (dir, out)
}

#[test]
fn run_on_two_node_path_matches_hand_iterates() {
    let (dir, out) = run_config(P2);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let out_dir = dir.path().join("out");
    let mut rdr = csv::Reader::from_path(out_dir.join("trace.csv")).unwrap();
    let header: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(
        header,
        ["t", "alpha", "F", "F_gap", "grad_norm", "weighted_grad_norm_prev_D", "rel_err", "msgs_cum"]
    );
    let rows = csv_rows(&out_dir.join("trace.csv"));
    assert!((field(&rows[0], 2) - 2.0).abs() < 1e-12);
    assert!((field(&rows[1], 2) - 0.75).abs() < 1e-12);
    assert_eq!(field(&rows[1], 7), 2.0);

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["solver"], "nn-0");
    assert_eq!(report["certification"]["pass"], true);
    let envelope = &report["diagnostics"]["rates"]["linear_envelope"];
    assert_eq!(envelope["pass"], true);
    assert!((envelope["zeta"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    assert_eq!(report["diagnostics"]["spectral"].as_array().unwrap().len(), 21);
}

#[test]
fn eps_out_of_range_is_a_config_error() {
    let (_dir, out) = run_config(&P2.replace("eps = 1.0", "eps = 1.5"));
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("eps must lie in (0,1]"), "{}", stderr(&out));
}

#[test]
fn unknown_key_is_rejected_by_name() {
    let (_dir, out) = run_config(&P2.replace("max_iters = 20", "max_iters = 20\nmax_iter = 5"));
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("max_iter"), "{}", stderr(&out));
}

#[test]
fn corrupted_weights_fail_certification() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "w.txt", "1 0 0\n0 0.5 0.5\n0 0.5 0.5\n");
    let text = P2
        .replace("n = 2", "n = 3\nweights = \"w.txt\"")
        .replace("centers = [0.0, 2.0]", "centers = [0.0, 2.0, 4.0]");
    let cfg = write(dir.path(), "exp.toml", &text);
    let out = dcopt(&["run", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    assert!(stderr(&out).contains("weight matrix assumption"), "{}", stderr(&out));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["certification"]["pass"], false);
}

#[test]
fn sweep_reports_closed_form_gaps() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "exp.toml", P2);
    let out = dcopt(&["sweep-alpha", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let rows = csv_rows(&dir.path().join("sweep.csv"));
    assert_eq!(rows.len(), 2);
    assert!((field(&rows[0], 1) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-4);
    assert!((field(&rows[1], 1) - 0.1286).abs() < 1e-4);
    // Larger α gives a larger linear-rate constant.
    assert!(field(&rows[0], 4) > field(&rows[1], 4));
}

#[test]
fn sweep_rejects_nonpositive_alpha_and_empty_grid() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "exp.toml", P2);
    let out_dir = dir.path().to_str().unwrap();
    let out = dcopt(&["sweep-alpha", "--config", cfg.to_str().unwrap(), "--out", out_dir, "--alphas", "1,0"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("alpha must be positive"), "{}", stderr(&out));

    let empty = write(dir.path(), "empty.toml", &P2.replace("alphas = [1.0, 0.1]", "alphas = []"));
    let out = dcopt(&["sweep-alpha", "--config", empty.to_str().unwrap(), "--out", out_dir]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("alpha grid is empty"), "{}", stderr(&out));

    let zero = write(dir.path(), "zero.toml", &P2.replace("alphas = [1.0, 0.1]", "alphas = [0.0]"));
    let out = dcopt(&["sweep-alpha", "--config", zero.to_str().unwrap(), "--out", out_dir]);
    assert_eq!(code(&out), 1);
}

#[test]
fn certify_writes_certificate() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "exp.toml", P2);
    let out = dcopt(&["certify", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let cert: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("certificate.json")).unwrap()).unwrap();
    assert_eq!(cert["pass"], true);
    assert_eq!(cert["points"].as_array().unwrap().len(), 2);
    assert_eq!(cert["weight_bounds"]["Delta"], 0.5);
}

const QUADRATIC: &str = r#"
[topology]
kind = "random"
n = 6
p_c = 0.5
seed = 3

[objective]
kind = "quadratic"
p = 2

[run]
max_iters = 300
init = "INIT"
"#;

fn compare(init: &str, solvers: &[&str]) -> (TempDir, Output) {
    let dir = TempDir::new().unwrap();
    let mut args = vec!["compare".to_string(), "--config".to_string()];
    for (i, s) in solvers.iter().enumerate() {
        let text = format!("{}\n[[solver]]\n{s}\n", QUADRATIC.replace("INIT", init));
        let p = write(dir.path(), &format!("c{i}.toml"), &text);
        args.push(p.to_str().unwrap().to_string());
    }
    args.extend(["--out".to_string(), dir.path().to_str().unwrap().to_string()]);
    let out = bin().args(&args).output().unwrap();
    (dir, out)
}

const ALL_SOLVERS: [&str; 6] = [
    "kind = \"dgd\"\neps = 0.1\nalpha0 = 0.5",
    "kind = \"nn\"\nK = 2\nalpha0 = 0.5",
    "kind = \"ann\"\nK = 1\nalpha0 = 1.0",
    "kind = \"dadmm\"\nc = 1.0",
    "kind = \"dlm\"\nc = 1.0",
    "kind = \"dqm\"\nc = 1.0",
];

#[test]
fn compare_writes_one_column_per_solver() {
    let (dir, out) = compare("zero", &ALL_SOLVERS);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let mut rdr = csv::Reader::from_path(dir.path().join("comparison.csv")).unwrap();
    let header: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, ["t", "dgd", "nn-2", "ann-1", "dadmm", "dlm", "dqm"]);
    let summary = csv_rows(&dir.path().join("comparison_summary.csv"));
    assert_eq!(summary.len(), 6);
    let dqm = summary.iter().find(|r| &r[0] == "dqm").unwrap();
    let dadmm = summary.iter().find(|r| &r[0] == "dadmm").unwrap();
    assert_eq!(&dqm[1], &dadmm[1]);
}

#[test]
fn compare_from_optimum_stays_put() {
    // ANN starts at the consensus optimum, which is not stationary at α₀.
    let fixed: Vec<&str> = ALL_SOLVERS.iter().copied().filter(|s| !s.contains("ann")).collect();
    let (dir, out) = compare("optimum", &fixed);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    for row in csv_rows(&dir.path().join("comparison.csv")) {
        for v in row.iter().skip(1).filter(|v| !v.is_empty()) {
            let e: f64 = v.parse().unwrap();
            assert!(e < 1e-9, "relative error {e} from the optimum");
        }
    }
}

#[test]
fn compare_rejects_different_problems() {
    let dir = TempDir::new().unwrap();
    let a = write(dir.path(), "a.toml", &QUADRATIC.replace("INIT", "zero"));
    let b = write(dir.path(), "b.toml", &QUADRATIC.replace("INIT", "zero").replace("seed = 3", "seed = 4"));
    let out = dcopt(&[
        "compare",
        "--config",
        a.to_str().unwrap(),
        b.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("different problem"), "{}", stderr(&out));
}

#[test]
fn seed_flag_overrides_topology_seed() {
    let dir = TempDir::new().unwrap();
    let text = format!("{}\n[[solver]]\n{}\n", QUADRATIC.replace("INIT", "zero"), ALL_SOLVERS[1]);
    let cfg = write(dir.path(), "exp.toml", &text);
    let out_dir = dir.path().join("out");
    let out = dcopt(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--seed",
        "11",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["metadata"]["seed"], 11);
}

#[test]
fn runs_are_deterministic() {
    let (a, out_a) = run_config(P2);
    let (b, out_b) = run_config(P2);
    assert_eq!((code(&out_a), code(&out_b)), (0, 0));
    for f in ["trace.csv", "report.json"] {
        assert_eq!(
            std::fs::read(a.path().join("out").join(f)).unwrap(),
            std::fs::read(b.path().join("out").join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn help_exits_zero_and_bad_usage_exits_one() {
    assert_eq!(code(&dcopt(&["--help"])), 0);
    assert_eq!(code(&dcopt(&["run"])), 1);
    assert_eq!(code(&dcopt(&["frobnicate"])), 1);
    let out = dcopt(&["run", "--config", "/nonexistent/exp.toml"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).starts_with("error:"), "{}", stderr(&out));
}

#[test]
fn shipped_configs_run() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let dir = TempDir::new().unwrap();
    for name in ["p2.toml", "quadratic_nn.toml", "logistic.toml"] {
        let cfg = root.join(name);
        let out = dcopt(&["run", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
        assert_eq!(code(&out), 0, "{name}: {}", stderr(&out));
    }
    let cfg = root.join("quadratic_admm.toml");
    let out = dcopt(&["compare", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
}
