//! Experiment runner: configuration parsing, solver runs and comparisons,
//! bound certification, and CSV/JSON output.

pub mod config;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crate::dqm::{energy_report, AdmmReference, AdmmSolver, ContractionParams};
use crate::error::{Error, Result};
use crate::harness::{run_observed, ConvergenceTrace, Network, StopCriteria, TraceReference};
use crate::linalg::{self, fitted_rate, Vector};
use crate::netnewton::{linear_rate_stepsize, Dgd, NetworkNewton, NnConfig};
use crate::objective::{centralized_reference, consensus_optimum, CurvatureConstants, PenaltyObjective};
use crate::spectral::{
    alpha_gap_study, certify_splitting, check_contraction, check_linear_envelope, check_two_phase_recursion,
    rate_constants, rounding_level, RecursionParams, SpectralReport, SplitConstants,
};
use crate::topology::IncidenceSet;

pub use config::{ExperimentConfig, InitKind, Problem, SolverConfig, SolverKind};

/// Gradient tolerance of the centralized reference solves.
const REFERENCE_TOL: f64 = 1e-10;

#[derive(Debug, Parser)]
#[command(name = "dcopt", version, about = "Decentralized consensus optimization experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one solver; writes trace.csv and report.json.
    Run(CommonArgs),
    /// Run several solvers on one problem; writes comparison.csv and
    /// comparison_summary.csv.
    Compare(CompareArgs),
    /// Penalty gap and convergence rate over a grid of α; writes sweep.csv.
    SweepAlpha(SweepArgs),
    /// Certify the splitting bounds; writes certificate.json.
    Certify(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Overrides topology.seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// One or more configs; all must define the same problem.
    #[arg(long = "config", required = true, num_args = 1..)]
    pub configs: Vec<PathBuf>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Comma-separated grid; overrides sweep.alphas.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub alphas: Vec<f64>,
}

/// Successful command outcome; a nonempty list means some bound failed.
pub type Failures = Vec<String>;

/// Parses arguments, runs the command, and maps the outcome to an exit
/// code: 0 success, 1 configuration or runtime error, 2 failed certification.
pub fn main_with<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(&cli.command) {
        Ok(failures) if failures.is_empty() => ExitCode::SUCCESS,
        Ok(failures) => {
            for f in &failures {
                eprintln!("certification failed: {f}");
            }
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

pub fn execute(cmd: &Command) -> Result<Failures> {
    match cmd {
        Command::Run(a) => cmd_run(&load(&a.config, a.seed)?, &a.out),
        Command::Compare(a) => {
            let cfgs = a
                .configs
                .iter()
                .map(|p| load(p, a.seed))
                .collect::<Result<Vec<_>>>()?;
            cmd_compare(&cfgs, &a.out)
        }
        Command::SweepAlpha(a) => cmd_sweep_alpha(&load(&a.common.config, a.common.seed)?, &a.alphas, &a.common.out),
        Command::Certify(a) => cmd_certify(&load(&a.config, a.seed)?, &a.out),
    }
}

fn load(path: &Path, seed: Option<u64>) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = seed {
        cfg.topology.seed = seed;
    }
    Ok(cfg)
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(name), contents)?;
    Ok(())
}

fn to_json(value: &Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("json values serialize");
    s.push('\n');
    s
}

fn stop_criteria(cfg: &ExperimentConfig) -> StopCriteria {
    StopCriteria {
        max_iters: cfg.run.max_iters,
        grad_tol: cfg.run.grad_tol,
        rel_err_tol: cfg.run.rel_err_tol,
    }
}

/// Weight assumption failure reported as a certification failure.
fn weight_failure(e: &Error) -> Option<String> {
    match e {
        Error::WeightBounds(msg) => Some(format!(
            "weight matrix assumption violated (need 0 <= delta <= w_ii <= Delta < 1 and a spectral gap): {msg}"
        )),
        _ => None,
    }
}

/// One solver run with its diagnostics.
pub struct Execution {
    pub trace: ConvergenceTrace,
    pub alpha_changes: Vec<(usize, f64)>,
    pub diagnostics: Value,
    pub failures: Failures,
}

#[derive(Default)]
struct Diagnostics {
    notes: Vec<String>,
    failures: Failures,
    spectral: Vec<Value>,
    weight_bounds: Value,
    rates: Value,
    energy: Value,
}

impl Diagnostics {
    fn into_value(self) -> Value {
        json!({
            "weight_bounds": self.weight_bounds,
            "spectral": self.spectral,
            "rates": self.rates,
            "energy": self.energy,
            "notes": self.notes,
        })
    }

    fn record_spectral(&mut self, t: usize, result: Result<SpectralReport>) -> Result<()> {
        match result {
            Ok(report) => {
                for f in report.failures() {
                    self.failures.push(format!(
                        "splitting bound `{}` at t = {t}: measured {:e} vs bound {:e}",
                        f.name, f.measured, f.theoretical
                    ));
                }
                self.spectral.push(json!({ "t": t, "pass": report.pass(), "report": report }));
                Ok(())
            }
            Err(Error::TooLarge { dim, cap }) => {
                self.notes
                    .push(format!("spectral certification skipped: dimension {dim} exceeds {cap}"));
                Ok(())
            }
            Err(e) => match weight_failure(&e) {
                Some(_) => Ok(()),
                None => Err(e),
            },
        }
    }
}

/// Runs one solver on the problem under the configured stop rule.
pub fn execute_solver(problem: &Problem, cfg: &ExperimentConfig, s: &SolverConfig) -> Result<Execution> {
    s.validate()?;
    if s.kind.is_admm() {
        execute_admm(problem, cfg, s)
    } else {
        execute_penalty(problem, cfg, s)
    }
}

fn execute_penalty(problem: &Problem, cfg: &ExperimentConfig, s: &SolverConfig) -> Result<Execution> {
    let nn_cfg: NnConfig = s.nn();
    let pen = problem.penalty(nn_cfg.alpha0)?;
    let adaptive = s.kind == SolverKind::Ann;
    let (x_star, f_star) = if adaptive {
        let xt = consensus_optimum(&pen, REFERENCE_TOL)?;
        (linalg::stack(&vec![xt; pen.n()]), None)
    } else {
        let r = centralized_reference(&pen, REFERENCE_TOL)?;
        (r.y_star, Some(r.f_star))
    };
    let y0 = match cfg.run.init {
        InitKind::Zero => Vector::zeros(pen.dim()),
        InitKind::Optimum => x_star.clone(),
    };
    let reference = TraceReference {
        x_star: Some(x_star.clone()),
        f_star,
    };
    let stop = stop_criteria(cfg);
    let diag_cfg = cfg.diagnostics;
    let mut diag = Diagnostics::default();
    if diag_cfg.enabled() {
        match pen.weights().check_bounds() {
            Ok(b) => diag.weight_bounds = serde_json::to_value(b).expect("serializable"),
            Err(e) => match weight_failure(&e) {
                Some(msg) => diag.failures.push(msg),
                None => return Err(e),
            },
        }
    }
    let weights_ok = diag.failures.is_empty();
    let every = if weights_ok { diag_cfg.certify_every } else { 0 };
    let topology = problem.topology.clone();
    let mut net = Network::new(&topology);

    let (trace, alpha_changes) = if s.kind == SolverKind::Dgd {
        let mut solver = Dgd::new(&pen, nn_cfg.eps, &y0)?;
        let mut spectral = Vec::new();
        let trace = run_observed(&mut solver, &mut net, stop, &reference, |t, sv| {
            if every > 0 && t % every == 0 {
                spectral.push((t, certify_splitting(&pen, &sv.iterate(), 0)));
            }
            Ok(())
        })?;
        for (t, r) in spectral {
            diag.record_spectral(t, r)?;
        }
        (trace, Vec::new())
    } else {
        let mut solver = NetworkNewton::new(&pen, nn_cfg, &y0)?;
        let mut spectral = Vec::new();
        let trace = run_observed(&mut solver, &mut net, stop, &reference, |t, sv| {
            if every > 0 && t % every == 0 {
                let at = pen.with_alpha(sv.alpha());
                spectral.push((t, certify_splitting(&at, &sv.iterate(), nn_cfg.k)));
            }
            Ok(())
        })?;
        for (t, r) in spectral {
            diag.record_spectral(t, r)?;
        }
        (trace, solver.alpha_changes().to_vec())
    };

    if diag_cfg.rate_checks && weights_ok {
        if s.kind == SolverKind::Nn {
            penalty_rate_checks(&pen, &nn_cfg, &x_star, &y0, &trace, &mut diag)?;
        } else {
            diag.notes
                .push(format!("rate checks apply to fixed-penalty network Newton, not {:?}", s.kind));
        }
    }
    let failures = std::mem::take(&mut diag.failures);
    Ok(Execution {
        trace,
        alpha_changes,
        diagnostics: if diag_cfg.enabled() { diag.into_value() } else { Value::Null },
        failures,
    })
}

fn penalty_rate_checks(
    pen: &PenaltyObjective,
    nn: &NnConfig,
    y_star: &Vector,
    y0: &Vector,
    trace: &ConvergenceTrace,
    diag: &mut Diagnostics,
) -> Result<()> {
    let consts = match pen.constants() {
        Ok(c) => c,
        Err(Error::NotStronglyConvex) => {
            diag.notes
                .push("rate checks require strongly convex local objectives".into());
            return Ok(());
        }
        Err(e) => return Err(e),
    };
    let bounds = pen.weights().check_bounds()?;
    let sc = SplitConstants::new(&consts, &bounds, pen.alpha(), nn.k);
    let f_star = pen.value(y_star)?;
    let f0 = pen.value_increment(y_star, y0)?.max(0.0);
    let eps_rule = linear_rate_stepsize(&consts, sc.lambda, sc.lambda_upper, f0)?;
    let rc = rate_constants(&consts, pen, sc.lambda, sc.lambda_upper, nn.eps, f0)?;
    let level = rounding_level(pen, y_star, sc.d_low)?;

    let envelope = if rc.zeta_valid && nn.eps <= eps_rule * (1.0 + 1e-12) {
        let check = check_linear_envelope(&trace.records, rc.zeta, f_star);
        if !check.pass {
            diag.failures.push(format!(
                "linear envelope violated at t = {} (gap/envelope = {:e})",
                check.worst_t, check.worst_ratio
            ));
        }
        serde_json::to_value(check).expect("serializable")
    } else {
        diag.notes.push(format!(
            "linear envelope not applicable: eps = {} exceeds the admissible stepsize {eps_rule:e}",
            nn.eps
        ));
        Value::Null
    };

    let (contraction, recursion) = if consts.lipschitz == 0.0 {
        let c = (nn.eps == 1.0).then(|| {
            let check = check_contraction(&trace.records, sc.rho_k1, level.floor);
            if !check.pass {
                diag.failures.push(format!(
                    "weighted-gradient contraction violated: ratio {:e} > rho^(K+1) = {:e}",
                    check.worst_ratio, check.bound
                ));
            }
            check
        });
        if c.is_none() {
            diag.notes.push("weighted-gradient contraction requires eps = 1".into());
        }
        (serde_json::to_value(c).expect("serializable"), Value::Null)
    } else {
        let params = RecursionParams {
            eps: nn.eps,
            zeta: rc.zeta,
            gamma1: rc.gamma1,
            gamma2: rc.gamma2,
            rho: sc.rho,
            k: nn.k,
            slack: level.slack,
            floor: level.floor,
        };
        let report = check_two_phase_recursion(&trace.records, &params);
        for st in report.steps.iter().filter(|st| !(st.recursion_ok && st.quadratic_ok)) {
            diag.failures.push(format!(
                "two-phase recursion violated at t = {}: next {:e} vs bound {:e}",
                st.t,
                st.next,
                st.quadratic_bound.unwrap_or(st.recursion_bound)
            ));
        }
        let summary = json!({
            "pass": report.pass,
            "t0": report.t0,
            "flagged": report.flagged,
            "checked": report.steps.len(),
            "note": report.note,
            "steps": report.steps,
        });
        (Value::Null, summary)
    };

    let fitted = fitted_rate(&gap_series(trace));
    diag.rates = json!({
        "constants": sc,
        "curvature": consts,
        "initial_gap": f0,
        "admissible_eps": eps_rule,
        "rate_constants": rc,
        "rounding": level,
        "linear_envelope": envelope,
        "contraction": contraction,
        "two_phase": recursion,
        "fitted_rate": fitted,
    });
    Ok(())
}

/// Positive optimality gaps above the rounding level of the first one.
fn gap_series(trace: &ConvergenceTrace) -> Vec<f64> {
    let gaps: Vec<f64> = trace.records.iter().filter_map(|r| r.f_gap).collect();
    let first = gaps.first().copied().unwrap_or(0.0);
    gaps.into_iter().take_while(|&g| g > 1e-10 * first).collect()
}

fn execute_admm(problem: &Problem, cfg: &ExperimentConfig, s: &SolverConfig) -> Result<Execution> {
    let hess_upper = problem
        .locals
        .iter()
        .map(|f| f.hessian_upper_bound())
        .fold(0.0, f64::max);
    let admm = s.admm(hess_upper)?;
    let inc = IncidenceSet::build(&problem.topology, problem.p())?;
    let reference = AdmmReference::compute(&problem.locals, &inc, REFERENCE_TOL)?;
    let mut solver = match cfg.run.init {
        InitKind::Zero => AdmmSolver::new(&problem.topology, &problem.locals, admm)?,
        InitKind::Optimum => {
            AdmmSolver::with_state(&problem.topology, &problem.locals, admm, reference.saddle_state(&inc))?
        }
    };
    let trace_ref = TraceReference {
        x_star: Some(reference.x_star.clone()),
        f_star: Some(reference.f_star),
    };
    let diag_cfg = cfg.diagnostics;
    let mut diag = Diagnostics::default();
    if diag_cfg.certify_every > 0 {
        diag.notes
            .push("splitting certification applies to the penalty methods only".into());
    }
    let consts = CurvatureConstants::aggregate(&problem.locals);
    let mut energy_on = diag_cfg.rate_checks;
    if energy_on && problem.topology.is_bipartite() {
        diag.notes
            .push("energy contraction diagnostics require a non-bipartite topology".into());
        energy_on = false;
    }
    if energy_on && consts.is_err() {
        diag.notes
            .push("energy contraction diagnostics require strongly convex local objectives".into());
        energy_on = false;
    }
    let consts = consts.unwrap_or(CurvatureConstants {
        m: 0.0,
        m_upper: hess_upper,
        lipschitz: 0.0,
    });
    let params = ContractionParams::default();
    let mut reports = Vec::new();
    let mut prev = None;
    let mut net = Network::new(&problem.topology);
    let trace = run_observed(&mut solver, &mut net, stop_criteria(cfg), &trace_ref, |_, sv| {
        if energy_on {
            let next = sv.state().clone();
            if let Some(p) = prev.replace(next.clone()) {
                reports.push(energy_report(&p, &next, &reference, &inc, &consts, admm.c, &params)?);
            }
        }
        Ok(())
    })?;
    if energy_on {
        let admissible: Vec<_> = reports.iter().filter(|r| r.hypotheses_hold).collect();
        for r in reports.iter().filter(|r| r.contraction_ok == Some(false)) {
            diag.failures.push(format!(
                "energy contraction violated at k = {}: V_next(1+delta) = {:e} > V = {:e}",
                r.k,
                r.v * (1.0 + r.delta.unwrap_or(0.0)),
                r.v_prev
            ));
        }
        for r in reports.iter().filter(|r| !r.primal_ok) {
            diag.failures.push(format!(
                "primal error bound violated at k = {}: {:e} > {:e}",
                r.k + 1,
                r.primal_err_sq,
                r.primal_bound
            ));
        }
        diag.energy = json!({
            "curvature": consts,
            "steps": reports.len(),
            "hypotheses_held": admissible.len(),
            "contraction_failures": reports.iter().filter(|r| r.contraction_ok == Some(false)).count(),
            "primal_failures": reports.iter().filter(|r| !r.primal_ok).count(),
            "limit_delta": reports.first().map(|r| r.limit_delta),
            "min_delta": admissible.iter().filter_map(|r| r.delta).reduce(f64::min),
            "reports": reports,
        });
    }
    let failures = std::mem::take(&mut diag.failures);
    Ok(Execution {
        trace,
        alpha_changes: Vec::new(),
        diagnostics: if diag_cfg.enabled() { diag.into_value() } else { Value::Null },
        failures,
    })
}

fn only_solver(cfg: &ExperimentConfig) -> Result<&SolverConfig> {
    match cfg.solvers.as_slice() {
        [s] => Ok(s),
        [] => Err(Error::InvalidArgument("config defines no [[solver]]".into())),
        _ => Err(Error::InvalidArgument(format!(
            "run takes exactly one [[solver]], found {}; use compare",
            cfg.solvers.len()
        ))),
    }
}

/// Writes `trace.csv` and `report.json`.
pub fn cmd_run(cfg: &ExperimentConfig, out: &Path) -> Result<Failures> {
    let s = only_solver(cfg)?;
    let problem = Problem::build(cfg)?;
    let exec = execute_solver(&problem, cfg, s)?;
    write_file(out, "trace.csv", &exec.trace.to_csv()?)?;
    let report = run_report(cfg, &problem, &exec);
    write_file(out, "report.json", &to_json(&report))?;
    Ok(exec.failures)
}

pub fn run_report(cfg: &ExperimentConfig, problem: &Problem, exec: &Execution) -> Value {
    let last = exec.trace.last();
    let ledger = &exec.trace.ledger;
    json!({
        "solver": exec.trace.solver,
        "config": cfg,
        "iterations": exec.trace.iterations(),
        "final": {
            "F": last.objective,
            "F_gap": last.f_gap,
            "grad_norm": last.grad_norm,
            "rel_err": last.rel_err,
            "alpha": last.alpha,
        },
        "ledger": {
            "rounds": ledger.rounds.len(),
            "vector_msgs": ledger.vector_msgs,
            "signal_msgs": ledger.signal_msgs,
            "total": ledger.total(),
        },
        "metadata": {
            "n": problem.n(),
            "p": problem.p(),
            "directed_edges": problem.topology.m(),
            "seed": cfg.topology.seed,
            "weights": if problem.custom_weights { "file" } else { "metropolis" },
            "signal_delivery": "broadcast round inside the iteration, before the direction is computed",
        },
        "alpha_changes": exec.alpha_changes,
        "diagnostics": exec.diagnostics,
        "certification": {
            "pass": exec.failures.is_empty(),
            "failures": exec.failures,
        },
    })
}

/// Writes `comparison.csv` (relative error per solver per iteration) and
/// `comparison_summary.csv` (iterations to 1e-3 and 1e-9).
pub fn cmd_compare(cfgs: &[ExperimentConfig], out: &Path) -> Result<Failures> {
    let first = cfgs
        .first()
        .ok_or_else(|| Error::InvalidArgument("compare needs at least one config".into()))?;
    if let Some((i, _)) = cfgs.iter().enumerate().skip(1).find(|(_, c)| !first.same_problem(c)) {
        return Err(Error::InvalidArgument(format!(
            "config {} defines a different problem (topology or objective) than config 0",
            i
        )));
    }
    let solvers: Vec<&SolverConfig> = cfgs.iter().flat_map(|c| &c.solvers).collect();
    if solvers.is_empty() {
        return Err(Error::InvalidArgument("no [[solver]] to compare".into()));
    }
    let problem = Problem::build(first)?;
    let mut plain = first.clone();
    plain.diagnostics = Default::default();
    let mut traces = Vec::with_capacity(solvers.len());
    for s in &solvers {
        traces.push(execute_solver(&problem, &plain, s)?.trace);
    }
    let names = unique_names(traces.iter().map(|t| t.solver.clone()));

    let rows = traces.iter().map(|t| t.records.len()).max().unwrap_or(0);
    let mut csv_out = String::from("t");
    for n in &names {
        write!(csv_out, ",{n}").expect("string write");
    }
    csv_out.push('\n');
    for t in 0..rows {
        write!(csv_out, "{t}").expect("string write");
        for tr in &traces {
            csv_out.push(',');
            if let Some(e) = tr.records.get(t).and_then(|r| r.rel_err) {
                write!(csv_out, "{e:e}").expect("string write");
            }
        }
        csv_out.push('\n');
    }
    write_file(out, "comparison.csv", &csv_out)?;

    let mut summary = String::from("solver,iters_to_1e-3,iters_to_1e-9,msgs_to_1e-3,final_rel_err\n");
    for (name, tr) in names.iter().zip(&traces) {
        let opt = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
        let msgs = tr
            .iterations_to(1e-3)
            .map(|t| tr.records[t].msgs_cum.to_string())
            .unwrap_or_default();
        let fin = tr.last().rel_err.map(|e| format!("{e:e}")).unwrap_or_default();
        writeln!(
            summary,
            "{name},{},{},{msgs},{fin}",
            opt(tr.iterations_to(1e-3)),
            opt(tr.iterations_to(1e-9))
        )
        .expect("string write");
    }
    write_file(out, "comparison_summary.csv", &summary)?;
    Ok(Vec::new())
}

fn unique_names(names: impl Iterator<Item = String>) -> Vec<String> {
    let names: Vec<String> = names.collect();
    names
        .iter()
        .enumerate()
        .map(|(i, n)| {
            if names.iter().filter(|m| *m == n).count() > 1 {
                format!("{n}#{}", names[..i].iter().filter(|m| *m == n).count() + 1)
            } else {
                n.clone()
            }
        })
        .collect()
}

/// First network Newton solver of the config, or the default NN-1.
fn penalty_solver(cfg: &ExperimentConfig) -> NnConfig {
    cfg.solvers
        .iter()
        .find(|s| matches!(s.kind, SolverKind::Nn | SolverKind::Ann))
        .map(|s| NnConfig {
            adaptive: false,
            ..s.nn()
        })
        .unwrap_or_default()
}

/// Writes `sweep.csv`: penalty gap, normalized gap, ζ, and the fitted rate
/// of an NN-K run per α.
pub fn cmd_sweep_alpha(cfg: &ExperimentConfig, alphas: &[f64], out: &Path) -> Result<Failures> {
    let grid: &[f64] = if alphas.is_empty() { &cfg.sweep.alphas } else { alphas };
    if grid.is_empty() {
        return Err(Error::InvalidArgument(
            "alpha grid is empty; pass --alphas or set sweep.alphas".into(),
        ));
    }
    for &a in grid {
        config::check_alpha(a)?;
    }
    let problem = Problem::build(cfg)?;
    let nn = penalty_solver(cfg);
    let base = problem.penalty(grid[0])?;
    let study = alpha_gap_study(&base, grid, REFERENCE_TOL)?;
    let consts = base.constants()?;
    let bounds = base.weights().check_bounds()?;

    let mut csv_out = String::from("alpha,gap,gap_ratio,eps,zeta,fitted_rate,iterations\n");
    for row in &study.rows {
        let pen = problem.penalty(row.alpha)?;
        let r = centralized_reference(&pen, REFERENCE_TOL)?;
        let y0 = Vector::zeros(pen.dim());
        let sc = SplitConstants::new(&consts, &bounds, row.alpha, nn.k);
        let f0 = pen.value_increment(&r.y_star, &y0)?.max(0.0);
        let eps = nn.eps.min(linear_rate_stepsize(&consts, sc.lambda, sc.lambda_upper, f0)?);
        let rc = rate_constants(&consts, &pen, sc.lambda, sc.lambda_upper, eps, f0)?;
        let mut solver = NetworkNewton::new(&pen, NnConfig { eps, alpha0: row.alpha, ..nn }, &y0)?;
        let mut net = Network::new(&problem.topology);
        let reference = TraceReference {
            x_star: Some(r.y_star.clone()),
            f_star: Some(r.f_star),
        };
        let trace = run_observed(&mut solver, &mut net, stop_criteria(cfg), &reference, |_, _| Ok(()))?;
        let fitted = fitted_rate(&gap_series(&trace))
            .map(|v| format!("{v:e}"))
            .unwrap_or_default();
        writeln!(
            csv_out,
            "{:e},{:e},{:e},{:e},{:e},{fitted},{}",
            row.alpha,
            row.gap,
            row.ratio,
            eps,
            rc.zeta,
            trace.iterations()
        )
        .expect("string write");
    }
    write_file(out, "sweep.csv", &csv_out)?;
    Ok(Vec::new())
}

/// Writes `certificate.json`: splitting bounds at the origin and at `y*(α)`.
pub fn cmd_certify(cfg: &ExperimentConfig, out: &Path) -> Result<Failures> {
    let problem = Problem::build(cfg)?;
    let nn = penalty_solver(cfg);
    let pen = problem.penalty(nn.alpha0)?;
    let mut failures = Vec::new();
    let mut points = Vec::new();
    let bounds = match pen.weights().check_bounds() {
        Ok(b) => Some(b),
        Err(e) => {
            failures.push(weight_failure(&e).ok_or(e)?);
            None
        }
    };
    if bounds.is_some() {
        let r = centralized_reference(&pen, REFERENCE_TOL)?;
        for (at, y) in [("origin", Vector::zeros(pen.dim())), ("optimum", r.y_star)] {
            let report = certify_splitting(&pen, &y, nn.k)?;
            for f in report.failures() {
                failures.push(format!(
                    "splitting bound `{}` at the {at}: measured {:e} vs bound {:e}",
                    f.name, f.measured, f.theoretical
                ));
            }
            points.push(json!({ "at": at, "pass": report.pass(), "report": report }));
        }
    }
    let cert = json!({
        "alpha": nn.alpha0,
        "K": nn.k,
        "weight_bounds": bounds,
        "points": points,
        "pass": failures.is_empty(),
        "failures": failures,
    });
    write_file(out, "certificate.json", &to_json(&cert))?;
    Ok(failures)
}
