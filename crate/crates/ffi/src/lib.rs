//! C ABI over the dcopt solvers.
//!
//! Handles are opaque and owned by the caller once created; release them
//! with the matching `*_free` function. Every fallible call returns a
//! [`DcoptStatus`] and records a message readable through
//! [`dcopt_last_error`] on the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use dcopt::dqm::{AdmmConfig, AdmmSolver};
use dcopt::harness::{Network, Solver};
use dcopt::linalg::{Matrix, Vector};
use dcopt::netnewton::{NetworkNewton, NnConfig};
use dcopt::objective::{partition_logistic, LocalObjective, PenaltyObjective};
use dcopt::spectral::certify_splitting;
use dcopt::topology::{Topology, WeightMatrix};
use dcopt::Error;

/// Result codes shared by every entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DcoptStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    WeightBounds = 4,
    NotStronglyConvex = 5,
    NumericalFailure = 6,
    CertificationFailed = 7,
    Panic = 8,
}

/// Undirected connected graph.
pub struct DcoptTopology(Topology);

/// Penalized consensus problem: topology, Metropolis weights, local costs
/// and penalty coefficient.
pub struct DcoptProblem(PenaltyObjective);

/// Network Newton options. `tol <= 0` selects the default adaptive
/// threshold.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct DcoptNnOptions {
    pub k: usize,
    pub eps: f64,
    pub alpha0: f64,
    pub adaptive: bool,
    pub tol: f64,
    pub alpha_min: f64,
    pub max_iters: usize,
}

/// Summary of a finished run.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct DcoptRunStats {
    pub iterations: usize,
    pub vector_msgs: u64,
    pub signal_msgs: u64,
    /// Penalty coefficient at exit; NaN for ADMM runs.
    pub final_alpha: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let text = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = text);
}

fn status_of(err: &Error) -> DcoptStatus {
    match err {
        Error::Dimension { .. } => DcoptStatus::DimensionMismatch,
        Error::InvalidArgument(_) | Error::Disconnected { .. } | Error::Parse(_) | Error::TooLarge { .. } => {
            DcoptStatus::InvalidArgument
        }
        Error::InvalidWeights(_) | Error::WeightBounds(_) => DcoptStatus::WeightBounds,
        Error::NotStronglyConvex => DcoptStatus::NotStronglyConvex,
        _ => DcoptStatus::NumericalFailure,
    }
}

struct Fail(DcoptStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(DcoptStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Fail {
    Fail(DcoptStatus::InvalidArgument, msg.into())
}

/// Runs `f`, converting errors and panics into a status plus message.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> DcoptStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            DcoptStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(&format!("panic: {msg}"));
            DcoptStatus::Panic
        }
    }
}

unsafe fn slice<'a, T>(data: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if data.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(data, len))
}

unsafe fn slice_mut<'a, T>(data: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Fail> {
    if data.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(data, len))
}

unsafe fn handle<'a, T>(h: *const T, what: &str) -> Result<&'a T, Fail> {
    h.as_ref().ok_or_else(|| null(what))
}

unsafe fn emit<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("output handle"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

fn write_vector(out: &mut [f64], v: &Vector) -> Result<(), Fail> {
    if out.len() != v.len() {
        return Err(Fail(
            DcoptStatus::DimensionMismatch,
            format!("output buffer holds {} values, solution has {}", out.len(), v.len()),
        ));
    }
    out.copy_from_slice(v.as_slice());
    Ok(())
}

/// Message describing the last failure on this thread, or an empty string.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn dcopt_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn dcopt_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a topology from `n_edges` undirected pairs stored as
/// `edges[2e], edges[2e + 1]`.
///
/// # Safety
/// `edges` must point to `2 * n_edges` readable values and `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn dcopt_topology_from_edges(
    n: usize,
    edges: *const usize,
    n_edges: usize,
    out: *mut *mut DcoptTopology,
) -> DcoptStatus {
    guard(|| {
        let flat = slice(edges, 2 * n_edges, "edges")?;
        let pairs: Vec<(usize, usize)> = flat.chunks_exact(2).map(|e| (e[0], e[1])).collect();
        emit(out, DcoptTopology(Topology::from_edges(n, &pairs, 0)?))
    })
}

/// Samples a connected Erdős–Rényi graph with edge probability `p_c`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dcopt_topology_random(n: usize, p_c: f64, seed: u64, out: *mut *mut DcoptTopology) -> DcoptStatus {
    guard(|| emit(out, DcoptTopology(Topology::random(n, p_c, seed)?)))
}

/// Number of nodes.
///
/// # Safety
/// `topology` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn dcopt_topology_nodes(topology: *const DcoptTopology) -> usize {
    topology.as_ref().map_or(0, |t| t.0.n())
}

/// Number of undirected edges.
///
/// # Safety
/// `topology` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn dcopt_topology_edges(topology: *const DcoptTopology) -> usize {
    topology.as_ref().map_or(0, |t| t.0.m() / 2)
}

/// # Safety
/// `topology` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn dcopt_topology_free(topology: *mut DcoptTopology) {
    if !topology.is_null() {
        drop(Box::from_raw(topology));
    }
}

fn build_problem(top: &Topology, alpha: f64, locals: Vec<LocalObjective>) -> Result<DcoptProblem, Fail> {
    let w = WeightMatrix::metropolis(top);
    Ok(DcoptProblem(PenaltyObjective::new(top.clone(), w, alpha, locals)?))
}

/// Quadratic problem with `f_i(x) = ½xᵀA_i x + b_iᵀx`. `a` holds the `n`
/// row-major `p×p` blocks back to back and `b` the `n` vectors of length `p`.
///
/// # Safety
/// `a` must hold `n·p·p` values, `b` must hold `n·p` values and `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn dcopt_problem_quadratic(
    topology: *const DcoptTopology,
    p: usize,
    a: *const f64,
    b: *const f64,
    alpha: f64,
    out: *mut *mut DcoptProblem,
) -> DcoptStatus {
    guard(|| {
        let top = &handle(topology, "topology")?.0;
        if p == 0 {
            return Err(invalid("dimension p must be positive"));
        }
        let n = top.n();
        let a = slice(a, n * p * p, "a")?;
        let b = slice(b, n * p, "b")?;
        let locals = (0..n)
            .map(|i| {
                let ai = Matrix::from_row_slice(p, p, &a[i * p * p..(i + 1) * p * p]);
                LocalObjective::quadratic(ai, Vector::from_row_slice(&b[i * p..(i + 1) * p]))
            })
            .collect::<dcopt::Result<Vec<_>>>()?;
        emit(out, build_problem(top, alpha, locals)?)
    })
}

/// Regularized logistic regression. `features` holds `rows` row-major
/// samples of length `p`, `labels` holds values in {−1, +1}; rows are split
/// across nodes in contiguous chunks.
///
/// # Safety
/// `features` must hold `rows·p` values, `labels` must hold `rows` values and
/// `out` must be writable.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn dcopt_problem_logistic(
    topology: *const DcoptTopology,
    p: usize,
    features: *const f64,
    labels: *const f64,
    rows: usize,
    reg: f64,
    alpha: f64,
    out: *mut *mut DcoptProblem,
) -> DcoptStatus {
    guard(|| {
        let top = &handle(topology, "topology")?.0;
        if p == 0 {
            return Err(invalid("dimension p must be positive"));
        }
        let features = slice(features, rows * p, "features")?;
        let labels = slice(labels, rows, "labels")?;
        let samples: Vec<Vector> = features.chunks_exact(p).map(Vector::from_row_slice).collect();
        let locals = partition_logistic(&samples, labels, top.n(), reg)?;
        emit(out, build_problem(top, alpha, locals)?)
    })
}

/// Length `n·p` of the stacked iterate.
///
/// # Safety
/// `problem` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn dcopt_problem_dim(problem: *const DcoptProblem) -> usize {
    problem.as_ref().map_or(0, |p| p.0.dim())
}

/// # Safety
/// `problem` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn dcopt_problem_free(problem: *mut DcoptProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Defaults: `K = 1`, unit step, `α₀ = 1e-2`, fixed penalty, 100 iterations.
#[no_mangle]
pub extern "C" fn dcopt_nn_options_default() -> DcoptNnOptions {
    let d = NnConfig::default();
    DcoptNnOptions {
        k: d.k,
        eps: d.eps,
        alpha0: d.alpha0,
        adaptive: d.adaptive,
        tol: 0.0,
        alpha_min: d.alpha_min,
        max_iters: 100,
    }
}

fn finish(solver: &dyn Solver, net: &Network<'_>, iterations: usize, alpha: f64, y_out: &mut [f64], stats: *mut DcoptRunStats) -> Result<(), Fail> {
    write_vector(y_out, &solver.observe()?.x)?;
    if let Some(s) = unsafe { stats.as_mut() } {
        *s = DcoptRunStats {
            iterations,
            vector_msgs: net.ledger().vector_msgs,
            signal_msgs: net.ledger().signal_msgs,
            final_alpha: alpha,
        };
    }
    Ok(())
}

/// Runs network Newton (or its adaptive variant) from zero on `problem`,
/// writing the stacked iterate to `y_out` (length [`dcopt_problem_dim`]).
/// The problem's own penalty coefficient is replaced by `options.alpha0`.
/// `stats` may be null.
///
/// # Safety
/// Handles must be live, `options` readable, `y_out` writable for `y_len`
/// values and `stats` writable or null.
#[no_mangle]
pub unsafe extern "C" fn dcopt_nn_solve(
    problem: *const DcoptProblem,
    options: *const DcoptNnOptions,
    y_out: *mut f64,
    y_len: usize,
    stats: *mut DcoptRunStats,
) -> DcoptStatus {
    guard(|| {
        let pen = &handle(problem, "problem")?.0;
        let o = *handle(options, "options")?;
        let y_out = slice_mut(y_out, y_len, "y_out")?;
        let cfg = NnConfig {
            k: o.k,
            eps: o.eps,
            alpha0: o.alpha0,
            tol: (o.tol > 0.0).then_some(o.tol),
            adaptive: o.adaptive,
            alpha_min: o.alpha_min,
            ..NnConfig::default()
        };
        let mut solver = NetworkNewton::new(pen, cfg, &Vector::zeros(pen.dim()))?;
        let mut net = Network::new(pen.topology());
        for _ in 0..o.max_iters {
            solver.step(&mut net)?;
        }
        finish(&solver, &net, o.max_iters, solver.alpha(), y_out, stats)
    })
}

/// Runs DQM with penalty `c` on the local costs of `problem` from the
/// standard zero start. The penalty coefficient of `problem` is unused.
///
/// # Safety
/// Handles must be live, `x_out` writable for `x_len` values and `stats`
/// writable or null.
#[no_mangle]
pub unsafe extern "C" fn dcopt_dqm_solve(
    problem: *const DcoptProblem,
    c: f64,
    max_iters: usize,
    x_out: *mut f64,
    x_len: usize,
    stats: *mut DcoptRunStats,
) -> DcoptStatus {
    guard(|| {
        let pen = &handle(problem, "problem")?.0;
        let x_out = slice_mut(x_out, x_len, "x_out")?;
        let mut solver = AdmmSolver::new(pen.topology(), pen.locals(), AdmmConfig::dqm(c))?;
        let mut net = Network::new(pen.topology());
        for _ in 0..max_iters {
            solver.step(&mut net)?;
        }
        finish(&solver, &net, max_iters, f64::NAN, x_out, stats)
    })
}

/// Checks every splitting bound at the point `y` for order `k`. Writes 1 to
/// `passed` when all hold and 0 otherwise; a failed bound also returns
/// [`DcoptStatus::CertificationFailed`] with the failing checks in the error
/// message.
///
/// # Safety
/// `problem` must be live, `y` readable for `y_len` values and `passed`
/// writable or null.
#[no_mangle]
pub unsafe extern "C" fn dcopt_certify(
    problem: *const DcoptProblem,
    y: *const f64,
    y_len: usize,
    k: usize,
    passed: *mut i32,
) -> DcoptStatus {
    guard(|| {
        let pen = &handle(problem, "problem")?.0;
        let y = Vector::from_row_slice(slice(y, y_len, "y")?);
        let report = certify_splitting(pen, &y, k)?;
        if let Some(flag) = passed.as_mut() {
            *flag = i32::from(report.pass());
        }
        if report.pass() {
            return Ok(());
        }
        let names: Vec<String> = report.failures().iter().map(|c| format!("{c:?}")).collect();
        Err(Fail(DcoptStatus::CertificationFailed, format!("bounds violated: {}", names.join("; "))))
    })
}

/// Status code name as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn dcopt_status_name(status: DcoptStatus) -> *const c_char {
    let name: &'static str = match status {
        DcoptStatus::Ok => "ok\0",
        DcoptStatus::NullPointer => "null pointer\0",
        DcoptStatus::InvalidArgument => "invalid argument\0",
        DcoptStatus::DimensionMismatch => "dimension mismatch\0",
        DcoptStatus::WeightBounds => "weight bounds\0",
        DcoptStatus::NotStronglyConvex => "not strongly convex\0",
        DcoptStatus::NumericalFailure => "numerical failure\0",
        DcoptStatus::CertificationFailed => "certification failed\0",
        DcoptStatus::Panic => "panic\0",
    };
    name.as_ptr().cast()
}
