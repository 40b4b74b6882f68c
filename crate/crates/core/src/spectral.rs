//! Numerical certification of the splitting bounds and the rate constants.
//!
//! Every measured quantity is an eigenvalue extreme of an explicitly
//! assembled dense matrix; every check is one-sided with slack
//! `1e-8·max(‖M‖, 1)`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::harness::TraceRecord;
use crate::linalg::{self, Matrix, SymEig, Vector};
use crate::netnewton::assemble_splitting;
use crate::objective::{centralized_reference, CurvatureConstants, PenaltyObjective};
use crate::topology::WeightBounds;

/// Dense certification refuses problems with `n·p` above this.
pub const DENSE_CAP: usize = 500;

const SLACK: f64 = 1e-8;

/// Closed-form bounds for a given `(α, K)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SplitConstants {
    pub alpha: f64,
    pub k: usize,
    /// `2(1−δ)/(2(1−δ)+αm)`.
    pub rho: f64,
    /// `2(1−δ)/(2(1−δ)+α)`; agrees with `rho` only when `m = 1`.
    pub rho_alpha_only: f64,
    pub rho_k1: f64,
    /// `1/(2(1−δ)+αM)`.
    pub lambda: f64,
    /// `(1−ρ^{K+1})/((1−ρ)(2(1−Δ)+αm))`.
    #[serde(rename = "Lambda")]
    pub lambda_upper: f64,
    pub h_low: f64,
    pub h_high: f64,
    pub d_low: f64,
    pub d_high: f64,
    pub b_high: f64,
}

impl SplitConstants {
    pub fn new(consts: &CurvatureConstants, bounds: &WeightBounds, alpha: f64, k: usize) -> Self {
        let two_off = 2.0 * (1.0 - bounds.delta);
        let d_low = 2.0 * (1.0 - bounds.delta_upper) + alpha * consts.m;
        let d_high = two_off + alpha * consts.m_upper;
        let rho = two_off / (two_off + alpha * consts.m);
        let rho_k1 = rho.powi(k as i32 + 1);
        // Sum of the geometric series; exact (K+1) when rho rounds to 1.
        let series = if rho < 1.0 { (1.0 - rho_k1) / (1.0 - rho) } else { (k + 1) as f64 };
        Self {
            alpha,
            k,
            rho,
            rho_alpha_only: two_off / (two_off + alpha),
            rho_k1,
            lambda: 1.0 / d_high,
            lambda_upper: series / d_low,
            h_low: alpha * consts.m,
            h_high: d_high,
            d_low,
            d_high,
            b_high: two_off,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundCheck {
    pub name: String,
    pub theoretical: f64,
    pub measured: f64,
    pub slack: f64,
    pub pass: bool,
}

impl BoundCheck {
    fn upper(name: &str, theoretical: f64, measured: f64, scale: f64) -> Self {
        let slack = SLACK * scale.max(1.0);
        Self {
            name: name.to_string(),
            theoretical,
            measured,
            slack,
            pass: measured <= theoretical + slack,
        }
    }

    fn lower(name: &str, theoretical: f64, measured: f64, scale: f64) -> Self {
        let slack = SLACK * scale.max(1.0);
        Self {
            name: name.to_string(),
            theoretical,
            measured,
            slack,
            pass: measured >= theoretical - slack,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Extremes {
    pub matrix: String,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralReport {
    pub dim: usize,
    pub constants: SplitConstants,
    pub extremes: Vec<Extremes>,
    pub checks: Vec<BoundCheck>,
}

impl SpectralReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> Vec<&BoundCheck> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }

    pub fn extremes_of(&self, matrix: &str) -> Option<&Extremes> {
        self.extremes.iter().find(|e| e.matrix == matrix)
    }
}

/// Matrices assembled by [`certify_splitting`], exposed for tests.
#[derive(Debug, Clone)]
pub struct SplittingMatrices {
    pub h: Matrix,
    pub d: Matrix,
    pub b: Matrix,
    pub s: Matrix,
    pub h_inv_approx: Matrix,
    pub error: Matrix,
}

/// `Ĥ⁻¹ = D^{-1/2}(Σ_{k=0}^{K} S^k)D^{-1/2}` and `E = I − Ĥ^{-1/2}·H·Ĥ^{-1/2}`
/// (with `Ĥ^{-1/2}` the PD square root of `Ĥ⁻¹`).
pub fn splitting_matrices(pen: &PenaltyObjective, y: &Vector, k: usize) -> Result<SplittingMatrices> {
    let dim = pen.dim();
    if dim > DENSE_CAP {
        return Err(Error::TooLarge { dim, cap: DENSE_CAP });
    }
    let h = pen.hessian(y)?;
    let (d, b) = assemble_splitting(pen, y)?;
    let d_is = linalg::inv_sqrt_pd(&d, "D")?;
    let s = linalg::symmetrize(&(&d_is * &b * &d_is));
    let mut sum = Matrix::identity(dim, dim);
    let mut power = Matrix::identity(dim, dim);
    for _ in 0..k {
        power = &power * &s;
        sum += &power;
    }
    let h_inv_approx = linalg::symmetrize(&(&d_is * sum * &d_is));
    let root = linalg::sqrt_psd(&h_inv_approx);
    let error = linalg::symmetrize(&(Matrix::identity(dim, dim) - &root * &h * &root));
    Ok(SplittingMatrices {
        h,
        d,
        b,
        s,
        h_inv_approx,
        error,
    })
}

/// Checks the eigenvalue bounds on `H`, `D`, `B`, `S`, `Ĥ⁻¹` and `E` at `y`.
pub fn certify_splitting(pen: &PenaltyObjective, y: &Vector, k: usize) -> Result<SpectralReport> {
    let bounds = pen.weights().check_bounds()?;
    let consts = pen.constants()?;
    let c = SplitConstants::new(&consts, &bounds, pen.alpha(), k);
    let mats = splitting_matrices(pen, y, k)?;

    let mut extremes = Vec::new();
    let mut checks = Vec::new();
    let mut certify = |name: &str, m: &Matrix, low: f64, high: f64| {
        let eig = SymEig::new(m);
        let scale = eig.min().abs().max(eig.max().abs());
        checks.push(BoundCheck::lower(&format!("{name} lower"), low, eig.min(), scale));
        checks.push(BoundCheck::upper(&format!("{name} upper"), high, eig.max(), scale));
        extremes.push(Extremes {
            matrix: name.to_string(),
            min: eig.min(),
            max: eig.max(),
        });
    };
    certify("H", &mats.h, c.h_low, c.h_high);
    certify("D", &mats.d, c.d_low, c.d_high);
    certify("B", &mats.b, 0.0, c.b_high);
    certify("S", &mats.s, 0.0, c.rho);
    certify("H_inv_approx", &mats.h_inv_approx, c.lambda, c.lambda_upper);
    certify("E", &mats.error, 0.0, c.rho_k1);
    Ok(SpectralReport {
        dim: pen.dim(),
        constants: c,
        extremes,
        checks,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateConstants {
    pub zeta: f64,
    #[serde(rename = "Gamma1")]
    pub gamma1: f64,
    #[serde(rename = "Gamma2")]
    pub gamma2: f64,
    pub eps: f64,
    /// `0 < ζ < 1`; false means the stepsize rule is not satisfied.
    pub zeta_valid: bool,
}

/// `ζ = (2−ε)εαmλ − αε³LΛ³√F0/(6λ^{3/2})`,
/// `Γ₁ = (αεLΛ)^{1/2} F0^{1/4} / (λ^{3/4}(2(1−Δ)+αm))`,
/// `Γ₂ = αLΛ² / (2λ(2(1−Δ)+αm)^{1/2})`.
pub fn rate_constants(
    consts: &CurvatureConstants,
    pen: &PenaltyObjective,
    lambda: f64,
    lambda_upper: f64,
    eps: f64,
    f0_gap: f64,
) -> Result<RateConstants> {
    let delta_upper = pen.weights().delta_upper();
    rate_constants_raw(consts, pen.alpha(), delta_upper, lambda, lambda_upper, eps, f0_gap)
}

pub fn rate_constants_raw(
    consts: &CurvatureConstants,
    alpha: f64,
    delta_upper: f64,
    lambda: f64,
    lambda_upper: f64,
    eps: f64,
    f0_gap: f64,
) -> Result<RateConstants> {
    if f0_gap < 0.0 {
        return Err(Error::InvalidArgument(format!("negative initial gap {f0_gap:e}")));
    }
    let (m, l) = (consts.m, consts.lipschitz);
    let d_low = 2.0 * (1.0 - delta_upper) + alpha * m;
    let zeta = (2.0 - eps) * eps * alpha * m * lambda
        - alpha * eps.powi(3) * l * lambda_upper.powi(3) * f0_gap.sqrt() / (6.0 * lambda.powf(1.5));
    let gamma1 = (alpha * eps * l * lambda_upper).sqrt() * f0_gap.powf(0.25) / (lambda.powf(0.75) * d_low);
    let gamma2 = alpha * l * lambda_upper.powi(2) / (2.0 * lambda * d_low.sqrt());
    Ok(RateConstants {
        zeta,
        gamma1,
        gamma2,
        eps,
        zeta_valid: zeta > 0.0 && zeta < 1.0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeCheck {
    pub pass: bool,
    pub zeta: f64,
    /// Iteration with the largest `gap_t / envelope_t`.
    pub worst_t: usize,
    pub worst_ratio: f64,
    pub iterations: usize,
}

/// `F(y_t) − F* ≤ (1−ζ)^t (F(y₀) − F*)·(1 + 1e-9)` for every record.
pub fn check_linear_envelope(records: &[TraceRecord], zeta: f64, f_star: f64) -> EnvelopeCheck {
    let gap0 = records.first().map(|r| r.objective - f_star).unwrap_or(0.0);
    let mut worst = (0, 0.0f64);
    let mut pass = true;
    for r in records {
        let gap = r.objective - f_star;
        let env = (1.0 - zeta).powi(r.t as i32) * gap0;
        if gap > env * (1.0 + 1e-9) {
            pass = false;
        }
        let ratio = if env > 0.0 { gap / env } else if gap > 0.0 { f64::INFINITY } else { 0.0 };
        if ratio > worst.1 {
            worst = (r.t, ratio);
        }
    }
    EnvelopeCheck {
        pass,
        zeta,
        worst_t: worst.0,
        worst_ratio: worst.1,
        iterations: records.len().saturating_sub(1),
    }
}

/// Per-step check of `‖D^{-1/2}g_{t+1}‖ ≤ ρ^{K+1}‖D^{-1/2}g_t‖` (fixed `D`,
/// unit stepsize). Steps where `‖D^{-1/2}g_t‖ < floor` are at rounding level
/// and skipped.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContractionCheck {
    pub pass: bool,
    pub bound: f64,
    pub worst_ratio: f64,
    pub checked: usize,
    pub skipped: usize,
}

pub fn check_contraction(records: &[TraceRecord], rho_k1: f64, floor: f64) -> ContractionCheck {
    let norms: Vec<Option<f64>> = records.iter().map(|r| r.weighted_grad_norm_prev_d).collect();
    let mut out = ContractionCheck {
        pass: true,
        bound: rho_k1,
        worst_ratio: 0.0,
        checked: 0,
        skipped: 0,
    };
    for w in norms.windows(2) {
        let (Some(a), Some(b)) = (w[0], w[1]) else {
            out.skipped += 1;
            continue;
        };
        if a < floor {
            out.skipped += 1;
            continue;
        }
        let ratio = b / a;
        out.checked += 1;
        out.worst_ratio = out.worst_ratio.max(ratio);
        if ratio > rho_k1 + 1e-10 {
            out.pass = false;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecursionStep {
    pub t: usize,
    pub eta: f64,
    /// `‖D_{t−1}^{-1/2} g_t‖`.
    pub current: f64,
    /// `‖D_t^{-1/2} g_{t+1}‖`.
    pub next: f64,
    pub recursion_bound: f64,
    pub recursion_ok: bool,
    pub interval: Option<(f64, f64)>,
    pub quadratic_phase: bool,
    pub quadratic_bound: Option<f64>,
    pub quadratic_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecursionReport {
    pub steps: Vec<RecursionStep>,
    /// First `t` with `η_t < 1`.
    pub t0: Option<usize>,
    pub flagged: usize,
    pub pass: bool,
    /// Set when `Γ₂ = 0`; the interval is undefined and the contraction
    /// check applies instead.
    pub note: Option<String>,
}

/// Inputs of the two-phase recursion check.
#[derive(Debug, Clone, Copy)]
pub struct RecursionParams {
    pub eps: f64,
    pub zeta: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub rho: f64,
    pub k: usize,
    /// Additive slack on both inequalities.
    pub slack: f64,
    /// Steps with `‖D_{t−1}^{-1/2} g_t‖` below this are at rounding level
    /// and skipped.
    pub floor: f64,
}

/// Rounding level of the weighted gradient norm near `y*`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RoundingLevel {
    /// `1e3·eps_mach·(α‖∇f(y*)‖ + ‖y*‖)/√(2(1−Δ)+αm)`.
    pub slack: f64,
    /// `10·slack + 10‖∇F(y*)‖/√(2(1−Δ)+αm)`.
    pub floor: f64,
}

pub fn rounding_level(pen: &PenaltyObjective, y_star: &Vector, d_low: f64) -> Result<RoundingLevel> {
    let residual = pen.gradient(y_star)?.norm();
    let scale = pen.alpha() * pen.local_gradients(y_star).norm() + y_star.norm();
    let slack = 1e3 * f64::EPSILON * scale / d_low.sqrt();
    Ok(RoundingLevel {
        slack,
        floor: 10.0 * slack + 10.0 * residual / d_low.sqrt(),
    })
}

/// `η_t = (1−ε+ερ^{K+1})(1+Γ₁(1−ζ)^{(t−1)/4})`.
pub fn eta(p: &RecursionParams, t: usize) -> f64 {
    let lead = 1.0 - p.eps + p.eps * p.rho.powi(p.k as i32 + 1);
    lead * (1.0 + p.gamma1 * (1.0 - p.zeta).powf((t as f64 - 1.0) / 4.0))
}

/// Checks, for `t ≥ 1`,
/// `‖D_t^{-1/2}g_{t+1}‖ ≤ η_t‖D_{t−1}^{-1/2}g_t‖ + ε²Γ₂‖D_{t−1}^{-1/2}g_t‖²`,
/// and on iterations `t ≥ t₀` inside
/// `[√η_t(1−√η_t), 1−√η_t)/(ε²Γ₂)` the quadratic bound
/// `‖D_t^{-1/2}g_{t+1}‖ ≤ ε²Γ₂/(1−√η_t)·‖D_{t−1}^{-1/2}g_t‖²`.
pub fn check_two_phase_recursion(records: &[TraceRecord], p: &RecursionParams) -> RecursionReport {
    let horizon = records.len().max(1);
    let t0 = (1..horizon + 10_000).find(|&t| eta(p, t) < 1.0);
    let quad = p.eps * p.eps * p.gamma2;
    let mut steps = Vec::new();
    for w in records.windows(2) {
        let t = w[0].t;
        if t == 0 {
            continue;
        }
        let (Some(a), Some(b)) = (w[0].weighted_grad_norm_prev_d, w[1].weighted_grad_norm_prev_d) else {
            continue;
        };
        if a < p.floor {
            continue;
        }
        let e = eta(p, t);
        let recursion_bound = e * a + quad * a * a;
        let recursion_ok = b <= recursion_bound + p.slack;
        let interval = (quad > 0.0 && e < 1.0).then(|| {
            let r = e.sqrt();
            (r * (1.0 - r) / quad, (1.0 - r) / quad)
        });
        let in_phase = t0.is_some_and(|t0| t >= t0) && interval.is_some_and(|(lo, hi)| lo <= a && a < hi);
        let quadratic_bound = in_phase.then(|| quad / (1.0 - e.sqrt()) * a * a);
        let quadratic_ok = quadratic_bound.is_none_or(|qb| b <= qb + p.slack);
        steps.push(RecursionStep {
            t,
            eta: e,
            current: a,
            next: b,
            recursion_bound,
            recursion_ok,
            interval,
            quadratic_phase: in_phase,
            quadratic_bound,
            quadratic_ok,
        });
    }
    let flagged = steps.iter().filter(|s| s.quadratic_phase).count();
    let pass = steps.iter().all(|s| s.recursion_ok && s.quadratic_ok);
    RecursionReport {
        steps,
        t0,
        flagged,
        pass,
        note: (p.gamma2 == 0.0)
            .then(|| "quadratic phase vacuous; the contraction check applies instead".to_string()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlphaGapRow {
    pub alpha: f64,
    pub gap: f64,
    /// `gap·(1−ρ_W)/α`.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlphaGapStudy {
    pub rho_w: f64,
    pub rows: Vec<AlphaGapRow>,
    /// max/min of `ratio` over the smaller half of the grid.
    pub spread: f64,
    pub bounded: bool,
}

/// `‖y*(α) − ỹ*‖` over a grid of penalties, with `ỹ*` the stacked
/// consensus optimum.
pub fn alpha_gap_study(pen: &PenaltyObjective, alphas: &[f64], tol: f64) -> Result<AlphaGapStudy> {
    if alphas.is_empty() {
        return Err(Error::InvalidArgument("alpha grid is empty".into()));
    }
    if let Some(a) = alphas.iter().find(|a| !(**a > 0.0)) {
        return Err(Error::InvalidArgument(format!("alpha must be positive, got {a}")));
    }
    let rho_w = pen.weights().check_bounds()?.rho_w;
    let mut rows = Vec::with_capacity(alphas.len());
    let mut target = None;
    for &alpha in alphas {
        let r = centralized_reference(&pen.with_alpha(alpha), tol)?;
        let stacked = target.get_or_insert_with(|| r.consensus_stack(pen.n()));
        let gap = (&r.y_star - &*stacked).norm();
        rows.push(AlphaGapRow {
            alpha,
            gap,
            ratio: gap * (1.0 - rho_w) / alpha,
        });
    }
    let mut sorted: Vec<&AlphaGapRow> = rows.iter().collect();
    sorted.sort_by(|a, b| a.alpha.total_cmp(&b.alpha));
    let half = &sorted[..sorted.len().div_ceil(2).max(1)];
    let spread = ratio_spread(half.iter().copied());
    Ok(AlphaGapStudy {
        rho_w,
        rows,
        spread,
        bounded: spread <= 10.0,
    })
}

/// max/min of the gap ratios.
pub fn ratio_spread<'a>(rows: impl IntoIterator<Item = &'a AlphaGapRow>) -> f64 {
    let (lo, hi) = rows
        .into_iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), r| (lo.min(r.ratio), hi.max(r.ratio)));
    if lo > 0.0 {
        hi / lo
    } else if hi == 0.0 {
        1.0
    } else {
        f64::INFINITY
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances;
    use approx::assert_abs_diff_eq;

    fn p2_consts() -> CurvatureConstants {
        CurvatureConstants {
            m: 1.0,
            m_upper: 1.0,
            lipschitz: 0.0,
        }
    }

    #[test]
    fn p2_k0_error_matrix() {
        let pen = instances::p2(1.0);
        let mats = splitting_matrices(&pen, &Vector::zeros(2), 0).unwrap();
        let expected = Matrix::from_element(2, 2, 0.25);
        assert_abs_diff_eq!(mats.error, expected, epsilon = 1e-12);
        let s = linalg::eigenvalues(&mats.s);
        assert_abs_diff_eq!(s[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s[1], 0.5, epsilon = 1e-12);
        let rep = certify_splitting(&pen, &Vector::zeros(2), 0).unwrap();
        assert!(rep.pass(), "{:?}", rep.failures());
        assert_abs_diff_eq!(rep.constants.rho, 0.5, epsilon = 1e-15);
        let e = rep.extremes_of("E").unwrap();
        assert_abs_diff_eq!(e.max, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn p2_k1_inverse_and_error() {
        let pen = instances::p2(1.0);
        let rep = certify_splitting(&pen, &Vector::zeros(2), 1).unwrap();
        assert!(rep.pass());
        let hi = rep.extremes_of("H_inv_approx").unwrap();
        assert_abs_diff_eq!(hi.min, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(hi.max, 0.75, epsilon = 1e-12);
        assert_abs_diff_eq!(rep.constants.lambda, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(rep.constants.lambda_upper, 0.75, epsilon = 1e-15);
        let e = rep.extremes_of("E").unwrap();
        assert_abs_diff_eq!(e.min, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e.max, 0.25, epsilon = 1e-12);
    }

    #[test]
    fn p2_k9_error_norm() {
        let pen = instances::p2(1.0);
        let mats = splitting_matrices(&pen, &Vector::zeros(2), 9).unwrap();
        let norm = linalg::sym_norm(&mats.error);
        assert!(norm <= 0.5f64.powi(10) + 1e-12);
        assert!(norm <= 9.77e-4);
    }

    #[test]
    fn dense_cap_enforced() {
        let spec = instances::QuadraticSpec {
            n: 3,
            p: 200,
            ..Default::default()
        };
        let pen = instances::random_quadratic(1, spec);
        let err = certify_splitting(&pen, &Vector::zeros(pen.dim()), 0).unwrap_err();
        assert!(matches!(err, Error::TooLarge { dim: 600, cap: 500 }));
    }

    #[test]
    fn rate_constant_examples() {
        let pen = instances::p2(1.0);
        let r = rate_constants(&p2_consts(), &pen, 0.5, 0.75, 1.0, 1.5).unwrap();
        assert_abs_diff_eq!(r.zeta, 0.5, epsilon = 1e-15);
        assert_eq!((r.gamma1, r.gamma2), (0.0, 0.0));
        let none = rate_constants(&p2_consts(), &pen, 0.5, 0.75, 0.0, 1.5).unwrap();
        assert_eq!(none.zeta, 0.0);
        assert!(!none.zeta_valid);
        let consts = CurvatureConstants {
            lipschitz: 1.0,
            ..p2_consts()
        };
        let r = rate_constants_raw(&consts, 1.0, 0.5, 0.5, 0.75, 0.5, 1.0).unwrap();
        let oracle = 1.5 * 0.5 * 0.5 - 0.125 * 0.421_875 / (6.0 * 0.5f64.powf(1.5));
        assert_abs_diff_eq!(r.zeta, oracle, epsilon = 1e-15);
        assert_abs_diff_eq!(r.zeta, 0.3501, epsilon = 1e-4);
    }

    fn rec(t: usize, f: f64, w: f64) -> TraceRecord {
        TraceRecord {
            t,
            alpha: None,
            objective: f,
            f_gap: None,
            grad_norm: None,
            weighted_grad_norm_prev_d: Some(w),
            weighted_grad_norm_cur_d: Some(w),
            rel_err: None,
            msgs_cum: 0,
        }
    }

    #[test]
    fn envelope_on_hand_iterates() {
        // F* = 0.5; F(y0) = 2, F(y1) = 0.75.
        let recs = [rec(0, 2.0, 2f64.sqrt()), rec(1, 0.75, 0.5)];
        let c = check_linear_envelope(&recs, 0.5, 0.5);
        assert!(c.pass);
        let bad = check_linear_envelope(&[rec(0, 2.0, 1.0), rec(1, 1.3, 1.0)], 0.5, 0.5);
        assert!(!bad.pass);
        assert_eq!(bad.worst_t, 1);
    }

    #[test]
    fn contraction_on_hand_norms() {
        let recs = [rec(0, 2.0, 2f64.sqrt()), rec(1, 0.75, 0.5)];
        let c = check_contraction(&recs, 0.5, 0.0);
        assert!(c.pass && c.checked == 1);
        assert!(!check_contraction(&recs, 0.3, 0.0).pass);
    }

    #[test]
    fn eta_is_decreasing_and_vacuous_note() {
        let p = RecursionParams {
            eps: 1.0,
            zeta: 0.1,
            gamma1: 2.0,
            gamma2: 0.0,
            rho: 0.5,
            k: 0,
            slack: 0.0,
            floor: 0.0,
        };
        assert!((1..50).all(|t| eta(&p, t + 1) < eta(&p, t)));
        let recs: Vec<_> = (0..5).map(|t| rec(t, 1.0, 0.5f64.powi(t as i32))).collect();
        let rep = check_two_phase_recursion(&recs, &p);
        assert!(rep.note.is_some());
        assert_eq!(rep.flagged, 0);
        assert!(rep.pass);
        assert_eq!(rep.t0, Some(28));
    }

    #[test]
    fn no_flags_before_t0() {
        let p = RecursionParams {
            eps: 1.0,
            zeta: 0.01,
            gamma1: 10.0,
            gamma2: 1.0,
            rho: 0.5,
            k: 0,
            slack: 0.0,
            floor: 0.0,
        };
        let recs: Vec<_> = (0..20).map(|t| rec(t, 1.0, 0.01)).collect();
        let rep = check_two_phase_recursion(&recs, &p);
        let t0 = rep.t0.unwrap();
        assert!(rep.steps.iter().filter(|s| s.t < t0).all(|s| !s.quadratic_phase));
    }

    #[test]
    fn p2_alpha_gaps() {
        let pen = instances::p2(1.0);
        let study = alpha_gap_study(&pen, &[1.0, 0.1], 1e-10).unwrap();
        assert_abs_diff_eq!(study.rows[0].gap, 0.5f64.sqrt(), epsilon = 1e-9);
        // Solves ((1+α)I − W)y = αc.
        let y = Vector::from_vec(vec![1.0 / 1.1, 1.2 / 1.1]);
        let gap = (y - Vector::from_element(2, 1.0)).norm();
        assert_abs_diff_eq!(study.rows[1].gap, gap, epsilon = 1e-9);
        assert_abs_diff_eq!(study.rows[1].gap, 0.1286, epsilon = 1e-4);
        assert!(alpha_gap_study(&pen, &[], 1e-10).is_err());
        assert!(alpha_gap_study(&pen, &[1.0, 0.0], 1e-10).is_err());
    }
}
