//! Edge-constrained ADMM family: exact DADMM, linearized DLM and
//! quadratically approximated DQM, in the reduced `(x, φ)` form, plus the
//! energy-function contraction diagnostics.
//!
//! Multipliers `α` (one block per directed edge, with `β = −α` implicit)
//! and the auxiliary `z = ½E_u x` are tracked per edge at the source node
//! so the invariants can be audited against a dense reconstruction.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::harness::{Network, Observation, Solver};
use crate::linalg::{self, Matrix, Vector};
use crate::objective::{damped_newton, damped_newton_from, CurvatureConstants, LocalKind, LocalObjective};
use crate::topology::{IncidenceSet, Topology};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum AdmmVariant {
    Dadmm { inner_tol: f64 },
    Dlm { rho_lin: f64 },
    Dqm,
}

impl AdmmVariant {
    pub fn name(&self) -> &'static str {
        match self {
            AdmmVariant::Dadmm { .. } => "dadmm",
            AdmmVariant::Dlm { .. } => "dlm",
            AdmmVariant::Dqm => "dqm",
        }
    }
}

/// Newton steps allowed per DADMM inner solve.
pub const INNER_MAX_STEPS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdmmConfig {
    pub c: f64,
    pub variant: AdmmVariant,
}

impl AdmmConfig {
    pub fn dadmm(c: f64) -> Self {
        Self {
            c,
            variant: AdmmVariant::Dadmm { inner_tol: 1e-12 },
        }
    }

    pub fn dlm(c: f64, rho_lin: f64) -> Self {
        Self {
            c,
            variant: AdmmVariant::Dlm { rho_lin },
        }
    }

    pub fn dqm(c: f64) -> Self {
        Self {
            c,
            variant: AdmmVariant::Dqm,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0) {
            return Err(Error::InvalidArgument(format!("c must be positive, got {}", self.c)));
        }
        match self.variant {
            AdmmVariant::Dlm { rho_lin } if !(rho_lin > 0.0) => {
                Err(Error::InvalidArgument(format!("rho_lin must be positive, got {rho_lin}")))
            }
            AdmmVariant::Dadmm { inner_tol } if !(inner_tol > 0.0) => {
                Err(Error::InvalidArgument(format!("inner_tol must be positive, got {inner_tol}")))
            }
            _ => Ok(()),
        }
    }
}

/// Iterate of the reduced recursion. `alpha_mult` and `z` are stacked per
/// directed edge in lexicographic order.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmmState {
    pub k: usize,
    pub x: Vec<Vector>,
    pub phi: Vec<Vector>,
    pub alpha_mult: Vector,
    pub z: Vector,
}

impl AdmmState {
    pub fn zeros(n: usize, m: usize, p: usize) -> Self {
        Self {
            k: 0,
            x: vec![Vector::zeros(p); n],
            phi: vec![Vector::zeros(p); n],
            alpha_mult: Vector::zeros(m * p),
            z: Vector::zeros(m * p),
        }
    }

    pub fn x_stacked(&self) -> Vector {
        linalg::stack(&self.x)
    }

    pub fn phi_stacked(&self) -> Vector {
        linalg::stack(&self.phi)
    }
}

/// Residuals of the reduced-form invariants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InvariantResiduals {
    /// `‖φ − E_oᵀα‖`.
    pub phi: f64,
    /// `‖z − ½E_u x‖`.
    pub z: f64,
    /// Distance of `α` from the column space of `E_o`.
    pub col_space: f64,
}

impl InvariantResiduals {
    pub fn max(&self) -> f64 {
        self.phi.max(self.z).max(self.col_space)
    }
}

pub fn invariant_residuals(state: &AdmmState, inc: &IncidenceSet) -> InvariantResiduals {
    let x = state.x_stacked();
    let phi = (state.phi_stacked() - inc.e_o.transpose() * &state.alpha_mult).norm();
    let z = (&state.z - &inc.e_u * &x * 0.5).norm();
    let proj = &inc.e_o * linalg::pinv_psd(&(inc.l_o.clone() * 2.0), 1e-10) * inc.e_o.transpose();
    let col_space = (&state.alpha_mult - proj * &state.alpha_mult).norm();
    InvariantResiduals { phi, z, col_space }
}

/// DADMM x-update at one node: minimizes
/// `f_i(x) + (φ_i − c·(L_u x_k)_i)ᵀx + c·d_i‖x‖²`.
fn dadmm_local(f: &LocalObjective, node: usize, xi: &Vector, lin: &Vector, cd: f64, tol: f64) -> Result<Vector> {
    let p = xi.len();
    if let LocalKind::Quadratic { a, b, .. } = f.kind() {
        let lhs = a + Matrix::identity(p, p) * (2.0 * cd);
        return linalg::solve_spd(&lhs, &(-(b + lin)), "DADMM local system");
    }
    damped_newton_from(
        xi.clone(),
        |x| f.value(x) + lin.dot(x) + cd * x.norm_squared(),
        |x| f.gradient(x) + lin + x * (2.0 * cd),
        |x| f.hessian(x) + Matrix::identity(p, p) * (2.0 * cd),
        tol,
        INNER_MAX_STEPS,
    )
    .map_err(|_| Error::InnerSolver {
        node,
        tol,
        max_steps: INNER_MAX_STEPS,
    })
}

pub struct AdmmSolver {
    locals: Vec<LocalObjective>,
    cfg: AdmmConfig,
    state: AdmmState,
    /// Index of the first out-edge of each node in the lexicographic list.
    edge_start: Vec<usize>,
}

impl AdmmSolver {
    /// Starts from the all-zero state.
    pub fn new(topology: &Topology, locals: &[LocalObjective], cfg: AdmmConfig) -> Result<Self> {
        let p = locals.first().map(|f| f.dim()).unwrap_or(0);
        let state = AdmmState::zeros(topology.n(), topology.m(), p);
        Self::with_state(topology, locals, cfg, state)
    }

    pub fn with_state(topology: &Topology, locals: &[LocalObjective], cfg: AdmmConfig, state: AdmmState) -> Result<Self> {
        cfg.validate()?;
        if locals.len() != topology.n() {
            return Err(Error::Dimension {
                context: "local objectives",
                expected: topology.n(),
                actual: locals.len(),
            });
        }
        let mut edge_start = Vec::with_capacity(topology.n());
        let mut acc = 0;
        for i in 0..topology.n() {
            edge_start.push(acc);
            acc += topology.degree(i);
        }
        Ok(Self {
            locals: locals.to_vec(),
            cfg,
            state,
            edge_start,
        })
    }

    pub fn state(&self) -> &AdmmState {
        &self.state
    }

    pub fn config(&self) -> &AdmmConfig {
        &self.cfg
    }
}

impl Solver for AdmmSolver {
    fn name(&self) -> String {
        self.cfg.variant.name().into()
    }

    fn step(&mut self, net: &mut Network<'_>) -> Result<()> {
        let c = self.cfg.c;
        let variant = self.cfg.variant;
        let locals = &self.locals;
        let phi = &self.state.phi;
        let x_next = net.exchange(&self.state.x, |view| {
            let i = view.id();
            let xi = view.own();
            let di = view.degree() as f64;
            let f = &locals[i];
            let p = xi.len();
            // c·(L_u x_k)_i = c·d_i x_i + c·Σ_j x_j
            let lu = xi * (c * di) + view.neighbor_sum() * c;
            match variant {
                AdmmVariant::Dqm => {
                    let h = f.hessian(xi);
                    let lhs = &h + Matrix::identity(p, p) * (2.0 * c * di);
                    let rhs = lu + &h * xi - f.gradient(xi) - &phi[i];
                    linalg::solve_spd(&lhs, &rhs, "DQM local system")
                }
                AdmmVariant::Dlm { rho_lin } => {
                    let rhs = lu + xi * rho_lin - f.gradient(xi) - &phi[i];
                    Ok(rhs / (2.0 * c * di + rho_lin))
                }
                AdmmVariant::Dadmm { inner_tol } => {
                    let lin = &phi[i] - lu;
                    dadmm_local(f, i, xi, &lin, c * di, inner_tol)
                }
            }
        })?;

        let p = x_next.first().map(|v| v.len()).unwrap_or(0);
        let edge_start = &self.edge_start;
        let alpha = &self.state.alpha_mult;
        let duals = net.exchange(&x_next, |view| {
            let i = view.id();
            let xi = view.own();
            let mut phi_i = phi[i].clone();
            let mut alpha_i = Vec::with_capacity(view.degree());
            let mut z_i = Vec::with_capacity(view.degree());
            for (slot, (_, xj)) in view.received().enumerate() {
                let diff = xi - xj;
                phi_i.axpy(c, &diff, 1.0);
                let e = edge_start[i] + slot;
                alpha_i.push(alpha.rows(e * p, p) + diff * (0.5 * c));
                z_i.push((xi + xj) * 0.5);
            }
            Ok((phi_i, alpha_i, z_i))
        })?;

        let mut alpha_next = Vector::zeros(alpha.len());
        let mut z_next = Vector::zeros(alpha.len());
        let mut phi_next = Vec::with_capacity(duals.len());
        for (i, (phi_i, alpha_i, z_i)) in duals.into_iter().enumerate() {
            for (slot, (a, z)) in alpha_i.into_iter().zip(z_i).enumerate() {
                let e = self.edge_start[i] + slot;
                alpha_next.rows_mut(e * p, p).copy_from(&a);
                z_next.rows_mut(e * p, p).copy_from(&z);
            }
            phi_next.push(phi_i);
        }
        self.state = AdmmState {
            k: self.state.k + 1,
            x: x_next,
            phi: phi_next,
            alpha_mult: alpha_next,
            z: z_next,
        };
        Ok(())
    }

    fn observe(&self) -> Result<Observation> {
        let x = self.state.x_stacked();
        let objective = self
            .state
            .x
            .iter()
            .zip(&self.locals)
            .map(|(xi, f)| f.value(xi))
            .sum();
        Ok(Observation {
            x,
            alpha: None,
            objective,
            grad_norm: None,
            weighted_grad_norm_prev_d: None,
            weighted_grad_norm_cur_d: None,
        })
    }
}

/// Saddle point `(x*, z*, α*)` with `α*` the minimum-norm solution of
/// `E_oᵀα = −∇f(x*)`.
#[derive(Debug, Clone)]
pub struct AdmmReference {
    pub x_tilde_star: Vector,
    pub x_star: Vector,
    pub z_star: Vector,
    pub alpha_star: Vector,
    pub f_star: f64,
}

impl AdmmReference {
    pub fn compute(locals: &[LocalObjective], inc: &IncidenceSet, tol: f64) -> Result<Self> {
        let p = inc.p;
        let x_tilde = damped_newton(
            p,
            |x| locals.iter().map(|f| f.value(x)).sum(),
            |x| locals.iter().fold(Vector::zeros(p), |acc, f| acc + f.gradient(x)),
            |x| locals.iter().fold(Matrix::zeros(p, p), |acc, f| acc + f.hessian(x)),
            tol,
            200,
        )?;
        Ok(Self::at(locals, inc, x_tilde))
    }

    /// Reference built around a given consensus point.
    pub fn at(locals: &[LocalObjective], inc: &IncidenceSet, x_tilde_star: Vector) -> Self {
        let n = locals.len();
        let x_star = linalg::stack(&vec![x_tilde_star.clone(); n]);
        let grads: Vec<Vector> = locals.iter().map(|f| f.gradient(&x_tilde_star)).collect();
        let g = linalg::stack(&grads);
        let z_star = &inc.e_u * &x_star * 0.5;
        let alpha_star = -(&inc.e_o * linalg::pinv_psd(&(inc.l_o.clone() * 2.0), 1e-10) * g);
        let f_star = locals.iter().map(|f| f.value(&x_tilde_star)).sum();
        Self {
            x_tilde_star,
            x_star,
            z_star,
            alpha_star,
            f_star,
        }
    }

    /// Saddle-point state: `x*`, `φ* = E_oᵀα*`, `α*`, `z*`.
    pub fn saddle_state(&self, inc: &IncidenceSet) -> AdmmState {
        AdmmState {
            k: 0,
            x: linalg::unstack(&self.x_star, inc.p),
            phi: linalg::unstack(&(inc.e_o.transpose() * &self.alpha_star), inc.p),
            alpha_mult: self.alpha_star.clone(),
            z: self.z_star.clone(),
        }
    }

    /// `V = c‖z − z*‖² + (1/c)‖α − α*‖²`.
    pub fn energy(&self, state: &AdmmState, c: f64) -> f64 {
        c * (&state.z - &self.z_star).norm_squared() + (&state.alpha_mult - &self.alpha_star).norm_squared() / c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum EtaChoice {
    /// Midpoint of the admissible interval, re-selected every step.
    Midpoint,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContractionParams {
    pub mu: f64,
    pub mu_prime: f64,
    pub eta: EtaChoice,
}

impl Default for ContractionParams {
    fn default() -> Self {
        Self {
            mu: 2.0,
            mu_prime: 2.0,
            eta: EtaChoice::Midpoint,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyReport {
    pub k: usize,
    pub v_prev: f64,
    #[serde(rename = "V")]
    pub v: f64,
    pub zeta: f64,
    /// `c > ζ²/(mγ_u²)`.
    pub hypotheses_hold: bool,
    pub eta: Option<f64>,
    /// Dimensionally consistent coefficient (`c` restored in the
    /// `Γ_u²γ_o⁻²` term); reduces to `limit_delta` at `ζ = 0, μ′ → 1`.
    pub delta: Option<f64>,
    /// The coefficient exactly as printed, for comparison.
    pub delta_as_printed: Option<f64>,
    pub limit_delta: f64,
    pub contraction_ok: Option<bool>,
    /// `‖x − x*‖² ≤ 4V/(cγ_u²)`.
    pub primal_bound: f64,
    pub primal_err_sq: f64,
    pub primal_ok: bool,
}

/// Incidence spectra used by the coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IncidenceSpectra {
    pub gamma_u: f64,
    pub gamma_u_max: f64,
    pub gamma_o: f64,
}

impl IncidenceSpectra {
    pub fn of(inc: &IncidenceSet) -> Result<Self> {
        if inc.gamma_u == 0.0 {
            return Err(Error::Bipartite);
        }
        Ok(Self {
            gamma_u: inc.gamma_u,
            gamma_u_max: inc.gamma_u_max,
            gamma_o: inc.gamma_o,
        })
    }
}

/// `min{(μ−1)γ_o²/(μΓ_u²), m/(cΓ_u²/4 + μM²/(cγ_o²))}`.
pub fn limit_delta(spec: &IncidenceSpectra, consts: &CurvatureConstants, c: f64, mu: f64) -> f64 {
    let (gu_max, go) = (spec.gamma_u_max, spec.gamma_o);
    let first = (mu - 1.0) * go * go / (mu * gu_max * gu_max);
    let second = consts.m / (c * gu_max * gu_max / 4.0 + mu * consts.m_upper.powi(2) / (c * go * go));
    first.min(second)
}

/// `(corrected, as printed)` per-step coefficient; `eta` may be `None`
/// only when `ζ = 0`.
pub fn delta_k(
    spec: &IncidenceSpectra,
    consts: &CurvatureConstants,
    c: f64,
    zeta: f64,
    eta: Option<f64>,
    mu: f64,
    mu_prime: f64,
) -> (f64, f64) {
    let (gu, gu_max, go) = (spec.gamma_u, spec.gamma_u_max, spec.gamma_o);
    let (eta_zeta, zeta_over_eta) = match eta {
        Some(e) => (e * zeta, zeta / e),
        None => (0.0, 0.0),
    };
    let num1 = c - eta_zeta / (gu * gu);
    let den_a = 4.0 * mu_prime * mu * zeta * zeta / (c * (mu_prime - 1.0) * (mu - 1.0)) / (gu * gu * go * go);
    let den_b = mu_prime * mu / (mu - 1.0) * gu_max * gu_max / (go * go);
    let second = (consts.m - zeta_over_eta)
        / (c * gu_max * gu_max / 4.0 + mu * consts.m_upper.powi(2) / (c * go * go));
    let corrected = (num1 / (den_a + c * den_b)).min(second);
    let printed = (num1 / (den_a + den_b)).min(second);
    (corrected, printed)
}

/// Diagnostics for one step `prev → next`.
pub fn energy_report(
    prev: &AdmmState,
    next: &AdmmState,
    reference: &AdmmReference,
    inc: &IncidenceSet,
    consts: &CurvatureConstants,
    c: f64,
    params: &ContractionParams,
) -> Result<EnergyReport> {
    let spec = IncidenceSpectra::of(inc)?;
    if !(params.mu > 1.0 && params.mu_prime > 1.0) {
        return Err(Error::InvalidArgument("mu and mu_prime must exceed 1".into()));
    }
    let step = (next.x_stacked() - prev.x_stacked()).norm();
    let zeta = (consts.lipschitz / 2.0 * step).min(2.0 * consts.m_upper);
    let gu2 = spec.gamma_u * spec.gamma_u;
    let hypotheses_hold = c > zeta * zeta / (consts.m * gu2);
    let v_prev = reference.energy(prev, c);
    let v = reference.energy(next, c);

    let eta = if zeta == 0.0 || !hypotheses_hold {
        if let EtaChoice::Fixed(e) = params.eta {
            if !(e > 0.0) {
                return Err(Error::EtaOutOfRange {
                    eta: e,
                    low: 0.0,
                    high: f64::INFINITY,
                });
            }
        }
        None
    } else {
        let (low, high) = (zeta / consts.m, c * gu2 / zeta);
        let e = match params.eta {
            EtaChoice::Midpoint => 0.5 * (low + high),
            EtaChoice::Fixed(e) => e,
        };
        if !(e > low && e < high) {
            return Err(Error::EtaOutOfRange { eta: e, low, high });
        }
        Some(e)
    };

    let (delta, delta_as_printed) = if hypotheses_hold {
        let (d, p) = delta_k(&spec, consts, c, zeta, eta, params.mu, params.mu_prime);
        (Some(d), Some(p))
    } else {
        (None, None)
    };
    let contraction_ok = delta.map(|d| v * (1.0 + d) <= v_prev + 1e-9);
    let primal_bound = 4.0 * v / (c * gu2);
    let primal_err_sq = (next.x_stacked() - &reference.x_star).norm_squared();
    Ok(EnergyReport {
        k: prev.k,
        v_prev,
        v,
        zeta,
        hypotheses_hold,
        eta,
        delta,
        delta_as_printed,
        limit_delta: limit_delta(&spec, consts, c, params.mu),
        contraction_ok,
        primal_bound,
        primal_err_sq,
        primal_ok: primal_err_sq <= primal_bound + 1e-9,
    })
}
