//! Local objectives, their curvature constants, and the penalized consensus
//! objective `F(y) = ½ yᵀ(I − Z)y + α Σ f_i(y_i)`.

use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, SymEig, Vector};
use crate::topology::{Topology, WeightMatrix};

/// Uniform bound on |σ''| for the logistic sigmoid, 1/(6√3).
const SIGMOID_SECOND_DERIVATIVE_MAX: f64 = 0.096_225_044_864_937_63;

#[derive(Debug, Clone)]
pub enum LocalKind {
    /// `½ xᵀA x + bᵀx + offset`.
    Quadratic { a: Matrix, b: Vector, offset: f64 },
    /// `Σ_l log(1 + exp(−y_l s_lᵀx)) + ½ reg ‖x‖²`.
    Logistic {
        samples: Vec<Vector>,
        labels: Vec<f64>,
        reg: f64,
    },
}

#[derive(Debug, Clone)]
pub struct LocalObjective {
    p: usize,
    kind: LocalKind,
}

/// Value, gradient and Hessian of a local objective at one point.
#[derive(Debug, Clone)]
pub struct LocalEval {
    pub value: f64,
    pub gradient: Vector,
    pub hessian: Matrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvatureConstants {
    /// Strong convexity lower bound.
    pub m: f64,
    /// Hessian upper bound.
    #[serde(rename = "M")]
    pub m_upper: f64,
    /// Hessian Lipschitz constant.
    #[serde(rename = "L")]
    pub lipschitz: f64,
}

impl CurvatureConstants {
    /// Network-wide constants: smallest m, largest M and L.
    pub fn aggregate(locals: &[LocalObjective]) -> Result<Self> {
        let mut out = Self {
            m: f64::INFINITY,
            m_upper: 0.0,
            lipschitz: 0.0,
        };
        for f in locals {
            let c = f.curvature_constants()?;
            out.m = out.m.min(c.m);
            out.m_upper = out.m_upper.max(c.m_upper);
            out.lipschitz = out.lipschitz.max(c.lipschitz);
        }
        Ok(out)
    }
}

fn log1p_exp(u: f64) -> f64 {
    if u > 0.0 {
        u + (-u).exp().ln_1p()
    } else {
        u.exp().ln_1p()
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

impl LocalObjective {
    pub fn quadratic(a: Matrix, b: Vector) -> Result<Self> {
        Self::quadratic_with_offset(a, b, 0.0)
    }

    pub fn quadratic_with_offset(a: Matrix, b: Vector, offset: f64) -> Result<Self> {
        let p = b.len();
        if a.nrows() != p || a.ncols() != p {
            return Err(Error::Dimension {
                context: "quadratic Hessian",
                expected: p,
                actual: a.nrows(),
            });
        }
        if (&a - a.transpose()).amax() > 1e-12 * a.amax().max(1.0) {
            return Err(Error::InvalidArgument("quadratic Hessian must be symmetric".into()));
        }
        Ok(Self {
            p,
            kind: LocalKind::Quadratic {
                a: linalg::symmetrize(&a),
                b,
                offset,
            },
        })
    }

    /// `½ (x − c)ᵀ A (x − c)`.
    pub fn centered_quadratic(a: Matrix, center: &Vector) -> Result<Self> {
        let b = -(&a * center);
        let offset = 0.5 * center.dot(&(&a * center));
        Self::quadratic_with_offset(a, b, offset)
    }

    pub fn logistic(samples: Vec<Vector>, labels: Vec<f64>, reg: f64) -> Result<Self> {
        let p = samples
            .first()
            .map(|s| s.len())
            .ok_or_else(|| Error::InvalidArgument("logistic objective needs at least one sample".into()))?;
        if samples.len() != labels.len() {
            return Err(Error::Dimension {
                context: "logistic labels",
                expected: samples.len(),
                actual: labels.len(),
            });
        }
        if let Some(s) = samples.iter().find(|s| s.len() != p) {
            return Err(Error::Dimension {
                context: "logistic sample",
                expected: p,
                actual: s.len(),
            });
        }
        if labels.iter().any(|&y| y != 1.0 && y != -1.0) {
            return Err(Error::InvalidArgument("logistic labels must be -1 or +1".into()));
        }
        if !(reg >= 0.0) {
            return Err(Error::InvalidArgument(format!("regularizer must be >= 0, got {reg}")));
        }
        Ok(Self {
            p,
            kind: LocalKind::Logistic { samples, labels, reg },
        })
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn kind(&self) -> &LocalKind {
        &self.kind
    }

    pub fn is_quadratic(&self) -> bool {
        matches!(self.kind, LocalKind::Quadratic { .. })
    }

    fn check_dim(&self, x: &Vector) -> Result<()> {
        if x.len() != self.p {
            return Err(Error::Dimension {
                context: "local objective argument",
                expected: self.p,
                actual: x.len(),
            });
        }
        Ok(())
    }

    pub fn value(&self, x: &Vector) -> f64 {
        match &self.kind {
            LocalKind::Quadratic { a, b, offset } => 0.5 * x.dot(&(a * x)) + b.dot(x) + offset,
            LocalKind::Logistic { samples, labels, reg } => {
                let loss: f64 = samples
                    .iter()
                    .zip(labels)
                    .map(|(s, y)| log1p_exp(-y * s.dot(x)))
                    .sum();
                loss + 0.5 * reg * x.norm_squared()
            }
        }
    }

    pub fn gradient(&self, x: &Vector) -> Vector {
        match &self.kind {
            LocalKind::Quadratic { a, b, .. } => a * x + b,
            LocalKind::Logistic { samples, labels, reg } => {
                let mut g = x * *reg;
                for (s, y) in samples.iter().zip(labels) {
                    g.axpy(-y * sigmoid(-y * s.dot(x)), s, 1.0);
                }
                g
            }
        }
    }

    pub fn hessian(&self, x: &Vector) -> Matrix {
        match &self.kind {
            LocalKind::Quadratic { a, .. } => a.clone(),
            LocalKind::Logistic { samples, labels, reg } => {
                let mut h = Matrix::identity(self.p, self.p) * *reg;
                for (s, y) in samples.iter().zip(labels) {
                    let t = y * s.dot(x);
                    let w = sigmoid(t) * sigmoid(-t);
                    h.ger(w, s, s, 1.0);
                }
                h
            }
        }
    }

    pub fn evaluate(&self, x: &Vector) -> Result<LocalEval> {
        self.check_dim(x)?;
        Ok(LocalEval {
            value: self.value(x),
            gradient: self.gradient(x),
            hessian: self.hessian(x),
        })
    }

    /// Uniform curvature bounds. Logistic losses need `reg > 0`: the data
    /// term alone is not strongly convex.
    pub fn curvature_constants(&self) -> Result<CurvatureConstants> {
        match &self.kind {
            LocalKind::Quadratic { a, .. } => {
                let eig = SymEig::new(a);
                if eig.min() <= 0.0 {
                    return Err(Error::NotStronglyConvex);
                }
                Ok(CurvatureConstants {
                    m: eig.min(),
                    m_upper: eig.max(),
                    lipschitz: 0.0,
                })
            }
            LocalKind::Logistic { samples, reg, .. } => {
                if *reg <= 0.0 {
                    return Err(Error::NotStronglyConvex);
                }
                let sq: f64 = samples.iter().map(|s| s.norm_squared()).sum();
                let cube: f64 = samples.iter().map(|s| s.norm().powi(3)).sum();
                Ok(CurvatureConstants {
                    m: *reg,
                    m_upper: reg + 0.25 * sq,
                    lipschitz: cube * SIGMOID_SECOND_DERIVATIVE_MAX,
                })
            }
        }
    }

    /// Uniform Hessian upper bound; defined without strong convexity.
    pub fn hessian_upper_bound(&self) -> f64 {
        match &self.kind {
            LocalKind::Quadratic { a, .. } => SymEig::new(a).max(),
            LocalKind::Logistic { samples, reg, .. } => {
                reg + 0.25 * samples.iter().map(|s| s.norm_squared()).sum::<f64>()
            }
        }
    }

    /// Curvature estimate for losses that are only strongly convex on a
    /// sublevel set: Hessian extremes measured at `x`. Approximate; not a
    /// certified bound.
    pub fn curvature_estimate_at(&self, x: &Vector) -> CurvatureConstants {
        let eig = SymEig::new(&self.hessian(x));
        let lipschitz = match self.curvature_constants() {
            Ok(c) => c.lipschitz,
            Err(_) => match &self.kind {
                LocalKind::Logistic { samples, .. } => {
                    samples.iter().map(|s| s.norm().powi(3)).sum::<f64>() * SIGMOID_SECOND_DERIVATIVE_MAX
                }
                LocalKind::Quadratic { .. } => 0.0,
            },
        };
        CurvatureConstants {
            m: eig.min(),
            m_upper: eig.max(),
            lipschitz,
        }
    }
}

/// Splits a labeled dataset across `n` nodes in contiguous chunks; the first
/// `rows % n` nodes receive one extra row.
pub fn partition_logistic(
    features: &[Vector],
    labels: &[f64],
    n: usize,
    reg: f64,
) -> Result<Vec<LocalObjective>> {
    if features.len() < n {
        return Err(Error::InvalidArgument(format!(
            "{} samples cannot cover {n} nodes",
            features.len()
        )));
    }
    let base = features.len() / n;
    let extra = features.len() % n;
    let mut out = Vec::with_capacity(n);
    let mut start = 0;
    for i in 0..n {
        let len = base + usize::from(i < extra);
        out.push(LocalObjective::logistic(
            features[start..start + len].to_vec(),
            labels[start..start + len].to_vec(),
            reg,
        )?);
        start += len;
    }
    Ok(out)
}

/// Reads `label, feature_1, ..., feature_p` rows; a header row is skipped
/// when its first field is not numeric.
pub fn load_logistic_csv(path: &Path, n: usize, reg: f64) -> Result<Vec<LocalObjective>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (row, rec) in reader.records().enumerate() {
        let rec = rec?;
        let fields: Vec<&str> = rec.iter().collect();
        let Some(first) = fields.first() else { continue };
        let Ok(label) = first.parse::<f64>() else {
            if row == 0 {
                continue;
            }
            return Err(Error::Parse(format!("row {row}: bad label `{first}`")));
        };
        let feats = fields[1..]
            .iter()
            .map(|t| t.parse::<f64>().map_err(|_| Error::Parse(format!("row {row}: bad feature `{t}`"))))
            .collect::<Result<Vec<_>>>()?;
        labels.push(if label > 0.0 { 1.0 } else { -1.0 });
        features.push(Vector::from_vec(feats));
    }
    partition_logistic(&features, &labels, n, reg)
}

/// Penalized objective over a network. `y` stacks one p-block per node.
#[derive(Debug, Clone)]
pub struct PenaltyObjective {
    topology: Topology,
    weights: WeightMatrix,
    alpha: f64,
    locals: Vec<LocalObjective>,
    p: usize,
}

impl PenaltyObjective {
    pub fn new(topology: Topology, weights: WeightMatrix, alpha: f64, locals: Vec<LocalObjective>) -> Result<Self> {
        let n = topology.n();
        if weights.n() != n {
            return Err(Error::Dimension {
                context: "weight matrix",
                expected: n,
                actual: weights.n(),
            });
        }
        if locals.len() != n {
            return Err(Error::Dimension {
                context: "local objectives",
                expected: n,
                actual: locals.len(),
            });
        }
        let p = locals[0].dim();
        if let Some(f) = locals.iter().find(|f| f.dim() != p) {
            return Err(Error::Dimension {
                context: "local objective dimension",
                expected: p,
                actual: f.dim(),
            });
        }
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidArgument(format!("alpha must be a finite nonnegative number, got {alpha}")));
        }
        for i in 0..n {
            for j in 0..n {
                if i != j && weights.get(i, j) != 0.0 && !topology.are_adjacent(i, j) {
                    return Err(Error::InvalidWeights(format!("weight on non-edge ({i},{j})")));
                }
            }
        }
        Ok(Self {
            topology,
            weights,
            alpha,
            locals,
            p,
        })
    }

    pub fn n(&self) -> usize {
        self.topology.n()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn dim(&self) -> usize {
        self.n() * self.p
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn set_alpha(&mut self, alpha: f64) {
        self.alpha = alpha;
    }

    pub fn with_alpha(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        out.alpha = alpha;
        out
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn weights(&self) -> &WeightMatrix {
        &self.weights
    }

    pub fn locals(&self) -> &[LocalObjective] {
        &self.locals
    }

    pub fn local(&self, i: usize) -> &LocalObjective {
        &self.locals[i]
    }

    pub fn constants(&self) -> Result<CurvatureConstants> {
        CurvatureConstants::aggregate(&self.locals)
    }

    fn check_dim(&self, y: &Vector) -> Result<()> {
        if y.len() != self.dim() {
            return Err(Error::Dimension {
                context: "stacked iterate",
                expected: self.dim(),
                actual: y.len(),
            });
        }
        Ok(())
    }

    fn block<'a>(&self, y: &'a Vector, i: usize) -> nalgebra::DVectorView<'a, f64> {
        y.rows(i * self.p, self.p)
    }

    /// Block i of `(I − Z) y`, using only node i and its neighbors.
    pub fn consensus_residual(&self, i: usize, own: &Vector, neighbors: impl IntoIterator<Item = (usize, Vector)>) -> Vector {
        let mut r = own * (1.0 - self.weights.get(i, i));
        for (j, yj) in neighbors {
            r.axpy(-self.weights.get(i, j), &yj, 1.0);
        }
        r
    }

    /// `g_i = (1 − w_ii) y_i − Σ_{j∈N_i} w_ij y_j + α ∇f_i(y_i)`.
    pub fn node_gradient(&self, i: usize, own: &Vector, neighbors: impl IntoIterator<Item = (usize, Vector)>) -> Vector {
        let mut g = self.consensus_residual(i, own, neighbors);
        g.axpy(self.alpha, &self.locals[i].gradient(own), 1.0);
        g
    }

    pub fn value(&self, y: &Vector) -> Result<f64> {
        Ok(self.eval(y)?.0)
    }

    /// `(F(y), ∇F(y))`, with `(I − Z) y` assembled from neighbor sums.
    pub fn eval(&self, y: &Vector) -> Result<(f64, Vector)> {
        self.check_dim(y)?;
        let mut quad = 0.0;
        let mut local = 0.0;
        let mut g = Vector::zeros(self.dim());
        for i in 0..self.n() {
            let yi = self.block(y, i).into_owned();
            let nbrs = self
                .topology
                .neighbors(i)
                .iter()
                .map(|&j| (j, self.block(y, j).into_owned()));
            let r = self.consensus_residual(i, &yi, nbrs);
            quad += yi.dot(&r);
            local += self.locals[i].value(&yi);
            let gi = r + self.locals[i].gradient(&yi) * self.alpha;
            g.rows_mut(i * self.p, self.p).copy_from(&gi);
        }
        Ok((0.5 * quad + self.alpha * local, g))
    }

    pub fn gradient(&self, y: &Vector) -> Result<Vector> {
        Ok(self.eval(y)?.1)
    }

    /// `F(to) − F(from)` by composite 8-point Gauss–Legendre quadrature of
    /// the directional derivative over 16 panels; resolves differences far
    /// below the rounding level of `F` itself.
    pub fn value_increment(&self, from: &Vector, to: &Vector) -> Result<f64> {
        const NODES: [(f64, f64); 4] = [
            (0.183_434_642_495_649_8, 0.362_683_783_378_362),
            (0.525_532_409_916_329, 0.313_706_645_877_887_3),
            (0.796_666_477_413_626_7, 0.222_381_034_453_374_5),
            (0.960_289_856_497_536_3, 0.101_228_536_290_376_3),
        ];
        self.check_dim(from)?;
        self.check_dim(to)?;
        const PANELS: usize = 16;
        let d = to - from;
        let h = 1.0 / PANELS as f64;
        let mut sum = 0.0;
        for panel in 0..PANELS {
            let left = panel as f64 * h;
            for (x, w) in NODES {
                for s in [0.5 * (1.0 - x), 0.5 * (1.0 + x)] {
                    sum += w * self.gradient(&(from + &d * (left + h * s)))?.dot(&d);
                }
            }
        }
        Ok(0.5 * h * sum)
    }

    /// `H = (I − Z) + α blockdiag(∇²f_i(y_i))`.
    pub fn hessian(&self, y: &Vector) -> Result<Matrix> {
        self.check_dim(y)?;
        let (n, p) = (self.n(), self.p);
        let mut h = Matrix::identity(n * p, n * p) - linalg::kron_identity(self.weights.matrix(), p);
        for i in 0..n {
            let hi = self.locals[i].hessian(&self.block(y, i).into_owned()) * self.alpha;
            let mut view = h.view_mut((i * p, i * p), (p, p));
            view += hi;
        }
        Ok(h)
    }

    /// `Σ_i f_i(x_i)` on a stacked vector.
    pub fn local_sum(&self, x: &Vector) -> f64 {
        (0..self.n())
            .map(|i| self.locals[i].value(&self.block(x, i).into_owned()))
            .sum()
    }

    /// Stacked `∇f_i(x_i)`.
    pub fn local_gradients(&self, x: &Vector) -> Vector {
        let blocks: Vec<Vector> = (0..self.n())
            .map(|i| self.locals[i].gradient(&self.block(x, i).into_owned()))
            .collect();
        linalg::stack(&blocks)
    }

    /// Value of the consensus objective `Σ_i f_i(x)` at a common point.
    pub fn global_value(&self, x: &Vector) -> f64 {
        self.locals.iter().map(|f| f.value(x)).sum()
    }

    pub fn global_gradient(&self, x: &Vector) -> Vector {
        self.locals
            .iter()
            .fold(Vector::zeros(self.p), |acc, f| acc + f.gradient(x))
    }

    pub fn global_hessian(&self, x: &Vector) -> Matrix {
        self.locals
            .iter()
            .fold(Matrix::zeros(self.p, self.p), |acc, f| acc + f.hessian(x))
    }
}

/// Centralized solutions used as ground truth by the experiments.
#[derive(Debug, Clone)]
pub struct Reference {
    pub y_star: Vector,
    pub f_star: f64,
    pub x_tilde_star: Vector,
}

impl Reference {
    /// `x̃*` replicated at every node.
    pub fn consensus_stack(&self, n: usize) -> Vector {
        linalg::stack(&vec![self.x_tilde_star.clone(); n])
    }
}

/// Damped Newton with Armijo backtracking from the origin.
pub fn damped_newton(
    dim: usize,
    value: impl Fn(&Vector) -> f64,
    grad: impl Fn(&Vector) -> Vector,
    hess: impl Fn(&Vector) -> Matrix,
    grad_tol: f64,
    max_iters: usize,
) -> Result<Vector> {
    damped_newton_from(Vector::zeros(dim), value, grad, hess, grad_tol, max_iters)
}

pub fn damped_newton_from(
    x0: Vector,
    value: impl Fn(&Vector) -> f64,
    grad: impl Fn(&Vector) -> Vector,
    hess: impl Fn(&Vector) -> Matrix,
    grad_tol: f64,
    max_iters: usize,
) -> Result<Vector> {
    let mut x = x0;
    let mut prev_norm = f64::INFINITY;
    let mut stalled = 0;
    for iter in 0..max_iters {
        let g = grad(&x);
        if g.norm() <= grad_tol {
            return Ok(x);
        }
        stalled = if g.norm() >= 0.5 * prev_norm { stalled + 1 } else { 0 };
        prev_norm = g.norm();
        let h = hess(&x);
        let d = linalg::solve_spd(&h, &(-&g), "Newton system")?;
        // Step below machine resolution of the iterate: converged in f64.
        if d.norm() <= f64::EPSILON * x.norm() {
            return Ok(x);
        }
        // Gradient no longer shrinks and the step is at rounding level.
        if stalled >= 3 && d.norm() <= 1e-12 * (1.0 + x.norm()) {
            return Ok(x);
        }
        let slope = g.dot(&d);
        let f0 = value(&x);
        // Near the minimizer value differences drown in rounding; the full
        // step is then judged by the gradient norm instead.
        let full = &x + &d;
        if (value(&full) - f0).abs() <= 1e3 * f64::EPSILON * (1.0 + f0.abs()) && grad(&full).norm() < g.norm() {
            x = full;
            continue;
        }
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let trial = &x + &d * t;
            if trial == x {
                break;
            }
            if value(&trial) <= f0 + 1e-4 * t * slope {
                x = trial;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            // Values no longer resolve the decrease; accept the full step if
            // it shrinks the gradient.
            let trial = &x + &d;
            if grad(&trial).norm() < g.norm() {
                x = trial;
                continue;
            }
            if -slope <= 1e-24 * (1.0 + f0.abs()) {
                return Ok(x);
            }
            return Err(Error::LineSearch { iterations: iter });
        }
    }
    if grad(&x).norm() <= grad_tol.max(1e-13) {
        Ok(x)
    } else {
        Err(Error::LineSearch { iterations: max_iters })
    }
}

/// Minimizer of `F` (to gradient norm `tol·1e-3`) and of `Σ f_i`.
pub fn centralized_reference(pen: &PenaltyObjective, tol: f64) -> Result<Reference> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    let y_star = damped_newton(
        pen.dim(),
        |y| pen.value(y).unwrap_or(f64::INFINITY),
        |y| pen.gradient(y).expect("dimension checked"),
        |y| pen.hessian(y).expect("dimension checked"),
        tol * 1e-3,
        200,
    )?;
    let f_star = pen.value(&y_star)?;
    let x_tilde_star = consensus_optimum(pen, tol)?;
    Ok(Reference {
        y_star,
        f_star,
        x_tilde_star,
    })
}

/// Minimizer of `Σ_i f_i(x)` over a single shared `x`.
pub fn consensus_optimum(pen: &PenaltyObjective, tol: f64) -> Result<Vector> {
    damped_newton(
        pen.p(),
        |x| pen.global_value(x),
        |x| pen.global_gradient(x),
        |x| pen.global_hessian(x),
        tol * 1e-3,
        200,
    )
}
