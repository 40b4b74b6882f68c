//! Network Newton: block splitting `H = D − B`, K-round truncated-series
//! directions, the adaptive penalty protocol, and the DGD baseline.

use nalgebra::Cholesky;
use nalgebra::Dyn;

use crate::error::{Error, Result};
use crate::harness::{Network, Observation, Solver};
use crate::linalg::{self, Matrix, Vector};
use crate::objective::{CurvatureConstants, PenaltyObjective};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NnConfig {
    pub k: usize,
    pub eps: f64,
    pub alpha0: f64,
    /// Local gradient threshold for the adaptive protocol; `None` means
    /// `1e-3·‖g₀‖`.
    pub tol: Option<f64>,
    pub adaptive: bool,
    pub alpha_divisor: f64,
    pub alpha_min: f64,
}

impl Default for NnConfig {
    fn default() -> Self {
        Self {
            k: 1,
            eps: 1.0,
            alpha0: 1e-2,
            tol: None,
            adaptive: false,
            alpha_divisor: 10.0,
            alpha_min: 1e-8,
        }
    }
}

impl NnConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps <= 1.0) {
            return Err(Error::InvalidArgument(format!("eps must lie in (0,1], got {}", self.eps)));
        }
        if !(self.alpha0 > 0.0) {
            return Err(Error::InvalidArgument(format!("alpha0 must be positive, got {}", self.alpha0)));
        }
        if !(self.alpha_divisor > 1.0) {
            return Err(Error::InvalidArgument(format!(
                "alpha_divisor must exceed 1, got {}",
                self.alpha_divisor
            )));
        }
        if !(self.alpha_min > 0.0) {
            return Err(Error::InvalidArgument("alpha_min must be positive".into()));
        }
        if let Some(tol) = self.tol {
            if !(tol > 0.0) {
                return Err(Error::InvalidArgument(format!("tol must be positive, got {tol}")));
            }
        }
        Ok(())
    }
}

/// Row i of the splitting at node i: `D_ii` and the nonzero `B_ij` blocks,
/// `j ∈ N_i ∪ {i}`.
#[derive(Debug, Clone)]
pub struct NodeSplitting {
    pub d: Matrix,
    pub b: Vec<(usize, Matrix)>,
}

/// `D_ii = α∇²f_i(x_i) + 2(1 − w_ii)I`, `B_ii = (1 − w_ii)I`, `B_ij = w_ij I`.
pub fn splitting_blocks(pen: &PenaltyObjective, i: usize, x_i: &Vector) -> NodeSplitting {
    let p = pen.p();
    let w = pen.weights();
    let wii = w.get(i, i);
    let d = pen.local(i).hessian(x_i) * pen.alpha() + Matrix::identity(p, p) * (2.0 * (1.0 - wii));
    let mut b = vec![(i, Matrix::identity(p, p) * (1.0 - wii))];
    b.extend(
        pen.topology()
            .neighbors(i)
            .iter()
            .map(|&j| (j, Matrix::identity(p, p) * w.get(i, j))),
    );
    b.sort_by_key(|(j, _)| *j);
    NodeSplitting { d, b }
}

fn d_block(pen: &PenaltyObjective, i: usize, x_i: &Vector) -> Matrix {
    let p = pen.p();
    pen.local(i).hessian(x_i) * pen.alpha() + Matrix::identity(p, p) * (2.0 * (1.0 - pen.weights().get(i, i)))
}

/// Dense `(D, B)` at a stacked point.
pub fn assemble_splitting(pen: &PenaltyObjective, y: &Vector) -> Result<(Matrix, Matrix)> {
    let h = pen.hessian(y)?;
    let p = pen.p();
    let blocks: Vec<Matrix> = linalg::unstack(y, p)
        .iter()
        .enumerate()
        .map(|(i, yi)| d_block(pen, i, yi))
        .collect();
    let d = linalg::block_diag(&blocks);
    let b = &d - h;
    Ok((d, b))
}

/// Stepsize guaranteeing the linear envelope:
/// `ε = min{1, [3mλ^{5/2} / (L Λ³ √F0_gap)]^{1/2}}`.
pub fn linear_rate_stepsize(consts: &CurvatureConstants, lambda: f64, lambda_upper: f64, f0_gap: f64) -> Result<f64> {
    if f0_gap < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "initial optimality gap is negative ({f0_gap:e}); reference solution inconsistent"
        )));
    }
    let denom = consts.lipschitz * lambda_upper.powi(3) * f0_gap.sqrt();
    if denom == 0.0 {
        return Ok(1.0);
    }
    Ok((3.0 * consts.m * lambda.powf(2.5) / denom).sqrt().min(1.0))
}

/// Signal bits of the adaptive protocol. Row i is node i's copy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnBoard {
    bits: Vec<Vec<bool>>,
}

impl AnnBoard {
    pub fn new(n: usize) -> Self {
        Self {
            bits: vec![vec![false; n]; n],
        }
    }

    pub fn has_signaled(&self, i: usize) -> bool {
        self.bits[i][i]
    }

    /// Every node records every origin.
    pub fn deliver(&mut self, origins: &[usize]) {
        for row in &mut self.bits {
            for &o in origins {
                row[o] = true;
            }
        }
    }

    pub fn row_complete(&self, i: usize) -> bool {
        self.bits[i].iter().all(|&b| b)
    }

    pub fn reset(&mut self) {
        for row in &mut self.bits {
            row.fill(false);
        }
    }

    pub fn rows_synchronized(&self) -> bool {
        self.bits.windows(2).all(|w| w[0] == w[1])
    }

    pub fn row(&self, i: usize) -> &[bool] {
        &self.bits[i]
    }
}

type Factor = Cholesky<f64, Dyn>;

fn factor(d: &Matrix, node: usize) -> Result<Factor> {
    Cholesky::new(d.clone()).ok_or_else(|| Error::NotPositiveDefinite(format!("D block at node {node}")))
}

/// NN-K and, with `adaptive`, the adaptive-penalty variant.
pub struct NetworkNewton {
    pen: PenaltyObjective,
    cfg: NnConfig,
    tol: f64,
    t: usize,
    y: Vec<Vector>,
    /// `D_ii` blocks of the most recent step, used for `‖D_{t−1}^{-1/2} g_t‖`.
    d_prev: Option<Vec<Matrix>>,
    board: AnnBoard,
    alpha_changes: Vec<(usize, f64)>,
    last_directions: Vec<Vector>,
}

impl NetworkNewton {
    pub fn new(pen: &PenaltyObjective, cfg: NnConfig, y0: &Vector) -> Result<Self> {
        cfg.validate()?;
        if y0.len() != pen.dim() {
            return Err(Error::Dimension {
                context: "initial iterate",
                expected: pen.dim(),
                actual: y0.len(),
            });
        }
        let pen = pen.with_alpha(cfg.alpha0);
        let tol = match cfg.tol {
            Some(t) => t,
            None => 1e-3 * pen.gradient(y0)?.norm(),
        };
        Ok(Self {
            board: AnnBoard::new(pen.n()),
            y: linalg::unstack(y0, pen.p()),
            pen,
            cfg,
            tol,
            t: 0,
            d_prev: None,
            alpha_changes: Vec::new(),
            last_directions: Vec::new(),
        })
    }

    pub fn alpha(&self) -> f64 {
        self.pen.alpha()
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn iterate(&self) -> Vector {
        linalg::stack(&self.y)
    }

    pub fn board(&self) -> &AnnBoard {
        &self.board
    }

    /// `(iteration, new α)` for every penalty decrease so far.
    pub fn alpha_changes(&self) -> &[(usize, f64)] {
        &self.alpha_changes
    }

    /// Directions `d^(K)` used by the most recent step.
    pub fn last_directions(&self) -> &[Vector] {
        &self.last_directions
    }

    fn current_d_blocks(&self) -> Vec<Matrix> {
        self.y
            .iter()
            .enumerate()
            .map(|(i, yi)| d_block(&self.pen, i, yi))
            .collect()
    }

    /// Signal round of the adaptive protocol; returns the new α if every
    /// node holds a complete signal row.
    fn signal_round(&mut self, net: &mut Network<'_>, g: &[Vector]) -> Option<f64> {
        let origins: Vec<usize> = (0..g.len())
            .filter(|&i| !self.board.has_signaled(i) && g[i].norm() <= self.tol)
            .collect();
        if !origins.is_empty() {
            net.broadcast(&origins);
            self.board.deliver(&origins);
        }
        if !(0..g.len()).all(|i| self.board.row_complete(i)) {
            return None;
        }
        self.board.reset();
        let next = self.pen.alpha() / self.cfg.alpha_divisor;
        (next >= self.cfg.alpha_min).then_some(next)
    }
}

impl Solver for NetworkNewton {
    fn name(&self) -> String {
        if self.cfg.adaptive {
            format!("ann-{}", self.cfg.k)
        } else {
            format!("nn-{}", self.cfg.k)
        }
    }

    fn step(&mut self, net: &mut Network<'_>) -> Result<()> {
        let pen = &self.pen;
        let local = net.exchange(&self.y, |view| {
            let i = view.id();
            let own = view.own();
            let g = pen.node_gradient(i, own, view.received().map(|(j, v)| (j, v.clone())));
            Ok((g, d_block(pen, i, own)))
        })?;
        let (mut g, mut d): (Vec<Vector>, Vec<Matrix>) = local.into_iter().unzip();

        if self.cfg.adaptive {
            if let Some(next) = self.signal_round(net, &g) {
                let old = self.pen.alpha();
                self.pen.set_alpha(next);
                self.alpha_changes.push((self.t + 1, next));
                // Local recomputation under the new penalty.
                for (i, yi) in self.y.iter().enumerate() {
                    let grad = self.pen.local(i).gradient(yi);
                    g[i].axpy(next - old, &grad, 1.0);
                    d[i] = d_block(&self.pen, i, yi);
                }
            }
        }

        let factors = d
            .iter()
            .enumerate()
            .map(|(i, di)| factor(di, i))
            .collect::<Result<Vec<_>>>()?;
        let mut dir: Vec<Vector> = factors.iter().zip(&g).map(|(f, gi)| -f.solve(gi)).collect();
        let pen = &self.pen;
        for _ in 0..self.cfg.k {
            dir = net.exchange(&dir, |view| {
                let i = view.id();
                let w = pen.weights();
                let mut rhs = view.own() * (1.0 - w.get(i, i)) - &g[i];
                for (j, dj) in view.received() {
                    rhs.axpy(w.get(i, j), dj, 1.0);
                }
                Ok(factors[i].solve(&rhs))
            })?;
        }

        for (yi, di) in self.y.iter_mut().zip(&dir) {
            yi.axpy(self.cfg.eps, di, 1.0);
        }
        self.last_directions = dir;
        self.d_prev = Some(d);
        self.t += 1;
        Ok(())
    }

    fn observe(&self) -> Result<Observation> {
        let y = self.iterate();
        let (f, g) = self.pen.eval(&y)?;
        let cur = self.current_d_blocks();
        let weighted = |blocks: &[Matrix]| -> Result<f64> {
            let mut s = 0.0;
            for (i, gi) in linalg::unstack(&g, self.pen.p()).iter().enumerate() {
                s += gi.dot(&linalg::solve_spd(&blocks[i], gi, "D block")?);
            }
            Ok(s.sqrt())
        };
        let w_cur = weighted(&cur)?;
        let w_prev = match &self.d_prev {
            Some(prev) => weighted(prev)?,
            None => w_cur,
        };
        Ok(Observation {
            x: y,
            alpha: Some(self.pen.alpha()),
            objective: f,
            grad_norm: Some(g.norm()),
            weighted_grad_norm_prev_d: Some(w_prev),
            weighted_grad_norm_cur_d: Some(w_cur),
        })
    }
}

/// Decentralized gradient descent on the penalty objective.
pub struct Dgd {
    pen: PenaltyObjective,
    eps: f64,
    y: Vec<Vector>,
}

impl Dgd {
    pub fn new(pen: &PenaltyObjective, eps: f64, y0: &Vector) -> Result<Self> {
        if !(eps >= 0.0) {
            return Err(Error::InvalidArgument(format!("eps must be nonnegative, got {eps}")));
        }
        if y0.len() != pen.dim() {
            return Err(Error::Dimension {
                context: "initial iterate",
                expected: pen.dim(),
                actual: y0.len(),
            });
        }
        Ok(Self {
            pen: pen.clone(),
            eps,
            y: linalg::unstack(y0, pen.p()),
        })
    }

    pub fn iterate(&self) -> Vector {
        linalg::stack(&self.y)
    }
}

impl Solver for Dgd {
    fn name(&self) -> String {
        "dgd".into()
    }

    fn step(&mut self, net: &mut Network<'_>) -> Result<()> {
        let pen = &self.pen;
        let eps = self.eps;
        self.y = net.exchange(&self.y, |view| {
            let i = view.id();
            let g = pen.node_gradient(i, view.own(), view.received().map(|(j, v)| (j, v.clone())));
            Ok(view.own() - g * eps)
        })?;
        Ok(())
    }

    fn observe(&self) -> Result<Observation> {
        let y = self.iterate();
        let (f, g) = self.pen.eval(&y)?;
        Ok(Observation {
            x: y,
            alpha: Some(self.pen.alpha()),
            objective: f,
            grad_norm: Some(g.norm()),
            weighted_grad_norm_prev_d: None,
            weighted_grad_norm_cur_d: None,
        })
    }
}
