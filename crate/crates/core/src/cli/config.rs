//! Experiment configuration: a sectioned TOML file with strict keys.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dqm::AdmmConfig;
use crate::error::{Error, Result};
use crate::instances::{self, LogisticSpec, QuadraticSpec};
use crate::linalg::{Matrix, Vector};
use crate::netnewton::NnConfig;
use crate::objective::{load_logistic_csv, partition_logistic, LocalObjective, PenaltyObjective};
use crate::topology::{Topology, WeightMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub topology: TopologyConfig,
    pub objective: ObjectiveConfig,
    #[serde(default, rename = "solver")]
    pub solvers: Vec<SolverConfig>,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TopologyKind {
    Random,
    Path,
    Star,
    Complete,
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyConfig {
    pub kind: TopologyKind,
    pub n: Option<usize>,
    pub p_c: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    /// Edge list for `kind = "file"`.
    pub edges: Option<PathBuf>,
    /// Weight matrix file; Metropolis weights when absent.
    pub weights: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectiveKind {
    /// `f_i(x) = ½ a_i (x − c_i)²` on scalars.
    Centered,
    Quadratic,
    Logistic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveConfig {
    pub kind: ObjectiveKind,
    pub p: Option<usize>,
    pub centers: Option<Vec<f64>>,
    pub curvatures: Option<Vec<f64>>,
    pub cond: Option<f64>,
    pub heterogeneity: Option<f64>,
    /// Samples per node for synthetic logistic data.
    pub q: Option<usize>,
    pub reg: Option<f64>,
    pub dataset: Option<PathBuf>,
    pub feature_spread: Option<f64>,
    pub feature_scale: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Dgd,
    Nn,
    Ann,
    Dadmm,
    Dlm,
    Dqm,
}

impl SolverKind {
    pub fn is_admm(self) -> bool {
        matches!(self, Self::Dadmm | Self::Dlm | Self::Dqm)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub kind: SolverKind,
    #[serde(rename = "K", alias = "k", default = "default_k")]
    pub k: usize,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "default_alpha0")]
    pub alpha0: f64,
    pub tol: Option<f64>,
    pub alpha_divisor: Option<f64>,
    pub alpha_min: Option<f64>,
    pub c: Option<f64>,
    pub rho_lin: Option<f64>,
    pub inner_tol: Option<f64>,
}

fn default_k() -> usize {
    1
}

fn default_eps() -> f64 {
    1.0
}

fn default_alpha0() -> f64 {
    1e-2
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitKind {
    #[default]
    Zero,
    /// `y*(α)` for the fixed-penalty methods and the saddle point for the
    /// ADMM family, both fixed points. ANN starts at the consensus optimum,
    /// its limit, and drifts toward `y*(α₀)` until α shrinks.
    Optimum,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    pub grad_tol: Option<f64>,
    pub rel_err_tol: Option<f64>,
    #[serde(default)]
    pub init: InitKind,
}

fn default_max_iters() -> usize {
    100
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            max_iters: default_max_iters(),
            grad_tol: None,
            rel_err_tol: None,
            init: InitKind::Zero,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsConfig {
    /// Certify the splitting bounds every this many iterations; 0 disables.
    #[serde(default)]
    pub certify_every: usize,
    #[serde(default)]
    pub rate_checks: bool,
}

impl DiagnosticsConfig {
    pub fn enabled(&self) -> bool {
        self.certify_every > 0 || self.rate_checks
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default)]
    pub alphas: Vec<f64>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Parse(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads and validates; relative file paths resolve against the config
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::parse(&text)?;
        if let Some(dir) = path.parent() {
            let fix = |p: &mut Option<PathBuf>| {
                if let Some(q) = p.as_mut() {
                    if q.is_relative() {
                        *q = dir.join(&*q);
                    }
                }
            };
            fix(&mut cfg.topology.edges);
            fix(&mut cfg.topology.weights);
            fix(&mut cfg.objective.dataset);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let t = &self.topology;
        match t.kind {
            TopologyKind::File => {
                if t.edges.is_none() {
                    return Err(invalid("topology.edges is required for kind = \"file\""));
                }
            }
            _ => {
                let n = t.n.ok_or_else(|| invalid("topology.n is required"))?;
                if n < 2 {
                    return Err(invalid(format!("topology.n must be at least 2, got {n}")));
                }
            }
        }
        if t.kind == TopologyKind::Random {
            let p_c = t.p_c.ok_or_else(|| invalid("topology.p_c is required for kind = \"random\""))?;
            if !(p_c > 0.0 && p_c <= 1.0) {
                return Err(invalid(format!("topology.p_c must lie in (0,1], got {p_c}")));
            }
        }
        let o = &self.objective;
        if let Some(p) = o.p {
            if p == 0 {
                return Err(invalid("objective.p must be at least 1"));
            }
        }
        match o.kind {
            ObjectiveKind::Centered => {
                if o.centers.is_none() {
                    return Err(invalid("objective.centers is required for kind = \"centered\""));
                }
                if o.p.is_some_and(|p| p != 1) {
                    return Err(invalid("objective.p must be 1 for kind = \"centered\""));
                }
            }
            ObjectiveKind::Quadratic => {
                if o.cond.is_some_and(|c| !(c >= 1.0)) {
                    return Err(invalid("objective.cond must be at least 1"));
                }
            }
            ObjectiveKind::Logistic => {
                if o.reg.is_some_and(|r| !(r >= 0.0)) {
                    return Err(invalid("objective.reg must be nonnegative"));
                }
            }
        }
        for s in &self.solvers {
            s.validate()?;
        }
        let r = &self.run;
        if r.max_iters == 0 && r.grad_tol.is_none() && r.rel_err_tol.is_none() {
            return Err(invalid("run needs max_iters > 0 or a stop tolerance"));
        }
        for a in &self.sweep.alphas {
            check_alpha(*a)?;
        }
        Ok(())
    }

    /// Problem and configuration agree on everything but the solvers.
    pub fn same_problem(&self, other: &Self) -> bool {
        self.topology == other.topology && self.objective == other.objective
    }
}

pub fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(invalid(format!("alpha must be positive, got {alpha}")));
    }
    Ok(())
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.kind.is_admm() {
            self.admm(1.0)?.validate()
        } else {
            self.nn().validate()
        }
    }

    pub fn nn(&self) -> NnConfig {
        let base = NnConfig::default();
        NnConfig {
            k: self.k,
            eps: self.eps,
            alpha0: self.alpha0,
            tol: self.tol,
            adaptive: self.kind == SolverKind::Ann,
            alpha_divisor: self.alpha_divisor.unwrap_or(base.alpha_divisor),
            alpha_min: self.alpha_min.unwrap_or(base.alpha_min),
        }
    }

    /// ADMM settings; DLM falls back to `default_rho_lin` when `rho_lin` is unset.
    pub fn admm(&self, default_rho_lin: f64) -> Result<AdmmConfig> {
        let c = self
            .c
            .ok_or_else(|| invalid(format!("solver.c is required for {:?}", self.kind)))?;
        let cfg = match self.kind {
            SolverKind::Dadmm => {
                let mut cfg = AdmmConfig::dadmm(c);
                if let (Some(tol), crate::dqm::AdmmVariant::Dadmm { inner_tol }) = (self.inner_tol, &mut cfg.variant) {
                    *inner_tol = tol;
                }
                cfg
            }
            SolverKind::Dlm => {
                AdmmConfig::dlm(c, self.rho_lin.unwrap_or(default_rho_lin))
            }
            SolverKind::Dqm => AdmmConfig::dqm(c),
            _ => return Err(invalid(format!("{:?} is not an ADMM variant", self.kind))),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Topology, weights and local objectives built from a configuration.
#[derive(Debug, Clone)]
pub struct Problem {
    pub topology: Topology,
    pub weights: WeightMatrix,
    pub locals: Vec<LocalObjective>,
    pub custom_weights: bool,
}

impl Problem {
    pub fn build(cfg: &ExperimentConfig) -> Result<Self> {
        let t = &cfg.topology;
        let topology = match t.kind {
            TopologyKind::Random => Topology::random(t.n.unwrap_or(0), t.p_c.unwrap_or(0.0), t.seed)?,
            TopologyKind::Path => Topology::path(t.n.unwrap_or(0))?,
            TopologyKind::Star => Topology::star(t.n.unwrap_or(0))?,
            TopologyKind::Complete => Topology::complete(t.n.unwrap_or(0))?,
            TopologyKind::File => {
                let path = t.edges.as_ref().expect("validated");
                Topology::from_text(&std::fs::read_to_string(path)?)?
            }
        };
        if let Some(n) = t.n {
            if n != topology.n() {
                return Err(invalid(format!(
                    "topology.n = {n} but the edge list has {} nodes",
                    topology.n()
                )));
            }
        }
        let weights = match &t.weights {
            Some(path) => WeightMatrix::from_text(&std::fs::read_to_string(path)?, &topology)?,
            None => WeightMatrix::metropolis(&topology),
        };
        let locals = build_locals(&cfg.objective, &topology, t.seed)?;
        Ok(Self {
            topology,
            weights,
            locals,
            custom_weights: t.weights.is_some(),
        })
    }

    pub fn n(&self) -> usize {
        self.topology.n()
    }

    pub fn p(&self) -> usize {
        self.locals[0].dim()
    }

    pub fn penalty(&self, alpha: f64) -> Result<PenaltyObjective> {
        PenaltyObjective::new(self.topology.clone(), self.weights.clone(), alpha, self.locals.clone())
    }
}

fn build_locals(o: &ObjectiveConfig, top: &Topology, seed: u64) -> Result<Vec<LocalObjective>> {
    let n = top.n();
    match o.kind {
        ObjectiveKind::Centered => {
            let centers = o.centers.as_ref().expect("validated");
            if centers.len() != n {
                return Err(invalid(format!(
                    "objective.centers has {} entries for {n} nodes",
                    centers.len()
                )));
            }
            let curv = o.curvatures.clone().unwrap_or_else(|| vec![1.0; n]);
            if curv.len() != n {
                return Err(invalid(format!(
                    "objective.curvatures has {} entries for {n} nodes",
                    curv.len()
                )));
            }
            centers
                .iter()
                .zip(curv)
                .map(|(&c, a)| {
                    if !(a > 0.0) {
                        return Err(invalid(format!("curvature must be positive, got {a}")));
                    }
                    LocalObjective::centered_quadratic(Matrix::from_element(1, 1, a), &Vector::from_element(1, c))
                })
                .collect()
        }
        ObjectiveKind::Quadratic => {
            let spec = QuadraticSpec {
                n,
                p: o.p.unwrap_or(2),
                cond: o.cond.unwrap_or(10.0),
                alpha: 1.0,
                p_c: 1.0,
                heterogeneity: o.heterogeneity.unwrap_or(1.0),
            };
            Ok(instances::random_quadratic_locals(seed, &spec))
        }
        ObjectiveKind::Logistic => {
            let reg = o.reg.unwrap_or(1e-3);
            if let Some(path) = &o.dataset {
                return load_logistic_csv(path, n, reg);
            }
            let spec = LogisticSpec {
                n,
                q: o.q.unwrap_or(5),
                p: o.p.unwrap_or(3),
                reg,
                p_c: 1.0,
                alpha: 1.0,
                feature_spread: o.feature_spread.unwrap_or(1.0),
                feature_scale: o.feature_scale.unwrap_or(1.0),
            };
            let (features, labels) = instances::logistic_data(&spec, seed);
            partition_logistic(&features, &labels, n, reg)
        }
    }
}
