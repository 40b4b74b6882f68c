//! Reduced node-local ADMM updates against a dense edge-based oracle built
//! from the augmented Lagrangian `f(x) + λᵀ(Ax + Bz) + (c/2)‖Ax + Bz‖²`
//! with `A = [A_s; A_d]`, `B = [−I; −I]`, `λ = [α; β]`.

use dcopt::dqm::{AdmmConfig, AdmmSolver, AdmmState};
use dcopt::harness::{Network, Solver};
use dcopt::instances::{self, LogisticSpec, QuadraticSpec};
use dcopt::linalg::{self, Matrix, Vector};
use dcopt::objective::{partition_logistic, LocalObjective};
use dcopt::topology::{IncidenceSet, Topology};

#[derive(Clone, Copy)]
enum Update {
    Exact,
    Linearized(f64),
    Quadratic,
}

struct Dense<'a> {
    locals: &'a [LocalObjective],
    p: usize,
    a: Matrix,
    b: Matrix,
    c: f64,
    x: Vector,
    z: Vector,
    lambda: Vector,
}

impl<'a> Dense<'a> {
    fn new(locals: &'a [LocalObjective], inc: &IncidenceSet, c: f64) -> Self {
        let (me, np) = (inc.a_s.nrows(), inc.a_s.ncols());
        let mut a = Matrix::zeros(2 * me, np);
        a.rows_mut(0, me).copy_from(&inc.a_s);
        a.rows_mut(me, me).copy_from(&inc.a_d);
        let mut b = Matrix::zeros(2 * me, me);
        b.rows_mut(0, me).copy_from(&(-Matrix::identity(me, me)));
        b.rows_mut(me, me).copy_from(&(-Matrix::identity(me, me)));
        Self {
            locals,
            p: inc.p,
            a,
            b,
            c,
            x: Vector::zeros(np),
            z: Vector::zeros(me),
            lambda: Vector::zeros(2 * me),
        }
    }

    fn grad(&self, x: &Vector) -> Vector {
        let blocks: Vec<Vector> =
            linalg::unstack(x, self.p).iter().zip(self.locals).map(|(xi, f)| f.gradient(xi)).collect();
        linalg::stack(&blocks)
    }

    fn hess(&self, x: &Vector) -> Matrix {
        let blocks: Vec<Matrix> =
            linalg::unstack(x, self.p).iter().zip(self.locals).map(|(xi, f)| f.hessian(xi)).collect();
        linalg::block_diag(&blocks)
    }

    /// `Aᵀλ + cAᵀBz`, the part of the x-optimality condition fixed by the
    /// previous iterate.
    fn coupling(&self) -> Vector {
        self.a.transpose() * &self.lambda + self.a.transpose() * (&self.b * &self.z) * self.c
    }

    fn step(&mut self, update: Update) {
        let ata = self.a.transpose() * &self.a * self.c;
        let rhs = -self.grad(&self.x) - self.coupling();
        self.x = match update {
            Update::Linearized(r) => {
                let m = &ata + Matrix::identity(ata.nrows(), ata.nrows()) * r;
                linalg::solve_spd(&m, &(rhs + &self.x * r), "DLM system").unwrap()
            }
            Update::Quadratic => {
                let h = self.hess(&self.x);
                linalg::solve_spd(&(&h + &ata), &(rhs + &h * &self.x), "DQM system").unwrap()
            }
            Update::Exact => {
                // Newton on ∇f(x) + Aᵀλ + cAᵀ(Ax + Bz) = 0.
                let fixed = self.coupling();
                let mut x = self.x.clone();
                for _ in 0..100 {
                    let r = self.grad(&x) + &fixed + &ata * &x;
                    if r.norm() <= 1e-14 * (1.0 + fixed.norm()) {
                        break;
                    }
                    let dx = linalg::solve_spd(&(self.hess(&x) + &ata), &r, "Newton system").unwrap();
                    x -= dx;
                }
                x
            }
        };
        // z-minimization: Bᵀλ + cBᵀ(Ax + Bz) = 0.
        let btb = self.b.transpose() * &self.b * self.c;
        let zr = -(self.b.transpose() * &self.lambda) - self.b.transpose() * (&self.a * &self.x) * self.c;
        self.z = linalg::solve_spd(&btb, &zr, "z system").unwrap();
        self.lambda += (&self.a * &self.x + &self.b * &self.z) * self.c;
    }

    fn alpha(&self) -> Vector {
        self.lambda.rows(0, self.z.len()).into_owned()
    }

    fn beta(&self) -> Vector {
        self.lambda.rows(self.z.len(), self.z.len()).into_owned()
    }
}

fn compare(top: &Topology, locals: &[LocalObjective], cfg: AdmmConfig, update: Update, steps: usize) -> f64 {
    let p = locals[0].dim();
    let inc = IncidenceSet::build(top, p).unwrap();
    let mut dense = Dense::new(locals, &inc, cfg.c);
    let mut solver = AdmmSolver::new(top, locals, cfg).unwrap();
    let mut net = Network::new(top);
    let mut worst = 0.0f64;
    for _ in 0..steps {
        dense.step(update);
        solver.step(&mut net).unwrap();
        let s: &AdmmState = solver.state();
        let scale = 1.0 + dense.x.norm();
        worst = worst
            .max((s.x_stacked() - &dense.x).norm() / scale)
            .max((&s.z - &dense.z).norm() / scale)
            .max((&s.alpha_mult - dense.alpha()).norm() / scale);
        // Multipliers stay antisymmetric along the standard start.
        assert!((dense.alpha() + dense.beta()).norm() <= 1e-10 * scale);
    }
    worst
}

fn quadratic_case(seed: u64) -> (Topology, Vec<LocalObjective>) {
    let spec = QuadraticSpec {
        n: 5 + (seed % 4) as usize,
        p: 1 + (seed % 3) as usize,
        ..Default::default()
    };
    let top = Topology::random(spec.n, 0.5, seed).unwrap();
    (top, instances::random_quadratic_locals(seed, &spec))
}

fn logistic_case(seed: u64) -> (Topology, Vec<LocalObjective>) {
    let spec = LogisticSpec {
        n: 6,
        reg: 1e-2,
        ..Default::default()
    };
    let top = Topology::random(spec.n, 0.5, seed).unwrap();
    let (features, labels) = instances::logistic_data(&spec, seed);
    (top, partition_logistic(&features, &labels, spec.n, spec.reg).unwrap())
}

#[test]
fn dqm_matches_dense_quadratic_update() {
    for seed in 0..6 {
        let (top, locals) = quadratic_case(seed);
        assert!(compare(&top, &locals, AdmmConfig::dqm(0.8), Update::Quadratic, 40) <= 1e-10);
        let (top, locals) = logistic_case(seed);
        assert!(compare(&top, &locals, AdmmConfig::dqm(0.8), Update::Quadratic, 40) <= 1e-10);
    }
}

#[test]
fn dlm_solves_its_optimality_condition() {
    for seed in 0..6 {
        let (top, locals) = quadratic_case(seed);
        assert!(compare(&top, &locals, AdmmConfig::dlm(1.5, 4.0), Update::Linearized(4.0), 40) <= 1e-10);
        let (top, locals) = logistic_case(seed);
        assert!(compare(&top, &locals, AdmmConfig::dlm(1.5, 4.0), Update::Linearized(4.0), 40) <= 1e-10);
    }
}

#[test]
fn dadmm_matches_exact_minimization() {
    for seed in 0..4 {
        let (top, locals) = quadratic_case(seed);
        assert!(compare(&top, &locals, AdmmConfig::dadmm(1.0), Update::Exact, 30) <= 1e-10);
        let (top, locals) = logistic_case(seed);
        let err = compare(&top, &locals, AdmmConfig::dadmm(1.0), Update::Exact, 30);
        assert!(err <= 1e-8, "logistic seed {seed}: {err:e}");
    }
}
