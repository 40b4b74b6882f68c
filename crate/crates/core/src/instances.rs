//! Reproducible problem instances: the two-node analytic fixture, seeded
//! random quadratic networks, and synthetic logistic regression.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::linalg::{Matrix, Vector};
use crate::objective::{partition_logistic, LocalObjective, PenaltyObjective};
use crate::topology::{Topology, WeightMatrix};

/// Two-node path, Metropolis weights, `f_i(x) = ½ (x − c_i)²` with
/// `c = (0, 2)`.
pub fn p2(alpha: f64) -> PenaltyObjective {
    let top = Topology::path(2).expect("two-node path");
    let w = WeightMatrix::metropolis(&top);
    let locals = [0.0, 2.0]
        .iter()
        .map(|&c| LocalObjective::centered_quadratic(Matrix::identity(1, 1), &Vector::from_element(1, c)).expect("1x1"))
        .collect();
    PenaltyObjective::new(top, w, alpha, locals).expect("valid fixture")
}

/// Triangle with scalar quadratics centered at `centers`.
pub fn triangle(alpha: f64, centers: [f64; 3], curvatures: [f64; 3]) -> PenaltyObjective {
    let top = Topology::complete(3).expect("triangle");
    let w = WeightMatrix::metropolis(&top);
    let locals = centers
        .iter()
        .zip(curvatures)
        .map(|(&c, a)| {
            LocalObjective::centered_quadratic(Matrix::from_element(1, 1, a), &Vector::from_element(1, c)).expect("1x1")
        })
        .collect();
    PenaltyObjective::new(top, w, alpha, locals).expect("valid fixture")
}

#[derive(Debug, Clone, Copy)]
pub struct QuadraticSpec {
    pub n: usize,
    pub p: usize,
    /// Local Hessian eigenvalues are drawn log-uniformly from `[1, cond]`.
    pub cond: f64,
    pub alpha: f64,
    pub p_c: f64,
    /// Scale of the per-node center offsets around the shared center.
    pub heterogeneity: f64,
}

impl Default for QuadraticSpec {
    fn default() -> Self {
        Self {
            n: 6,
            p: 2,
            cond: 10.0,
            alpha: 1.0,
            p_c: 0.5,
            heterogeneity: 1.0,
        }
    }
}

impl QuadraticSpec {
    /// Randomized suite member: n in [3,12], p in [1,4], condition number up
    /// to 1e3, α in {0.1, 1, 10}.
    pub fn suite_member(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed5_u64);
        Self {
            n: rng.random_range(3..=12),
            p: rng.random_range(1..=4),
            cond: 10f64.powf(rng.random_range(0.0..=3.0)),
            alpha: [0.1, 1.0, 10.0][rng.random_range(0..3)],
            p_c: rng.random_range(0.3..=0.8),
            heterogeneity: 1.0,
        }
    }
}

pub fn gaussian_vector(dim: usize, rng: &mut impl Rng) -> Vector {
    Vector::from_fn(dim, |_, _| StandardNormal.sample(rng))
}

pub fn random_vector(dim: usize, seed: u64) -> Vector {
    gaussian_vector(dim, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Random orthogonal matrix from the QR factor of a Gaussian matrix.
pub fn random_orthogonal(p: usize, rng: &mut impl Rng) -> Matrix {
    let g = Matrix::from_fn(p, p, |_, _| StandardNormal.sample(rng));
    g.qr().q()
}

/// SPD matrix with eigenvalues log-uniform in `[lo, hi]`; the extremes are
/// always present when `p >= 2`.
pub fn random_spd(p: usize, lo: f64, hi: f64, rng: &mut impl Rng) -> Matrix {
    let q = random_orthogonal(p, rng);
    let eig = Vector::from_fn(p, |k, _| match (k, p) {
        (0, _) => lo,
        (k, p) if k == p - 1 => hi,
        _ => (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp(),
    });
    let a = &q * Matrix::from_diagonal(&eig) * q.transpose();
    (&a + a.transpose()) * 0.5
}

pub fn random_quadratic(seed: u64, spec: QuadraticSpec) -> PenaltyObjective {
    let top = Topology::random(spec.n, spec.p_c, seed).expect("connected sample");
    let w = WeightMatrix::metropolis(&top);
    let locals = random_quadratic_locals(seed, &spec);
    PenaltyObjective::new(top, w, spec.alpha, locals).expect("valid instance")
}

/// Local objectives of [`random_quadratic`] without the network.
pub fn random_quadratic_locals(seed: u64, spec: &QuadraticSpec) -> Vec<LocalObjective> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ 0xabc);
    let shift = gaussian_vector(spec.p, &mut rng);
    (0..spec.n)
        .map(|_| {
            let a = random_spd(spec.p, 1.0, spec.cond, &mut rng);
            let center = gaussian_vector(spec.p, &mut rng) * spec.heterogeneity + &shift;
            LocalObjective::centered_quadratic(a, &center).expect("square")
        })
        .collect()
}

#[derive(Debug, Clone, Copy)]
pub struct LogisticSpec {
    pub n: usize,
    /// Samples per node.
    pub q: usize,
    pub p: usize,
    pub reg: f64,
    pub p_c: f64,
    pub alpha: f64,
    /// Features are scaled per coordinate by `feature_spread^(k/(p-1))`,
    /// giving an ill-conditioned data term when `feature_spread > 1`.
    pub feature_spread: f64,
    /// Common multiplier on every feature.
    pub feature_scale: f64,
}

impl Default for LogisticSpec {
    fn default() -> Self {
        Self {
            n: 10,
            q: 5,
            p: 3,
            reg: 1e-3,
            p_c: 0.4,
            alpha: 1.0,
            feature_spread: 1.0,
            feature_scale: 1.0,
        }
    }
}

/// Features are standard normal (optionally rescaled per coordinate);
/// labels are drawn from the logistic model of a unit-norm ground-truth
/// classifier with uniformly random direction.
pub fn logistic_data(spec: &LogisticSpec, seed: u64) -> (Vec<Vector>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x2545_f491_4f6c_dd1d) ^ 0x10_6157);
    let truth = gaussian_vector(spec.p, &mut rng).normalize();
    let scales = Vector::from_fn(spec.p, |k, _| {
        let spread = if spec.p > 1 {
            spec.feature_spread.powf(k as f64 / (spec.p - 1) as f64)
        } else {
            1.0
        };
        spec.feature_scale * spread
    });
    let total = spec.n * spec.q;
    let mut features = Vec::with_capacity(total);
    let mut labels = Vec::with_capacity(total);
    for _ in 0..total {
        let s = gaussian_vector(spec.p, &mut rng).component_mul(&scales);
        let prob = 1.0 / (1.0 + (-s.dot(&truth)).exp());
        labels.push(if rng.random::<f64>() < prob { 1.0 } else { -1.0 });
        features.push(s);
    }
    (features, labels)
}

pub fn logistic(spec: LogisticSpec, seed: u64) -> PenaltyObjective {
    let top = Topology::random(spec.n, spec.p_c, seed).expect("connected sample");
    let w = WeightMatrix::metropolis(&top);
    let (features, labels) = logistic_data(&spec, seed);
    let locals = partition_logistic(&features, &labels, spec.n, spec.reg).expect("enough samples");
    PenaltyObjective::new(top, w, spec.alpha, locals).expect("valid instance")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_members_cover_ranges() {
        let specs: Vec<_> = (0..200).map(QuadraticSpec::suite_member).collect();
        assert!(specs.iter().all(|s| (3..=12).contains(&s.n) && (1..=4).contains(&s.p)));
        assert!(specs.iter().any(|s| s.cond > 500.0));
        for a in [0.1, 1.0, 10.0] {
            assert!(specs.iter().any(|s| s.alpha == a));
        }
    }

    #[test]
    fn random_spd_hits_requested_extremes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_spd(4, 1.0, 1e3, &mut rng);
        let eig = crate::linalg::eigenvalues(&a);
        assert!((eig[0] - 1.0).abs() < 1e-9 && (eig[3] - 1e3).abs() < 1e-9);
    }

    #[test]
    fn instances_are_deterministic() {
        let a = random_quadratic(4, QuadraticSpec::default());
        let b = random_quadratic(4, QuadraticSpec::default());
        let y = random_vector(a.dim(), 1);
        assert_eq!(a.eval(&y).unwrap().1, b.eval(&y).unwrap().1);
    }
}
