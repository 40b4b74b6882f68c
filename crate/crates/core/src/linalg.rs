//! Dense symmetric helpers. Every square root, inverse square root and
//! spectral norm goes through one symmetric eigendecomposition.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Eigenvalues in ascending order with matching eigenvector columns.
#[derive(Debug, Clone)]
pub struct SymEig {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

impl SymEig {
    pub fn new(a: &Matrix) -> Self {
        let sym = symmetrize(a);
        let eig = sym.symmetric_eigen();
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vectors = Matrix::from_fn(a.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
        Self { values, vectors }
    }

    pub fn min(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn max(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    /// Rebuilds `V diag(f(values)) Vᵀ`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for c in 0..n {
            let s = f(self.values[c]);
            for r in 0..n {
                scaled[(r, c)] *= s;
            }
        }
        symmetrize(&(scaled * self.vectors.transpose()))
    }
}

pub fn symmetrize(a: &Matrix) -> Matrix {
    (a + a.transpose()) * 0.5
}

pub fn eigenvalues(a: &Matrix) -> Vec<f64> {
    SymEig::new(a).values
}

/// Principal square root of a positive semidefinite matrix.
pub fn sqrt_psd(a: &Matrix) -> Matrix {
    SymEig::new(a).map(|v| v.max(0.0).sqrt())
}

/// Inverse principal square root of a positive definite matrix.
pub fn inv_sqrt_pd(a: &Matrix, what: &str) -> Result<Matrix> {
    let eig = SymEig::new(a);
    if eig.min() <= 0.0 {
        return Err(Error::NotPositiveDefinite(format!(
            "{what}: smallest eigenvalue {:e}",
            eig.min()
        )));
    }
    Ok(eig.map(|v| 1.0 / v.sqrt()))
}

/// Spectral norm of a symmetric matrix.
pub fn sym_norm(a: &Matrix) -> f64 {
    let eig = SymEig::new(a);
    eig.min().abs().max(eig.max().abs())
}

/// Spectral norm of an arbitrary matrix (largest singular value).
pub fn op_norm(a: &Matrix) -> f64 {
    SymEig::new(&(a.transpose() * a)).max().max(0.0).sqrt()
}

/// Moore-Penrose pseudo-inverse of a symmetric PSD matrix; eigenvalues below
/// `cutoff` relative to the largest are treated as zero.
pub fn pinv_psd(a: &Matrix, cutoff: f64) -> Matrix {
    let eig = SymEig::new(a);
    let thresh = cutoff * eig.max().abs().max(f64::MIN_POSITIVE);
    eig.map(|v| if v.abs() > thresh { 1.0 / v } else { 0.0 })
}

pub fn solve_spd(a: &Matrix, b: &Vector, what: &str) -> Result<Vector> {
    a.clone()
        .cholesky()
        .map(|c| c.solve(b))
        .ok_or_else(|| Error::NotPositiveDefinite(what.to_string()))
}

/// Concatenates per-node blocks into one stacked vector.
pub fn stack(blocks: &[Vector]) -> Vector {
    let len = blocks.iter().map(|b| b.len()).sum();
    let mut out = Vector::zeros(len);
    let mut off = 0;
    for b in blocks {
        out.rows_mut(off, b.len()).copy_from(b);
        off += b.len();
    }
    out
}

pub fn unstack(v: &Vector, p: usize) -> Vec<Vector> {
    (0..v.len() / p).map(|i| v.rows(i * p, p).into_owned()).collect()
}

/// Assembles a block-diagonal matrix from square blocks.
pub fn block_diag(blocks: &[Matrix]) -> Matrix {
    let dim = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = Matrix::zeros(dim, dim);
    let mut off = 0;
    for b in blocks {
        out.view_mut((off, off), (b.nrows(), b.ncols())).copy_from(b);
        off += b.nrows();
    }
    out
}

/// `W ⊗ I_p`.
pub fn kron_identity(w: &Matrix, p: usize) -> Matrix {
    let n = w.nrows();
    Matrix::from_fn(n * p, n * p, |r, c| {
        if r % p == c % p {
            w[(r / p, c / p)]
        } else {
            0.0
        }
    })
}

/// Least-squares slope of `ln(values)` against the index, returned as a
/// per-step factor. Non-positive entries are skipped.
pub fn fitted_rate(values: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = values
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_finite() && **v > 0.0)
        .map(|(i, v)| (i as f64, v.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| (sxy / sxx).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn eig_is_sorted_and_reconstructs() {
        let a = Matrix::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 2.0]);
        let eig = SymEig::new(&a);
        assert!(eig.values.windows(2).all(|w| w[0] <= w[1]));
        let back = eig.map(|v| v);
        assert_abs_diff_eq!(back, a, epsilon = 1e-12);
    }

    #[test]
    fn sqrt_squares_back() {
        let a = Matrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let r = sqrt_psd(&a);
        assert_abs_diff_eq!(&r * &r, a, epsilon = 1e-12);
        let ir = inv_sqrt_pd(&a, "a").unwrap();
        assert_abs_diff_eq!(&ir * &a * &ir, Matrix::identity(2, 2), epsilon = 1e-12);
    }

    #[test]
    fn inv_sqrt_rejects_singular() {
        let a = Matrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(inv_sqrt_pd(&a, "a"), Err(Error::NotPositiveDefinite(_))));
    }

    #[test]
    fn pinv_of_rank_one() {
        let a = Matrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let p = pinv_psd(&a, 1e-12);
        assert_abs_diff_eq!(&a * &p * &a, a, epsilon = 1e-12);
    }

    #[test]
    fn kron_layout() {
        let w = Matrix::from_row_slice(2, 2, &[0.5, 0.5, 0.5, 0.5]);
        let z = kron_identity(&w, 2);
        assert_eq!(z[(0, 2)], 0.5);
        assert_eq!(z[(0, 3)], 0.0);
        assert_eq!(z[(1, 3)], 0.5);
    }

    #[test]
    fn fitted_rate_of_geometric_sequence() {
        let v: Vec<f64> = (0..20).map(|k| 3.0 * 0.5f64.powi(k)).collect();
        assert_abs_diff_eq!(fitted_rate(&v).unwrap(), 0.5, epsilon = 1e-12);
    }
}
