//! Dense symmetric-matrix kernels.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Pivot threshold for declaring a matrix not positive definite.
pub const PIVOT_FLOOR: f64 = 1e-12;

/// Symmetric matrix with a checked dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Input(format!("matrix is {}x{}, not square", m.nrows(), m.ncols())));
        }
        let scale = m.amax().max(1.0);
        for i in 0..m.nrows() {
            for j in 0..i {
                if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::Input(format!("matrix not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(SymMatrix(m))
    }

    pub fn identity(dim: usize) -> Self {
        SymMatrix(DMatrix::identity(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }
}

/// Lower Cholesky factor L with L·Lᵀ = m.
pub fn cholesky_lower(m: &SymMatrix) -> Result<DMatrix<f64>> {
    let a = m.as_matrix();
    let n = a.nrows();
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > PIVOT_FLOOR) {
            return Err(Error::NotPositiveDefinite { row: j, pivot: d });
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    Ok(l)
}

/// Inverse of a positive-definite matrix from its Cholesky factor.
pub fn spd_inverse(m: &SymMatrix) -> Result<DMatrix<f64>> {
    let l = cholesky_lower(m)?;
    let n = l.nrows();
    let mut inv = DMatrix::<f64>::identity(n, n);
    solve_lower_in_place(&l, &mut inv);
    solve_upper_transposed_in_place(&l, &mut inv);
    // symmetrize away rounding
    let t = inv.transpose();
    Ok((inv + t) * 0.5)
}

/// Solve L·X = B in place.
pub fn solve_lower_in_place(l: &DMatrix<f64>, b: &mut DMatrix<f64>) {
    let n = l.nrows();
    for c in 0..b.ncols() {
        for i in 0..n {
            let mut s = b[(i, c)];
            for k in 0..i {
                s -= l[(i, k)] * b[(k, c)];
            }
            b[(i, c)] = s / l[(i, i)];
        }
    }
}

/// Solve Lᵀ·X = B in place.
pub fn solve_upper_transposed_in_place(l: &DMatrix<f64>, b: &mut DMatrix<f64>) {
    let n = l.nrows();
    for c in 0..b.ncols() {
        for i in (0..n).rev() {
            let mut s = b[(i, c)];
            for k in (i + 1)..n {
                s -= l[(k, i)] * b[(k, c)];
            }
            b[(i, c)] = s / l[(i, i)];
        }
    }
}

/// Solve the SPD system a·x = b; `None` if `a` is not numerically PD.
pub fn solve_spd(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let l = cholesky_lower(&SymMatrix(a.clone())).ok()?;
    let mut x = DMatrix::from_column_slice(b.len(), 1, b.as_slice());
    solve_lower_in_place(&l, &mut x);
    solve_upper_transposed_in_place(&l, &mut x);
    Some(DVector::from_column_slice(x.as_slice()))
}

/// Eigen-decomposition with eigenvalues in descending order and
/// orthonormal eigenvectors as matching columns.
pub fn sym_eigen(m: &SymMatrix) -> (DVector<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m.as_matrix().clone());
    let n = m.dim();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

pub fn min_eigenvalue(m: &SymMatrix) -> f64 {
    SymmetricEigen::new(m.as_matrix().clone()).eigenvalues.min()
}

/// log det of a PD matrix from its lower Cholesky factor.
pub fn log_det_from_cholesky(l: &DMatrix<f64>) -> f64 {
    2.0 * l.diagonal().iter().map(|d| d.ln()).sum::<f64>()
}

/// Penalized least squares: argmin ‖y − Xb‖² + Σ penalty_k·b_k².
/// Returns `None` when the (penalized) Gram matrix is not numerically PD.
pub fn ridge(x: &DMatrix<f64>, y: &DVector<f64>, penalty: &[f64]) -> Option<DVector<f64>> {
    let mut gram = x.transpose() * x;
    for (k, pen) in penalty.iter().enumerate() {
        gram[(k, k)] += pen;
    }
    solve_spd(&gram, &(x.transpose() * y))
}

/// Ordinary least squares; falls back to a 1e-6 ridge on a singular design.
/// The flag reports whether the fallback was used.
pub fn least_squares(x: &DMatrix<f64>, y: &DVector<f64>) -> (DVector<f64>, bool) {
    let k = x.ncols();
    if k == 0 {
        return (DVector::zeros(0), false);
    }
    if let Some(b) = ridge(x, y, &vec![0.0; k]) {
        return (b, false);
    }
    let b = ridge(x, y, &vec![1e-6; k]).unwrap_or_else(|| DVector::zeros(k));
    (b, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Streams;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn sym(rows: &[&[f64]]) -> SymMatrix {
        let n = rows.len();
        SymMatrix::new(DMatrix::from_fn(n, n, |i, j| rows[i][j])).unwrap()
    }

    fn rel_frob(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        (a - b).norm() / b.norm().max(1e-300)
    }

    #[test]
    fn cholesky_examples() {
        assert_eq!(cholesky_lower(&SymMatrix::identity(4)).unwrap(), DMatrix::identity(4, 4));
        let l = cholesky_lower(&sym(&[&[4.0, 2.0], &[2.0, 5.0]])).unwrap();
        assert_eq!(l, DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 1.0, 2.0]));
        assert!(matches!(
            cholesky_lower(&sym(&[&[1.0, 1.0], &[1.0, 1.0]])),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn cholesky_round_trips_random_pd_matrices() {
        let mut rng = Streams::new(5).stream("chol", &[]);
        for _ in 0..100 {
            let n = rng.random_range(1..=30);
            let g = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
            let a = &g * g.transpose() + DMatrix::identity(n, n) * 0.1;
            let m = SymMatrix::new(a.clone()).unwrap();
            let l = cholesky_lower(&m).unwrap();
            for i in 0..n {
                assert!(l[(i, i)] > 0.0);
                for j in (i + 1)..n {
                    assert_eq!(l[(i, j)], 0.0);
                }
            }
            assert!(rel_frob(&(&l * l.transpose()), &a) < 1e-9);
        }
    }

    #[test]
    fn eigen_examples() {
        let (vals, _) = sym_eigen(&SymMatrix::identity(3));
        assert_eq!(vals.as_slice(), &[1.0, 1.0, 1.0]);
        let (vals, vecs) = sym_eigen(&sym(&[&[1.0, 0.0], &[0.0, 3.0]]));
        assert_abs_diff_eq!(vals[0], 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(vals[1], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(vecs[(1, 0)].abs(), 1.0, epsilon = 1e-14);
        let (vals, _) = sym_eigen(&sym(&[&[2.0, 1.0], &[1.0, 2.0]]));
        assert_abs_diff_eq!(vals[0], 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(vals[1], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn eigen_reconstructs_and_is_orthonormal() {
        let mut rng = Streams::new(8).stream("eig", &[]);
        for _ in 0..20 {
            let n = rng.random_range(2..20);
            let g = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
            let a = (&g + g.transpose()) * 0.5;
            let (vals, vecs) = sym_eigen(&SymMatrix::new(a.clone()).unwrap());
            for w in vals.as_slice().windows(2) {
                assert!(w[0] >= w[1]);
            }
            let rebuilt = &vecs * DMatrix::from_diagonal(&vals) * vecs.transpose();
            assert!(rel_frob(&rebuilt, &a) < 1e-8);
            let gram = vecs.transpose() * &vecs;
            assert!((gram - DMatrix::identity(n, n)).amax() < 1e-10);
        }
    }

    #[test]
    fn inverse_and_solve() {
        let m = sym(&[&[4.0, 2.0], &[2.0, 5.0]]);
        let inv = spd_inverse(&m).unwrap();
        let prod = m.as_matrix() * &inv;
        assert!((prod - DMatrix::identity(2, 2)).amax() < 1e-14);
        let x = solve_spd(m.as_matrix(), &DVector::from_vec(vec![1.0, 2.0])).unwrap();
        assert_abs_diff_eq!(4.0 * x[0] + 2.0 * x[1], 1.0, epsilon = 1e-14);
    }
}
