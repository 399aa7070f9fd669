//! Small dense helpers shared by the model modules.

use nalgebra::{Cholesky, DMatrix, Dyn};

/// Pivot threshold below which a symmetric matrix is treated as singular.
pub const PIVOT_TOL: f64 = 1e-12;

pub(crate) fn row_vec(x: &DMatrix<f64>, i: usize) -> Vec<f64> {
    x.row(i).iter().copied().collect()
}

/// Active distance between rows `i` and `j` of `x`.
#[inline]
pub(crate) fn rows_distance(x: &DMatrix<f64>, i: usize, j: usize, active: &[usize]) -> f64 {
    active
        .iter()
        .map(|&a| {
            let diff = x[(i, a)] - x[(j, a)];
            diff * diff
        })
        .sum::<f64>()
        .sqrt()
}

/// Active distance between a free point `u` and row `j` of `x`.
#[inline]
pub(crate) fn point_distance(u: &[f64], x: &DMatrix<f64>, j: usize, active: &[usize]) -> f64 {
    active
        .iter()
        .map(|&a| {
            let diff = u[a] - x[(j, a)];
            diff * diff
        })
        .sum::<f64>()
        .sqrt()
}

pub(crate) fn row_equals(u: &[f64], x: &DMatrix<f64>, j: usize) -> bool {
    u.iter().enumerate().all(|(a, &v)| v == x[(j, a)])
}

/// Log-determinant of a symmetric matrix through an unpivoted LDLᵀ
/// decomposition. Returns `None` if any pivot is `<= PIVOT_TOL`, i.e. the
/// matrix is not (numerically) positive definite.
pub fn ldl_log_det(m: &DMatrix<f64>) -> Option<f64> {
    let n = m.nrows();
    let mut l = DMatrix::<f64>::identity(n, n);
    let mut d = vec![0.0; n];
    for j in 0..n {
        let mut dj = m[(j, j)];
        for k in 0..j {
            dj -= l[(j, k)] * l[(j, k)] * d[k];
        }
        if !(dj > PIVOT_TOL) {
            return None;
        }
        d[j] = dj;
        for i in j + 1..n {
            let mut v = m[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)] * d[k];
            }
            l[(i, j)] = v / dj;
        }
    }
    Some(d.iter().map(|v| v.ln()).sum())
}

/// Cholesky factor of a Gram matrix, or `None` when some pivot falls below
/// `1e-10` of its diagonal entry (numerically rank deficient).
pub(crate) fn gram_cholesky(g: DMatrix<f64>) -> Option<Cholesky<f64, Dyn>> {
    let diag = g.diagonal();
    let chol = g.cholesky()?;
    let l = chol.l_dirty();
    for i in 0..diag.len() {
        if !(l[(i, i)] * l[(i, i)] > 1e-10 * diag[i]) {
            return None;
        }
    }
    Some(chol)
}

/// Columns of `x` listed in `cols`, as a new matrix.
pub(crate) fn select_columns(x: &DMatrix<f64>, cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(x.nrows(), cols.len(), |i, j| x[(i, cols[j])])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ldl_matches_cholesky() {
        let m = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let chol = m.clone().cholesky().unwrap();
        let expected: f64 = chol.l().diagonal().iter().map(|v: &f64| 2.0 * v.ln()).sum();
        assert!((ldl_log_det(&m).unwrap() - expected).abs() < 1e-13);
    }

    #[test]
    fn ldl_rejects_indefinite() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(ldl_log_det(&m).is_none());
        let z = DMatrix::<f64>::zeros(2, 2);
        assert!(ldl_log_det(&z).is_none());
    }
}
