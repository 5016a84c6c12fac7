//! Small dense helpers for real tag matrices acting on complex vectors.

use nalgebra::DMatrix;
use num_complex::Complex64;

/// `B · v` for real `B` and complex `v`.
pub fn real_mat_cvec(b: &DMatrix<f64>, v: &[Complex64]) -> Vec<Complex64> {
    debug_assert_eq!(b.ncols(), v.len());
    let mut out = vec![Complex64::new(0.0, 0.0); b.nrows()];
    for (j, vj) in v.iter().enumerate() {
        if *vj == Complex64::new(0.0, 0.0) {
            continue;
        }
        for (i, o) in out.iter_mut().enumerate() {
            *o += b[(i, j)] * vj;
        }
    }
    out
}

/// `Bᵀ · v` for real `B` and complex `v`.
pub fn real_mat_t_cvec(b: &DMatrix<f64>, v: &[Complex64]) -> Vec<Complex64> {
    debug_assert_eq!(b.nrows(), v.len());
    (0..b.ncols())
        .map(|j| {
            b.column(j)
                .iter()
                .zip(v)
                .fold(Complex64::new(0.0, 0.0), |acc, (bij, vi)| acc + bij * vi)
        })
        .collect()
}

pub fn norm_sqr(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// Inverse of a symmetric positive-definite matrix, `None` when the Cholesky
/// factorization breaks down.
pub fn spd_inverse(g: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    g.clone().cholesky().map(|c| c.inverse())
}
