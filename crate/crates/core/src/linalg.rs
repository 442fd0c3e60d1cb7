//! Small dense helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Result, SysidError};

const SCHUR_MAX_ITERS: usize = 10_000;

/// Eigenvalues of a real square matrix (Hessenberg reduction + shifted QR).
pub fn eigenvalues(a: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    if !a.is_square() {
        return Err(SysidError::Dimension(format!(
            "eigenvalues need a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let n = a.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(SysidError::InvalidParameter("matrix has non-finite entries".into()));
    }
    let schur = nalgebra::Schur::try_new(a.clone(), f64::EPSILON, SCHUR_MAX_ITERS)
        .ok_or(SysidError::EigenNoConvergence { n })?;
    Ok(schur
        .complex_eigenvalues()
        .iter()
        .map(|z| Complex64::new(z.re, z.im))
        .collect())
}

/// Largest eigenvalue magnitude.
pub fn spectral_radius(a: &DMatrix<f64>) -> Result<f64> {
    Ok(eigenvalues(a)?
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max))
}

/// Minimum-norm least-squares solution of `m * x = rhs` (columns of `rhs` solved jointly).
pub fn min_norm_solve(m: &DMatrix<f64>, rhs: &DMatrix<f64>) -> DMatrix<f64> {
    let cols = m.ncols();
    if m.nrows() == 0 || cols == 0 {
        return DMatrix::zeros(cols, rhs.ncols());
    }
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return DMatrix::zeros(cols, rhs.ncols());
    }
    let eps = smax * (m.nrows().max(cols) as f64) * f64::EPSILON;
    svd.solve(rhs, eps)
        .unwrap_or_else(|_| DMatrix::zeros(cols, rhs.ncols()))
}

pub fn frobenius(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn max_abs(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

/// Row-major nested vectors, the JSON layout used for every matrix on disk.
pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

pub fn from_rows(rows: &[Vec<f64>], ncols: usize, what: &str) -> Result<DMatrix<f64>> {
    for (i, r) in rows.iter().enumerate() {
        if r.len() != ncols {
            return Err(SysidError::Dimension(format!(
                "{what}: row {i} has {} entries, expected {ncols}",
                r.len()
            )));
        }
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn radius_of_diagonal() {
        let a = DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, -0.9]);
        assert_relative_eq!(spectral_radius(&a).unwrap(), 0.9, max_relative = 1e-12);
    }

    #[test]
    fn radius_from_characteristic_polynomial() {
        // lambda^2 + 0.25 = 0
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -0.25, 0.0]);
        assert_relative_eq!(spectral_radius(&a).unwrap(), 0.5, max_relative = 1e-12);
    }

    #[test]
    fn radius_of_scaled_rotation() {
        let th: f64 = 0.7;
        let a = DMatrix::from_row_slice(
            2,
            2,
            &[0.8 * th.cos(), -0.8 * th.sin(), 0.8 * th.sin(), 0.8 * th.cos()],
        );
        assert_relative_eq!(spectral_radius(&a).unwrap(), 0.8, max_relative = 1e-10);
    }

    #[test]
    fn radius_of_jordan_block_and_companion() {
        let a = DMatrix::from_row_slice(3, 3, &[0.9, 1.0, 0.0, 0.0, 0.9, 1.0, 0.0, 0.0, 0.9]);
        assert_relative_eq!(spectral_radius(&a).unwrap(), 0.9, max_relative = 1e-5);
        // roots 0.5, -0.4, 0.2 -> x^3 - 0.3x^2 - 0.18x + 0.04
        let c = DMatrix::from_row_slice(3, 3, &[0.3, 0.18, -0.04, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        assert_relative_eq!(spectral_radius(&c).unwrap(), 0.5, max_relative = 1e-10);
    }

    #[test]
    fn non_square_is_rejected() {
        assert!(spectral_radius(&DMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn min_norm_handles_rank_deficiency() {
        let m = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 2.0, 2.0, 3.0, 3.0]);
        let rhs = DMatrix::from_column_slice(3, 1, &[2.0, 4.0, 6.0]);
        let x = min_norm_solve(&m, &rhs);
        assert_relative_eq!(x[(0, 0)], 1.0, epsilon = 1e-12);
        assert_relative_eq!(x[(1, 0)], 1.0, epsilon = 1e-12);
        let z = min_norm_solve(&DMatrix::zeros(4, 2), &DMatrix::zeros(4, 1));
        assert_eq!(z, DMatrix::zeros(2, 1));
    }
}
