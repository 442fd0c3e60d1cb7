//! Support refit: least squares on the samples with the smallest residuals.
//!
//! Near an exact-recovery solution the clean samples have (close to) zero
//! residual, so refitting on them lands on the minimizer to machine precision
//! instead of the slow approach of the subgradient iterates. The refit is only
//! accepted when it lowers the objective.

use nalgebra::DMatrix;

use super::{least_squares_theta, residuals_theta, EstimatorKind};

const ROUNDS: usize = 4;
const FRACTIONS: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

/// Try to improve `theta` (`n x p`) for the `GroupL2` or `EntryL1` objective.
/// Returns the improved block and its objective, or `None`.
pub fn refit_polish(
    z: &DMatrix<f64>,
    y: &DMatrix<f64>,
    theta: &DMatrix<f64>,
    kind: EstimatorKind,
) -> Option<(DMatrix<f64>, f64)> {
    let n = y.nrows();
    match kind {
        EstimatorKind::GroupL2 => {
            let start = block_objective(z, y, theta);
            polish_block(z, y, theta, start)
        }
        EstimatorKind::EntryL1 => {
            // rows decouple under the entrywise norm
            let mut out = theta.clone();
            let mut improved = false;
            for l in 0..n {
                let yl = y.rows(l, 1).into_owned();
                let tl = theta.rows(l, 1).into_owned();
                let start = block_objective(z, &yl, &tl);
                if let Some((row, _)) = polish_block(z, &yl, &tl, start) {
                    out.set_row(l, &row.row(0));
                    improved = true;
                }
            }
            if !improved {
                return None;
            }
            let r = residuals_theta(z, y, &out);
            Some((out, super::objective_of_residuals(&r, kind)))
        }
        EstimatorKind::LeastSquares => None,
    }
}

/// `Σ_t ‖y_t − Θ z_t‖₂` for a row block.
fn block_objective(z: &DMatrix<f64>, y: &DMatrix<f64>, theta: &DMatrix<f64>) -> f64 {
    column_norms(&residuals_theta(z, y, theta)).iter().sum()
}

fn column_norms(r: &DMatrix<f64>) -> Vec<f64> {
    r.column_iter().map(|c| c.norm()).collect()
}

fn polish_block(
    z: &DMatrix<f64>,
    y: &DMatrix<f64>,
    theta: &DMatrix<f64>,
    start: f64,
) -> Option<(DMatrix<f64>, f64)> {
    let p = z.nrows();
    let t = z.ncols();
    if t <= p {
        return None;
    }
    let norms = column_norms(&residuals_theta(z, y, theta));
    let mut sizes: Vec<usize> = FRACTIONS
        .iter()
        .map(|f| (f * t as f64).round() as usize)
        .collect();
    if let Some(k) = gap_size(&norms, p) {
        sizes.push(k);
    }
    sizes.retain(|&k| k >= p && k <= t);
    sizes.sort_unstable();
    sizes.dedup();

    let mut best: Option<(DMatrix<f64>, f64)> = None;
    let mut best_val = start;
    for k in sizes {
        let mut cur = theta.clone();
        let mut prev_set: Vec<usize> = Vec::new();
        for _ in 0..ROUNDS {
            let set = smallest(&column_norms(&residuals_theta(z, y, &cur)), k);
            if set == prev_set {
                break;
            }
            let zs = z.select_columns(set.iter());
            let ys = y.select_columns(set.iter());
            cur = least_squares_theta(&zs, &ys);
            let val = block_objective(z, y, &cur);
            if val.is_finite() && val < best_val {
                best_val = val;
                best = Some((cur.clone(), val));
            }
            prev_set = set;
        }
    }
    best
}

/// Indices of the `k` smallest entries, ascending by index.
fn smallest(norms: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..norms.len()).collect();
    idx.sort_by(|&i, &j| norms[i].total_cmp(&norms[j]).then(i.cmp(&j)));
    idx.truncate(k);
    idx.sort_unstable();
    idx
}

/// Size of the prefix before the largest relative jump in the sorted norms.
fn gap_size(norms: &[f64], min_k: usize) -> Option<usize> {
    let mut s = norms.to_vec();
    s.sort_by(f64::total_cmp);
    let floor = 1e-12 * (1.0 + s.last().copied().unwrap_or(0.0));
    let mut best = (1.0, None);
    for j in min_k.saturating_sub(1)..s.len().saturating_sub(1) {
        let ratio = (s[j + 1] + floor) / (s[j] + floor);
        if ratio > best.0 {
            best = (ratio, Some(j + 1));
        }
    }
    best.1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_from_a_nearby_point() {
        // y = 2 z except three corrupted samples
        let zs: Vec<f64> = (0..20).map(|i| ((i * 7 % 11) as f64) - 5.0).collect();
        let z = DMatrix::from_row_slice(1, 20, &zs);
        let mut y = &z * 2.0;
        y[(0, 3)] += 10.0;
        y[(0, 9)] -= 7.0;
        y[(0, 15)] += 4.0;
        let start = DMatrix::from_element(1, 1, 2.05);
        for kind in [EstimatorKind::GroupL2, EstimatorKind::EntryL1] {
            let (theta, val) = refit_polish(&z, &y, &start, kind).unwrap();
            assert!((theta[(0, 0)] - 2.0).abs() < 1e-12);
            assert!((val - 21.0).abs() < 1e-12);
        }
    }

    #[test]
    fn never_accepts_a_worse_point() {
        let z = DMatrix::from_row_slice(1, 6, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let y = &z * 0.5;
        let exact = DMatrix::from_element(1, 1, 0.5);
        assert!(refit_polish(&z, &y, &exact, EstimatorKind::GroupL2).is_none());
    }

    #[test]
    fn gap_rule_finds_the_jump() {
        let norms = [1e-15, 3.0, 0.0, 2e-15, 4.0];
        assert_eq!(gap_size(&norms, 1), Some(3));
    }
}
