use crate::error::{Result, SysidError};
use crate::lti::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarEstimate {
    pub a_hat: f64,
    pub objective: f64,
    /// Every `x_i` was zero, so every `a` is optimal.
    pub degenerate: bool,
}

/// Exact minimizer of `Σ_i |x_{i+1} − a x_i|` for a scalar autonomous system.
///
/// With `r_i = x_{i+1}/x_i` and weights `|x_i|` the objective is
/// `Σ |x_i| |r_i − a|` plus a constant, so the minimizers are the weighted
/// medians of the `r_i`. The smallest one is returned.
pub fn solve_scalar_exact(traj: &Trajectory) -> Result<ScalarEstimate> {
    if traj.n() != 1 || traj.m() != 0 {
        return Err(SysidError::Dimension(format!(
            "scalar solver needs n=1, m=0, got n={}, m={}",
            traj.n(),
            traj.m()
        )));
    }
    let x = traj.states().row(0);
    let t = traj.horizon();
    let mut pts: Vec<(f64, f64)> = (0..t)
        .filter(|&i| x[i] != 0.0)
        .map(|i| (x[i + 1] / x[i], x[i].abs()))
        .collect();
    let objective_at = |a: f64| (0..t).map(|i| (x[i + 1] - a * x[i]).abs()).sum::<f64>();
    if pts.is_empty() {
        return Ok(ScalarEstimate {
            a_hat: 0.0,
            objective: objective_at(0.0),
            degenerate: true,
        });
    }
    pts.sort_by(|p, q| p.0.total_cmp(&q.0));
    let total: f64 = pts.iter().map(|p| p.1).sum();
    let mut below = 0.0;
    let mut a_hat = pts[pts.len() - 1].0;
    for &(r, w) in &pts {
        below += w;
        // left slope becomes non-negative here
        if below >= total - below {
            a_hat = r;
            break;
        }
    }
    Ok(ScalarEstimate {
        a_hat,
        objective: objective_at(a_hat),
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn traj(xs: &[f64]) -> Trajectory {
        Trajectory::from_observations(DMatrix::from_row_slice(1, xs.len(), xs), DMatrix::zeros(0, xs.len() - 1))
            .unwrap()
    }

    fn grid_min(xs: &[f64], lo: f64, hi: f64, step: f64) -> (f64, f64) {
        let mut best = (f64::INFINITY, lo);
        let steps = ((hi - lo) / step).round() as usize;
        for k in 0..=steps {
            let a = lo + k as f64 * step;
            let f: f64 = xs.windows(2).map(|w| (w[1] - a * w[0]).abs()).sum();
            if f < best.0 {
                best = (f, a);
            }
        }
        best
    }

    #[test]
    fn single_attack_is_absorbed() {
        let est = solve_scalar_exact(&traj(&[0.0, 0.0, 4.0, 2.0])).unwrap();
        assert_eq!(est.a_hat, 0.5);
        assert_eq!(est.objective, 4.0);
        assert!(!est.degenerate);
    }

    #[test]
    fn ls_fails_where_exact_recovers() {
        let xs = [0.0, 1.0, 0.5, 4.25];
        let est = solve_scalar_exact(&traj(&xs)).unwrap();
        assert_eq!(est.a_hat, 0.5);
        let (ls, _) = crate::estimators::least_squares(&traj(&xs)).unwrap();
        assert!((ls[(0, 0)] - 0.5).abs() > 1.0);
    }

    #[test]
    fn clean_data_recovers_exactly() {
        for &a in &[-0.9, -0.3, 0.0, 0.42, 0.95] {
            let mut xs = vec![1.0];
            for _ in 0..5 {
                let last = *xs.last().unwrap();
                xs.push(a * last);
            }
            assert_eq!(solve_scalar_exact(&traj(&xs)).unwrap().a_hat, a);
        }
    }

    #[test]
    fn degenerate_all_zero() {
        let est = solve_scalar_exact(&traj(&[0.0, 0.0, 0.0, 3.0])).unwrap();
        assert!(est.degenerate);
        assert_eq!(est.a_hat, 0.0);
        assert_eq!(est.objective, 3.0);
    }

    #[test]
    fn lemma2_violation_grid_agrees() {
        // one clean step then repeated aligned pushes
        let xs = [1.0, 0.5, 3.0, 5.0, 7.0, 9.0];
        let est = solve_scalar_exact(&traj(&xs)).unwrap();
        assert!((est.a_hat - 0.5).abs() > 0.1);
        let (fmin, _) = grid_min(&xs, -2.0, 2.0, 1e-4);
        assert!(est.objective <= fmin + 1e-12);
    }

    #[test]
    fn ties_go_to_smallest_breakpoint() {
        // r = 1 (w 1) and r = 3 (w 1): every a in [1,3] is optimal
        let est = solve_scalar_exact(&traj(&[1.0, 1.0, 3.0])).unwrap();
        assert_eq!(est.a_hat, 1.0);
        let xs = [1.0, 1.0, 3.0];
        let f = |a: f64| xs.windows(2).map(|w| (w[1] - a * w[0]).abs()).sum::<f64>();
        assert_eq!(f(1.0), f(2.0));
    }

    #[test]
    fn rejects_vector_systems() {
        let t = Trajectory::from_observations(DMatrix::zeros(2, 3), DMatrix::zeros(0, 2)).unwrap();
        assert!(solve_scalar_exact(&t).is_err());
    }

    proptest! {
        #[test]
        fn matches_brute_force_grid(xs in prop::collection::vec(-3.0f64..3.0, 2..12)) {
            let est = solve_scalar_exact(&traj(&xs)).unwrap();
            let (fmin, _) = grid_min(&xs, -10.0, 10.0, 1e-3);
            prop_assert!(est.objective <= fmin + 1e-9);
            // no breakpoint does better
            for w in xs.windows(2) {
                if w[0] != 0.0 {
                    let a = w[1] / w[0];
                    let f: f64 = xs.windows(2).map(|v| (v[1] - a * v[0]).abs()).sum();
                    prop_assert!(est.objective <= f + 1e-9 * (1.0 + f));
                }
            }
        }
    }
}
