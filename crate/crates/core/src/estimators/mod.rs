//! Least squares and the two sum-of-norms estimators.

mod least_squares;
mod polish;
mod scalar;
mod subgradient;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SysidError};
use crate::lti::Trajectory;

pub use least_squares::{least_squares, least_squares_theta};
pub use polish::refit_polish;
pub use scalar::{solve_scalar_exact, ScalarEstimate};
pub use subgradient::{
    solve_subgradient, solve_subgradient_from, EstimationResult, SolverConfig, StopReason,
    WarmStart,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    /// Sum of squared residual norms.
    #[serde(alias = "ls")]
    LeastSquares,
    /// `Σ_t ‖r_t‖₂`.
    #[serde(alias = "l2")]
    GroupL2,
    /// `Σ_t ‖r_t‖₁`.
    #[serde(alias = "l1")]
    EntryL1,
}

impl EstimatorKind {
    /// Short label used in files and on the command line.
    pub fn label(self) -> &'static str {
        match self {
            EstimatorKind::LeastSquares => "ls",
            EstimatorKind::GroupL2 => "l2",
            EstimatorKind::EntryL1 => "l1",
        }
    }

    pub fn from_label(s: &str) -> Result<Self> {
        match s {
            "ls" | "least-squares" => Ok(EstimatorKind::LeastSquares),
            "l2" | "group-l2" => Ok(EstimatorKind::GroupL2),
            "l1" | "entry-l1" => Ok(EstimatorKind::EntryL1),
            other => Err(SysidError::InvalidParameter(format!("unknown estimator {other:?}"))),
        }
    }

    /// Norm applied to one residual column.
    pub fn column_norm(self, r: &[f64]) -> f64 {
        match self {
            EstimatorKind::LeastSquares => r.iter().map(|v| v * v).sum(),
            EstimatorKind::GroupL2 => r.iter().map(|v| v * v).sum::<f64>().sqrt(),
            EstimatorKind::EntryL1 => r.iter().map(|v| v.abs()).sum(),
        }
    }
}

/// `[A B]` as one `n x (n+m)` block.
pub fn join_theta(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, m) = (a.nrows(), b.ncols());
    let mut t = DMatrix::zeros(n, n + m);
    t.columns_mut(0, n).copy_from(a);
    if m > 0 {
        t.columns_mut(n, m).copy_from(b);
    }
    t
}

pub fn split_theta(theta: &DMatrix<f64>, n: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let m = theta.ncols() - n;
    (theta.columns(0, n).into_owned(), theta.columns(n, m).into_owned())
}

fn check_dims(traj: &Trajectory, a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<()> {
    let (n, m) = (traj.n(), traj.m());
    if a.shape() != (n, n) || b.shape() != (n, m) {
        return Err(SysidError::Dimension(format!(
            "estimate shapes A {:?}, B {:?} do not match n={n}, m={m}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}

/// Residual columns `d̂_i = x_{i+1} − A x_i − B u_i`, as an `n x T` matrix.
pub fn residuals(traj: &Trajectory, a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_dims(traj, a, b)?;
    Ok(residuals_theta(&traj.regressors(), &traj.targets(), &join_theta(a, b)))
}

pub(crate) fn residuals_theta(z: &DMatrix<f64>, y: &DMatrix<f64>, theta: &DMatrix<f64>) -> DMatrix<f64> {
    let mut r = y.clone();
    r.gemm(-1.0, theta, z, 1.0);
    r
}

pub(crate) fn objective_of_residuals(r: &DMatrix<f64>, kind: EstimatorKind) -> f64 {
    r.column_iter()
        .map(|c| kind.column_norm(c.as_slice()))
        .sum()
}

/// Exact estimator objective at `(A, B)`.
pub fn objective(traj: &Trajectory, a: &DMatrix<f64>, b: &DMatrix<f64>, kind: EstimatorKind) -> Result<f64> {
    Ok(objective_of_residuals(&residuals(traj, a, b)?, kind))
}

/// `‖Â − Ā‖_F`.
pub fn estimation_error(a_hat: &DMatrix<f64>, a_true: &DMatrix<f64>) -> Result<f64> {
    if a_hat.shape() != a_true.shape() {
        return Err(SysidError::Dimension(format!(
            "cannot compare {:?} with {:?}",
            a_hat.shape(),
            a_true.shape()
        )));
    }
    Ok((a_hat - a_true).norm())
}

/// `‖[Â B̂] − [Ā B̄]‖_F`.
pub fn estimation_error_joint(
    a_hat: &DMatrix<f64>,
    b_hat: &DMatrix<f64>,
    a_true: &DMatrix<f64>,
    b_true: &DMatrix<f64>,
) -> Result<f64> {
    if b_hat.shape() != b_true.shape() || a_hat.nrows() != b_hat.nrows() {
        return Err(SysidError::Dimension(format!(
            "cannot compare B {:?} with {:?}",
            b_hat.shape(),
            b_true.shape()
        )));
    }
    let ea = estimation_error(a_hat, a_true)?;
    let eb = (b_hat - b_true).norm();
    Ok((ea * ea + eb * eb).sqrt())
}

/// Fit `kind` on the trajectory: closed form for least squares, the
/// subgradient solver otherwise.
pub fn estimate(traj: &Trajectory, kind: EstimatorKind, config: &SolverConfig) -> Result<EstimationResult> {
    match kind {
        EstimatorKind::LeastSquares => {
            let (a, b) = least_squares(traj)?;
            EstimationResult::at(traj, a, b, kind, 0, StopReason::ClosedForm)
        }
        _ => solve_subgradient(traj, kind, config),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lti::{make_bernoulli, simulate, DisturbanceModel, InputPolicy, LtiSystem};
    use proptest::prelude::*;

    fn attacked(seed: u64, n: usize, m: usize, t: usize) -> (LtiSystem, Trajectory) {
        let a = DMatrix::from_fn(n, n, |i, j| if i == j { 0.5 } else { 0.1 / (1 + i + j) as f64 });
        let b = DMatrix::from_fn(n, m, |i, j| 1.0 / (1 + i + 2 * j) as f64);
        let sys = LtiSystem::new(a, b).unwrap();
        let policy = if m > 0 {
            InputPolicy::IidGaussian { xi: 1.0 }
        } else {
            InputPolicy::Zero
        };
        let sched = make_bernoulli(t, 0.3, seed).unwrap();
        let traj = simulate(&sys, &policy, &sched, &DisturbanceModel::default(), seed).unwrap();
        (sys, traj)
    }

    #[test]
    fn objective_at_truth_is_attack_mass() {
        let (sys, traj) = attacked(3, 3, 1, 100);
        for kind in [EstimatorKind::GroupL2, EstimatorKind::EntryL1] {
            let v = objective(&traj, sys.a(), sys.b(), kind).unwrap();
            let expect: f64 = traj
                .disturbances()
                .column_iter()
                .map(|c| kind.column_norm(c.as_slice()))
                .sum();
            assert!((v - expect).abs() <= 1e-12 * (1.0 + expect));
        }
    }

    #[test]
    fn objective_zero_without_attacks() {
        let sys = LtiSystem::autonomous(DMatrix::from_element(1, 1, 0.5)).unwrap();
        let traj = simulate(
            &sys,
            &InputPolicy::Zero,
            &crate::lti::AttackSchedule::empty(5),
            &DisturbanceModel::default(),
            0,
        )
        .unwrap();
        assert_eq!(objective(&traj, sys.a(), sys.b(), EstimatorKind::GroupL2).unwrap(), 0.0);
    }

    #[test]
    fn estimation_error_examples() {
        let a = DMatrix::from_row_slice(2, 2, &[0.1, 0.2, 0.3, 0.4]);
        assert_eq!(estimation_error(&a, &a).unwrap(), 0.0);
        let eps = 0.25;
        let shifted = &a + DMatrix::identity(2, 2) * eps;
        assert!((estimation_error(&shifted, &a).unwrap() - eps * 2f64.sqrt()).abs() < 1e-15);
        assert!(estimation_error(&a, &DMatrix::zeros(3, 3)).is_err());
    }

    #[test]
    fn estimation_error_matches_elementwise_oracle() {
        let a = DMatrix::from_fn(3, 3, |i, j| (i as f64 * 1.3 - j as f64 * 0.7).sin());
        let b = DMatrix::from_fn(3, 3, |i, j| (i as f64 * 0.4 + j as f64).cos());
        let mut acc = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                acc += (a[(i, j)] - b[(i, j)]).powi(2);
            }
        }
        assert!((estimation_error(&a, &b).unwrap() - acc.sqrt()).abs() < 1e-14);
        let bh = DMatrix::from_element(3, 1, 1.0);
        let bt = DMatrix::from_element(3, 1, 0.0);
        let joint = estimation_error_joint(&a, &bh, &b, &bt).unwrap();
        assert!((joint - (acc + 3.0).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn labels_roundtrip() {
        for k in [EstimatorKind::LeastSquares, EstimatorKind::GroupL2, EstimatorKind::EntryL1] {
            assert_eq!(EstimatorKind::from_label(k.label()).unwrap(), k);
        }
        assert!(EstimatorKind::from_label("l3").is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn objective_is_convex(seed in 0u64..1000, w in prop::collection::vec(-1.0f64..1.0, 24)) {
            let (_, traj) = attacked(seed, 3, 1, 40);
            let a1 = DMatrix::from_fn(3, 3, |i, j| w[3 * i + j]);
            let b1 = DMatrix::from_fn(3, 1, |i, _| w[9 + i]);
            let a2 = DMatrix::from_fn(3, 3, |i, j| w[12 + 3 * i + j] * 2.0);
            let b2 = DMatrix::from_fn(3, 1, |i, _| w[21 + i]);
            let am = (&a1 + &a2) * 0.5;
            let bm = (&b1 + &b2) * 0.5;
            for kind in [EstimatorKind::GroupL2, EstimatorKind::EntryL1, EstimatorKind::LeastSquares] {
                let f1 = objective(&traj, &a1, &b1, kind).unwrap();
                let f2 = objective(&traj, &a2, &b2, kind).unwrap();
                let fm = objective(&traj, &am, &bm, kind).unwrap();
                prop_assert!(fm <= 0.5 * (f1 + f2) + 1e-10 * (1.0 + f1 + f2));
            }
        }

        #[test]
        fn objective_is_positively_homogeneous(seed in 0u64..1000, c in 0.01f64..100.0, w in prop::collection::vec(-1.0f64..1.0, 12)) {
            let (_, traj) = attacked(seed, 3, 1, 30);
            let scaled = Trajectory::from_observations(traj.states() * c, traj.inputs() * c).unwrap();
            let a = DMatrix::from_fn(3, 3, |i, j| w[3 * i + j]);
            let b = DMatrix::from_fn(3, 1, |i, _| w[9 + i]);
            for kind in [EstimatorKind::GroupL2, EstimatorKind::EntryL1] {
                let f = objective(&traj, &a, &b, kind).unwrap();
                let fc = objective(&scaled, &a, &b, kind).unwrap();
                prop_assert!((fc - c * f).abs() <= 1e-10 * (1.0 + c * f));
            }
        }

        #[test]
        fn scalar_norms_coincide(xs in prop::collection::vec(-5.0f64..5.0, 2..30), a in -2.0f64..2.0) {
            let states = DMatrix::from_row_slice(1, xs.len(), &xs);
            let traj = Trajectory::from_observations(states, DMatrix::zeros(0, xs.len() - 1)).unwrap();
            let am = DMatrix::from_element(1, 1, a);
            let b = DMatrix::zeros(1, 0);
            let l2 = objective(&traj, &am, &b, EstimatorKind::GroupL2).unwrap();
            let l1 = objective(&traj, &am, &b, EstimatorKind::EntryL1).unwrap();
            prop_assert_eq!(l2, l1);
        }
    }
}
