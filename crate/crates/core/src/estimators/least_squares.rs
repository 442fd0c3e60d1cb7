use nalgebra::DMatrix;

use super::split_theta;
use crate::error::{Result, SysidError};
use crate::linalg::min_norm_solve;
use crate::lti::Trajectory;

/// Joint least-squares fit of `[A B]`; minimum-norm when the regressors are
/// rank deficient.
pub fn least_squares(traj: &Trajectory) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if traj.horizon() == 0 {
        return Err(SysidError::InvalidParameter("least squares needs T >= 1".into()));
    }
    let theta = least_squares_theta(&traj.regressors(), &traj.targets());
    Ok(split_theta(&theta, traj.n()))
}

/// `argmin_Θ ‖Y − Θ Z‖_F` with minimum `‖Θ‖_F` (`Z` is `p x T`, `Y` is `n x T`).
pub fn least_squares_theta(z: &DMatrix<f64>, y: &DMatrix<f64>) -> DMatrix<f64> {
    min_norm_solve(&z.transpose(), &y.transpose()).transpose()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lti::{simulate, AttackSchedule, DisturbanceModel, InputPolicy, LtiSystem};

    #[test]
    fn exact_on_clean_exciting_data() {
        let a = DMatrix::from_row_slice(2, 2, &[0.6, 0.2, -0.3, 0.5]);
        let b = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.5, -1.0]);
        let sys = LtiSystem::new(a.clone(), b.clone()).unwrap();
        let traj = simulate(
            &sys,
            &InputPolicy::IidGaussian { xi: 1.0 },
            &AttackSchedule::empty(200),
            &DisturbanceModel::default(),
            4,
        )
        .unwrap();
        let (ah, bh) = least_squares(&traj).unwrap();
        assert!((ah - a).norm() <= 1e-8);
        assert!((bh - b).norm() <= 1e-8);
    }

    #[test]
    fn scalar_closed_form_oracle() {
        // x_{i+1} = 0.5 x_i + d_i with d_0 = 1, d_2 = 4
        let states = DMatrix::from_row_slice(1, 4, &[0.0, 1.0, 0.5, 4.25]);
        let traj = Trajectory::from_observations(states.clone(), DMatrix::zeros(0, 3)).unwrap();
        let (ah, _) = least_squares(&traj).unwrap();
        let x = states.row(0);
        let num: f64 = (0..3).map(|i| x[i] * x[i + 1]).sum();
        let den: f64 = (0..3).map(|i| x[i] * x[i]).sum();
        assert!((ah[(0, 0)] - num / den).abs() < 1e-14);
        assert!((ah[(0, 0)] - 2.1).abs() < 1e-12);
    }

    #[test]
    fn zero_regressor_gives_zero() {
        let traj = Trajectory::from_observations(DMatrix::zeros(2, 6), DMatrix::zeros(0, 5)).unwrap();
        let (ah, bh) = least_squares(&traj).unwrap();
        assert_eq!(ah, DMatrix::zeros(2, 2));
        assert_eq!(bh.shape(), (2, 0));
    }
}
