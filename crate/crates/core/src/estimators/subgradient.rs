use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{
    join_theta, least_squares_theta, objective_of_residuals, refit_polish, residuals_theta,
    split_theta, EstimatorKind,
};
use crate::certificates::{kkt_certificate, KktOptions, Verdict};
use crate::error::{Result, SysidError};
use crate::lti::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum WarmStart {
    Zero,
    #[default]
    LeastSquares,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Step scale; `None` uses `1 / mean_t ‖(x_t, u_t)‖²`.
    pub eta0: Option<f64>,
    /// Relative tolerance for the zero-objective shortcut.
    pub tol: f64,
    pub warm_start: WarmStart,
    /// Return the best iterate (otherwise the last one).
    pub track: bool,
    /// Run the support refit at the start and after every `check_every` steps.
    pub polish: bool,
    /// Certify the best iterate every `check_every` steps; 0 disables.
    pub check_every: usize,
    /// Record the best objective every `log_every` steps.
    pub log_every: usize,
    pub support_tol: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iters: 20_000,
            eta0: None,
            tol: 1e-12,
            warm_start: WarmStart::LeastSquares,
            track: true,
            polish: true,
            check_every: 500,
            log_every: 100,
            support_tol: None,
        }
    }
}

impl SolverConfig {
    /// Plain subgradient descent: no refit, no certificate checks.
    pub fn plain(max_iters: usize) -> Self {
        Self {
            max_iters,
            polish: false,
            check_every: 0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(e) = self.eta0 {
            if !(e > 0.0) || !e.is_finite() {
                return Err(SysidError::InvalidParameter(format!("eta0 must be > 0, got {e}")));
            }
        }
        if !(self.tol >= 0.0) {
            return Err(SysidError::InvalidParameter(format!("tol must be >= 0, got {}", self.tol)));
        }
        if self.log_every == 0 {
            return Err(SysidError::InvalidParameter("log_every must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    ClosedForm,
    ZeroObjective,
    Certified,
    MaxIters,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimationResult {
    pub a_hat: DMatrix<f64>,
    /// `n x 0` for autonomous systems.
    pub b_hat: DMatrix<f64>,
    pub kind: EstimatorKind,
    pub objective: f64,
    /// Implied disturbances, one column per step.
    pub residuals: DMatrix<f64>,
    pub iterations_used: usize,
    /// Best objective at every logging interval (non-increasing when tracking).
    pub trace: Vec<f64>,
    pub stop: StopReason,
}

impl EstimationResult {
    pub(crate) fn at(
        traj: &Trajectory,
        a_hat: DMatrix<f64>,
        b_hat: DMatrix<f64>,
        kind: EstimatorKind,
        iterations_used: usize,
        stop: StopReason,
    ) -> Result<Self> {
        let residuals = super::residuals(traj, &a_hat, &b_hat)?;
        let objective = objective_of_residuals(&residuals, kind);
        Ok(Self {
            a_hat,
            b_hat,
            kind,
            objective,
            residuals,
            iterations_used,
            trace: vec![objective],
            stop,
        })
    }
}

pub fn solve_subgradient(traj: &Trajectory, kind: EstimatorKind, config: &SolverConfig) -> Result<EstimationResult> {
    let (z, y) = (traj.regressors(), traj.targets());
    let init = match config.warm_start {
        WarmStart::Zero => DMatrix::zeros(traj.n(), z.nrows()),
        WarmStart::LeastSquares => least_squares_theta(&z, &y),
    };
    run(traj, &z, &y, kind, config, init)
}

/// Same as [`solve_subgradient`] but starting from a given `(A, B)`.
pub fn solve_subgradient_from(
    traj: &Trajectory,
    kind: EstimatorKind,
    config: &SolverConfig,
    a0: &DMatrix<f64>,
    b0: &DMatrix<f64>,
) -> Result<EstimationResult> {
    if a0.shape() != (traj.n(), traj.n()) || b0.shape() != (traj.n(), traj.m()) {
        return Err(SysidError::Dimension("initial point does not match the trajectory".into()));
    }
    run(traj, &traj.regressors(), &traj.targets(), kind, config, join_theta(a0, b0))
}

struct Best {
    theta: DMatrix<f64>,
    value: f64,
}

fn run(
    traj: &Trajectory,
    z: &DMatrix<f64>,
    y: &DMatrix<f64>,
    kind: EstimatorKind,
    config: &SolverConfig,
    init: DMatrix<f64>,
) -> Result<EstimationResult> {
    if kind == EstimatorKind::LeastSquares {
        return Err(SysidError::InvalidParameter(
            "the subgradient solver handles group-l2 and entry-l1 only".into(),
        ));
    }
    config.validate()?;
    let n = traj.n();
    let t = z.ncols();
    if t == 0 {
        return Err(SysidError::InvalidParameter("trajectory has no transitions".into()));
    }
    let mean_sq = z.iter().map(|v| v * v).sum::<f64>() / t as f64;
    let eta0 = config.eta0.unwrap_or(if mean_sq > 0.0 { 1.0 / mean_sq } else { 1.0 });
    let zero_level = config.tol * y.column_iter().map(|c| kind.column_norm(c.as_slice())).sum::<f64>();

    let value_of = |theta: &DMatrix<f64>| objective_of_residuals(&residuals_theta(z, y, theta), kind);
    let certify = |theta: &DMatrix<f64>| -> Result<bool> {
        let (a, b) = split_theta(theta, n);
        let opts = KktOptions {
            support_tol: config.support_tol,
            ..KktOptions::default()
        };
        Ok(kkt_certificate(traj, &a, &b, kind, &opts)?.verdict == Verdict::Optimal)
    };
    let finish = |best: &Best, last: DMatrix<f64>, iters: usize, trace: Vec<f64>, stop: StopReason| {
        let theta = if config.track { best.theta.clone() } else { last };
        let (a, b) = split_theta(&theta, n);
        let mut res = EstimationResult::at(traj, a, b, kind, iters, stop)?;
        res.trace = trace;
        Ok(res)
    };

    let mut theta = init;
    let start = value_of(&theta);
    if !start.is_finite() {
        return Err(SysidError::Diverged { iteration: 0 });
    }
    let mut best = Best {
        theta: theta.clone(),
        value: start,
    };
    let mut trace = vec![best.value];

    if best.value <= zero_level {
        return finish(&best, theta, 0, trace, StopReason::ZeroObjective);
    }
    if config.polish {
        if let Some((p, v)) = refit_polish(z, y, &best.theta, kind) {
            best = Best { theta: p.clone(), value: v };
            theta = p;
        }
    }
    if config.check_every > 0 && certify(&best.theta)? {
        return finish(&best, theta, 0, vec![best.value], StopReason::Certified);
    }

    let mut g = DMatrix::zeros(n, t);
    let mut last_polished = f64::NAN;
    for k in 0..config.max_iters {
        let r = residuals_theta(z, y, &theta);
        let value = objective_of_residuals(&r, kind);
        if !value.is_finite() {
            return Err(SysidError::Diverged { iteration: k });
        }
        if value < best.value {
            best = Best {
                theta: theta.clone(),
                value,
            };
        }
        if k > 0 && k % config.log_every == 0 {
            trace.push(best.value);
        }
        if best.value <= zero_level {
            trace.push(best.value);
            return finish(&best, theta, k, trace, StopReason::ZeroObjective);
        }
        if config.check_every > 0 && k > 0 && k % config.check_every == 0 && best.value != last_polished {
            if config.polish {
                if let Some((p, v)) = refit_polish(z, y, &best.theta, kind) {
                    best = Best { theta: p.clone(), value: v };
                    theta = p;
                }
            }
            last_polished = best.value;
            if certify(&best.theta)? {
                trace.push(best.value);
                return finish(&best, theta, k, trace, StopReason::Certified);
            }
        }

        subgradient_directions(&r, kind, &mut g);
        let step = eta0 / ((k + 1) as f64).sqrt() / t as f64;
        // theta += step * g zᵀ
        theta.gemm(step, &g, &z.transpose(), 1.0);
    }
    let final_value = value_of(&theta);
    if !final_value.is_finite() {
        return Err(SysidError::Diverged {
            iteration: config.max_iters,
        });
    }
    if final_value < best.value {
        best = Best {
            theta: theta.clone(),
            value: final_value,
        };
    }
    trace.push(best.value);
    finish(&best, theta, config.max_iters, trace, StopReason::MaxIters)
}

/// Column-wise minimal-norm subgradient of the per-step norm.
fn subgradient_directions(r: &DMatrix<f64>, kind: EstimatorKind, g: &mut DMatrix<f64>) {
    for (rc, mut gc) in r.column_iter().zip(g.column_iter_mut()) {
        match kind {
            EstimatorKind::GroupL2 => {
                let norm = rc.norm();
                if norm > 0.0 {
                    gc.copy_from(&(rc / norm));
                } else {
                    gc.fill(0.0);
                }
            }
            _ => {
                for (gv, rv) in gc.iter_mut().zip(rc.iter()) {
                    *gv = if *rv > 0.0 {
                        1.0
                    } else if *rv < 0.0 {
                        -1.0
                    } else {
                        0.0
                    };
                }
            }
        }
    }
}
