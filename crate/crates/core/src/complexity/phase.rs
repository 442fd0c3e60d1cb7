//! Monte-Carlo recovery curves over a grid of horizons.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SysidError};
use crate::estimators::{estimate, estimation_error_joint, solve_scalar_exact, EstimatorKind, SolverConfig, StopReason};
use crate::lti::{
    make_bernoulli, make_delta_spaced, simulate, AttackSchedule, DisturbanceModel, InputPolicy, LtiSystem,
    SystemSource,
};
use crate::rng::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AttackPattern {
    None,
    Bernoulli { p: f64 },
    DeltaSpaced {
        spacing: usize,
        #[serde(default = "first_one")]
        first: usize,
    },
}

fn first_one() -> usize {
    1
}

impl AttackPattern {
    pub fn schedule(&self, horizon: usize, seed: u64) -> Result<AttackSchedule> {
        match *self {
            AttackPattern::None => Ok(AttackSchedule::empty(horizon)),
            AttackPattern::Bernoulli { p } => make_bernoulli(horizon, p, seed),
            AttackPattern::DeltaSpaced { spacing, first } => make_delta_spaced(horizon, spacing, first),
        }
    }
}

fn default_delta() -> f64 {
    0.1
}

fn default_estimator() -> EstimatorKind {
    EstimatorKind::GroupL2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseScenario {
    pub system: SystemSource,
    pub attack: AttackPattern,
    #[serde(default)]
    pub disturbance: DisturbanceModel,
    #[serde(default)]
    pub input: InputPolicy,
    #[serde(default = "default_estimator")]
    pub estimator: EstimatorKind,
    #[serde(default)]
    pub solver: SolverConfig,
    /// Target failure probability; the threshold needs success `≥ 1 − delta`.
    #[serde(default = "default_delta")]
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub horizon: usize,
    pub successes: usize,
    pub certified: usize,
    pub trials: usize,
    pub success_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseCurve {
    pub points: Vec<PhasePoint>,
    /// Smallest horizon whose success rate reaches `1 − delta`.
    pub threshold: Option<usize>,
    pub recovery_tol: f64,
}

/// Scalar autonomous instances under a sum-of-norms objective use the exact solver.
fn uses_scalar_solver(sys: &LtiSystem, kind: EstimatorKind) -> bool {
    sys.n() == 1 && sys.m() == 0 && kind != EstimatorKind::LeastSquares
}

pub fn default_recovery_tol(sys: &LtiSystem, kind: EstimatorKind) -> f64 {
    if uses_scalar_solver(sys, kind) {
        1e-9
    } else {
        1e-3 * (1.0 + sys.a().norm())
    }
}

/// One simulate → estimate → certify pass; returns `(error, certified)`.
fn run_trial(sys: &LtiSystem, sc: &PhaseScenario, horizon: usize, seed: u64) -> Result<(f64, bool)> {
    let schedule = sc.attack.schedule(horizon, seed)?;
    let traj = simulate(sys, &sc.input, &schedule, &sc.disturbance, seed)?;
    if uses_scalar_solver(sys, sc.estimator) {
        let est = solve_scalar_exact(&traj)?;
        return Ok(((est.a_hat - sys.a()[(0, 0)]).abs(), !est.degenerate));
    }
    let est = estimate(&traj, sc.estimator, &sc.solver)?;
    let err = estimation_error_joint(&est.a_hat, &est.b_hat, sys.a(), sys.b())?;
    let certified = matches!(
        est.stop,
        StopReason::Certified | StopReason::ZeroObjective | StopReason::ClosedForm
    );
    Ok((err, certified))
}

/// Success fraction at each horizon. Trial `j` uses the seed derived from
/// `(seed, j)` at every horizon, so one trial's trajectories are prefixes of
/// each other; trials run in parallel and are aggregated by counting.
pub fn phase_transition(
    scenario: &PhaseScenario,
    t_grid: &[usize],
    trials: usize,
    recovery_tol: Option<f64>,
    seed: u64,
) -> Result<PhaseCurve> {
    if trials == 0 {
        return Err(SysidError::InvalidParameter("trials must be at least 1".into()));
    }
    if t_grid.is_empty() || t_grid.contains(&0) {
        return Err(SysidError::InvalidParameter("horizon grid must be non-empty and positive".into()));
    }
    if !(scenario.delta > 0.0 && scenario.delta <= 1.0) {
        return Err(SysidError::InvalidParameter(format!("delta must lie in (0,1], got {}", scenario.delta)));
    }
    scenario.solver.validate()?;
    let sys = scenario.system.resolve()?;
    let tol = recovery_tol.unwrap_or_else(|| default_recovery_tol(&sys, scenario.estimator));
    if !(tol >= 0.0) {
        return Err(SysidError::InvalidParameter(format!("recovery tolerance must be >= 0, got {tol}")));
    }

    let mut points = Vec::with_capacity(t_grid.len());
    for &horizon in t_grid {
        let outcomes: Vec<Result<(f64, bool)>> = (0..trials)
            .into_par_iter()
            .map(|j| {
                run_trial(&sys, scenario, horizon, derive_seed(seed, j as u64)).map_err(|e| SysidError::Pipeline {
                    horizon,
                    trial: j,
                    source: Box::new(e),
                })
            })
            .collect();
        let (mut successes, mut certified) = (0, 0);
        for o in outcomes {
            let (err, cert) = o?;
            successes += usize::from(err <= tol);
            certified += usize::from(cert);
        }
        points.push(PhasePoint {
            horizon,
            successes,
            certified,
            trials,
            success_rate: successes as f64 / trials as f64,
        });
    }
    let threshold = points
        .iter()
        .filter(|pt| pt.success_rate >= 1.0 - scenario.delta)
        .map(|pt| pt.horizon)
        .min();
    Ok(PhaseCurve {
        points,
        threshold,
        recovery_tol: tol,
    })
}
