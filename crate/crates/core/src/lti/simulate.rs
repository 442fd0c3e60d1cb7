use nalgebra::{DMatrix, DVector};

use super::attack::{DisturbanceModel, DisturbanceSampler};
use super::input::InputPolicy;
use super::schedule::AttackSchedule;
use super::system::LtiSystem;
use crate::error::{Result, SysidError};
use crate::rng::{stream_rng, Stream};

/// States beyond this magnitude are reported as divergence.
pub const STATE_LIMIT: f64 = 1e12;

/// A single trajectory `x_0..x_T` with inputs and disturbances `0..T-1`.
///
/// Stored column-wise: `states` is `n x (T+1)`, `inputs` is `m x T`,
/// `disturbances` is `n x T`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    states: DMatrix<f64>,
    inputs: DMatrix<f64>,
    disturbances: DMatrix<f64>,
    schedule: AttackSchedule,
    seed: u64,
}

impl Trajectory {
    pub fn from_parts(
        states: DMatrix<f64>,
        inputs: DMatrix<f64>,
        disturbances: DMatrix<f64>,
        schedule: AttackSchedule,
        seed: u64,
    ) -> Result<Self> {
        let t = schedule.horizon();
        if states.ncols() != t + 1 {
            return Err(SysidError::Dimension(format!(
                "expected {} states for horizon {t}, got {}",
                t + 1,
                states.ncols()
            )));
        }
        if inputs.ncols() != t || disturbances.ncols() != t {
            return Err(SysidError::Dimension(format!(
                "inputs/disturbances must have {t} columns"
            )));
        }
        if disturbances.nrows() != states.nrows() {
            return Err(SysidError::Dimension(
                "disturbance and state dimensions differ".into(),
            ));
        }
        Ok(Self {
            states,
            inputs,
            disturbances,
            schedule,
            seed,
        })
    }

    /// Observed data only; disturbances unknown (stored as zero, schedule empty).
    pub fn from_observations(states: DMatrix<f64>, inputs: DMatrix<f64>) -> Result<Self> {
        let t = states.ncols().saturating_sub(1);
        let n = states.nrows();
        Self::from_parts(states, inputs, DMatrix::zeros(n, t), AttackSchedule::empty(t), 0)
    }

    pub fn n(&self) -> usize {
        self.states.nrows()
    }

    pub fn m(&self) -> usize {
        self.inputs.nrows()
    }

    /// Number of transitions `T`.
    pub fn horizon(&self) -> usize {
        self.schedule.horizon()
    }

    pub fn states(&self) -> &DMatrix<f64> {
        &self.states
    }

    pub fn inputs(&self) -> &DMatrix<f64> {
        &self.inputs
    }

    pub fn disturbances(&self) -> &DMatrix<f64> {
        &self.disturbances
    }

    pub fn schedule(&self) -> &AttackSchedule {
        &self.schedule
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn state(&self, i: usize) -> DVector<f64> {
        self.states.column(i).into_owned()
    }

    /// Regressor `(x_i, u_i)` stacked as one `(n+m)` vector.
    pub fn regressor(&self, i: usize) -> DVector<f64> {
        let (n, m) = (self.n(), self.m());
        DVector::from_fn(n + m, |r, _| {
            if r < n {
                self.states[(r, i)]
            } else {
                self.inputs[(r - n, i)]
            }
        })
    }

    /// `(n+m) x T` matrix whose columns are the regressors.
    pub fn regressors(&self) -> DMatrix<f64> {
        let (n, m, t) = (self.n(), self.m(), self.horizon());
        let mut z = DMatrix::zeros(n + m, t);
        z.view_mut((0, 0), (n, t)).copy_from(&self.states.columns(0, t));
        if m > 0 {
            z.view_mut((n, 0), (m, t)).copy_from(&self.inputs);
        }
        z
    }

    /// `n x T` matrix of targets `x_1..x_T`.
    pub fn targets(&self) -> DMatrix<f64> {
        self.states.columns(1, self.horizon()).into_owned()
    }

    /// First `horizon` transitions of this trajectory.
    pub fn prefix(&self, horizon: usize) -> Result<Self> {
        if horizon > self.horizon() {
            return Err(SysidError::InvalidParameter(format!(
                "prefix {horizon} longer than trajectory {}",
                self.horizon()
            )));
        }
        Ok(Self {
            states: self.states.columns(0, horizon + 1).into_owned(),
            inputs: self.inputs.columns(0, horizon).into_owned(),
            disturbances: self.disturbances.columns(0, horizon).into_owned(),
            schedule: self.schedule.truncate(horizon),
            seed: self.seed,
        })
    }

    /// Largest scaled replay defect `‖x_{i+1} − A x_i − B u_i − d_i‖∞ / (1 + ‖x_i‖∞)`.
    pub fn replay_defect(&self, system: &LtiSystem) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.horizon() {
            let x = self.states.column(i);
            let mut r = self.states.column(i + 1) - system.a() * x - self.disturbances.column(i);
            if self.m() > 0 {
                r -= system.b() * self.inputs.column(i);
            }
            let scale = 1.0 + x.amax();
            worst = worst.max(r.amax() / scale);
        }
        worst
    }
}

/// Simulate `x_{i+1} = A x_i + B u_i + d_i` from `x_0 = 0`.
///
/// Randomness comes from independent sub-streams of `seed` (inputs,
/// directions, lengths), so equal arguments give bit-identical output.
pub fn simulate(
    system: &LtiSystem,
    policy: &InputPolicy,
    schedule: &AttackSchedule,
    disturbance: &DisturbanceModel,
    seed: u64,
) -> Result<Trajectory> {
    let (n, m, t) = (system.n(), system.m(), schedule.horizon());
    if t == 0 {
        return Err(SysidError::InvalidParameter("horizon must be at least 1".into()));
    }
    policy.validate(n, m)?;
    disturbance.validate(n)?;

    let gain = policy.gain_matrix(n, m);
    let mut input_rng = stream_rng(seed, Stream::Inputs);
    let mut sampler = DisturbanceSampler::new(disturbance.clone(), seed);
    let mask = schedule.mask();

    let mut states = DMatrix::zeros(n, t + 1);
    let mut inputs = DMatrix::zeros(m, t);
    let mut disturbances = DMatrix::zeros(n, t);

    for i in 0..t {
        let x = states.column(i).into_owned();
        let mut next = system.a() * &x;
        if m > 0 {
            let u = policy.draw(&mut input_rng, &x, gain.as_ref(), m);
            next += system.b() * &u;
            inputs.set_column(i, &u);
        }
        if mask[i] {
            let d = sampler.sample(n);
            next += &d;
            disturbances.set_column(i, &d);
        }
        if next.iter().any(|v| !v.is_finite() || v.abs() > STATE_LIMIT) {
            return Err(SysidError::NonFiniteState { step: i + 1 });
        }
        states.set_column(i + 1, &next);
    }

    Trajectory::from_parts(states, inputs, disturbances, schedule.clone(), seed)
}
