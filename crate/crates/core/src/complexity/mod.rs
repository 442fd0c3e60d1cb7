//! Sample-size predictions and their empirical counterpart.

mod formulas;
mod phase;

pub use formulas::{
    kappa_c_from_system, t_sample_auto_l1, t_sample_auto_l2, t_sample_input, ComplexityInputs, InputSampleSize,
    KappaC, SampleSize,
};
pub use phase::{default_recovery_tol, phase_transition, AttackPattern, PhaseCurve, PhasePoint, PhaseScenario};
