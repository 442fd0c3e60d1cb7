//! Discrete-time LTI systems, attack schedules and trajectory simulation.

pub mod attack;
pub mod hovorka;
pub mod input;
pub mod io;
pub mod schedule;
pub mod simulate;
pub mod source;
pub mod system;

pub use attack::{
    sample_stealth_attack, unit_direction, DisturbanceModel, DisturbanceSampler, LengthLaw,
    StealthAttackConfig,
};
pub use hovorka::{hovorka_continuous, HovorkaParams};
pub use input::InputPolicy;
pub use io::{read_trajectory_csv, write_trajectory_csv};
pub use schedule::{make_bernoulli, make_delta_spaced, AttackSchedule};
pub use simulate::{simulate, Trajectory};
pub use source::SystemSource;
pub use system::{discretize_euler, random_stable, LtiSystem, SystemFile};
