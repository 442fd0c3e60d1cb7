pub mod certificates;
pub mod complexity;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod linalg;
pub mod lti;
pub mod rng;

pub use error::{Result, SysidError};
