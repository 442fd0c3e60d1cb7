//! Linearized insulin absorption / action model (six compartments).

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SysidError};

pub const STATE_LABELS: [&str; 6] = ["x1", "x2", "x3", "S1", "S2", "I"];

/// Default parameter file shipped with the crate.
pub const DEFAULT_PARAMS_JSON: &str = include_str!("../../data/hovorka_default.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HovorkaParams {
    pub k_a1: f64,
    pub k_a2: f64,
    pub k_a3: f64,
    pub k_b1: f64,
    pub k_b2: f64,
    pub k_b3: f64,
    pub t_max_i: f64,
    pub v_i: f64,
    pub k_e: f64,
}

impl HovorkaParams {
    pub fn default_params() -> Self {
        serde_json::from_str(DEFAULT_PARAMS_JSON).expect("shipped parameter file is valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: Self = serde_json::from_str(text).map_err(|e| SysidError::parse("parameter file", e))?;
        p.validate()?;
        Ok(p)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| SysidError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let named = [
            ("k_a1", self.k_a1),
            ("k_a2", self.k_a2),
            ("k_a3", self.k_a3),
            ("k_b1", self.k_b1),
            ("k_b2", self.k_b2),
            ("k_b3", self.k_b3),
            ("t_max_i", self.t_max_i),
            ("v_i", self.v_i),
            ("k_e", self.k_e),
        ];
        for (name, v) in named {
            if !(v > 0.0) || !v.is_finite() {
                return Err(SysidError::InvalidParameter(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Continuous-time matrices for state order `(x1, x2, x3, S1, S2, I)`.
///
/// ```text
/// x1' = -k_a1 x1 - k_b1 I
/// x2' = -k_a2 x2 - k_b2 I
/// x3' = -k_a3 x3 - k_b3 I
/// S1' = -S1 / t_max
/// S2' =  S1 / t_max - S2 / t_max
/// I'  =  S2 / (t_max V_I) - k_e I
/// ```
///
/// The system is driven only through the disturbance channel, so `Bc` has
/// zero columns.
pub fn hovorka_continuous(p: &HovorkaParams) -> Result<(DMatrix<f64>, DMatrix<f64>, Vec<String>)> {
    p.validate()?;
    const X1: usize = 0;
    const X2: usize = 1;
    const X3: usize = 2;
    const S1: usize = 3;
    const S2: usize = 4;
    const I: usize = 5;
    let mut ac = DMatrix::zeros(6, 6);
    ac[(X1, X1)] = -p.k_a1;
    ac[(X1, I)] = -p.k_b1;
    ac[(X2, X2)] = -p.k_a2;
    ac[(X2, I)] = -p.k_b2;
    ac[(X3, X3)] = -p.k_a3;
    ac[(X3, I)] = -p.k_b3;
    ac[(S1, S1)] = -1.0 / p.t_max_i;
    ac[(S2, S1)] = 1.0 / p.t_max_i;
    ac[(S2, S2)] = -1.0 / p.t_max_i;
    ac[(I, S2)] = 1.0 / (p.t_max_i * p.v_i);
    ac[(I, I)] = -p.k_e;
    let labels = STATE_LABELS.iter().map(|s| s.to_string()).collect();
    Ok((ac, DMatrix::zeros(6, 0), labels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lti::system::discretize_euler;

    #[test]
    fn entries_follow_the_ode() {
        let p = HovorkaParams::default_params();
        let (ac, bc, labels) = hovorka_continuous(&p).unwrap();
        assert_eq!(labels, STATE_LABELS);
        assert_eq!(bc.shape(), (6, 0));
        assert_eq!(ac[(0, 5)], -p.k_b1);
        assert_eq!(ac[(0, 0)], -p.k_a1);
        assert_eq!(ac[(4, 3)], 1.0 / p.t_max_i);
        assert_eq!(ac[(4, 4)], -1.0 / p.t_max_i);
        assert_eq!(ac[(5, 4)], 1.0 / (p.t_max_i * p.v_i));
        assert_eq!(ac[(5, 5)], -p.k_e);
        // S1 only decays
        assert_eq!(ac.row(3).iter().filter(|&&v| v != 0.0).count(), 1);
    }

    #[test]
    fn default_discretization_is_stable() {
        let (ac, bc, _) = hovorka_continuous(&HovorkaParams::default_params()).unwrap();
        let sys = discretize_euler(&ac, &bc, 0.5).unwrap();
        assert!(sys.is_stable(), "rho = {}", sys.spectral_radius());
    }

    #[test]
    fn missing_or_non_positive_parameters() {
        assert!(HovorkaParams::from_json(r#"{"k_a1": 0.1}"#).is_err());
        let mut p = HovorkaParams::default_params();
        p.k_e = 0.0;
        assert!(hovorka_continuous(&p).is_err());
    }
}
