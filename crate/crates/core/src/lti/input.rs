use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SysidError};

/// How the input `u_i` is generated during simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InputPolicy {
    #[default]
    Zero,
    /// `u_i ~ N(0, ξ²/m · I_m)`.
    IidGaussian { xi: f64 },
    /// `u_i = K x_i + ω`, `ω ~ N(0, ξ²/m · I_m)`. `gain` is `m x n`, row-major.
    Feedback { gain: Vec<Vec<f64>>, xi: f64 },
}

impl InputPolicy {
    pub fn validate(&self, n: usize, m: usize) -> Result<()> {
        let xi = match self {
            InputPolicy::Zero => return Ok(()),
            InputPolicy::IidGaussian { xi } => *xi,
            InputPolicy::Feedback { gain, xi } => {
                if gain.len() != m || gain.iter().any(|r| r.len() != n) {
                    return Err(SysidError::Dimension(format!(
                        "feedback gain must be {m}x{n}"
                    )));
                }
                *xi
            }
        };
        if !(xi >= 0.0) || !xi.is_finite() {
            return Err(SysidError::InvalidParameter(format!("input scale must be >= 0, got {xi}")));
        }
        if m == 0 {
            return Err(SysidError::Dimension(
                "a non-zero input policy needs a system with m >= 1".into(),
            ));
        }
        Ok(())
    }

    pub(crate) fn gain_matrix(&self, n: usize, m: usize) -> Option<DMatrix<f64>> {
        match self {
            InputPolicy::Feedback { gain, .. } => {
                Some(DMatrix::from_fn(m, n, |i, j| gain[i][j]))
            }
            _ => None,
        }
    }

    pub(crate) fn draw<R: Rng>(
        &self,
        rng: &mut R,
        state: &DVector<f64>,
        gain: Option<&DMatrix<f64>>,
        m: usize,
    ) -> DVector<f64> {
        let noise = |rng: &mut R, xi: f64| {
            let sd = xi / (m as f64).sqrt();
            DVector::from_fn(m, |_, _| sd * rng.sample::<f64, _>(StandardNormal))
        };
        match self {
            InputPolicy::Zero => DVector::zeros(m),
            InputPolicy::IidGaussian { xi } => noise(rng, *xi),
            InputPolicy::Feedback { xi, .. } => {
                let k = gain.expect("feedback gain prepared by caller");
                k * state + noise(rng, *xi)
            }
        }
    }
}
