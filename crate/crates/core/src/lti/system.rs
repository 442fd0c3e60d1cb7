use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SysidError};
use crate::linalg;
use crate::rng::{stream_rng, Stream};

/// Discrete-time pair `(A, B)` of `x_{i+1} = A x_i + B u_i + d_i`.
///
/// `m == 0` encodes an autonomous system. The spectral radius is computed once
/// at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct LtiSystem {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    rho: f64,
}

impl LtiSystem {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self> {
        if !a.is_square() || a.nrows() == 0 {
            return Err(SysidError::Dimension(format!(
                "A must be a non-empty square matrix, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if b.nrows() != a.nrows() {
            return Err(SysidError::Dimension(format!(
                "B has {} rows but A is {}x{}",
                b.nrows(),
                a.nrows(),
                a.ncols()
            )));
        }
        if b.iter().any(|v| !v.is_finite()) {
            return Err(SysidError::InvalidParameter("B has non-finite entries".into()));
        }
        let rho = linalg::spectral_radius(&a)?;
        Ok(Self { a, b, rho })
    }

    pub fn autonomous(a: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        Self::new(a, DMatrix::zeros(n, 0))
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    pub fn spectral_radius(&self) -> f64 {
        self.rho
    }

    pub fn is_stable(&self) -> bool {
        self.rho < 1.0
    }

    pub fn to_file(&self) -> SystemFile {
        SystemFile {
            n: self.n(),
            m: self.m(),
            a: linalg::to_rows(&self.a),
            b: linalg::to_rows(&self.b),
        }
    }
}

/// Gaussian `A` rescaled to spectral radius `rho`, Gaussian `B` (`n×m`),
/// both drawn from the system stream of `seed`.
pub fn random_stable(n: usize, m: usize, rho: f64, seed: u64) -> Result<LtiSystem> {
    if n == 0 {
        return Err(SysidError::InvalidParameter("n must be at least 1".into()));
    }
    if !(rho > 0.0 && rho < 1.0) {
        return Err(SysidError::InvalidParameter(format!("target spectral radius must lie in (0,1), got {rho}")));
    }
    let mut rng = stream_rng(seed, Stream::System);
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let b = DMatrix::from_fn(n, m, |_, _| rng.sample::<f64, _>(StandardNormal));
    let r = linalg::spectral_radius(&g)?;
    let a = if r > 0.0 { g * (rho / r) } else { DMatrix::identity(n, n) * rho };
    LtiSystem::new(a, b)
}

/// Forward-Euler discretization: `A = I + dt*Ac`, `B = dt*Bc`.
pub fn discretize_euler(ac: &DMatrix<f64>, bc: &DMatrix<f64>, dt: f64) -> Result<LtiSystem> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(SysidError::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    if !ac.is_square() {
        return Err(SysidError::Dimension("continuous A must be square".into()));
    }
    let n = ac.nrows();
    let a = DMatrix::identity(n, n) + ac * dt;
    let b = bc * dt;
    LtiSystem::new(a, b)
}

/// Flat JSON layout of a system file.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SystemFile {
    pub n: usize,
    pub m: usize,
    pub a: Vec<Vec<f64>>,
    #[serde(default)]
    pub b: Vec<Vec<f64>>,
}

impl SystemFile {
    pub fn into_system(self) -> Result<LtiSystem> {
        if self.a.len() != self.n {
            return Err(SysidError::Dimension(format!(
                "system file declares n={} but A has {} rows",
                self.n,
                self.a.len()
            )));
        }
        let a = linalg::from_rows(&self.a, self.n, "A")?;
        let b = if self.m == 0 && self.b.iter().all(|r| r.is_empty()) {
            DMatrix::zeros(self.n, 0)
        } else {
            if self.b.len() != self.n {
                return Err(SysidError::Dimension(format!(
                    "system file declares n={} but B has {} rows",
                    self.n,
                    self.b.len()
                )));
            }
            linalg::from_rows(&self.b, self.m, "B")?
        };
        LtiSystem::new(a, b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn random_stable_hits_the_target_radius() {
        let s = random_stable(4, 2, 0.8, 11).unwrap();
        assert_relative_eq!(s.spectral_radius(), 0.8, epsilon = 1e-9);
        assert_eq!(s.m(), 2);
        assert_eq!(random_stable(4, 2, 0.8, 11).unwrap(), s);
        assert!(random_stable(3, 0, 1.0, 1).is_err());
    }

    #[test]
    fn euler_of_zero_is_identity() {
        let sys = discretize_euler(&DMatrix::zeros(3, 3), &DMatrix::zeros(3, 0), 0.5).unwrap();
        assert_eq!(sys.a(), &DMatrix::identity(3, 3));
        assert_relative_eq!(sys.spectral_radius(), 1.0, epsilon = 1e-12);
        assert!(!sys.is_stable());
    }

    #[test]
    fn euler_of_negative_identity() {
        let ac = -DMatrix::<f64>::identity(2, 2);
        let sys = discretize_euler(&ac, &DMatrix::zeros(2, 0), 0.5).unwrap();
        assert_eq!(sys.a(), &(DMatrix::identity(2, 2) * 0.5));
        assert_relative_eq!(sys.spectral_radius(), 0.5, epsilon = 1e-12);
        assert!(sys.is_stable());
    }

    #[test]
    fn rejects_bad_dt_and_shapes() {
        assert!(discretize_euler(&DMatrix::zeros(2, 2), &DMatrix::zeros(2, 0), 0.0).is_err());
        assert!(LtiSystem::new(DMatrix::zeros(2, 3), DMatrix::zeros(2, 0)).is_err());
        assert!(LtiSystem::new(DMatrix::zeros(2, 2), DMatrix::zeros(3, 1)).is_err());
    }

    #[test]
    fn file_round_trip() {
        let sys = LtiSystem::new(
            DMatrix::from_row_slice(2, 2, &[0.1, 0.2, 0.3, 0.4]),
            DMatrix::from_row_slice(2, 1, &[1.0, -1.0]),
        )
        .unwrap();
        let json = serde_json::to_string(&sys.to_file()).unwrap();
        let back: SystemFile = serde_json::from_str(&json).unwrap();
        assert_eq!(back.into_system().unwrap(), sys);
    }

    #[test]
    fn file_with_wrong_dims_is_rejected() {
        let f = SystemFile {
            n: 2,
            m: 0,
            a: vec![vec![1.0, 0.0]],
            b: vec![],
        };
        assert!(f.into_system().is_err());
    }
}
