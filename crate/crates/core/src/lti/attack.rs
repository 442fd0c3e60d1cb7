//! Disturbance generators for attacked time steps.

use nalgebra::DVector;
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SysidError};
use crate::rng::{stream_rng, Stream};

/// Law of the signed attack length `ℓ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum LengthLaw {
    /// `N(0, σ²)`.
    #[default]
    Gaussian,
    /// Uniform on `[-√3σ, √3σ]` (variance σ²).
    UniformBounded,
    /// `±σ` with equal probability.
    RademacherScaled,
}

/// Stealth attack: `d = ℓ f` with `f` uniform on the unit sphere and `ℓ` a
/// mean-zero length, optionally correlated with the previous length through
/// `ℓ_k = √(1-β²) ε_k + β ℓ_{k-1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StealthAttackConfig {
    pub sigma: f64,
    #[serde(default)]
    pub length_law: LengthLaw,
    #[serde(default)]
    pub history_coupling: f64,
}

impl Default for StealthAttackConfig {
    fn default() -> Self {
        Self {
            sigma: 1.0,
            length_law: LengthLaw::Gaussian,
            history_coupling: 0.0,
        }
    }
}

impl StealthAttackConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(SysidError::InvalidParameter(format!(
                "attack length scale must be positive, got {}",
                self.sigma
            )));
        }
        if !(0.0..1.0).contains(&self.history_coupling) {
            return Err(SysidError::InvalidParameter(format!(
                "history coupling must lie in [0,1), got {}",
                self.history_coupling
            )));
        }
        Ok(())
    }

    /// Ratio `c` between the conditional standard deviation of the length and
    /// its sub-Gaussian parameter. All shipped laws have variance exactly σ².
    pub fn variance_ratio_constant(&self) -> f64 {
        1.0
    }
}

/// Which disturbance is injected at attacked steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DisturbanceModel {
    Stealth(StealthAttackConfig),
    /// Independent `N(0, variance)` per active coordinate; coordinates outside
    /// `support` (when given) stay zero.
    Gaussian {
        variance: f64,
        #[serde(default)]
        support: Option<Vec<usize>>,
    },
}

impl Default for DisturbanceModel {
    fn default() -> Self {
        DisturbanceModel::Stealth(StealthAttackConfig::default())
    }
}

impl DisturbanceModel {
    pub fn validate(&self, n: usize) -> Result<()> {
        match self {
            DisturbanceModel::Stealth(cfg) => cfg.validate(),
            DisturbanceModel::Gaussian { variance, support } => {
                if !(*variance > 0.0) || !variance.is_finite() {
                    return Err(SysidError::InvalidParameter(format!(
                        "attack variance must be positive, got {variance}"
                    )));
                }
                if let Some(s) = support {
                    if s.is_empty() {
                        return Err(SysidError::InvalidParameter("empty attack support".into()));
                    }
                    if let Some(&bad) = s.iter().find(|&&c| c >= n) {
                        return Err(SysidError::Dimension(format!(
                            "attack support coordinate {bad} >= n={n}"
                        )));
                    }
                }
                Ok(())
            }
        }
    }
}

/// Stateful sampler; holds separate direction and length streams plus the
/// previous length for history coupling.
pub struct DisturbanceSampler {
    model: DisturbanceModel,
    directions: ChaCha20Rng,
    lengths: ChaCha20Rng,
    prev_length: Option<f64>,
}

impl DisturbanceSampler {
    pub fn new(model: DisturbanceModel, seed: u64) -> Self {
        Self {
            model,
            directions: stream_rng(seed, Stream::Directions),
            lengths: stream_rng(seed, Stream::Lengths),
            prev_length: None,
        }
    }

    /// Next non-zero disturbance vector of dimension `n`.
    pub fn sample(&mut self, n: usize) -> DVector<f64> {
        match &self.model {
            DisturbanceModel::Stealth(cfg) => {
                let cfg = cfg.clone();
                let f = unit_direction(&mut self.directions, n);
                let length = loop {
                    let l = self.next_length(&cfg);
                    if l != 0.0 {
                        break l;
                    }
                };
                f * length
            }
            DisturbanceModel::Gaussian { variance, support } => {
                let sd = variance.sqrt();
                let mut d = DVector::zeros(n);
                loop {
                    match support {
                        Some(s) => {
                            for &c in s {
                                d[c] = sd * self.lengths.sample::<f64, _>(StandardNormal);
                            }
                        }
                        None => {
                            for c in 0..n {
                                d[c] = sd * self.lengths.sample::<f64, _>(StandardNormal);
                            }
                        }
                    }
                    if d.iter().any(|&v| v != 0.0) {
                        return d;
                    }
                }
            }
        }
    }

    fn next_length(&mut self, cfg: &StealthAttackConfig) -> f64 {
        let eps = draw_length(&mut self.lengths, cfg);
        let beta = cfg.history_coupling;
        let l = match self.prev_length {
            Some(prev) if beta > 0.0 => (1.0 - beta * beta).sqrt() * eps + beta * prev,
            _ => eps,
        };
        self.prev_length = Some(l);
        l
    }
}

fn draw_length(rng: &mut ChaCha20Rng, cfg: &StealthAttackConfig) -> f64 {
    match cfg.length_law {
        LengthLaw::Gaussian => cfg.sigma * rng.sample::<f64, _>(StandardNormal),
        LengthLaw::UniformBounded => {
            let half = 3f64.sqrt() * cfg.sigma;
            rng.random_range(-half..half)
        }
        LengthLaw::RademacherScaled => {
            if rng.random::<bool>() {
                cfg.sigma
            } else {
                -cfg.sigma
            }
        }
    }
}

/// Uniform draw on the unit sphere of `R^n` (normalized isotropic Gaussian).
pub fn unit_direction<R: Rng>(rng: &mut R, n: usize) -> DVector<f64> {
    loop {
        let g = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let norm = g.norm();
        if norm > 1e-300 {
            return g / norm;
        }
    }
}

/// One stealth draw from an explicit seed; convenience for analysis code.
pub fn sample_stealth_attack(cfg: &StealthAttackConfig, n: usize, seed: u64) -> Result<DVector<f64>> {
    cfg.validate()?;
    if n == 0 {
        return Err(SysidError::Dimension("attack dimension must be at least 1".into()));
    }
    Ok(DisturbanceSampler::new(DisturbanceModel::Stealth(cfg.clone()), seed).sample(n))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimensional_direction_is_a_sign() {
        let mut rng = stream_rng(3, Stream::Directions);
        for _ in 0..100 {
            let f = unit_direction(&mut rng, 1);
            assert!(f[0] == 1.0 || f[0] == -1.0);
        }
    }

    #[test]
    fn directions_have_unit_norm() {
        let mut rng = stream_rng(4, Stream::Directions);
        for n in 1..9 {
            let f = unit_direction(&mut rng, n);
            assert!((f.norm() - 1.0).abs() < 4.0 * f64::EPSILON);
        }
    }

    #[test]
    fn direction_isotropy() {
        let n = 4;
        let draws = 100_000;
        let mut rng = stream_rng(11, Stream::Directions);
        let mut mean = DVector::<f64>::zeros(n);
        let mut cov = nalgebra::DMatrix::<f64>::zeros(n, n);
        for _ in 0..draws {
            let f = unit_direction(&mut rng, n);
            mean += &f;
            cov += &f * f.transpose();
        }
        mean /= draws as f64;
        cov /= draws as f64;
        assert!(mean.norm() < 0.02, "mean norm {}", mean.norm());
        // bound from the invariant: 2 * 3 / sqrt(N)
        assert!(mean.norm() <= 6.0 / (draws as f64).sqrt());
        let target = nalgebra::DMatrix::<f64>::identity(n, n) / n as f64;
        let dev = (cov - target).iter().fold(0.0f64, |a, v| a.max(v.abs()));
        assert!(dev <= 0.01, "covariance deviation {dev}");
    }

    #[test]
    fn length_laws_are_mean_zero_with_unit_ratio() {
        for law in [LengthLaw::Gaussian, LengthLaw::UniformBounded, LengthLaw::RademacherScaled] {
            let cfg = StealthAttackConfig {
                sigma: 2.0,
                length_law: law,
                history_coupling: 0.0,
            };
            let mut rng = stream_rng(5, Stream::Lengths);
            let n = 200_000;
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in 0..n {
                let l = draw_length(&mut rng, &cfg);
                s += l;
                s2 += l * l;
            }
            let mean = s / n as f64;
            let var = s2 / n as f64 - mean * mean;
            assert!(mean.abs() < 0.03, "{law:?} mean {mean}");
            assert!((var / 4.0 - 1.0).abs() < 0.02, "{law:?} var {var}");
            assert_eq!(cfg.variance_ratio_constant(), 1.0);
        }
    }

    #[test]
    fn coupled_lengths_keep_variance_and_correlate() {
        let cfg = StealthAttackConfig {
            sigma: 1.0,
            length_law: LengthLaw::Gaussian,
            history_coupling: 0.6,
        };
        let mut sampler = DisturbanceSampler::new(DisturbanceModel::Stealth(cfg.clone()), 77);
        let n = 100_000;
        let ls: Vec<f64> = (0..n).map(|_| sampler.next_length(&cfg)).collect();
        let var = ls.iter().map(|l| l * l).sum::<f64>() / n as f64;
        let lag1 = ls.windows(2).map(|w| w[0] * w[1]).sum::<f64>() / (n - 1) as f64;
        assert!((var - 1.0).abs() < 0.03, "var {var}");
        assert!((lag1 - 0.6).abs() < 0.03, "lag-1 {lag1}");
    }

    #[test]
    fn gaussian_model_respects_support() {
        let model = DisturbanceModel::Gaussian {
            variance: 10.0,
            support: Some(vec![3, 5]),
        };
        model.validate(6).unwrap();
        let mut sampler = DisturbanceSampler::new(model, 1);
        for _ in 0..50 {
            let d = sampler.sample(6);
            for c in [0, 1, 2, 4] {
                assert_eq!(d[c], 0.0);
            }
            assert!(d[3] != 0.0 || d[5] != 0.0);
        }
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let bad = StealthAttackConfig {
            sigma: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = StealthAttackConfig {
            history_coupling: 1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let model = DisturbanceModel::Gaussian {
            variance: 1.0,
            support: Some(vec![7]),
        };
        assert!(model.validate(6).is_err());
    }

    #[test]
    fn stealth_draw_is_seeded() {
        let cfg = StealthAttackConfig::default();
        let a = sample_stealth_attack(&cfg, 3, 5).unwrap();
        let b = sample_stealth_attack(&cfg, 3, 5).unwrap();
        assert_eq!(a, b);
        assert!(sample_stealth_attack(&cfg, 0, 5).is_err());
    }
}
