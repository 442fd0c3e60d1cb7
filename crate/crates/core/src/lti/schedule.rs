use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SysidError};
use crate::rng::{stream_rng, Stream};

/// Attack times `K` within the horizon `{0, .., T-1}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttackSchedule {
    horizon: usize,
    times: Vec<usize>,
    /// Set when the schedule was built with a fixed period.
    spacing: Option<usize>,
}

impl AttackSchedule {
    pub fn new(horizon: usize, times: Vec<usize>) -> Result<Self> {
        if times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(SysidError::InvalidParameter(
                "attack times must be strictly increasing".into(),
            ));
        }
        if let Some(&last) = times.last() {
            if last >= horizon {
                return Err(SysidError::InvalidParameter(format!(
                    "attack time {last} is outside the horizon {horizon}"
                )));
            }
        }
        Ok(Self {
            horizon,
            times,
            spacing: None,
        })
    }

    pub fn empty(horizon: usize) -> Self {
        Self {
            horizon,
            times: Vec::new(),
            spacing: None,
        }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn times(&self) -> &[usize] {
        &self.times
    }

    pub fn spacing(&self) -> Option<usize> {
        self.spacing
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.horizon];
        for &t in &self.times {
            mask[t] = true;
        }
        mask
    }

    /// Clean times `K^c`.
    pub fn complement(&self) -> Vec<usize> {
        let mask = self.mask();
        (0..self.horizon).filter(|&i| !mask[i]).collect()
    }

    /// Restriction to the first `horizon` steps.
    pub fn truncate(&self, horizon: usize) -> Self {
        Self {
            horizon: horizon.min(self.horizon),
            times: self.times.iter().copied().filter(|&t| t < horizon).collect(),
            spacing: self.spacing,
        }
    }
}

/// Periodic schedule `{first, first+spacing, ..} ∩ {0..T-1}`.
///
/// Accepts `spacing >= 2` (the period-2 case is the one where half the samples
/// are corrupted).
pub fn make_delta_spaced(horizon: usize, spacing: usize, first: usize) -> Result<AttackSchedule> {
    if spacing < 2 {
        return Err(SysidError::InvalidParameter(format!(
            "attack spacing must be at least 2, got {spacing}"
        )));
    }
    if first >= spacing {
        return Err(SysidError::InvalidParameter(format!(
            "first attack {first} must lie in 0..{spacing}"
        )));
    }
    let times = (first..horizon).step_by(spacing).collect();
    Ok(AttackSchedule {
        horizon,
        times,
        spacing: Some(spacing),
    })
}

/// Each step attacked independently with probability `p`.
pub fn make_bernoulli(horizon: usize, p: f64, seed: u64) -> Result<AttackSchedule> {
    if !(0.0..=1.0).contains(&p) {
        return Err(SysidError::InvalidParameter(format!(
            "attack probability must lie in [0,1], got {p}"
        )));
    }
    let mut rng = stream_rng(seed, Stream::Schedule);
    let times = (0..horizon)
        .filter(|_| rng.random::<f64>() < p)
        .collect();
    Ok(AttackSchedule {
        horizon,
        times,
        spacing: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn delta_spaced_examples() {
        assert_eq!(make_delta_spaced(7, 2, 1).unwrap().times(), &[1, 3, 5]);
        assert_eq!(make_delta_spaced(6, 2, 1).unwrap().times(), &[1, 3, 5]);
        assert_eq!(make_delta_spaced(3, 3, 0).unwrap().times(), &[0]);
        assert_eq!(make_delta_spaced(10, 4, 2).unwrap().times(), &[2, 6]);
    }

    #[test]
    fn delta_spaced_rejects_bad_arguments() {
        assert!(make_delta_spaced(10, 1, 0).is_err());
        assert!(make_delta_spaced(10, 3, 3).is_err());
    }

    #[test]
    fn bernoulli_extremes() {
        assert!(make_bernoulli(50, 0.0, 1).unwrap().is_empty());
        assert_eq!(make_bernoulli(50, 1.0, 1).unwrap().len(), 50);
        assert!(make_bernoulli(50, 1.5, 1).is_err());
        assert!(make_bernoulli(50, -0.1, 1).is_err());
    }

    #[test]
    fn bernoulli_frequency() {
        let s = make_bernoulli(100_000, 0.5, 2024).unwrap();
        let frac = s.len() as f64 / 100_000.0;
        assert!((0.49..=0.51).contains(&frac), "fraction {frac}");
    }

    #[test]
    fn bernoulli_is_seeded() {
        assert_eq!(make_bernoulli(500, 0.3, 9).unwrap(), make_bernoulli(500, 0.3, 9).unwrap());
        assert_ne!(make_bernoulli(500, 0.3, 9).unwrap(), make_bernoulli(500, 0.3, 10).unwrap());
    }

    #[test]
    fn new_validates_order_and_range() {
        assert!(AttackSchedule::new(5, vec![1, 1]).is_err());
        assert!(AttackSchedule::new(5, vec![3, 1]).is_err());
        assert!(AttackSchedule::new(5, vec![5]).is_err());
        let s = AttackSchedule::new(5, vec![0, 4]).unwrap();
        assert_eq!(s.complement(), vec![1, 2, 3]);
    }

    proptest! {
        #[test]
        fn delta_spaced_gap_property(horizon in 1usize..200, spacing in 2usize..12, first_frac in 0.0f64..1.0) {
            let first = ((spacing as f64) * first_frac) as usize % spacing;
            let s = make_delta_spaced(horizon, spacing, first).unwrap();
            let mask = s.mask();
            for w in s.times().windows(2) {
                prop_assert_eq!(w[1] - w[0], spacing);
                // exactly spacing-1 clean steps in between
                prop_assert!((w[0] + 1..w[1]).all(|i| !mask[i]));
            }
            if horizon > first {
                prop_assert_eq!(s.times()[0], first);
            }
            let k = s.len();
            prop_assert_eq!(k + s.complement().len(), horizon);
        }
    }
}
