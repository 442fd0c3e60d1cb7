//! Qualitative checks of the insulin-model study at reduced scale.

use sysid_core::estimators::EstimatorKind;
use sysid_core::experiments::{run_experiment, ExperimentResult, ExperimentSpec};

/// Summed error over all checkpoints of one trial.
fn curve_area(r: &ExperimentResult, kind: EstimatorKind, trial: usize) -> f64 {
    r.cells
        .iter()
        .filter(|c| c.estimator == kind && c.trial == trial)
        .map(|c| c.error.unwrap_or(f64::INFINITY))
        .sum()
}

#[test]
fn dense_attacks_group_norm_leads() {
    let spec = ExperimentSpec {
        p: 0.6,
        trials: 5,
        seed: 77,
        ..ExperimentSpec::default()
    };
    let r = run_experiment(&spec).unwrap();
    let wins = (0..spec.trials)
        .filter(|&t| curve_area(&r, EstimatorKind::GroupL2, t) <= curve_area(&r, EstimatorKind::EntryL1, t))
        .count();
    assert!(wins * 10 >= spec.trials * 6, "l2 ahead on {wins} of {} trials", spec.trials);
}

#[test]
fn sparse_attacks_both_norms_agree() {
    let spec = ExperimentSpec {
        p: 0.2,
        trials: 3,
        seed: 78,
        sparse_support: Some(vec![3, 5]),
        ..ExperimentSpec::default()
    };
    let r = run_experiment(&spec).unwrap();
    let last = |k: EstimatorKind| r.series(k).unwrap().rows.last().unwrap().mean_error;
    let (ls, l2, l1) = (
        last(EstimatorKind::LeastSquares),
        last(EstimatorKind::GroupL2),
        last(EstimatorKind::EntryL1),
    );
    assert!((l1 - l2).abs() <= 0.1 * ls, "ls {ls}, l2 {l2}, l1 {l1}");
    let exact = 1e-9;
    assert!((l1 <= exact && l2 <= exact) || (l1 <= 2.0 * l2 && l2 <= 2.0 * l1), "l2 {l2}, l1 {l1}");
}
