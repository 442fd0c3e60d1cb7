//! Error-versus-horizon study on the insulin model (or any other system).
//!
//! One trajectory per trial; every checkpoint fits each estimator on a prefix
//! of that trajectory.

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SysidError};
use crate::estimators::{
    estimation_error_joint, least_squares, solve_subgradient, solve_subgradient_from, EstimatorKind,
    SolverConfig, StopReason,
};
use crate::linalg::to_rows;
use crate::lti::{
    make_bernoulli, simulate, DisturbanceModel, InputPolicy, LtiSystem, SystemFile, SystemSource, Trajectory,
};
use crate::rng::derive_seed;

/// `count` log-spaced integers from `lo` to `hi`, rounded and de-duplicated.
pub fn log_checkpoints(lo: usize, hi: usize, count: usize) -> Vec<usize> {
    if count == 0 || lo == 0 || hi < lo {
        return Vec::new();
    }
    if count == 1 {
        return vec![hi];
    }
    let (a, b) = ((lo as f64).ln(), (hi as f64).ln());
    let mut out: Vec<usize> = (0..count)
        .map(|k| (a + (b - a) * k as f64 / (count - 1) as f64).exp().round() as usize)
        .collect();
    out.dedup();
    out
}

fn default_checkpoints() -> Vec<usize> {
    log_checkpoints(50, 2000, 16)
}

fn default_estimators() -> Vec<EstimatorKind> {
    vec![EstimatorKind::LeastSquares, EstimatorKind::GroupL2, EstimatorKind::EntryL1]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentSpec {
    pub system: SystemSource,
    pub p: f64,
    /// Per-coordinate variance of the dense Gaussian attack.
    pub attack_variance: f64,
    /// Coordinates that may be attacked; the rest stay zero.
    pub sparse_support: Option<Vec<usize>>,
    /// Replaces the Gaussian attack (e.g. with the stealth sampler).
    pub attack_model: Option<DisturbanceModel>,
    pub input: InputPolicy,
    pub checkpoints: Vec<usize>,
    pub estimators: Vec<EstimatorKind>,
    pub trials: usize,
    pub seed: u64,
    pub solver: SolverConfig,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            system: SystemSource::default(),
            p: 0.2,
            attack_variance: 10.0,
            sparse_support: None,
            attack_model: None,
            input: InputPolicy::Zero,
            checkpoints: default_checkpoints(),
            estimators: default_estimators(),
            trials: 5,
            seed: 0,
            solver: SolverConfig::default(),
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p) {
            return Err(SysidError::InvalidParameter(format!("p must lie in [0,1], got {}", self.p)));
        }
        if !(self.attack_variance > 0.0) || !self.attack_variance.is_finite() {
            return Err(SysidError::InvalidParameter(format!(
                "attack variance must be positive, got {}",
                self.attack_variance
            )));
        }
        if self.checkpoints.is_empty() || self.checkpoints[0] == 0 {
            return Err(SysidError::InvalidParameter("checkpoints must be non-empty and positive".into()));
        }
        if self.checkpoints.windows(2).any(|w| w[1] <= w[0]) {
            return Err(SysidError::InvalidParameter("checkpoints must be strictly increasing".into()));
        }
        if self.trials == 0 {
            return Err(SysidError::InvalidParameter("trials must be at least 1".into()));
        }
        let mut seen = self.estimators.clone();
        seen.sort_by_key(|k| k.label());
        seen.dedup();
        if seen.len() != self.estimators.len() {
            return Err(SysidError::InvalidParameter("estimators listed twice".into()));
        }
        self.solver.validate()
    }

    pub fn disturbance(&self) -> DisturbanceModel {
        self.attack_model.clone().unwrap_or(DisturbanceModel::Gaussian {
            variance: self.attack_variance,
            support: self.sparse_support.clone(),
        })
    }

    pub fn horizon(&self) -> usize {
        *self.checkpoints.last().unwrap_or(&0)
    }

    pub fn trial_seed(&self, trial: usize) -> u64 {
        derive_seed(self.seed, trial as u64)
    }
}

/// The full-length trajectory of one trial.
pub fn trial_trajectory(spec: &ExperimentSpec, system: &LtiSystem, trial: usize) -> Result<Trajectory> {
    let seed = spec.trial_seed(trial);
    let schedule = make_bernoulli(spec.horizon(), spec.p, seed)?;
    simulate(system, &spec.input, &schedule, &spec.disturbance(), seed)
}

/// One (estimator, trial, checkpoint) fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub estimator: EstimatorKind,
    pub trial: usize,
    pub horizon: usize,
    /// `None` when the fit failed; see `failure`.
    pub error: Option<f64>,
    pub objective: Option<f64>,
    pub iterations: usize,
    pub certified: bool,
    pub a_hat: Option<Vec<Vec<f64>>>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    #[serde(rename = "T")]
    pub t: usize,
    pub mean_error: f64,
    pub min_error: f64,
    pub max_error: f64,
    /// Trials that produced a finite error at this checkpoint.
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub estimator: EstimatorKind,
    pub rows: Vec<SeriesRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub spec: ExperimentSpec,
    pub system: SystemFile,
    pub series: Vec<Series>,
    pub cells: Vec<Cell>,
}

impl ExperimentResult {
    pub fn series(&self, kind: EstimatorKind) -> Option<&Series> {
        self.series.iter().find(|s| s.estimator == kind)
    }

    /// Errors at the last checkpoint, indexed by trial.
    pub fn final_errors(&self, kind: EstimatorKind) -> Vec<Option<f64>> {
        let h = self.spec.horizon();
        let mut out = vec![None; self.spec.trials];
        for c in self.cells.iter().filter(|c| c.estimator == kind && c.horizon == h) {
            out[c.trial] = c.error;
        }
        out
    }
}

fn fit_chain(spec: &ExperimentSpec, system: &LtiSystem, traj: &Trajectory, kind: EstimatorKind, trial: usize) -> Vec<Cell> {
    let mut warm: Option<(DMatrix<f64>, DMatrix<f64>)> = None;
    let mut cells = Vec::with_capacity(spec.checkpoints.len());
    for &horizon in &spec.checkpoints {
        let fit = traj.prefix(horizon).and_then(|pre| match kind {
            EstimatorKind::LeastSquares => least_squares(&pre).map(|(a, b)| (a, b, None, 0, true)),
            _ => {
                let res = match &warm {
                    Some((a0, b0)) => solve_subgradient_from(&pre, kind, &spec.solver, a0, b0),
                    None => solve_subgradient(&pre, kind, &spec.solver),
                }?;
                let cert = matches!(res.stop, StopReason::Certified | StopReason::ZeroObjective);
                Ok((res.a_hat, res.b_hat, Some(res.objective), res.iterations_used, cert))
            }
        });
        let fit = fit.and_then(|(a, b, obj, it, cert)| {
            let err = estimation_error_joint(&a, &b, system.a(), system.b())?;
            Ok((a, b, obj, it, cert, err))
        });
        cells.push(match fit {
            Ok((a, b, objective, iterations, certified, err)) if err.is_finite() => {
                let a_rows = to_rows(&a);
                warm = Some((a, b));
                Cell {
                    estimator: kind,
                    trial,
                    horizon,
                    error: Some(err),
                    objective,
                    iterations,
                    certified,
                    a_hat: Some(a_rows),
                    failure: None,
                }
            }
            Ok(_) => failed(kind, trial, horizon, "non-finite estimate".into()),
            Err(e) => failed(kind, trial, horizon, e.to_string()),
        });
    }
    cells
}

fn failed(estimator: EstimatorKind, trial: usize, horizon: usize, msg: String) -> Cell {
    Cell {
        estimator,
        trial,
        horizon,
        error: None,
        objective: None,
        iterations: 0,
        certified: false,
        a_hat: None,
        failure: Some(msg),
    }
}

/// Run every trial (in parallel) and aggregate mean/min/max error per
/// checkpoint. Simulation errors abort; fit errors are recorded per cell.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    spec.validate()?;
    let system = spec.system.resolve()?;
    spec.input.validate(system.n(), system.m())?;
    spec.disturbance().validate(system.n())?;

    let per_trial: Vec<Result<Vec<Cell>>> = (0..spec.trials)
        .into_par_iter()
        .map(|trial| {
            let traj = trial_trajectory(spec, &system, trial).map_err(|e| SysidError::Pipeline {
                horizon: spec.horizon(),
                trial,
                source: Box::new(e),
            })?;
            Ok(spec
                .estimators
                .iter()
                .flat_map(|&kind| fit_chain(spec, &system, &traj, kind, trial))
                .collect())
        })
        .collect();
    let mut cells = Vec::new();
    for r in per_trial {
        cells.extend(r?);
    }

    let series = spec
        .estimators
        .iter()
        .map(|&kind| Series {
            estimator: kind,
            rows: spec
                .checkpoints
                .iter()
                .map(|&t| {
                    let errs: Vec<f64> = cells
                        .iter()
                        .filter(|c| c.estimator == kind && c.horizon == t)
                        .filter_map(|c| c.error)
                        .collect();
                    let k = errs.len();
                    let (mean, lo, hi) = if k == 0 {
                        (f64::NAN, f64::NAN, f64::NAN)
                    } else {
                        (
                            errs.iter().sum::<f64>() / k as f64,
                            errs.iter().copied().fold(f64::INFINITY, f64::min),
                            errs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                        )
                    };
                    SeriesRow {
                        t,
                        mean_error: mean,
                        min_error: lo,
                        max_error: hi,
                        trials: k,
                    }
                })
                .collect(),
        })
        .collect();

    Ok(ExperimentResult {
        spec: spec.clone(),
        system: system.to_file(),
        series,
        cells,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentManifest {
    pub spec: ExperimentSpec,
    pub seed: u64,
    pub system: SystemFile,
    pub files: Vec<String>,
    pub failures: Vec<Cell>,
}

pub fn series_file_name(kind: EstimatorKind) -> String {
    format!("errors_{}.csv", kind.label())
}

/// Write one CSV per estimator plus `manifest.json` into `dir`; returns the
/// written paths.
pub fn emit_plot_data(result: &ExperimentResult, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| SysidError::io(dir, e))?;
    let mut written = Vec::new();
    let mut names = Vec::new();
    for s in &result.series {
        let name = series_file_name(s.estimator);
        let path = dir.join(&name);
        write_series_csv(&s.rows, &path)?;
        names.push(name);
        written.push(path);
    }
    let manifest = ExperimentManifest {
        spec: result.spec.clone(),
        seed: result.spec.seed,
        system: result.system.clone(),
        files: names,
        failures: result.cells.iter().filter(|c| c.failure.is_some()).cloned().collect(),
    };
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| SysidError::parse("manifest", e))?;
    std::fs::write(&path, text + "\n").map_err(|e| SysidError::io(&path, e))?;
    written.push(path);
    Ok(written)
}

pub fn write_series_csv(rows: &[SeriesRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| SysidError::io(path, e))
}

pub fn read_series_csv(path: &Path) -> Result<Vec<SeriesRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    r.deserialize().map(|row| row.map_err(|e| csv_err(path, e))).collect()
}

fn csv_err(path: &Path, e: csv::Error) -> SysidError {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => SysidError::io(path, io),
            _ => unreachable!(),
        }
    } else {
        SysidError::parse(path.display().to_string(), e)
    }
}
