use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Parser, Debug)]
#[command(name = "sysid", version, about = "Identify LTI systems from attacked trajectories")]
pub struct Cli {
    /// Master seed for every random draw (default 0, or the seed in an experiment spec).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for parallel trials.
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,
    /// Where to write the run manifest (default: next to the main output).
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum Command {
    /// Simulate an attacked trajectory from a JSON config.
    Simulate(SimulateArgs),
    /// Fit A (and B) to a trajectory CSV.
    Estimate(EstimateArgs),
    /// Check optimality of an estimate (or of a known system) on a trajectory.
    Certify(CertifyArgs),
    /// Recovery bounds and order-of-magnitude sample sizes.
    Bound(BoundArgs),
    /// Empirical recovery rate over a grid of horizons.
    Phase(PhaseArgs),
    /// Error-versus-horizon study for several estimators.
    Experiment(ExperimentArgs),
    /// Rerun a recorded command and compare output digests.
    #[serde(skip)]
    Replay(ReplayArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Estimate(_) => "estimate",
            Command::Certify(_) => "certify",
            Command::Bound(_) => "bound",
            Command::Phase(_) => "phase",
            Command::Experiment(_) => "experiment",
            Command::Replay(_) => "replay",
        }
    }

    /// Point every output into `dir`, keeping file names.
    pub fn redirect_outputs(&mut self, dir: &Path) {
        let move_to = |p: &mut PathBuf| {
            if let Some(name) = p.file_name() {
                *p = dir.join(name);
            }
        };
        match self {
            Command::Simulate(a) => {
                move_to(&mut a.out);
                if let Some(p) = a.system_out.as_mut() {
                    move_to(p);
                }
            }
            Command::Estimate(a) => move_to(&mut a.out),
            Command::Certify(a) => move_to(&mut a.out),
            Command::Bound(a) => match a.out.as_mut() {
                Some(p) => move_to(p),
                None => a.out = Some(dir.join("stdout.txt")),
            },
            Command::Phase(a) => move_to(&mut a.out),
            Command::Experiment(a) => a.out_dir = dir.to_path_buf(),
            Command::Replay(_) => {}
        }
    }
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateArgs {
    /// JSON with `system`, `attack`, `horizon` and optional `disturbance`, `input`.
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the config horizon.
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Trajectory CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the true system as JSON.
    #[arg(long)]
    pub system_out: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Norm {
    Ls,
    L2,
    L1,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Warm {
    Zero,
    Ls,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateArgs {
    #[arg(long)]
    pub trajectory: PathBuf,
    #[arg(long, value_enum, default_value_t = Norm::L2)]
    pub norm: Norm,
    #[arg(long, default_value_t = 20_000)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
    #[arg(long, value_enum, default_value_t = Warm::Ls)]
    pub warm_start: Warm,
    /// Plain subgradient steps only (no refit, no certificate checks).
    #[arg(long)]
    pub plain: bool,
    /// True system JSON; adds `error_vs_truth` to the output.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifyArgs {
    #[arg(long)]
    pub trajectory: PathBuf,
    /// Estimate JSON written by `estimate`.
    #[arg(long, conflicts_with = "system", required_unless_present = "system")]
    pub estimate: Option<PathBuf>,
    /// System JSON to certify instead of an estimate.
    #[arg(long)]
    pub system: Option<PathBuf>,
    /// Objective to certify against (defaults to the estimate's, or l2).
    #[arg(long, value_enum)]
    pub norm: Option<Norm>,
    #[arg(long)]
    pub support_tol: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundArgs {
    /// Print the root C_{n,k}.
    #[arg(long, num_args = 2, value_names = ["N", "K"])]
    pub cnk: Option<Vec<usize>>,
    /// Evaluate the eigenvalue condition for `--eigs` and `--spacing`.
    #[arg(long, requires_all = ["eigs", "spacing"])]
    pub eigen_condition: bool,
    /// Comma-separated eigenvalues; complex ones as `re:im`.
    #[arg(long)]
    pub eigs: Option<String>,
    /// Attack spacing Δ.
    #[arg(long)]
    pub spacing: Option<usize>,
    /// Table of C_{n,k} for n, k up to `--max-n`, `--max-k`.
    #[arg(long)]
    pub grid: bool,
    #[arg(long, default_value_t = 8)]
    pub max_n: usize,
    #[arg(long, default_value_t = 8)]
    pub max_k: usize,
    /// Sample-size order prediction: 2 and 3 autonomous, 5 and 6 with inputs.
    #[arg(long, value_parser = ["2", "3", "5", "6"])]
    pub theorem: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub m: usize,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    #[arg(long)]
    pub kappa: Option<f64>,
    /// Failure probability δ.
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub multiplier: f64,
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Output file (default: standard output).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseArgs {
    /// Scenario JSON (`system`, `attack`, `estimator`, ...).
    #[arg(long)]
    pub scenario: PathBuf,
    /// Comma-separated horizons.
    #[arg(long, value_delimiter = ',', required = true)]
    pub grid: Vec<usize>,
    #[arg(long, default_value_t = 50)]
    pub trials: usize,
    /// Recovery tolerance on the estimation error.
    #[arg(long)]
    pub tol: Option<f64>,
    /// CSV with `T,success_rate,trials,threshold_flag`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentArgs {
    /// Experiment spec JSON (defaults to the insulin study).
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub p: Option<f64>,
    /// Comma-separated attacked coordinates (0-based).
    #[arg(long, value_delimiter = ',')]
    pub sparse: Option<Vec<usize>>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayArgs {
    /// Manifest written by an earlier run.
    #[arg(long = "from")]
    pub from: PathBuf,
    /// Directory for the regenerated outputs.
    #[arg(long)]
    pub out_dir: PathBuf,
}
