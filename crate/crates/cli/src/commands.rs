use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sysid_core::certificates::{
    cnk_bound, eigen_condition, kkt_certificate, lemma2_condition, KktCertificate, KktOptions, Lemma2,
};
use sysid_core::complexity::{
    phase_transition, t_sample_auto_l1, t_sample_auto_l2, t_sample_input, AttackPattern, ComplexityInputs,
    PhaseScenario,
};
use sysid_core::estimators::{
    estimate, estimation_error_joint, solve_scalar_exact, EstimatorKind, SolverConfig, StopReason, WarmStart,
};
use sysid_core::experiments::{emit_plot_data, run_experiment, ExperimentSpec};
use sysid_core::linalg::{from_rows, to_rows};
use sysid_core::lti::io::{read_trajectory, write_trajectory};
use sysid_core::lti::{simulate, DisturbanceModel, InputPolicy, LtiSystem, SystemFile, SystemSource, Trajectory};
use sysid_core::{Result, SysidError};

use crate::args::*;
use crate::manifest::{digest_file, sha256_hex, FileDigest, RunManifest};

/// Per-run bookkeeping: every file read or written is digested.
pub struct Run {
    pub seed: Option<u64>,
    pub threads: usize,
    inputs: Vec<FileDigest>,
    outputs: Vec<FileDigest>,
    config: serde_json::Value,
}

impl Run {
    pub fn new(seed: Option<u64>, threads: usize) -> Self {
        Self {
            seed,
            threads,
            inputs: Vec::new(),
            outputs: Vec::new(),
            config: serde_json::Value::Null,
        }
    }

    fn read(&mut self, path: &Path) -> Result<Vec<u8>> {
        let bytes = std::fs::read(path).map_err(|e| SysidError::io(path, e))?;
        self.inputs.push(FileDigest {
            path: path.to_path_buf(),
            sha256: sha256_hex(&bytes),
        });
        Ok(bytes)
    }

    fn read_json<T: DeserializeOwned>(&mut self, path: &Path) -> Result<T> {
        let bytes = self.read(path)?;
        serde_json::from_slice(&bytes).map_err(|e| SysidError::parse(path.display().to_string(), e))
    }

    fn read_trajectory(&mut self, path: &Path) -> Result<Trajectory> {
        let bytes = self.read(path)?;
        read_trajectory(bytes.as_slice()).map_err(|e| match e {
            SysidError::Parse { message, .. } => SysidError::parse(path.display().to_string(), message),
            other => other,
        })
    }

    /// Write to `path`, or to standard output when `None`.
    fn write(&mut self, path: Option<&Path>, bytes: &[u8]) -> Result<()> {
        match path {
            Some(p) => {
                std::fs::write(p, bytes).map_err(|e| SysidError::io(p, e))?;
                self.outputs.push(FileDigest {
                    path: p.to_path_buf(),
                    sha256: sha256_hex(bytes),
                });
            }
            None => {
                use std::io::Write;
                let mut out = std::io::stdout().lock();
                out.write_all(bytes).map_err(|e| SysidError::io("<stdout>", e))?;
                self.outputs.push(FileDigest {
                    path: PathBuf::from("-"),
                    sha256: sha256_hex(bytes),
                });
            }
        }
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, path: Option<&Path>, value: &T) -> Result<()> {
        let text = serde_json::to_string_pretty(value).map_err(|e| SysidError::parse("output", e))?;
        self.write(path, (text + "\n").as_bytes())
    }

    fn config<T: Serialize>(&mut self, value: &T) {
        self.config = serde_json::to_value(value).unwrap_or(serde_json::Value::Null);
    }

    fn resolved_seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Default manifest location for a command, if it has a file output.
pub fn default_manifest_path(cmd: &Command) -> Option<PathBuf> {
    match cmd {
        Command::Simulate(a) => Some(sibling(&a.out, ".manifest.json")),
        Command::Estimate(a) => Some(sibling(&a.out, ".manifest.json")),
        Command::Certify(a) => Some(sibling(&a.out, ".manifest.json")),
        Command::Bound(a) => a.out.as_ref().map(|p| sibling(p, ".manifest.json")),
        Command::Phase(a) => Some(sibling(&a.out, ".manifest.json")),
        Command::Experiment(a) => Some(a.out_dir.join("run-manifest.json")),
        Command::Replay(_) => None,
    }
}

/// Run one data-producing command and return its manifest.
pub fn execute(cmd: &Command, run: &mut Run) -> Result<RunManifest> {
    let seed = match cmd {
        Command::Simulate(a) => simulate_cmd(a, run)?,
        Command::Estimate(a) => estimate_cmd(a, run)?,
        Command::Certify(a) => certify_cmd(a, run)?,
        Command::Bound(a) => bound_cmd(a, run)?,
        Command::Phase(a) => phase_cmd(a, run)?,
        Command::Experiment(a) => experiment_cmd(a, run)?,
        Command::Replay(_) => unreachable!("replay is handled by the caller"),
    };
    Ok(RunManifest {
        subcommand: cmd.name().to_string(),
        tool: "sysid".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        seed,
        threads: run.threads,
        command: cmd.clone(),
        config: run.config.clone(),
        inputs: run.inputs.clone(),
        outputs: run.outputs.clone(),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulateConfig {
    pub system: SystemSource,
    #[serde(default = "no_attack")]
    pub attack: AttackPattern,
    #[serde(default)]
    pub disturbance: DisturbanceModel,
    #[serde(default)]
    pub input: InputPolicy,
    pub horizon: usize,
}

fn no_attack() -> AttackPattern {
    AttackPattern::None
}

fn simulate_cmd(a: &SimulateArgs, run: &mut Run) -> Result<u64> {
    let mut cfg: SimulateConfig = run.read_json(&a.config)?;
    if let Some(h) = a.horizon {
        cfg.horizon = h;
    }
    let seed = run.resolved_seed();
    run.config(&cfg);
    let sys = cfg.system.resolve()?;
    let schedule = cfg.attack.schedule(cfg.horizon, seed)?;
    let traj = simulate(&sys, &cfg.input, &schedule, &cfg.disturbance, seed)?;
    let mut buf = Vec::new();
    write_trajectory(&traj, &mut buf)?;
    run.write(Some(&a.out), &buf)?;
    if let Some(p) = &a.system_out {
        run.write_json(Some(p), &sys.to_file())?;
    }
    Ok(seed)
}

fn kind_of(norm: Norm) -> EstimatorKind {
    match norm {
        Norm::Ls => EstimatorKind::LeastSquares,
        Norm::L2 => EstimatorKind::GroupL2,
        Norm::L1 => EstimatorKind::EntryL1,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimateOutput {
    pub estimator: EstimatorKind,
    #[serde(rename = "A_hat")]
    pub a_hat: Vec<Vec<f64>>,
    #[serde(rename = "B_hat")]
    pub b_hat: Vec<Vec<f64>>,
    pub objective: f64,
    pub iterations: usize,
    pub stop: StopReason,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_vs_truth: Option<f64>,
}

fn load_system(run: &mut Run, path: &Path) -> Result<LtiSystem> {
    let file: SystemFile = run.read_json(path)?;
    file.into_system()
}

fn estimate_cmd(a: &EstimateArgs, run: &mut Run) -> Result<u64> {
    let traj = run.read_trajectory(&a.trajectory)?;
    let kind = kind_of(a.norm);
    let mut cfg = if a.plain {
        SolverConfig::plain(a.max_iters)
    } else {
        SolverConfig {
            max_iters: a.max_iters,
            ..SolverConfig::default()
        }
    };
    cfg.tol = a.tol;
    cfg.warm_start = match a.warm_start {
        Warm::Zero => WarmStart::Zero,
        Warm::Ls => WarmStart::LeastSquares,
    };
    run.config(&json!({ "estimator": kind, "solver": cfg }));

    let (a_hat, b_hat, objective, iterations, stop) = if traj.n() == 1 && traj.m() == 0 && kind != EstimatorKind::LeastSquares {
        let s = solve_scalar_exact(&traj)?;
        let a_hat = DMatrix::from_element(1, 1, s.a_hat);
        let obj = sysid_core::estimators::objective(&traj, &a_hat, &DMatrix::zeros(1, 0), kind)?;
        (a_hat, DMatrix::zeros(1, 0), obj, 0, StopReason::ClosedForm)
    } else {
        let r = estimate(&traj, kind, &cfg)?;
        (r.a_hat, r.b_hat, r.objective, r.iterations_used, r.stop)
    };
    let error_vs_truth = match &a.truth {
        Some(p) => {
            let sys = load_system(run, p)?;
            Some(estimation_error_joint(&a_hat, &b_hat, sys.a(), sys.b())?)
        }
        None => None,
    };
    let out = EstimateOutput {
        estimator: kind,
        a_hat: to_rows(&a_hat),
        b_hat: to_rows(&b_hat),
        objective,
        iterations,
        stop,
        error_vs_truth,
    };
    run.write_json(Some(&a.out), &out)?;
    Ok(run.resolved_seed())
}

#[derive(Debug, Serialize)]
struct CertifyOutput {
    estimator: EstimatorKind,
    verdict: sysid_core::certificates::Verdict,
    certificate: KktCertificate,
    #[serde(skip_serializing_if = "Option::is_none")]
    lemma2: Option<Lemma2>,
}

fn certify_cmd(a: &CertifyArgs, run: &mut Run) -> Result<u64> {
    let traj = run.read_trajectory(&a.trajectory)?;
    let (n, m) = (traj.n(), traj.m());
    let (a_hat, b_hat, kind) = match (&a.estimate, &a.system) {
        (Some(p), _) => {
            let est: EstimateOutput = run.read_json(p)?;
            let kind = a.norm.map(kind_of).unwrap_or(est.estimator);
            let b = if m == 0 { DMatrix::zeros(n, 0) } else { from_rows(&est.b_hat, m, "B_hat")? };
            (from_rows(&est.a_hat, n, "A_hat")?, b, kind)
        }
        (None, Some(p)) => {
            let sys = load_system(run, p)?;
            (sys.a().clone(), sys.b().clone(), a.norm.map(kind_of).unwrap_or(EstimatorKind::GroupL2))
        }
        (None, None) => return Err(SysidError::InvalidParameter("pass --estimate or --system".into())),
    };
    if a_hat.shape() != (n, n) || b_hat.shape() != (n, m) {
        return Err(SysidError::Dimension("matrices do not match the trajectory".into()));
    }
    let opts = KktOptions {
        support_tol: a.support_tol,
        ..KktOptions::default()
    };
    run.config(&json!({ "estimator": kind, "support_tol": a.support_tol }));
    let cert = kkt_certificate(&traj, &a_hat, &b_hat, kind, &opts)?;
    let lemma2 = if n == 1 && m == 0 { Some(lemma2_condition(&traj)?) } else { None };
    let out = CertifyOutput {
        estimator: kind,
        verdict: cert.verdict,
        certificate: cert,
        lemma2,
    };
    run.write_json(Some(&a.out), &out)?;
    Ok(run.resolved_seed())
}

fn parse_eigs(s: &str) -> Result<Vec<Complex64>> {
    s.split(',')
        .map(|tok| {
            let tok = tok.trim();
            let bad = || SysidError::parse("--eigs", format!("cannot read {tok:?}"));
            match tok.split_once(':') {
                Some((re, im)) => Ok(Complex64::new(
                    re.trim().parse().map_err(|_| bad())?,
                    im.trim().parse().map_err(|_| bad())?,
                )),
                None => Ok(Complex64::new(tok.parse().map_err(|_| bad())?, 0.0)),
            }
        })
        .collect()
}

fn need<T: Copy>(v: Option<T>, flag: &str) -> Result<T> {
    v.ok_or_else(|| SysidError::InvalidParameter(format!("{flag} is required")))
}

fn bound_cmd(a: &BoundArgs, run: &mut Run) -> Result<u64> {
    let modes = [a.cnk.is_some(), a.eigen_condition, a.grid, a.theorem.is_some()];
    if modes.iter().filter(|&&b| b).count() != 1 {
        return Err(SysidError::InvalidParameter(
            "choose exactly one of --cnk, --eigen-condition, --grid, --theorem".into(),
        ));
    }
    run.config(a);
    let out = a.out.as_deref();
    if let Some(nk) = &a.cnk {
        let c = cnk_bound(nk[0], nk[1], a.tol)?;
        return match a.format {
            Some(Format::Json) => run.write_json(out, &json!({ "n": nk[0], "k": nk[1], "C_nk": c })),
            Some(Format::Csv) => run.write(out, format!("n,k,C_nk\n{},{},{}\n", nk[0], nk[1], c).as_bytes()),
            None => run.write(out, format!("{c}\n").as_bytes()),
        }
        .map(|_| run.resolved_seed());
    }
    if a.eigen_condition {
        let eigs = parse_eigs(a.eigs.as_deref().unwrap_or_default())?;
        let spacing = need(a.spacing, "--spacing")?;
        let cond = eigen_condition(&eigs, spacing)?;
        let n = eigs.len();
        let c = cnk_bound(n, spacing - n, a.tol)?;
        match a.format.unwrap_or(Format::Json) {
            Format::Json => run.write_json(out, &json!({ "condition": cond, "spacing": spacing, "C_nk": c }))?,
            Format::Csv => run.write(
                out,
                format!(
                    "n,spacing,holds,lhs,rhs,boundary,C_nk\n{},{},{},{},{},{},{}\n",
                    n, spacing, cond.holds, cond.lhs, cond.rhs, cond.boundary, c
                )
                .as_bytes(),
            )?,
        }
        return Ok(run.resolved_seed());
    }
    if a.grid {
        let mut rows = Vec::new();
        for n in 1..=a.max_n {
            for k in 1..=a.max_k {
                rows.push((n, k, cnk_bound(n, k, a.tol)?));
            }
        }
        match a.format.unwrap_or(Format::Csv) {
            Format::Csv => {
                let mut s = String::from("n,k,C_nk\n");
                for (n, k, c) in rows {
                    s.push_str(&format!("{n},{k},{c}\n"));
                }
                run.write(out, s.as_bytes())?;
            }
            Format::Json => {
                let v: Vec<_> = rows.iter().map(|&(n, k, c)| json!({ "n": n, "k": k, "C_nk": c })).collect();
                run.write_json(out, &v)?;
            }
        }
        return Ok(run.resolved_seed());
    }
    let theorem = a.theorem.as_deref().unwrap_or_default();
    let inp = ComplexityInputs {
        n: need(a.n, "--n")?,
        m: a.m,
        p: need(a.p, "--p")?,
        rho: need(a.rho, "--rho")?,
        c: a.c,
        kappa: a.kappa,
        delta: a.delta,
        multiplier: a.multiplier,
    };
    let (t, t1, t2, r) = match theorem {
        "2" | "3" => {
            let s = if theorem == "2" { t_sample_auto_l2(&inp)? } else { t_sample_auto_l1(&inp)? };
            (s.value, None, None, s.r)
        }
        _ => {
            let s = t_sample_input(&inp, theorem == "6")?;
            (s.value, Some(s.t1.value), Some(s.t2.value), s.t1.r.max(s.t2.r))
        }
    };
    match a.format.unwrap_or(Format::Json) {
        Format::Json => run.write_json(
            out,
            &json!({
                "theorem": theorem,
                "label": "order prediction",
                "inputs": inp,
                "T": t,
                "T1": t1,
                "T2": t2,
                "R": r,
            }),
        )?,
        Format::Csv => {
            let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            run.write(
                out,
                format!("theorem,label,T,T1,T2,R\n{theorem},order prediction,{t},{},{},{r}\n", opt(t1), opt(t2)).as_bytes(),
            )?
        }
    }
    Ok(run.resolved_seed())
}

fn phase_cmd(a: &PhaseArgs, run: &mut Run) -> Result<u64> {
    let scenario: PhaseScenario = run.read_json(&a.scenario)?;
    let seed = run.resolved_seed();
    run.config(&json!({ "scenario": scenario, "grid": a.grid, "trials": a.trials, "recovery_tol": a.tol }));
    let curve = phase_transition(&scenario, &a.grid, a.trials, a.tol, seed)?;
    let mut s = String::from("T,success_rate,trials,threshold_flag\n");
    for p in &curve.points {
        let flag = u8::from(curve.threshold == Some(p.horizon));
        s.push_str(&format!("{},{},{},{}\n", p.horizon, p.success_rate, p.trials, flag));
    }
    run.write(Some(&a.out), s.as_bytes())?;
    Ok(seed)
}

fn experiment_cmd(a: &ExperimentArgs, run: &mut Run) -> Result<u64> {
    let mut spec: ExperimentSpec = match &a.spec {
        Some(p) => run.read_json(p)?,
        None => ExperimentSpec::default(),
    };
    if let Some(p) = a.p {
        spec.p = p;
    }
    if let Some(s) = &a.sparse {
        spec.sparse_support = Some(s.clone());
    }
    if let Some(t) = a.trials {
        spec.trials = t;
    }
    if let Some(s) = run.seed {
        spec.seed = s;
    }
    run.config(&spec);
    let result = run_experiment(&spec)?;
    let written = emit_plot_data(&result, &a.out_dir)?;
    for p in written {
        let d = digest_file(&p)?;
        run.outputs.push(d);
    }
    Ok(spec.seed)
}

/// Rerun the command recorded in a manifest with outputs in a fresh
/// directory and compare digests; returns whether all outputs match.
pub fn replay(a: &ReplayArgs) -> Result<bool> {
    let recorded = RunManifest::load(&a.from)?;
    for d in &recorded.inputs {
        let now = digest_file(&d.path)?;
        if now.sha256 != d.sha256 {
            return Err(SysidError::InvalidParameter(format!(
                "input {} changed since the recorded run",
                d.path.display()
            )));
        }
    }
    std::fs::create_dir_all(&a.out_dir).map_err(|e| SysidError::io(&a.out_dir, e))?;
    let mut cmd = recorded.command.clone();
    cmd.redirect_outputs(&a.out_dir);
    let mut run = Run::new(Some(recorded.seed), recorded.threads);
    let manifest = execute(&cmd, &mut run)?;
    manifest.save(&a.out_dir.join("replay-manifest.json"))?;

    let same = recorded.outputs.len() == manifest.outputs.len()
        && recorded
            .outputs
            .iter()
            .zip(&manifest.outputs)
            .all(|(x, y)| x.sha256 == y.sha256);
    let files: Vec<_> = recorded
        .outputs
        .iter()
        .zip(&manifest.outputs)
        .map(|(x, y)| {
            json!({
                "recorded": x.path,
                "replayed": y.path,
                "identical": x.sha256 == y.sha256,
            })
        })
        .collect();
    let report = json!({ "identical": same, "files": files });
    println!("{}", serde_json::to_string_pretty(&report).unwrap_or_default());
    Ok(same)
}
