//! Optimality check for an estimate of `[A B]` through the subgradient
//! conditions `0 ∈ Σ_i ∂‖d̂_i‖ z_iᵀ`, with `z_i = (x_i, u_i)`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::farkas::{farkas_feasible_with, Certificate, FarkasOptions, Verdict, Witness};
use crate::error::{Result, SysidError};
use crate::estimators::{residuals, EstimatorKind};
use crate::linalg::min_norm_solve;
use crate::lti::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktOptions {
    /// Residuals at or below this are treated as zero. `None` uses
    /// `1e-6 (1 + median residual norm)`.
    pub support_tol: Option<f64>,
    pub farkas: FarkasOptions,
    /// Projected-gradient budget for the exact group system.
    pub ball_iters: usize,
}

impl Default for KktOptions {
    fn default() -> Self {
        Self {
            support_tol: None,
            farkas: FarkasOptions::default(),
            ball_iters: 20_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoordinateCheck {
    pub coordinate: usize,
    /// The `1/√n`-scaled system used for the group norm.
    pub scaled: bool,
    pub certificate: Certificate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KktCertificate {
    pub verdict: Verdict,
    pub kind: EstimatorKind,
    pub support_tol: f64,
    /// Steps treated as attacked (non-zero residual).
    pub support: Vec<usize>,
    /// Steps whose residual size is within a factor 10 of `support_tol`.
    pub ambiguous: Vec<usize>,
    pub coordinates: Vec<CoordinateCheck>,
    /// Residual of the exact group-norm system, when it was solved.
    pub group_residual: Option<f64>,
    /// Row-major `n x (n+m)` direction with negative directional derivative.
    pub descent_direction: Option<Vec<Vec<f64>>>,
    /// Directional derivative of the objective along `descent_direction`.
    pub descent_slope: Option<f64>,
}

pub fn default_support_tol(norms: &[f64]) -> f64 {
    if norms.is_empty() {
        return 1e-6;
    }
    let mut s = norms.to_vec();
    s.sort_by(f64::total_cmp);
    let mid = s.len() / 2;
    let median = if s.len() % 2 == 0 { 0.5 * (s[mid - 1] + s[mid]) } else { s[mid] };
    1e-6 * (1.0 + median)
}

pub fn kkt_certificate(
    traj: &Trajectory,
    a_hat: &DMatrix<f64>,
    b_hat: &DMatrix<f64>,
    kind: EstimatorKind,
    opts: &KktOptions,
) -> Result<KktCertificate> {
    if kind == EstimatorKind::LeastSquares {
        return Err(SysidError::InvalidParameter(
            "KKT certificates apply to group-l2 and entry-l1".into(),
        ));
    }
    let r = residuals(traj, a_hat, b_hat)?;
    let z = traj.regressors();
    let (n, t) = r.shape();

    let sizes: Vec<f64> = match kind {
        EstimatorKind::GroupL2 => r.column_iter().map(|c| c.norm()).collect(),
        _ => r.iter().map(|v| v.abs()).collect(),
    };
    let tol = opts.support_tol.unwrap_or_else(|| default_support_tol(&sizes));
    let col_size = |i: usize| match kind {
        EstimatorKind::GroupL2 => sizes[i],
        _ => r.column(i).amax(),
    };
    let support: Vec<usize> = (0..t).filter(|&i| col_size(i) > tol).collect();
    let ambiguous: Vec<usize> = (0..t)
        .filter(|&i| {
            let s = col_size(i);
            s > 0.1 * tol && s < 10.0 * tol
        })
        .collect();

    let mut out = KktCertificate {
        verdict: Verdict::Optimal,
        kind,
        support_tol: tol,
        support: support.clone(),
        ambiguous,
        coordinates: Vec::with_capacity(n),
        group_residual: None,
        descent_direction: None,
        descent_slope: None,
    };

    match kind {
        EstimatorKind::EntryL1 => {
            for l in 0..n {
                let free: Vec<usize> = (0..t).filter(|&i| r[(l, i)].abs() <= tol).collect();
                let mut g = DVector::zeros(z.nrows());
                for i in (0..t).filter(|&i| r[(l, i)].abs() > tol) {
                    g += z.column(i) * r[(l, i)].signum();
                }
                let f = z.select_columns(free.iter());
                let cert = farkas_feasible_with(&f, &g, &opts.farkas)?;
                record_violation(&mut out, l, &cert, traj, &r, &z, kind, tol);
                out.coordinates.push(CoordinateCheck {
                    coordinate: l,
                    scaled: false,
                    certificate: cert,
                });
            }
            out.verdict = combine(&out.coordinates);
        }
        EstimatorKind::GroupL2 => {
            let free: Vec<usize> = (0..t).filter(|&i| sizes[i] <= tol).collect();
            let f = z.select_columns(free.iter());
            // G[:, l] = Σ_{i∈S} (d̂_i^l / ‖d̂_i‖) z_i
            let mut gmat = DMatrix::zeros(z.nrows(), n);
            for &i in &support {
                let s = r.column(i) / sizes[i];
                gmat += z.column(i) * s.transpose();
            }
            let scale = 1.0 / (n as f64).sqrt();
            let fs = &f * scale;
            let mut all_scaled = true;
            for l in 0..n {
                let g = gmat.column(l).into_owned();
                let cert = farkas_feasible_with(&fs, &g, &opts.farkas)?;
                if cert.verdict != Verdict::Optimal {
                    all_scaled = false;
                }
                out.coordinates.push(CoordinateCheck {
                    coordinate: l,
                    scaled: true,
                    certificate: cert,
                });
            }
            if all_scaled {
                out.verdict = Verdict::Optimal;
                return Ok(out);
            }
            // unscaled per-coordinate systems are necessary conditions
            if n > 1 {
                for l in 0..n {
                    let g = gmat.column(l).into_owned();
                    let cert = farkas_feasible_with(&f, &g, &opts.farkas)?;
                    if cert.verdict == Verdict::NotOptimal {
                        record_violation(&mut out, l, &cert, traj, &r, &z, kind, tol);
                        out.coordinates.push(CoordinateCheck {
                            coordinate: l,
                            scaled: false,
                            certificate: cert,
                        });
                        if out.descent_direction.is_some() {
                            out.verdict = Verdict::NotOptimal;
                            return Ok(out);
                        }
                    }
                }
            } else if let Some(c) = out.coordinates.first().cloned() {
                // n = 1: the scaled system is the exact one
                if c.certificate.verdict == Verdict::NotOptimal {
                    record_violation(&mut out, 0, &c.certificate, traj, &r, &z, kind, tol);
                    out.verdict = if out.descent_direction.is_some() {
                        Verdict::NotOptimal
                    } else {
                        Verdict::Inconclusive
                    };
                } else {
                    out.verdict = Verdict::Inconclusive;
                }
                return Ok(out);
            }
            let ball = solve_ball_system(&f, &gmat, opts.farkas.tol, opts.ball_iters);
            out.group_residual = Some(ball.residual);
            out.verdict = if ball.feasible {
                Verdict::Optimal
            } else if let Some(v) = ball.separator {
                // Δ = −Vᵀ
                let dir = -v.transpose();
                let slope = directional_derivative(&r, &z, &dir, kind, tol);
                if slope < 0.0 {
                    out.descent_direction = Some(crate::linalg::to_rows(&dir));
                    out.descent_slope = Some(slope);
                    Verdict::NotOptimal
                } else {
                    Verdict::Inconclusive
                }
            } else {
                Verdict::Inconclusive
            };
        }
        EstimatorKind::LeastSquares => unreachable!(),
    }
    Ok(out)
}

fn combine(checks: &[CoordinateCheck]) -> Verdict {
    if checks.iter().any(|c| c.certificate.verdict == Verdict::NotOptimal) {
        Verdict::NotOptimal
    } else if checks.iter().all(|c| c.certificate.verdict == Verdict::Optimal) {
        Verdict::Optimal
    } else {
        Verdict::Inconclusive
    }
}

/// Turn a violating `z` for coordinate `l` into the descent direction `−e_l zᵀ`
/// and keep it when the recomputed slope is negative.
#[allow(clippy::too_many_arguments)]
fn record_violation(
    out: &mut KktCertificate,
    l: usize,
    cert: &Certificate,
    traj: &Trajectory,
    r: &DMatrix<f64>,
    z: &DMatrix<f64>,
    kind: EstimatorKind,
    tol: f64,
) {
    if out.descent_direction.is_some() {
        return;
    }
    let Witness::Violator(v) = &cert.witness else {
        return;
    };
    let mut dir = DMatrix::zeros(traj.n(), z.nrows());
    for (j, vj) in v.iter().enumerate() {
        dir[(l, j)] = -vj;
    }
    let slope = directional_derivative(r, z, &dir, kind, tol);
    if slope < 0.0 {
        out.descent_direction = Some(crate::linalg::to_rows(&dir));
        out.descent_slope = Some(slope);
    }
}

/// One-sided derivative of `Σ_i ‖d̂_i − t Δ z_i‖` at `t = 0`, with residuals
/// at or below `tol` treated as exact zeros.
pub fn directional_derivative(r: &DMatrix<f64>, z: &DMatrix<f64>, dir: &DMatrix<f64>, kind: EstimatorKind, tol: f64) -> f64 {
    let dz = dir * z;
    let mut total = 0.0;
    for i in 0..r.ncols() {
        let ri = r.column(i);
        let di = dz.column(i);
        match kind {
            EstimatorKind::GroupL2 => {
                let norm = ri.norm();
                if norm > tol {
                    total -= ri.dot(&di) / norm;
                } else {
                    total += di.norm();
                }
            }
            _ => {
                for (rv, dv) in ri.iter().zip(di.iter()) {
                    if rv.abs() > tol {
                        total -= rv.signum() * dv;
                    } else {
                        total += dv.abs();
                    }
                }
            }
        }
    }
    total
}

pub(crate) struct BallSolution {
    pub feasible: bool,
    pub residual: f64,
    /// `V = G − F Γᵀ`, normalized, when it separates.
    pub separator: Option<DMatrix<f64>>,
}

/// Find `γ_i ∈ B₂` (one row of `Γᵀ` per column of `F`) with `F Γᵀ = G`.
pub(crate) fn solve_ball_system(f: &DMatrix<f64>, g: &DMatrix<f64>, tol: f64, iters: usize) -> BallSolution {
    let q = f.ncols();
    let resid = |gt: &DMatrix<f64>| -> DMatrix<f64> { f * gt - g };
    if g.iter().all(|&v| v == 0.0) {
        return BallSolution {
            feasible: true,
            residual: 0.0,
            separator: None,
        };
    }
    let mut gt = if q > 0 { min_norm_solve(f, g) } else { DMatrix::zeros(0, g.ncols()) };
    if max_row_norm(&gt) <= 1.0 {
        let res = resid(&gt).amax();
        if res <= tol {
            return BallSolution {
                feasible: true,
                residual: res,
                separator: None,
            };
        }
    }
    project_rows(&mut gt);
    let lip = if q > 0 {
        let s = f.singular_values().max();
        (s * s).max(f64::MIN_POSITIVE)
    } else {
        1.0
    };
    let separates = |gt: &DMatrix<f64>| -> Option<DMatrix<f64>> {
        let v = g - f * gt;
        let norm = v.norm();
        if norm == 0.0 {
            return None;
        }
        let v = v / norm;
        // support function of the feasible set along V vs ⟨V, G⟩
        let support: f64 = f.column_iter().map(|c| (v.transpose() * c).norm()).sum();
        (v.dot(g) > support).then_some(v)
    };
    let mut res = resid(&gt);
    for k in 0..iters {
        if res.amax() <= tol {
            return BallSolution {
                feasible: true,
                residual: res.amax(),
                separator: None,
            };
        }
        gt -= f.transpose() * &res / lip;
        project_rows(&mut gt);
        res = resid(&gt);
        if k % 200 == 199 {
            if let Some(v) = separates(&gt) {
                return BallSolution {
                    feasible: false,
                    residual: res.amax(),
                    separator: Some(v),
                };
            }
        }
    }
    let residual = res.amax();
    BallSolution {
        feasible: residual <= tol,
        residual,
        separator: if residual <= tol { None } else { separates(&gt) },
    }
}

fn max_row_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter().map(|r| r.norm()).fold(0.0, f64::max)
}

fn project_rows(m: &mut DMatrix<f64>) {
    for mut row in m.row_iter_mut() {
        let norm = row.norm();
        if norm > 1.0 {
            row /= norm;
        }
    }
}
