//! Box feasibility `∃ w, ‖w‖∞ ≤ 1, F w = g` and its dual `f(z) = zᵀg + ‖zᵀF‖₁`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::dual::{dual_min_fz, refine_on_ball};
use crate::error::{Result, SysidError};
use crate::linalg::min_norm_solve;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Optimal,
    NotOptimal,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", content = "vector", rename_all = "kebab-case")]
pub enum Witness {
    /// Multipliers `w` in the box with `F w = g`.
    Multipliers(Vec<f64>),
    /// Unit `z` with `f(z) < 0`.
    Violator(Vec<f64>),
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub verdict: Verdict,
    /// Final residual `‖Fw − g‖∞` when feasible or ambiguous, `f(z)` for a violator.
    pub margin: f64,
    pub witness: Witness,
}

impl Certificate {
    /// Re-check the witness from scratch.
    pub fn verify(&self, f: &DMatrix<f64>, g: &DVector<f64>) -> bool {
        match (&self.verdict, &self.witness) {
            (Verdict::Optimal, Witness::Multipliers(w)) => {
                let w = DVector::from_column_slice(w);
                w.amax() <= 1.0 + 1e-12 && (f * &w - g).amax() <= 1e-8
            }
            (Verdict::NotOptimal, Witness::Violator(z)) => {
                let z = DVector::from_column_slice(z);
                fz(f, g, &z) < 0.0 && (z.norm() - 1.0).abs() < 1e-9
            }
            (Verdict::Inconclusive, _) => true,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FarkasOptions {
    /// Feasibility threshold on `‖Fw − g‖∞`.
    pub tol: f64,
    pub max_iters: usize,
    /// Active-set solve every this many projected-gradient steps.
    pub polish_every: usize,
    /// Use the ε-net dual search as a last resort when `n` is at most this.
    pub net_max_dim: usize,
}

impl Default for FarkasOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iters: 20_000,
            polish_every: 50,
            net_max_dim: 3,
        }
    }
}

/// `f(z) = zᵀg + ‖zᵀF‖₁`.
pub fn fz(f: &DMatrix<f64>, g: &DVector<f64>, z: &DVector<f64>) -> f64 {
    z.dot(g) + (f.transpose() * z).iter().map(|v| v.abs()).sum::<f64>()
}

pub fn farkas_feasible(f: &DMatrix<f64>, g: &DVector<f64>, tol: f64) -> Result<Certificate> {
    farkas_feasible_with(
        f,
        g,
        &FarkasOptions {
            tol,
            ..FarkasOptions::default()
        },
    )
}

pub fn farkas_feasible_with(f: &DMatrix<f64>, g: &DVector<f64>, opts: &FarkasOptions) -> Result<Certificate> {
    let (n, q) = f.shape();
    if g.len() != n {
        return Err(SysidError::Dimension(format!("F is {n}x{q} but g has {} entries", g.len())));
    }
    if !(opts.tol > 0.0) {
        return Err(SysidError::InvalidParameter(format!("tolerance must be > 0, got {}", opts.tol)));
    }
    if f.iter().chain(g.iter()).any(|v| !v.is_finite()) {
        return Err(SysidError::InvalidParameter("non-finite entries in F or g".into()));
    }
    let feasible = |w: DVector<f64>, res: f64| Certificate {
        verdict: Verdict::Optimal,
        margin: res,
        witness: Witness::Multipliers(w.as_slice().to_vec()),
    };
    if g.iter().all(|&v| v == 0.0) {
        return Ok(feasible(DVector::zeros(q), 0.0));
    }
    let resid = |w: &DVector<f64>| (f * w - g).amax();

    // minimum-norm solution first; often already inside the box
    let w0 = if q > 0 {
        min_norm_solve(f, &DMatrix::from_column_slice(n, 1, g.as_slice())).column(0).into_owned()
    } else {
        DVector::zeros(0)
    };
    if w0.amax() <= 1.0 {
        let r = resid(&w0);
        if r <= opts.tol {
            return Ok(feasible(w0, r));
        }
    }

    let lip = f.norm_squared().max(f64::MIN_POSITIVE); // Frobenius bound on ‖F‖₂²
    let lip = spectral_sq(f).unwrap_or(lip);
    let mut w = clamp(&w0);
    let mut best_violator: Option<(DVector<f64>, f64)> = None;
    for k in 0..opts.max_iters.max(1) {
        let r = f * &w - g;
        if r.amax() <= opts.tol {
            return Ok(feasible(w, r.amax()));
        }
        let grad = f.transpose() * &r;
        let next = clamp(&(&w - grad / lip));
        let moved = (&next - &w).amax();
        w = next;
        if (k + 1) % opts.polish_every == 0 || moved == 0.0 {
            if let Some(wp) = active_set_solve(f, g, &w) {
                let rp = resid(&wp);
                if rp <= opts.tol {
                    return Ok(feasible(wp, rp));
                }
                if let Some(v) = violator_from(f, g, &wp) {
                    return Ok(not_optimal(v));
                }
            }
            if let Some(v) = violator_from(f, g, &w) {
                best_violator = Some(v);
            }
            if moved == 0.0 {
                break;
            }
        }
    }
    if let Some(v) = best_violator.or_else(|| violator_from(f, g, &w)) {
        return Ok(not_optimal(v));
    }
    // convex refinement of the dual, then the net for small n
    let r = f * &w - g;
    if r.norm() > 0.0 {
        let (val, z) = refine_on_ball(f, g, &(&r / r.norm()), 4000, 0.5);
        if val < 0.0 {
            return Ok(not_optimal((z, val)));
        }
    }
    if n <= opts.net_max_dim {
        if let Ok(d) = dual_min_fz(f, g, 0.05, 1e-9) {
            if d.min_value < 0.0 {
                return Ok(not_optimal((d.argmin, d.min_value)));
            }
        }
    }
    Ok(Certificate {
        verdict: Verdict::Inconclusive,
        margin: r.amax(),
        witness: Witness::None,
    })
}

fn not_optimal((z, val): (DVector<f64>, f64)) -> Certificate {
    Certificate {
        verdict: Verdict::NotOptimal,
        margin: val,
        witness: Witness::Violator(z.as_slice().to_vec()),
    }
}

fn clamp(w: &DVector<f64>) -> DVector<f64> {
    w.map(|v| v.clamp(-1.0, 1.0))
}

/// `‖F‖₂²` from the singular values.
fn spectral_sq(f: &DMatrix<f64>) -> Option<f64> {
    if f.is_empty() {
        return None;
    }
    let s = f.singular_values().max();
    (s > 0.0).then_some(s * s)
}

/// Fix the coordinates sitting on the box boundary and solve for the rest.
fn active_set_solve(f: &DMatrix<f64>, g: &DVector<f64>, w: &DVector<f64>) -> Option<DVector<f64>> {
    let q = w.len();
    let free: Vec<usize> = (0..q).filter(|&i| w[i].abs() < 1.0 - 1e-12).collect();
    let mut out = w.map(|v| if v >= 1.0 - 1e-12 { 1.0 } else if v <= -1.0 + 1e-12 { -1.0 } else { v });
    let mut rhs = g.clone();
    for i in (0..q).filter(|i| !free.contains(i)) {
        rhs -= f.column(i) * out[i];
    }
    if free.is_empty() {
        return Some(out);
    }
    let ff = f.select_columns(free.iter());
    let sol = min_norm_solve(&ff, &DMatrix::from_column_slice(rhs.len(), 1, rhs.as_slice()));
    for (k, &i) in free.iter().enumerate() {
        out[i] = sol[(k, 0)];
    }
    (out.amax() <= 1.0).then_some(out)
}

/// Unit `z` along the residual; returned only when `f(z) < 0` holds exactly.
fn violator_from(f: &DMatrix<f64>, g: &DVector<f64>, w: &DVector<f64>) -> Option<(DVector<f64>, f64)> {
    let r = f * w - g;
    let norm = r.norm();
    if norm == 0.0 {
        return None;
    }
    let z = r / norm;
    let val = fz(f, g, &z);
    (val < 0.0).then_some((z, val))
}
