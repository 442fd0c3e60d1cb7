//! Brute-force minimization of `f(z) = zᵀg + ‖zᵀF‖₁` over the unit sphere.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::farkas::fz;
use crate::error::{Result, SysidError};

/// Largest net (points) evaluated before giving up.
pub const NET_BUDGET: u64 = 10_000_000;
const MAX_NET_DIM: usize = 6;
const HALTON_POINTS: usize = 2048;
const REFINE_ITERS: usize = 4000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualSearch {
    /// Smallest `f` found (net, quasi-random points and local refinement).
    pub min_value: f64,
    pub argmin: DVector<f64>,
    /// Smallest `f` on the grid points alone.
    pub net_min: f64,
    pub net_points: u64,
    /// Lipschitz constant `‖g‖₂ + Σ_i ‖F_i‖₂` of `f`.
    pub lipschitz: f64,
    /// `f ≥ net_min − L ε > 0` everywhere on the sphere.
    pub certified_nonnegative: bool,
}

/// Evaluate `f` on a deterministic `epsilon`-net of the unit sphere plus
/// quasi-random points, then refine the best point by projected subgradient.
pub fn dual_min_fz(f: &DMatrix<f64>, g: &DVector<f64>, epsilon: f64, theta: f64) -> Result<DualSearch> {
    let n = f.nrows();
    if g.len() != n {
        return Err(SysidError::Dimension(format!("F has {n} rows but g has {} entries", g.len())));
    }
    if !(epsilon > 0.0) {
        return Err(SysidError::InvalidParameter(format!("epsilon must be > 0, got {epsilon}")));
    }
    if n == 0 || n > MAX_NET_DIM {
        return Err(SysidError::InvalidParameter(format!(
            "sphere net supports 1 <= n <= {MAX_NET_DIM}, got {n}; use farkas_feasible instead"
        )));
    }
    let size = net_size(n, epsilon, NET_BUDGET);
    if size > NET_BUDGET {
        return Err(SysidError::NetBudget {
            requested: size,
            budget: NET_BUDGET,
        });
    }

    let ft = f.transpose();
    let eval = |z: &[f64]| -> f64 {
        let zv = DVector::from_column_slice(z);
        zv.dot(g) + (&ft * &zv).iter().map(|v| v.abs()).sum::<f64>()
    };
    let mut best = (f64::INFINITY, vec![0.0; n]);
    let consider = |z: &[f64], val: f64, best: &mut (f64, Vec<f64>)| {
        // ties resolved toward the lexicographically smallest point
        if val < best.0 || (val == best.0 && lex_less(z, &best.1)) {
            *best = (val, z.to_vec());
        }
    };
    let mut count = 0u64;
    for_each_net_point(n, epsilon, &mut |z| {
        count += 1;
        let v = eval(z);
        consider(z, v, &mut best);
    });
    let net_min = best.0;

    for z in halton_sphere(n, HALTON_POINTS) {
        let v = eval(z.as_slice());
        consider(z.as_slice(), v, &mut best);
    }
    let start = DVector::from_vec(best.1.clone());
    let (rv, rz) = refine_on_ball(f, g, &start, REFINE_ITERS, epsilon.min(0.5));
    if rv < best.0 {
        best = (rv, rz.as_slice().to_vec());
    }

    let lipschitz = g.norm() + f.column_iter().map(|c| c.norm()).sum::<f64>();
    let certified = g.iter().all(|&v| v == 0.0) || (net_min >= theta && lipschitz * epsilon < theta);
    Ok(DualSearch {
        min_value: best.0,
        argmin: DVector::from_vec(best.1),
        net_min,
        net_points: count,
        lipschitz,
        certified_nonnegative: certified,
    })
}

fn lex_less(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        if x != y {
            return x < y;
        }
    }
    false
}

/// Projected subgradient on the unit ball from `start` with first step
/// `radius`; returns the smallest value of `f` seen at a normalized iterate
/// and that point.
pub(crate) fn refine_on_ball(
    f: &DMatrix<f64>,
    g: &DVector<f64>,
    start: &DVector<f64>,
    iters: usize,
    radius: f64,
) -> (f64, DVector<f64>) {
    let n = g.len();
    let mut z = if start.norm() > 0.0 {
        start / start.norm()
    } else {
        let mut e = DVector::zeros(n);
        e[0] = 1.0;
        e
    };
    let mut best = (fz(f, g, &z), z.clone());
    let scale = g.norm() + f.column_iter().map(|c| c.norm()).sum::<f64>();
    if scale == 0.0 {
        return best;
    }
    let ft = f.transpose();
    for k in 0..iters {
        let s = (&ft * &z).map(|v| if v > 0.0 { 1.0 } else if v < 0.0 { -1.0 } else { 0.0 });
        let sub = g + f * s;
        let sn = sub.norm();
        if sn == 0.0 {
            break;
        }
        z -= sub * (radius / ((k + 1) as f64).sqrt() / sn);
        let norm = z.norm();
        if norm > 1.0 {
            z /= norm;
        }
        if norm > 0.0 {
            let u = &z / z.norm();
            let v = fz(f, g, &u);
            if v < best.0 {
                best = (v, u);
            }
        }
    }
    best
}

/// Number of grid points, stopping the count once it passes `cap`.
pub fn net_size(n: usize, epsilon: f64, cap: u64) -> u64 {
    let mut count = 0u64;
    let step = level_step(n, epsilon);
    count_level(n, 0, 1.0, step, cap, &mut count);
    count
}

fn level_step(n: usize, epsilon: f64) -> f64 {
    if n <= 1 {
        return 0.0;
    }
    // covering error per angle ε/(n−1); step = 2 × that
    (2.0 * epsilon / (n - 1) as f64).min(std::f64::consts::PI)
}

fn count_level(n: usize, level: usize, sin_prod: f64, step: f64, cap: u64, count: &mut u64) {
    if *count > cap {
        return;
    }
    if n == 1 {
        *count += 2;
        return;
    }
    let last = level == n - 2;
    let (k, _) = angle_grid(last, sin_prod, step);
    if last {
        *count += k as u64;
        return;
    }
    for j in 0..k {
        let phi = angle_at(j, k, false);
        count_level(n, level + 1, sin_prod * phi.sin(), step, cap, count);
        if *count > cap {
            return;
        }
    }
}

/// Grid size for one angle; polar angles span `[0, π]`, the last spans `[0, 2π)`.
fn angle_grid(last: bool, sin_prod: f64, step: f64) -> (usize, f64) {
    let range = if last { 2.0 * std::f64::consts::PI } else { std::f64::consts::PI };
    let local = if sin_prod > 0.0 { step / sin_prod } else { f64::INFINITY };
    let k = if local.is_finite() {
        ((range / local).ceil() as usize).max(1)
    } else {
        1
    };
    let k = if last { k.max(1) } else { k + 1 };
    (k, range)
}

fn angle_at(j: usize, k: usize, last: bool) -> f64 {
    use std::f64::consts::PI;
    if last {
        2.0 * PI * j as f64 / k as f64
    } else if k == 1 {
        PI / 2.0
    } else {
        PI * j as f64 / (k - 1) as f64
    }
}

/// Visit every point of the recursive hyperspherical grid.
pub fn for_each_net_point(n: usize, epsilon: f64, visit: &mut dyn FnMut(&[f64])) {
    if n == 1 {
        visit(&[1.0]);
        visit(&[-1.0]);
        return;
    }
    let step = level_step(n, epsilon);
    let mut z = vec![0.0; n];
    walk(n, 0, 1.0, step, &mut z, visit);
}

fn walk(n: usize, level: usize, sin_prod: f64, step: f64, z: &mut [f64], visit: &mut dyn FnMut(&[f64])) {
    let last = level == n - 2;
    let (k, _) = angle_grid(last, sin_prod, step);
    for j in 0..k {
        let phi = angle_at(j, k, last);
        z[level] = sin_prod * phi.cos();
        if last {
            z[level + 1] = sin_prod * phi.sin();
            visit(z);
        } else {
            walk(n, level + 1, sin_prod * phi.sin(), step, z, visit);
        }
    }
}

const PRIMES: [u32; 6] = [2, 3, 5, 7, 11, 13];

fn radical_inverse(mut i: u64, base: u32) -> f64 {
    let b = base as f64;
    let mut inv = 1.0 / b;
    let mut out = 0.0;
    while i > 0 {
        out += (i % base as u64) as f64 * inv;
        i /= base as u64;
        inv /= b;
    }
    out
}

/// Halton points of the cube pushed radially onto the sphere.
fn halton_sphere(n: usize, count: usize) -> Vec<DVector<f64>> {
    (1..=count as u64)
        .filter_map(|i| {
            let v = DVector::from_fn(n, |d, _| 2.0 * radical_inverse(i, PRIMES[d]) - 1.0);
            let norm = v.norm();
            (norm > 1e-6).then(|| v / norm)
        })
        .collect()
}
