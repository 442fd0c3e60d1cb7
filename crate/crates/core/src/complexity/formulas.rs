//! Order-of-magnitude sample-size predictions. Every quantity is evaluated on
//! logarithms so that `p → 1` or `ρ → 1` does not overflow; the unknown
//! universal constant is exposed as `multiplier`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SysidError};
use crate::lti::LtiSystem;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexityInputs {
    pub n: usize,
    #[serde(default)]
    pub m: usize,
    pub p: f64,
    pub rho: f64,
    #[serde(default = "one")]
    pub c: f64,
    /// Only used by the input-driven formulas; must be at least `1/(1−ρ)`.
    #[serde(default)]
    pub kappa: Option<f64>,
    pub delta: f64,
    #[serde(default = "one")]
    pub multiplier: f64,
}

fn one() -> f64 {
    1.0
}

/// A predicted sample size and the pieces it came from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleSize {
    pub value: f64,
    pub log_value: f64,
    /// `R` (the largest branch).
    pub r: f64,
    /// Natural log of each branch of the max defining `R`; `-inf` for a zero branch.
    pub log_branches: Vec<f64>,
    /// Index of the dominating branch.
    pub dominant: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InputSampleSize {
    pub t1: SampleSize,
    pub t2: SampleSize,
    pub value: f64,
    pub log_value: f64,
}

impl ComplexityInputs {
    fn validate_common(&self) -> Result<()> {
        if self.n == 0 {
            return Err(SysidError::Domain("n must be at least 1".into()));
        }
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(SysidError::Domain(format!("p must lie in (0,1), got {}", self.p)));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(SysidError::Domain(format!("rho must lie in (0,1), got {}", self.rho)));
        }
        if !(self.c > 0.0 && self.c <= 1.0) {
            return Err(SysidError::Domain(format!("c must lie in (0,1], got {}", self.c)));
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(SysidError::Domain(format!("delta must lie in (0,1], got {}", self.delta)));
        }
        if !(self.multiplier > 0.0) || !self.multiplier.is_finite() {
            return Err(SysidError::Domain(format!("multiplier must be > 0, got {}", self.multiplier)));
        }
        Ok(())
    }

    fn kappa_checked(&self) -> Result<f64> {
        let k = self
            .kappa
            .ok_or_else(|| SysidError::Domain("kappa is required for the input-driven bounds".into()))?;
        let floor = 1.0 / (1.0 - self.rho);
        if !(k >= floor * (1.0 - 1e-12)) || !k.is_finite() {
            return Err(SysidError::Domain(format!("kappa must be >= 1/(1-rho) = {floor}, got {k}")));
        }
        Ok(k)
    }
}

/// `ln(1/x)` for `x ∈ (0, 1]`, accurate near 1.
fn ln_inv(x: f64) -> f64 {
    // x − 1 is exact on [0.5, 1]
    if x >= 0.5 {
        -(x - 1.0).ln_1p()
    } else {
        -x.ln()
    }
}

/// `ln(1 − x)`.
fn ln_one_minus(x: f64) -> f64 {
    (-x).ln_1p()
}

fn pick(log_branches: Vec<f64>) -> (f64, usize, Vec<f64>) {
    let mut dom = 0;
    for (i, &v) in log_branches.iter().enumerate() {
        if v > log_branches[dom] {
            dom = i;
        }
    }
    (log_branches[dom], dom, log_branches)
}

/// `mult · lead · R [dim · log(nR) + log(1/δ)]` on logarithms.
fn assemble(inp: &ComplexityInputs, log_r: f64, dom: usize, branches: Vec<f64>, lead_n: bool, dim: usize) -> SampleSize {
    let n = inp.n as f64;
    let log_nr = n.ln() + log_r;
    let bracket = dim as f64 * log_nr + ln_inv(inp.delta);
    let mut log_value = inp.multiplier.ln() + log_r + bracket.ln();
    if lead_n {
        log_value += n.ln();
    }
    SampleSize {
        value: log_value.exp(),
        log_value,
        r: log_r.exp(),
        log_branches: branches,
        dominant: dom,
    }
}

fn auto_r(inp: &ComplexityInputs) -> (f64, usize, Vec<f64>) {
    let n = (inp.n as f64).ln();
    let lc = ln_inv(inp.c); // log(1/c) ≥ 0
    let lr = ln_inv(inp.rho); // log(1/ρ) > 0
    let (lp, lq) = (inp.p.ln(), ln_one_minus(inp.p));
    let ln_c = inp.c.ln();
    let b1 = lc.ln() - n - 4.0 * ln_c - lp - lq - lr.ln();
    let b2 = 2.0 * lc.ln() - 10.0 * ln_c - 2.0 * lq - 3.0 * ln_one_minus(inp.rho) - 2.0 * lr.ln();
    let b3 = -n - lp - lq;
    pick(vec![b1, b2, b3])
}

/// Group-norm estimator, autonomous system: `n R [n log(nR) + log(1/δ)]`.
pub fn t_sample_auto_l2(inp: &ComplexityInputs) -> Result<SampleSize> {
    inp.validate_common()?;
    let (log_r, dom, br) = auto_r(inp);
    Ok(assemble(inp, log_r, dom, br, true, inp.n))
}

/// Entrywise estimator, autonomous system: the group-norm value divided by `n`.
pub fn t_sample_auto_l1(inp: &ComplexityInputs) -> Result<SampleSize> {
    inp.validate_common()?;
    let (log_r, dom, br) = auto_r(inp);
    Ok(assemble(inp, log_r, dom, br, false, inp.n))
}

fn input_r(inp: &ComplexityInputs, kappa: f64) -> ((f64, usize, Vec<f64>), (f64, usize, Vec<f64>)) {
    let n = (inp.n as f64).ln();
    let lr = ln_inv(inp.rho);
    let (lp, lq) = (inp.p.ln(), ln_one_minus(inp.p));
    let ln_c = inp.c.ln();
    let l1r = ln_one_minus(inp.rho);
    let lkc = (kappa / inp.c).ln(); // log(κ/c) > 0 since κ > 1 ≥ c
    let lk = kappa.ln();
    let a1 = lkc.ln() - n - 4.0 * ln_c - lr.ln();
    let a2 = lp + 2.0 * lk - 10.0 * ln_c - 2.0 * lq - 2.0 * l1r;
    let a3 = lp + 2.0 * lk + 2.0 * lkc.ln() - 10.0 * ln_c - 2.0 * l1r - 2.0 * lr.ln();
    let a4 = -n - lp;
    let r1 = pick(vec![a1, a2, a3, a4]);
    let b1 = -n - lp;
    let b2 = lp - 2.0 * lq;
    let b3 = (inp.m as f64).ln() - n;
    let r2 = pick(vec![b1, b2, b3]);
    (r1, r2)
}

/// Input-driven bounds. `entrywise = false` gives the group-norm pair
/// `nR₁[n log(nR₁)+log 1/δ]`, `nR₂[m log(nR₂)+log 1/δ]`; `true` drops the
/// leading `n` from both.
pub fn t_sample_input(inp: &ComplexityInputs, entrywise: bool) -> Result<InputSampleSize> {
    inp.validate_common()?;
    if inp.m == 0 {
        return Err(SysidError::Domain("input-driven bounds need m >= 1".into()));
    }
    let kappa = inp.kappa_checked()?;
    let ((l1, d1, b1), (l2, d2, b2)) = input_r(inp, kappa);
    let t1 = assemble(inp, l1, d1, b1, !entrywise, inp.n);
    let t2 = assemble(inp, l2, d2, b2, !entrywise, inp.m);
    let log_value = t1.log_value.max(t2.log_value);
    Ok(InputSampleSize {
        value: log_value.exp(),
        log_value,
        t1,
        t2,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KappaC {
    pub kappa: f64,
    pub c: f64,
    /// Largest singular value of `B`.
    pub rho_b: f64,
    /// Smallest singular value of `(1−ρ)^{-2} [B AB … A^{n−1}B]`.
    pub eta_b: f64,
}

/// Candidate `κ` and `c` built from `B`, the controllability matrix, the
/// attack scale `σ` and input scale `ξ`.
pub fn kappa_c_from_system(sys: &LtiSystem, sigma: f64, xi: f64, p: f64) -> Result<KappaC> {
    let (n, m) = (sys.n(), sys.m());
    if m == 0 {
        return Err(SysidError::Domain("needs a system with inputs".into()));
    }
    let rho = sys.spectral_radius();
    if !(rho < 1.0) {
        return Err(SysidError::Domain(format!("system must be stable, rho = {rho}")));
    }
    if !(sigma > 0.0 && xi > 0.0 && (0.0..=1.0).contains(&p)) {
        return Err(SysidError::Domain("need sigma > 0, xi > 0 and p in [0,1]".into()));
    }
    let mut ctrb = DMatrix::zeros(n, n * m);
    let mut blk = sys.b().clone();
    for k in 0..n {
        ctrb.columns_mut(k * m, m).copy_from(&blk);
        blk = sys.a() * blk;
    }
    ctrb /= (1.0 - rho).powi(2);
    let sv = ctrb.singular_values();
    let eta_b = if n * m >= n { sv.min() } else { 0.0 };
    if !(eta_b > 0.0) {
        return Err(SysidError::Domain("(A, B) is not controllable".into()));
    }
    let rho_b = sys.b().singular_values().max();
    let (mf, nf) = (m as f64, n as f64);
    let attack = p * sigma * sigma / nf;
    let bar = eta_b * eta_b * xi * xi / mf + attack;
    let tilde = rho_b * rho_b * xi * xi / (mf * (1.0 - rho)) + attack / (1.0 - rho);
    let kappa = (tilde / bar).sqrt().max(1.0 / (1.0 - rho));
    let c = ((eta_b * eta_b * xi * xi / mf) / (rho_b * rho_b * xi * xi / mf + attack)).min(1.0);
    Ok(KappaC { kappa, c, rho_b, eta_b })
}
