//! Deterministic exact-recovery conditions for autonomous systems.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Result, SysidError};
use crate::linalg::min_norm_solve;
use crate::lti::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Lemma2 {
    pub holds: bool,
    /// `Σ_{i∉K} |x_i|`.
    pub lhs: f64,
    /// `Σ_{i∈K} |x_i|`.
    pub rhs: f64,
}

/// Scalar uniqueness condition `Σ_{i∉K} |x_i| > Σ_{i∈K} |x_i|` over `i < T`,
/// using the trajectory's true attack set.
pub fn lemma2_condition(traj: &Trajectory) -> Result<Lemma2> {
    if traj.n() != 1 {
        return Err(SysidError::Dimension(format!("needs n = 1, got n = {}", traj.n())));
    }
    let mask = traj.schedule().mask();
    let x = traj.states().row(0);
    let (mut lhs, mut rhs) = (0.0, 0.0);
    for (i, &attacked) in mask.iter().enumerate() {
        if attacked {
            rhs += x[i].abs();
        } else {
            lhs += x[i].abs();
        }
    }
    Ok(Lemma2 {
        holds: lhs > rhs,
        lhs,
        rhs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpanCheck {
    pub from: usize,
    pub to: usize,
    /// `‖d_to − P d_to‖ / ‖d_to‖` with `P` the projection onto the Krylov basis.
    pub relative_residual: f64,
    pub basis_rank: usize,
    pub holds: bool,
    /// `d_from` was zero, so the basis is empty.
    pub degenerate: bool,
}

/// For each consecutive pair of attack times `(i, i+Δ)`, test
/// `d_{i+Δ} ∈ span{d_i, A d_i, …, A^{Δ−2} d_i}`.
pub fn span_condition(traj: &Trajectory, a: &DMatrix<f64>, delta: usize, tol: f64) -> Result<Vec<SpanCheck>> {
    let n = traj.n();
    if a.shape() != (n, n) {
        return Err(SysidError::Dimension("A does not match the trajectory".into()));
    }
    if delta < 2 {
        return Err(SysidError::InvalidParameter(format!("spacing must be >= 2, got {delta}")));
    }
    let d = traj.disturbances();
    let times = traj.schedule().times();
    let mut out = Vec::new();
    for w in times.windows(2) {
        let (i, j) = (w[0], w[1]);
        if j - i != delta {
            continue;
        }
        let di = d.column(i).into_owned();
        let dj = d.column(j).into_owned();
        if di.norm() == 0.0 {
            out.push(SpanCheck {
                from: i,
                to: j,
                relative_residual: f64::INFINITY,
                basis_rank: 0,
                holds: false,
                degenerate: true,
            });
            continue;
        }
        let basis = krylov_basis(a, &di, delta - 1);
        let coef = min_norm_solve(&basis, &DMatrix::from_column_slice(n, 1, dj.as_slice()));
        let resid = (&basis * coef).column(0) - &dj;
        let denom = dj.norm();
        let rel = if denom > 0.0 { resid.norm() / denom } else { 0.0 };
        out.push(SpanCheck {
            from: i,
            to: j,
            relative_residual: rel,
            basis_rank: basis.rank(1e-10 * basis.amax().max(f64::MIN_POSITIVE)),
            holds: rel <= tol,
            degenerate: false,
        });
    }
    Ok(out)
}

/// `[v, A v, …, A^{k−1} v]`.
pub fn krylov_basis(a: &DMatrix<f64>, v: &DVector<f64>, k: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(v.len(), k);
    let mut cur = v.clone();
    for j in 0..k {
        out.set_column(j, &cur);
        cur = a * &cur;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EigenCondition {
    pub holds: bool,
    /// `|h_{Δ−n}|`; may be infinite when it overflows.
    pub lhs: f64,
    /// `Σ_{t<Δ−n} |h_t|`.
    pub rhs: f64,
    pub log_lhs: f64,
    pub log_rhs: f64,
    /// `lhs` and `rhs` agree to about 1e-12 relative.
    pub boundary: bool,
}

/// Complete homogeneous symmetric polynomials `h_0..h_k` of `eigs`.
pub fn complete_homogeneous(eigs: &[Complex64], k: usize) -> Vec<Complex64> {
    let mut h = vec![Complex64::new(0.0, 0.0); k + 1];
    h[0] = Complex64::new(1.0, 0.0);
    // adding one variable at a time: h_t ← h_t + λ h_{t−1}
    for &lam in eigs {
        for t in 1..=k {
            let prev = h[t - 1];
            h[t] += lam * prev;
        }
    }
    h
}

/// Eigenvalue condition `|h_{Δ−n}(λ)| ≤ Σ_{t=0}^{Δ−n−1} |h_t(λ)|` for a
/// `Δ`-spaced attack schedule. Magnitudes above one are factored out and the
/// comparison is made on logarithms.
pub fn eigen_condition(eigs: &[Complex64], delta: usize) -> Result<EigenCondition> {
    let n = eigs.len();
    if n == 0 {
        return Err(SysidError::InvalidParameter("no eigenvalues given".into()));
    }
    if delta < n + 1 {
        return Err(SysidError::Domain(format!("needs spacing >= n + 1 = {}, got {delta}", n + 1)));
    }
    if eigs.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(SysidError::InvalidParameter("non-finite eigenvalue".into()));
    }
    let k = delta - n;
    let s = eigs.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let scale = if s > 1.0 { s } else { 1.0 };
    let mu: Vec<Complex64> = eigs.iter().map(|z| z / scale).collect();
    let h = complete_homogeneous(&mu, k);
    let ls = scale.ln();
    // log lhs = k ln s + ln|h_k(μ)|; rhs = s^k Σ_t s^{t−k} |h_t(μ)|
    let lhs_mag = h[k].norm();
    let tail: f64 = (0..k).map(|t| h[t].norm() * (ls * (t as f64 - k as f64)).exp()).sum();
    let log_lhs = k as f64 * ls + lhs_mag.ln();
    let log_rhs = k as f64 * ls + tail.ln();
    let boundary = (log_lhs - log_rhs).abs() <= 1e-12 * (1.0 + log_rhs.abs());
    Ok(EigenCondition {
        holds: log_lhs <= log_rhs || boundary,
        lhs: log_lhs.exp(),
        rhs: log_rhs.exp(),
        log_lhs,
        log_rhs,
        boundary,
    })
}

/// Binomial coefficients `C(n+i−1, i)` for `i = 0..=k`.
fn multiset_coefficients(n: usize, k: usize) -> Vec<f64> {
    let mut c = vec![1.0; k + 1];
    for i in 1..=k {
        c[i] = c[i - 1] * (n + i - 1) as f64 / i as f64;
    }
    c
}

/// `φ(λ) = C(n+k−1,k) λ^k − Σ_{i<k} C(n+i−1,i) λ^i`.
pub fn cnk_polynomial(n: usize, k: usize, lambda: f64) -> f64 {
    let c = multiset_coefficients(n, k);
    let mut acc = c[k];
    for i in (0..k).rev() {
        acc = acc * lambda - c[i];
    }
    acc
}

/// Positive root `C_{n,k}` of [`cnk_polynomial`], bracketed in `[0, 4]`.
pub fn cnk_bound(n: usize, k: usize, tol: f64) -> Result<f64> {
    if n == 0 || k == 0 {
        return Err(SysidError::InvalidParameter(format!("need n, k >= 1, got n={n}, k={k}")));
    }
    if !(tol > 0.0) {
        return Err(SysidError::InvalidParameter(format!("tolerance must be > 0, got {tol}")));
    }
    let phi = |x: f64| cnk_polynomial(n, k, x);
    let (mut lo, mut hi) = (0.0f64, 4.0f64);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let v = phi(mid);
        if v == 0.0 {
            return Ok(mid);
        }
        if v < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if mid == lo && mid == hi {
            break;
        }
    }
    // Newton polish, kept inside the bracket
    let c = multiset_coefficients(n, k);
    let dphi = |x: f64| {
        let mut acc = k as f64 * c[k];
        for i in (1..k).rev() {
            acc = acc * x - i as f64 * c[i];
        }
        acc
    };
    let mut x = 0.5 * (lo + hi);
    for _ in 0..3 {
        let d = dphi(x);
        if d <= 0.0 {
            break;
        }
        let next = x - phi(x) / d;
        if !(next >= lo && next <= hi) {
            break;
        }
        x = next;
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lti::{make_delta_spaced, simulate, AttackSchedule, DisturbanceModel, InputPolicy, LtiSystem};
    use proptest::prelude::*;

    fn binom(n: u64, k: u64) -> f64 {
        (1..=k).fold(1.0, |acc, i| acc * (n - k + i) as f64 / i as f64)
    }

    #[test]
    fn lemma2_hand_example() {
        let traj = Trajectory::from_parts(
            DMatrix::from_row_slice(1, 4, &[0.0, 0.0, 4.0, 2.0]),
            DMatrix::zeros(0, 3),
            DMatrix::from_row_slice(1, 3, &[0.0, 4.0, 0.0]),
            AttackSchedule::new(3, vec![1]).unwrap(),
            0,
        )
        .unwrap();
        let l = lemma2_condition(&traj).unwrap();
        assert_eq!((l.lhs, l.rhs, l.holds), (4.0, 0.0, true));
    }

    #[test]
    fn lemma2_fails_when_everything_is_attacked() {
        let traj = Trajectory::from_parts(
            DMatrix::from_row_slice(1, 4, &[0.0, 1.0, 2.0, 3.0]),
            DMatrix::zeros(0, 3),
            DMatrix::from_row_slice(1, 3, &[1.0, 1.5, 2.0]),
            AttackSchedule::new(3, vec![0, 1, 2]).unwrap(),
            0,
        )
        .unwrap();
        assert!(!lemma2_condition(&traj).unwrap().holds);
    }

    #[test]
    fn lemma2_holds_after_first_attack_for_two_spacing() {
        let sys = LtiSystem::autonomous(DMatrix::from_element(1, 1, -0.9)).unwrap();
        for seed in 0..20 {
            let first = (seed % 2) as usize;
            for t in (first + 2)..30 {
                let sched = make_delta_spaced(t, 2, first).unwrap();
                let traj = simulate(&sys, &InputPolicy::Zero, &sched, &DisturbanceModel::default(), seed).unwrap();
                assert!(lemma2_condition(&traj).unwrap().holds, "seed {seed} T {t}");
            }
        }
    }

    fn spaced_traj(n: usize, delta: usize, seed: u64) -> (LtiSystem, Trajectory) {
        let a = DMatrix::from_fn(n, n, |i, j| if i == j { 0.5 } else if j == i + 1 { 0.3 } else { 0.0 });
        let sys = LtiSystem::autonomous(a).unwrap();
        let sched = make_delta_spaced(6 * delta, delta, 0).unwrap();
        let traj = simulate(&sys, &InputPolicy::Zero, &sched, &DisturbanceModel::default(), seed).unwrap();
        (sys, traj)
    }

    #[test]
    fn span_holds_when_krylov_spans_everything() {
        let (sys, traj) = spaced_traj(3, 4, 1);
        let checks = span_condition(&traj, sys.a(), 4, 1e-9).unwrap();
        assert!(!checks.is_empty());
        for c in checks {
            assert_eq!(c.basis_rank, 3);
            assert!(c.holds);
        }
    }

    #[test]
    fn span_fails_for_generic_short_bases() {
        let (sys, traj) = spaced_traj(3, 2, 2);
        let checks = span_condition(&traj, sys.a(), 2, 1e-9).unwrap();
        assert!(checks.iter().all(|c| !c.holds && c.relative_residual > 1e-3));
    }

    #[test]
    fn span_holds_for_planted_member() {
        let a = DMatrix::from_row_slice(3, 3, &[0.5, 0.3, 0.0, 0.0, 0.5, 0.3, 0.1, 0.0, 0.5]);
        let d0 = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let d3 = &a * &d0;
        let mut dist = DMatrix::zeros(3, 5);
        dist.set_column(0, &d0);
        dist.set_column(3, &d3);
        let mut states = DMatrix::zeros(3, 6);
        for i in 0..5 {
            let next = &a * states.column(i) + dist.column(i);
            states.set_column(i + 1, &next);
        }
        let traj = Trajectory::from_parts(states, DMatrix::zeros(0, 5), dist, AttackSchedule::new(5, vec![0, 3]).unwrap(), 0)
            .unwrap();
        let checks = span_condition(&traj, &a, 3, 1e-12).unwrap();
        assert_eq!(checks.len(), 1);
        assert!(checks[0].holds);
        assert_eq!(checks[0].basis_rank, 2);
    }

    #[test]
    fn eigen_condition_examples() {
        let zero = [Complex64::new(0.0, 0.0); 3];
        let c = eigen_condition(&zero, 5).unwrap();
        assert!(c.holds);
        assert_eq!(c.lhs, 0.0);
        assert_eq!(c.rhs, 1.0);

        let c = eigen_condition(&[Complex64::new(0.5, 0.0)], 3).unwrap();
        assert!((c.lhs - 0.25).abs() < 1e-15);
        assert!((c.rhs - 1.5).abs() < 1e-15);
        assert!(c.holds);

        assert!(eigen_condition(&[Complex64::new(0.5, 0.0); 3], 3).is_err());
    }

    #[test]
    fn large_eigenvalues_do_not_overflow() {
        let eigs = [Complex64::new(50.0, 0.0), Complex64::new(0.0, 40.0)];
        let c = eigen_condition(&eigs, 400).unwrap();
        assert!(c.log_lhs.is_finite() && c.log_rhs.is_finite());
        assert!(!c.holds);
    }

    #[test]
    fn recurrence_matches_binomial_form() {
        for n in 1..=6usize {
            for k in 0..=6usize {
                let lam = 0.37;
                let h = complete_homogeneous(&vec![Complex64::new(lam, 0.0); n], k);
                let expect = binom((n + k - 1) as u64, k as u64) * lam.powi(k as i32);
                assert!((h[k].re - expect).abs() <= 1e-12 * expect.max(1.0));
            }
        }
    }

    #[test]
    fn recurrence_matches_enumeration() {
        // brute force over exponent vectors for n = 3
        let eigs = [Complex64::new(0.3, 0.4), Complex64::new(-0.7, 0.0), Complex64::new(0.2, -0.1)];
        let h = complete_homogeneous(&eigs, 5);
        for k in 0..=5 {
            let mut sum = Complex64::new(0.0, 0.0);
            for a in 0..=k {
                for b in 0..=(k - a) {
                    let c = k - a - b;
                    sum += eigs[0].powu(a as u32) * eigs[1].powu(b as u32) * eigs[2].powu(c as u32);
                }
            }
            assert!((h[k] - sum).norm() < 1e-14);
        }
    }

    #[test]
    fn cnk_closed_forms() {
        for n in 1..=10 {
            assert!((cnk_bound(n, 1, 1e-12).unwrap() - 1.0 / n as f64).abs() < 1e-9);
        }
        assert_eq!(cnk_bound(1, 1, 1e-12).unwrap(), 1.0);
        for n in 1..=8 {
            assert!(cnk_bound(n, n, 1e-12).unwrap() >= 1.0);
        }
        assert!(cnk_bound(0, 1, 1e-9).is_err());
    }

    #[test]
    fn cnk_one_dimension_approaches_two() {
        let mut prev = 0.0;
        for k in 1..=30 {
            let c = cnk_bound(1, k, 1e-13).unwrap();
            assert!(c > prev && c < 2.0);
            // λ^{k+1} − 2λ^k + 1 = 0 rearranged: c = 2 − c^{−k}
            assert!((c - (2.0 - c.powi(-(k as i32)))).abs() < 1e-9);
            prev = c;
        }
    }

    proptest! {
        #[test]
        fn cnk_is_a_root(n in 1usize..9, k in 1usize..9) {
            let c = cnk_bound(n, k, 1e-12).unwrap();
            prop_assert!(cnk_polynomial(n, k, c - 1e-9) < 0.0);
            prop_assert!(cnk_polynomial(n, k, c + 1e-9) > 0.0);
        }
    }
}
