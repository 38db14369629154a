//! Closed-form constants of the convergence theory, as pure evaluators.
//!
//! Everything here is a function of the problem constants
//! `(m, c, C, M)` with `Q = C/c`:
//!
//! * `φ = 2(1−η)Q` — the uniform upper bound on the normalized acceptance
//!   stepsize `γ*ᵏ = α*ᵏ/k`.
//! * the `B` recursion `B₁ = 0`, `Bⱼ₊₁ = (1 + (2Q/m)φ)Bⱼ + 2M/(cm)` whose
//!   partial sums `B(φ) = Σⱼ₌₂..ₘ Bⱼ(φ)` bound how far inner iterates can
//!   drift, in units of `γᵏ‖∇f(x₁ᵏ)‖`;
//! * `κ = φ/Q² · 1/(2B(φ)C/(1−B(φ)Cφ) + 1)` — an explicit positive lower
//!   bound on the asymptotic normalized stepsize, valid when
//!   `φ < 1/(B(φ)C)`;
//! * the local linear rate bounds `r_ν(φ)` and their sharper variant
//!   `r̂_ν(φ)` available under extra Hessian regularity;
//! * `φ̄_ν` — the supremum of `φ` for which `r_ν(φ) < 1` is guaranteed,
//!   found as the smallest positive root of four polynomial conditions;
//! * the matching stepsize-control threshold `η_min = 1 − φ̄_ν/(2Q)`.
//!
//! All functions are side-effect free so they double as oracles for the
//! stepsize and diagnostics tests.

use alloc::vec::Vec;

use crate::problems::Problem;
use crate::{Error, Result};

/// The scalar metadata the theory consumes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemConstants {
    pub m: usize,
    /// Lower curvature bound `c`.
    pub eig_lower: f64,
    /// Upper curvature bound `C`.
    pub eig_upper: f64,
    /// Gradient-growth constant `M`, when the problem satisfies one.
    pub gradient_growth: Option<f64>,
}

impl ProblemConstants {
    pub fn new(m: usize, eig_lower: f64, eig_upper: f64, gradient_growth: Option<f64>) -> Self {
        ProblemConstants {
            m,
            eig_lower,
            eig_upper,
            gradient_growth,
        }
    }

    pub fn from_problem(p: &Problem) -> Self {
        ProblemConstants {
            m: p.m(),
            eig_lower: p.eig_lower,
            eig_upper: p.eig_upper,
            gradient_growth: p.gradient_growth,
        }
    }

    /// Condition number `Q = C/c`.
    pub fn q(&self) -> f64 {
        self.eig_upper / self.eig_lower
    }

    fn validate(&self) -> Result<()> {
        if self.m < 2 {
            return Err(Error::invalid("need m >= 2"));
        }
        if !(self.eig_lower > 0.0 && self.eig_upper >= self.eig_lower) {
            return Err(Error::invalid("need 0 < c <= C"));
        }
        if matches!(self.gradient_growth, Some(g) if g <= 0.0) {
            return Err(Error::invalid("need M > 0 when set"));
        }
        Ok(())
    }

    fn growth(&self) -> Result<f64> {
        self.gradient_growth
            .ok_or_else(|| Error::invalid("gradient growth constant M is not set"))
    }
}

/// `φ = 2(1−η)Q`.
pub fn phi(eta: f64, q: f64) -> Result<f64> {
    if !(0.0 < eta && eta < 1.0) {
        return Err(Error::invalid("need 0 < eta < 1"));
    }
    if q < 1.0 {
        return Err(Error::invalid("need Q >= 1"));
    }
    Ok(2.0 * (1.0 - eta) * q)
}

/// The inner-drift coefficients `B₁..Bₘ` and their sum `B(φ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BSequence {
    /// `B₁ = 0, …, Bₘ`.
    pub values: Vec<f64>,
    /// `B(φ) = Σⱼ₌₂..ₘ Bⱼ(φ)`.
    pub total: f64,
}

fn b_sequence_with_factor(factor: f64, consts: &ProblemConstants) -> Result<BSequence> {
    consts.validate()?;
    let growth = consts.growth()?;
    let m = consts.m;
    let increment = 2.0 * growth / (consts.eig_lower * m as f64);
    let mut values = Vec::with_capacity(m);
    values.push(0.0);
    for j in 1..m {
        let prev = values[j - 1];
        values.push(factor * prev + increment);
    }
    let total = values.iter().skip(1).sum();
    Ok(BSequence { values, total })
}

/// Limit recursion `Bⱼ₊₁ = (1 + (2Q/m)φ)Bⱼ + 2M/(cm)`, `B₁ = 0`.
pub fn b_sequence(phi: f64, consts: &ProblemConstants) -> Result<BSequence> {
    if phi < 0.0 {
        return Err(Error::invalid("need phi >= 0"));
    }
    b_sequence_with_factor(1.0 + 2.0 * consts.q() / consts.m as f64 * phi, consts)
}

/// Finite-`k` variant: growth factor `1 + (2Q/m)·max(1/k, φ)`.
pub fn b_sequence_k(phi: f64, consts: &ProblemConstants, k: usize) -> Result<BSequence> {
    if phi < 0.0 {
        return Err(Error::invalid("need phi >= 0"));
    }
    if k == 0 {
        return Err(Error::invalid("need k >= 1"));
    }
    let rate = (1.0 / k as f64).max(phi);
    b_sequence_with_factor(1.0 + 2.0 * consts.q() / consts.m as f64 * rate, consts)
}

/// `inf_φ B(φ) = lim_{φ→0} B(φ) = M(m−1)/c`, the floor that keeps
/// `B(φ)C` away from zero.
pub fn b_min(consts: &ProblemConstants) -> Result<f64> {
    consts.validate()?;
    let growth = consts.growth()?;
    Ok(growth * (consts.m as f64 - 1.0) / consts.eig_lower)
}

/// `sup_φ B(φ)` over the admissible range `φ ∈ (0, 2Q)`: `B` is a
/// polynomial, so the supremum is the value at the endpoint. Reporting
/// only — it shows the `φ < 1/(B_max·C)` region is always nonempty.
pub fn b_max(consts: &ProblemConstants) -> Result<f64> {
    Ok(b_sequence(2.0 * consts.q(), consts)?.total)
}

/// The common bracket `1/(2B(φ)C/(1−B(φ)Cφ) + 1)`, or `None` outside the
/// domain `φ < 1/(B(φ)C)`.
fn stepsize_bracket(phi: f64, consts: &ProblemConstants) -> Result<Option<(f64, f64)>> {
    if phi < 0.0 {
        return Err(Error::invalid("need phi >= 0"));
    }
    let bc = b_sequence(phi, consts)?.total * consts.eig_upper;
    if bc * phi >= 1.0 {
        return Ok(None);
    }
    let bracket = 1.0 / (2.0 * bc / (1.0 - bc * phi) + 1.0);
    Ok(Some((bracket, bc)))
}

/// Explicit lower bound `κ` on the asymptotic normalized stepsize:
/// `κ = φ/Q² · 1/(2B(φ)C/(1−B(φ)Cφ) + 1)`.
///
/// `Ok(None)` signals `φ ≥ 1/(B(φ)C)`, i.e. the hypothesis under which
/// this choice of `κ` is valid fails — deliberately not an error.
pub fn kappa(phi: f64, consts: &ProblemConstants) -> Result<Option<f64>> {
    let q = consts.q();
    Ok(stepsize_bracket(phi, consts)?.map(|(bracket, _)| phi / (q * q) * bracket))
}

/// Guaranteed local linear-rate bound
/// `r_ν(φ) = 1 − φ(ν/Q³)·bracket + φ²QB(φ)C`; `None` outside the κ domain.
pub fn r_nu(phi: f64, nu: f64, consts: &ProblemConstants) -> Result<Option<f64>> {
    if !(0.0 < nu && nu < 1.0) {
        return Err(Error::invalid("need 0 < nu < 1"));
    }
    let q = consts.q();
    Ok(stepsize_bracket(phi, consts)?
        .map(|(bracket, bc)| 1.0 - phi * nu / (q * q * q) * bracket + phi * phi * q * bc))
}

/// Sharper rate bound under asymptotically exact curvature:
/// `r̂_ν(φ) = 1 − φ(ν/Q²)·bracket + φ²B(φ)C ≤ r_ν(φ)`, equality iff `Q=1`.
pub fn r_hat_nu(phi: f64, nu: f64, consts: &ProblemConstants) -> Result<Option<f64>> {
    if !(0.0 < nu && nu < 1.0) {
        return Err(Error::invalid("need 0 < nu < 1"));
    }
    let q = consts.q();
    Ok(stepsize_bracket(phi, consts)?
        .map(|(bracket, bc)| 1.0 - phi * nu / (q * q) * bracket + phi * phi * bc))
}

/// Relative scan resolution for the `φ̄_ν` sign scan over `(0, 2Q]`.
const PHI_BAR_SCAN_STEP_REL: f64 = 1e-4;

/// The `r_ν(φ) < 1` region boundary `φ̄_ν`: smallest positive root over
/// the polynomial system
///
/// ```text
///     p₁(φ) = B(φ)²C²φ² − (2B(φ)C + 1 + ψ)B(φ)Cφ + ψ,   ψ = ν/Q⁴
///     p₃(φ) = 1/Q − φ
///     p₄(φ) = 1 − φB(φ)C
/// ```
///
/// (the remaining condition `φ > 0` has no positive root). All conditions
/// hold strictly on `(0, φ̄_ν)`. Roots are located by a dense sign scan
/// at resolution `2Q·1e−4` followed by bisection to bracket width `tol`.
///
/// Returns `(value, bracketed)`; `bracketed = false` means no sign change
/// was found below `2Q` and the value is the scan limit `2Q` itself.
pub fn phi_bar(nu: f64, consts: &ProblemConstants, tol: f64) -> Result<(f64, bool)> {
    if !(0.0 < nu && nu < 1.0) {
        return Err(Error::invalid("need 0 < nu < 1"));
    }
    if tol <= 0.0 {
        return Err(Error::invalid("need tol > 0"));
    }
    consts.validate()?;
    consts.growth()?;
    let q = consts.q();
    let psi = nu / (q * q * q * q);
    let polys = |phi_val: f64| -> Result<[f64; 3]> {
        let bc = b_sequence(phi_val, consts)?.total * consts.eig_upper;
        let p1 = bc * bc * phi_val * phi_val - (2.0 * bc + 1.0 + psi) * bc * phi_val + psi;
        let p3 = 1.0 / q - phi_val;
        let p4 = 1.0 - phi_val * bc;
        Ok([p1, p3, p4])
    };

    let step = 2.0 * q * PHI_BAR_SCAN_STEP_REL;
    let steps = (2.0 * q / step) as usize;
    let mut prev_phi = 0.0;
    let mut prev = polys(0.0)?;
    let mut brackets: [Option<(f64, f64)>; 3] = [None; 3];
    for j in 1..=steps {
        let phi_val = step * j as f64;
        let vals = polys(phi_val)?;
        for i in 0..3 {
            if brackets[i].is_none() && prev[i] > 0.0 && vals[i] <= 0.0 {
                brackets[i] = Some((prev_phi, phi_val));
            }
        }
        if brackets.iter().all(|b| b.is_some()) {
            break;
        }
        prev_phi = phi_val;
        prev = vals;
    }

    let mut best: Option<f64> = None;
    for (i, bracket) in brackets.iter().enumerate() {
        let Some((mut lo, mut hi)) = *bracket else {
            continue;
        };
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            if polys(mid)?[i] <= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        // The conditions hold strictly on (0, lo], so lo is the safe side.
        best = Some(best.map_or(lo, |b: f64| b.min(lo)));
    }
    match best {
        Some(root) => Ok((root, true)),
        None => Ok((2.0 * q, false)),
    }
}

/// Stepsize-control threshold: any `η ∈ (η_min, 1)` with
/// `η_min = 1 − φ̄_ν/(2Q)` puts `φ = 2(1−η)Q` inside `(0, φ̄_ν)`.
pub fn eta_threshold(nu: f64, consts: &ProblemConstants) -> Result<f64> {
    let (bar, _) = phi_bar(nu, consts, 1e-12)?;
    Ok(1.0 - bar / (2.0 * consts.q()))
}

/// Everything the theory says about one set of constants at `(η, ν)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoryReport {
    pub constants: ProblemConstants,
    pub eta: f64,
    pub nu: f64,
    pub phi: f64,
    pub b_values: Vec<f64>,
    pub b_total: f64,
    pub b_min: f64,
    pub b_max: f64,
    /// `None` when `φ` is outside the κ hypothesis `φ < 1/(B(φ)C)`.
    pub kappa: Option<f64>,
    pub r_nu: Option<f64>,
    pub r_hat_nu: Option<f64>,
    pub phi_bar_nu: f64,
    pub phi_bar_bracketed: bool,
    pub eta_threshold: f64,
}

pub fn theory_report(consts: &ProblemConstants, eta: f64, nu: f64) -> Result<TheoryReport> {
    let phi_val = phi(eta, consts.q())?;
    let bs = b_sequence(phi_val, consts)?;
    let (bar, bracketed) = phi_bar(nu, consts, 1e-12)?;
    Ok(TheoryReport {
        constants: *consts,
        eta,
        nu,
        phi: phi_val,
        b_total: bs.total,
        b_values: bs.values,
        b_min: b_min(consts)?,
        b_max: b_max(consts)?,
        kappa: kappa(phi_val, consts)?,
        r_nu: r_nu(phi_val, nu, consts)?,
        r_hat_nu: r_hat_nu(phi_val, nu, consts)?,
        phi_bar_nu: bar,
        phi_bar_bracketed: bracketed,
        eta_threshold: 1.0 - bar / (2.0 * consts.q()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn consts(m: usize, c: f64, cc: f64, growth: f64) -> ProblemConstants {
        ProblemConstants::new(m, c, cc, Some(growth))
    }

    #[test]
    fn phi_arithmetic() {
        assert_eq!(phi(0.75, 4.0).unwrap(), 2.0);
        assert_eq!(phi(0.5, 1.0).unwrap(), 1.0);
        assert!(phi(1.0 - 1e-12, 3.0).unwrap() < 1e-11);
        assert!(phi(0.0, 2.0).is_err());
        assert!(phi(0.5, 0.5).is_err());
    }

    #[test]
    fn b_sequence_single_step() {
        // m=2: B = (0, 2M/(cm)) regardless of φ.
        let cs = consts(2, 1.0, 1.0, 1.0);
        for phi_val in [0.0, 0.3, 2.0] {
            let bs = b_sequence(phi_val, &cs).unwrap();
            assert_eq!(bs.values.as_slice(), &[0.0, 1.0]);
            assert_eq!(bs.total, 1.0);
        }
    }

    #[test]
    fn b_sequence_hand_recursion_m3() {
        // m=3, Q=1, M=1, c=1, φ=0.5: B₂=2/3, B₃=14/9, total=20/9.
        let cs = consts(3, 1.0, 1.0, 1.0);
        let bs = b_sequence(0.5, &cs).unwrap();
        assert!((bs.values[1] - 2.0 / 3.0).abs() < 1e-15);
        assert!((bs.values[2] - 14.0 / 9.0).abs() < 1e-15);
        assert!((bs.total - 20.0 / 9.0).abs() < 1e-14);
    }

    #[test]
    fn b_sequence_matches_geometric_closed_form() {
        // Bⱼ = (2M/(cm))·((1+a)^{j−1} − 1)/a with a = 2Qφ/m.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let m = 2 + (rng.random::<f64>() * 48.0) as usize;
            let c = 0.5 + rng.random::<f64>();
            let q = 1.0 + 4.0 * rng.random::<f64>();
            let growth = 0.1 + rng.random::<f64>();
            let phi_val = 0.01 + 2.0 * rng.random::<f64>();
            let cs = consts(m, c, c * q, growth);
            let bs = b_sequence(phi_val, &cs).unwrap();
            let a = 2.0 * q * phi_val / m as f64;
            for (j, &b) in bs.values.iter().enumerate() {
                let closed =
                    2.0 * growth / (c * m as f64) * (libm::pow(1.0 + a, j as f64) - 1.0) / a;
                assert!(
                    (b - closed).abs() <= 1e-12 * (1.0 + closed.abs()),
                    "m={m} j={j}: {b} vs {closed}"
                );
            }
        }
    }

    #[test]
    fn b_total_monotone_with_floor_at_b_min() {
        let cs = consts(7, 0.8, 2.4, 0.9);
        let floor = b_min(&cs).unwrap();
        assert!((floor - 0.9 * 6.0 / 0.8).abs() < 1e-12);
        let near_zero = b_sequence(1e-12, &cs).unwrap().total;
        assert!((near_zero - floor).abs() <= 1e-9);
        let mut prev = near_zero;
        for i in 1..=40 {
            let total = b_sequence(i as f64 * 0.05, &cs).unwrap().total;
            assert!(total >= prev - 1e-12);
            prev = total;
        }
    }

    #[test]
    fn b_sequence_k_uses_max_of_inverse_k_and_phi() {
        let cs = consts(4, 1.0, 2.0, 0.5);
        // Large k: the k-variant coincides with the limit recursion.
        let a = b_sequence_k(0.3, &cs, 1_000_000_000).unwrap();
        let b = b_sequence(0.3, &cs).unwrap();
        for (x, y) in a.values.iter().zip(b.values.iter()) {
            assert!((x - y).abs() <= 1e-6 * (1.0 + y.abs()));
        }
        // Small k with tiny φ: the 1/k branch dominates.
        let a = b_sequence_k(1e-9, &cs, 2).unwrap();
        let c = b_sequence(0.5, &cs).unwrap();
        for (x, y) in a.values.iter().zip(c.values.iter()) {
            assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn kappa_frozen_scalar_case() {
        // Q=1, C=c=1, m=2, M=1, φ=0.1: B=1, κ = 0.1/(2/0.9 + 1) = 0.09/2.9.
        let cs = consts(2, 1.0, 1.0, 1.0);
        let k = kappa(0.1, &cs).unwrap().unwrap();
        assert!((k - 0.09 / 2.9).abs() <= 1e-12, "kappa = {k:.17}");
    }

    #[test]
    fn kappa_limits_and_domain_flag() {
        let cs = consts(2, 1.0, 1.0, 1.0);
        // φ→0 ⇒ κ→0.
        assert!(kappa(1e-14, &cs).unwrap().unwrap() < 1e-13);
        // B(φ)C = 1 here, so the hypothesis fails exactly at φ = 1.
        assert!(kappa(0.999999, &cs).unwrap().is_some());
        assert!(kappa(1.0, &cs).unwrap().is_none());
        assert!(kappa(5.0, &cs).unwrap().is_none());
        // κ → 0 as φ approaches the domain boundary.
        assert!(kappa(1.0 - 1e-9, &cs).unwrap().unwrap() < 1e-8);
    }

    #[test]
    fn kappa_positive_across_random_draws() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut checked = 0;
        for _ in 0..100 {
            let m = 2 + (rng.random::<f64>() * 18.0) as usize;
            let c = 0.5 + rng.random::<f64>();
            let q = 1.0 + 3.0 * rng.random::<f64>();
            let growth = 0.05 + 0.5 * rng.random::<f64>();
            let cs = consts(m, c, c * q, growth);
            let bc = b_sequence(0.0, &cs).unwrap().total * cs.eig_upper;
            // Inside the hypothesis by construction.
            let phi_val = 0.5 / bc.max(1.0);
            if let Some(k) = kappa(phi_val, &cs).unwrap() {
                assert!(k > 0.0);
                checked += 1;
            }
        }
        assert!(checked >= 90);
    }

    #[test]
    fn r_nu_frozen_scalar_case() {
        // Q=1, C=c=1, m=2, M=1, ν=0.5, φ=0.1:
        // bracket = 0.9/2.9, r = 1 − 0.05·(0.9/2.9) + 0.01.
        let cs = consts(2, 1.0, 1.0, 1.0);
        let r = r_nu(0.1, 0.5, &cs).unwrap().unwrap();
        let expect = 1.0 - 0.05 * (0.9 / 2.9) + 0.01;
        assert!((r - expect).abs() <= 1e-12, "r_nu = {r:.17}");
        assert!((r - 0.994_482_758_620_689_7).abs() <= 1e-12);
    }

    #[test]
    fn r_nu_at_phi_zero_is_one() {
        let cs = consts(5, 1.0, 3.0, 0.7);
        assert_eq!(r_nu(0.0, 0.5, &cs).unwrap().unwrap(), 1.0);
        // ...and decreases as φ leaves zero (the linear term dominates the
        // quadratic one only below ~νB/(Q⁴BC·(2BC+1)) here, so probe small).
        assert!(r_nu(1e-6, 0.5, &cs).unwrap().unwrap() < 1.0);
    }

    #[test]
    fn r_hat_below_r_with_equality_iff_q_is_one() {
        let q1 = consts(4, 1.0, 1.0, 0.5);
        for phi_val in [0.01, 0.05, 0.1] {
            let r = r_nu(phi_val, 0.5, &q1).unwrap().unwrap();
            let rh = r_hat_nu(phi_val, 0.5, &q1).unwrap().unwrap();
            assert!((r - rh).abs() <= 1e-15);
        }
        let q2 = consts(4, 1.0, 2.0, 0.5);
        for phi_val in [0.01, 0.05, 0.1] {
            let r = r_nu(phi_val, 0.5, &q2).unwrap().unwrap();
            let rh = r_hat_nu(phi_val, 0.5, &q2).unwrap().unwrap();
            assert!(rh < r, "phi={phi_val}: rhat {rh} !< r {r}");
        }
    }

    #[test]
    fn phi_bar_matches_quadratic_formula_for_m2() {
        // m=2 makes B constant in φ, so p₁ is an honest quadratic.
        let cs = consts(2, 1.0, 1.5, 0.75);
        let nu = 0.5;
        let (bar, bracketed) = phi_bar(nu, &cs, 1e-12).unwrap();
        assert!(bracketed);
        let q = cs.q();
        let bc = b_sequence(0.0, &cs).unwrap().total * cs.eig_upper;
        let psi = nu / (q * q * q * q);
        // p₁ roots of (bc·φ)² − (2bc+1+ψ)(bc·φ) + ψ = 0, via the formula.
        let a = bc * bc;
        let b = -(2.0 * bc + 1.0 + psi) * bc;
        let c = psi;
        let disc = libm::sqrt(b * b - 4.0 * a * c);
        let r1 = (-b - disc) / (2.0 * a);
        let oracle = r1.min(1.0 / q).min(1.0 / bc);
        assert!(
            (bar - oracle).abs() <= 1e-9,
            "phi_bar {bar} vs quadratic-formula oracle {oracle}"
        );
    }

    #[test]
    fn phi_bar_below_structural_caps_and_r_nu_below_one_inside() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let m = 2 + (rng.random::<f64>() * 8.0) as usize;
            let c = 0.5 + rng.random::<f64>();
            let q = 1.0 + 2.0 * rng.random::<f64>();
            let growth = 0.05 + 0.5 * rng.random::<f64>();
            let nu = 0.05 + 0.9 * rng.random::<f64>();
            let cs = consts(m, c, c * q, growth);
            let (bar, bracketed) = phi_bar(nu, &cs, 1e-12).unwrap();
            assert!(bracketed);
            assert!(bar <= 1.0 / q + 1e-9);
            // p₄ at φ̄: 1 − φB(φ)C ≥ 0 within tolerance.
            let bc = b_sequence(bar, &cs).unwrap().total * cs.eig_upper;
            assert!(1.0 - bar * bc >= -1e-9);
            for s in 1..100 {
                let phi_val = bar * s as f64 / 100.0;
                if phi_val == 0.0 {
                    continue;
                }
                let r = r_nu(phi_val, nu, &cs).unwrap().expect("inside domain");
                assert!(r < 1.0, "r_nu({phi_val}) = {r} not < 1 (bar = {bar})");
            }
        }
    }

    #[test]
    fn eta_threshold_inverts_into_the_linear_region() {
        let cs = consts(3, 1.0, 1.2, 0.4);
        let nu = 0.5;
        let eta_min = eta_threshold(nu, &cs).unwrap();
        assert!(0.0 < eta_min && eta_min < 1.0);
        let (bar, _) = phi_bar(nu, &cs, 1e-12).unwrap();
        for eps in [1e-6, 1e-3, 0.01] {
            let eta = eta_min + eps;
            if eta < 1.0 {
                assert!(phi(eta, cs.q()).unwrap() < bar);
            }
        }
        // φ̄ → 0 would push η_min → 1; tiny φ̄ means η close to 1.
        assert!((1.0 - eta_min) * 2.0 * cs.q() - bar <= 1e-12);
    }

    #[test]
    fn theory_report_is_internally_consistent() {
        let cs = consts(4, 1.0, 1.1, 0.3);
        let report = theory_report(&cs, 0.97, 0.5).unwrap();
        assert_eq!(report.b_values.len(), 4);
        assert_eq!(report.b_values[0], 0.0);
        assert!(report.b_total >= report.b_min - 1e-12);
        assert!(report.b_max >= report.b_total - 1e-12);
        assert!(report.phi_bar_bracketed);
        if report.phi < report.phi_bar_nu {
            assert!(report.r_nu.unwrap() < 1.0);
            assert!(report.kappa.unwrap() > 0.0);
        }
    }

    #[test]
    fn missing_growth_constant_is_an_argument_error() {
        let cs = ProblemConstants::new(3, 1.0, 2.0, None);
        assert!(b_sequence(0.1, &cs).is_err());
        assert!(kappa(0.1, &cs).is_err());
        assert!(phi_bar(0.5, &cs, 1e-10).is_err());
    }
}
