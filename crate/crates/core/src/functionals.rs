//! The functionals `A_p`, `B_p`, `Ω_p` that drive the convergence of the
//! curvature image iteration, with their `p = 0` branches.
//!
//! All quantities use the same quadrature and the same discrete curvature
//! function as [`CapillaryBody::volume`], so the Hölder and Jensen
//! inequalities between them hold exactly for the discrete measure.

use serde::Serialize;

use crate::body::CapillaryBody;
use crate::domain::ScalarField;
use crate::error::{CapError, Result};

/// `|p|` below this selects the logarithmic `p = 0` branches.
pub const P_ZERO: f64 = 1e-8;

pub fn is_log_branch(p: f64) -> bool {
    p.abs() < P_ZERO
}

fn check_inputs(body: &CapillaryBody, phi: &ScalarField, p: f64, allow_one: bool) -> Result<()> {
    body.domain().check(phi)?;
    let n = body.domain().n() as f64;
    let upper_ok = if allow_one { p <= 1.0 } else { p < 1.0 };
    if !(p >= -n && upper_ok) {
        return Err(CapError::Parameter(format!("exponent p = {p} outside the admissible range")));
    }
    let (min, node) = phi.min();
    if !(min > 0.0) {
        return Err(CapError::Parameter(format!(
            "density must be positive: min {min:.3e} at node {node}"
        )));
    }
    Ok(())
}

fn weighted_sum(body: &CapillaryBody, g: impl Fn(usize) -> f64) -> f64 {
    body.domain().weights().iter().enumerate().map(|(k, w)| w * g(k)).sum()
}

/// `A_p = V·(∫φ s^p dσ)^{−n/p}`, or `V·exp(−∫φ log s dσ / ((1/n)∫φ dσ))` at p = 0.
pub fn a_p(body: &CapillaryBody, phi: &ScalarField, p: f64) -> Result<f64> {
    check_inputs(body, phi, p, true)?;
    let n = body.domain().n() as f64;
    let s = body.support().values();
    let ph = phi.values();
    let v = body.volume();
    if is_log_branch(p) {
        let log_int = weighted_sum(body, |k| -ph[k] * s[k].ln());
        let mass = weighted_sum(body, |k| ph[k]);
        Ok(v * (log_int / (mass / n)).exp())
    } else {
        let int = weighted_sum(body, |k| ph[k] * s[k].powf(p));
        Ok(v * int.powf(-n / p))
    }
}

/// `Ω_p = ∫ φ^{−1/(p−1)} f^{p/(p−1)} dσ`, or
/// `exp(∫φ log f dσ / ((1/n)∫φ dσ))` at p = 0.
pub fn omega_p(body: &CapillaryBody, phi: &ScalarField, p: f64) -> Result<f64> {
    check_inputs(body, phi, p, false)?;
    let n = body.domain().n() as f64;
    let f = body.curvature_function().values();
    let ph = phi.values();
    if is_log_branch(p) {
        let log_int = weighted_sum(body, |k| ph[k] * f[k].ln());
        let mass = weighted_sum(body, |k| ph[k]);
        Ok((log_int / (mass / n)).exp())
    } else {
        let q = p / (p - 1.0);
        let r = -1.0 / (p - 1.0);
        Ok(weighted_sum(body, |k| ph[k].powf(r) * f[k].powf(q)))
    }
}

/// `B_p = V^{1−n}·Ω_p^{n(p−1)/p}`, or
/// `V^{1−n}·exp(∫ log(f/φ) dσ̃)^n·(∫φ dσ)^n` at p = 0 with `dσ̃ = φ dσ / ∫φ dσ`.
pub fn b_p(body: &CapillaryBody, phi: &ScalarField, p: f64) -> Result<f64> {
    check_inputs(body, phi, p, false)?;
    let n = body.domain().n() as f64;
    let v = body.volume();
    if is_log_branch(p) {
        let f = body.curvature_function().values();
        let ph = phi.values();
        let mass = weighted_sum(body, |k| ph[k]);
        let mean_log = weighted_sum(body, |k| ph[k] * (f[k] / ph[k]).ln()) / mass;
        Ok(v.powf(1.0 - n) * (n * mean_log).exp() * mass.powf(n))
    } else {
        let omega = omega_p(body, phi, p)?;
        Ok(v.powf(1.0 - n) * omega.powf(n * (p - 1.0) / p))
    }
}

/// The quantity whose monotonicity under the curvature image operator is
/// asserted: `Ω_p^{(p−1)/p}` for p ≠ 0 and `Ω_0` itself at p = 0.
pub fn omega_monotone_form(omega: f64, p: f64) -> f64 {
    if is_log_branch(p) {
        omega
    } else {
        omega.powf((p - 1.0) / p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FunctionalReport {
    pub n: usize,
    pub theta: f64,
    pub p: f64,
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B", skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(rename = "Omega", skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    #[serde(rename = "V")]
    pub volume: f64,
}

/// All functionals at once; `B` and `Ω` are omitted at p = 1.
pub fn report(body: &CapillaryBody, phi: &ScalarField, p: f64) -> Result<FunctionalReport> {
    let a = a_p(body, phi, p)?;
    let (b, omega) = if p < 1.0 {
        (Some(b_p(body, phi, p)?), Some(omega_p(body, phi, p)?))
    } else {
        (None, None)
    };
    Ok(FunctionalReport {
        n: body.domain().n(),
        theta: body.domain().theta(),
        p,
        a,
        b,
        omega,
        volume: body.volume(),
    })
}

/// Both sides of `B_p(ΛΣ) = nⁿ (V(Σ)/V(ΛΣ))^{n−1} A_p(Σ)` and of
/// `B_p(Σ) ≤ nⁿ A_p(Σ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityReport {
    pub identity_lhs: f64,
    pub identity_rhs: f64,
    /// `|lhs − rhs| / |rhs|`.
    pub identity_rel_error: f64,
    pub inequality_lhs: f64,
    pub inequality_rhs: f64,
    /// `lhs − rhs`; non-positive when the inequality holds.
    pub inequality_gap: f64,
    pub volume_ratio: f64,
    pub identity_ok: bool,
    pub inequality_ok: bool,
}

/// Relative tolerance for the identity and absolute slack for the inequality.
#[derive(Debug, Clone, Copy)]
pub struct IdentityTolerances {
    pub identity_rel: f64,
    pub inequality_abs: f64,
}

impl Default for IdentityTolerances {
    fn default() -> Self {
        IdentityTolerances { identity_rel: 1e-6, inequality_abs: 1e-8 }
    }
}

pub fn check_identity_and_inequalities(
    sigma: &CapillaryBody,
    lambda_sigma: &CapillaryBody,
    phi: &ScalarField,
    p: f64,
    tol: IdentityTolerances,
) -> Result<IdentityReport> {
    if !sigma.domain().same_grid(lambda_sigma.domain()) {
        return Err(CapError::DomainMismatch);
    }
    let n = sigma.domain().n() as f64;
    let nn = n.powf(n);
    let v = sigma.volume();
    let v_lambda = lambda_sigma.volume();
    let a_sigma = a_p(sigma, phi, p)?;
    let identity_lhs = b_p(lambda_sigma, phi, p)?;
    let identity_rhs = nn * (v / v_lambda).powf(n - 1.0) * a_sigma;
    let identity_rel_error = ((identity_lhs - identity_rhs) / identity_rhs).abs();
    let inequality_lhs = b_p(sigma, phi, p)?;
    let inequality_rhs = nn * a_sigma;
    let inequality_gap = inequality_lhs - inequality_rhs;
    Ok(IdentityReport {
        identity_lhs,
        identity_rhs,
        identity_rel_error,
        inequality_lhs,
        inequality_rhs,
        inequality_gap,
        volume_ratio: v_lambda / v,
        identity_ok: identity_rel_error <= tol.identity_rel,
        inequality_ok: inequality_gap <= tol.inequality_abs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::body::cap_body;
    use crate::domain::{make_domain, DomainRef, Mode};
    use approx::assert_relative_eq;
    use std::f64::consts::FRAC_PI_3;

    fn arc() -> DomainRef {
        make_domain(2, FRAC_PI_3, 257, Mode::Arc).unwrap()
    }

    #[test]
    fn a_p_unit_cap_p1() {
        let d = arc();
        let cap = cap_body(&d, 1.0).unwrap();
        let one = ScalarField::constant(&d, 1.0);
        let tol = 10.0 * d.h() * d.h();
        assert_relative_eq!(a_p(&cap, &one, 1.0).unwrap(), 0.4070415, epsilon = tol);
    }

    #[test]
    fn a_0_against_quadrature_oracle() {
        // ∫ over the full arc [−θ, θ] is twice the half-arc integral and
        // (1/n)∫φ dσ = θ, so A_0 = V·exp(−(2/θ)∫_0^θ log(1 − ½cosβ) dβ).
        // Composite Simpson with 20000 panels.
        let theta = FRAC_PI_3;
        let m = 20_000;
        let hq = theta / m as f64;
        let g = |b: f64| (1.0 - 0.5 * b.cos()).ln();
        let mut simpson = g(0.0) + g(theta);
        for k in 1..m {
            simpson += if k % 2 == 1 { 4.0 } else { 2.0 } * g(k as f64 * hq);
        }
        simpson *= hq / 3.0;
        let v_exact = theta - theta.sin() * theta.cos();
        let oracle = v_exact * (-2.0 * simpson / theta).exp();

        let d = arc();
        let cap = cap_body(&d, 1.0).unwrap();
        let one = ScalarField::constant(&d, 1.0);
        assert_relative_eq!(a_p(&cap, &one, 0.0).unwrap(), oracle, epsilon = 10.0 * d.h() * d.h());
    }

    #[test]
    fn b_p_unit_cap() {
        let d = arc();
        let cap = cap_body(&d, 1.0).unwrap();
        let one = ScalarField::constant(&d, 1.0);
        let tol = 10.0 * d.h() * d.h();
        assert_relative_eq!(b_p(&cap, &one, 0.5).unwrap(), 0.3712252, epsilon = tol);
        assert_relative_eq!(b_p(&cap, &one, 0.0).unwrap(), 7.1415884, epsilon = 10.0 * tol);
        assert!(b_p(&cap, &one, 1.0).is_err());
    }

    #[test]
    fn omega_unit_cap() {
        let d = arc();
        let one = ScalarField::constant(&d, 1.0);
        let cap = cap_body(&d, 1.0).unwrap();
        let tol = 10.0 * d.h() * d.h();
        for p in [-1.5, -0.5, 0.5] {
            assert_relative_eq!(omega_p(&cap, &one, p).unwrap(), 2.0943951, epsilon = tol);
        }
        assert_relative_eq!(omega_p(&cap, &one, 0.0).unwrap(), 1.0, epsilon = tol);
        let cap2 = cap_body(&d, 2.0).unwrap();
        assert_relative_eq!(omega_p(&cap2, &one, 0.0).unwrap(), 4.0, epsilon = 4.0 * tol);
    }

    #[test]
    fn rejects_bad_inputs() {
        let d = arc();
        let cap = cap_body(&d, 1.0).unwrap();
        let one = ScalarField::constant(&d, 1.0);
        assert!(a_p(&cap, &one, -2.5).is_err());
        assert!(a_p(&cap, &one, 1.5).is_err());
        assert!(a_p(&cap, &one.map(|_| 0.0), 0.5).is_err());
        let other = ScalarField::constant(&make_domain(2, FRAC_PI_3, 65, Mode::Arc).unwrap(), 1.0);
        assert_eq!(a_p(&cap, &other, 0.5), Err(CapError::DomainMismatch));
    }

    #[test]
    fn a_p_is_dilation_invariant() {
        let d = arc();
        let cap = cap_body(&d, 1.0).unwrap();
        let phi = ScalarField::from_fn(&d, |nd| 1.0 + 0.3 * (2.0 * nd.beta).cos()).unwrap();
        for p in [-2.0, -1.0, 0.0, 0.5, 1.0] {
            let a = a_p(&cap, &phi, p).unwrap();
            for lambda in [0.3, 2.7] {
                let b = a_p(&cap.scaled(lambda).unwrap(), &phi, p).unwrap();
                assert!(((a - b) / a).abs() < 1e-12, "p = {p}");
            }
        }
    }

    #[test]
    fn jensen_strict_for_cap_with_constant_density() {
        let d = arc();
        let cap = cap_body(&d, 1.0).unwrap();
        let one = ScalarField::constant(&d, 1.0);
        let b = b_p(&cap, &one, 0.0).unwrap();
        let a = a_p(&cap, &one, 0.0).unwrap();
        assert!(b < 4.0 * a - 1e-6);
    }
}
