//! Even capillary Minkowski problem: find the capillary body with
//! `σ_{n−1}(τ[s]) = f` in `C_θ` and `∂_β s = cotθ·s` on `∂C_θ`.
//!
//! For n = 2 the equation `s'' + s = f` is linear and one banded solve
//! suffices. For axisymmetric n = 3 the equation
//! `(s'' + s)(cotβ·s' + s) = f` is solved by damped Newton. Restricting to
//! even (half-grid) fields removes the horizontal-translation kernel, so both
//! systems are nonsingular.

use crate::body::{CapillaryBody, Tolerances};
use crate::domain::{DomainRef, Mode, ScalarField};
use crate::stencil::{dot2, Banded};
use crate::error::{CapError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Relative residual threshold `max |σ_{n−1}(τ) − f| / f`.
    pub newton_tol: f64,
    pub max_newton: usize,
    /// Initial Newton step factor.
    pub damping: f64,
    /// Step halvings allowed per Newton step.
    pub max_halvings: usize,
    pub tolerances: Tolerances,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            newton_tol: 1e-10,
            max_newton: 50,
            damping: 1.0,
            max_halvings: 30,
            tolerances: Tolerances::default(),
        }
    }
}

impl SolveOptions {
    fn validate(&self) -> Result<()> {
        if !(self.newton_tol > 0.0) || self.max_newton < 1 || !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(CapError::Parameter(format!("invalid solve options {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub body: CapillaryBody,
    pub newton_steps: usize,
    /// Final `max |σ_{n−1}(τ) − f| / f`.
    pub residual: f64,
    pub max_sigma1: f64,
}

pub fn solve(domain: &DomainRef, f_target: &ScalarField, opts: &SolveOptions) -> Result<CapillaryBody> {
    solve_detailed(domain, f_target, opts).map(|r| r.body)
}

pub fn solve_detailed(
    domain: &DomainRef,
    f_target: &ScalarField,
    opts: &SolveOptions,
) -> Result<SolveReport> {
    opts.validate()?;
    domain.check(f_target)?;
    let (min, node) = f_target.min();
    if !(min > 0.0) {
        return Err(CapError::Parameter(format!(
            "target curvature must be positive: min {min:.3e} at node {node}"
        )));
    }
    let f = f_target.values();
    let (s, steps) = match domain.mode() {
        Mode::Arc => (solve_arc(domain, f)?, 0),
        Mode::Axisymmetric => solve_axisymmetric(domain, f, opts)?,
        Mode::Full2d => {
            return Err(CapError::Unsupported(
                "Minkowski solve on full2d domains; use the axisymmetric mode".into(),
            ))
        }
    };
    let body = CapillaryBody::from_support(ScalarField::new(domain.clone(), s)?, opts.tolerances)?;
    let residual = relative_residual(body.curvature_function().values(), f);
    if residual > opts.newton_tol.max(roundoff_floor(domain, body.support().values(), f)) {
        return Err(CapError::NewtonDivergence { iterations: steps, residual });
    }
    let max_sigma1 = body.max_sigma1();
    Ok(SolveReport { body, newton_steps: steps, residual, max_sigma1 })
}

/// Smallest relative residual that floating-point evaluation of the
/// stencils can certify: `4·ε·‖D²‖·max s · eigenvalue scale / min f`.
///
/// For n = 3 the product of the two eigenvalues doubles the sensitivity, so
/// the estimate is multiplied by the largest eigenvalue scale `max f^{1/2}`.
pub fn roundoff_floor(domain: &DomainRef, s: &[f64], f: &[f64]) -> f64 {
    let s_max = s.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let f_min = f.iter().fold(f64::INFINITY, |m, &v| m.min(v));
    let f_max = f.iter().fold(0.0f64, |m, &v| m.max(v));
    let eig_scale = match domain.n() {
        2 => 1.0,
        _ => 2.0 * f_max.sqrt(),
    };
    4.0 * f64::EPSILON * domain.stencil().d2_norm() * s_max * eig_scale / f_min
}

fn relative_residual(curv: &[f64], f: &[f64]) -> f64 {
    curv.iter().zip(f).map(|(c, t)| ((c - t) / t).abs()).fold(0.0, f64::max)
}

/// Sub- and super-diagonal counts of the meridian operators.
const KL: usize = 4;
const KU: usize = 2;

/// Discrete `s'' + s` (n = 2).
fn arc_operator(domain: &DomainRef) -> Banded {
    let rows = domain.stencil().d2_rows();
    let mut a = Banded::zeros(rows.len(), KL, KU);
    for (i, row) in rows.iter().enumerate() {
        for &(j, w) in row {
            a.add(i, j, w);
        }
        a.add(i, i, 1.0);
    }
    a
}

fn solve_arc(domain: &DomainRef, f: &[f64]) -> Result<Vec<f64>> {
    let a = arc_operator(domain);
    let rows = domain.stencil().d2_rows();
    let mut s = a.clone().solve(f.to_vec())?;
    // Refinement against a compensated residual makes the result accurate to
    // a few ulps of `s` instead of `ε/h²`.
    for _ in 0..2 {
        let r: Vec<f64> = (0..s.len())
            .map(|i| -dot2(rows[i].iter().map(|&(j, w)| (w, s[j])).chain([(1.0, s[i]), (-1.0, f[i])])))
            .collect();
        let ds = a.clone().solve(r)?;
        for (si, di) in s.iter_mut().zip(ds) {
            *si += di;
        }
    }
    Ok(s)
}

/// Radial and angular eigenvalues of `τ` along the meridian, and the Newton
/// Jacobian of `λ_r·λ_a − f`.
fn axisymmetric_system(domain: &DomainRef, s: &[f64]) -> (Vec<f64>, Vec<f64>, Banded) {
    let n = s.len();
    let st = domain.stencil();
    let cots: Vec<f64> = domain
        .betas()
        .iter()
        .enumerate()
        .map(|(i, b)| if i == 0 { 0.0 } else { 1.0 / b.tan() })
        .collect();
    let d2 = st.d2(s);
    let d1 = st.d1(s);

    let radial: Vec<f64> = d2.iter().zip(s).map(|(a, b)| a + b).collect();
    // At the pole both eigenvalues equal s''(0) + s(0).
    let angular: Vec<f64> = (0..n)
        .map(|i| if i == 0 { radial[0] } else { cots[i] * d1[i] + s[i] })
        .collect();

    let mut jac = Banded::zeros(n, KL, KU);
    for i in 0..n {
        let (lr, la) = (radial[i], angular[i]);
        let radial_weight = if i == 0 { 2.0 * lr } else { la };
        for &(j, w) in &st.d2_rows()[i] {
            jac.add(i, j, radial_weight * w);
        }
        jac.add(i, i, radial_weight);
        if i > 0 {
            for &(j, w) in &st.d1_rows()[i] {
                jac.add(i, j, lr * cots[i] * w);
            }
            jac.add(i, i, lr);
        }
    }
    (radial, angular, jac)
}

fn axisymmetric_state(domain: &DomainRef, s: &[f64], f: &[f64], floor: f64) -> (f64, bool) {
    let (radial, angular, _) = axisymmetric_system(domain, s);
    let convex = radial.iter().chain(&angular).all(|&l| l > floor);
    let res = radial
        .iter()
        .zip(&angular)
        .zip(f)
        .map(|((r, a), t)| ((r * a - t) / t).abs())
        .fold(0.0, f64::max);
    (res, convex)
}

fn solve_axisymmetric(domain: &DomainRef, f: &[f64], opts: &SolveOptions) -> Result<(Vec<f64>, usize)> {
    let mean_f = domain.integrate_values(f) / domain.weights().iter().sum::<f64>();
    let r0 = mean_f.sqrt();
    let c = domain.theta().cos();
    let mut s: Vec<f64> = domain.betas().iter().map(|b| r0 * (1.0 - c * b.cos())).collect();
    let floor = opts.tolerances.convex;

    let (mut res, _) = axisymmetric_state(domain, &s, f, floor);
    for step in 0..=opts.max_newton {
        if res <= opts.newton_tol {
            return Ok((s, step));
        }
        if step == opts.max_newton {
            break;
        }
        let (radial, angular, jac) = axisymmetric_system(domain, &s);
        let rhs: Vec<f64> = radial
            .iter()
            .zip(&angular)
            .zip(f)
            .map(|((r, a), t)| t - r * a)
            .collect();
        let ds = jac.solve(rhs)?;

        let mut t = opts.damping;
        let mut accepted = false;
        for _ in 0..=opts.max_halvings {
            let trial: Vec<f64> = s.iter().zip(&ds).map(|(a, b)| a + t * b).collect();
            let (trial_res, convex) = axisymmetric_state(domain, &trial, f, floor);
            if convex && trial_res < res {
                s = trial;
                res = trial_res;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            if res <= roundoff_floor(domain, &s, f) {
                return Ok((s, step));
            }
            return Err(CapError::DampingExhausted {
                iteration: step,
                halvings: opts.max_halvings,
                residual: res,
            });
        }
    }
    Err(CapError::NewtonDivergence { iterations: opts.max_newton, residual: res })
}

/// Positivity, evenness and orthogonality data for a prescribed density.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct CompatibilityReport {
    pub positive: bool,
    pub min_value: f64,
    pub min_node: usize,
    pub even: bool,
    pub evenness_residual: f64,
    /// `∫⟨ζ, E_i⟩ φ dσ` for `i < n`.
    pub orthogonality: Vec<f64>,
}

pub fn check_compatibility(domain: &DomainRef, g: &ScalarField) -> Result<CompatibilityReport> {
    let (min_value, min_node) = g.min();
    let evenness_residual = domain.evenness_residual(g)?;
    Ok(CompatibilityReport {
        positive: min_value > 0.0,
        min_value,
        min_node,
        even: evenness_residual == 0.0,
        evenness_residual,
        orthogonality: domain.horizontal_moments(g)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::body::cap_body;
    use crate::domain::make_domain;
    use std::f64::consts::{FRAC_PI_3, FRAC_PI_4};

    #[test]
    fn constant_target_recovers_cap() {
        let d = make_domain(2, FRAC_PI_3, 129, Mode::Arc).unwrap();
        let body = solve(&d, &ScalarField::constant(&d, 1.0), &SolveOptions::default()).unwrap();
        let tol = 10.0 * d.h() * d.h();
        for (s, nd) in body.support().values().iter().zip(d.nodes()) {
            assert!((s - (1.0 - 0.5 * nd.beta.cos())).abs() < tol);
        }
    }

    #[test]
    fn axisymmetric_constant_target() {
        let d = make_domain(3, FRAC_PI_4, 129, Mode::Axisymmetric).unwrap();
        let rep = solve_detailed(&d, &ScalarField::constant(&d, 4.0), &SolveOptions::default()).unwrap();
        assert!(rep.newton_steps <= 8, "{}", rep.newton_steps);
        let cap = cap_body(&d, 2.0).unwrap();
        assert!(rep.body.support().max_abs_diff(cap.support()).unwrap() < 10.0 * d.h() * d.h());
        assert!(rep.residual <= 1e-10);
    }

    #[test]
    fn curvature_roundtrip_is_exact() {
        for mode in [Mode::Arc, Mode::Axisymmetric] {
            let d = make_domain(mode.dimension(), 0.8, 65, mode).unwrap();
            let cap = cap_body(&d, 1.3).unwrap();
            let opts = SolveOptions { newton_tol: 1e-14, ..SolveOptions::default() };
            let back = solve(&d, cap.curvature_function(), &opts).unwrap();
            let e = back.support().max_abs_diff(cap.support()).unwrap();
            assert!(e < 1e-12, "{mode} {e:e}");
        }
    }

    #[test]
    fn rejects_nonpositive_target_and_full2d() {
        let d = make_domain(2, 0.5, 33, Mode::Arc).unwrap();
        let bad = ScalarField::from_fn(&d, |nd| nd.beta - 0.1).unwrap();
        assert!(matches!(solve(&d, &bad, &SolveOptions::default()), Err(CapError::Parameter(_))));
        let f2 = make_domain(3, 0.5, 17, Mode::Full2d).unwrap();
        let one = ScalarField::constant(&f2, 1.0);
        assert!(matches!(solve(&f2, &one, &SolveOptions::default()), Err(CapError::Unsupported(_))));
    }

    #[test]
    fn newton_cap_reports_divergence() {
        let d = make_domain(3, FRAC_PI_4, 65, Mode::Axisymmetric).unwrap();
        let f = ScalarField::from_fn(&d, |nd| 1.0 + 0.5 * (3.0 * nd.beta).cos()).unwrap();
        let opts = SolveOptions { max_newton: 1, ..SolveOptions::default() };
        assert!(matches!(solve(&d, &f, &opts), Err(CapError::NewtonDivergence { .. })));
    }

    #[test]
    fn compatibility_flags() {
        let d = make_domain(2, FRAC_PI_3, 65, Mode::Arc).unwrap();
        let g = ScalarField::from_fn(&d, |nd| 1.0 + 0.3 * (2.0 * nd.beta).cos()).unwrap();
        let rep = check_compatibility(&d, &g).unwrap();
        assert!(rep.positive && rep.even);
        assert_eq!(rep.orthogonality, vec![0.0]);
        assert!((rep.min_value - 0.85).abs() < 1e-12);
        let neg = g.map(|v| v - 1.0);
        assert!(!check_compatibility(&d, &neg).unwrap().positive);
    }
}
