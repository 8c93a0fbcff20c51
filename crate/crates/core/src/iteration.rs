//! Capillary curvature image operator and its fixed-point iteration.
//!
//! `Λ_p^φ Σ` is the even capillary body whose curvature function is
//! `γ·φ·s_Σ^{p−1}` with `γ = V(Σ) / ((1/n)∫φ s_Σ^p dσ)`. Fixed points of
//! `Λ_p^φ` solve `f = γ·φ·s^{p−1}`; [`normalize`] rescales them to
//! `s^{1−p} f = φ`. Along the iteration `A_p` is non-decreasing and the
//! volume non-increasing, which the trace records and checks.

use std::fmt::Write as _;

use serde::Serialize;

use crate::body::{cap_body, CapillaryBody, Tolerances};
use crate::domain::{DomainRef, Mode, ScalarField};
use crate::error::{CapError, Result};
use crate::functionals::{a_p, omega_monotone_form, omega_p};
use crate::minkowski::{solve, SolveOptions};
use crate::phi::PhiSpec;

fn check_exponent(p: f64, n: usize) -> Result<()> {
    if p > -(n as f64) && p < 1.0 {
        Ok(())
    } else {
        Err(CapError::Parameter(format!("exponent p = {p} outside (-{n}, 1)")))
    }
}

/// `γ = V / ((1/n) ∫ φ s^p dσ)`.
pub fn multiplier(body: &CapillaryBody, phi: &PhiSpec, p: f64) -> Result<f64> {
    let d = body.domain();
    d.check(phi.field())?;
    let s = body.support().values();
    let ph = phi.field().values();
    let int: f64 = d
        .weights()
        .iter()
        .zip(s.iter().zip(ph))
        .map(|(w, (s, ph))| w * ph * s.powf(p))
        .sum();
    Ok(body.volume() / (int / d.n() as f64))
}

fn max_rel_deviation(body: &CapillaryBody, phi: &PhiSpec, p: f64, scale: f64) -> f64 {
    let s = body.support().values();
    let f = body.curvature_function().values();
    let ph = phi.field().values();
    s.iter()
        .zip(f)
        .zip(ph)
        .map(|((s, f), ph)| (f * s.powf(1.0 - p) / (scale * ph) - 1.0).abs())
        .fold(0.0, f64::max)
}

/// Scale-invariant fixed-point residual `max |f s^{1−p} / (γ φ) − 1|`.
pub fn fixed_point_residual(body: &CapillaryBody, phi: &PhiSpec, p: f64) -> Result<f64> {
    let gamma = multiplier(body, phi, p)?;
    Ok(max_rel_deviation(body, phi, p, gamma))
}

/// Residual of the normalized equation `max |f s^{1−p} / φ − 1|`.
pub fn equation_residual(body: &CapillaryBody, phi: &PhiSpec, p: f64) -> Result<f64> {
    body.domain().check(phi.field())?;
    Ok(max_rel_deviation(body, phi, p, 1.0))
}

#[derive(Debug, Clone)]
pub struct LambdaImage {
    pub body: CapillaryBody,
    /// Multiplier `γ` of the prescribed curvature `γ·φ·s^{p−1}`.
    pub gamma: f64,
}

/// Apply the curvature image operator once.
pub fn lambda_op(body: &CapillaryBody, phi: &PhiSpec, p: f64, opts: &SolveOptions) -> Result<LambdaImage> {
    let d = body.domain();
    check_exponent(p, d.n())?;
    let gamma = multiplier(body, phi, p)?;
    let target = curvature_target(body, phi, p, gamma)?;
    let image = solve(d, &target, opts)?;
    Ok(LambdaImage { body: image, gamma })
}

/// `γ·φ·s^{p−1}` on the nodes.
pub fn curvature_target(body: &CapillaryBody, phi: &PhiSpec, p: f64, gamma: f64) -> Result<ScalarField> {
    let values = body
        .support()
        .values()
        .iter()
        .zip(phi.field().values())
        .map(|(s, ph)| gamma * ph * s.powf(p - 1.0))
        .collect();
    ScalarField::new(body.domain().clone(), values)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterateOptions {
    /// Stop once `|V_{i+1}/V_i − 1|` is at most this...
    pub stop_ratio: f64,
    /// ...and the fixed-point residual of the new iterate is at most this.
    pub stop_residual: f64,
    pub max_iter: usize,
    /// Consecutive non-decreasing residuals that count as stagnation.
    pub stagnation_window: usize,
    /// Steps over which the reference curvature bound is collected.
    pub curvature_warmup: usize,
    /// Abort when `max σ_1` exceeds this multiple of the warm-up maximum.
    pub curvature_factor: f64,
    pub solve: SolveOptions,
}

impl Default for IterateOptions {
    fn default() -> Self {
        IterateOptions {
            stop_ratio: 1e-8,
            stop_residual: 1e-6,
            max_iter: 500,
            stagnation_window: 25,
            curvature_warmup: 5,
            curvature_factor: 10.0,
            solve: SolveOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub i: usize,
    #[serde(rename = "V")]
    pub volume: f64,
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "Omega")]
    pub omega: f64,
    /// `V_{i+1}/V_i`; absent for the last recorded iterate.
    pub ratio: Option<f64>,
    pub residual: f64,
    pub gamma: f64,
    pub max_sigma1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationTrace {
    pub p: f64,
    pub rows: Vec<TraceRow>,
}

impl IterationTrace {
    /// Steps where a Lyapunov monotonicity fails by more than `slack`
    /// (relative to the earlier value).
    pub fn monotonicity_violations(&self, slack: f64) -> Vec<String> {
        let mut out = Vec::new();
        for w in self.rows.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            if b.a < a.a - slack * a.a.abs() {
                out.push(format!("A decreased at step {}: {:.15e} -> {:.15e}", a.i, a.a, b.a));
            }
            if b.volume > a.volume + slack * a.volume.abs() {
                out.push(format!("V increased at step {}: {:.15e} -> {:.15e}", a.i, a.volume, b.volume));
            }
            let (oa, ob) = (omega_monotone_form(a.omega, self.p), omega_monotone_form(b.omega, self.p));
            if ob < oa - slack * oa.abs() {
                out.push(format!("Omega form decreased at step {}: {oa:.15e} -> {ob:.15e}", a.i));
            }
        }
        out
    }

    /// `V_i ∈ [V_final − tol, V_0]` for every recorded step.
    pub fn volume_sandwich_holds(&self, tol: f64) -> bool {
        let (Some(first), Some(last)) = (self.rows.first(), self.rows.last()) else {
            return true;
        };
        self.rows
            .iter()
            .all(|r| r.volume >= last.volume - tol && r.volume <= first.volume + tol)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("i,V,A,Omega,ratio,residual,gamma,max_sigma1\n");
        for r in &self.rows {
            let ratio = r.ratio.map(|x| format!("{x:.17e}")).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{:.17e},{:.17e},{:.17e},{},{:.17e},{:.17e},{:.17e}",
                r.i, r.volume, r.a, r.omega, ratio, r.residual, r.gamma, r.max_sigma1
            );
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    MaxIterations,
    Stagnated,
}

#[derive(Debug, Clone)]
pub struct IterationOutcome {
    /// Final iterate when converged, otherwise the iterate with the smallest residual.
    pub body: CapillaryBody,
    pub trace: IterationTrace,
    pub converged: bool,
    pub stop: StopReason,
    /// Number of curvature image applications.
    pub iterations: usize,
    /// Trace index of `body`.
    pub best_index: usize,
}

struct Snapshot {
    volume: f64,
    a: f64,
    omega: f64,
    residual: f64,
    gamma: f64,
    max_sigma1: f64,
}

fn snapshot(body: &CapillaryBody, phi: &PhiSpec, p: f64) -> Result<Snapshot> {
    let gamma = multiplier(body, phi, p)?;
    Ok(Snapshot {
        volume: body.volume(),
        a: a_p(body, phi.field(), p)?,
        omega: omega_p(body, phi.field(), p)?,
        residual: max_rel_deviation(body, phi, p, gamma),
        gamma,
        max_sigma1: body.max_sigma1(),
    })
}

/// Iterate `Λ_p^φ` from the unit cap until the volume ratio and the
/// fixed-point residual both fall below their thresholds.
pub fn iterate(phi: &PhiSpec, p: f64, opts: &IterateOptions) -> Result<IterationOutcome> {
    let domain = phi.domain().clone();
    check_exponent(p, domain.n())?;
    if domain.mode() == Mode::Full2d {
        return Err(CapError::Unsupported("iteration on full2d domains".into()));
    }
    iterate_from(cap_body(&domain, 1.0)?, phi, p, opts)
}

/// Same as [`iterate`] with an explicit starting body.
pub fn iterate_from(
    start: CapillaryBody,
    phi: &PhiSpec,
    p: f64,
    opts: &IterateOptions,
) -> Result<IterationOutcome> {
    check_exponent(p, start.domain().n())?;
    let mut body = start;
    let mut snap = snapshot(&body, phi, p)?;
    let mut rows: Vec<TraceRow> = Vec::new();
    let mut best = (snap.residual, 0usize, body.clone());
    let mut curvature_ref = snap.max_sigma1;
    let mut stagnant = 0usize;

    for i in 0..opts.max_iter {
        if i < opts.curvature_warmup {
            curvature_ref = curvature_ref.max(snap.max_sigma1);
        } else if snap.max_sigma1 > opts.curvature_factor * curvature_ref {
            return Err(CapError::CurvatureBlowup {
                step: i,
                value: snap.max_sigma1,
                bound: opts.curvature_factor * curvature_ref,
            });
        }

        let next = solve(body.domain(), &curvature_target(&body, phi, p, snap.gamma)?, &opts.solve)?;
        let next_snap = snapshot(&next, phi, p)?;
        let ratio = next_snap.volume / snap.volume;
        rows.push(TraceRow {
            i,
            volume: snap.volume,
            a: snap.a,
            omega: snap.omega,
            ratio: Some(ratio),
            residual: snap.residual,
            gamma: snap.gamma,
            max_sigma1: snap.max_sigma1,
        });

        if next_snap.residual >= snap.residual {
            stagnant += 1;
        } else {
            stagnant = 0;
        }
        let converged = (ratio - 1.0).abs() <= opts.stop_ratio && next_snap.residual <= opts.stop_residual;
        body = next;
        snap = next_snap;
        if snap.residual < best.0 {
            best = (snap.residual, i + 1, body.clone());
        }

        let stop = if converged {
            Some(StopReason::Converged)
        } else if stagnant >= opts.stagnation_window {
            Some(StopReason::Stagnated)
        } else {
            None
        };
        if let Some(stop) = stop {
            return Ok(finish(rows, body, snap, best, p, i + 1, stop));
        }
    }
    let iterations = opts.max_iter;
    Ok(finish(rows, body, snap, best, p, iterations, StopReason::MaxIterations))
}

fn finish(
    mut rows: Vec<TraceRow>,
    body: CapillaryBody,
    snap: Snapshot,
    best: (f64, usize, CapillaryBody),
    p: f64,
    iterations: usize,
    stop: StopReason,
) -> IterationOutcome {
    rows.push(TraceRow {
        i: rows.len(),
        volume: snap.volume,
        a: snap.a,
        omega: snap.omega,
        ratio: None,
        residual: snap.residual,
        gamma: snap.gamma,
        max_sigma1: snap.max_sigma1,
    });
    let converged = stop == StopReason::Converged;
    let (body, best_index) = if converged { (body, rows.len() - 1) } else { (best.2, best.1) };
    IterationOutcome {
        body,
        trace: IterationTrace { p, rows },
        converged,
        stop,
        iterations,
        best_index,
    }
}

#[derive(Debug, Clone)]
pub struct Normalized {
    pub body: CapillaryBody,
    /// Dilation applied, `λ = γ^{−1/(n−p)}`.
    pub lambda: f64,
    pub gamma: f64,
    /// `max |f s^{1−p}/φ − 1|` of the rescaled body.
    pub residual: f64,
}

/// Default threshold on the fixed-point residual accepted by [`normalize`].
pub const NORMALIZE_TOL: f64 = 1e-5;

/// Rescale an approximate fixed point `f ≈ γ φ s^{p−1}` to `f s^{1−p} = φ`.
pub fn normalize(body: &CapillaryBody, phi: &PhiSpec, p: f64, tol: f64) -> Result<Normalized> {
    let n = body.domain().n();
    check_exponent(p, n)?;
    let gamma = multiplier(body, phi, p)?;
    let before = max_rel_deviation(body, phi, p, gamma);
    if before > tol {
        return Err(CapError::NotFixedPoint { residual: before, tol });
    }
    let lambda = gamma.powf(-1.0 / (n as f64 - p));
    // Rebuilt from the support alone, so a serialized copy reloads identically.
    let scaled = CapillaryBody::from_support(body.support().scaled(lambda), Tolerances::default())?;
    let residual = equation_residual(&scaled, phi, p)?;
    Ok(Normalized { body: scaled, lambda, gamma, residual })
}

/// Domain with twice the polar resolution (`2(N−1) + 1` levels).
pub fn refined_domain(domain: &DomainRef) -> Result<DomainRef> {
    crate::domain::make_domain(domain.n(), domain.theta(), 2 * (domain.n_beta() - 1) + 1, domain.mode())
}

/// Points in the midpoint interpolation stencil of [`prolong`].
pub const PROLONG_POINTS: usize = 8;

/// Prolong a meridian profile to the refined grid by degree-7 Lagrange
/// interpolation at the midpoints (even reflection at the pole, window
/// shifted inward at the boundary).
///
/// Differentiating twice on the fine grid divides the interpolation error by
/// `h²`, so a high interpolation order is needed for the re-check to see the
/// solution error rather than the interpolant's.
pub fn prolong(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let last = n - 1;
    let m = PROLONG_POINTS.min(n);
    let at = |k: isize| -> f64 { values[k.unsigned_abs()] };
    let mut out = Vec::with_capacity(2 * last + 1);
    for i in 0..last {
        out.push(values[i]);
        let start = (i as isize + 1 - (m / 2) as isize).min((last + 1 - m) as isize);
        let x = i as f64 + 0.5;
        let mid: f64 = (0..m as isize)
            .map(|a| {
                let ka = start + a;
                let w: f64 = (0..m as isize)
                    .filter(|&b| b != a)
                    .map(|b| (x - (start + b) as f64) / (ka - (start + b)) as f64)
                    .product();
                w * at(ka)
            })
            .sum();
        out.push(mid);
    }
    out.push(values[last]);
    out
}

/// Independent check of `f s^{1−p} = φ` on the refined grid: the support
/// function is prolonged, re-validated and differentiated with the fine-grid
/// stencils, and `φ` is re-sampled there.
pub fn refined_equation_residual(
    body: &CapillaryBody,
    p: f64,
    phi_on: impl Fn(&DomainRef) -> Result<PhiSpec>,
) -> Result<f64> {
    let d = body.domain();
    if d.mode() == Mode::Full2d {
        return Err(CapError::Unsupported("refined re-check on full2d domains".into()));
    }
    let fine = refined_domain(d)?;
    let s = ScalarField::new(fine.clone(), prolong(body.support().values()))?;
    let fine_body = CapillaryBody::from_support(s, Default::default())?;
    let phi = phi_on(&fine)?;
    equation_residual(&fine_body, &phi, p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::make_domain;
    use crate::phi::parse_phi;
    use std::f64::consts::FRAC_PI_3;

    fn arc(res: usize) -> DomainRef {
        make_domain(2, FRAC_PI_3, res, Mode::Arc).unwrap()
    }

    fn fixed_point_phi(body: &CapillaryBody, p: f64, scale: f64) -> PhiSpec {
        let vals = body
            .support()
            .values()
            .iter()
            .zip(body.curvature_function().values())
            .map(|(s, f)| scale * f * s.powf(1.0 - p))
            .collect();
        PhiSpec::from_field(ScalarField::new(body.domain().clone(), vals).unwrap(), "fixed").unwrap()
    }

    #[test]
    fn cap_is_fixed_point() {
        let d = arc(257);
        let cap = cap_body(&d, 1.0).unwrap();
        for p in [-1.5, -0.5, 0.0, 0.5] {
            let phi = fixed_point_phi(&cap, p, 1.0);
            let img = lambda_op(&cap, &phi, p, &SolveOptions::default()).unwrap();
            assert!((img.gamma - 1.0).abs() < 1e-12);
            assert!(img.body.support().max_abs_diff(cap.support()).unwrap() < 1e-8);
            assert!(fixed_point_residual(&cap, &phi, p).unwrap() < 1e-12);
        }
    }

    #[test]
    fn lambda_target_for_constant_density() {
        let d = arc(257);
        let cap = cap_body(&d, 1.0).unwrap();
        let phi = parse_phi("const:1", &d).unwrap();
        let gamma = multiplier(&cap, &phi, 0.0).unwrap();
        let target = curvature_target(&cap, &phi, 0.0, gamma).unwrap();
        let tol = 10.0 * d.h() * d.h();
        assert!((target.values()[0] - 1.1730050).abs() < tol);
        // Λ_0 commutes with dilation.
        let big = cap.scaled(2.5).unwrap();
        let g2 = multiplier(&big, &phi, 0.0).unwrap();
        let t2 = curvature_target(&big, &phi, 0.0, g2).unwrap();
        for (a, b) in target.values().iter().zip(t2.values()) {
            assert!((2.5 * a - b).abs() < 1e-12 * b);
        }
    }

    #[test]
    fn exponent_range_enforced() {
        let d = arc(65);
        let cap = cap_body(&d, 1.0).unwrap();
        let phi = parse_phi("const:1", &d).unwrap();
        for p in [-2.0, 1.0, 1.5] {
            assert!(lambda_op(&cap, &phi, p, &SolveOptions::default()).is_err());
            assert!(iterate(&phi, p, &IterateOptions::default()).is_err());
        }
    }

    #[test]
    fn fixed_point_density_converges_in_one_step() {
        let d = arc(129);
        let cap = cap_body(&d, 1.0).unwrap();
        let phi = fixed_point_phi(&cap, 0.5, 1.0);
        let out = iterate(&phi, 0.5, &IterateOptions::default()).unwrap();
        assert!(out.converged);
        assert_eq!(out.iterations, 1);
        assert!(out.trace.rows[1].residual < 1e-10);
    }

    #[test]
    fn normalize_examples() {
        let d = arc(129);
        let cap = cap_body(&d, 1.0).unwrap();
        let exact = fixed_point_phi(&cap, 0.0, 1.0);
        let nz = normalize(&cap, &exact, 0.0, NORMALIZE_TOL).unwrap();
        assert!((nz.lambda - 1.0).abs() < 1e-12);

        let doubled = fixed_point_phi(&cap, 0.0, 2.0);
        let nz = normalize(&cap, &doubled, 0.0, NORMALIZE_TOL).unwrap();
        assert!((nz.gamma - 0.5).abs() < 1e-12);
        assert!((nz.lambda - 2f64.sqrt()).abs() < 1e-12);
        assert!(nz.residual < 1e-8);

        let scaled = normalize(&cap.scaled(3.0).unwrap(), &doubled, 0.0, NORMALIZE_TOL).unwrap();
        assert!(scaled.body.support().max_abs_diff(nz.body.support()).unwrap() < 1e-12);

        let phi = parse_phi("cos2k:1,1,0.3", &d).unwrap();
        assert!(matches!(normalize(&cap, &phi, 0.0, NORMALIZE_TOL), Err(CapError::NotFixedPoint { .. })));
    }

    #[test]
    fn prolong_is_eighth_order_for_smooth_even_profiles() {
        let g = |b: f64| 1.0 - 0.5 * b.cos() + 0.05 * (6.0 * b).cos();
        let errs: Vec<f64> = [33usize, 65]
            .iter()
            .map(|&res| {
                let d = arc(res);
                let fine = refined_domain(&d).unwrap();
                let coarse: Vec<f64> = d.betas().iter().map(|&b| g(b)).collect();
                let p = prolong(&coarse);
                assert_eq!(p.len(), fine.n_beta());
                p.iter().zip(fine.betas()).map(|(v, &b)| (v - g(b)).abs()).fold(0.0, f64::max)
            })
            .collect();
        let order = (errs[0] / errs[1]).log2();
        assert!(order > 7.0, "order {order}, errors {errs:?}");
    }

    #[test]
    fn trace_csv_header() {
        let d = arc(65);
        let phi = parse_phi("const:1", &d).unwrap();
        let opts = IterateOptions { max_iter: 3, ..IterateOptions::default() };
        let out = iterate(&phi, 0.0, &opts).unwrap();
        let csv = out.trace.to_csv();
        assert!(csv.starts_with("i,V,A,Omega,ratio,residual,gamma,max_sigma1\n"));
        assert_eq!(csv.lines().count(), out.trace.rows.len() + 1);
        assert!(!out.converged);
        assert_eq!(out.stop, StopReason::MaxIterations);
    }
}
