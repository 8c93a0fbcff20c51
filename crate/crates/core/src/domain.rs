//! Discretized spherical cap `C_θ = { ζ : |ζ + cosθ·E_n| = 1, ζ_n ≥ 0 }`.
//!
//! Nodes sit on a uniform polar grid `β ∈ [0, θ]` measured from the vertical
//! axis. Evenness is built into the representation: arc and axisymmetric
//! domains store only `β ≥ 0`, and the full2d domain stores azimuths
//! `α ∈ [0, π)` with `α` and `α + π` identified.
//!
//! Quadrature weights are the exact spherical measures of the grid cells
//! (half-cells at the pole and at the boundary), so they are strictly positive
//! and sum to `σ(C_θ)` exactly.
//!
//! Derivatives in β use fourth-order finite differences; the
//! rows at `β = θ` eliminate `∂_β s` through the capillary boundary
//! condition `∂_β s = cotθ·s`. Every differential operator in this crate, and
//! the Minkowski solver, uses the same stencils, so the discrete curvature
//! map and the solver invert each other exactly.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{CapError, Result};
use crate::stencil::Stencil;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// n = 2: the cap is an arc, stored as `β ∈ [0, θ]`.
    Arc,
    /// n = 3, rotationally symmetric fields: a single meridian.
    Axisymmetric,
    /// n = 3, tensor grid in `(β, α)` with `α ∈ [0, π)`.
    Full2d,
}

impl Mode {
    pub fn dimension(self) -> usize {
        match self {
            Mode::Arc => 2,
            Mode::Axisymmetric | Mode::Full2d => 3,
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Mode::Arc => "arc",
            Mode::Axisymmetric => "axisymmetric",
            Mode::Full2d => "full2d",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for Mode {
    type Err = CapError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "arc" => Ok(Mode::Arc),
            "axisymmetric" | "axi" => Ok(Mode::Axisymmetric),
            "full2d" => Ok(Mode::Full2d),
            other => Err(CapError::Parameter(format!("unknown mode `{other}`"))),
        }
    }
}

/// Default mode for a dimension: arc for n = 2, axisymmetric for n = 3.
pub fn default_mode(n: usize) -> Result<Mode> {
    match n {
        2 => Ok(Mode::Arc),
        3 => Ok(Mode::Axisymmetric),
        _ => Err(CapError::Parameter(format!("dimension n = {n} not in {{2, 3}}"))),
    }
}

/// Polar/azimuthal coordinates of one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub beta: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone)]
pub struct CapDomain {
    n: usize,
    theta: f64,
    mode: Mode,
    /// Polar levels `β_0 = 0 < … < β_N = θ`.
    betas: Vec<f64>,
    /// Azimuths for full2d (empty otherwise).
    alphas: Vec<f64>,
    nodes: Vec<Node>,
    weights: Vec<f64>,
    h: f64,
    stencil: Stencil,
}

pub type DomainRef = Arc<CapDomain>;

/// Smallest β-resolution accepted by [`make_domain`].
pub const MIN_RESOLUTION: usize = 16;

/// Build a cap domain with `resolution` polar levels (including both ends).
///
/// full2d domains get `resolution - 1` azimuths (rounded up to even, at least 8).
pub fn make_domain(n: usize, theta: f64, resolution: usize, mode: Mode) -> Result<DomainRef> {
    let n_alpha = resolution.saturating_sub(1).max(8).div_ceil(2) * 2;
    CapDomain::new(n, theta, resolution, mode, n_alpha).map(Arc::new)
}

/// full2d domain with an explicit azimuth count.
pub fn make_full2d_domain(theta: f64, resolution: usize, n_alpha: usize) -> Result<DomainRef> {
    CapDomain::new(3, theta, resolution, Mode::Full2d, n_alpha).map(Arc::new)
}

impl CapDomain {
    fn new(n: usize, theta: f64, resolution: usize, mode: Mode, n_alpha: usize) -> Result<Self> {
        if n != 2 && n != 3 {
            return Err(CapError::Parameter(format!("dimension n = {n} not in {{2, 3}}")));
        }
        if !(theta > 0.0 && theta < PI / 2.0) {
            return Err(CapError::Parameter(format!(
                "contact angle theta = {theta} outside (0, pi/2)"
            )));
        }
        if resolution < MIN_RESOLUTION {
            return Err(CapError::Parameter(format!(
                "resolution {resolution} below minimum {MIN_RESOLUTION}"
            )));
        }
        if mode.dimension() != n {
            return Err(CapError::Parameter(format!("mode {mode} inconsistent with n = {n}")));
        }
        if mode == Mode::Full2d && n_alpha < 4 {
            return Err(CapError::Parameter(format!("full2d needs at least 4 azimuths, got {n_alpha}")));
        }

        let last = resolution - 1;
        let h = theta / last as f64;
        let betas: Vec<f64> = (0..resolution)
            .map(|i| if i == last { theta } else { i as f64 * h })
            .collect();

        // Cell boundaries: [0, h/2], [β_i - h/2, β_i + h/2], [θ - h/2, θ].
        let lo = |i: usize| if i == 0 { 0.0 } else { betas[i] - 0.5 * h };
        let hi = |i: usize| if i == last { theta } else { betas[i] + 0.5 * h };

        let (nodes, weights, alphas) = match mode {
            Mode::Arc => {
                let nodes = betas.iter().map(|&beta| Node { beta, alpha: 0.0 }).collect();
                // Both halves β and -β of the arc.
                let weights = (0..resolution).map(|i| 2.0 * (hi(i) - lo(i))).collect();
                (nodes, weights, Vec::new())
            }
            Mode::Axisymmetric => {
                let nodes = betas.iter().map(|&beta| Node { beta, alpha: 0.0 }).collect();
                let weights = (0..resolution)
                    .map(|i| 2.0 * PI * (lo(i).cos() - hi(i).cos()))
                    .collect();
                (nodes, weights, Vec::new())
            }
            Mode::Full2d => {
                let h_alpha = PI / n_alpha as f64;
                let alphas: Vec<f64> = (0..n_alpha).map(|j| j as f64 * h_alpha).collect();
                let mut nodes = vec![Node { beta: 0.0, alpha: 0.0 }];
                let mut weights = vec![2.0 * PI * (1.0 - hi(0).cos())];
                for i in 1..resolution {
                    let ring = 2.0 * PI * (lo(i).cos() - hi(i).cos()) / n_alpha as f64;
                    for &alpha in &alphas {
                        nodes.push(Node { beta: betas[i], alpha });
                        weights.push(ring);
                    }
                }
                (nodes, weights, alphas)
            }
        };

        Ok(CapDomain {
            n,
            theta,
            mode,
            betas,
            alphas,
            nodes,
            weights,
            h,
            stencil: Stencil::new(resolution, h, 1.0 / theta.tan()),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Polar grid step.
    pub fn h(&self) -> f64 {
        self.h
    }

    /// Azimuthal grid step (full2d only).
    pub fn h_alpha(&self) -> Option<f64> {
        (self.mode == Mode::Full2d).then(|| PI / self.alphas.len() as f64)
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn n_beta(&self) -> usize {
        self.betas.len()
    }

    pub fn n_alpha(&self) -> usize {
        self.alphas.len()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Analytic measure of the full cap: `2θ` (n = 2) or `2π(1 − cosθ)` (n = 3).
    pub fn cap_measure(&self) -> f64 {
        match self.n {
            2 => 2.0 * self.theta,
            _ => 2.0 * PI * (1.0 - self.theta.cos()),
        }
    }

    /// Default boundary-condition tolerance `10·h²`.
    pub fn default_bc_tol(&self) -> f64 {
        10.0 * self.h * self.h
    }

    pub fn cot_theta(&self) -> f64 {
        1.0 / self.theta.tan()
    }

    /// Flat node index for `(level, azimuth)`; level 0 is the pole.
    pub fn index(&self, level: usize, azimuth: usize) -> usize {
        match self.mode {
            Mode::Full2d if level > 0 => 1 + (level - 1) * self.alphas.len() + azimuth,
            Mode::Full2d => 0,
            _ => level,
        }
    }

    /// Same parameters and grid, so fields built on either are interchangeable.
    pub fn same_grid(&self, other: &CapDomain) -> bool {
        self.n == other.n
            && self.theta.to_bits() == other.theta.to_bits()
            && self.mode == other.mode
            && self.betas.len() == other.betas.len()
            && self.alphas.len() == other.alphas.len()
    }

    /// `u` on the unit sphere (`u_n ≥ cosθ`) and `ζ = u − cosθ·E_n ∈ C_θ` for a node.
    ///
    /// Arc and axisymmetric nodes are placed on the meridian `α = 0`.
    pub fn node_vectors(&self, index: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        let node = self.nodes.get(index).ok_or(CapError::IndexOutOfRange {
            index,
            len: self.nodes.len(),
        })?;
        let u = unit_vector(self.n, node.beta, node.alpha);
        let mut zeta = u.clone();
        zeta[self.n - 1] -= self.theta.cos();
        Ok((u, zeta))
    }

    /// Quadrature of a field against the spherical measure over the full cap.
    pub fn integrate(&self, g: &ScalarField) -> Result<f64> {
        self.check(g)?;
        Ok(self.integrate_values(&g.values))
    }

    pub(crate) fn integrate_values(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.weights.len());
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }

    /// Integrate a function of the node coordinates.
    pub fn integrate_fn(&self, g: impl Fn(Node) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&node, w)| w * g(node))
            .sum()
    }

    pub fn check(&self, g: &ScalarField) -> Result<()> {
        if self.same_grid(&g.domain) && g.values.len() == self.len() {
            Ok(())
        } else {
            Err(CapError::DomainMismatch)
        }
    }

    /// Values of one meridian (the whole field for arc/axisymmetric).
    fn meridian(&self, values: &[f64], azimuth: usize) -> Vec<f64> {
        (0..self.n_beta()).map(|i| values[self.index(i, azimuth)]).collect()
    }

    /// `τ[s] = ∇̄²s + s·ḡ` at every node, in an orthonormal frame.
    pub fn tau_of(&self, s: &ScalarField) -> Result<TauField> {
        self.check(s)?;
        Ok(TauField {
            domain: s.domain.clone(),
            mats: self.tau_values(&s.values),
        })
    }

    pub(crate) fn stencil(&self) -> &Stencil {
        &self.stencil
    }

    pub(crate) fn tau_values(&self, s: &[f64]) -> Vec<Sym> {
        match self.mode {
            Mode::Arc => {
                let d2 = self.stencil.d2(s);
                d2.iter().zip(s).map(|(a, b)| Sym::scalar(a + b)).collect()
            }
            Mode::Axisymmetric => {
                let d2 = self.stencil.d2(s);
                let d1 = self.stencil.d1(s);
                (0..s.len())
                    .map(|i| {
                        let radial = d2[i] + s[i];
                        let angular = if i == 0 {
                            radial
                        } else {
                            d1[i] / self.betas[i].tan() + s[i]
                        };
                        Sym::diag(radial, angular)
                    })
                    .collect()
            }
            Mode::Full2d => self.tau_full2d(s),
        }
    }

    fn tau_full2d(&self, s: &[f64]) -> Vec<Sym> {
        let cot = self.cot_theta();
        let m = self.n_alpha();
        let ha = PI / m as f64;
        let nb = self.n_beta();

        let meridians: Vec<Vec<f64>> = (0..m).map(|j| self.meridian(s, j)).collect();
        let d1: Vec<Vec<f64>> = meridians.iter().map(|v| self.stencil.d1(v)).collect();
        let d2: Vec<Vec<f64>> = meridians.iter().map(|v| self.stencil.d2(v)).collect();

        let mut out = vec![Sym::scalar(0.0); self.len()];

        // Pole: fit the tangent Hessian from directional second derivatives.
        // Evenness identifies the values at ±β along each azimuth.
        let s0 = s[0];
        let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
        for (j, &alpha) in self.alphas.iter().enumerate() {
            let dir = d2[j][0];
            a += dir;
            b += dir * (2.0 * alpha).cos();
            c += dir * (2.0 * alpha).sin();
        }
        a /= m as f64;
        b *= 2.0 / m as f64;
        c *= 2.0 / m as f64;
        out[0] = Sym {
            dim: 2,
            a11: a + b + s0,
            a12: c,
            a22: a - b + s0,
        };

        for i in 1..nb {
            let beta = self.betas[i];
            let (sb, cb) = beta.sin_cos();
            for j in 0..m {
                let jp = (j + 1) % m;
                let jm = (j + m - 1) % m;
                let idx = self.index(i, j);
                let v = s[idx];
                let s_a = (s[self.index(i, jp)] - s[self.index(i, jm)]) / (2.0 * ha);
                let s_aa = (s[self.index(i, jp)] - 2.0 * v + s[self.index(i, jm)]) / (ha * ha);
                let s_ba = if i == nb - 1 {
                    cot * s_a
                } else {
                    (d1[jp][i] - d1[jm][i]) / (2.0 * ha)
                };
                out[idx] = Sym {
                    dim: 2,
                    a11: d2[j][i] + v,
                    a12: (s_ba - cb / sb * s_a) / sb,
                    a22: s_aa / (sb * sb) + cb / sb * d1[j][i] + v,
                };
            }
        }
        out
    }

    /// `|∂_β s(θ) − cotθ·s(θ)|` with a one-sided fourth-order derivative;
    /// max over meridians in full2d mode.
    pub fn robin_residual(&self, s: &ScalarField) -> Result<f64> {
        self.check(s)?;
        Ok(self.robin_values(&s.values))
    }

    pub(crate) fn robin_values(&self, s: &[f64]) -> f64 {
        let cot = self.cot_theta();
        let azimuths = if self.mode == Mode::Full2d { self.n_alpha() } else { 1 };
        (0..azimuths)
            .map(|j| {
                let m = self.meridian(s, j);
                (one_sided_derivative(&m, self.h) - cot * m[m.len() - 1]).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Evenness residual of a stored field: zero by representation.
    ///
    /// Imported tables that carry both `α` and `α + π` are checked with
    /// [`crate::phi::FullTable::evenness_residual`] before folding.
    pub fn evenness_residual(&self, g: &ScalarField) -> Result<f64> {
        self.check(g)?;
        Ok(0.0)
    }

    /// Orthogonality integrals `∫⟨ζ, E_i⟩ g dσ`, `i < n`, over the full cap.
    ///
    /// Each stored node stands for itself and its mirror image under
    /// `ζ' ↦ −ζ'`; the two contributions are summed explicitly.
    pub fn horizontal_moments(&self, g: &ScalarField) -> Result<Vec<f64>> {
        self.check(g)?;
        let mut moments = vec![0.0; self.n - 1];
        for (k, (&w, &v)) in self.weights.iter().zip(&g.values).enumerate() {
            let (_, zeta) = self.node_vectors(k)?;
            for (i, m) in moments.iter_mut().enumerate() {
                let x = zeta[i];
                let mirrored = -x;
                *m += 0.5 * w * v * x + 0.5 * w * v * mirrored;
            }
        }
        Ok(moments)
    }
}

/// Unit vector at polar angle β, azimuth α.
pub fn unit_vector(n: usize, beta: f64, alpha: f64) -> Vec<f64> {
    let (sb, cb) = beta.sin_cos();
    if n == 2 {
        vec![sb, cb]
    } else {
        let (sa, ca) = alpha.sin_cos();
        vec![sb * ca, sb * sa, cb]
    }
}

/// One-sided fourth-order `∂_β s` at the last node.
pub(crate) fn one_sided_derivative(s: &[f64], h: f64) -> f64 {
    let l = s.len() - 1;
    (25.0 * s[l] - 48.0 * s[l - 1] + 36.0 * s[l - 2] - 16.0 * s[l - 3] + 3.0 * s[l - 4]) / (12.0 * h)
}

/// A real-valued function sampled on the nodes of a cap domain.
#[derive(Debug, Clone)]
pub struct ScalarField {
    domain: DomainRef,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(domain: DomainRef, values: Vec<f64>) -> Result<Self> {
        if values.len() != domain.len() {
            return Err(CapError::Parameter(format!(
                "field has {} values but domain has {} nodes",
                values.len(),
                domain.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(CapError::NonFinite(k));
        }
        Ok(ScalarField { domain, values })
    }

    pub fn constant(domain: &DomainRef, c: f64) -> Self {
        ScalarField {
            domain: domain.clone(),
            values: vec![c; domain.len()],
        }
    }

    /// Sample `g(β, α)` at every node.
    pub fn from_fn(domain: &DomainRef, g: impl Fn(Node) -> f64) -> Result<Self> {
        let values = domain.nodes().iter().map(|&nd| g(nd)).collect();
        ScalarField::new(domain.clone(), values)
    }

    pub fn domain(&self) -> &DomainRef {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        ScalarField {
            domain: self.domain.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// `(min, argmin)`.
    pub fn min(&self) -> (f64, usize) {
        self.values
            .iter()
            .enumerate()
            .fold((f64::INFINITY, 0), |acc, (k, &v)| if v < acc.0 { (v, k) } else { acc })
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Sup-norm distance to another field on the same grid.
    pub fn max_abs_diff(&self, other: &ScalarField) -> Result<f64> {
        self.domain.check(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }
}

/// Symmetric 1×1 or 2×2 matrix in an orthonormal frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sym {
    pub dim: usize,
    pub a11: f64,
    pub a12: f64,
    pub a22: f64,
}

impl Sym {
    pub fn scalar(a: f64) -> Self {
        Sym { dim: 1, a11: a, a12: 0.0, a22: 0.0 }
    }

    pub fn diag(a: f64, b: f64) -> Self {
        Sym { dim: 2, a11: a, a12: 0.0, a22: b }
    }

    /// `σ_{n−1}`: product of the eigenvalues.
    pub fn det(&self) -> f64 {
        if self.dim == 1 {
            self.a11
        } else {
            self.a11 * self.a22 - self.a12 * self.a12
        }
    }

    /// `σ_1`: sum of the eigenvalues.
    pub fn trace(&self) -> f64 {
        if self.dim == 1 {
            self.a11
        } else {
            self.a11 + self.a22
        }
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        if self.dim == 1 {
            return vec![self.a11];
        }
        let mean = 0.5 * (self.a11 + self.a22);
        let rad = (0.25 * (self.a11 - self.a22).powi(2) + self.a12 * self.a12).sqrt();
        vec![mean - rad, mean + rad]
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    /// Max deviation from `c·I`.
    pub fn deviation_from_scalar(&self, c: f64) -> f64 {
        if self.dim == 1 {
            (self.a11 - c).abs()
        } else {
            (self.a11 - c).abs().max((self.a22 - c).abs()).max(self.a12.abs())
        }
    }
}

/// Per-node `τ[s]` in an orthonormal frame of the round metric.
#[derive(Debug, Clone)]
pub struct TauField {
    domain: DomainRef,
    mats: Vec<Sym>,
}

impl TauField {
    pub fn domain(&self) -> &DomainRef {
        &self.domain
    }

    /// `τ[λs] = λ·τ[s]`, without re-differentiating.
    pub fn scaled(&self, lambda: f64) -> TauField {
        let mats = self
            .mats
            .iter()
            .map(|m| Sym { a11: lambda * m.a11, a12: lambda * m.a12, a22: lambda * m.a22, ..*m })
            .collect();
        TauField { domain: self.domain.clone(), mats }
    }

    pub fn matrices(&self) -> &[Sym] {
        &self.mats
    }

    pub fn determinant(&self) -> ScalarField {
        ScalarField {
            domain: self.domain.clone(),
            values: self.mats.iter().map(Sym::det).collect(),
        }
    }

    pub fn max_trace(&self) -> f64 {
        self.mats.iter().map(Sym::trace).fold(f64::NEG_INFINITY, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::FRAC_PI_3;

    fn arc(res: usize) -> DomainRef {
        make_domain(2, FRAC_PI_3, res, Mode::Arc).unwrap()
    }

    #[test]
    fn weights_sum_to_cap_measure() {
        let d = arc(129);
        let sum: f64 = d.weights().iter().sum();
        assert_relative_eq!(sum, 2.0943951023931953, epsilon = 1e-12);
        let d3 = make_domain(3, FRAC_PI_3, 129, Mode::Axisymmetric).unwrap();
        let sum3: f64 = d3.weights().iter().sum();
        assert_relative_eq!(sum3, PI, epsilon = 1e-12);
        let f2 = make_full2d_domain(FRAC_PI_3, 33, 16).unwrap();
        let sumf: f64 = f2.weights().iter().sum();
        assert_relative_eq!(sumf, PI, epsilon = 1e-12);
        assert!(f2.weights().iter().all(|&w| w > 0.0));
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(matches!(make_domain(2, 1.6, 129, Mode::Arc), Err(CapError::Parameter(_))));
        assert!(make_domain(2, 0.0, 129, Mode::Arc).is_err());
        assert!(make_domain(4, 0.5, 129, Mode::Arc).is_err());
        assert!(make_domain(2, 0.5, 15, Mode::Arc).is_err());
        assert!(make_domain(2, 0.5, 64, Mode::Axisymmetric).is_err());
        assert!(make_domain(3, 0.5, 64, Mode::Arc).is_err());
    }

    #[test]
    fn endpoints_present() {
        let d = arc(129);
        assert_eq!(d.nodes()[0].beta, 0.0);
        assert_eq!(d.nodes()[128].beta, FRAC_PI_3);
        assert_eq!(d.len(), 129);
    }

    #[test]
    fn integrates_vertical_coordinate() {
        let d = arc(257);
        let c = FRAC_PI_3.cos();
        let g = ScalarField::from_fn(&d, |nd| nd.beta.cos() - c).unwrap();
        let exact = 2.0 * FRAC_PI_3.sin() - 2.0 * FRAC_PI_3 * c;
        assert_relative_eq!(d.integrate(&g).unwrap(), exact, epsilon = 10.0 * d.h() * d.h());
        assert_relative_eq!(exact, 0.6848533, epsilon = 1e-7);
    }

    #[test]
    fn node_vectors_match_definition() {
        let d = make_domain(2, FRAC_PI_3, 129, Mode::Arc).unwrap();
        let (u, z) = d.node_vectors(0).unwrap();
        assert_eq!(u, vec![0.0, 1.0]);
        assert_relative_eq!(z[1], 0.5, epsilon = 1e-15);
        let (u, z) = d.node_vectors(128).unwrap();
        assert_relative_eq!(u[1], 0.5, epsilon = 1e-15);
        assert!(z[1].abs() < 1e-15);
        let (u, z) = d.node_vectors(64).unwrap();
        assert_relative_eq!(u[0], 0.5, epsilon = 1e-15);
        assert_relative_eq!(u[1], 0.8660254037844387, epsilon = 1e-15);
        assert_relative_eq!(z[1], 0.3660254037844387, epsilon = 1e-15);
        assert!(matches!(d.node_vectors(129), Err(CapError::IndexOutOfRange { .. })));
    }

    #[test]
    fn constant_field_violates_robin_by_cot() {
        let d = arc(129);
        let one = ScalarField::constant(&d, 1.0);
        assert_relative_eq!(d.robin_residual(&one).unwrap(), 0.5773502691896258, epsilon = 1e-12);
    }

    #[test]
    fn manufactured_tau() {
        let d = arc(129);
        let s = ScalarField::from_fn(&d, |nd| {
            0.875 - 0.5 * nd.beta.cos() + 0.05 * (2.0 * nd.beta).cos()
        })
        .unwrap();
        let tau = d.tau_of(&s).unwrap();
        let tol = 10.0 * d.h() * d.h();
        for (m, nd) in tau.matrices().iter().zip(d.nodes()) {
            assert!((m.a11 - (0.875 - 0.15 * (2.0 * nd.beta).cos())).abs() < tol);
        }
        assert!((tau.matrices()[0].a11 - 0.725).abs() < tol);
        assert!(d.robin_residual(&s).unwrap() < tol);
    }

    #[test]
    fn full2d_tau_of_axisymmetric_field_matches_axisymmetric_mode() {
        let theta = 0.9;
        let full = make_full2d_domain(theta, 65, 16).unwrap();
        let axi = make_domain(3, theta, 65, Mode::Axisymmetric).unwrap();
        let g = |nd: Node| 1.0 - theta.cos() * nd.beta.cos() + 0.02 * (2.0 * nd.beta).cos();
        let tf = full.tau_of(&ScalarField::from_fn(&full, g).unwrap()).unwrap();
        let ta = axi.tau_of(&ScalarField::from_fn(&axi, g).unwrap()).unwrap();
        for i in 0..axi.n_beta() {
            for j in 0..full.n_alpha() {
                let mf = tf.matrices()[full.index(i, j)];
                let ma = ta.matrices()[i];
                assert!((mf.a11 - ma.a11).abs() < 1e-9, "level {i}");
                assert!((mf.a22 - ma.a22).abs() < 1e-9, "level {i}");
                assert!(mf.a12.abs() < 1e-9);
            }
        }
    }

    #[test]
    fn horizontal_moments_vanish() {
        let d = arc(65);
        let g = ScalarField::from_fn(&d, |nd| 1.0 + nd.beta.sin()).unwrap();
        assert_eq!(d.horizontal_moments(&g).unwrap(), vec![0.0]);
        let f = make_full2d_domain(0.7, 33, 12).unwrap();
        let g = ScalarField::from_fn(&f, |nd| 1.0 + 0.3 * (2.0 * nd.alpha).cos()).unwrap();
        assert_eq!(f.horizontal_moments(&g).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn mismatched_domains_rejected() {
        let a = arc(33);
        let b = arc(65);
        let g = ScalarField::constant(&b, 1.0);
        assert_eq!(a.integrate(&g), Err(CapError::DomainMismatch));
        assert_eq!(a.tau_of(&g).unwrap_err(), CapError::DomainMismatch);
    }

    #[test]
    fn sym_eigen() {
        let m = Sym { dim: 2, a11: 2.0, a12: 1.0, a22: 2.0 };
        let e = m.eigenvalues();
        assert_relative_eq!(e[0], 1.0, epsilon = 1e-14);
        assert_relative_eq!(e[1], 3.0, epsilon = 1e-14);
        assert_relative_eq!(m.det(), 3.0);
    }
}
