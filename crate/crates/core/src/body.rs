//! Even, strictly convex capillary bodies represented by their capillary
//! support function on `C_θ`.

use serde::{Deserialize, Serialize};

use crate::domain::{
    one_sided_derivative, unit_vector, DomainRef, Mode, ScalarField, TauField,
};
use crate::error::{CapError, Result};

/// Validation thresholds for [`CapillaryBody::from_support`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Robin residual bound; `None` means `10·h²` of the domain.
    pub bc: Option<f64>,
    /// Smallest admissible eigenvalue of `τ[s]`.
    pub convex: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { bc: None, convex: 1e-10 }
    }
}

impl Tolerances {
    pub fn bc_for(&self, domain: &DomainRef) -> f64 {
        self.bc.unwrap_or_else(|| domain.default_bc_tol())
    }
}

#[derive(Debug, Clone)]
pub struct CapillaryBody {
    support: ScalarField,
    tau: TauField,
    curvature: ScalarField,
}

impl CapillaryBody {
    /// Validated constructor: positivity, capillary boundary condition and
    /// strict convexity of `τ[s]` at every node.
    pub fn from_support(s: ScalarField, tol: Tolerances) -> Result<Self> {
        let domain = s.domain().clone();
        let (min, node) = s.min();
        if min <= 0.0 {
            return Err(CapError::Positivity { node, min });
        }
        let bc = tol.bc_for(&domain);
        let residual = domain.robin_residual(&s)?;
        if residual > bc {
            return Err(CapError::Robin { residual, tol: bc });
        }
        let tau = domain.tau_of(&s)?;
        let (eigenvalue, node) = tau
            .matrices()
            .iter()
            .map(|m| m.min_eigenvalue())
            .enumerate()
            .fold((f64::INFINITY, 0), |acc, (k, e)| if e < acc.0 { (e, k) } else { acc });
        if !(eigenvalue > tol.convex) {
            return Err(CapError::Convexity { node, eigenvalue });
        }
        let curvature = tau.determinant();
        Ok(CapillaryBody { support: s, tau, curvature })
    }

    /// Scaled copy; all invariants are preserved under dilation.
    pub fn scaled(&self, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(CapError::Parameter(format!("dilation factor {lambda} must be positive")));
        }
        let support = self.support.scaled(lambda);
        let tau = self.tau.scaled(lambda);
        let curvature = self.curvature.scaled(lambda.powi(self.domain().n() as i32 - 1));
        Ok(CapillaryBody { support, tau, curvature })
    }

    pub fn domain(&self) -> &DomainRef {
        self.support.domain()
    }

    pub fn support(&self) -> &ScalarField {
        &self.support
    }

    pub fn tau(&self) -> &TauField {
        &self.tau
    }

    /// Capillary curvature function `f = σ_{n−1}(τ[s])`.
    pub fn curvature_function(&self) -> &ScalarField {
        &self.curvature
    }

    /// Largest `σ_1(τ[s])` over the nodes.
    pub fn max_sigma1(&self) -> f64 {
        self.tau.max_trace()
    }

    /// `V = (1/n) ∫ s f dσ`.
    pub fn volume(&self) -> f64 {
        mixed_integral(self, self)
    }

    pub fn robin_residual(&self) -> f64 {
        self.domain().robin_values(self.support.values())
    }

    /// Points of the hypersurface from the inverse Gauss map `X = ∇ŝ + ŝ·u`.
    ///
    /// Arc and axisymmetric bodies return the full meridian `β ∈ [−θ, θ]`
    /// in the `x_1 x_n` plane; full2d bodies return every node and its
    /// mirror image. The boundary derivative is the one-sided stencil, so
    /// `x_n(θ) = sinθ·(cotθ·s − ∂_β s)` measures the contact condition.
    pub fn embed(&self) -> Vec<Vec<f64>> {
        let d = self.domain();
        let s = self.support.values();
        let n = d.n();
        let h = d.h();

        let meridian_derivative = |m: &[f64]| {
            let mut d1 = d.stencil().d1(m);
            let last = m.len() - 1;
            d1[last] = one_sided_derivative(m, h);
            d1
        };
        let point = |beta: f64, alpha: f64, value: f64, d_beta: f64, d_alpha: f64| {
            let u = unit_vector(n, beta, alpha);
            let (sb, cb) = beta.sin_cos();
            let (sa, ca) = alpha.sin_cos();
            let e_beta = if n == 2 { vec![cb, -sb] } else { vec![cb * ca, cb * sa, -sb] };
            let e_alpha = if n == 2 { vec![0.0, 0.0] } else { vec![-sa, ca, 0.0] };
            (0..n)
                .map(|k| value * u[k] + d_beta * e_beta[k] + d_alpha * e_alpha[k])
                .collect::<Vec<f64>>()
        };

        match d.mode() {
            Mode::Arc | Mode::Axisymmetric => {
                let d1 = meridian_derivative(s);
                let betas = d.betas();
                let mut out = Vec::with_capacity(2 * s.len() - 1);
                for i in (1..s.len()).rev() {
                    // β < 0 is the mirror image: azimuth π on the same meridian plane.
                    let mut x = point(betas[i], 0.0, s[i], d1[i], 0.0);
                    x[0] = -x[0];
                    out.push(x);
                }
                for i in 0..s.len() {
                    out.push(point(betas[i], 0.0, s[i], d1[i], 0.0));
                }
                out
            }
            Mode::Full2d => {
                let m = d.n_alpha();
                let ha = d.h_alpha().unwrap_or(1.0);
                let mut out = vec![point(0.0, 0.0, s[0], 0.0, 0.0)];
                let meridians: Vec<Vec<f64>> = (0..m)
                    .map(|j| (0..d.n_beta()).map(|i| s[d.index(i, j)]).collect())
                    .collect();
                let d1: Vec<Vec<f64>> = meridians.iter().map(|v| meridian_derivative(v)).collect();
                for i in 1..d.n_beta() {
                    let beta = d.betas()[i];
                    for (j, &alpha) in d.alphas().iter().enumerate() {
                        let jp = (j + 1) % m;
                        let jm = (j + m - 1) % m;
                        let s_a = (meridians[jp][i] - meridians[jm][i]) / (2.0 * ha);
                        let x = point(beta, alpha, meridians[j][i], d1[j][i], s_a / beta.sin());
                        let mut mirror = x.clone();
                        mirror[0] = -mirror[0];
                        mirror[1] = -mirror[1];
                        out.push(x);
                        out.push(mirror);
                    }
                }
                out
            }
        }
    }
}

/// `(1/n) ∫ s_K f_L dσ`.
fn mixed_integral(k: &CapillaryBody, l: &CapillaryBody) -> f64 {
    let d = k.domain();
    let integral: f64 = d
        .weights()
        .iter()
        .zip(k.support.values())
        .zip(l.curvature.values())
        .map(|((w, s), f)| w * s * f)
        .sum();
    integral / d.n() as f64
}

/// The cap of radius `r` meeting the hyperplane at angle θ:
/// `s(β) = r·(1 − cosθ·cosβ)`.
///
/// The cap is the part of the sphere of radius `r` centred at `−r·cosθ·E_n`
/// above `x_n = 0`. The point with unit normal `ν` is `X = −r·cosθ·E_n + r·ν`,
/// and `ν = ζ + cosθ·E_n` makes angle β with `E_n`, so
/// `s = ⟨X, ν⟩ = r − r·cosθ·cosβ`.
pub fn cap_body(domain: &DomainRef, r: f64) -> Result<CapillaryBody> {
    if !(r > 0.0) {
        return Err(CapError::Parameter(format!("cap radius {r} must be positive")));
    }
    let c = domain.theta().cos();
    let s = ScalarField::from_fn(domain, |nd| r * (1.0 - c * nd.beta.cos()))?;
    CapillaryBody::from_support(s, Tolerances::default())
}

/// Mixed volume `V(K̂, L̂[n−1]) = (1/n) ∫ s_K f_L dσ`.
pub fn mixed_volume(k: &CapillaryBody, l: &CapillaryBody) -> Result<f64> {
    if !k.domain().same_grid(l.domain()) {
        return Err(CapError::DomainMismatch);
    }
    Ok(mixed_integral(k, l))
}

/// Self-describing body record used for serialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BodyRecord {
    pub n: usize,
    pub theta: f64,
    pub mode: Mode,
    pub beta: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub alpha: Vec<f64>,
    pub s: Vec<f64>,
}

impl BodyRecord {
    pub fn from_body(body: &CapillaryBody) -> Self {
        let d = body.domain();
        BodyRecord {
            n: d.n(),
            theta: d.theta(),
            mode: d.mode(),
            beta: d.betas().to_vec(),
            alpha: d.alphas().to_vec(),
            s: body.support.values().to_vec(),
        }
    }

    /// Rebuild the domain and validate the body.
    pub fn to_body(&self, tol: Tolerances) -> Result<CapillaryBody> {
        let domain = match self.mode {
            Mode::Full2d => {
                crate::domain::make_full2d_domain(self.theta, self.beta.len(), self.alpha.len())?
            }
            mode => crate::domain::make_domain(self.n, self.theta, self.beta.len(), mode)?,
        };
        if domain.n() != self.n
            || domain.betas() != self.beta.as_slice()
            || domain.alphas() != self.alpha.as_slice()
        {
            return Err(CapError::Parameter(
                "stored grid does not match the regenerated cap domain".into(),
            ));
        }
        let s = ScalarField::new(domain, self.s.clone())?;
        CapillaryBody::from_support(s, tol)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("body record serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| CapError::Io(e.to_string()))
    }
}
