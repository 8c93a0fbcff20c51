//! Numerical solver for the even capillary L_p-Minkowski problem.
//!
//! A capillary hypersurface in the upper halfspace meets the boundary
//! hyperplane at a constant contact angle θ ∈ (0, π/2). Such surfaces are
//! described by a capillary support function `s` on the spherical cap
//! `C_θ`, and their reciprocal Gauss curvature pulled back to the cap is
//! `f = σ_{n−1}(∇̄²s + s·ḡ)`. Given a positive even density `φ` and
//! `p ∈ (−n, 1)`, the crate finds `s` with `s^{1−p} f = φ` by iterating the
//! capillary curvature image operator:
//!
//! - [`domain`]: cap grids, quadrature and the differential stencils;
//! - [`body`]: validated capillary bodies, volume and mixed volume;
//! - [`minkowski`]: the capillary Minkowski problem `f` → `s`;
//! - [`functionals`]: `A_p`, `B_p`, `Ω_p` and the identities linking them;
//! - [`iteration`]: the curvature image operator, the driver and normalization;
//! - [`phi`]: density specs and CSV tables;
//! - [`random`]: seeded random test bodies;
//! - [`verify`]: the invariant suite behind `caplp verify`.

pub mod body;
pub mod domain;
pub mod error;
pub mod functionals;
pub mod iteration;
pub mod minkowski;
pub mod phi;
pub mod random;
mod stencil;
pub mod verify;

pub use body::{cap_body, mixed_volume, BodyRecord, CapillaryBody, Tolerances};
pub use domain::{make_domain, make_full2d_domain, CapDomain, DomainRef, Mode, ScalarField, TauField};
pub use error::{CapError, Result};
pub use iteration::{iterate, lambda_op, normalize, IterateOptions, IterationOutcome, IterationTrace};
pub use minkowski::{check_compatibility, solve, SolveOptions};
pub use phi::{parse_phi, PhiSpec};
