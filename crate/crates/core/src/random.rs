//! Seeded random test bodies.
//!
//! A random body is the solution of the Minkowski problem for a random
//! positive even curvature function, so it is valid by construction. The
//! density is `c·exp(Σ a_k T_k(2t − 1))` with Chebyshev polynomials `T_k` in
//! `t = (cosβ − cosθ)/(1 − cosθ) ∈ [0, 1]`; in full2d mode a `cos 2α` term
//! is added. Everything is driven by a ChaCha stream, so a seed reproduces
//! the same bodies on every platform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::body::CapillaryBody;
use crate::domain::{DomainRef, Mode, ScalarField};
use crate::error::Result;
use crate::minkowski::{solve, SolveOptions};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomOptions {
    /// Number of Chebyshev terms.
    pub modes: usize,
    /// Bound on each exponent coefficient.
    pub amplitude: f64,
    /// Range of the overall factor `c`.
    pub scale: (f64, f64),
}

impl Default for RandomOptions {
    fn default() -> Self {
        RandomOptions { modes: 3, amplitude: 0.25, scale: (0.5, 2.0) }
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_density(domain: &DomainRef, rng: &mut ChaCha8Rng, opts: &RandomOptions) -> Result<ScalarField> {
    let coeffs: Vec<f64> = (0..opts.modes)
        .map(|_| rng.gen_range(-opts.amplitude..=opts.amplitude))
        .collect();
    let azimuthal = if domain.mode() == Mode::Full2d {
        rng.gen_range(-opts.amplitude..=opts.amplitude)
    } else {
        0.0
    };
    let c = rng.gen_range(opts.scale.0..=opts.scale.1);
    let ct = domain.theta().cos();
    ScalarField::from_fn(domain, |nd| {
        let t = (nd.beta.cos() - ct) / (1.0 - ct);
        let x = 2.0 * t - 1.0;
        let (mut prev, mut cur) = (1.0, x);
        let mut e = 0.0;
        for a in &coeffs {
            e += a * cur;
            let next = 2.0 * x * cur - prev;
            prev = cur;
            cur = next;
        }
        e += azimuthal * nd.beta.sin() * (2.0 * nd.alpha).cos();
        c * e.exp()
    })
}

pub fn random_body(domain: &DomainRef, rng: &mut ChaCha8Rng, opts: &RandomOptions) -> Result<CapillaryBody> {
    let f = random_density(domain, rng, opts)?;
    solve(domain, &f, &SolveOptions::default())
}

/// `count` bodies from one seeded stream.
pub fn random_bodies(domain: &DomainRef, seed: u64, count: usize) -> Result<Vec<CapillaryBody>> {
    let mut r = rng(seed);
    let opts = RandomOptions::default();
    (0..count).map(|_| random_body(domain, &mut r, &opts)).collect()
}
