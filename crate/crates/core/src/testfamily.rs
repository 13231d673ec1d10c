//! Seeded families of test functions.
//!
//! The generator is `ChaCha8Rng` seeded with `seed_from_u64`, so a family is
//! reproducible from its seed on every platform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bumps::{kappa, rho_eps};
use crate::funcrep::FunctionRep;
use crate::profile::SingularityProfile;

/// Name of the generator recorded in reports.
pub const GENERATOR: &str = "rand_chacha::ChaCha8Rng::seed_from_u64";

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A bump away from the origin, so its jet at 0 vanishes.
pub fn random_p_function(rng: &mut ChaCha8Rng) -> FunctionRep {
    let w = rng.random_range(0.05..0.8);
    let side = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    let t = side * (1.5 * w + rng.random_range(0.05..6.0));
    let amp = rng.random_range(-1.0..1.0);
    let degree = rng.random_range(0..3);
    rho_eps(w).expect("width in range").profile.translate(t).monomial(degree).scale(amp)
}

/// A sum of monomials on plateaus containing 0 and bumps away from it.
pub fn random_test_function(rng: &mut ChaCha8Rng, p: &SingularityProfile) -> FunctionRep {
    let mut terms = Vec::new();
    for _ in 0..rng.random_range(1..=3) {
        let w = rng.random_range(0.05..1.0);
        let t = rng.random_range(-0.3..0.3) * w;
        let degree = rng.random_range(0..=p.n as u32 + 1);
        let amp = rng.random_range(-1.0..1.0);
        terms.push(rho_eps(w).expect("width in range").profile.translate(t).monomial(degree).scale(amp));
    }
    for _ in 0..rng.random_range(0..=2) {
        terms.push(random_p_function(rng));
    }
    if rng.random_bool(0.3) {
        let n = rng.random_range(-8..=8);
        terms.push(kappa(n).profile.scale(rng.random_range(-1.0..1.0)));
    }
    FunctionRep::sum(terms)
}

/// `sum_{k<=degree} (r^k / c_k) x^k / k! rho_width`: every correction term
/// `c_k^2 f^(k)(0)^2` equals `r^{2k}`, so truncation errors decay like `r^{2N}`.
pub fn jet_balanced(p: &SingularityProfile, r: f64, width: f64, degree: usize) -> FunctionRep {
    let base = rho_eps(width).expect("width in range").profile;
    FunctionRep::sum(
        (0..=degree)
            .map(|k| base.monomial(k as u32).scale(r.powi(k as i32) / p.coefficient(k).sqrt()))
            .collect(),
    )
}

/// Fixed functions with every moment of order up to 8 in a comfortable range.
pub fn regression_family() -> Vec<FunctionRep> {
    let r = || rho_eps(1.0).expect("unit width").profile;
    vec![
        r(),
        r().translate(0.7),
        r().dilate(0.4).translate(-1.1).monomial(2),
        FunctionRep::sum(vec![r().monomial(1), r().dilate(0.3).translate(2.5).scale(-0.6)]),
        kappa(3).profile,
        r().dilate(2.0).monomial(3).scale(0.2),
    ]
}
