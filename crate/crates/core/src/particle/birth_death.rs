//! Exact transitions of a linear birth-death chain (per-particle birth rate
//! `β`, death rate `δ`).
//!
//! From one particle, after time `a`: extinct with probability `p0`, else
//! `1 + Geometric` with `P(N = k | N > 0) = (1 - q) q^{k-1}`.

use rand::Rng;
use rand_distr::{Binomial, Distribution, Gamma, Geometric, Poisson};

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct BdLaw {
    pub p0: f64,
    pub q: f64,
}

pub(crate) fn law(beta: f64, delta: f64, a: f64) -> BdLaw {
    let rho = beta - delta;
    if rho == 0.0 {
        let x = beta * a;
        let p = x / (1.0 + x);
        return BdLaw { p0: p, q: p };
    }
    let em1 = libm::expm1(rho * a);
    let den = beta * em1 + rho;
    BdLaw { p0: delta * em1 / den, q: beta * em1 / den }
}

pub(crate) fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("finite positive mean").sample(rng) as u64
}

/// Particle count after time `a`, starting from `n0` particles.
pub(crate) fn transition<R: Rng + ?Sized>(n0: u64, law: BdLaw, rng: &mut R) -> u64 {
    if n0 == 0 {
        return 0;
    }
    let survive = (1.0 - law.p0).clamp(0.0, 1.0);
    let s = Binomial::new(n0, survive).expect("probability in [0, 1]").sample(rng);
    if s == 0 || law.q <= 0.0 {
        return s;
    }
    // Sum of s geometric family excesses is negative binomial: Poisson-Gamma mixture.
    let scale = law.q / (1.0 - law.q);
    let mean = Gamma::new(s as f64, scale).expect("positive shape and scale").sample(rng);
    s + poisson(mean, rng)
}

/// Family size of a single particle after time `a`.
pub(crate) fn family<R: Rng + ?Sized>(law: BdLaw, rng: &mut R) -> u64 {
    if rng.random::<f64>() < law.p0 {
        return 0;
    }
    if law.q <= 0.0 {
        return 1;
    }
    1 + Geometric::new(1.0 - law.q).expect("probability in (0, 1]").sample(rng)
}
