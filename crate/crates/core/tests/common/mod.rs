//! Random parameter and state samplers shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use seasonal_sir::equilibria::{in_u1, thresholds};
use seasonal_sir::model::{ModelParams, State2, State3};
use seasonal_sir::sweep::set_param;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Broad box of valid autonomous parameters.
pub fn random_params(rng: &mut ChaCha8Rng) -> ModelParams {
    ModelParams::new(
        rng.gen_range(0.2..2.0),
        rng.gen_range(0.01..1.0),
        rng.gen_range(0.01..1.0),
        rng.gen_range(0.1..4.0),
        rng.gen_range(0.01..0.5),
    )
}

/// Draw from the backward-bifurcation set: `aβ₀ < √r`, `β₀ < 1`, and `A`
/// picked so that `R₀` lies uniformly in `(max(φ₀, 0), 1)`.
pub fn random_u1(rng: &mut ChaCha8Rng) -> ModelParams {
    loop {
        let beta0 = rng.gen_range(0.2..0.99);
        let r: f64 = rng.gen_range(0.05..1.0);
        let a = rng.gen_range(0.05..0.95) * r.sqrt() / beta0;
        let mu = rng.gen_range(0.01..0.3);
        let mut p = ModelParams::new(1.0, a, r, beta0, mu);
        let phi0 = thresholds(&p).unwrap().phi0.max(0.0);
        let r0 = phi0 + (1.0 - phi0) * rng.gen_range(0.02..0.98);
        set_param(&mut p, "R0", r0).unwrap();
        if p.validate().is_ok() && in_u1(&p) {
            return p;
        }
    }
}

/// Uniform point of `{0 ≤ S ≤ A, I, R ≥ 0, S+I+R ≤ A(μ+A)/μ}`.
pub fn random_state_in_m(rng: &mut ChaCha8Rng, p: &ModelParams) -> State3 {
    let bound = p.capacity * (p.mu + p.capacity) / p.mu;
    loop {
        let s = rng.gen_range(0.0..=p.capacity);
        let i = rng.gen_range(0.0..=bound);
        let r = rng.gen_range(0.0..=bound);
        if s + i + r <= bound {
            return State3::new(s, i, r);
        }
    }
}

pub fn random_planar_state(rng: &mut ChaCha8Rng, p: &ModelParams) -> State2 {
    State2::new(
        rng.gen_range(0.0..=p.capacity),
        rng.gen_range(0.0..=p.capacity),
    )
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}
