//! Seeded randomness shared by every stochastic component.
//!
//! All draws come from PCG32 (PCG-XSH-RR 64/32: a 64-bit LCG state with a 32-bit
//! xorshift-rotate output), as implemented by `rand_pcg::Pcg32`. A seed is expanded to
//! the generator state with `rand_core`'s `seed_from_u64`. Independent streams for
//! parallel work use `Pcg32::new(state, stream)` so results never depend on scheduling.
//!
//! Derived draws are defined here so they can be reproduced outside Rust:
//!
//! - uniform in `[0, 1)`: `(next_u64 >> 11) * 2^-53`, where `next_u64` joins two
//!   successive 32-bit outputs, low word first;
//! - standard normal: Box-Muller cosine branch, `sqrt(-2 ln(1 - u1)) * cos(2 pi u2)`,
//!   consuming two uniforms per draw.

use rand::{RngCore, SeedableRng};
pub use rand_pcg::Pcg32;

const STREAM_STATE_MIX: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn seeded(seed: u64) -> Pcg32 {
    Pcg32::seed_from_u64(seed)
}

/// Generator for an independent stream, e.g. one per rollout step.
pub fn stream(seed: u64, stream_id: u64) -> Pcg32 {
    Pcg32::new(seed.wrapping_mul(STREAM_STATE_MIX) ^ STREAM_STATE_MIX, stream_id)
}

pub fn uniform(rng: &mut Pcg32) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform in `[-bound, bound)`.
pub fn symmetric(rng: &mut Pcg32, bound: f64) -> f64 {
    (2.0 * uniform(rng) - 1.0) * bound
}

pub fn normal(rng: &mut Pcg32) -> f64 {
    let u1 = uniform(rng);
    let u2 = uniform(rng);
    (-2.0 * (1.0 - u1).ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Fisher-Yates shuffle driven by [`uniform`].
pub fn shuffle<T>(rng: &mut Pcg32, items: &mut [T]) {
    for i in (1..items.len()).rev() {
        let j = ((uniform(rng) * (i + 1) as f64) as usize).min(i);
        items.swap(i, j);
    }
}
