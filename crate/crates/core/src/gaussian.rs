//! Standard normal draws by the Box–Muller transform.
//!
//! The transform only consumes raw 64-bit words from the generator, so a
//! seeded stream yields the same normals on every platform.

use rand::RngCore;
use std::f64::consts::TAU;

/// Uniform on (0, 1], 53 bits of resolution.
#[inline]
fn open_unit<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    let bits = rng.next_u64() >> 11;
    (bits as f64 + 1.0) * (1.0 / (1u64 << 53) as f64)
}

/// One Box–Muller pair of independent N(0,1) values.
#[inline]
pub fn normal_pair<R: RngCore + ?Sized>(rng: &mut R) -> (f64, f64) {
    let u1 = open_unit(rng);
    let u2 = open_unit(rng);
    let radius = (-2.0 * u1.ln()).sqrt();
    let (sin, cos) = (TAU * u2).sin_cos();
    (radius * cos, radius * sin)
}

pub fn standard_normal<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    normal_pair(rng).0
}

/// Fill `out` with independent standard normals. An odd trailing slot uses
/// the first half of a fresh pair and drops the second.
pub fn fill_standard_normal<R: RngCore + ?Sized>(rng: &mut R, out: &mut [f64]) {
    let mut chunks = out.chunks_exact_mut(2);
    for pair in &mut chunks {
        let (a, b) = normal_pair(rng);
        pair[0] = a;
        pair[1] = b;
    }
    if let [last] = chunks.into_remainder() {
        *last = standard_normal(rng);
    }
}
