//! Gaussian and heat kernels, Hermite polynomials, and the Wiener-chaos
//! series of the heat kernel evaluated at a centred Gaussian coordinate.
//!
//! Hermite polynomials use the normalization
//! `H_n(x) = ((-1)^n / n!) e^{x²/2} dⁿ/dxⁿ e^{-x²/2}`, i.e. `H_n = He_n / n!`
//! with `He_n` the probabilists' polynomials, so `E[H_p(Z) H_q(Z)] = δ_pq / p!`.

use std::f64::consts::{PI, TAU};

use serde::Serialize;

use crate::error::{FracregError, Result};

/// `1 / √(2π)`
pub const INV_SQRT_TAU: f64 = 0.398_942_280_401_432_7;

/// Default truncation order for chaos series.
pub const DEFAULT_CHAOS_ORDER: usize = 80;

/// Smallest heat-kernel variance the verification commands accept by default.
pub const CHAOS_EPSILON_FLOOR: f64 = 0.25;

/// Standard Gaussian kernel `K(x) = e^{-x²/2} / √(2π)`.
#[inline]
pub fn gaussian_kernel(x: f64) -> f64 {
    INV_SQRT_TAU * (-0.5 * x * x).exp()
}

/// Heat kernel `p_ε(x) = e^{-x²/(2ε)} / √(2πε)`.
pub fn heat_kernel(x: f64, eps: f64) -> Result<f64> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(FracregError::domain(format!(
            "heat kernel variance must be positive and finite, got {eps}"
        )));
    }
    Ok(heat_kernel_unchecked(x, eps))
}

#[inline]
pub(crate) fn heat_kernel_unchecked(x: f64, eps: f64) -> f64 {
    (-x * x / (2.0 * eps)).exp() / (TAU * eps).sqrt()
}

/// `d₁ = ∫ K²(y) dy = 1 / (2√π)`.
pub fn kernel_l2_norm() -> f64 {
    0.5 / PI.sqrt()
}

/// `E[e^{-cZ²}] = (1 + 2c)^{-1/2}` for standard normal `Z`, valid when `1 + 2c > 0`.
pub fn gaussian_square_expectation(c: f64) -> Result<f64> {
    let base = 1.0 + 2.0 * c;
    if !(base > 0.0) {
        return Err(FracregError::domain(format!(
            "E[exp(-cZ^2)] is infinite unless 1 + 2c > 0, got c = {c}"
        )));
    }
    Ok(base.powf(-0.5))
}

/// Hermite polynomial `H_n(x) = He_n(x) / n!` by the three-term recurrence
/// `(n+1) H_{n+1}(x) = x H_n(x) − H_{n-1}(x)`.
pub fn hermite(n: usize, x: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, x);
    match n {
        0 => return 1.0,
        1 => return x,
        _ => {}
    }
    for k in 1..n {
        let next = (x * cur - prev) / (k + 1) as f64;
        prev = cur;
        cur = next;
    }
    cur
}

/// `He_n(x) / √(n!)` for all `n ≤ max_degree`. These stay O(1) in magnitude
/// where `H_n` underflows and `He_n` overflows.
fn orthonormal_hermite_table(max_degree: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(max_degree + 1);
    out.push(1.0);
    if max_degree >= 1 {
        out.push(x);
    }
    for k in 1..max_degree {
        let next = (x * out[k] - (k as f64).sqrt() * out[k - 1]) / ((k + 1) as f64).sqrt();
        out.push(next);
    }
    out
}

/// `C_m = (-1)^m / (√(2π) 2^m m!)`.
pub fn chaos_coefficient(m: usize) -> f64 {
    let mut c = INV_SQRT_TAU;
    for k in 1..=m {
        c /= -2.0 * k as f64;
    }
    c
}

/// `C_m² (2m)!`, the variance weight of the order-`2m` chaos.
pub fn chaos_variance_weight(m: usize) -> f64 {
    let mut v = 1.0 / TAU;
    for k in 1..=m {
        let k = k as f64;
        v *= (2.0 * k - 1.0) / (2.0 * k);
    }
    v
}

/// Truncated chaos expansion of `p_ε(X)` for a centred Gaussian `X` with
/// variance `phi_norm_sq`:
///
/// `p_ε(X) = Σ_m C_m I_{2m}(φ^{⊗2m}) (‖φ‖² + ε)^{-(m+½)}`,
/// `I_{2m}(φ^{⊗2m}) = (2m)! ‖φ‖^{2m} H_{2m}(X / ‖φ‖)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChaosSeries {
    epsilon: f64,
    phi_norm_sq: f64,
    max_order: usize,
    /// `C_m (2m)! ‖φ‖^{2m} / (‖φ‖² + ε)^{m+½}`; the multiplier of `H_{2m}(X/‖φ‖)`.
    /// Entries overflow to ±∞ for very large orders; evaluation does not use them.
    coefficients: Vec<f64>,
    /// Same terms rescaled to multiply `He_{2m}/√((2m)!)`.
    #[serde(skip_serializing)]
    weights: Vec<f64>,
}

impl ChaosSeries {
    pub fn new(epsilon: f64, phi_norm_sq: f64, max_order: usize) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(FracregError::domain(format!(
                "chaos series needs a positive heat-kernel variance, got {epsilon}"
            )));
        }
        if !(phi_norm_sq > 0.0) || !phi_norm_sq.is_finite() {
            return Err(FracregError::domain(format!(
                "chaos series needs a positive coordinate variance, got {phi_norm_sq}"
            )));
        }
        let total = phi_norm_sq + epsilon;
        let ratio = phi_norm_sq / total;

        let mut weights = Vec::with_capacity(max_order + 1);
        let mut w = INV_SQRT_TAU / total.sqrt();
        weights.push(w);
        for m in 1..=max_order {
            let two_m = 2.0 * m as f64;
            w *= -ratio * (two_m * (two_m - 1.0)).sqrt() / two_m;
            weights.push(w);
        }

        // coefficient_m = weight_m · √((2m)!), assembled in log space
        let mut half_log_fact = 0.0;
        let coefficients = weights
            .iter()
            .enumerate()
            .map(|(m, &w)| {
                if m > 0 {
                    let two_m = 2.0 * m as f64;
                    half_log_fact += 0.5 * (two_m.ln() + (two_m - 1.0).ln());
                }
                if w == 0.0 {
                    0.0
                } else {
                    w.signum() * (w.abs().ln() + half_log_fact).exp()
                }
            })
            .collect();

        Ok(ChaosSeries {
            epsilon,
            phi_norm_sq,
            max_order,
            coefficients,
            weights,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn phi_norm_sq(&self) -> f64 {
        self.phi_norm_sq
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    /// `L²` norm of each chaos term, `|coefficient_m| / √((2m)!)`.
    pub fn term_norms(&self) -> Vec<f64> {
        self.weights.iter().map(|w| w.abs()).collect()
    }

    /// Partial sums of orders `0..=max_order` at `z`.
    pub fn partial_sums(&self, z: f64) -> Vec<f64> {
        let x = z / self.phi_norm_sq.sqrt();
        let psi = orthonormal_hermite_table(2 * self.max_order, x);
        let mut acc = 0.0;
        self.weights
            .iter()
            .enumerate()
            .map(|(m, w)| {
                acc += w * psi[2 * m];
                acc
            })
            .collect()
    }
}

/// Order-`max_order` partial sum of the chaos series at `z`. Converges to
/// `p_ε(z)` as the order grows.
pub fn chaos_eval(z: f64, series: &ChaosSeries) -> f64 {
    *series
        .partial_sums(z)
        .last()
        .expect("series has at least the zeroth term")
}
