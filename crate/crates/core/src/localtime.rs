//! Estimators of the local time at zero, `L^H(1, 0)`, of an fBm path on
//! `[0, 1]`, and the closed-form mean used as their oracle.
//!
//! Paths arrive on the integer grid and are mapped to `[0, 1]` by
//! self-similarity before estimation.

use serde::{Deserialize, Serialize};

use crate::error::{FracregError, Result};
use crate::fbm::{FbmPath, HurstParam};
use crate::kernels::{gaussian_kernel, heat_kernel_unchecked, kernel_l2_norm, INV_SQRT_TAU};
use crate::statistics::{compute_bracket, ModelConfig};

/// Default half-width of the occupation band on the unit-time grid.
pub const DEFAULT_BAND_HALF_WIDTH: f64 = 0.05;

/// Default heat-kernel variance, `h²` for the default band.
pub const DEFAULT_HEAT_EPSILON: f64 = DEFAULT_BAND_HALF_WIDTH * DEFAULT_BAND_HALF_WIDTH;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocalTimeMethod {
    OccupationBand,
    HeatSmoothed,
    BracketImplied,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalTimeEstimate {
    pub value: f64,
    pub method: LocalTimeMethod,
    /// Band half-width, heat-kernel variance, or kernel bandwidth `n^{-α}`.
    pub bandwidth: f64,
    pub grid_size: usize,
}

/// Fraction of grid times `i/n`, `i < n`, spent in `[-h, h]`, divided by `2h`.
pub fn occupation_band_estimate(path: &FbmPath, h: f64) -> Result<LocalTimeEstimate> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(FracregError::domain(format!(
            "band half-width must be positive, got {h}"
        )));
    }
    let n = path.len();
    let unit = path.rescaled();
    let hits = unit[..n].iter().filter(|b| b.abs() <= h).count();
    Ok(LocalTimeEstimate {
        value: hits as f64 / (2.0 * h * n as f64),
        method: LocalTimeMethod::OccupationBand,
        bandwidth: h,
        grid_size: n,
    })
}

/// `(1/n) Σ_{i<n} p_ε(B_{i/n})`.
pub fn heat_smoothed_estimate(path: &FbmPath, eps: f64) -> Result<LocalTimeEstimate> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(FracregError::domain(format!(
            "heat-kernel variance must be positive, got {eps}"
        )));
    }
    let n = path.len();
    let unit = path.rescaled();
    let total: f64 = unit[..n]
        .iter()
        .map(|&b| heat_kernel_unchecked(b, eps))
        .sum();
    Ok(LocalTimeEstimate {
        value: total / n as f64,
        method: LocalTimeMethod::HeatSmoothed,
        bandwidth: eps,
        grid_size: n,
    })
}

/// `n^{α+h1−1} ⟨S⟩_n / ∫K²`.
pub fn bracket_implied_estimate(path: &FbmPath, config: &ModelConfig) -> Result<LocalTimeEstimate> {
    let bracket = compute_bracket(path, config)?;
    Ok(LocalTimeEstimate {
        value: config.variance_scale() * bracket / kernel_l2_norm(),
        method: LocalTimeMethod::BracketImplied,
        bandwidth: 1.0 / config.kernel_scale(),
        grid_size: config.n,
    })
}

/// `E L^H(1, 0) = ∫₀¹ (2π s^{2H})^{-1/2} ds = 1 / (√(2π)(1 − H))`.
pub fn expected_local_time(hurst: HurstParam) -> f64 {
    INV_SQRT_TAU / (1.0 - hurst.value())
}

/// Exact mean of [`heat_smoothed_estimate`] on an `n`-step path.
pub fn expected_heat_smoothed(n: usize, hurst: HurstParam, eps: f64) -> f64 {
    let two_h = 2.0 * hurst.value();
    (0..n)
        .map(|i| {
            let var = (i as f64 / n as f64).powf(two_h) + eps;
            INV_SQRT_TAU / var.sqrt()
        })
        .sum::<f64>()
        / n as f64
}

/// Scaled gap between the Riemann sum of `K²(n^{α+h1} B_s)` on the coarse
/// grid `i/n` and its integral over `[0, 1]`:
///
/// `n^{α+h1} |(1/n) Σ_{i<n} K²(n^{α+h1} B_{i/n}) − ∫₀¹ K²(n^{α+h1} B_s) ds|`.
///
/// `fine_path` must hold `r·n` steps for an integer refinement `r ≥ 2`; the
/// integral is the trapezoidal rule on that fine grid.
pub fn riemann_discrepancy(fine_path: &FbmPath, config: &ModelConfig) -> Result<f64> {
    config.validate()?;
    let n = config.n;
    let fine = fine_path.len();
    if fine_path.hurst() != config.h1 {
        return Err(FracregError::config(format!(
            "path has Hurst index {}, config expects {}",
            fine_path.hurst(),
            config.h1
        )));
    }
    if !fine.is_multiple_of(n) || fine / n < 2 {
        return Err(FracregError::config(format!(
            "refinement grid needs an integer factor >= 2 over n = {n}, path has {fine} steps"
        )));
    }
    let refinement = fine / n;
    let unit = fine_path.rescaled();
    let scale = (n as f64).powf(config.alpha + config.h1.value());
    let k2 = |b: f64| gaussian_kernel(scale * b).powi(2);

    let riemann = (0..n).map(|i| k2(unit[i * refinement])).sum::<f64>() / n as f64;
    let interior: f64 = unit[1..fine].iter().map(|&b| k2(b)).sum();
    let integral = (0.5 * (k2(unit[0]) + k2(unit[fine])) + interior) / fine as f64;
    Ok(scale * (riemann - integral).abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h(v: f64) -> HurstParam {
        HurstParam::new(v).unwrap()
    }

    #[test]
    fn expected_local_time_values() {
        assert!((expected_local_time(h(0.5)) - 0.797_884_6).abs() < 1e-7);
        assert!((expected_local_time(h(0.5)) - (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-15);
        assert!((expected_local_time(h(0.75)) - 1.595_769_1).abs() < 1e-7);
    }

    #[test]
    fn band_counts_only_origin_for_far_paths() {
        let n = 10;
        let mut values = vec![1e6; n + 1];
        values[0] = 0.0;
        let p = FbmPath::new(h(0.5), values).unwrap();
        let est = occupation_band_estimate(&p, 0.05).unwrap();
        assert!((est.value - 1.0 / (2.0 * 0.05 * n as f64)).abs() < 1e-15);
        assert_eq!(est.method, LocalTimeMethod::OccupationBand);
        assert!(occupation_band_estimate(&p, 0.0).is_err());
        assert!(occupation_band_estimate(&p, -1.0).is_err());
    }

    #[test]
    fn heat_smoothed_on_zero_path() {
        let p = FbmPath::new(h(0.3), vec![0.0; 9]).unwrap();
        let est = heat_smoothed_estimate(&p, 1.0).unwrap();
        assert!((est.value - INV_SQRT_TAU).abs() < 1e-16);
        assert!(heat_smoothed_estimate(&p, 0.0).is_err());
    }

    #[test]
    fn bracket_implied_is_scaled_bracket() {
        let config = ModelConfig::new(0.5, 0.5, 0.25, 4).unwrap();
        let p = FbmPath::new(h(0.5), vec![0.0, 0.3, -0.2, 0.1, 0.6]).unwrap();
        let est = bracket_implied_estimate(&p, &config).unwrap();
        let want =
            config.variance_scale() * compute_bracket(&p, &config).unwrap() / kernel_l2_norm();
        assert_eq!(est.value, want);
        // unit-interval form: K²(n^{α+H} B_{i/n}) on the rescaled path
        let unit = p.rescaled();
        let scale = 4f64.powf(0.75);
        let alt: f64 = unit[..4]
            .iter()
            .map(|b| gaussian_kernel(scale * b).powi(2))
            .sum();
        assert!((alt - compute_bracket(&p, &config).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn riemann_zero_for_flat_path() {
        let config = ModelConfig::new(0.5, 0.5, 0.25, 8).unwrap();
        let p = FbmPath::new(h(0.5), vec![0.0; 8 * 16 + 1]).unwrap();
        assert!(riemann_discrepancy(&p, &config).unwrap() < 1e-13);
    }

    #[test]
    fn riemann_refinement_checks() {
        let config = ModelConfig::new(0.5, 0.5, 0.25, 8).unwrap();
        let same = FbmPath::new(h(0.5), vec![0.0; 9]).unwrap();
        assert!(matches!(
            riemann_discrepancy(&same, &config),
            Err(FracregError::Config(_))
        ));
        let ragged = FbmPath::new(h(0.5), vec![0.0; 8 * 3 + 2]).unwrap();
        assert!(riemann_discrepancy(&ragged, &config).is_err());
        let wrong_h = FbmPath::new(h(0.6), vec![0.0; 8 * 2 + 1]).unwrap();
        assert!(riemann_discrepancy(&wrong_h, &config).is_err());
    }

    #[test]
    fn expected_heat_smoothed_small_case() {
        let v = expected_heat_smoothed(2, h(0.5), 0.5);
        let want = 0.5 * (INV_SQRT_TAU / 0.5f64.sqrt() + INV_SQRT_TAU / 1.0f64.sqrt());
        assert!((v - want).abs() < 1e-15);
    }
}
