//! The kernel-weighted statistic, its bracket and conditional variance, and
//! exact closed forms for its second moment.
//!
//! With regressor path `B¹` (Hurst `h1`) and independent error path `B²`
//! (Hurst `h2`), bandwidth `n^{-α}`:
//!
//! ```text
//! S_n   = Σ_{i<n} K(n^α(B¹_i − x)) (B²_{i+1} − B²_i)
//! ⟨S⟩_n = Σ_{i<n} K²(n^α(B¹_i − x))
//! a_n   = Σ_{i,j<n} K(n^α(B¹_i − x)) K(n^α(B¹_j − x)) f_{h2}(i, j)
//! ```
//!
//! Given `B¹`, `S_n` is exactly `N(0, a_n)`. The statistic is normalized by
//! `n^{(α+h1−1)/2}` and the bracket by `n^{α+h1−1}`.

use std::f64::consts::{PI, TAU};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{FracregError, Result};
use crate::fbm::{fgn_autocovariances, FbmPath, HurstParam};
use crate::kernels::gaussian_kernel;

/// Largest `n` for which [`exact_offdiagonal`] runs its O(n²) double sum.
pub const MAX_EXACT_OFFDIAGONAL_N: usize = 1 << 14;

/// Model parameters: the two Hurst indices, bandwidth exponent and sample size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub h1: HurstParam,
    pub h2: HurstParam,
    /// Bandwidth exponent, `h_n = n^{-alpha}`.
    pub alpha: f64,
    pub n: usize,
    /// Evaluation point of the kernel.
    #[serde(default)]
    pub x0: f64,
}

impl ModelConfig {
    pub fn new(h1: f64, h2: f64, alpha: f64, n: usize) -> Result<Self> {
        let config = ModelConfig {
            h1: HurstParam::new(h1)?,
            h2: HurstParam::new(h2)?,
            alpha,
            n,
            x0: 0.0,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn with_n(mut self, n: usize) -> Self {
        self.n = n;
        self
    }

    pub fn with_x0(mut self, x0: f64) -> Self {
        self.x0 = x0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(FracregError::config(format!(
                "bandwidth exponent alpha must be positive, got {}",
                self.alpha
            )));
        }
        if self.n == 0 {
            return Err(FracregError::config("sample size n must be at least 1"));
        }
        if !self.x0.is_finite() {
            return Err(FracregError::config("evaluation point x0 must be finite"));
        }
        Ok(())
    }

    pub fn region(&self) -> AdmissibleRegion {
        admissible_region(self.h1, self.h2)
    }

    pub fn region_ok(&self) -> bool {
        self.region().contains(self.alpha)
    }

    /// Errors with the violated bound when alpha is outside the admissible region.
    pub fn check_region(&self) -> Result<()> {
        let region = self.region();
        let alpha = self.alpha;
        if alpha >= region.upper {
            return Err(FracregError::Region(format!(
                "alpha = {alpha} violates the upper bound alpha < 1 - h1 = {}",
                tidy(region.upper)
            )));
        }
        if alpha <= region.lower {
            let raw = 4.0 * self.h2.value() - self.h1.value() - 2.0;
            let bound = if raw > 0.0 {
                format!("alpha > 4*h2 - h1 - 2 = {}", tidy(raw))
            } else {
                "alpha > 0".to_owned()
            };
            return Err(FracregError::Region(format!(
                "alpha = {alpha} violates the lower bound {bound}"
            )));
        }
        Ok(())
    }

    /// `n^α`, the kernel argument scale.
    pub fn kernel_scale(&self) -> f64 {
        (self.n as f64).powf(self.alpha)
    }

    /// `n^{α+h1−1}`, the normalization of `S_n²` and `⟨S⟩_n`.
    pub fn variance_scale(&self) -> f64 {
        (self.n as f64).powf(self.alpha + self.h1.value() - 1.0)
    }

    /// `n^{(α+h1−1)/2}`, the normalization of `S_n`.
    pub fn statistic_scale(&self) -> f64 {
        self.variance_scale().sqrt()
    }
}

/// Rounds away binary noise such as `0.09999999999999998` for messages.
fn tidy(x: f64) -> f64 {
    (x * 1e12).round() / 1e12
}

/// Open interval of admissible bandwidth exponents,
/// `max(0, 4 h2 − h1 − 2) < α < 1 − h1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmissibleRegion {
    pub lower: f64,
    pub upper: f64,
}

impl AdmissibleRegion {
    pub fn is_empty(&self) -> bool {
        self.lower >= self.upper
    }

    pub fn contains(&self, alpha: f64) -> bool {
        alpha > self.lower && alpha < self.upper
    }

    /// `{"lower":…,"upper":…,"nonempty":…}`
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Printed {
            lower: f64,
            upper: f64,
            nonempty: bool,
        }
        serde_json::to_string(&Printed {
            lower: self.lower,
            upper: self.upper,
            nonempty: !self.is_empty(),
        })
        .expect("plain struct serializes")
    }
}

pub fn admissible_region(h1: HurstParam, h2: HurstParam) -> AdmissibleRegion {
    let (h1, h2) = (h1.value(), h2.value());
    AdmissibleRegion {
        lower: (4.0 * h2 - h1 - 2.0).max(0.0),
        upper: 1.0 - h1,
    }
}

/// One realization of the statistic and its companions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatisticSample {
    pub s_n: f64,
    pub bracket: f64,
    pub a_n: f64,
    pub s_n_normalized: f64,
    pub bracket_normalized: f64,
}

fn check_path(path: &FbmPath, hurst: HurstParam, n: usize, which: &str) -> Result<()> {
    if path.len() < n {
        return Err(FracregError::Dimension {
            required: n,
            actual: path.len(),
        });
    }
    if path.hurst() != hurst {
        return Err(FracregError::config(format!(
            "{which} has Hurst index {}, config expects {hurst}",
            path.hurst()
        )));
    }
    Ok(())
}

/// `K(n^α(B¹_i − x0))` for `i = 0..n`.
pub fn kernel_weights(path1: &FbmPath, config: &ModelConfig) -> Result<Vec<f64>> {
    check_path(path1, config.h1, config.n, "regressor path")?;
    let scale = config.kernel_scale();
    Ok(path1.values()[..config.n]
        .iter()
        .map(|b| gaussian_kernel(scale * (b - config.x0)))
        .collect())
}

fn sum_of_squares(weights: &[f64]) -> f64 {
    weights.iter().map(|k| k * k).sum()
}

/// `Σ_{i,j} w_i w_j f(|i−j|)` with `fgn[k] = f(k)`.
fn toeplitz_quadratic_form(weights: &[f64], fgn: &[f64]) -> f64 {
    let mut total = sum_of_squares(weights);
    for (lag, &f) in fgn.iter().enumerate().skip(1) {
        if f == 0.0 {
            continue;
        }
        let cross: f64 = weights
            .iter()
            .zip(&weights[lag..])
            .map(|(a, b)| a * b)
            .sum();
        total += 2.0 * f * cross;
    }
    total
}

/// `⟨S⟩_n = Σ_{i<n} K²(n^α(B¹_i − x0))`.
pub fn compute_bracket(path1: &FbmPath, config: &ModelConfig) -> Result<f64> {
    Ok(sum_of_squares(&kernel_weights(path1, config)?))
}

/// `a_n = Var(S_n | B¹)`. O(n²).
pub fn conditional_variance(path1: &FbmPath, config: &ModelConfig) -> Result<f64> {
    let weights = kernel_weights(path1, config)?;
    let fgn = fgn_autocovariances(config.n, config.h2);
    Ok(toeplitz_quadratic_form(&weights, &fgn))
}

/// `E[e^{iλ_n S_n} | B¹] = exp(−½ λ_n² a_n)` with `λ_n = λ n^{(α+h1−1)/2}`.
pub fn conditional_char(lambda: f64, path1: &FbmPath, config: &ModelConfig) -> Result<f64> {
    let a_n = conditional_variance(path1, config)?;
    Ok(char_from_variance(lambda, a_n, config))
}

pub(crate) fn char_from_variance(lambda: f64, a_n: f64, config: &ModelConfig) -> f64 {
    let lambda_n = lambda * config.statistic_scale();
    (-0.5 * lambda_n * lambda_n * a_n.max(0.0)).exp()
}

/// `S_n` only, from precomputed kernel weights.
pub(crate) fn statistic_from_weights(weights: &[f64], path2: &FbmPath) -> f64 {
    let v = path2.values();
    weights
        .iter()
        .zip(v.windows(2))
        .map(|(k, w)| k * (w[1] - w[0]))
        .sum()
}

pub fn compute_statistic(
    path1: &FbmPath,
    path2: &FbmPath,
    config: &ModelConfig,
) -> Result<StatisticSample> {
    config.validate()?;
    check_path(path2, config.h2, config.n, "error path")?;
    let weights = kernel_weights(path1, config)?;
    let fgn = fgn_autocovariances(config.n, config.h2);
    let s_n = statistic_from_weights(&weights, path2);
    let bracket = sum_of_squares(&weights);
    let a_n = toeplitz_quadratic_form(&weights, &fgn);
    Ok(StatisticSample {
        s_n,
        bracket,
        a_n,
        s_n_normalized: config.statistic_scale() * s_n,
        bracket_normalized: config.variance_scale() * bracket,
    })
}

fn require_origin(config: &ModelConfig) -> Result<()> {
    config.validate()?;
    if config.x0 != 0.0 {
        return Err(FracregError::config(
            "exact moment formulas are available only at x0 = 0",
        ));
    }
    Ok(())
}

/// `T′ = E⟨S⟩_n = Σ_{i<n} 1 / (2π √(1 + 2 n^{2α} i^{2h1}))`.
pub fn exact_diagonal(config: &ModelConfig) -> Result<f64> {
    require_origin(config)?;
    let a2 = (config.n as f64).powf(2.0 * config.alpha);
    let two_h = 2.0 * config.h1.value();
    Ok((0..config.n)
        .map(|i| 1.0 / (TAU * (1.0 + 2.0 * a2 * (i as f64).powf(two_h)).sqrt()))
        .sum())
}

/// `E[K(n^α B¹_i) K(n^α B¹_j)] = 1 / (2π √(n^{4α}|Γ| + n^{2α}(i^{2h1} + j^{2h1}) + 1))`,
/// `|Γ| = (ij)^{2h1} − R(i,j)²`. Index 0 reduces to `K(0) E K(n^α B¹_j)`.
pub fn pair_kernel_expectation(i: u64, j: u64, config: &ModelConfig) -> f64 {
    let a2 = (config.n as f64).powf(2.0 * config.alpha);
    let two_h = 2.0 * config.h1.value();
    let vi = (i as f64).powf(two_h);
    let vj = (j as f64).powf(two_h);
    pair_expectation_from_moments(a2, vi, vj, (i.abs_diff(j) as f64).powf(two_h))
}

#[inline]
fn pair_expectation_from_moments(a2: f64, vi: f64, vj: f64, lag_var: f64) -> f64 {
    if vi == 0.0 || vj == 0.0 {
        return 1.0 / (TAU * (1.0 + a2 * (vi + vj)).sqrt());
    }
    let cov = 0.5 * (vi + vj - lag_var);
    let det = (vi * vj - cov * cov).max(0.0);
    1.0 / (TAU * (a2 * a2 * det + a2 * (vi + vj) + 1.0).sqrt())
}

/// `T″ = Σ_{i≠j} E[K(n^α B¹_i) K(n^α B¹_j)] f_{h2}(i, j)`, so that
/// `E S_n² = T′ + T″`.
///
/// Rows are summed in parallel and reduced in index order, so the result does
/// not depend on the thread count.
pub fn exact_offdiagonal(config: &ModelConfig) -> Result<f64> {
    require_origin(config)?;
    let n = config.n;
    if n > MAX_EXACT_OFFDIAGONAL_N {
        return Err(FracregError::Resource(format!(
            "exact off-diagonal sum is O(n^2) and limited to n <= {MAX_EXACT_OFFDIAGONAL_N}, got {n}; \
             estimate E S_n^2 by Monte Carlo instead"
        )));
    }
    let fgn = fgn_autocovariances(n, config.h2);
    if fgn[1..].iter().all(|&f| f == 0.0) {
        return Ok(0.0);
    }
    let a2 = (n as f64).powf(2.0 * config.alpha);
    let two_h = 2.0 * config.h1.value();
    let var: Vec<f64> = (0..n).map(|i| (i as f64).powf(two_h)).collect();

    let rows: Vec<f64> = (1..n)
        .into_par_iter()
        .map(|i| {
            (0..i)
                .map(|j| {
                    let lag = i - j;
                    fgn[lag] * pair_expectation_from_moments(a2, var[i], var[j], var[lag])
                })
                .sum::<f64>()
        })
        .collect();
    Ok(2.0 * rows.iter().sum::<f64>())
}

/// `C₁ = 1 / (2π √2 (1 − h1))`, the limit of `n^{α+h1−1} E S_n²`.
pub fn c1_constant(h1: HurstParam) -> f64 {
    1.0 / (2.0 * PI * 2f64.sqrt() * (1.0 - h1.value()))
}
