//! Fractional Brownian motion: covariance formulas and path generators.
//!
//! Paths live on the unit-spaced integer grid `0..=n`. The unit-interval
//! grid `B_{i/n}` is recovered through self-similarity, `B_{i/n} = n^{-H} B_i`,
//! see [`FbmPath::rescaled`].
//!
//! Two exact samplers are provided. [`CholeskyGenerator`] factors the Toeplitz
//! covariance of the increments (fractional Gaussian noise) once and costs
//! O(n²) per path. [`CirculantGenerator`] embeds the same Toeplitz matrix in a
//! circulant of size 2n and samples in O(n log n).

use std::io::Write;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::RngCore;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{FracregError, Result};
use crate::gaussian::fill_standard_normal;
use crate::seeding::SeedProvenance;

/// Largest path length accepted by [`CholeskyGenerator`]; the dense factor
/// of an 8192-step path already takes 512 MiB.
pub const MAX_CHOLESKY_STEPS: usize = 1 << 13;

/// Eigenvalues of the circulant embedding in `[-tol, 0)` are treated as
/// roundoff and clamped to zero.
pub const EMBEDDING_NEGATIVE_TOLERANCE: f64 = 1e-10;

/// Hurst index, strictly inside (0, 1).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct HurstParam(f64);

impl HurstParam {
    pub fn new(value: f64) -> Result<Self> {
        if value > 0.0 && value < 1.0 {
            Ok(HurstParam(value))
        } else {
            Err(FracregError::domain(format!(
                "Hurst parameter must lie in (0, 1), got {value}"
            )))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    /// Brownian motion.
    pub fn brownian() -> Self {
        HurstParam(0.5)
    }
}

impl TryFrom<f64> for HurstParam {
    type Error = FracregError;

    fn try_from(value: f64) -> Result<Self> {
        HurstParam::new(value)
    }
}

impl From<HurstParam> for f64 {
    fn from(h: HurstParam) -> f64 {
        h.0
    }
}

impl std::fmt::Display for HurstParam {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

/// `R^H(t, s) = ½(t^{2H} + s^{2H} − |t − s|^{2H})`.
pub fn fbm_covariance(t: f64, s: f64, hurst: HurstParam) -> Result<f64> {
    if !(t >= 0.0 && s >= 0.0) {
        return Err(FracregError::domain(format!(
            "covariance needs nonnegative times, got t={t}, s={s}"
        )));
    }
    Ok(covariance_unchecked(t, s, hurst.value()))
}

#[inline]
pub(crate) fn covariance_unchecked(t: f64, s: f64, h: f64) -> f64 {
    let two_h = 2.0 * h;
    0.5 * (t.powf(two_h) + s.powf(two_h) - (t - s).abs().powf(two_h))
}

/// Autocovariance of unit-spaced fractional Gaussian noise at lag `k`.
#[inline]
pub fn fgn_autocovariance(lag: u64, hurst: HurstParam) -> f64 {
    if lag == 0 {
        return 1.0;
    }
    let two_h = 2.0 * hurst.value();
    let k = lag as f64;
    0.5 * ((k + 1.0).powf(two_h) + (k - 1.0).powf(two_h) - 2.0 * k.powf(two_h))
}

/// `f_H(i, j) = E[(B_{i+1} − B_i)(B_{j+1} − B_j)]`.
#[inline]
pub fn increment_covariance(i: u64, j: u64, hurst: HurstParam) -> f64 {
    fgn_autocovariance(i.abs_diff(j), hurst)
}

/// `f_H` for lags `0..len`.
pub fn fgn_autocovariances(len: usize, hurst: HurstParam) -> Vec<f64> {
    (0..len as u64)
        .map(|k| fgn_autocovariance(k, hurst))
        .collect()
}

/// Determinant of the covariance matrix of `(B_i, B_j)`:
/// `(ij)^{2H} − R^H(i, j)²`. Exactly zero on the diagonal.
pub fn gamma_determinant(i: u64, j: u64, hurst: HurstParam) -> f64 {
    if i == j {
        return 0.0;
    }
    let h = hurst.value();
    let (x, y) = (i as f64, j as f64);
    let root = (x * y).powf(h);
    let r = covariance_unchecked(x, y, h);
    (root - r) * (root + r)
}

/// A sampled trajectory `B_0, …, B_n` with `B_0 = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FbmPath {
    hurst: HurstParam,
    values: Vec<f64>,
    provenance: Option<SeedProvenance>,
}

impl FbmPath {
    pub fn new(hurst: HurstParam, values: Vec<f64>) -> Result<Self> {
        match values.first() {
            None => Err(FracregError::domain(
                "a path needs at least the origin and one step",
            )),
            Some(_) if values.len() < 2 => Err(FracregError::domain(
                "a path needs at least the origin and one step",
            )),
            Some(&v0) if v0 != 0.0 => Err(FracregError::domain(format!(
                "a path must start from zero, got B_0 = {v0}"
            ))),
            Some(_) => Ok(FbmPath {
                hurst,
                values,
                provenance: None,
            }),
        }
    }

    /// Cumulative sum of `increments`, prefixed by the origin.
    pub fn from_increments(hurst: HurstParam, increments: &[f64]) -> Result<Self> {
        let mut values = Vec::with_capacity(increments.len() + 1);
        values.push(0.0);
        let mut acc = 0.0;
        for dx in increments {
            acc += dx;
            values.push(acc);
        }
        FbmPath::new(hurst, values)
    }

    pub fn with_provenance(mut self, provenance: SeedProvenance) -> Self {
        self.provenance = Some(provenance);
        self
    }

    pub fn hurst(&self) -> HurstParam {
        self.hurst
    }

    /// Number of unit steps `n`.
    pub fn len(&self) -> usize {
        self.values.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn provenance(&self) -> Option<SeedProvenance> {
        self.provenance
    }

    pub fn increments(&self) -> Vec<f64> {
        self.values.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Values on the unit-interval grid, `B_{i/n} = n^{-H} B_i`.
    pub fn rescaled(&self) -> Vec<f64> {
        let scale = (self.len() as f64).powf(-self.hurst.value());
        self.values.iter().map(|v| v * scale).collect()
    }

    /// CSV with header `t,value` and 17 significant digits per value.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,value")?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(out, "{i},{v:.16e}")?;
        }
        Ok(())
    }
}

/// A sampler of fBm paths with fixed length and Hurst index.
pub trait PathGenerator: Send + Sync {
    fn steps(&self) -> usize;

    fn hurst(&self) -> HurstParam;

    /// Draw the increment vector (fractional Gaussian noise) into `out`,
    /// which must have length [`steps`](Self::steps).
    fn sample_increments(&self, rng: &mut dyn RngCore, out: &mut [f64]);

    fn sample(&self, rng: &mut dyn RngCore) -> FbmPath {
        let mut increments = vec![0.0; self.steps()];
        self.sample_increments(rng, &mut increments);
        FbmPath::from_increments(self.hurst(), &increments)
            .expect("generator produced a path of valid length")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    #[default]
    Circulant,
    Cholesky,
}

/// Exact sampler through the Cholesky factor of the increment covariance.
#[derive(Debug, Clone)]
pub struct CholeskyGenerator {
    hurst: HurstParam,
    lower: DMatrix<f64>,
}

impl CholeskyGenerator {
    pub fn new(n: usize, hurst: HurstParam) -> Result<Self> {
        if n == 0 {
            return Err(FracregError::domain("path length must be at least 1"));
        }
        if n > MAX_CHOLESKY_STEPS {
            return Err(FracregError::Resource(format!(
                "Cholesky sampler limited to {MAX_CHOLESKY_STEPS} steps, got {n}; use the circulant sampler"
            )));
        }
        let acov = fgn_autocovariances(n, hurst);
        let cov = DMatrix::from_fn(n, n, |r, c| acov[r.abs_diff(c)]);
        let chol = cov.cholesky().ok_or(FracregError::Factorization {
            hurst: hurst.value(),
            n,
        })?;
        Ok(CholeskyGenerator {
            hurst,
            lower: chol.l(),
        })
    }
}

impl PathGenerator for CholeskyGenerator {
    fn steps(&self) -> usize {
        self.lower.nrows()
    }

    fn hurst(&self) -> HurstParam {
        self.hurst
    }

    fn sample_increments(&self, rng: &mut dyn RngCore, out: &mut [f64]) {
        let n = self.steps();
        assert_eq!(out.len(), n, "increment buffer has wrong length");
        let mut z = vec![0.0; n];
        fill_standard_normal(rng, &mut z);
        let z = DVector::from_vec(z);
        for (row, slot) in out.iter_mut().enumerate() {
            // lower triangle only
            *slot = self
                .lower
                .row(row)
                .iter()
                .take(row + 1)
                .zip(z.iter())
                .map(|(l, x)| l * x)
                .sum();
        }
    }
}

/// Exact O(n log n) sampler by circulant embedding of the fGn covariance.
#[derive(Clone)]
pub struct CirculantGenerator {
    hurst: HurstParam,
    n: usize,
    /// `sqrt(λ_k / m)` for the `m = 2n` circulant eigenvalues.
    amplitudes: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for CirculantGenerator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CirculantGenerator")
            .field("hurst", &self.hurst)
            .field("n", &self.n)
            .finish_non_exhaustive()
    }
}

impl CirculantGenerator {
    pub fn new(n: usize, hurst: HurstParam) -> Result<Self> {
        if n == 0 {
            return Err(FracregError::domain("path length must be at least 1"));
        }
        let m = 2 * n;
        let acov = fgn_autocovariances(n + 1, hurst);
        // first row: γ_0 … γ_n, γ_{n-1} … γ_1
        let mut row: Vec<Complex<f64>> = Vec::with_capacity(m);
        row.extend(acov.iter().map(|&g| Complex::new(g, 0.0)));
        row.extend(acov[1..n].iter().rev().map(|&g| Complex::new(g, 0.0)));
        debug_assert_eq!(row.len(), m);

        let fft = FftPlanner::new().plan_fft_forward(m);
        fft.process(&mut row);

        let mut min_eigenvalue = f64::INFINITY;
        let amplitudes = row
            .iter()
            .map(|c| {
                min_eigenvalue = min_eigenvalue.min(c.re);
                (c.re.max(0.0) / m as f64).sqrt()
            })
            .collect();
        if min_eigenvalue < -EMBEDDING_NEGATIVE_TOLERANCE {
            return Err(FracregError::Embedding {
                min_eigenvalue,
                hurst: hurst.value(),
                n,
            });
        }
        Ok(CirculantGenerator {
            hurst,
            n,
            amplitudes,
            fft,
        })
    }
}

impl PathGenerator for CirculantGenerator {
    fn steps(&self) -> usize {
        self.n
    }

    fn hurst(&self) -> HurstParam {
        self.hurst
    }

    fn sample_increments(&self, rng: &mut dyn RngCore, out: &mut [f64]) {
        assert_eq!(out.len(), self.n, "increment buffer has wrong length");
        let m = self.amplitudes.len();
        let mut z = vec![0.0; 2 * m];
        fill_standard_normal(rng, &mut z);
        let mut buf: Vec<Complex<f64>> = self
            .amplitudes
            .iter()
            .zip(z.chunks_exact(2))
            .map(|(a, pair)| Complex::new(a * pair[0], a * pair[1]))
            .collect();
        self.fft.process(&mut buf);
        for (slot, c) in out.iter_mut().zip(&buf) {
            *slot = c.re;
        }
    }
}

/// A generator chosen at run time.
pub fn build_generator(
    kind: GeneratorKind,
    n: usize,
    hurst: HurstParam,
) -> Result<Box<dyn PathGenerator>> {
    Ok(match kind {
        GeneratorKind::Circulant => Box::new(CirculantGenerator::new(n, hurst)?),
        GeneratorKind::Cholesky => Box::new(CholeskyGenerator::new(n, hurst)?),
    })
}

/// One exact path via the Cholesky sampler. Rebuilds the factor on every
/// call; hold a [`CholeskyGenerator`] to draw many paths.
pub fn generate_cholesky<R: RngCore>(n: usize, hurst: HurstParam, rng: &mut R) -> Result<FbmPath> {
    Ok(CholeskyGenerator::new(n, hurst)?.sample(rng))
}

/// One exact path via circulant embedding.
pub fn generate_circulant<R: RngCore>(n: usize, hurst: HurstParam, rng: &mut R) -> Result<FbmPath> {
    Ok(CirculantGenerator::new(n, hurst)?.sample(rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding::{seeded_substream, StreamRole};

    fn rel_close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
    }

    fn h(v: f64) -> HurstParam {
        HurstParam::new(v).unwrap()
    }

    #[test]
    fn hurst_bounds() {
        assert!(HurstParam::new(0.0).is_err());
        assert!(HurstParam::new(1.0).is_err());
        assert!(HurstParam::new(f64::NAN).is_err());
        assert!(HurstParam::new(0.999).is_ok());
        let parsed: std::result::Result<HurstParam, _> = serde_json::from_str("1.5");
        assert!(parsed.is_err());
    }

    #[test]
    fn covariance_examples() {
        let r = fbm_covariance(2.0, 2.0, h(0.3)).unwrap();
        assert!(rel_close(r, 2f64.powf(0.6), 1e-14));
        assert!(rel_close(r, 1.515717, 1e-6));
        assert_eq!(fbm_covariance(1.0, 2.0, h(0.5)).unwrap(), 1.0);
        assert_eq!(fbm_covariance(0.0, 5.0, h(0.7)).unwrap(), 0.0);
        assert!(fbm_covariance(-1.0, 1.0, h(0.5)).is_err());
        assert!(fbm_covariance(1.0, f64::NAN, h(0.5)).is_err());
    }

    #[test]
    fn increment_covariance_examples() {
        assert_eq!(increment_covariance(7, 7, h(0.8)), 1.0);
        assert_eq!(increment_covariance(0, 5, h(0.5)), 0.0);
        let expected = 0.5 * (3f64.powf(1.5) + 1.0 - 2.0 * 2f64.powf(1.5));
        let got = increment_covariance(0, 2, h(0.75));
        assert!(rel_close(got, expected, 1e-14));
        assert!((got - 0.269_649_087).abs() < 1e-9);
    }

    #[test]
    fn determinant_examples() {
        assert_eq!(gamma_determinant(3, 3, h(0.6)), 0.0);
        assert!(rel_close(gamma_determinant(1, 2, h(0.5)), 1.0, 1e-14));
        assert!(gamma_determinant(2, 5, h(0.7)) > 0.0);
    }

    #[test]
    fn determinant_positive_on_grid() {
        for k in 1..=9 {
            let hp = h(k as f64 / 10.0);
            for i in 2..=100u64 {
                for j in 1..i {
                    let d = gamma_determinant(i, j, hp);
                    assert!(d > 0.0, "|Γ|({i},{j},{hp}) = {d}");
                }
            }
        }
    }

    #[test]
    fn path_invariants() {
        assert!(FbmPath::new(h(0.5), vec![0.0]).is_err());
        assert!(FbmPath::new(h(0.5), vec![1.0, 2.0]).is_err());
        let p = FbmPath::from_increments(h(0.5), &[1.0, -2.0, 0.5]).unwrap();
        assert_eq!(p.values(), &[0.0, 1.0, -1.0, -0.5]);
        assert_eq!(p.len(), 3);
        assert_eq!(p.increments(), vec![1.0, -2.0, 0.5]);
    }

    #[test]
    fn rescaling_is_self_similarity() {
        let p = FbmPath::from_increments(h(0.25), &[1.0; 16]).unwrap();
        let r = p.rescaled();
        assert!(rel_close(r[16], 16.0 * 16f64.powf(-0.25), 1e-15));
        assert_eq!(r[0], 0.0);
    }

    #[test]
    fn csv_layout() {
        let p = FbmPath::from_increments(h(0.5), &[0.1, 0.2]).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,value");
        assert_eq!(lines[1], "0,0.0000000000000000e0");
        let parsed: f64 = lines[2].split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(parsed, 0.1);
        let last: f64 = lines[3].split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(last, 0.1 + 0.2);
    }

    #[test]
    fn single_step_paths_are_unit_normal() {
        for kind in [GeneratorKind::Circulant, GeneratorKind::Cholesky] {
            let gen = build_generator(kind, 1, h(0.3)).unwrap();
            let reps = 20_000;
            let mut sum_sq = 0.0;
            for r in 0..reps {
                let mut rng = seeded_substream(5, r, StreamRole::Path1);
                let p = gen.sample(&mut rng);
                assert_eq!(p.values()[0], 0.0);
                assert_eq!(p.len(), 1);
                sum_sq += p.values()[1].powi(2);
            }
            let var = sum_sq / reps as f64;
            assert!(
                (var - 1.0).abs() < 5.0 * (2.0 / reps as f64).sqrt(),
                "{kind:?}: {var}"
            );
        }
    }

    #[test]
    fn generators_are_deterministic() {
        for kind in [GeneratorKind::Circulant, GeneratorKind::Cholesky] {
            let gen = build_generator(kind, 64, h(0.7)).unwrap();
            let a = gen.sample(&mut seeded_substream(1, 3, StreamRole::Path1));
            let b = gen.sample(&mut seeded_substream(1, 3, StreamRole::Path1));
            assert_eq!(a, b);
            let c = gen.sample(&mut seeded_substream(1, 4, StreamRole::Path1));
            assert_ne!(a, c);
        }
    }

    #[test]
    fn cholesky_factor_reproduces_toeplitz() {
        let n = 12;
        let gen = CholeskyGenerator::new(n, h(0.8)).unwrap();
        let prod = &gen.lower * gen.lower.transpose();
        for r in 0..n {
            for c in 0..n {
                let want = increment_covariance(r as u64, c as u64, h(0.8));
                assert!((prod[(r, c)] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cholesky_size_limit() {
        assert!(matches!(
            CholeskyGenerator::new(MAX_CHOLESKY_STEPS + 1, h(0.5)),
            Err(FracregError::Resource(_))
        ));
        assert!(CholeskyGenerator::new(0, h(0.5)).is_err());
        assert!(CirculantGenerator::new(0, h(0.5)).is_err());
    }

    #[test]
    fn circulant_embedding_is_nonnegative_across_hurst() {
        for k in 1..20 {
            for n in [1, 2, 3, 17, 256, 4096] {
                CirculantGenerator::new(n, h(k as f64 / 20.0)).unwrap();
            }
        }
    }

    /// Exact second moments of the circulant sampler: the real part of
    /// `FFT(a ⊙ (Z₁ + iZ₂))` has covariance `Σ_k a_k² cos(2πk(j−l)/m)`.
    #[test]
    fn circulant_spectrum_reproduces_autocovariance() {
        let n = 32;
        for hv in [0.2, 0.5, 0.9] {
            let gen = CirculantGenerator::new(n, h(hv)).unwrap();
            let m = gen.amplitudes.len();
            for lag in 0..n {
                let cov: f64 = gen
                    .amplitudes
                    .iter()
                    .enumerate()
                    .map(|(k, a)| {
                        a * a * (std::f64::consts::TAU * (k * lag) as f64 / m as f64).cos()
                    })
                    .sum();
                let want = fgn_autocovariance(lag as u64, h(hv));
                assert!(
                    (cov - want).abs() < 1e-12,
                    "H={hv}, lag={lag}: {cov} vs {want}"
                );
            }
        }
    }
}
