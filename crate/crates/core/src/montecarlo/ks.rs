//! Kolmogorov–Smirnov distances and their asymptotic null distribution.

use crate::error::{FracregError, Result};

fn sorted(sample: &[f64]) -> Result<Vec<f64>> {
    if sample.is_empty() {
        return Err(FracregError::domain("KS distance needs nonempty samples"));
    }
    if sample.iter().any(|x| x.is_nan()) {
        return Err(FracregError::domain(
            "KS distance is undefined for NaN observations",
        ));
    }
    let mut v = sample.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// `sup_x |F_a(x) − F_b(x)|` for the empirical CDFs of `a` and `b`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    let a = sorted(a)?;
    let b = sorted(b)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        // step past every observation equal to x in both samples
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// `sup_x |F_n(x) − F(x)|` against a continuous reference CDF.
pub fn ks_one_sample(sample: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    let s = sorted(sample)?;
    let n = s.len() as f64;
    Ok(s.iter().enumerate().fold(0.0, |d: f64, (i, &x)| {
        let f = cdf(x);
        d.max(f - i as f64 / n).max((i + 1) as f64 / n - f)
    }))
}

/// Kolmogorov survival function `Q(λ) = 2 Σ_{k≥1} (−1)^{k−1} e^{−2k²λ²}`.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Asymptotic p-value of a KS distance with effective size `n_eff`
/// (`n` one-sample, `mn/(m+n)` two-sample), with Stephens' small-sample correction.
pub fn ks_p_value(distance: f64, n_eff: f64) -> f64 {
    let root = n_eff.sqrt();
    kolmogorov_survival((root + 0.12 + 0.11 / root) * distance)
}

/// Asymptotic two-sample critical value `c(α) √((m+n)/(mn))`,
/// `c(α) = √(−½ ln(α/2))`.
pub fn ks_critical_value(level: f64, m: usize, n: usize) -> f64 {
    let c = (-0.5 * (level / 2.0).ln()).sqrt();
    c * ((m + n) as f64 / (m as f64 * n as f64)).sqrt()
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::fill_standard_normal;
    use crate::seeding::{seeded_substream, StreamRole};
    use proptest::prelude::*;

    /// Direct evaluation of both ECDFs at every pooled observation.
    fn brute_force(a: &[f64], b: &[f64]) -> f64 {
        let ecdf =
            |s: &[f64], x: f64| s.iter().filter(|&&v| v <= x).count() as f64 / s.len() as f64;
        a.iter()
            .chain(b)
            .map(|&x| (ecdf(a, x) - ecdf(b, x)).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn trivial_cases() {
        assert_eq!(
            ks_two_sample(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(),
            0.0
        );
        assert_eq!(ks_two_sample(&[0.0], &[1.0]).unwrap(), 1.0);
        assert!(ks_two_sample(&[], &[1.0]).is_err());
        assert!(ks_two_sample(&[1.0], &[]).is_err());
        assert!(ks_two_sample(&[f64::NAN], &[1.0]).is_err());
    }

    #[test]
    fn one_sample_against_uniform() {
        let d = ks_one_sample(&[0.5], |x| x.clamp(0.0, 1.0)).unwrap();
        assert!((d - 0.5).abs() < 1e-15);
        let grid: Vec<f64> = (0..100).map(|i| (i as f64 + 0.5) / 100.0).collect();
        let d = ks_one_sample(&grid, |x| x).unwrap();
        assert!((d - 0.005).abs() < 1e-12);
    }

    #[test]
    fn survival_function_reference_values() {
        // Q(1.36) ≈ 0.05, Q(1.63) ≈ 0.01
        assert!((kolmogorov_survival(1.358) - 0.05).abs() < 1e-3);
        assert!((kolmogorov_survival(1.628) - 0.01).abs() < 1e-3);
        assert_eq!(kolmogorov_survival(0.0), 1.0);
        assert!((ks_critical_value(0.01, 2000, 2000) - 0.05147).abs() < 1e-4);
    }

    #[test]
    fn normal_cdf_values() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-16);
        assert!((normal_cdf(1.959_963_985) - 0.975).abs() < 1e-9);
    }

    #[test]
    fn same_law_samples_stay_below_critical_value() {
        const M: usize = 2000;
        let mut below_stated = 0;
        let mut above_critical = 0;
        let crit = ks_critical_value(0.01, M, M);
        for trial in 0..100u64 {
            let mut a = vec![0.0; M];
            let mut b = vec![0.0; M];
            fill_standard_normal(&mut seeded_substream(77, trial, StreamRole::Path1), &mut a);
            fill_standard_normal(&mut seeded_substream(77, trial, StreamRole::Path2), &mut b);
            let d = ks_two_sample(&a, &b).unwrap();
            if d < 0.0607 {
                below_stated += 1;
            }
            if d > crit {
                above_critical += 1;
            }
        }
        assert!(below_stated >= 99, "{below_stated}");
        assert!(above_critical <= 3, "{above_critical}");
    }

    proptest! {
        #[test]
        fn merge_scan_matches_brute_force(
            a in prop::collection::vec(-5i32..5, 1..40),
            b in prop::collection::vec(-5i32..5, 1..40),
        ) {
            let a: Vec<f64> = a.into_iter().map(f64::from).collect();
            let b: Vec<f64> = b.into_iter().map(f64::from).collect();
            let fast = ks_two_sample(&a, &b).unwrap();
            prop_assert!((fast - brute_force(&a, &b)).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&fast));
            prop_assert_eq!(fast, ks_two_sample(&b, &a).unwrap());
        }
    }
}
