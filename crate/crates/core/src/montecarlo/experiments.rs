use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{mean_and_se, median, run_replicates, tolerance, ExperimentPlan, McReport, McRow};
use crate::error::Result;
use crate::fbm::{build_generator, fgn_autocovariance, PathGenerator};
use crate::gaussian::standard_normal;
use crate::kernels::kernel_l2_norm;
use crate::localtime::{
    bracket_implied_estimate, expected_local_time, heat_smoothed_estimate,
    occupation_band_estimate, riemann_discrepancy,
};
use crate::montecarlo::ks::{ks_one_sample, ks_two_sample, normal_cdf};
use crate::seeding::{derive_seed, seeded_substream, StreamRole};
use crate::statistics::{
    c1_constant, char_from_variance, conditional_variance, exact_diagonal, exact_offdiagonal,
    kernel_weights, statistic_from_weights, ModelConfig, MAX_EXACT_OFFDIAGONAL_N,
};

/// Standard deviation of the Kolmogorov distribution; scales the null
/// sampling error of a KS distance.
const KOLMOGOROV_SD: f64 = 0.2603;

fn seed_for(plan: &ExperimentPlan, n: usize) -> u64 {
    derive_seed(plan.master_seed, n as u64)
}

fn path_generators(
    plan: &ExperimentPlan,
    config: &ModelConfig,
) -> Result<(Box<dyn PathGenerator>, Box<dyn PathGenerator>)> {
    Ok((
        build_generator(plan.generator, config.n, config.h1)?,
        build_generator(plan.generator, config.n, config.h2)?,
    ))
}

/// One replicate's `(path1, path2)` statistic, normalized.
fn normalized_statistic(
    seed: u64,
    replicate: u64,
    config: &ModelConfig,
    gen1: &dyn PathGenerator,
    gen2: &dyn PathGenerator,
) -> Result<f64> {
    let p1 = gen1.sample(&mut seeded_substream(seed, replicate, StreamRole::Path1));
    let p2 = gen2.sample(&mut seeded_substream(seed, replicate, StreamRole::Path2));
    let weights = kernel_weights(&p1, config)?;
    Ok(config.statistic_scale() * statistic_from_weights(&weights, &p2))
}

fn nonincreasing(prev: Option<f64>, current: f64) -> bool {
    prev.is_none_or(|p| current <= p)
}

/// Scaled second moment `n^{α+h1−1} S_n²` against `C₁`, per sample size.
pub fn run_variance_experiment(plan: &ExperimentPlan) -> Result<McReport> {
    plan.validate()?;
    let started = Instant::now();
    let tol = plan.tolerance(tolerance::VARIANCE_REL);
    let c1 = c1_constant(plan.config.h1);
    let mut rows = Vec::new();
    let mut prev_err = None;

    for n in plan.sizes() {
        let config = plan.config_for(n);
        let (gen1, gen2) = path_generators(plan, &config)?;
        let seed = seed_for(plan, n);
        let values = run_replicates(plan.replicates, |r| {
            let s = normalized_statistic(seed, r, &config, gen1.as_ref(), gen2.as_ref())?;
            Ok(s * s)
        })?;
        let (mean, se) = mean_and_se(&values);
        let mut row = McRow::new(n, mean, se, c1);

        let scale = config.variance_scale();
        if config.x0 == 0.0 {
            row.extra
                .insert("exact_diag_scaled".into(), scale * exact_diagonal(&config)?);
            if n <= MAX_EXACT_OFFDIAGONAL_N {
                row.extra.insert(
                    "exact_offdiag_scaled".into(),
                    scale * exact_offdiagonal(&config)?,
                );
            }
        }

        let err = row.rel_error.map_or(f64::INFINITY, f64::abs);
        row.pass = se.is_some() && err <= tol && nonincreasing(prev_err, err);
        prev_err = Some(err);
        rows.push(row);
    }
    Ok(McReport::finish(
        "variance",
        plan,
        rows,
        Vec::new(),
        started,
    ))
}

/// Per-replicate local-time estimates on one shared regressor path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BracketReplicate {
    pub replicate: u64,
    pub bracket_implied: f64,
    pub occupation_band: f64,
    pub heat_smoothed: f64,
    pub ratio: f64,
    pub bracket_normalized: f64,
}

pub fn bracket_replicates(plan: &ExperimentPlan, n: usize) -> Result<Vec<BracketReplicate>> {
    let config = plan.config_for(n);
    let gen = build_generator(plan.generator, n, config.h1)?;
    let seed = seed_for(plan, n);
    // the origin is always inside the band, so the estimate never drops below this
    let floor = 1.0 / (2.0 * plan.bandwidth * n as f64);
    run_replicates(plan.replicates, |r| {
        let path = gen.sample(&mut seeded_substream(seed, r, StreamRole::Path1));
        let implied = bracket_implied_estimate(&path, &config)?.value;
        let band = occupation_band_estimate(&path, plan.bandwidth)?
            .value
            .max(floor);
        let heat = heat_smoothed_estimate(&path, plan.eps)?.value;
        Ok(BracketReplicate {
            replicate: r,
            bracket_implied: implied,
            occupation_band: band,
            heat_smoothed: heat,
            ratio: implied / band,
            bracket_normalized: implied * kernel_l2_norm(),
        })
    })
}

/// Bracket-implied local time against the occupation-band estimate on the
/// same paths.
pub fn run_bracket_experiment(plan: &ExperimentPlan) -> Result<McReport> {
    Ok(run_bracket_experiment_detailed(plan)?.0)
}

/// Per-replicate rows for each `n`.
pub(crate) type BracketDetails = Vec<(usize, Vec<BracketReplicate>)>;

pub(crate) fn run_bracket_experiment_detailed(
    plan: &ExperimentPlan,
) -> Result<(McReport, BracketDetails)> {
    plan.validate()?;
    let started = Instant::now();
    let tol = plan.tolerance(tolerance::BRACKET_RATIO);
    let c1 = c1_constant(plan.config.h1);
    let mut rows = Vec::new();
    let mut notes = Vec::new();
    let mut details = Vec::new();

    for n in plan.sizes() {
        let reps = bracket_replicates(plan, n)?;
        let ratios: Vec<f64> = reps.iter().map(|r| r.ratio).collect();
        let (mean, se) = mean_and_se(&ratios);
        let mut row = McRow::new(n, mean, se, 1.0);

        let column =
            |f: fn(&BracketReplicate) -> f64| reps.iter().map(f).sum::<f64>() / reps.len() as f64;
        let mean_bracket = column(|r| r.bracket_normalized);
        row.extra
            .insert("mean_bracket_normalized".into(), mean_bracket);
        row.extra.insert("c1".into(), c1);
        row.extra
            .insert("bracket_mean_rel_error".into(), (mean_bracket - c1) / c1);
        row.extra
            .insert("mean_occupation_band".into(), column(|r| r.occupation_band));
        row.extra
            .insert("mean_heat_smoothed".into(), column(|r| r.heat_smoothed));
        row.extra
            .insert("mean_bracket_implied".into(), column(|r| r.bracket_implied));
        row.extra.insert(
            "expected_local_time".into(),
            expected_local_time(plan.config.h1),
        );
        row.extra.insert(
            "ratio_of_means".into(),
            column(|r| r.bracket_implied) / column(|r| r.occupation_band),
        );
        row.extra.insert("median_ratio".into(), median(&ratios));

        let floor = 1.0 / (2.0 * plan.bandwidth * n as f64);
        let degenerate = reps.iter().all(|r| r.occupation_band <= floor);
        if degenerate {
            row.note = Some("occupation band never left the origin; ratio uses the floor".into());
            notes.push(format!("n = {n}: degenerate occupation estimate"));
        }
        row.pass = !degenerate && se.is_some() && (mean - 1.0).abs() <= tol;
        rows.push(row);
        details.push((n, reps));
    }
    Ok((
        McReport::finish("bracket", plan, rows, notes, started),
        details,
    ))
}

/// Normalized statistics against the mixed-normal reference `√(d₁ L̂) Z`,
/// with `L̂` from independent paths.
pub fn run_limit_experiment(plan: &ExperimentPlan) -> Result<McReport> {
    plan.validate()?;
    let started = Instant::now();
    let ks_tol = plan.tolerance(tolerance::KS);
    let char_tol = plan.tolerance(tolerance::LIMIT_CHAR);
    let d1 = kernel_l2_norm();
    let sizes = plan.sizes();
    let largest = *sizes.last().expect("validated nonempty");
    let mut rows = Vec::new();
    let mut prev_ks = None;

    for n in sizes {
        let config = plan.config_for(n);
        let (gen1, gen2) = path_generators(plan, &config)?;
        let seed = seed_for(plan, n);
        let sample_a = run_replicates(plan.replicates, |r| {
            normalized_statistic(seed, r, &config, gen1.as_ref(), gen2.as_ref())
        })?;
        let reference = run_replicates(plan.replicates, |r| {
            let mut rng = seeded_substream(seed, r, StreamRole::Latent);
            let path = gen1.sample(&mut rng);
            let local_time = occupation_band_estimate(&path, plan.bandwidth)?.value;
            let z = standard_normal(&mut rng);
            Ok((local_time, (d1 * local_time).sqrt() * z))
        })?;
        let sample_b: Vec<f64> = reference.iter().map(|(_, b)| *b).collect();

        let ks = ks_two_sample(&sample_a, &sample_b)?;
        let (mean_a, se_a) = mean_and_se(&sample_a);
        let var = |s: &[f64]| s.iter().map(|v| v * v).sum::<f64>() / s.len() as f64;
        let m = plan.replicates as f64;
        let mut row = McRow::new(n, ks, Some(KOLMOGOROV_SD * (2.0 / m).sqrt()), 0.0);
        row.ks_distance = Some(ks);
        row.extra.insert("mean_a".into(), mean_a);
        if let Some(se) = se_a {
            row.extra.insert("se_a".into(), se);
        }
        row.extra.insert("second_moment_a".into(), var(&sample_a));
        row.extra.insert("second_moment_b".into(), var(&sample_b));
        let trend = nonincreasing(prev_ks, ks);
        row.pass = trend && (n != largest || ks <= ks_tol);
        prev_ks = Some(ks);
        rows.push(row);

        for &lambda in &plan.lambda_grid {
            let cosines: Vec<f64> = sample_a.iter().map(|s| (lambda * s).cos()).collect();
            let (mean_cos, se_cos) = mean_and_se(&cosines);
            let target = reference
                .iter()
                .map(|(l, _)| (-0.5 * lambda * lambda * d1 * l).exp())
                .sum::<f64>()
                / reference.len() as f64;
            let mut row = McRow::new(n, mean_cos, se_cos, target);
            row.lambda = Some(lambda);
            row.pass = (mean_cos - target).abs() <= char_tol;
            rows.push(row);
        }
    }
    Ok(McReport::finish("limit", plan, rows, Vec::new(), started))
}

/// Conditional characteristic function with the regressor path frozen.
/// Holds exactly at every `n`.
pub fn run_conditional_experiment(plan: &ExperimentPlan) -> Result<McReport> {
    plan.validate()?;
    let started = Instant::now();
    let slack = plan.tolerance(tolerance::CONDITIONAL);
    let band = 3.0 / (plan.replicates as f64).sqrt();
    let mut rows = Vec::new();

    for n in plan.sizes() {
        let config = plan.config_for(n);
        let (gen1, gen2) = path_generators(plan, &config)?;
        let seed = seed_for(plan, n);
        let frozen = gen1.sample(&mut seeded_substream(seed, 0, StreamRole::Path1));
        let weights = kernel_weights(&frozen, &config)?;
        let a_n = conditional_variance(&frozen, &config)?;
        let stats = run_replicates(plan.replicates, |r| {
            let p2 = gen2.sample(&mut seeded_substream(seed, r, StreamRole::Path2));
            Ok(statistic_from_weights(&weights, &p2))
        })?;
        let standardized: Vec<f64> = stats.iter().map(|s| s / a_n.sqrt()).collect();
        let ks = ks_one_sample(&standardized, normal_cdf)?;

        for &lambda in &plan.lambda_grid {
            let lambda_n = lambda * config.statistic_scale();
            let cosines: Vec<f64> = stats.iter().map(|s| (lambda_n * s).cos()).collect();
            let mean_sin =
                stats.iter().map(|s| (lambda_n * s).sin()).sum::<f64>() / stats.len() as f64;
            let (mean_cos, se_cos) = mean_and_se(&cosines);
            let target = char_from_variance(lambda, a_n, &config);
            let mut row = McRow::new(n, mean_cos, se_cos, target);
            row.lambda = Some(lambda);
            row.ks_distance = Some(ks);
            row.extra.insert("mean_sin".into(), mean_sin);
            row.extra.insert("a_n".into(), a_n);
            row.extra.insert("bound".into(), band + slack);
            row.pass = (mean_cos - target).abs() <= band + slack && mean_sin.abs() <= band;
            rows.push(row);
        }
    }
    Ok(McReport::finish(
        "conditional",
        plan,
        rows,
        Vec::new(),
        started,
    ))
}

/// Median of the scaled Riemann-sum discrepancy per `n`; passes when the
/// medians do not increase.
pub fn run_riemann_experiment(plan: &ExperimentPlan) -> Result<McReport> {
    plan.validate()?;
    let started = Instant::now();
    let mut rows = Vec::new();
    let mut prev = None;

    for n in plan.sizes() {
        let config = plan.config_for(n);
        let fine = n * plan.refinement;
        let gen = build_generator(plan.generator, fine, config.h1)?;
        let seed = seed_for(plan, n);
        let values = run_replicates(plan.replicates, |r| {
            let path = gen.sample(&mut seeded_substream(seed, r, StreamRole::Path1));
            riemann_discrepancy(&path, &config)
        })?;
        let med = median(&values);
        // normal-theory error of a median from the interquartile range
        let se = (values.len() > 1).then(|| {
            let mut sorted = values.clone();
            sorted.sort_by(f64::total_cmp);
            let q = |p: f64| sorted[((sorted.len() - 1) as f64 * p).round() as usize];
            1.2533 * (q(0.75) - q(0.25)) / 1.349 / (values.len() as f64).sqrt()
        });
        let mut row = McRow::new(n, med, se, 0.0);
        row.extra.insert(
            "mean".into(),
            values.iter().sum::<f64>() / values.len() as f64,
        );
        row.pass = nonincreasing(prev, med);
        prev = Some(med);
        rows.push(row);
    }
    Ok(McReport::finish("riemann", plan, rows, Vec::new(), started))
}

/// Empirical increment autocovariance of the configured generator at lags
/// `0..=max_lag`, for a path of `config.n` steps with Hurst index `config.h1`.
pub fn run_generator_experiment(plan: &ExperimentPlan, max_lag: usize) -> Result<McReport> {
    let mut structural = plan.clone();
    structural.force_region = true;
    structural.validate()?;
    let started = Instant::now();
    let k = plan.tolerance(tolerance::GENERATOR_SE);
    let n = plan.config.n;
    let hurst = plan.config.h1;
    let gen = build_generator(plan.generator, n, hurst)?;
    let seed = derive_seed(plan.master_seed, n as u64);
    let lags = max_lag.min(n - 1);

    let per_rep = run_replicates(plan.replicates, |r| {
        let mut x = vec![0.0; n];
        gen.sample_increments(&mut seeded_substream(seed, r, StreamRole::Path1), &mut x);
        Ok((0..=lags)
            .map(|lag| x.iter().zip(&x[lag..]).map(|(a, b)| a * b).sum::<f64>() / (n - lag) as f64)
            .collect::<Vec<f64>>())
    })?;

    let rows = (0..=lags)
        .map(|lag| {
            let column: Vec<f64> = per_rep.iter().map(|v| v[lag]).collect();
            let (mean, se) = mean_and_se(&column);
            let mut row = McRow::new(n, mean, se, fgn_autocovariance(lag as u64, hurst));
            row.lag = Some(lag);
            row.pass = se.is_some_and(|se| (mean - row.target).abs() <= k * se);
            row
        })
        .collect();
    let mut report = McReport::finish("generator", plan, rows, Vec::new(), started);
    report.region_override = false;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plan(h1: f64, h2: f64, alpha: f64, n: usize, reps: usize) -> ExperimentPlan {
        ExperimentPlan::new(ModelConfig::new(h1, h2, alpha, n).unwrap(), reps, 7)
    }

    #[test]
    fn single_replicate_reports_no_error_and_fails() {
        let report = run_variance_experiment(&plan(0.5, 0.5, 0.25, 32, 1)).unwrap();
        assert_eq!(report.per_n_rows[0].std_error, None);
        assert!(!report.pass);
    }

    #[test]
    fn out_of_region_is_refused_unless_forced() {
        let p = plan(0.9, 0.9, 0.5, 32, 100);
        assert!(run_variance_experiment(&p).is_err());
        assert!(run_conditional_experiment(&p).is_err());
        let forced = run_variance_experiment(&p.with_force_region(true)).unwrap();
        assert!(forced.region_override);
        assert!(forced.plan_echo.force_region);
        assert!(!forced.notes.is_empty());
    }

    #[test]
    fn zero_lambda_rows_are_exact() {
        let p = plan(0.5, 0.5, 0.25, 32, 100).with_lambda_grid(vec![0.0]);
        let report = run_conditional_experiment(&p).unwrap();
        let row = &report.per_n_rows[0];
        assert_eq!(row.estimate, 1.0);
        assert_eq!(row.target, 1.0);
        assert_eq!(row.extra["mean_sin"], 0.0);
        let report = run_limit_experiment(&p).unwrap();
        let row = report
            .per_n_rows
            .iter()
            .find(|r| r.lambda == Some(0.0))
            .unwrap();
        assert_eq!((row.estimate, row.target), (1.0, 1.0));
    }

    #[test]
    fn single_step_bracket_is_flagged() {
        let report = run_bracket_experiment(&plan(0.5, 0.5, 0.25, 1, 100)).unwrap();
        let row = &report.per_n_rows[0];
        assert!(row.note.is_some());
        assert!(!row.pass);
        assert!(row.estimate.is_finite());
    }
}
