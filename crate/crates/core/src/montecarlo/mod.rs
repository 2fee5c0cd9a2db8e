//! Seeded, replicate-parallel Monte Carlo experiments.
//!
//! Every replicate owns a ChaCha8 substream keyed by `(seed, replicate, role)`.
//! Replicates run on the ambient rayon pool, their results are gathered into
//! an index-ordered buffer, and all reductions run sequentially over that
//! buffer. Reports are therefore bit-identical for any worker count.

pub mod experiments;
pub mod ks;

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{FracregError, Result};
use crate::fbm::GeneratorKind;
use crate::localtime::{DEFAULT_BAND_HALF_WIDTH, DEFAULT_HEAT_EPSILON};
use crate::statistics::ModelConfig;

pub use crate::seeding::{derive_seed, seeded_substream, SeedProvenance, StreamRole};
pub use experiments::{
    bracket_replicates, run_bracket_experiment, run_conditional_experiment,
    run_generator_experiment, run_limit_experiment, run_riemann_experiment,
    run_variance_experiment, BracketReplicate,
};
pub use ks::{ks_critical_value, ks_one_sample, ks_p_value, ks_two_sample, normal_cdf};

/// Below this many replicates a report never passes.
pub const MIN_REPLICATES: usize = 100;

/// Default refinement of the fine grid in the Riemann-sum experiment.
pub const DEFAULT_REFINEMENT: usize = 16;

pub mod tolerance {
    //! Keys of [`ExperimentPlan::tolerances`](super::ExperimentPlan::tolerances).

    /// Relative error of the scaled second moment against `C₁`.
    pub const VARIANCE_REL: &str = "variance_rel";
    /// Distance of the mean bracket/occupation ratio from 1.
    pub const BRACKET_RATIO: &str = "bracket_ratio";
    /// Relative error of the mean normalized bracket against `C₁`.
    pub const BRACKET_MEAN_REL: &str = "bracket_mean_rel";
    /// Two-sample KS distance at the largest `n`.
    pub const KS: &str = "ks";
    /// Characteristic-function gap in the limit experiment.
    pub const LIMIT_CHAR: &str = "limit_char";
    /// Slack added to `3/√reps` in the conditional experiment.
    pub const CONDITIONAL: &str = "conditional";
    /// Multiple of the standard error allowed in the generator check.
    pub const GENERATOR_SE: &str = "generator_se";
}

/// Frozen default tolerances.
///
/// The KS threshold sits above the same-law baseline: for 2000 vs 2000 normal
/// draws the 99th percentile of the distance is ≈ 0.052.
pub fn default_tolerances() -> BTreeMap<String, f64> {
    [
        (tolerance::VARIANCE_REL, 0.15),
        (tolerance::BRACKET_RATIO, 0.15),
        (tolerance::BRACKET_MEAN_REL, 0.10),
        (tolerance::KS, 0.08),
        (tolerance::LIMIT_CHAR, 0.05),
        (tolerance::CONDITIONAL, 0.0),
        (tolerance::GENERATOR_SE, 5.0),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_owned(), v))
    .collect()
}

fn default_lambda_grid() -> Vec<f64> {
    vec![0.5, 1.0, 2.0]
}

fn default_bandwidth() -> f64 {
    DEFAULT_BAND_HALF_WIDTH
}

fn default_eps() -> f64 {
    DEFAULT_HEAT_EPSILON
}

fn default_refinement() -> usize {
    DEFAULT_REFINEMENT
}

/// Everything an experiment needs. Serializes to a flat JSON object; the
/// model parameters sit next to the run parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    #[serde(flatten)]
    pub config: ModelConfig,
    /// Sample sizes to run, strictly increasing. Empty means `[config.n]`.
    #[serde(default)]
    pub n_list: Vec<usize>,
    pub replicates: usize,
    pub master_seed: u64,
    #[serde(default = "default_lambda_grid")]
    pub lambda_grid: Vec<f64>,
    #[serde(default = "default_tolerances")]
    pub tolerances: BTreeMap<String, f64>,
    /// Run even when alpha is outside the admissible region.
    #[serde(default)]
    pub force_region: bool,
    #[serde(default)]
    pub generator: GeneratorKind,
    /// Occupation band half-width on the unit-time grid.
    #[serde(default = "default_bandwidth")]
    pub bandwidth: f64,
    /// Heat-kernel variance for the smoothed local-time estimator.
    #[serde(default = "default_eps")]
    pub eps: f64,
    /// Fine-grid factor for the Riemann-sum experiment.
    #[serde(default = "default_refinement")]
    pub refinement: usize,
}

impl ExperimentPlan {
    pub fn new(config: ModelConfig, replicates: usize, master_seed: u64) -> Self {
        ExperimentPlan {
            config,
            n_list: vec![config.n],
            replicates,
            master_seed,
            lambda_grid: default_lambda_grid(),
            tolerances: default_tolerances(),
            force_region: false,
            generator: GeneratorKind::default(),
            bandwidth: DEFAULT_BAND_HALF_WIDTH,
            eps: DEFAULT_HEAT_EPSILON,
            refinement: DEFAULT_REFINEMENT,
        }
    }

    pub fn with_n_list(mut self, n_list: Vec<usize>) -> Self {
        self.n_list = n_list;
        self
    }

    pub fn with_lambda_grid(mut self, grid: Vec<f64>) -> Self {
        self.lambda_grid = grid;
        self
    }

    pub fn with_force_region(mut self, force: bool) -> Self {
        self.force_region = force;
        self
    }

    pub fn with_generator(mut self, generator: GeneratorKind) -> Self {
        self.generator = generator;
        self
    }

    pub fn sizes(&self) -> Vec<usize> {
        if self.n_list.is_empty() {
            vec![self.config.n]
        } else {
            self.n_list.clone()
        }
    }

    pub fn tolerance(&self, key: &str) -> f64 {
        self.tolerances
            .get(key)
            .copied()
            .or_else(|| default_tolerances().get(key).copied())
            .unwrap_or(0.0)
    }

    /// Structural checks plus region gating.
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        if self.replicates == 0 {
            return Err(FracregError::config("replicates must be at least 1"));
        }
        let sizes = self.sizes();
        if sizes.contains(&0) {
            return Err(FracregError::config("every n in n_list must be at least 1"));
        }
        if sizes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(FracregError::config("n_list must be strictly increasing"));
        }
        if self.lambda_grid.iter().any(|l| !l.is_finite()) {
            return Err(FracregError::config("lambda_grid entries must be finite"));
        }
        if !(self.bandwidth > 0.0) || !(self.eps > 0.0) {
            return Err(FracregError::config("bandwidth and eps must be positive"));
        }
        if let Some((k, v)) = self.tolerances.iter().find(|(_, v)| !(**v >= 0.0)) {
            return Err(FracregError::config(format!(
                "tolerance {k} = {v} must be nonnegative"
            )));
        }
        if !self.force_region {
            self.config.check_region()?;
        }
        Ok(())
    }

    /// True when the plan runs outside the admissible region by override.
    pub fn region_overridden(&self) -> bool {
        self.force_region && !self.config.region_ok()
    }

    pub fn config_for(&self, n: usize) -> ModelConfig {
        self.config.with_n(n)
    }
}

/// One line of a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McRow {
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    /// Lag index for the generator check.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lag: Option<usize>,
    pub estimate: f64,
    /// Absent with a single replicate.
    pub std_error: Option<f64>,
    pub target: f64,
    /// Absent when the target is zero.
    pub rel_error: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ks_distance: Option<f64>,
    pub pass: bool,
    /// Experiment-specific companions (exact moments, secondary means).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl McRow {
    fn new(n: usize, estimate: f64, std_error: Option<f64>, target: f64) -> Self {
        let rel_error = (target != 0.0).then(|| (estimate - target) / target);
        McRow {
            n,
            lambda: None,
            lag: None,
            estimate,
            std_error,
            target,
            rel_error,
            ks_distance: None,
            pass: false,
            extra: BTreeMap::new(),
            note: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub experiment: String,
    pub plan_echo: ExperimentPlan,
    pub per_n_rows: Vec<McRow>,
    pub region_override: bool,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    /// Seconds; excluded from reproducibility comparisons.
    pub wall_time: f64,
}

impl McReport {
    fn finish(
        experiment: &str,
        plan: &ExperimentPlan,
        mut rows: Vec<McRow>,
        mut notes: Vec<String>,
        started: std::time::Instant,
    ) -> Self {
        if plan.replicates < MIN_REPLICATES {
            notes.push(format!(
                "{} replicates is below the minimum of {MIN_REPLICATES}; no row passes",
                plan.replicates
            ));
            for row in &mut rows {
                row.pass = false;
            }
        }
        let region_override = plan.region_overridden();
        if region_override {
            notes.push("alpha outside the admissible region; run forced by override".to_owned());
        }
        let pass = !rows.is_empty() && rows.iter().all(|r| r.pass);
        McReport {
            experiment: experiment.to_owned(),
            plan_echo: plan.clone(),
            per_n_rows: rows,
            region_override,
            pass,
            notes,
            wall_time: started.elapsed().as_secs_f64(),
        }
    }

    /// The report with wall time zeroed, for bitwise comparisons.
    pub fn without_timing(&self) -> Self {
        McReport {
            wall_time: 0.0,
            ..self.clone()
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Rows as CSV with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(
            out,
            "n,lambda,lag,estimate,std_error,target,rel_error,ks_distance,pass"
        )?;
        for r in &self.per_n_rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.n,
                fmt_opt(r.lambda),
                r.lag.map(|l| l.to_string()).unwrap_or_default(),
                fmt_num(r.estimate),
                fmt_opt(r.std_error),
                fmt_num(r.target),
                fmt_opt(r.rel_error),
                fmt_opt(r.ks_distance),
                r.pass
            )?;
        }
        Ok(())
    }
}

/// 17 significant digits.
pub fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_num).unwrap_or_default()
}

/// Mean and standard error of the mean; the error is absent for one value.
pub fn mean_and_se(values: &[f64]) -> (f64, Option<f64>) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, None);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, Some((var / n).sqrt()))
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    }
}

/// Run `body(replicate)` for every replicate on the current rayon pool and
/// return the results in replicate order.
pub fn run_replicates<T, F>(replicates: usize, body: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    (0..replicates as u64).into_par_iter().map(body).collect()
}

/// Run `f` on a dedicated pool of `threads` workers.
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| FracregError::config(format!("cannot build thread pool: {e}")))?;
    Ok(pool.install(f))
}
