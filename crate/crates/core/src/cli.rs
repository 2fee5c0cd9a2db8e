//! Command-line front end.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{Map, Value};

use crate::error::{FracregError, Result};
use crate::fbm::{build_generator, GeneratorKind, HurstParam};
use crate::kernels::{heat_kernel, ChaosSeries, CHAOS_EPSILON_FLOOR, DEFAULT_CHAOS_ORDER};
use crate::montecarlo::experiments::run_bracket_experiment_detailed;
use crate::montecarlo::{
    fmt_num, fmt_opt, run_conditional_experiment, run_limit_experiment, run_riemann_experiment,
    run_variance_experiment, with_threads, BracketReplicate, ExperimentPlan, McReport,
};
use crate::seeding::{seeded_substream, SeedProvenance, StreamRole};
use crate::statistics::admissible_region;

const UNITS: &str = "\
Units: Hurst indices and alpha are dimensionless; n counts unit-spaced time
steps; --bandwidth is a half-width in space units of the path rescaled to
[0, 1]; --eps is a variance in squared space units; lambda is per unit of the
normalized statistic. All CSV numbers carry 17 significant digits.

Exit status: 0 when every check passes, 1 when a check fails, 2 on invalid
input (including parameters outside the admissible region).";

#[derive(Debug, Parser)]
#[command(
    name = "fracreg",
    version,
    about = "Simulate fBm, evaluate the kernel-weighted statistic and verify its limit laws",
    after_help = UNITS
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one fBm path and write it as CSV (t,value)
    FbmGenerate(GenerateArgs),
    /// Print the admissible alpha interval as JSON
    Region(RegionArgs),
    /// Scaled second moment of S_n against C1, with exact diagonal and off-diagonal terms
    VerifyVariance(VerifyArgs),
    /// Bracket-implied local time against the occupation-band estimate
    VerifyBracket(VerifyArgs),
    /// Two-sample KS against the mixed-normal limit sqrt(d1 L) Z
    VerifyLimit(VerifyArgs),
    /// Conditional characteristic function given a frozen regressor path
    VerifyConditional(VerifyArgs),
    /// Truncated Hermite chaos series against the heat kernel
    VerifyChaos(ChaosArgs),
    /// Scaled Riemann-sum discrepancy of the squared kernel along a path
    VerifyRiemann(VerifyArgs),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Hurst index in (0, 1), dimensionless
    #[arg(long, alias = "h")]
    pub h1: f64,
    /// Number of unit time steps (path has n+1 points)
    #[arg(long)]
    pub n: usize,
    /// Master seed (required)
    #[arg(long)]
    pub seed: u64,
    /// Path generator
    #[arg(long, value_enum, default_value_t = GeneratorKind::Circulant)]
    pub generator: GeneratorKind,
    /// Output directory; prints to stdout when absent
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RegionArgs {
    /// Hurst index of the regressor, dimensionless in (0, 1)
    #[arg(long)]
    pub h1: f64,
    /// Hurst index of the noise, dimensionless in (0, 1)
    #[arg(long)]
    pub h2: f64,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// JSON experiment plan; flags override its fields
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Hurst index of the regressor path, dimensionless in (0, 1)
    #[arg(long)]
    pub h1: Option<f64>,
    /// Hurst index of the noise path, dimensionless in (0, 1)
    #[arg(long)]
    pub h2: Option<f64>,
    /// Bandwidth exponent (bandwidth n^-alpha), dimensionless
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Sample size in unit time steps
    #[arg(long)]
    pub n: Option<usize>,
    /// Comma-separated increasing sample sizes in time steps
    #[arg(long, value_delimiter = ',')]
    pub n_list: Option<Vec<usize>>,
    /// Kernel evaluation point, space units of the integer-grid path
    #[arg(long)]
    pub x0: Option<f64>,
    /// Monte Carlo replicates (count; at least 100 for a passing report)
    #[arg(long)]
    pub reps: Option<usize>,
    /// Master seed (required, here or in --config)
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated lambda values, per unit of the normalized statistic
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub lambda_grid: Option<Vec<f64>>,
    /// Occupation band half-width, space units on [0, 1]
    #[arg(long)]
    pub bandwidth: Option<f64>,
    /// Heat-kernel variance, squared space units on [0, 1]
    #[arg(long)]
    pub eps: Option<f64>,
    /// Fine-grid refinement factor for verify-riemann (integer >= 2)
    #[arg(long)]
    pub refinement: Option<usize>,
    /// Path generator
    #[arg(long, value_enum)]
    pub generator: Option<GeneratorKind>,
    /// Output directory for report files
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Report file format
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Run even when alpha is outside the admissible region
    #[arg(long)]
    pub force_region: bool,
    /// Worker threads (count; 0 means all cores)
    #[arg(long, env = "FRACREG_THREADS", default_value_t = 0)]
    pub threads: usize,
}

#[derive(Debug, Args)]
pub struct ChaosArgs {
    /// Heat-kernel variance, squared space units (at least 0.25)
    #[arg(long, default_value_t = 1.0)]
    pub eps: f64,
    /// Truncation order M (count of chaos terms)
    #[arg(long, default_value_t = DEFAULT_CHAOS_ORDER)]
    pub order: usize,
    /// Evaluation point, space units
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub z: f64,
    /// Squared norm of the chaos direction, dimensionless
    #[arg(long, default_value_t = 1.0)]
    pub phi_norm_sq: f64,
    /// Largest accepted absolute error at the final order
    #[arg(long, default_value_t = 1e-6)]
    pub tolerance: f64,
    /// Output directory for the CSV
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `argv` (program name first) and runs the command. Returns the
/// process exit status.
pub fn parse_and_dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("fracreg: {e}");
            2
        }
    }
}

fn dispatch(command: Command) -> Result<bool> {
    match command {
        Command::FbmGenerate(args) => generate(&args),
        Command::Region(args) => {
            let region = admissible_region(HurstParam::new(args.h1)?, HurstParam::new(args.h2)?);
            println!("{}", region.to_json());
            Ok(true)
        }
        Command::VerifyVariance(args) => verify(&args, "variance"),
        Command::VerifyBracket(args) => verify(&args, "bracket"),
        Command::VerifyLimit(args) => verify(&args, "limit"),
        Command::VerifyConditional(args) => verify(&args, "conditional"),
        Command::VerifyRiemann(args) => verify(&args, "riemann"),
        Command::VerifyChaos(args) => verify_chaos(&args),
    }
}

fn generate(args: &GenerateArgs) -> Result<bool> {
    let hurst = HurstParam::new(args.h1)?;
    let generator = build_generator(args.generator, args.n, hurst)?;
    let role = StreamRole::Path1;
    let path = generator
        .sample(&mut seeded_substream(args.seed, 0, role))
        .with_provenance(SeedProvenance {
            master_seed: args.seed,
            replicate: 0,
            role,
        });
    match &args.out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            path.write_csv(BufWriter::new(File::create(dir.join("path.csv"))?))?;
        }
        None => path.write_csv(io::stdout().lock())?,
    }
    Ok(true)
}

/// Config file values, overridden by any flag given on the command line.
pub fn effective_plan(args: &VerifyArgs) -> Result<ExperimentPlan> {
    let mut fields = match &args.config {
        Some(path) => match serde_json::from_str::<Value>(&fs::read_to_string(path)?)? {
            Value::Object(map) => map,
            _ => return Err(FracregError::config("plan file must hold a JSON object")),
        },
        None => Map::new(),
    };
    let mut set = |key: &str, value: Option<Value>| {
        if let Some(v) = value {
            fields.insert(key.to_owned(), v);
        }
    };
    set("h1", args.h1.map(Value::from));
    set("h2", args.h2.map(Value::from));
    set("alpha", args.alpha.map(Value::from));
    set("n", args.n.map(Value::from));
    set("n_list", args.n_list.clone().map(Value::from));
    set("x0", args.x0.map(Value::from));
    set("replicates", args.reps.map(Value::from));
    set("master_seed", args.seed.map(Value::from));
    set("lambda_grid", args.lambda_grid.clone().map(Value::from));
    set("bandwidth", args.bandwidth.map(Value::from));
    set("eps", args.eps.map(Value::from));
    set("refinement", args.refinement.map(Value::from));
    set(
        "generator",
        args.generator
            .map(|g| serde_json::to_value(g).expect("enum")),
    );
    if args.force_region {
        set("force_region", Some(Value::Bool(true)));
    }

    if !fields.contains_key("master_seed") {
        return Err(FracregError::config(
            "missing --seed: stochastic commands need an explicit seed",
        ));
    }
    if !fields.contains_key("n") {
        let largest = fields
            .get("n_list")
            .and_then(Value::as_array)
            .and_then(|list| list.iter().filter_map(Value::as_u64).max());
        if let Some(n) = largest {
            fields.insert("n".to_owned(), Value::from(n));
        }
    }
    for (key, flag) in [
        ("h1", "--h1"),
        ("h2", "--h2"),
        ("alpha", "--alpha"),
        ("n", "--n"),
        ("replicates", "--reps"),
    ] {
        if !fields.contains_key(key) {
            return Err(FracregError::config(format!("missing {flag}")));
        }
    }
    let plan: ExperimentPlan = serde_json::from_value(Value::Object(fields))?;
    plan.validate()?;
    Ok(plan)
}

fn verify(args: &VerifyArgs, experiment: &str) -> Result<bool> {
    let plan = effective_plan(args)?;
    let (report, brackets) = with_threads(args.threads, || -> Result<_> {
        Ok(match experiment {
            "variance" => (run_variance_experiment(&plan)?, Vec::new()),
            "bracket" => run_bracket_experiment_detailed(&plan)?,
            "limit" => (run_limit_experiment(&plan)?, Vec::new()),
            "conditional" => (run_conditional_experiment(&plan)?, Vec::new()),
            "riemann" => (run_riemann_experiment(&plan)?, Vec::new()),
            other => unreachable!("unknown experiment {other}"),
        })
    })??;

    print_summary(&report);
    if let Some(dir) = &args.out {
        fs::create_dir_all(dir)?;
        write_report(dir, &report, args.format)?;
        for (n, reps) in &brackets {
            let file = File::create(dir.join(format!("bracket_n{n}.csv")))?;
            write_bracket_csv(BufWriter::new(file), reps)?;
        }
    }
    Ok(report.pass)
}

fn write_report(dir: &Path, report: &McReport, format: Format) -> Result<()> {
    let stem = dir.join(&report.experiment);
    match format {
        Format::Json => fs::write(stem.with_extension("json"), report.to_json()? + "\n")?,
        Format::Csv => {
            let out = BufWriter::new(File::create(stem.with_extension("csv"))?);
            if report.experiment == "variance" {
                write_variance_csv(out, report)?;
            } else {
                report.write_csv(out)?;
            }
        }
    }
    Ok(())
}

pub fn write_variance_csv<W: Write>(mut out: W, report: &McReport) -> io::Result<()> {
    writeln!(
        out,
        "n,scaled_second_moment,exact_diag_scaled,exact_offdiag_scaled,c1,rel_error"
    )?;
    for row in &report.per_n_rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            row.n,
            fmt_num(row.estimate),
            fmt_opt(row.extra.get("exact_diag_scaled").copied()),
            fmt_opt(row.extra.get("exact_offdiag_scaled").copied()),
            fmt_num(row.target),
            fmt_opt(row.rel_error),
        )?;
    }
    out.flush()
}

pub fn write_bracket_csv<W: Write>(mut out: W, reps: &[BracketReplicate]) -> io::Result<()> {
    writeln!(
        out,
        "replicate,bracket_implied,occupation_band,heat_smoothed,ratio"
    )?;
    for r in reps {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.replicate,
            fmt_num(r.bracket_implied),
            fmt_num(r.occupation_band),
            fmt_num(r.heat_smoothed),
            fmt_num(r.ratio),
        )?;
    }
    out.flush()
}

fn print_summary(report: &McReport) {
    println!("{} report", report.experiment);
    println!(
        "{:>8} {:>8} {:>5} {:>13} {:>11} {:>13} {:>11} {:>5}",
        "n", "lambda", "lag", "estimate", "std_error", "target", "rel_error", "pass"
    );
    let opt = |v: Option<f64>| v.map_or("-".to_owned(), |x| format!("{x:.4e}"));
    for row in &report.per_n_rows {
        println!(
            "{:>8} {:>8} {:>5} {:>13.6e} {:>11} {:>13.6e} {:>11} {:>5}",
            row.n,
            row.lambda.map_or("-".to_owned(), |l| l.to_string()),
            row.lag.map_or("-".to_owned(), |l| l.to_string()),
            row.estimate,
            opt(row.std_error),
            row.target,
            opt(row.rel_error),
            if row.pass { "yes" } else { "no" },
        );
    }
    for note in &report.notes {
        println!("note: {note}");
    }
    println!("overall: {}", if report.pass { "PASS" } else { "FAIL" });
}

fn verify_chaos(args: &ChaosArgs) -> Result<bool> {
    if args.eps < CHAOS_EPSILON_FLOOR {
        return Err(FracregError::config(format!(
            "eps = {} is below the verification floor {CHAOS_EPSILON_FLOOR}",
            args.eps
        )));
    }
    let series = ChaosSeries::new(args.eps, args.phi_norm_sq, args.order)?;
    let target = heat_kernel(args.z, args.eps)?;
    let partial = series.partial_sums(args.z);
    let final_error = (partial.last().copied().unwrap_or(0.0) - target).abs();

    let mut lines = vec!["order,partial_sum,target,abs_error".to_owned()];
    for (order, s) in partial.iter().enumerate() {
        lines.push(format!(
            "{order},{},{},{}",
            fmt_num(*s),
            fmt_num(target),
            fmt_num((s - target).abs())
        ));
    }
    let csv = lines.join("\n") + "\n";
    match &args.out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            fs::write(dir.join("chaos.csv"), &csv)?;
            println!(
                "chaos order {} at z = {}: abs_error {final_error:.3e} (tolerance {:.1e})",
                args.order, args.z, args.tolerance
            );
        }
        None => print!("{csv}"),
    }
    Ok(final_error <= args.tolerance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn help_lists_every_subcommand_and_flag() {
        let help = Cli::command().render_long_help().to_string();
        for sub in [
            "fbm-generate",
            "region",
            "verify-variance",
            "verify-bracket",
            "verify-limit",
            "verify-conditional",
            "verify-chaos",
            "verify-riemann",
        ] {
            assert!(help.contains(sub), "{sub}");
        }
        let mut cmd = Cli::command();
        let verify = cmd.find_subcommand_mut("verify-variance").unwrap();
        let help = verify.render_long_help().to_string();
        for flag in [
            "--h1",
            "--h2",
            "--alpha",
            "--n",
            "--n-list",
            "--reps",
            "--seed",
            "--lambda-grid",
            "--bandwidth",
            "--eps",
            "--out",
            "--format",
            "--force-region",
            "--threads",
        ] {
            assert!(help.contains(flag), "{flag}");
        }
        assert!(help.contains("FRACREG_THREADS"));
    }

    fn parse_verify(args: &[&str]) -> VerifyArgs {
        let argv = ["fracreg", "verify-variance"].iter().chain(args);
        match Cli::try_parse_from(argv).unwrap().command {
            Command::VerifyVariance(v) => v,
            _ => unreachable!(),
        }
    }

    #[test]
    fn seed_is_mandatory() {
        let args = parse_verify(&[
            "--h1", "0.5", "--h2", "0.5", "--alpha", "0.25", "--n", "64", "--reps", "100",
        ]);
        let err = effective_plan(&args).unwrap_err().to_string();
        assert!(err.contains("--seed"), "{err}");
    }

    #[test]
    fn flags_override_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("plan.json");
        fs::write(
            &file,
            r#"{"h1":0.5,"h2":0.5,"alpha":0.25,"n":64,"replicates":100,"master_seed":3,"eps":0.01}"#,
        )
        .unwrap();
        let args = parse_verify(&[
            "--config",
            file.to_str().unwrap(),
            "--n",
            "128",
            "--seed",
            "9",
        ]);
        let plan = effective_plan(&args).unwrap();
        assert_eq!(plan.config.n, 128);
        assert_eq!(plan.master_seed, 9);
        assert_eq!(plan.eps, 0.01);
        assert_eq!(plan.replicates, 100);
    }

    #[test]
    fn n_defaults_to_largest_in_list() {
        let args = parse_verify(&[
            "--h1", "0.5", "--h2", "0.5", "--alpha", "0.25", "--n-list", "16,64", "--reps", "100",
            "--seed", "1",
        ]);
        let plan = effective_plan(&args).unwrap();
        assert_eq!(plan.config.n, 64);
        assert_eq!(plan.sizes(), vec![16, 64]);
    }

    #[test]
    fn emitted_plan_reparses_identically() {
        let args = parse_verify(&[
            "--h1",
            "0.4",
            "--h2",
            "0.6",
            "--alpha",
            "0.3",
            "--n-list",
            "32,64",
            "--reps",
            "150",
            "--seed",
            "11",
            "--lambda-grid",
            "-1,0.5",
            "--generator",
            "cholesky",
        ]);
        let plan = effective_plan(&args).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("echo.json");
        fs::write(&file, serde_json::to_string(&plan).unwrap()).unwrap();
        let again = effective_plan(&parse_verify(&["--config", file.to_str().unwrap()])).unwrap();
        assert_eq!(plan, again);
    }

    #[test]
    fn out_of_region_names_the_bound() {
        let args = parse_verify(&[
            "--h1", "0.9", "--h2", "0.9", "--alpha", "0.5", "--n", "256", "--reps", "100",
            "--seed", "1",
        ]);
        let err = effective_plan(&args).unwrap_err().to_string();
        assert!(err.contains("upper bound alpha < 1 - h1"), "{err}");
    }
}
