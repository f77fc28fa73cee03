//! `longview` — benchmark runner and comparison utility for the estimation
//! library.
//!
//! Subcommands:
//!
//! * `run` — execute a seeded benchmark experiment and write `rows.csv`,
//!   `summary.csv`, and `summary.md` to an output directory;
//! * `compare` — t-test two samples of per-seed errors read from files;
//! * `mdp-export` — dump the simulator's transition spec as
//!   comma-separated text.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use longview_core::bench::{
    run_experiment, write_report, Environment, ExperimentConfig, Scenario,
};
use longview_core::sepsis::{build_default_spec, build_spec, export_spec, SepsisParams};
use longview_core::stats::{t_test_independent, t_test_paired};
use longview_core::{Error, Result};

#[derive(Parser)]
#[command(
    name = "longview",
    version,
    about = "Off-policy value estimation benchmarks from short-horizon prefixes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a seeded benchmark experiment and write its artifacts.
    Run(RunArgs),
    /// Compare two error samples with a t-test.
    Compare(CompareArgs),
    /// Export the treatment simulator's transition spec.
    MdpExport(MdpExportArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Flat `key=value` configuration file; `#` starts a comment.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Environment: `toy` or `sepsis`. Flags override the config file.
    #[arg(long)]
    env: Option<String>,
    /// Scenario name, e.g. `realizable` or `ratio_misspecified`.
    #[arg(long)]
    scenario: Option<String>,
    /// Return-noise scale for the toy environment.
    #[arg(long)]
    omega: Option<f64>,
    /// Behavior episodes per seed.
    #[arg(long = "ntrain", alias = "n-behavior")]
    n_behavior: Option<usize>,
    /// Target prefixes per seed.
    #[arg(long = "ntarget", alias = "n-target")]
    n_target: Option<usize>,
    /// Prefix horizon the estimators see.
    #[arg(long = "h", alias = "short-h")]
    short_h: Option<usize>,
    /// Cross-fitting folds.
    #[arg(long = "k", alias = "k-folds")]
    k_folds: Option<usize>,
    /// Number of seeded replications.
    #[arg(long)]
    seeds: Option<usize>,
    /// Comma-separated estimator ids.
    #[arg(long)]
    estimators: Option<String>,
    /// Behavior-policy exploration rate (sepsis).
    #[arg(long)]
    eps_b: Option<f64>,
    /// Target-policy exploration rate (sepsis).
    #[arg(long)]
    eps_e: Option<f64>,
    /// Root seed all per-seed streams derive from.
    #[arg(long)]
    base_seed: Option<u64>,
    /// Comma-separated behavior sizes for the data-size sweep.
    #[arg(long)]
    sizes: Option<String>,
    /// Directory for rows.csv, summary.csv, summary.md.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    /// File with the baseline sample, one value per line.
    #[arg(long)]
    baseline: PathBuf,
    /// File with the candidate sample, one value per line.
    #[arg(long)]
    candidate: PathBuf,
    /// Pair values by position instead of running Welch's test.
    #[arg(long)]
    paired: bool,
    /// Significance level for the reject/retain verdict.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
}

#[derive(Args)]
struct MdpExportArgs {
    /// Output path for the comma-separated spec.
    #[arg(long)]
    out: PathBuf,
    /// Jitter seed for a perturbed variant; omit for the nominal kernel.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => run(args),
        Command::Compare(args) => compare(args),
        Command::MdpExport(args) => mdp_export(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(args: RunArgs) -> Result<()> {
    let file_pairs = match &args.config {
        Some(path) => parse_config_file(path)?,
        None => Vec::new(),
    };

    // The environment picks the defaults; flag beats file.
    let env_name = args
        .env
        .clone()
        .or_else(|| value_of(&file_pairs, "env"))
        .unwrap_or_else(|| "toy".into());
    let environment = Environment::parse(&env_name)?;
    let mut config = match environment {
        Environment::Toy => ExperimentConfig::toy_default(),
        Environment::Sepsis => ExperimentConfig::sepsis_default(),
    };

    for (key, value) in &file_pairs {
        apply_key(&mut config, key, value)?;
    }
    // The resolved environment wins even if the file names another one.
    config.environment = environment;
    apply_flags(&mut config, &args)?;

    let report = run_experiment(&config)?;
    fs::create_dir_all(&args.out)?;
    write_report(&report, &args.out)?;

    println!(
        "wrote {} rows for {} estimator group(s) to {}",
        report.records.len(),
        report.summaries.len(),
        args.out.display()
    );
    println!(
        "environment={} scenario={} seeds={} wall_clock={:.2}s",
        report.config.environment.name(),
        report.config.scenario.name(),
        report.config.n_seeds,
        report.wall_clock_seconds
    );
    for s in &report.summaries {
        println!(
            "  {:<12} n_behavior={:<6} omega={:<4} mse_mean={:.6} mse_median={:.6}",
            s.estimator_id, s.n_behavior, s.omega, s.metric_mean, s.metric_median
        );
    }
    Ok(())
}

fn parse_config_file(path: &Path) -> Result<Vec<(String, String)>> {
    let text = fs::read_to_string(path)?;
    let mut pairs = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::InvalidConfig(format!(
                "{}:{}: expected key=value, got '{line}'",
                path.display(),
                idx + 1
            ))
        })?;
        pairs.push((normalize_key(key), value.trim().to_string()));
    }
    Ok(pairs)
}

fn normalize_key(key: &str) -> String {
    key.trim().to_ascii_lowercase().replace('-', "_")
}

fn value_of(pairs: &[(String, String)], key: &str) -> Option<String> {
    pairs.iter().rev().find(|(k, _)| k == key).map(|(_, v)| v.clone())
}

fn apply_key(config: &mut ExperimentConfig, key: &str, value: &str) -> Result<()> {
    let bad = |what: &str| {
        Error::InvalidConfig(format!("config key '{key}': invalid {what} '{value}'"))
    };
    match key {
        "env" => config.environment = Environment::parse(value)?,
        "scenario" => config.scenario = Scenario::parse(value)?,
        "omega" => config.omega = value.parse().map_err(|_| bad("number"))?,
        "n_behavior" => config.n_behavior = value.parse().map_err(|_| bad("count"))?,
        "n_target" => config.n_target = value.parse().map_err(|_| bad("count"))?,
        "short_h" => config.short_h = value.parse().map_err(|_| bad("count"))?,
        "k_folds" => config.k_folds = value.parse().map_err(|_| bad("count"))?,
        "n_seeds" | "seeds" => config.n_seeds = value.parse().map_err(|_| bad("count"))?,
        "estimators" => config.estimators = parse_list(value),
        "eps_b" => config.behavior_epsilon = value.parse().map_err(|_| bad("number"))?,
        "eps_e" => config.target_epsilon = value.parse().map_err(|_| bad("number"))?,
        "base_seed" => config.base_seed = value.parse().map_err(|_| bad("seed"))?,
        "sizes" => {
            config.sizes = value
                .split(',')
                .map(|s| s.trim().parse().map_err(|_| bad("size list")))
                .collect::<Result<Vec<usize>>>()?;
        }
        other => {
            return Err(Error::InvalidConfig(format!("unknown config key '{other}'")));
        }
    }
    Ok(())
}

fn parse_list(value: &str) -> Vec<String> {
    value.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
}

fn apply_flags(config: &mut ExperimentConfig, args: &RunArgs) -> Result<()> {
    if let Some(v) = &args.scenario {
        config.scenario = Scenario::parse(v)?;
    }
    if let Some(v) = args.omega {
        config.omega = v;
    }
    if let Some(v) = args.n_behavior {
        config.n_behavior = v;
    }
    if let Some(v) = args.n_target {
        config.n_target = v;
    }
    if let Some(v) = args.short_h {
        config.short_h = v;
    }
    if let Some(v) = args.k_folds {
        config.k_folds = v;
    }
    if let Some(v) = args.seeds {
        config.n_seeds = v;
    }
    if let Some(v) = &args.estimators {
        config.estimators = parse_list(v);
    }
    if let Some(v) = args.eps_b {
        config.behavior_epsilon = v;
    }
    if let Some(v) = args.eps_e {
        config.target_epsilon = v;
    }
    if let Some(v) = args.base_seed {
        config.base_seed = v;
    }
    if let Some(v) = &args.sizes {
        config.sizes = v
            .split(',')
            .map(|s| {
                s.trim().parse().map_err(|_| {
                    Error::InvalidConfig(format!("--sizes: invalid size list '{v}'"))
                })
            })
            .collect::<Result<Vec<usize>>>()?;
    }
    Ok(())
}

fn compare(args: CompareArgs) -> Result<()> {
    if !(args.alpha > 0.0 && args.alpha < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "alpha must lie strictly between 0 and 1, got {}",
            args.alpha
        )));
    }
    let baseline = read_values(&args.baseline)?;
    let candidate = read_values(&args.candidate)?;
    let result = if args.paired {
        t_test_paired(&baseline, &candidate)?
    } else {
        t_test_independent(&baseline, &candidate)?
    };
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    println!(
        "baseline: n={} mean={:.6}    candidate: n={} mean={:.6}",
        baseline.len(),
        mean(&baseline),
        candidate.len(),
        mean(&candidate)
    );
    println!(
        "{} t-test: t = {:.4}, df = {:.2}, p = {:.4}",
        if args.paired { "paired" } else { "Welch independent" },
        result.t_statistic,
        result.degrees_of_freedom,
        result.p_value
    );
    if result.rejects_at(args.alpha) {
        println!("reject the null at alpha {} (p < alpha)", args.alpha);
    } else {
        println!("retain the null at alpha {} (p >= alpha)", args.alpha);
    }
    Ok(())
}

/// Reads one float per line; a single non-numeric first line is treated as
/// a header and skipped.
fn read_values(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path)?;
    let mut values = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        match line.parse::<f64>() {
            Ok(v) => values.push(v),
            Err(_) if idx == 0 => continue,
            Err(_) => {
                return Err(Error::InvalidConfig(format!(
                    "{}:{}: expected a number, got '{line}'",
                    path.display(),
                    idx + 1
                )));
            }
        }
    }
    if values.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "{} contains no numeric values",
            path.display()
        )));
    }
    Ok(values)
}

fn mdp_export(args: MdpExportArgs) -> Result<()> {
    let spec = match args.seed {
        Some(seed) => build_default_spec(seed),
        None => build_spec(&SepsisParams::default()),
    };
    let mut out = fs::File::create(&args.out)?;
    export_spec(&spec, &mut out)?;
    println!(
        "wrote {} states x {} behavior actions to {}",
        spec.n_states,
        spec.behavior_actions,
        args.out.display()
    );
    Ok(())
}
