//! Benchmark harness: seeded estimator sweeps over the synthetic domains,
//! with CSV and markdown artifacts.
//!
//! One experiment fixes an environment, a scenario, and an estimator list,
//! then repeats the whole draw-data-and-estimate pipeline across seeds.
//! Data generation for a seed is shared by every estimator (they all see
//! the same draw); estimator-specific randomness (fold splits, denominator
//! corruption) runs on streams keyed by the estimator id, so adding or
//! removing one estimator never changes another's numbers.
//!
//! Reported metric per (seed, estimator):
//!
//! * two-state domain, per-trajectory estimators — mean squared error of
//!   the per-trajectory predictions against the seed's hidden truths;
//! * two-state domain, scalar estimators — squared error of the point
//!   estimate against the mean of the seed's hidden truths;
//! * care-unit domain — squared error of the point estimate against the
//!   exact target-policy value computed from the known kernel.

use std::fs;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

use crate::data::{truncate_dataset, TargetDataset};
use crate::density_ratio::{BinGrid, CoveragePolicy};
use crate::error::{Error, Result};
use crate::estimators::{
    estimate_dr, estimate_extrapolation, estimate_lope, estimate_mc, estimate_model_based,
    estimate_soft, estimate_w_soft, ExtrapolationMode, RatioConfig, RegressorConfig,
    ValueEstimate,
};
use crate::regression::FeatureMap;
use crate::rng;
use crate::sepsis::{self, MdpSpec, Policy, SepsisParams};
use crate::toy::{self, ToyConfig};

/// Every estimator id the harness can run.
pub const KNOWN_ESTIMATORS: [&str; 9] = [
    "soft",
    "w-soft",
    "dr-soft",
    "dr-w-soft",
    "lope",
    "model-based",
    "extrap-avg",
    "extrap-last",
    "mc",
];

/// Which synthetic domain to draw data from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Environment {
    /// Continuous two-state domain with analytic ground truth.
    Toy,
    /// Discrete care-unit MDP with an exactly solvable kernel.
    Sepsis,
}

impl Environment {
    pub fn name(&self) -> &'static str {
        match self {
            Environment::Toy => "toy",
            Environment::Sepsis => "sepsis",
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "toy" => Ok(Environment::Toy),
            "sepsis" => Ok(Environment::Sepsis),
            other => Err(Error::InvalidConfig(format!(
                "unknown environment '{other}' (expected 'toy' or 'sepsis')"
            ))),
        }
    }
}

/// What the seed loop varies and how nuisance models are (mis)specified.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    /// Correct regression basis, clean density ratio.
    Realizable,
    /// Deliberately impoverished regression basis, clean ratio.
    RegressorMisspecified,
    /// Correct basis, denominator-corrupted ratio.
    RatioMisspecified,
    /// Realizable wiring; pair with the `omega` knob to sweep label noise.
    NoiseSweep,
    /// Corrupted-ratio wiring repeated across behavior-data sizes.
    DataSizeSweep,
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Realizable => "realizable",
            Scenario::RegressorMisspecified => "regressor_misspecified",
            Scenario::RatioMisspecified => "ratio_misspecified",
            Scenario::NoiseSweep => "noise_sweep",
            Scenario::DataSizeSweep => "data_size_sweep",
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "realizable" => Ok(Scenario::Realizable),
            "regressor_misspecified" => Ok(Scenario::RegressorMisspecified),
            "ratio_misspecified" => Ok(Scenario::RatioMisspecified),
            "noise_sweep" => Ok(Scenario::NoiseSweep),
            "data_size_sweep" => Ok(Scenario::DataSizeSweep),
            other => Err(Error::InvalidConfig(format!("unknown scenario '{other}'"))),
        }
    }
}

/// Full description of one benchmark run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub environment: Environment,
    pub scenario: Scenario,
    pub estimators: Vec<String>,
    pub n_seeds: usize,
    /// Behavior episodes per seed (ignored under `DataSizeSweep`, which
    /// reads `sizes`).
    pub n_behavior: usize,
    /// Target episodes per seed.
    pub n_target: usize,
    /// Recorded prefix length for the care-unit domain (the two-state
    /// domain always records its single step).
    pub short_h: usize,
    /// Return-noise scale for the two-state domain.
    pub omega: f64,
    pub k_folds: usize,
    /// Behavior-data sizes for `DataSizeSweep`.
    pub sizes: Vec<usize>,
    /// Exploration mixed into the care-unit behavior policy.
    pub behavior_epsilon: f64,
    /// Exploration mixed into the care-unit target policy.
    pub target_epsilon: f64,
    pub base_seed: u64,
}

impl ExperimentConfig {
    /// Two-state-domain defaults: 200 seeds of 5000 behavior + 100 target
    /// draws.
    pub fn toy_default() -> Self {
        Self {
            environment: Environment::Toy,
            scenario: Scenario::Realizable,
            estimators: vec![
                "soft".into(),
                "w-soft".into(),
                "dr-soft".into(),
                "dr-w-soft".into(),
                "mc".into(),
            ],
            n_seeds: 200,
            n_behavior: 5000,
            n_target: 100,
            short_h: 1,
            omega: 1.0,
            k_folds: 2,
            sizes: Vec::new(),
            behavior_epsilon: 0.15,
            target_epsilon: 0.15,
            base_seed: 0,
        }
    }

    /// Care-unit-domain defaults: 5 seeds of 5000 behavior episodes and 500
    /// two-step target prefixes, every estimator enabled.
    pub fn sepsis_default() -> Self {
        Self {
            environment: Environment::Sepsis,
            scenario: Scenario::Realizable,
            estimators: KNOWN_ESTIMATORS.iter().map(|s| s.to_string()).collect(),
            n_seeds: 5,
            n_behavior: 5000,
            n_target: 500,
            short_h: 2,
            omega: 0.0,
            k_folds: 2,
            sizes: Vec::new(),
            behavior_epsilon: 0.15,
            target_epsilon: 0.15,
            base_seed: 0,
        }
    }
}

/// One estimator's outcome on one seed's draw.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedRecord {
    pub seed_index: usize,
    pub estimator_id: String,
    pub omega: f64,
    pub n_behavior: usize,
    pub n_target: usize,
    pub value: f64,
    /// The comparison point: mean hidden truth (two-state domain) or the
    /// exact target-policy value (care-unit domain).
    pub truth: f64,
    pub metric: f64,
    pub diagnostics: std::collections::BTreeMap<String, f64>,
}

/// Seed-aggregated statistics for one (estimator, parameter) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorSummary {
    pub estimator_id: String,
    pub omega: f64,
    pub n_behavior: usize,
    pub n_target: usize,
    pub n_seeds: usize,
    pub metric_mean: f64,
    pub metric_std: f64,
    pub metric_median: f64,
    pub value_mean: f64,
    pub value_std: f64,
}

/// Everything a finished experiment knows. Wall-clock time is reported
/// here but deliberately kept out of the artifacts so reruns produce
/// byte-identical files.
#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub records: Vec<SeedRecord>,
    pub summaries: Vec<EstimatorSummary>,
    pub wall_clock_seconds: f64,
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn population_std(values: &[f64], center: f64) -> f64 {
    (values.iter().map(|v| (v - center) * (v - center)).sum::<f64>() / values.len() as f64)
        .sqrt()
}

fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("metrics are finite"));
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

fn named(seed: usize, estimator: &str, source: Error) -> Error {
    Error::Estimator { seed, estimator: estimator.to_string(), source: Box::new(source) }
}

fn validate(config: &ExperimentConfig) -> Result<()> {
    if config.n_seeds == 0 {
        return Err(Error::InvalidConfig("n_seeds must be positive".into()));
    }
    if config.estimators.is_empty() {
        return Err(Error::InvalidConfig("no estimators requested".into()));
    }
    for id in &config.estimators {
        if !KNOWN_ESTIMATORS.contains(&id.as_str()) {
            return Err(Error::InvalidConfig(format!(
                "unknown estimator '{id}' (known: {})",
                KNOWN_ESTIMATORS.join(", ")
            )));
        }
    }
    if config.scenario == Scenario::DataSizeSweep && config.sizes.is_empty() {
        return Err(Error::InvalidConfig(
            "data_size_sweep needs a non-empty list of behavior-data sizes".into(),
        ));
    }
    if config.environment == Environment::Sepsis
        && !matches!(config.scenario, Scenario::Realizable | Scenario::RatioMisspecified)
    {
        return Err(Error::InvalidConfig(format!(
            "scenario '{}' only applies to the two-state domain",
            config.scenario.name()
        )));
    }
    Ok(())
}

/// Runs the experiment: draws data per seed, runs every requested
/// estimator, and aggregates per-cell summaries. Seeds run in parallel;
/// record order is deterministic regardless.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let start = Instant::now();
    validate(config)?;
    let records = match config.environment {
        Environment::Toy => run_toy(config)?,
        Environment::Sepsis => run_sepsis(config)?,
    };
    let summaries = summarize(&records);
    Ok(ExperimentReport {
        config: config.clone(),
        records,
        summaries,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    })
}

// ---------------------------------------------------------------------------
// Two-state domain
// ---------------------------------------------------------------------------

fn run_toy(config: &ExperimentConfig) -> Result<Vec<SeedRecord>> {
    let sizes: Vec<usize> = if config.scenario == Scenario::DataSizeSweep {
        config.sizes.clone()
    } else {
        vec![config.n_behavior]
    };
    let mut records = Vec::new();
    for &n_behavior in &sizes {
        let per_seed: Vec<Vec<SeedRecord>> = (0..config.n_seeds)
            .into_par_iter()
            .map(|i| toy_seed(config, n_behavior, i))
            .collect::<Result<_>>()?;
        records.extend(per_seed.into_iter().flatten());
    }
    Ok(records)
}

fn toy_seed(
    config: &ExperimentConfig,
    n_behavior: usize,
    seed_index: usize,
) -> Result<Vec<SeedRecord>> {
    let seed_label = format!("seed-{seed_index}");
    let data_cfg = ToyConfig {
        n_behavior,
        n_target: config.n_target,
        noise_omega: config.omega,
        seed: rng::derive_seed(config.base_seed, &[&seed_label, "data"]),
        ..Default::default()
    };
    let behavior = toy::sample_behavior(&data_cfg)?;
    let (target, labeled_target, truths) = toy::sample_target_labeled(&data_cfg)?;
    let truth_mean = mean(&truths);

    let (features, corrupt_ratio) = match config.scenario {
        Scenario::Realizable | Scenario::NoiseSweep => (FeatureMap::ToyQuadratic, false),
        Scenario::RegressorMisspecified => (FeatureMap::ToyLinear, false),
        Scenario::RatioMisspecified | Scenario::DataSizeSweep => {
            (FeatureMap::ToyQuadratic, true)
        }
    };
    let regressor = RegressorConfig::Linear { features, intercept: false };
    let ratio_for = |estimator: &str| RatioConfig::Histogram {
        grid: BinGrid::default(),
        clip_max: 100.0,
        policy: CoveragePolicy::Lenient,
        corruption_seed: corrupt_ratio.then(|| {
            rng::derive_seed(config.base_seed, &[&seed_label, estimator, "corruption"])
        }),
    };
    let fold_seed = |estimator: &str| {
        rng::derive_seed(config.base_seed, &[&seed_label, estimator, "folds"])
    };

    let mut records = Vec::with_capacity(config.estimators.len());
    for id in &config.estimators {
        let estimate = match id.as_str() {
            "soft" => estimate_soft(&behavior, &target, &regressor),
            "w-soft" => estimate_w_soft(&behavior, &target, &regressor, &ratio_for(id)),
            "dr-soft" => estimate_dr(
                &behavior,
                &target,
                &regressor,
                &ratio_for(id),
                config.k_folds,
                fold_seed(id),
                false,
            ),
            "dr-w-soft" => estimate_dr(
                &behavior,
                &target,
                &regressor,
                &ratio_for(id),
                config.k_folds,
                fold_seed(id),
                true,
            ),
            "mc" => estimate_mc(&labeled_target),
            other => Err(Error::InvalidConfig(format!(
                "estimator '{other}' is not available in the two-state domain"
            ))),
        }
        .map_err(|e| named(seed_index, id, e))?;
        let metric = toy_metric(&estimate, &truths, truth_mean);
        records.push(SeedRecord {
            seed_index,
            estimator_id: id.clone(),
            omega: config.omega,
            n_behavior,
            n_target: config.n_target,
            value: estimate.value,
            truth: truth_mean,
            metric,
            diagnostics: estimate.diagnostics,
        });
    }
    Ok(records)
}

/// Per-trajectory estimators score against the per-trajectory truths;
/// scalar estimators score against the mean truth of the same draw.
fn toy_metric(estimate: &ValueEstimate, truths: &[f64], truth_mean: f64) -> f64 {
    match &estimate.per_trajectory_predictions {
        Some(preds) if preds.len() == truths.len() => {
            preds
                .iter()
                .zip(truths)
                .map(|(p, t)| (p - t) * (p - t))
                .sum::<f64>()
                / truths.len() as f64
        }
        _ => (estimate.value - truth_mean) * (estimate.value - truth_mean),
    }
}

// ---------------------------------------------------------------------------
// Care-unit domain
// ---------------------------------------------------------------------------

struct SepsisSetup {
    spec: MdpSpec,
    behavior_policy: Policy,
    target_policy: Policy,
    truth: f64,
}

fn run_sepsis(config: &ExperimentConfig) -> Result<Vec<SeedRecord>> {
    let spec = sepsis::build_spec(&SepsisParams::default());
    let behavior_policy = sepsis::soften(
        &sepsis::policy_iteration(&spec, spec.behavior_actions),
        config.behavior_epsilon,
    );
    let target_policy = sepsis::soften(
        &sepsis::policy_iteration(&spec, spec.target_actions),
        config.target_epsilon,
    );
    let truth = sepsis::exact_policy_value(&spec, &target_policy, &spec.initial_distribution)?;
    let setup = SepsisSetup { spec, behavior_policy, target_policy, truth };
    let per_seed: Vec<Vec<SeedRecord>> = (0..config.n_seeds)
        .into_par_iter()
        .map(|i| sepsis_seed(config, &setup, i))
        .collect::<Result<_>>()?;
    Ok(per_seed.into_iter().flatten().collect())
}

fn sepsis_seed(
    config: &ExperimentConfig,
    setup: &SepsisSetup,
    seed_index: usize,
) -> Result<Vec<SeedRecord>> {
    let seed_label = format!("seed-{seed_index}");
    let behavior_full = sepsis::rollout_behavior(
        &setup.spec,
        &setup.behavior_policy,
        config.n_behavior,
        rng::derive_seed(config.base_seed, &[&seed_label, "data", "behavior"]),
    )?;
    let target_full = sepsis::rollout_behavior(
        &setup.spec,
        &setup.target_policy,
        config.n_target,
        rng::derive_seed(config.base_seed, &[&seed_label, "data", "target"]),
    )?;
    let behavior = truncate_dataset(&behavior_full, config.short_h)?;
    let target_items = truncate_dataset(&target_full, config.short_h)?;
    let target =
        TargetDataset::new(target_items.items.iter().map(|it| it.prefix.clone()).collect())?;

    let key = sepsis::vitals_key();
    let regressor = RegressorConfig::Tabular { key: key.clone() };
    let corrupt_ratio = config.scenario == Scenario::RatioMisspecified;
    let ratio_for = |estimator: &str| RatioConfig::Tabular {
        key: key.clone(),
        clip_max: 100.0,
        policy: CoveragePolicy::Lenient,
        corruption_seed: corrupt_ratio.then(|| {
            rng::derive_seed(config.base_seed, &[&seed_label, estimator, "corruption"])
        }),
    };
    let fold_seed = |estimator: &str| {
        rng::derive_seed(config.base_seed, &[&seed_label, estimator, "folds"])
    };

    let mut records = Vec::with_capacity(config.estimators.len());
    for id in &config.estimators {
        let estimate = match id.as_str() {
            "soft" => estimate_soft(&behavior, &target, &regressor),
            "w-soft" => estimate_w_soft(&behavior, &target, &regressor, &ratio_for(id)),
            "dr-soft" => estimate_dr(
                &behavior,
                &target,
                &regressor,
                &ratio_for(id),
                config.k_folds,
                fold_seed(id),
                false,
            ),
            "dr-w-soft" => estimate_dr(
                &behavior,
                &target,
                &regressor,
                &ratio_for(id),
                config.k_folds,
                fold_seed(id),
                true,
            ),
            "lope" => estimate_lope(
                &behavior,
                &target,
                &regressor,
                &ratio_for(id),
                &setup.target_policy,
            ),
            "model-based" => estimate_model_based(
                &target,
                &setup.target_policy,
                &setup.spec.rewards,
                &setup.spec.terminal,
                setup.spec.horizon,
                setup.spec.discount,
            ),
            "extrap-avg" => estimate_extrapolation(
                &target,
                ExtrapolationMode::Average,
                setup.spec.horizon,
                setup.spec.discount,
            ),
            "extrap-last" => estimate_extrapolation(
                &target,
                ExtrapolationMode::Last,
                setup.spec.horizon,
                setup.spec.discount,
            ),
            "mc" => estimate_mc(&target_full),
            other => unreachable!("validated estimator id '{other}'"),
        }
        .map_err(|e| named(seed_index, id, e))?;
        let metric = (estimate.value - setup.truth) * (estimate.value - setup.truth);
        records.push(SeedRecord {
            seed_index,
            estimator_id: id.clone(),
            omega: config.omega,
            n_behavior: config.n_behavior,
            n_target: config.n_target,
            value: estimate.value,
            truth: setup.truth,
            metric,
            diagnostics: estimate.diagnostics,
        });
    }
    Ok(records)
}

// ---------------------------------------------------------------------------
// Aggregation and artifacts
// ---------------------------------------------------------------------------

fn summarize(records: &[SeedRecord]) -> Vec<EstimatorSummary> {
    let mut order: Vec<(String, u64, usize, usize)> = Vec::new();
    for r in records {
        let cell = (r.estimator_id.clone(), r.omega.to_bits(), r.n_behavior, r.n_target);
        if !order.contains(&cell) {
            order.push(cell);
        }
    }
    order
        .into_iter()
        .map(|(id, omega_bits, n_behavior, n_target)| {
            let metrics: Vec<f64> = records
                .iter()
                .filter(|r| {
                    r.estimator_id == id
                        && r.omega.to_bits() == omega_bits
                        && r.n_behavior == n_behavior
                        && r.n_target == n_target
                })
                .map(|r| r.metric)
                .collect();
            let values: Vec<f64> = records
                .iter()
                .filter(|r| {
                    r.estimator_id == id
                        && r.omega.to_bits() == omega_bits
                        && r.n_behavior == n_behavior
                        && r.n_target == n_target
                })
                .map(|r| r.value)
                .collect();
            let metric_mean = mean(&metrics);
            let value_mean = mean(&values);
            EstimatorSummary {
                estimator_id: id,
                omega: f64::from_bits(omega_bits),
                n_behavior,
                n_target,
                n_seeds: metrics.len(),
                metric_mean,
                metric_std: population_std(&metrics, metric_mean),
                metric_median: median(&metrics),
                value_mean,
                value_std: population_std(&values, value_mean),
            }
        })
        .collect()
}

/// Pulls the summary row for one estimator cell, if present.
pub fn summary_for<'a>(
    report: &'a ExperimentReport,
    estimator_id: &str,
) -> Option<&'a EstimatorSummary> {
    report.summaries.iter().find(|s| s.estimator_id == estimator_id)
}

/// Writes `rows.csv`, `summary.csv`, and `summary.md` into `dir`
/// (creating it if needed). Output is byte-deterministic for a given
/// report.
pub fn write_report(report: &ExperimentReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let env = report.config.environment.name();
    let scenario = report.config.scenario.name();

    let mut rows = String::from(
        "environment,scenario,estimator,omega,n_behavior,n_target,short_h,k_folds,seed,value,truth,metric\n",
    );
    for r in &report.records {
        rows.push_str(&format!(
            "{env},{scenario},{},{},{},{},{},{},{},{},{},{}\n",
            r.estimator_id,
            r.omega,
            r.n_behavior,
            r.n_target,
            report.config.short_h,
            report.config.k_folds,
            r.seed_index,
            r.value,
            r.truth,
            r.metric,
        ));
    }
    fs::write(dir.join("rows.csv"), rows)?;

    let mut summary = String::from(
        "environment,scenario,estimator,omega,n_behavior,n_target,n_seeds,metric_mean,metric_std,metric_median,value_mean,value_std\n",
    );
    for s in &report.summaries {
        summary.push_str(&format!(
            "{env},{scenario},{},{},{},{},{},{},{},{},{},{}\n",
            s.estimator_id,
            s.omega,
            s.n_behavior,
            s.n_target,
            s.n_seeds,
            s.metric_mean,
            s.metric_std,
            s.metric_median,
            s.value_mean,
            s.value_std,
        ));
    }
    fs::write(dir.join("summary.csv"), summary)?;

    let mut md = format!(
        "# Benchmark: {env} / {scenario}\n\nSeeds: {}. Metric: mean squared error \
         against ground truth; cells are `mean (std)` over seeds.\n\n",
        report.config.n_seeds
    );
    md.push_str(
        "| estimator | omega | n_behavior | mse mean (std) | mse median | value mean (std) |\n",
    );
    md.push_str("|---|---|---|---|---|---|\n");
    for s in &report.summaries {
        md.push_str(&format!(
            "| {} | {} | {} | {:.3} ({:.3}) | {:.3} | {:.3} ({:.3}) |\n",
            s.estimator_id,
            s.omega,
            s.n_behavior,
            s.metric_mean,
            s.metric_std,
            s.metric_median,
            s.value_mean,
            s.value_std,
        ));
    }
    fs::write(dir.join("summary.md"), md)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_toy(estimators: &[&str]) -> ExperimentConfig {
        ExperimentConfig {
            estimators: estimators.iter().map(|s| s.to_string()).collect(),
            n_seeds: 3,
            n_behavior: 800,
            n_target: 50,
            ..ExperimentConfig::toy_default()
        }
    }

    #[test]
    fn toy_run_produces_one_record_per_seed_and_estimator() {
        let config = small_toy(&["soft", "dr-soft", "mc"]);
        let report = run_experiment(&config).unwrap();
        assert_eq!(report.records.len(), 9);
        assert_eq!(report.summaries.len(), 3);
        for r in &report.records {
            assert!((5.0..9.0).contains(&r.truth), "truth={}", r.truth);
            assert!(r.metric.is_finite());
        }
        // Same config, same records — the harness is deterministic.
        let again = run_experiment(&config).unwrap();
        assert_eq!(report.records, again.records);
    }

    #[test]
    fn record_order_is_seed_major_then_estimator() {
        let config = small_toy(&["soft", "mc"]);
        let report = run_experiment(&config).unwrap();
        let ids: Vec<(usize, &str)> = report
            .records
            .iter()
            .map(|r| (r.seed_index, r.estimator_id.as_str()))
            .collect();
        assert_eq!(
            ids,
            vec![(0, "soft"), (0, "mc"), (1, "soft"), (1, "mc"), (2, "soft"), (2, "mc")]
        );
    }

    #[test]
    fn config_validation_rejects_bad_requests() {
        let mut config = small_toy(&["soft"]);
        config.n_seeds = 0;
        assert!(matches!(run_experiment(&config).unwrap_err(), Error::InvalidConfig(_)));

        let config = small_toy(&["nonesuch"]);
        assert!(matches!(run_experiment(&config).unwrap_err(), Error::InvalidConfig(_)));

        let mut config = small_toy(&["w-soft"]);
        config.scenario = Scenario::DataSizeSweep;
        config.sizes = Vec::new();
        assert!(matches!(run_experiment(&config).unwrap_err(), Error::InvalidConfig(_)));

        let mut config = ExperimentConfig::sepsis_default();
        config.scenario = Scenario::RegressorMisspecified;
        assert!(matches!(run_experiment(&config).unwrap_err(), Error::InvalidConfig(_)));
    }

    #[test]
    fn failures_name_the_seed_and_estimator() {
        // Four behavior points cannot support a three-feature fold fit.
        let mut config = small_toy(&["dr-soft"]);
        config.n_behavior = 4;
        config.n_target = 4;
        let err = run_experiment(&config).unwrap_err();
        let text = err.to_string();
        assert!(text.contains("seed 0") && text.contains("dr-soft"), "{text}");
        match err {
            Error::Estimator { seed: 0, estimator, source } => {
                assert_eq!(estimator, "dr-soft");
                assert!(matches!(*source, Error::InsufficientData(_)));
            }
            other => panic!("expected a named estimator failure, got {other:?}"),
        }
    }

    #[test]
    fn toy_domain_rejects_care_unit_estimators() {
        let config = small_toy(&["model-based"]);
        let err = run_experiment(&config).unwrap_err();
        assert!(err.to_string().contains("not available"), "{err}");
    }

    #[test]
    fn size_sweep_yields_one_summary_per_size() {
        let mut config = small_toy(&["w-soft"]);
        config.scenario = Scenario::DataSizeSweep;
        config.sizes = vec![800, 1600];
        config.n_seeds = 2;
        let report = run_experiment(&config).unwrap();
        assert_eq!(report.records.len(), 4);
        assert_eq!(report.summaries.len(), 2);
        assert_eq!(report.summaries[0].n_behavior, 800);
        assert_eq!(report.summaries[1].n_behavior, 1600);
        assert_eq!(report.summaries[0].n_seeds, 2);
    }

    #[test]
    fn artifacts_are_complete_and_deterministic() {
        let config = small_toy(&["soft", "mc"]);
        let report = run_experiment(&config).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_report(&report, dir.path()).unwrap();
        let rows = std::fs::read_to_string(dir.path().join("rows.csv")).unwrap();
        assert_eq!(rows.lines().count(), 1 + report.records.len());
        assert!(rows.starts_with("environment,scenario,estimator,omega,"));
        let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
        assert_eq!(summary.lines().count(), 1 + report.summaries.len());
        let md = std::fs::read_to_string(dir.path().join("summary.md")).unwrap();
        assert!(md.contains("| soft |") && md.contains("| mc |"), "{md}");

        let report_again = run_experiment(&config).unwrap();
        let dir2 = tempfile::tempdir().unwrap();
        write_report(&report_again, dir2.path()).unwrap();
        for file in ["rows.csv", "summary.csv", "summary.md"] {
            let a = std::fs::read(dir.path().join(file)).unwrap();
            let b = std::fs::read(dir2.path().join(file)).unwrap();
            assert_eq!(a, b, "{file} differs between identical runs");
        }
    }

    #[test]
    fn care_unit_smoke_run_covers_every_estimator() {
        let config = ExperimentConfig {
            n_seeds: 1,
            n_behavior: 400,
            n_target: 120,
            ..ExperimentConfig::sepsis_default()
        };
        let report = run_experiment(&config).unwrap();
        assert_eq!(report.records.len(), KNOWN_ESTIMATORS.len());
        let truth = report.records[0].truth;
        assert!((0.5..1.2).contains(&truth), "exact value looks wrong: {truth}");
        for r in &report.records {
            assert!(r.metric.is_finite(), "{} metric not finite", r.estimator_id);
        }
        // The full-horizon reference stays close to the exact value even at
        // this small size.
        let mc = report.records.iter().find(|r| r.estimator_id == "mc").unwrap();
        assert!(mc.metric < 0.05, "mc squared error {}", mc.metric);
    }
}
