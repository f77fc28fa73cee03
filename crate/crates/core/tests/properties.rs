//! Cross-module property tests: structural invariants under randomized
//! inputs, and statistical-consistency checks at fixed seeds.

use std::sync::OnceLock;

use longview_core::bench::{self, ExperimentConfig, Scenario};
use longview_core::data::{
    discounted_return, make_fold_plan, truncate, LabeledTrajectory, Trajectory,
};
use longview_core::density_ratio::{
    fit_histogram_ratio, BinGrid, CoveragePolicy, DensityRatioModel,
};
use longview_core::estimators::{
    estimate_model_based, estimate_soft, RegressorConfig,
};
use longview_core::regression::{fit_least_squares_opts, FeatureMap};
use longview_core::rng;
use longview_core::sepsis::{self, MdpSpec};
use longview_core::toy::{self, ToyConfig};
use proptest::prelude::*;

// ---------------------------------------------------------------------------
// Randomized structural invariants
// ---------------------------------------------------------------------------

proptest! {
    #![proptest_config(ProptestConfig {
        failure_persistence: None,
        ..ProptestConfig::default()
    })]

    // Every index lands in exactly one fold, in/out sets complement each
    // other, and fold sizes stay balanced to within one.
    #[test]
    fn fold_plan_partitions_and_balances(
        n in 4usize..80,
        m in 4usize..40,
        k in 2usize..5,
        seed in any::<u64>(),
    ) {
        prop_assume!(n >= k && m >= k);
        let plan = make_fold_plan(n, m, k, seed).unwrap();
        let mut behavior_seen = vec![0usize; n];
        let mut target_seen = vec![0usize; m];
        let mut behavior_sizes = Vec::new();
        for fold in 0..k {
            let b_in = plan.behavior_in(fold);
            let b_out = plan.behavior_out(fold);
            prop_assert_eq!(b_in.len() + b_out.len(), n);
            let mut marks = vec![false; n];
            for &i in b_in.iter().chain(&b_out) {
                prop_assert!(!marks[i], "index {} appears twice in fold {}", i, fold);
                marks[i] = true;
            }
            for &i in &b_in {
                behavior_seen[i] += 1;
            }
            behavior_sizes.push(b_in.len());
            for &j in &plan.target_in(fold) {
                target_seen[j] += 1;
            }
        }
        prop_assert!(behavior_seen.iter().all(|&c| c == 1));
        prop_assert!(target_seen.iter().all(|&c| c == 1));
        let max = behavior_sizes.iter().max().unwrap();
        let min = behavior_sizes.iter().min().unwrap();
        prop_assert!(max - min <= 1, "fold sizes {:?} unbalanced", behavior_sizes);
    }

    // Truncating an already-truncated record is a no-op.
    #[test]
    fn truncate_is_idempotent(
        state_values in prop::collection::vec(-5.0f64..5.0, 2..8),
        reward_scale in -2.0f64..2.0,
        terminated in any::<bool>(),
        h_raw in 1usize..7,
        full_return in -10.0f64..10.0,
    ) {
        let states: Vec<Vec<f64>> = state_values.iter().map(|&v| vec![v]).collect();
        let rewards: Vec<f64> =
            (0..states.len() - 1).map(|i| reward_scale * i as f64).collect();
        let recorded = states.len() - 1;
        let h = 1 + (h_raw - 1) % recorded;
        let item = LabeledTrajectory::new(
            Trajectory::new(states, rewards, None, terminated).unwrap(),
            full_return,
        )
        .unwrap();
        let once = truncate(&item, h).unwrap();
        let twice = truncate(&once, h).unwrap();
        prop_assert_eq!(&once, &twice);
        prop_assert_eq!(once.prefix.horizon_h, h);
        prop_assert_eq!(once.full_return, item.full_return);
    }

    // A fitted ratio model never evaluates outside [0, clip_max], even far
    // outside the grid it was fitted on.
    #[test]
    fn fitted_ratio_stays_within_clip(s0 in -4.0f64..6.0, s1 in -4.0f64..6.0) {
        static MODEL: OnceLock<DensityRatioModel> = OnceLock::new();
        let model = MODEL.get_or_init(|| {
            let cfg = ToyConfig { seed: 99, ..Default::default() };
            let behavior = toy::sample_behavior(&cfg).unwrap();
            let (target, _) = toy::sample_target(&cfg).unwrap();
            fit_histogram_ratio(
                &behavior,
                &target,
                BinGrid::default(),
                100.0,
                CoveragePolicy::Lenient,
            )
            .unwrap()
        });
        let prefix =
            Trajectory::new(vec![vec![s0], vec![s1]], vec![], None, false).unwrap();
        let value = model.ratio_of(&prefix).unwrap();
        prop_assert!((0.0..=100.0).contains(&value), "ratio {} escapes [0, 100]", value);
    }

    // With no discounting, the return is the plain reward sum.
    #[test]
    fn unit_discount_reduces_to_reward_sum(
        rewards in prop::collection::vec(-10.0f64..10.0, 0..12),
    ) {
        let direct: f64 = rewards.iter().sum();
        let discounted = discounted_return(&rewards, 1.0);
        prop_assert!((discounted - direct).abs() <= 1e-9 * (1.0 + direct.abs()));
    }

    // The regression estimator's reported value is exactly the mean of its
    // per-trajectory predictions.
    #[test]
    fn soft_value_is_the_mean_of_its_predictions(seed in any::<u64>()) {
        let cfg = ToyConfig { n_behavior: 60, n_target: 9, seed, ..Default::default() };
        let behavior = toy::sample_behavior(&cfg).unwrap();
        let (target, _) = toy::sample_target(&cfg).unwrap();
        let estimate = estimate_soft(
            &behavior,
            &target,
            &RegressorConfig::Linear { features: FeatureMap::ToyQuadratic, intercept: false },
        )
        .unwrap();
        let predictions = estimate.per_trajectory_predictions.as_ref().unwrap();
        let mean = predictions.iter().sum::<f64>() / predictions.len() as f64;
        prop_assert!((estimate.value - mean).abs() <= 1e-12);
    }

    // Plain-text export/import reproduces a specification exactly.
    #[test]
    fn mdp_spec_round_trips_through_text(
        n_states in 2usize..5,
        behavior_actions in 1usize..3,
        extra_actions in 0usize..2,
        horizon in 1usize..6,
        discount_eighths in 1u8..=8,
        terminal_mask in any::<u8>(),
        row_shape in any::<u64>(),
        reward_eighths in prop::collection::vec(-8i8..=8, 5),
        init_state in 0usize..5,
    ) {
        let target_actions = behavior_actions + extra_actions;
        let mut shape = row_shape;
        let mut transitions = Vec::with_capacity(n_states);
        let mut terminal = Vec::with_capacity(n_states);
        for s in 0..n_states {
            let is_terminal = terminal_mask >> s & 1 == 1;
            terminal.push(is_terminal);
            let mut rows = Vec::with_capacity(target_actions);
            for _ in 0..target_actions {
                if is_terminal {
                    rows.push(vec![(s, 1.0)]);
                    continue;
                }
                let j = (shape % n_states as u64) as usize;
                shape /= n_states as u64;
                let split = (shape % 9) as f64 / 8.0;
                shape = shape / 9 + 0x9E37_79B9;
                let other = (j + 1) % n_states;
                let mut row = Vec::new();
                if split > 0.0 {
                    row.push((j, split));
                }
                if split < 1.0 {
                    row.push((other, 1.0 - split));
                }
                rows.push(row);
            }
            transitions.push(rows);
        }
        let mut initial_distribution = vec![0.0; n_states];
        initial_distribution[init_state % n_states] = 1.0;
        let spec = MdpSpec {
            n_states,
            behavior_actions,
            target_actions,
            transitions,
            rewards: (0..n_states).map(|s| reward_eighths[s] as f64 / 8.0).collect(),
            terminal,
            horizon,
            discount: discount_eighths as f64 / 8.0,
            initial_distribution,
        };
        spec.validate().unwrap();
        let mut text = Vec::new();
        sepsis::export_spec(&spec, &mut text).unwrap();
        let round_tripped =
            sepsis::import_spec(&mut std::io::BufReader::new(&text[..])).unwrap();
        prop_assert_eq!(&spec, &round_tripped);
    }
}

// ---------------------------------------------------------------------------
// Benchmark-harness invariants
// ---------------------------------------------------------------------------

/// Removing one estimator from the list leaves every other estimator's
/// numbers untouched: per-(seed, estimator) RNG streams are independent.
#[test]
fn estimator_streams_are_isolated() {
    let mut config = ExperimentConfig::toy_default();
    config.n_seeds = 30;
    config.n_behavior = 600;
    config.n_target = 80;
    config.estimators = vec!["soft".into(), "w-soft".into(), "dr-soft".into()];
    let full = bench::run_experiment(&config).unwrap();
    config.estimators = vec!["soft".into(), "dr-soft".into()];
    let reduced = bench::run_experiment(&config).unwrap();
    for id in ["soft", "dr-soft"] {
        let from_full: Vec<_> = full
            .records
            .iter()
            .filter(|r| r.estimator_id == id)
            .map(|r| (r.seed_index, r.value, r.metric))
            .collect();
        let from_reduced: Vec<_> = reduced
            .records
            .iter()
            .filter(|r| r.estimator_id == id)
            .map(|r| (r.seed_index, r.value, r.metric))
            .collect();
        assert_eq!(from_full, from_reduced, "{id} numbers shifted");
    }
}

/// The summary cells are recomputable from the per-seed rows.
#[test]
fn summaries_recompute_exactly_from_rows() {
    let mut config = ExperimentConfig::toy_default();
    config.n_seeds = 25;
    config.n_behavior = 500;
    config.n_target = 70;
    config.estimators = vec!["soft".into(), "dr-soft".into(), "mc".into()];
    let report = bench::run_experiment(&config).unwrap();
    assert!(!report.summaries.is_empty());
    for summary in &report.summaries {
        let metrics: Vec<f64> = report
            .records
            .iter()
            .filter(|r| {
                r.estimator_id == summary.estimator_id
                    && r.omega == summary.omega
                    && r.n_behavior == summary.n_behavior
                    && r.n_target == summary.n_target
            })
            .map(|r| r.metric)
            .collect();
        assert_eq!(metrics.len(), summary.n_seeds);
        let mean = metrics.iter().sum::<f64>() / metrics.len() as f64;
        let var = metrics.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>()
            / metrics.len() as f64;
        assert_eq!(summary.metric_mean, mean, "{} mean drifted", summary.estimator_id);
        assert_eq!(
            summary.metric_std,
            var.sqrt(),
            "{} std drifted",
            summary.estimator_id
        );
    }
}

/// The markdown table carries exactly the csv numbers, in the paper-style
/// `mean (std)` 3-decimal cells.
#[test]
fn summary_formats_carry_identical_numbers() {
    let mut config = ExperimentConfig::toy_default();
    config.n_seeds = 6;
    config.n_behavior = 500;
    config.n_target = 70;
    config.estimators = vec!["soft".into(), "dr-soft".into(), "mc".into()];
    let report = bench::run_experiment(&config).unwrap();
    let dir = tempfile::tempdir().unwrap();
    bench::write_report(&report, dir.path()).unwrap();
    let md = std::fs::read_to_string(dir.path().join("summary.md")).unwrap();
    for summary in &report.summaries {
        let cell = format!("{:.3} ({:.3})", summary.metric_mean, summary.metric_std);
        assert!(
            md.contains(&cell),
            "markdown misses cell '{cell}' for {}",
            summary.estimator_id
        );
    }
}

// ---------------------------------------------------------------------------
// Statistical consistency at fixed seeds
// ---------------------------------------------------------------------------

/// Least-squares coefficients converge toward the generating ones as the
/// behavior sample grows.
#[test]
fn regression_coefficients_tighten_with_data() {
    let coefficient_error = |n: usize| -> f64 {
        let mut worst: f64 = 0.0;
        for seed in 0..3u64 {
            let cfg = ToyConfig {
                n_behavior: n,
                seed: rng::derive_seed(7, &["regression-consistency", &seed.to_string()]),
                ..Default::default()
            };
            let behavior = toy::sample_behavior(&cfg).unwrap();
            let model =
                fit_least_squares_opts(&behavior, FeatureMap::ToyQuadratic, None, false)
                    .unwrap();
            let targets = [5.0, 1.0, 1.0];
            let err = model
                .coefficients
                .iter()
                .zip(targets)
                .map(|(c, t)| (c - t).abs())
                .fold(0.0f64, f64::max);
            worst = worst.max(err);
        }
        worst
    };
    let at_500 = coefficient_error(500);
    let at_50k = coefficient_error(50_000);
    println!("coefficient error: N=500 {at_500:.5}  N=50000 {at_50k:.5}");
    assert!(at_50k < at_500, "error did not shrink: {at_500} -> {at_50k}");
    assert!(at_50k < 0.05, "coefficients off by {at_50k} at N=50000");
}

/// The regression estimator's error decays roughly like 1/sqrt(M) once the
/// regressor is well-trained: log-log slope in [-0.7, -0.3].
#[test]
fn soft_estimator_error_rate_in_target_size() {
    let error_at = |m: usize| -> f64 {
        let n_reps = 20;
        let mut total = 0.0;
        for rep in 0..n_reps {
            let cfg = ToyConfig {
                n_behavior: 50_000,
                n_target: m,
                seed: rng::derive_seed(
                    11,
                    &["soft-rate", &m.to_string(), &rep.to_string()],
                ),
                ..Default::default()
            };
            let behavior = toy::sample_behavior(&cfg).unwrap();
            let (target, _) = toy::sample_target(&cfg).unwrap();
            let estimate = estimate_soft(
                &behavior,
                &target,
                &RegressorConfig::Linear {
                    features: FeatureMap::ToyQuadratic,
                    intercept: false,
                },
            )
            .unwrap();
            total += (estimate.value - toy::analytic_target_value(m)).abs();
        }
        total / n_reps as f64
    };
    let low = error_at(100);
    let high = error_at(10_000);
    let slope = (high.ln() - low.ln()) / ((10_000f64).ln() - (100f64).ln());
    println!("soft error: M=100 {low:.5}  M=10000 {high:.5}  slope {slope:.3}");
    assert!(
        (-0.7..=-0.3).contains(&slope),
        "estimation-error rate slope {slope} outside [-0.7, -0.3]"
    );
}

/// At 1e5 samples per side the fitted histogram ratio tracks the analytic
/// one on the behavior distribution.
#[test]
fn histogram_ratio_converges_to_the_analytic_ratio() {
    let cfg = ToyConfig { n_behavior: 100_000, n_target: 100_000, seed: 5, ..Default::default() };
    let behavior = toy::sample_behavior(&cfg).unwrap();
    let (target, _) = toy::sample_target(&cfg).unwrap();
    let model = fit_histogram_ratio(
        &behavior,
        &target,
        BinGrid::default(),
        100.0,
        CoveragePolicy::Lenient,
    )
    .unwrap();
    let fresh = toy::behavior_samples(&ToyConfig { n_behavior: 2000, seed: 123, ..cfg });
    let mut fitted_mean = 0.0;
    let mut abs_gap = 0.0;
    for sample in &fresh {
        let prefix =
            Trajectory::new(vec![vec![sample.s0], vec![sample.s1]], vec![], None, false)
                .unwrap();
        let fitted = model.ratio_of(&prefix).unwrap();
        let analytic = toy::analytic_density_ratio(sample.s0, sample.s1).min(100.0);
        fitted_mean += fitted / fresh.len() as f64;
        abs_gap += (fitted - analytic).abs() / fresh.len() as f64;
    }
    println!("ratio check: behavior-mean {fitted_mean:.4}  mean |fitted - analytic| {abs_gap:.4}");
    assert!(
        (fitted_mean - 1.0).abs() < 0.15,
        "importance weights should average near 1 on behavior data, got {fitted_mean}"
    );
    assert!(abs_gap < 0.3, "fitted ratio strays from the analytic one by {abs_gap}");
}

/// More prefix data tightens the model-based baseline on the treatment
/// simulator.
#[test]
fn model_based_error_shrinks_with_more_prefixes() {
    let spec = sepsis::build_spec(&sepsis::SepsisParams::default());
    let policy = sepsis::soften(&sepsis::policy_iteration(&spec, spec.target_actions), 0.15);
    let truth =
        sepsis::exact_policy_value(&spec, &policy, &spec.initial_distribution).unwrap();
    let error_at = |n: usize| -> f64 {
        let target = sepsis::rollout_target(&spec, &policy, n, 2, 31).unwrap();
        let estimate = estimate_model_based(
            &target,
            &policy,
            &spec.rewards,
            &spec.terminal,
            spec.horizon,
            spec.discount,
        )
        .unwrap();
        (estimate.value - truth).abs()
    };
    let small = error_at(500);
    let large = error_at(100_000);
    println!("model-based error: n=500 {small:.4}  n=100000 {large:.4}  truth {truth:.4}");
    assert!(large < small, "more data did not help: {small} -> {large}");
}

/// Scaling both datasets by 8x shrinks the doubly robust squared error.
#[test]
fn dr_error_shrinks_when_both_datasets_grow() {
    let mse_at = |n: usize, m: usize, tag: &str| -> f64 {
        let mut config = ExperimentConfig::toy_default();
        config.scenario = Scenario::Realizable;
        config.estimators = vec!["dr-soft".into()];
        config.n_seeds = 40;
        config.n_behavior = n;
        config.n_target = m;
        config.base_seed = rng::derive_seed(3, &["two-scale", tag]);
        let report = bench::run_experiment(&config).unwrap();
        bench::summary_for(&report, "dr-soft").unwrap().metric_mean
    };
    let small = mse_at(1000, 50, "small");
    let large = mse_at(8000, 400, "large");
    println!("dr two-scale mse: (1000,50) {small:.5}  (8000,400) {large:.5}");
    assert!(large < small, "8x data did not shrink dr error: {small} -> {large}");
}
