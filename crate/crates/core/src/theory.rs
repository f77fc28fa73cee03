//! Finite-sample audit of the cross-fitted doubly robust estimator.
//!
//! Three instruments:
//!
//! * [`evaluate_bound`] — the seven-term high-probability error bound,
//!   reported term by term so rate behavior is inspectable;
//! * [`empirical_bound_coverage`] — seeded replications on the two-state
//!   domain that fit real nuisances, measure their errors against the
//!   analytic oracles on large fresh samples, and check how often the
//!   bound actually contains the realized estimation error;
//! * [`product_bias`] and the planted instance — the exact bias identity
//!   `(1/K) Σ_k E_target[Δ_k(τ) (1 − δ_k(τ))]`, where `Δ_k` is a fold's
//!   regression error and `δ_k` its relative density-ratio estimate, plus a
//!   small discrete domain with planted nuisance errors for validating the
//!   identity against the estimator end to end.

use rand::distributions::{Distribution, WeightedIndex};
use rand_distr::Normal;
use rayon::prelude::*;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::data::{make_fold_plan, BehaviorDataset, LabeledTrajectory, TargetDataset, Trajectory};
use crate::density_ratio::{fit_histogram_ratio, BinGrid, CoveragePolicy, OracleRatio};
use crate::error::{Error, Result};
use crate::estimators::{OracleValue, RatioConfig, RegressorConfig};
use crate::regression::{fit_least_squares_opts, FeatureMap, TrajectoryKey};
use crate::rng;
use crate::toy::{self, ToyConfig};

// ---------------------------------------------------------------------------
// The seven-term bound
// ---------------------------------------------------------------------------

/// Everything the error bound consumes.
///
/// The epsilon vectors hold one entry per fold: `eps_b` and `eps_h` are the
/// regressor's and ratio's root-mean-square errors under the *behavior*
/// distribution, `eps_e` the regressor's under the *target* distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundInputs {
    /// Failure probability; the bound holds with probability `1 - delta`.
    pub delta: f64,
    pub k_folds: usize,
    /// Target prefixes available (`M`).
    pub n_target: usize,
    /// Behavior episodes available (`N`).
    pub n_behavior: usize,
    /// Horizon scale `H`: returns and regressors are bounded by `c1 * H`.
    pub horizon: f64,
    /// Return/regressor envelope constant.
    pub c1: f64,
    /// Density-ratio envelope constant.
    pub c2: f64,
    /// Variance of the true surrogate under the target distribution.
    pub var_target: f64,
    /// `E_behavior[h(τ)² (G − f(τ))²]`.
    pub second_moment_behavior: f64,
    pub eps_b: Vec<f64>,
    pub eps_e: Vec<f64>,
    pub eps_h: Vec<f64>,
}

/// The bound, split into its seven summands.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundBreakdown {
    pub terms: [f64; 7],
    pub total: f64,
}

/// Evaluates the seven-term bound on the cross-fitted doubly robust error.
///
/// Term by term: (1) target-variance sampling error, (2) behavior
/// second-moment sampling error, (3) mean product of nuisance errors,
/// (4) fast `1/M` burn-in, (5) target-side regressor consistency,
/// (6) fast `1/N` burn-in, (7) behavior-side nuisance consistency.
pub fn evaluate_bound(inputs: &BoundInputs) -> Result<BoundBreakdown> {
    if !(inputs.delta > 0.0 && inputs.delta < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "delta must lie strictly between 0 and 1, got {}",
            inputs.delta
        )));
    }
    if inputs.k_folds == 0 {
        return Err(Error::InvalidConfig("k_folds must be positive".into()));
    }
    if inputs.n_target == 0 || inputs.n_behavior == 0 {
        return Err(Error::InvalidConfig("sample sizes must be positive".into()));
    }
    for (name, eps) in
        [("eps_b", &inputs.eps_b), ("eps_e", &inputs.eps_e), ("eps_h", &inputs.eps_h)]
    {
        if eps.len() != inputs.k_folds {
            return Err(Error::InvalidConfig(format!(
                "{name} has {} entries for {} folds",
                eps.len(),
                inputs.k_folds
            )));
        }
        if eps.iter().any(|e| !e.is_finite() || *e < 0.0) {
            return Err(Error::InvalidConfig(format!(
                "{name} entries must be finite and non-negative"
            )));
        }
    }
    for (name, v) in [
        ("horizon", inputs.horizon),
        ("c1", inputs.c1),
        ("c2", inputs.c2),
        ("var_target", inputs.var_target),
        ("second_moment_behavior", inputs.second_moment_behavior),
    ] {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "{name} must be finite and non-negative, got {v}"
            )));
        }
    }

    let k = inputs.k_folds as f64;
    let m = inputs.n_target as f64;
    let n = inputs.n_behavior as f64;
    let log_term = (4.0 * k / inputs.delta).ln();
    let max_eps_e = inputs.eps_e.iter().cloned().fold(0.0f64, f64::max);
    let max_eps_bh = inputs
        .eps_b
        .iter()
        .zip(&inputs.eps_h)
        .map(|(b, h)| b + h)
        .fold(0.0f64, f64::max);

    let terms = [
        (2.0 * inputs.var_target * log_term / m).sqrt(),
        (2.0 * inputs.second_moment_behavior * log_term / n).sqrt(),
        inputs.eps_b.iter().zip(&inputs.eps_h).map(|(b, h)| b * h).sum::<f64>() / k,
        2.0 * inputs.horizon * k * log_term / m,
        max_eps_e * (2.0 * k * log_term / m).sqrt(),
        4.0 * inputs.c1 * inputs.c2 * inputs.horizon * k * log_term / n,
        3.0 * inputs.c1 * inputs.horizon * max_eps_bh * (2.0 * k * log_term / n).sqrt(),
    ];
    Ok(BoundBreakdown { terms, total: terms.iter().sum() })
}

// ---------------------------------------------------------------------------
// Empirical coverage of the bound
// ---------------------------------------------------------------------------

/// Configuration for the seeded coverage audit on the two-state domain.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageConfig {
    pub n_behavior: usize,
    pub n_target: usize,
    pub noise_omega: f64,
    pub n_seeds: usize,
    pub k_folds: usize,
    pub delta: f64,
    /// Fresh oracle draws per distribution used to measure nuisance errors
    /// and moments.
    pub n_oracle_samples: usize,
    pub base_seed: u64,
}

impl Default for CoverageConfig {
    fn default() -> Self {
        Self {
            n_behavior: 5000,
            n_target: 100,
            noise_omega: 1.0,
            n_seeds: 200,
            k_folds: 2,
            delta: 0.05,
            n_oracle_samples: 100_000,
            base_seed: 0,
        }
    }
}

/// One seed's audit outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageRecord {
    pub seed_index: usize,
    pub terms: [f64; 7],
    pub total: f64,
    pub empirical_error: f64,
    pub covered: bool,
}

/// Fraction of seeds whose realized error the bound contained.
pub fn coverage_fraction(records: &[CoverageRecord]) -> f64 {
    records.iter().filter(|r| r.covered).count() as f64 / records.len() as f64
}

/// Runs the audit: per seed, draw data, cross-fit real nuisances, estimate
/// the value, measure the nuisance errors against the analytic oracles on
/// large fresh samples, evaluate the bound, and compare it with the
/// realized error against the exact target value.
pub fn empirical_bound_coverage(config: &CoverageConfig) -> Result<Vec<CoverageRecord>> {
    if config.n_seeds == 0 {
        return Err(Error::InvalidConfig("n_seeds must be positive".into()));
    }
    if config.n_oracle_samples == 0 {
        return Err(Error::InvalidConfig("n_oracle_samples must be positive".into()));
    }
    (0..config.n_seeds).into_par_iter().map(|i| audit_seed(config, i)).collect()
}

/// The audited estimate for one seed, exposed separately so agreement with
/// the production estimator can be asserted.
pub fn audited_dr_value(config: &CoverageConfig, seed_index: usize) -> Result<f64> {
    Ok(audit_seed_inner(config, seed_index)?.1)
}

fn audit_seed(config: &CoverageConfig, seed_index: usize) -> Result<CoverageRecord> {
    audit_seed_inner(config, seed_index).map(|(record, _)| record)
}

type AuditOutcome = (CoverageRecord, f64);

fn audit_seed_inner(config: &CoverageConfig, seed_index: usize) -> Result<AuditOutcome> {
    let label = format!("seed-{seed_index}");
    let data_cfg = ToyConfig {
        n_behavior: config.n_behavior,
        n_target: config.n_target,
        noise_omega: config.noise_omega,
        seed: rng::derive_seed(config.base_seed, &[&label, "data"]),
        ..Default::default()
    };
    let behavior = toy::sample_behavior(&data_cfg)?;
    let (target, _) = toy::sample_target(&data_cfg)?;
    let plan = make_fold_plan(
        config.n_behavior,
        config.n_target,
        config.k_folds,
        rng::derive_seed(config.base_seed, &[&label, "folds"]),
    )?;

    // Fit the per-fold nuisances exactly as the production estimator does.
    let mut ratios = Vec::with_capacity(config.k_folds);
    let mut regressors = Vec::with_capacity(config.k_folds);
    let mut fold_values = Vec::with_capacity(config.k_folds);
    for fold in 0..config.k_folds {
        let train_b = BehaviorDataset::new(
            plan.behavior_out(fold).iter().map(|&i| behavior.items[i].clone()).collect(),
        )?;
        let train_e = TargetDataset::new(
            plan.target_out(fold).iter().map(|&i| target.items[i].clone()).collect(),
        )?;
        let ratio = fit_histogram_ratio(
            &train_b,
            &train_e,
            BinGrid::default(),
            100.0,
            CoveragePolicy::Lenient,
        )?;
        let regressor =
            fit_least_squares_opts(&train_b, FeatureMap::ToyQuadratic, None, false)?;

        let mut correction = 0.0;
        for &i in &plan.behavior_in(fold) {
            let item = &behavior.items[i];
            correction += ratio.ratio_of(&item.prefix)?
                * (item.full_return - regressor.predict(&item.prefix)?);
        }
        correction /= plan.behavior_in(fold).len() as f64;
        let mut baseline = 0.0;
        for &i in &plan.target_in(fold) {
            baseline += regressor.predict(&target.items[i])?;
        }
        baseline /= plan.target_in(fold).len() as f64;
        fold_values.push(correction + baseline);
        ratios.push(ratio);
        regressors.push(regressor);
    }
    let dr_value = fold_values.iter().sum::<f64>() / config.k_folds as f64;

    // Fresh oracle pools drawn from the *same* generating processes.
    let fresh_behavior = fresh_pool(config.n_oracle_samples, |round| {
        toy::behavior_samples(&ToyConfig {
            seed: rng::derive_seed(
                config.base_seed,
                &[&label, "fresh-behavior", &round.to_string()],
            ),
            ..data_cfg
        })
    });
    let fresh_target = fresh_pool(config.n_oracle_samples, |round| {
        toy::target_samples(&ToyConfig {
            seed: rng::derive_seed(
                config.base_seed,
                &[&label, "fresh-target", &round.to_string()],
            ),
            ..data_cfg
        })
    });

    // Nuisance errors and envelope constants on the fresh pools. Each
    // envelope is measured where its object actually enters the estimator:
    // ratios weight behavior samples only, so the ratio envelope is taken
    // over the behavior pool (the true ratio is unbounded on parts of the
    // target support that behavior essentially never reaches, and a sup
    // there would make the bound vacuous); returns and regressors appear on
    // both sides, so their envelope spans both pools.
    let k = config.k_folds;
    let mut sq_b = vec![0.0; k];
    let mut sq_h = vec![0.0; k];
    let mut sq_e = vec![0.0; k];
    let mut second_moment = 0.0;
    let mut max_return: f64 = behavior.returns().iter().fold(0.0, |a, g| a.max(g.abs()));
    let mut max_ratio: f64 = 0.0;
    for sample in &fresh_behavior {
        let prefix = two_state_prefix(sample.s0, sample.s1);
        let f_true = sample.true_return;
        let h_true = toy::analytic_density_ratio(sample.s0, sample.s1);
        max_return = max_return.max(f_true.abs()).max(sample.observed_return.abs());
        max_ratio = max_ratio.max(h_true);
        let residual = sample.observed_return - f_true;
        second_moment += (h_true * residual) * (h_true * residual);
        for fold in 0..k {
            let f_hat = regressors[fold].predict(&prefix)?;
            let h_hat = ratios[fold].ratio_of(&prefix)?;
            max_return = max_return.max(f_hat.abs());
            max_ratio = max_ratio.max(h_hat);
            sq_b[fold] += (f_hat - f_true) * (f_hat - f_true);
            sq_h[fold] += (h_hat - h_true) * (h_hat - h_true);
        }
    }
    second_moment /= fresh_behavior.len() as f64;

    let mut truth_sum = 0.0;
    let mut truth_sq = 0.0;
    for sample in &fresh_target {
        let prefix = two_state_prefix(sample.s0, sample.s1);
        let f_true = sample.true_return;
        max_return = max_return.max(f_true.abs());
        truth_sum += f_true;
        truth_sq += f_true * f_true;
        for fold in 0..k {
            let f_hat = regressors[fold].predict(&prefix)?;
            max_return = max_return.max(f_hat.abs());
            sq_e[fold] += (f_hat - f_true) * (f_hat - f_true);
        }
    }
    let nb = fresh_behavior.len() as f64;
    let ne = fresh_target.len() as f64;
    let truth_mean = truth_sum / ne;
    let var_target = truth_sq / ne - truth_mean * truth_mean;

    let horizon = 1.0;
    let inputs = BoundInputs {
        delta: config.delta,
        k_folds: k,
        n_target: config.n_target,
        n_behavior: config.n_behavior,
        horizon,
        c1: 1.1 * max_return / horizon,
        c2: 1.1 * max_ratio,
        var_target,
        second_moment_behavior: second_moment,
        eps_b: sq_b.iter().map(|s| (s / nb).sqrt()).collect(),
        eps_e: sq_e.iter().map(|s| (s / ne).sqrt()).collect(),
        eps_h: sq_h.iter().map(|s| (s / nb).sqrt()).collect(),
    };
    let breakdown = evaluate_bound(&inputs)?;
    let truth = toy::analytic_target_value(config.n_target);
    let empirical_error = (dr_value - truth).abs();
    Ok((
        CoverageRecord {
            seed_index,
            terms: breakdown.terms,
            total: breakdown.total,
            empirical_error,
            covered: empirical_error <= breakdown.total,
        },
        dr_value,
    ))
}

fn two_state_prefix(s0: f64, s1: f64) -> Trajectory {
    Trajectory::new(vec![vec![s0], vec![s1]], vec![], None, false)
        .expect("two coordinates form a valid prefix")
}

fn fresh_pool(
    count: usize,
    mut draw_round: impl FnMut(usize) -> Vec<toy::ToySample>,
) -> Vec<toy::ToySample> {
    let mut pool = Vec::with_capacity(count);
    let mut round = 0;
    while pool.len() < count {
        pool.extend(draw_round(round));
        round += 1;
    }
    pool.truncate(count);
    pool
}

/// Writes one line per audited seed:
/// `term_1,…,term_7,total,empirical_error,covered`.
pub fn write_coverage_csv(records: &[CoverageRecord], path: &Path) -> Result<()> {
    let mut out = String::from(
        "term_1,term_2,term_3,term_4,term_5,term_6,term_7,total,empirical_error,covered\n",
    );
    for r in records {
        for t in &r.terms {
            out.push_str(&format!("{t},"));
        }
        out.push_str(&format!(
            "{},{},{}\n",
            r.total,
            r.empirical_error,
            u8::from(r.covered)
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Product-bias identity
// ---------------------------------------------------------------------------

/// Exact inputs for the bias identity on a finite prefix set.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasOracleInputs {
    /// Target-distribution probabilities over the prefixes.
    pub target_probabilities: Vec<f64>,
    /// Per-fold regression errors `Δ_k(τ) = f̂_k(τ) − f(τ)`.
    pub regression_errors: Vec<Vec<f64>>,
    /// Per-fold relative ratio estimates `δ_k(τ) = ĥ_k(τ) / h(τ)`.
    pub ratio_relatives: Vec<Vec<f64>>,
}

/// The exact bias of the cross-fitted doubly robust estimator:
/// `(1/K) Σ_k Σ_τ q(τ) Δ_k(τ) (1 − δ_k(τ))`.
///
/// Zero when every `Δ_k` vanishes (perfect regression) or every `δ_k`
/// equals one (perfect ratio) — either nuisance being right suffices.
pub fn product_bias(inputs: &BiasOracleInputs) -> Result<f64> {
    let q = &inputs.target_probabilities;
    if q.is_empty() {
        return Err(Error::InvalidConfig("empty target distribution".into()));
    }
    if q.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::InvalidConfig(
            "target probabilities must lie in [0, 1]".into(),
        ));
    }
    let mass: f64 = q.iter().sum();
    if (mass - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidConfig(format!(
            "target probabilities sum to {mass}, not 1"
        )));
    }
    let k = inputs.regression_errors.len();
    if k == 0 || inputs.ratio_relatives.len() != k {
        return Err(Error::InvalidConfig(format!(
            "need matching fold counts, got {k} regression folds and {} ratio folds",
            inputs.ratio_relatives.len()
        )));
    }
    for fold in 0..k {
        if inputs.regression_errors[fold].len() != q.len()
            || inputs.ratio_relatives[fold].len() != q.len()
        {
            return Err(Error::InvalidConfig(format!(
                "fold {fold} nuisance vectors must match the {} prefixes",
                q.len()
            )));
        }
    }
    let mut total = 0.0;
    for fold in 0..k {
        for (i, &qi) in q.iter().enumerate() {
            total += qi
                * inputs.regression_errors[fold][i]
                * (1.0 - inputs.ratio_relatives[fold][i]);
        }
    }
    Ok(total / k as f64)
}

// ---------------------------------------------------------------------------
// Planted-nuisance instance
// ---------------------------------------------------------------------------

/// A small discrete domain with *planted* nuisance errors: the regressor
/// oracle reports `f(s) + delta_shift[s]` and the ratio oracle reports
/// `ratio_scale[s] · q(s)/p(s)`, so the estimator's exact bias is known in
/// closed form and can be validated by simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedInstance {
    /// Behavior-state distribution `p`.
    pub behavior_probs: Vec<f64>,
    /// Target-state distribution `q`.
    pub target_probs: Vec<f64>,
    /// True conditional mean returns `f(s)`.
    pub true_values: Vec<f64>,
    /// Observation noise scale on returns.
    pub noise: f64,
    /// Planted regression error per state.
    pub delta_shift: Vec<f64>,
    /// Planted relative ratio estimate per state.
    pub ratio_scale: Vec<f64>,
}

/// The standard ten-state audit fixture. Its exact target value is 5.
pub fn default_planted_instance() -> PlantedInstance {
    let n = 10;
    let p_raw: Vec<f64> = (0..n).map(|s| 2.0 + (s % 3) as f64).collect();
    let p_sum: f64 = p_raw.iter().sum();
    let q_raw: Vec<f64> = (0..n).map(|s| (s + 1) as f64).collect();
    let q_sum: f64 = q_raw.iter().sum();
    PlantedInstance {
        behavior_probs: p_raw.iter().map(|x| x / p_sum).collect(),
        target_probs: q_raw.iter().map(|x| x / q_sum).collect(),
        true_values: (0..n).map(|s| 2.0 + 0.5 * s as f64).collect(),
        noise: 0.5,
        delta_shift: (0..n)
            .map(|s| 0.4 * if s % 2 == 0 { 1.0 } else { -1.0 } + 0.05 * s as f64)
            .collect(),
        ratio_scale: (0..n).map(|s| 0.7 + 0.06 * s as f64).collect(),
    }
}

fn validate_instance(instance: &PlantedInstance) -> Result<()> {
    let n = instance.behavior_probs.len();
    if n == 0 {
        return Err(Error::InvalidConfig("planted instance has no states".into()));
    }
    for (name, v) in [
        ("target_probs", &instance.target_probs),
        ("true_values", &instance.true_values),
        ("delta_shift", &instance.delta_shift),
        ("ratio_scale", &instance.ratio_scale),
    ] {
        if v.len() != n {
            return Err(Error::InvalidConfig(format!(
                "{name} has {} entries for {n} states",
                v.len()
            )));
        }
    }
    for (name, probs) in [
        ("behavior_probs", &instance.behavior_probs),
        ("target_probs", &instance.target_probs),
    ] {
        if probs.iter().any(|p| *p < 0.0) {
            return Err(Error::InvalidConfig(format!("{name} has a negative entry")));
        }
        let mass: f64 = probs.iter().sum();
        if (mass - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!("{name} sums to {mass}, not 1")));
        }
    }
    if instance.behavior_probs.iter().any(|p| *p == 0.0) {
        return Err(Error::InvalidConfig(
            "behavior_probs must cover every state (no zero mass)".into(),
        ));
    }
    Ok(())
}

/// The exact target value `Σ_s q(s) f(s)`.
pub fn planted_true_value(instance: &PlantedInstance) -> f64 {
    instance
        .target_probs
        .iter()
        .zip(&instance.true_values)
        .map(|(q, f)| q * f)
        .sum()
}

/// The exact estimator bias `Σ_s q(s) Δ(s) (1 − δ(s))` implied by the
/// planted nuisances (identical across folds, so no fold average needed).
pub fn planted_exact_bias(instance: &PlantedInstance) -> f64 {
    instance
        .target_probs
        .iter()
        .zip(&instance.delta_shift)
        .zip(&instance.ratio_scale)
        .map(|((q, d), r)| q * d * (1.0 - r))
        .sum()
}

/// Draws one dataset pair from the planted instance: behavior states from
/// `p` labeled with noisy returns, target states from `q`.
pub fn sample_planted(
    instance: &PlantedInstance,
    n_behavior: usize,
    n_target: usize,
    seed: u64,
) -> Result<(BehaviorDataset, TargetDataset)> {
    validate_instance(instance)?;
    let p_index = WeightedIndex::new(&instance.behavior_probs)
        .map_err(|e| Error::InvalidConfig(format!("behavior distribution: {e}")))?;
    let q_index = WeightedIndex::new(&instance.target_probs)
        .map_err(|e| Error::InvalidConfig(format!("target distribution: {e}")))?;
    let noise = Normal::new(0.0, instance.noise)
        .map_err(|e| Error::InvalidConfig(format!("noise scale: {e}")))?;

    let mut state_stream = rng::stream(seed, &["planted", "behavior-state"]);
    let mut noise_stream = rng::stream(seed, &["planted", "behavior-noise"]);
    let behavior = BehaviorDataset::new(
        (0..n_behavior)
            .map(|_| {
                let s = p_index.sample(&mut state_stream);
                let g = instance.true_values[s] + noise.sample(&mut noise_stream);
                LabeledTrajectory::new(one_state_prefix(s), g)
            })
            .collect::<Result<Vec<_>>>()?,
    )?;
    let mut target_stream = rng::stream(seed, &["planted", "target-state"]);
    let target = TargetDataset::new(
        (0..n_target).map(|_| one_state_prefix(q_index.sample(&mut target_stream))).collect(),
    )?;
    Ok((behavior, target))
}

fn one_state_prefix(state: usize) -> Trajectory {
    Trajectory::new(vec![vec![state as f64]], vec![], None, false)
        .expect("one coordinate forms a valid prefix")
}

/// Oracle nuisance configurations carrying the planted errors, ready to
/// feed the production estimator.
pub fn planted_nuisance_configs(
    instance: &PlantedInstance,
) -> (RegressorConfig, RatioConfig) {
    let regressor_rows: BTreeMap<Vec<u64>, f64> = instance
        .true_values
        .iter()
        .zip(&instance.delta_shift)
        .enumerate()
        .map(|(s, (f, d))| (vec![s as u64], f + d))
        .collect();
    let ratio_rows: BTreeMap<Vec<u64>, f64> = instance
        .behavior_probs
        .iter()
        .zip(&instance.target_probs)
        .zip(&instance.ratio_scale)
        .enumerate()
        .map(|(s, ((p, q), scale))| (vec![s as u64], scale * q / p))
        .collect();
    (
        RegressorConfig::Oracle(OracleValue::Table {
            key: TrajectoryKey::FullPrefix,
            rows: regressor_rows,
            default: 0.0,
        }),
        RatioConfig::Oracle {
            ratio: OracleRatio::Table {
                key: TrajectoryKey::FullPrefix,
                rows: ratio_rows,
                default: 0.0,
            },
            clip_max: 1e6,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::estimate_dr;
    use approx::assert_abs_diff_eq;

    fn reference_inputs() -> BoundInputs {
        BoundInputs {
            delta: 0.1,
            k_folds: 3,
            n_target: 50,
            n_behavior: 400,
            horizon: 2.0,
            c1: 1.5,
            c2: 3.0,
            var_target: 0.7,
            second_moment_behavior: 1.3,
            eps_b: vec![0.1, 0.2, 0.3],
            eps_e: vec![0.05, 0.15, 0.1],
            eps_h: vec![0.2, 0.1, 0.4],
        }
    }

    #[test]
    fn first_term_matches_frozen_reference() {
        let inputs = BoundInputs {
            delta: 0.05,
            k_folds: 2,
            n_target: 100,
            n_behavior: 5000,
            horizon: 1.0,
            c1: 1.0,
            c2: 1.0,
            var_target: 1.0,
            second_moment_behavior: 0.0,
            eps_b: vec![0.0; 2],
            eps_e: vec![0.0; 2],
            eps_h: vec![0.0; 2],
        };
        let b = evaluate_bound(&inputs).unwrap();
        assert_abs_diff_eq!(b.terms[0], 0.318596, epsilon = 1e-6);
    }

    #[test]
    fn all_terms_recompute_independently() {
        let inputs = reference_inputs();
        let b = evaluate_bound(&inputs).unwrap();
        let log_term = (4.0f64 * 3.0 / 0.1).ln();
        assert_abs_diff_eq!(b.terms[0], (2.0 * 0.7 * log_term / 50.0).sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(
            b.terms[1],
            (2.0 * 1.3 * log_term / 400.0).sqrt(),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            b.terms[2],
            (0.1 * 0.2 + 0.2 * 0.1 + 0.3 * 0.4) / 3.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(b.terms[3], 2.0 * 2.0 * 3.0 * log_term / 50.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            b.terms[4],
            0.15 * (2.0 * 3.0 * log_term / 50.0).sqrt(),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            b.terms[5],
            4.0 * 1.5 * 3.0 * 2.0 * 3.0 * log_term / 400.0,
            epsilon = 1e-12
        );
        // max over folds of eps_b + eps_h is fold 2: 0.3 + 0.4.
        assert_abs_diff_eq!(
            b.terms[6],
            3.0 * 1.5 * 2.0 * 0.7 * (2.0 * 3.0 * log_term / 400.0).sqrt(),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(b.total, b.terms.iter().sum::<f64>(), epsilon = 1e-12);
    }

    #[test]
    fn terms_scale_at_their_advertised_rates() {
        let base = reference_inputs();
        let b1 = evaluate_bound(&base).unwrap();
        let four_m = BoundInputs { n_target: base.n_target * 4, ..base.clone() };
        let b2 = evaluate_bound(&four_m).unwrap();
        assert_abs_diff_eq!(b2.terms[0], b1.terms[0] / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(b2.terms[3], b1.terms[3] / 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(b2.terms[4], b1.terms[4] / 2.0, epsilon = 1e-12);
        let four_n = BoundInputs { n_behavior: base.n_behavior * 4, ..base.clone() };
        let b3 = evaluate_bound(&four_n).unwrap();
        assert_abs_diff_eq!(b3.terms[1], b1.terms[1] / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(b3.terms[5], b1.terms[5] / 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(b3.terms[6], b1.terms[6] / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn perfect_nuisances_leave_only_sampling_terms() {
        let inputs = BoundInputs {
            eps_b: vec![0.0; 3],
            eps_e: vec![0.0; 3],
            eps_h: vec![0.0; 3],
            ..reference_inputs()
        };
        let b = evaluate_bound(&inputs).unwrap();
        assert_eq!(b.terms[2], 0.0);
        assert_eq!(b.terms[4], 0.0);
        assert_eq!(b.terms[6], 0.0);
        assert!(b.terms[0] > 0.0 && b.terms[1] > 0.0 && b.terms[3] > 0.0 && b.terms[5] > 0.0);
    }

    #[test]
    fn bound_rejects_malformed_inputs() {
        for delta in [0.0, 1.0, -0.2, 1.7] {
            let inputs = BoundInputs { delta, ..reference_inputs() };
            assert!(matches!(
                evaluate_bound(&inputs).unwrap_err(),
                Error::InvalidConfig(_)
            ));
        }
        let inputs = BoundInputs { eps_b: vec![0.1; 2], ..reference_inputs() };
        assert!(matches!(evaluate_bound(&inputs).unwrap_err(), Error::InvalidConfig(_)));
        let inputs = BoundInputs { var_target: -0.5, ..reference_inputs() };
        assert!(matches!(evaluate_bound(&inputs).unwrap_err(), Error::InvalidConfig(_)));
        let inputs = BoundInputs { n_target: 0, ..reference_inputs() };
        assert!(matches!(evaluate_bound(&inputs).unwrap_err(), Error::InvalidConfig(_)));
    }

    #[test]
    fn shrinking_delta_inflates_the_bound() {
        let loose = evaluate_bound(&reference_inputs()).unwrap();
        let tight =
            evaluate_bound(&BoundInputs { delta: 0.01, ..reference_inputs() }).unwrap();
        assert!(tight.total > loose.total);
    }

    #[test]
    fn product_bias_matches_the_hand_case() {
        let inputs = BiasOracleInputs {
            target_probabilities: vec![0.5, 0.5],
            regression_errors: vec![vec![1.0, 2.0]],
            ratio_relatives: vec![vec![0.5, 2.0]],
        };
        assert_abs_diff_eq!(product_bias(&inputs).unwrap(), -0.75);
    }

    #[test]
    fn product_bias_vanishes_when_either_nuisance_is_perfect() {
        let perfect_regression = BiasOracleInputs {
            target_probabilities: vec![0.3, 0.7],
            regression_errors: vec![vec![0.0, 0.0]],
            ratio_relatives: vec![vec![3.0, 0.2]],
        };
        assert_eq!(product_bias(&perfect_regression).unwrap(), 0.0);
        let perfect_ratio = BiasOracleInputs {
            target_probabilities: vec![0.3, 0.7],
            regression_errors: vec![vec![5.0, -2.0]],
            ratio_relatives: vec![vec![1.0, 1.0]],
        };
        assert_eq!(product_bias(&perfect_ratio).unwrap(), 0.0);
    }

    #[test]
    fn product_bias_averages_across_folds() {
        let fold_a = BiasOracleInputs {
            target_probabilities: vec![0.5, 0.5],
            regression_errors: vec![vec![1.0, 2.0]],
            ratio_relatives: vec![vec![0.5, 2.0]],
        };
        let fold_b = BiasOracleInputs {
            target_probabilities: vec![0.5, 0.5],
            regression_errors: vec![vec![2.0, 0.0]],
            ratio_relatives: vec![vec![0.0, 1.0]],
        };
        let combined = BiasOracleInputs {
            target_probabilities: vec![0.5, 0.5],
            regression_errors: vec![vec![1.0, 2.0], vec![2.0, 0.0]],
            ratio_relatives: vec![vec![0.5, 2.0], vec![0.0, 1.0]],
        };
        let a = product_bias(&fold_a).unwrap();
        let b = product_bias(&fold_b).unwrap();
        assert_abs_diff_eq!(
            product_bias(&combined).unwrap(),
            0.5 * (a + b),
            epsilon = 1e-15
        );
    }

    #[test]
    fn product_bias_rejects_malformed_distributions() {
        let bad_mass = BiasOracleInputs {
            target_probabilities: vec![0.5, 0.4],
            regression_errors: vec![vec![1.0, 1.0]],
            ratio_relatives: vec![vec![1.0, 1.0]],
        };
        assert!(matches!(product_bias(&bad_mass).unwrap_err(), Error::InvalidConfig(_)));
        let mismatched = BiasOracleInputs {
            target_probabilities: vec![0.5, 0.5],
            regression_errors: vec![vec![1.0]],
            ratio_relatives: vec![vec![1.0, 1.0]],
        };
        assert!(matches!(product_bias(&mismatched).unwrap_err(), Error::InvalidConfig(_)));
    }

    #[test]
    fn planted_instance_has_clean_closed_forms() {
        let instance = default_planted_instance();
        assert_abs_diff_eq!(planted_true_value(&instance), 5.0, epsilon = 1e-12);
        let manual: f64 = (0..10)
            .map(|s| {
                instance.target_probs[s]
                    * instance.delta_shift[s]
                    * (1.0 - instance.ratio_scale[s])
            })
            .sum();
        assert_abs_diff_eq!(planted_exact_bias(&instance), manual, epsilon = 1e-15);
        // The identity agrees with the generic evaluator.
        let generic = product_bias(&BiasOracleInputs {
            target_probabilities: instance.target_probs.clone(),
            regression_errors: vec![instance.delta_shift.clone()],
            ratio_relatives: vec![instance.ratio_scale.clone()],
        })
        .unwrap();
        assert_abs_diff_eq!(planted_exact_bias(&instance), generic, epsilon = 1e-15);
    }

    #[test]
    fn planted_sampler_tracks_the_distributions() {
        let instance = default_planted_instance();
        let (behavior, target) = sample_planted(&instance, 20_000, 20_000, 7).unwrap();
        assert_eq!(behavior.size_n(), 20_000);
        assert_eq!(target.size_m(), 20_000);
        let mut behavior_freq = vec![0.0; 10];
        for item in &behavior.items {
            behavior_freq[item.prefix.states[0][0] as usize] += 1.0 / 20_000.0;
        }
        let mut target_freq = vec![0.0; 10];
        for prefix in &target.items {
            target_freq[prefix.states[0][0] as usize] += 1.0 / 20_000.0;
        }
        for s in 0..10 {
            assert_abs_diff_eq!(behavior_freq[s], instance.behavior_probs[s], epsilon = 0.015);
            assert_abs_diff_eq!(target_freq[s], instance.target_probs[s], epsilon = 0.015);
        }
        // Determinism per seed.
        let (b2, t2) = sample_planted(&instance, 20_000, 20_000, 7).unwrap();
        assert_eq!(behavior, b2);
        assert_eq!(target, t2);
    }

    #[test]
    fn planted_bias_shows_up_in_the_production_estimator() {
        let instance = default_planted_instance();
        let (regressor, ratio) = planted_nuisance_configs(&instance);
        let truth = planted_true_value(&instance);
        let expected_bias = planted_exact_bias(&instance);
        let n_seeds = 400;
        let mut deviations = Vec::with_capacity(n_seeds);
        for seed in 0..n_seeds {
            let (behavior, target) =
                sample_planted(&instance, 256, 256, 1000 + seed as u64).unwrap();
            let estimate = estimate_dr(
                &behavior,
                &target,
                &regressor,
                &ratio,
                2,
                seed as u64,
                false,
            )
            .unwrap();
            deviations.push(estimate.value - truth);
        }
        let mean_dev = deviations.iter().sum::<f64>() / n_seeds as f64;
        let var = deviations.iter().map(|d| (d - mean_dev) * (d - mean_dev)).sum::<f64>()
            / n_seeds as f64;
        let standard_error = (var / n_seeds as f64).sqrt();
        assert!(
            (mean_dev - expected_bias).abs() <= 4.0 * standard_error,
            "mean deviation {mean_dev:.5} vs exact bias {expected_bias:.5} (se {standard_error:.5})"
        );
    }

    #[test]
    fn audited_estimate_matches_the_production_estimator() {
        let config = CoverageConfig {
            n_behavior: 1200,
            n_target: 80,
            n_oracle_samples: 1000,
            n_seeds: 1,
            ..Default::default()
        };
        let audited = audited_dr_value(&config, 0).unwrap();
        let label = "seed-0";
        let data_cfg = ToyConfig {
            n_behavior: config.n_behavior,
            n_target: config.n_target,
            noise_omega: config.noise_omega,
            seed: rng::derive_seed(config.base_seed, &[label, "data"]),
            ..Default::default()
        };
        let behavior = toy::sample_behavior(&data_cfg).unwrap();
        let (target, _) = toy::sample_target(&data_cfg).unwrap();
        let estimate = estimate_dr(
            &behavior,
            &target,
            &RegressorConfig::Linear { features: FeatureMap::ToyQuadratic, intercept: false },
            &RatioConfig::Histogram {
                grid: BinGrid::default(),
                clip_max: 100.0,
                policy: CoveragePolicy::Lenient,
                corruption_seed: None,
            },
            config.k_folds,
            rng::derive_seed(config.base_seed, &[label, "folds"]),
            false,
        )
        .unwrap();
        assert_abs_diff_eq!(audited, estimate.value, epsilon = 1e-12);
    }

    #[test]
    fn coverage_audit_produces_complete_records() {
        let config = CoverageConfig {
            n_behavior: 1500,
            n_target: 60,
            n_seeds: 8,
            n_oracle_samples: 4000,
            ..Default::default()
        };
        let records = empirical_bound_coverage(&config).unwrap();
        assert_eq!(records.len(), 8);
        for r in &records {
            assert!(r.terms.iter().all(|t| t.is_finite() && *t >= 0.0));
            assert!(r.total > 0.0);
            assert!(r.empirical_error.is_finite());
            assert_eq!(r.covered, r.empirical_error <= r.total);
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("coverage.csv");
        write_coverage_csv(&records, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 9);
        assert!(text.starts_with("term_1,term_2,"));
        let fraction = coverage_fraction(&records);
        assert!((0.0..=1.0).contains(&fraction));
    }
}
