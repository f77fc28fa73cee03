//! Policy-value estimators.
//!
//! The central estimators regress observed full-horizon returns on
//! short-horizon prefixes and average the fitted surrogate over target
//! prefixes:
//!
//! * `soft` — unweighted regression on behavior data;
//! * `w-soft` — the same regression under density-ratio weights, aiming the
//!   fit at the target prefix distribution;
//! * `dr-soft` / `dr-w-soft` — cross-fitted doubly robust correction: each
//!   fold evaluates a ratio-weighted residual term on held-out behavior
//!   data plus the surrogate mean on held-out target data, with nuisances
//!   trained strictly on the complements of both datasets.
//!
//! Baselines for comparison: `lope` (one-step action-aware correction),
//! `model-based` (empirical transition kernel plus dynamic programming),
//! `extrap-avg` / `extrap-last` (reward extrapolation), and `mc`
//! (full-horizon Monte Carlo, which needs labeled target data and so only
//! exists inside benchmarks).
//!
//! Every estimator returns a [`ValueEstimate`]; when per-fold values or
//! per-trajectory predictions are present, the reported value is exactly
//! their mean.

use std::collections::BTreeMap;

use crate::data::{
    discounted_return, make_fold_plan, BehaviorDataset, LabeledTrajectory, TargetDataset,
    Trajectory,
};
use crate::density_ratio::{
    corrupt_density_denominator, fit_classifier_ratio, fit_histogram_ratio, fit_tabular_ratio,
    BinGrid, CoveragePolicy, DensityRatioModel, OracleRatio,
};
use crate::error::{Error, Result};
use crate::regression::{
    fit_design_rows, fit_least_squares_opts, fit_tabular, FeatureMap, LinearModel,
    TabularModel, TrajectoryKey,
};
use crate::rng;
use crate::sepsis::Policy;
use crate::toy;

/// Cross-fitting fold count used by the benchmarks.
pub const DEFAULT_K_FOLDS: usize = 2;

/// Known value functions usable in place of a fitted regressor, for audits
/// and planted-nuisance experiments.
#[derive(Debug, Clone, PartialEq)]
pub enum OracleValue {
    /// The exact return of the two-state synthetic domain.
    ToyTrueReturn,
    /// Explicit values per discrete trajectory key, with a default for
    /// unlisted keys. Action-aware estimators append the action id to the
    /// key before lookup.
    Table { key: TrajectoryKey, rows: BTreeMap<Vec<u64>, f64>, default: f64 },
}

impl OracleValue {
    fn evaluate(&self, prefix: &Trajectory) -> Result<f64> {
        match self {
            OracleValue::ToyTrueReturn => {
                let flat = prefix.flat_states();
                if flat.len() != 2 {
                    return Err(Error::InvalidConfig(format!(
                        "toy return oracle expects 2 coordinates, got {}",
                        flat.len()
                    )));
                }
                Ok(toy::true_return(flat[0], flat[1]))
            }
            OracleValue::Table { key, rows, default } => {
                Ok(rows.get(&key.key_of(prefix)?).copied().unwrap_or(*default))
            }
        }
    }
}

/// How to model the return surrogate `f̂`.
#[derive(Debug, Clone, PartialEq)]
pub enum RegressorConfig {
    /// Least squares on a fixed feature basis.
    Linear { features: FeatureMap, intercept: bool },
    /// Per-key mean returns over a discrete trajectory key.
    Tabular { key: TrajectoryKey },
    /// A known function; fitting is a no-op.
    Oracle(OracleValue),
}

/// How to model the density ratio `ĥ`.
///
/// Count-based variants can carry a corruption seed: after every fit
/// (including each cross-fitting fold, which derives its own sub-seed) the
/// behavior counts are perturbed with `Normal(10, 10)` noise, manufacturing
/// a deliberately misspecified ratio with correct support.
#[derive(Debug, Clone, PartialEq)]
pub enum RatioConfig {
    Histogram {
        grid: BinGrid,
        clip_max: f64,
        policy: CoveragePolicy,
        corruption_seed: Option<u64>,
    },
    Tabular {
        key: TrajectoryKey,
        clip_max: f64,
        policy: CoveragePolicy,
        corruption_seed: Option<u64>,
    },
    Classifier {
        features: FeatureMap,
        clip_max: f64,
    },
    Oracle {
        ratio: OracleRatio,
        clip_max: f64,
    },
}

/// The outcome of one estimator run.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueEstimate {
    pub value: f64,
    pub estimator_id: String,
    /// Cross-fitted estimators report their per-fold values; the value is
    /// their mean.
    pub per_fold_values: Option<Vec<f64>>,
    /// Estimators that predict each target trajectory individually report
    /// those predictions; the value is their mean.
    pub per_trajectory_predictions: Option<Vec<f64>>,
    /// Named scalar diagnostics (mean weight, coverage, fold count, …).
    pub diagnostics: BTreeMap<String, f64>,
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

impl ValueEstimate {
    fn from_predictions(
        estimator_id: &str,
        predictions: Vec<f64>,
        diagnostics: BTreeMap<String, f64>,
    ) -> Self {
        Self {
            value: mean(&predictions),
            estimator_id: estimator_id.to_string(),
            per_fold_values: None,
            per_trajectory_predictions: Some(predictions),
            diagnostics,
        }
    }

    fn from_folds(
        estimator_id: &str,
        fold_values: Vec<f64>,
        diagnostics: BTreeMap<String, f64>,
    ) -> Self {
        Self {
            value: mean(&fold_values),
            estimator_id: estimator_id.to_string(),
            per_fold_values: Some(fold_values),
            per_trajectory_predictions: None,
            diagnostics,
        }
    }

    fn scalar(estimator_id: &str, value: f64, diagnostics: BTreeMap<String, f64>) -> Self {
        Self {
            value,
            estimator_id: estimator_id.to_string(),
            per_fold_values: None,
            per_trajectory_predictions: None,
            diagnostics,
        }
    }
}

/// A fitted return surrogate.
enum FittedRegressor {
    Linear(LinearModel),
    Tabular(TabularModel),
    Oracle(OracleValue),
}

impl FittedRegressor {
    fn predict(&self, prefix: &Trajectory) -> Result<f64> {
        match self {
            FittedRegressor::Linear(m) => m.predict(prefix),
            FittedRegressor::Tabular(m) => m.predict(prefix),
            FittedRegressor::Oracle(v) => v.evaluate(prefix),
        }
    }
}

fn fit_regressor(
    config: &RegressorConfig,
    data: &BehaviorDataset,
    weights: Option<&[f64]>,
) -> Result<FittedRegressor> {
    match config {
        RegressorConfig::Linear { features, intercept } => Ok(FittedRegressor::Linear(
            fit_least_squares_opts(data, *features, weights, *intercept)?,
        )),
        RegressorConfig::Tabular { key } => {
            Ok(FittedRegressor::Tabular(fit_tabular(data, key.clone(), weights)?))
        }
        RegressorConfig::Oracle(v) => Ok(FittedRegressor::Oracle(v.clone())),
    }
}

fn fit_ratio(
    config: &RatioConfig,
    behavior: &BehaviorDataset,
    target: &TargetDataset,
    fold_tag: &str,
) -> Result<DensityRatioModel> {
    let corrupted = |model: DensityRatioModel, seed: &Option<u64>| -> Result<DensityRatioModel> {
        match seed {
            None => Ok(model),
            Some(s) => corrupt_density_denominator(
                &model,
                rng::derive_seed(*s, &["ratio-corruption", fold_tag]),
            ),
        }
    };
    match config {
        RatioConfig::Histogram { grid, clip_max, policy, corruption_seed } => corrupted(
            fit_histogram_ratio(behavior, target, *grid, *clip_max, *policy)?,
            corruption_seed,
        ),
        RatioConfig::Tabular { key, clip_max, policy, corruption_seed } => corrupted(
            fit_tabular_ratio(behavior, target, key.clone(), *clip_max, *policy)?,
            corruption_seed,
        ),
        RatioConfig::Classifier { features, clip_max } => {
            fit_classifier_ratio(behavior, target, *features, *clip_max)
        }
        RatioConfig::Oracle { ratio, clip_max } => {
            Ok(DensityRatioModel::from_oracle(ratio.clone(), *clip_max))
        }
    }
}

/// Unweighted regression estimate: fit `f̂` on all behavior data, average
/// its predictions over the target prefixes.
pub fn estimate_soft(
    behavior: &BehaviorDataset,
    target: &TargetDataset,
    regressor: &RegressorConfig,
) -> Result<ValueEstimate> {
    let model = fit_regressor(regressor, behavior, None)?;
    let predictions =
        target.items.iter().map(|t| model.predict(t)).collect::<Result<Vec<_>>>()?;
    Ok(ValueEstimate::from_predictions("soft", predictions, BTreeMap::new()))
}

fn ratio_weights(model: &DensityRatioModel, behavior: &BehaviorDataset) -> Result<Vec<f64>> {
    behavior.items.iter().map(|item| model.ratio_of(&item.prefix)).collect()
}

fn weight_diagnostics(
    weights: &[f64],
    model: &DensityRatioModel,
    diagnostics: &mut BTreeMap<String, f64>,
) {
    diagnostics.insert("mean_weight".into(), mean(weights));
    diagnostics.insert("coverage".into(), model.coverage.fraction());
    let clipped =
        weights.iter().filter(|&&w| w >= model.clip_max * (1.0 - 1e-12)).count() as f64;
    diagnostics.insert("clip_rate".into(), clipped / weights.len() as f64);
}

/// Ratio-weighted regression estimate: fit `ĥ` on the full datasets, fit
/// `f̂` under weights `ĥ(τ_i)`, average predictions over target prefixes.
pub fn estimate_w_soft(
    behavior: &BehaviorDataset,
    target: &TargetDataset,
    regressor: &RegressorConfig,
    ratio: &RatioConfig,
) -> Result<ValueEstimate> {
    let ratio_model = fit_ratio(ratio, behavior, target, "full")?;
    let weights = ratio_weights(&ratio_model, behavior)?;
    if weights.iter().sum::<f64>() <= 0.0 {
        return Err(Error::InsufficientData(
            "all importance weights are zero; the weighted objective is undefined".into(),
        ));
    }
    let model = fit_regressor(regressor, behavior, Some(&weights))?;
    let predictions =
        target.items.iter().map(|t| model.predict(t)).collect::<Result<Vec<_>>>()?;
    let mut diagnostics = BTreeMap::new();
    weight_diagnostics(&weights, &ratio_model, &mut diagnostics);
    Ok(ValueEstimate::from_predictions("w-soft", predictions, diagnostics))
}

/// One fold's doubly robust value: the ratio-weighted residual mean over
/// held-out behavior data plus the surrogate mean over held-out target
/// prefixes, with both nuisance models supplied by the caller.
fn dr_fold_value(
    eval_behavior: &[&LabeledTrajectory],
    eval_target: &[&Trajectory],
    ratio: &DensityRatioModel,
    regressor: &FittedRegressor,
) -> Result<f64> {
    let mut correction = 0.0;
    for item in eval_behavior {
        let weight = ratio.ratio_of(&item.prefix)?;
        correction += weight * (item.full_return - regressor.predict(&item.prefix)?);
    }
    correction /= eval_behavior.len() as f64;
    let mut baseline = 0.0;
    for prefix in eval_target {
        baseline += regressor.predict(prefix)?;
    }
    baseline /= eval_target.len() as f64;
    Ok(correction + baseline)
}

fn name_fold<T>(result: Result<T>, fold: usize) -> Result<T> {
    result.map_err(|e| match e {
        Error::InsufficientData(msg) => {
            Error::InsufficientData(format!("fold {fold}: {msg}"))
        }
        other => other,
    })
}

/// Cross-fitted doubly robust estimate.
///
/// The fold plan splits both datasets; fold `k`'s nuisances (`ĥ^(k)` and
/// `f̂^(k)`, the latter weighted when `weighted` is set) are fit on the
/// complements of fold `k` in *both* datasets, then evaluated on the fold
/// itself. The reported value is the mean of the per-fold values.
pub fn estimate_dr(
    behavior: &BehaviorDataset,
    target: &TargetDataset,
    regressor: &RegressorConfig,
    ratio: &RatioConfig,
    k: usize,
    seed: u64,
    weighted: bool,
) -> Result<ValueEstimate> {
    if k < 2 {
        return Err(Error::InvalidConfig(format!(
            "cross-fitting needs at least 2 folds, got {k}"
        )));
    }
    let plan = make_fold_plan(behavior.size_n(), target.size_m(), k, seed)?;
    let mut fold_values = Vec::with_capacity(k);
    let mut weight_total = 0.0;
    let mut weight_count = 0usize;
    let mut coverage_total = 0.0;
    for fold in 0..k {
        let train_b = BehaviorDataset::new(
            plan.behavior_out(fold).iter().map(|&i| behavior.items[i].clone()).collect(),
        )?;
        let train_e = TargetDataset::new(
            plan.target_out(fold).iter().map(|&i| target.items[i].clone()).collect(),
        )?;
        let ratio_model =
            name_fold(fit_ratio(ratio, &train_b, &train_e, &format!("fold-{fold}")), fold)?;
        let weights = if weighted {
            let w = ratio_weights(&ratio_model, &train_b)?;
            if w.iter().sum::<f64>() <= 0.0 {
                return Err(Error::InsufficientData(format!(
                    "fold {fold}: all importance weights are zero"
                )));
            }
            Some(w)
        } else {
            None
        };
        let regressor_model =
            name_fold(fit_regressor(regressor, &train_b, weights.as_deref()), fold)?;

        let eval_behavior: Vec<&LabeledTrajectory> =
            plan.behavior_in(fold).iter().map(|&i| &behavior.items[i]).collect();
        let eval_target: Vec<&Trajectory> =
            plan.target_in(fold).iter().map(|&i| &target.items[i]).collect();
        for item in &eval_behavior {
            weight_total += ratio_model.ratio_of(&item.prefix)?;
        }
        weight_count += eval_behavior.len();
        coverage_total += ratio_model.coverage.fraction();
        fold_values.push(dr_fold_value(
            &eval_behavior,
            &eval_target,
            &ratio_model,
            &regressor_model,
        )?);
    }
    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("k_folds".into(), k as f64);
    diagnostics.insert("mean_weight".into(), weight_total / weight_count as f64);
    diagnostics.insert("coverage".into(), coverage_total / k as f64);
    let id = if weighted { "dr-w-soft" } else { "dr-soft" };
    Ok(ValueEstimate::from_folds(id, fold_values, diagnostics))
}

/// Full-horizon Monte Carlo: the mean of observed returns. Only available
/// when target-policy returns were actually collected, so benchmarks use it
/// as the "unlimited logging" reference point.
pub fn estimate_mc(target_full: &BehaviorDataset) -> Result<ValueEstimate> {
    Ok(ValueEstimate::from_predictions("mc", target_full.returns(), BTreeMap::new()))
}

/// A fitted action-aware surrogate `f̂(τ, a)` for the one-step corrected
/// baseline.
enum LopeRegressor {
    Tabular { key: TrajectoryKey, table: BTreeMap<Vec<u64>, f64>, default: f64 },
    /// Coefficient layout: prefix features, then one per action (per-action
    /// intercepts; the one-hot block spans the constant, so no extra
    /// intercept column).
    Linear { features: FeatureMap, n_actions: usize, theta: Vec<f64> },
    Oracle(OracleValue),
}

impl LopeRegressor {
    fn predict(&self, prefix: &Trajectory, action: usize) -> Result<f64> {
        match self {
            LopeRegressor::Tabular { key, table, default } => {
                let mut k = key.key_of(prefix)?;
                k.push(action as u64);
                Ok(table.get(&k).copied().unwrap_or(*default))
            }
            LopeRegressor::Linear { features, n_actions, theta } => {
                let phi = features.apply(&prefix.flat_states())?;
                if action >= *n_actions {
                    return Err(Error::InvalidConfig(format!(
                        "action {action} outside the {n_actions}-action model"
                    )));
                }
                Ok(phi.iter().zip(theta).map(|(x, w)| x * w).sum::<f64>()
                    + theta[features.dim() + action])
            }
            // Table oracles are action-keyed (prefix key, action id); the
            // toy return oracle has no action concept and ignores it.
            LopeRegressor::Oracle(OracleValue::Table { key, rows, default }) => {
                let mut k = key.key_of(prefix)?;
                k.push(action as u64);
                Ok(rows.get(&k).copied().unwrap_or(*default))
            }
            LopeRegressor::Oracle(v) => v.evaluate(prefix),
        }
    }
}

fn fit_lope_regressor(
    config: &RegressorConfig,
    behavior: &BehaviorDataset,
    actions: &[usize],
    n_actions: usize,
) -> Result<LopeRegressor> {
    match config {
        RegressorConfig::Oracle(v) => Ok(LopeRegressor::Oracle(v.clone())),
        RegressorConfig::Tabular { key } => {
            let mut sums: BTreeMap<Vec<u64>, (f64, f64)> = BTreeMap::new();
            let mut global = (0.0, 0.0);
            for (item, &a) in behavior.items.iter().zip(actions) {
                let mut k = key.key_of(&item.prefix)?;
                k.push(a as u64);
                let entry = sums.entry(k).or_insert((0.0, 0.0));
                entry.0 += item.full_return;
                entry.1 += 1.0;
                global.0 += item.full_return;
                global.1 += 1.0;
            }
            let table = sums.into_iter().map(|(k, (s, c))| (k, s / c)).collect();
            Ok(LopeRegressor::Tabular {
                key: key.clone(),
                table,
                default: global.0 / global.1,
            })
        }
        RegressorConfig::Linear { features, .. } => {
            let mut rows = Vec::with_capacity(behavior.size_n());
            let mut targets = Vec::with_capacity(behavior.size_n());
            for (item, &a) in behavior.items.iter().zip(actions) {
                let mut row = features.apply(&item.prefix.flat_states())?;
                let mut one_hot = vec![0.0; n_actions];
                if a >= n_actions {
                    return Err(Error::InvalidConfig(format!(
                        "recorded action {a} outside the {n_actions}-action target space"
                    )));
                }
                one_hot[a] = 1.0;
                row.extend(one_hot);
                rows.push(row);
                targets.push(item.full_return);
            }
            let theta = fit_design_rows(&rows, &targets, None, features.name())?;
            Ok(LopeRegressor::Linear { features: *features, n_actions, theta })
        }
    }
}

/// One-step corrected baseline over behavior data:
/// `(1/N) Σ [ ĥ(τ)(G − f̂(τ, a)) + Σ_{a′} π_e(a′|τ) f̂(τ, a′) ]`,
/// where `a` is the recorded action at the prefix's final state and the
/// expectation over `a′` is computed exactly from the target policy's
/// finite action distribution at that state.
pub fn estimate_lope(
    behavior: &BehaviorDataset,
    target: &TargetDataset,
    regressor: &RegressorConfig,
    ratio: &RatioConfig,
    target_policy: &Policy,
) -> Result<ValueEstimate> {
    let actions: Vec<usize> = behavior
        .items
        .iter()
        .enumerate()
        .map(|(i, item)| {
            item.prefix.next_action().ok_or_else(|| {
                Error::InvalidConfig(format!("behavior item {i} lacks action annotations"))
            })
        })
        .collect::<Result<_>>()?;
    let ratio_model = fit_ratio(ratio, behavior, target, "full")?;
    let model =
        fit_lope_regressor(regressor, behavior, &actions, target_policy.n_actions())?;

    let mut total = 0.0;
    let mut weights = Vec::with_capacity(behavior.size_n());
    for (item, &a) in behavior.items.iter().zip(&actions) {
        let weight = ratio_model.ratio_of(&item.prefix)?;
        weights.push(weight);
        let state = *item.prefix.state_ids()?.last().expect("prefix is nonempty") as usize;
        let row = target_policy.rows.get(state).ok_or_else(|| {
            Error::InvalidConfig(format!("state {state} outside the target policy"))
        })?;
        let mut expectation = 0.0;
        for (a_next, &p) in row.iter().enumerate() {
            if p > 0.0 {
                expectation += p * model.predict(&item.prefix, a_next)?;
            }
        }
        total += weight * (item.full_return - model.predict(&item.prefix, a)?) + expectation;
    }
    let mut diagnostics = BTreeMap::new();
    weight_diagnostics(&weights, &ratio_model, &mut diagnostics);
    Ok(ValueEstimate::scalar("lope", total / behavior.size_n() as f64, diagnostics))
}

/// Model-based baseline: estimate `p̂(s′|s,a)` by empirical frequencies
/// from the target prefixes, fall back to a uniform row over all states for
/// unseen `(s,a)` pairs, run exact backward induction under the target
/// policy with the known reward and terminal tables, and average the
/// resulting start values over the observed initial states.
pub fn estimate_model_based(
    target: &TargetDataset,
    target_policy: &Policy,
    rewards: &[f64],
    terminal: &[bool],
    horizon: usize,
    discount: f64,
) -> Result<ValueEstimate> {
    let n_states = rewards.len();
    if terminal.len() != n_states || target_policy.rows.len() != n_states {
        return Err(Error::InvalidConfig(
            "reward, terminal, and policy tables must agree on the state count".into(),
        ));
    }
    let mut counts: BTreeMap<(usize, usize), BTreeMap<usize, f64>> = BTreeMap::new();
    let mut initial_states = Vec::with_capacity(target.size_m());
    for item in &target.items {
        if item
            .states
            .iter()
            .any(|s| s.len() != 1 || (s[0] - s[0].round()).abs() > 1e-9)
        {
            return Err(Error::UnsupportedDomain(
                "model-based estimation needs a finite discrete state space".into(),
            ));
        }
        let ids = item.state_ids()?;
        let actions = item.actions.as_ref().ok_or_else(|| {
            Error::InvalidConfig("model-based estimation needs action annotations".into())
        })?;
        if ids.iter().any(|&s| s as usize >= n_states) {
            return Err(Error::InvalidConfig("state id outside the table".into()));
        }
        initial_states.push(ids[0] as usize);
        for t in 0..ids.len() - 1 {
            *counts
                .entry((ids[t] as usize, actions[t]))
                .or_default()
                .entry(ids[t + 1] as usize)
                .or_insert(0.0) += 1.0;
        }
    }

    let enter_value = |s2: usize, values: &[f64]| {
        rewards[s2] + discount * if terminal[s2] { 0.0 } else { values[s2] }
    };
    let mut values = vec![0.0; n_states];
    for _ in 0..horizon {
        // The uniform-fallback expectation for a pair the data never saw.
        let fallback =
            (0..n_states).map(|s2| enter_value(s2, &values)).sum::<f64>() / n_states as f64;
        let mut next = vec![0.0; n_states];
        for s in 0..n_states {
            if terminal[s] {
                continue;
            }
            let mut total = 0.0;
            for (a, &pa) in target_policy.rows[s].iter().enumerate() {
                if pa <= 0.0 {
                    continue;
                }
                let q = match counts.get(&(s, a)) {
                    None => fallback,
                    Some(row) => {
                        let seen: f64 = row.values().sum();
                        row.iter().map(|(&s2, &c)| c * enter_value(s2, &values)).sum::<f64>()
                            / seen
                    }
                };
                total += pa * q;
            }
            next[s] = total;
        }
        values = next;
    }
    let value =
        initial_states.iter().map(|&s| values[s]).sum::<f64>() / initial_states.len() as f64;
    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("observed_pairs".into(), counts.len() as f64);
    Ok(ValueEstimate::scalar("model-based", value, diagnostics))
}

/// Reward-extrapolation flavor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtrapolationMode {
    Average,
    Last,
}

/// Reward extrapolation: episodes finished inside the recorded window keep
/// their realized discounted return (their outcome is known exactly);
/// unfinished episodes project the average or last recorded reward across
/// the full horizon, undiscounted, defaulting to zero when no reward was
/// recorded.
pub fn estimate_extrapolation(
    target: &TargetDataset,
    mode: ExtrapolationMode,
    horizon: usize,
    discount: f64,
) -> Result<ValueEstimate> {
    let predictions = target
        .items
        .iter()
        .map(|t| {
            if t.terminated {
                discounted_return(&t.rewards, discount)
            } else if t.rewards.is_empty() {
                0.0
            } else {
                let basis = match mode {
                    ExtrapolationMode::Average => mean(&t.rewards),
                    ExtrapolationMode::Last => *t.rewards.last().unwrap(),
                };
                basis * horizon as f64
            }
        })
        .collect();
    let id = match mode {
        ExtrapolationMode::Average => "extrap-avg",
        ExtrapolationMode::Last => "extrap-last",
    };
    Ok(ValueEstimate::from_predictions(id, predictions, BTreeMap::new()))
}
