//! Density-ratio models: weight functions `ĥ(τ) ≈ p_target(τ)/p_behavior(τ)`
//! over trajectory prefixes.
//!
//! Four backends share one evaluation interface:
//!
//! * **Histogram** — joint equal-width binning of the flattened prefix
//!   coordinates; the ratio in a cell is the target frequency over the
//!   behavior frequency.
//! * **Tabular** — exact counts per discrete trajectory key; on finite
//!   domains this is the histogram in the limit of perfectly resolving bins.
//! * **Classifier** — logistic regression separating target from behavior
//!   prefixes; the odds, rescaled by the dataset-size prior, estimate the
//!   ratio.
//! * **Oracle** — a known ratio supplied directly, for audits and planted
//!   experiments.
//!
//! All ratios are clipped to `[0, clip_max]`. Regions the target policy
//! visits but the behavior data never covers are handled per
//! [`CoveragePolicy`]: `Strict` refuses to fit, `Lenient` assigns the clip
//! ceiling and records the deficit in the model's [`CoverageReport`].

use std::collections::BTreeMap;
use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::data::{BehaviorDataset, TargetDataset, Trajectory};
use crate::error::{Error, Result};
use crate::regression::{FeatureMap, TrajectoryKey};
use crate::rng;
use crate::toy;

/// Default ratio ceiling used throughout the benchmarks.
pub const DEFAULT_CLIP_MAX: f64 = 100.0;

/// Iteration cap for the classifier's gradient descent.
pub const CLASSIFIER_MAX_ITERATIONS: usize = 10_000;

/// Gradient-norm stopping tolerance for the classifier.
pub const CLASSIFIER_GRADIENT_TOLERANCE: f64 = 1e-8;

/// How to treat target mass in regions with zero behavior counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoveragePolicy {
    /// Refuse to fit: any uncovered target mass is a [`Error::CoverageViolation`].
    Strict,
    /// Fit anyway: uncovered regions evaluate to `clip_max` and the deficit
    /// is reported in the model's [`CoverageReport`].
    Lenient,
}

/// Support accounting gathered while fitting a count-based ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CoverageReport {
    /// Number of target prefixes seen by the fit.
    pub target_total: usize,
    /// Target prefixes that landed in cells with zero behavior count.
    pub target_uncovered: usize,
    /// Cells carrying target mass but no behavior mass.
    pub violating_cells: usize,
    /// Cells carrying any target mass.
    pub occupied_target_cells: usize,
}

impl CoverageReport {
    /// Fraction of target prefixes inside behavior-supported cells.
    pub fn fraction(&self) -> f64 {
        if self.target_total == 0 {
            1.0
        } else {
            1.0 - self.target_uncovered as f64 / self.target_total as f64
        }
    }

    fn full(target_total: usize) -> Self {
        Self { target_total, ..Default::default() }
    }
}

/// Equal-width binning grid applied independently to every coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinGrid {
    pub bins_per_dim: usize,
    pub low: f64,
    pub high: f64,
}

impl Default for BinGrid {
    /// The benchmark grid: 50 bins per coordinate over `[-0.5, 2.0]`.
    fn default() -> Self {
        Self { bins_per_dim: 50, low: -0.5, high: 2.0 }
    }
}

impl BinGrid {
    pub fn new(bins_per_dim: usize, low: f64, high: f64) -> Result<Self> {
        if bins_per_dim == 0 {
            return Err(Error::InvalidConfig("bin grid needs at least one bin".into()));
        }
        if !(low < high) || !low.is_finite() || !high.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "bin grid range [{low}, {high}] is not a finite nonempty interval"
            )));
        }
        Ok(Self { bins_per_dim, low, high })
    }

    /// Bin index of a single coordinate; values outside the range clamp to
    /// the edge bins, identically at fit and evaluation time.
    pub fn bin_of(&self, x: f64) -> usize {
        let width = (self.high - self.low) / self.bins_per_dim as f64;
        let raw = ((x - self.low) / width).floor();
        raw.clamp(0.0, (self.bins_per_dim - 1) as f64) as usize
    }

    /// Per-coordinate bin indices of a flattened prefix.
    pub fn multi_index(&self, point: &[f64]) -> Vec<usize> {
        point.iter().map(|&x| self.bin_of(x)).collect()
    }

    fn linear_index(&self, multi: &[usize]) -> usize {
        multi.iter().fold(0, |acc, &i| acc * self.bins_per_dim + i)
    }

    fn cell_count(&self, dims: usize) -> usize {
        self.bins_per_dim.pow(dims as u32)
    }
}

/// Known ratio functions usable as oracles.
#[derive(Debug, Clone, PartialEq)]
pub enum OracleRatio {
    /// The closed-form ratio of the two-state synthetic domain.
    ToyAnalytic,
    /// An explicit ratio per discrete trajectory key, with a default for
    /// unlisted keys.
    Table { key: TrajectoryKey, rows: BTreeMap<Vec<u64>, f64>, default: f64 },
}

impl OracleRatio {
    fn evaluate(&self, prefix: &Trajectory) -> Result<f64> {
        match self {
            OracleRatio::ToyAnalytic => {
                let flat = prefix.flat_states();
                if flat.len() != 2 {
                    return Err(Error::InvalidConfig(format!(
                        "toy analytic ratio expects 2 coordinates, got {}",
                        flat.len()
                    )));
                }
                Ok(toy::analytic_density_ratio(flat[0], flat[1]))
            }
            OracleRatio::Table { key, rows, default } => {
                Ok(*rows.get(&key.key_of(prefix)?).unwrap_or(default))
            }
        }
    }
}

/// The fitted function behind a [`DensityRatioModel`].
#[derive(Debug, Clone, PartialEq)]
pub enum RatioFn {
    Histogram {
        grid: BinGrid,
        dims: usize,
        /// Behavior counts per cell; fractional after denominator corruption.
        count_b: Vec<f64>,
        count_e: Vec<f64>,
        ratio: Vec<f64>,
    },
    Tabular {
        key: TrajectoryKey,
        /// Per-key `(behavior count, target count, clipped ratio)`.
        rows: BTreeMap<Vec<u64>, (f64, f64, f64)>,
    },
    Classifier {
        features: FeatureMap,
        coefficients: Vec<f64>,
        intercept: f64,
        /// `N/M`, correcting the classifier odds for unequal dataset sizes.
        prior_ratio: f64,
    },
    Oracle(OracleRatio),
}

/// A fitted density-ratio model: a weight function with a clip ceiling and
/// coverage accounting.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityRatioModel {
    pub kind: RatioFn,
    pub clip_max: f64,
    pub coverage: CoverageReport,
}

impl DensityRatioModel {
    /// Evaluates the clipped ratio at a trajectory prefix. Always finite and
    /// in `[0, clip_max]`.
    pub fn ratio_of(&self, prefix: &Trajectory) -> Result<f64> {
        let raw = match &self.kind {
            RatioFn::Histogram { grid, dims, ratio, .. } => {
                let flat = prefix.flat_states();
                if flat.len() != *dims {
                    return Err(Error::InvalidConfig(format!(
                        "histogram ratio fitted on {dims} coordinates, got {}",
                        flat.len()
                    )));
                }
                ratio[grid.linear_index(&grid.multi_index(&flat))]
            }
            RatioFn::Tabular { key, rows } => {
                rows.get(&key.key_of(prefix)?).map_or(0.0, |&(_, _, r)| r)
            }
            RatioFn::Classifier { features, coefficients, intercept, prior_ratio } => {
                let phi = features.apply(&prefix.flat_states())?;
                let logit: f64 =
                    intercept + phi.iter().zip(coefficients).map(|(x, w)| x * w).sum::<f64>();
                let p = sigmoid(logit);
                if p >= 1.0 {
                    f64::INFINITY
                } else {
                    p / (1.0 - p) * prior_ratio
                }
            }
            RatioFn::Oracle(oracle) => oracle.evaluate(prefix)?,
        };
        Ok(raw.clamp(0.0, self.clip_max))
    }

    /// Wraps a known ratio function as a model.
    pub fn from_oracle(oracle: OracleRatio, clip_max: f64) -> Self {
        Self { kind: RatioFn::Oracle(oracle), clip_max, coverage: CoverageReport::full(0) }
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn validate_clip(clip_max: f64) -> Result<()> {
    if !(clip_max > 0.0) || !clip_max.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "ratio clip ceiling must be positive and finite, got {clip_max}"
        )));
    }
    Ok(())
}

/// Turns per-cell counts into clipped frequency ratios, applying the
/// coverage policy to cells with target mass but no behavior mass.
///
/// Returns the ratios plus the coverage report. `first_violation` feeds the
/// strict-mode error with a human-readable cell identifier.
fn ratios_from_counts(
    count_b: &[f64],
    count_e: &[f64],
    n_b: f64,
    n_e: f64,
    clip_max: f64,
    policy: CoveragePolicy,
    describe_cell: impl Fn(usize) -> Vec<usize>,
) -> Result<(Vec<f64>, CoverageReport)> {
    let mut coverage = CoverageReport { target_total: n_e as usize, ..Default::default() };
    let mut first_violation = None;
    let mut ratios = vec![0.0; count_b.len()];
    for i in 0..count_b.len() {
        if count_e[i] <= 0.0 {
            continue; // no target mass: the ratio there is zero
        }
        coverage.occupied_target_cells += 1;
        if count_b[i] <= 0.0 {
            coverage.violating_cells += 1;
            coverage.target_uncovered += count_e[i] as usize;
            first_violation.get_or_insert_with(|| describe_cell(i));
            ratios[i] = clip_max;
        } else {
            ratios[i] = ((count_e[i] / n_e) / (count_b[i] / n_b)).min(clip_max);
        }
    }
    if policy == CoveragePolicy::Strict {
        if let Some(first_bin) = first_violation {
            return Err(Error::CoverageViolation {
                violations: coverage.violating_cells,
                total: coverage.occupied_target_cells,
                first_bin,
            });
        }
    }
    Ok((ratios, coverage))
}

/// Fits a joint-histogram ratio over the flattened prefix coordinates.
///
/// Every trajectory must flatten to the same number of coordinates; the
/// grid applies per coordinate, so a 2-coordinate prefix under the default
/// grid yields 50×50 cells. The cell ratio is
/// `(count_e / m) / (count_b / n)`, clipped.
pub fn fit_histogram_ratio(
    behavior: &BehaviorDataset,
    target: &TargetDataset,
    grid: BinGrid,
    clip_max: f64,
    policy: CoveragePolicy,
) -> Result<DensityRatioModel> {
    validate_clip(clip_max)?;
    BinGrid::new(grid.bins_per_dim, grid.low, grid.high)?;
    if behavior.size_n() == 0 || target.size_m() == 0 {
        return Err(Error::InsufficientData(
            "histogram ratio needs nonempty behavior and target datasets".into(),
        ));
    }
    let dims = behavior.items[0].prefix.flat_states().len();
    let mut count_b = vec![0.0; grid.cell_count(dims)];
    let mut count_e = vec![0.0; grid.cell_count(dims)];
    let tally = |counts: &mut Vec<f64>, prefix: &Trajectory| -> Result<()> {
        let flat = prefix.flat_states();
        if flat.len() != dims {
            return Err(Error::InvalidConfig(format!(
                "histogram ratio needs a fixed prefix width: saw {dims} and {} coordinates",
                flat.len()
            )));
        }
        counts[grid.linear_index(&grid.multi_index(&flat))] += 1.0;
        Ok(())
    };
    for item in &behavior.items {
        tally(&mut count_b, &item.prefix)?;
    }
    for prefix in &target.items {
        tally(&mut count_e, prefix)?;
    }
    let (ratio, coverage) = ratios_from_counts(
        &count_b,
        &count_e,
        behavior.size_n() as f64,
        target.size_m() as f64,
        clip_max,
        policy,
        |i| unflatten_cell(i, grid.bins_per_dim, dims),
    )?;
    Ok(DensityRatioModel {
        kind: RatioFn::Histogram { grid, dims, count_b, count_e, ratio },
        clip_max,
        coverage,
    })
}

fn unflatten_cell(mut linear: usize, bins: usize, dims: usize) -> Vec<usize> {
    let mut multi = vec![0; dims];
    for d in (0..dims).rev() {
        multi[d] = linear % bins;
        linear /= bins;
    }
    multi
}

/// Fits an exact count ratio per discrete trajectory key.
///
/// Keys absent from both datasets evaluate to zero. On finite domains with
/// full support this ratio self-normalizes: the behavior-sample mean of the
/// fitted weights is exactly one.
pub fn fit_tabular_ratio(
    behavior: &BehaviorDataset,
    target: &TargetDataset,
    key: TrajectoryKey,
    clip_max: f64,
    policy: CoveragePolicy,
) -> Result<DensityRatioModel> {
    validate_clip(clip_max)?;
    if behavior.size_n() == 0 || target.size_m() == 0 {
        return Err(Error::InsufficientData(
            "tabular ratio needs nonempty behavior and target datasets".into(),
        ));
    }
    let mut counts: BTreeMap<Vec<u64>, (f64, f64)> = BTreeMap::new();
    for item in &behavior.items {
        counts.entry(key.key_of(&item.prefix)?).or_insert((0.0, 0.0)).0 += 1.0;
    }
    for prefix in &target.items {
        counts.entry(key.key_of(prefix)?).or_insert((0.0, 0.0)).1 += 1.0;
    }
    let ordered: Vec<(&Vec<u64>, &(f64, f64))> = counts.iter().collect();
    let count_b: Vec<f64> = ordered.iter().map(|(_, c)| c.0).collect();
    let count_e: Vec<f64> = ordered.iter().map(|(_, c)| c.1).collect();
    let (ratios, coverage) = ratios_from_counts(
        &count_b,
        &count_e,
        behavior.size_n() as f64,
        target.size_m() as f64,
        clip_max,
        policy,
        // Identify a violating key by its components, cast for display.
        |i| ordered[i].0.iter().map(|&k| k as usize).collect(),
    )?;
    let rows = ordered
        .iter()
        .enumerate()
        .map(|(i, (k, _))| ((*k).clone(), (count_b[i], count_e[i], ratios[i])))
        .collect();
    Ok(DensityRatioModel { kind: RatioFn::Tabular { key, rows }, clip_max, coverage })
}

/// Fits a logistic-regression ratio: the classifier separates target (label
/// 1) from behavior (label 0) prefixes, and the fitted odds times `N/M`
/// estimate the density ratio.
///
/// Training is full-batch gradient descent on the mean log-loss with a
/// fixed `1/L` step, stopping on a small gradient norm, a relative loss
/// plateau, or the iteration cap — whichever comes first. Linearly
/// separable data has its optimum at infinity, so the cap is a legitimate
/// stop there: the clipped ratio saturates long before. Only a non-finite
/// loss reports [`Error::NoConvergence`].
pub fn fit_classifier_ratio(
    behavior: &BehaviorDataset,
    target: &TargetDataset,
    features: FeatureMap,
    clip_max: f64,
) -> Result<DensityRatioModel> {
    validate_clip(clip_max)?;
    if behavior.size_n() == 0 || target.size_m() == 0 {
        return Err(Error::InsufficientData(
            "classifier ratio needs nonempty behavior and target datasets".into(),
        ));
    }
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::with_capacity(behavior.size_n() + target.size_m());
    for item in &behavior.items {
        rows.push((features.apply(&item.prefix.flat_states())?, 0.0));
    }
    for prefix in &target.items {
        rows.push((features.apply(&prefix.flat_states())?, 1.0));
    }
    let dim = features.dim();
    let n_rows = rows.len() as f64;
    // Smoothness constant of the mean log-loss: L = max ||(φ,1)||² / 4.
    let max_sq_norm = rows
        .iter()
        .map(|(phi, _)| 1.0 + phi.iter().map(|x| x * x).sum::<f64>())
        .fold(0.0, f64::max);
    let step = 4.0 / max_sq_norm;

    let mut weights = vec![0.0; dim];
    let mut intercept = 0.0;
    let mut previous_loss = f64::INFINITY;
    for iteration in 0..CLASSIFIER_MAX_ITERATIONS {
        let mut grad_w = vec![0.0; dim];
        let mut grad_b = 0.0;
        let mut loss = 0.0;
        for (phi, label) in &rows {
            let logit: f64 =
                intercept + phi.iter().zip(&weights).map(|(x, w)| x * w).sum::<f64>();
            let p = sigmoid(logit);
            // Log-loss written against the logit for numerical stability.
            loss += softplus(logit) - label * logit;
            let residual = p - label;
            grad_b += residual;
            for (g, x) in grad_w.iter_mut().zip(phi) {
                *g += residual * x;
            }
        }
        loss /= n_rows;
        if !loss.is_finite() {
            return Err(Error::NoConvergence { iterations: iteration, residual: loss });
        }
        grad_b /= n_rows;
        for g in &mut grad_w {
            *g /= n_rows;
        }
        let gradient_norm =
            (grad_b * grad_b + grad_w.iter().map(|g| g * g).sum::<f64>()).sqrt();
        if gradient_norm < CLASSIFIER_GRADIENT_TOLERANCE
            || (previous_loss - loss).abs() < 1e-12 * loss.max(1.0)
        {
            break;
        }
        previous_loss = loss;
        intercept -= step * grad_b;
        for (w, g) in weights.iter_mut().zip(&grad_w) {
            *w -= step * g;
        }
    }
    Ok(DensityRatioModel {
        kind: RatioFn::Classifier {
            features,
            coefficients: weights,
            intercept,
            prior_ratio: behavior.size_n() as f64 / target.size_m() as f64,
        },
        clip_max,
        coverage: CoverageReport::full(target.size_m()),
    })
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Mean fitted weight over the behavior sample, with a sanity flag.
///
/// A well-calibrated ratio model averages close to one over behavior data;
/// the flag trips outside `[0.8, 1.2]`. Purely diagnostic — clipping and
/// coverage gaps legitimately pull the mean down.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanWeightDiagnostic {
    pub mean_weight: f64,
    pub flagged: bool,
}

/// Computes the behavior-sample mean of the fitted weights.
pub fn mean_weight_diagnostic(
    model: &DensityRatioModel,
    behavior: &BehaviorDataset,
) -> Result<MeanWeightDiagnostic> {
    if behavior.size_n() == 0 {
        return Err(Error::InsufficientData("mean weight needs behavior data".into()));
    }
    let mut total = 0.0;
    for item in &behavior.items {
        total += model.ratio_of(&item.prefix)?;
    }
    let mean_weight = total / behavior.size_n() as f64;
    Ok(MeanWeightDiagnostic { mean_weight, flagged: !(0.8..=1.2).contains(&mean_weight) })
}

/// Corrupts a count-based ratio model by perturbing its behavior
/// (denominator) counts with additive `Normal(10, 10)` noise, flooring each
/// at `1e-3`, and re-forming the clipped ratios.
///
/// This manufactures a misspecified weight function with the right support
/// but wrong magnitudes. Cells without target mass keep ratio zero. The
/// coverage report keeps describing the uncorrupted fit. Only histogram and
/// tabular models carry counts; other kinds are rejected.
pub fn corrupt_density_denominator(
    model: &DensityRatioModel,
    seed: u64,
) -> Result<DensityRatioModel> {
    corrupt_denominator_with(model, seed, 10.0, 10.0)
}

/// Corruption with explicit noise parameters (tests use degenerate noise).
pub fn corrupt_denominator_with(
    model: &DensityRatioModel,
    seed: u64,
    noise_mean: f64,
    noise_std: f64,
) -> Result<DensityRatioModel> {
    let mut stream = rng::stream(seed, &["denominator-corruption"]);
    let mut corrupt_counts = |count_b: &[f64], count_e: &[f64]| -> (Vec<f64>, Vec<f64>) {
        let n_b: f64 = count_b.iter().sum();
        let n_e: f64 = count_e.iter().sum();
        let noisy: Vec<f64> = count_b
            .iter()
            .map(|&c| {
                let z: f64 = stream.sample(StandardNormal);
                (c + noise_mean + noise_std * z).max(1e-3)
            })
            .collect();
        let ratios = noisy
            .iter()
            .zip(count_e)
            .map(|(&b, &e)| {
                if e <= 0.0 {
                    0.0
                } else {
                    ((e / n_e) / (b / n_b)).min(model.clip_max)
                }
            })
            .collect();
        (noisy, ratios)
    };
    let kind = match &model.kind {
        RatioFn::Histogram { grid, dims, count_b, count_e, .. } => {
            let (noisy, ratio) = corrupt_counts(count_b, count_e);
            RatioFn::Histogram {
                grid: *grid,
                dims: *dims,
                count_b: noisy,
                count_e: count_e.clone(),
                ratio,
            }
        }
        RatioFn::Tabular { key, rows } => {
            let count_b: Vec<f64> = rows.values().map(|r| r.0).collect();
            let count_e: Vec<f64> = rows.values().map(|r| r.1).collect();
            let (noisy, ratios) = corrupt_counts(&count_b, &count_e);
            RatioFn::Tabular {
                key: key.clone(),
                rows: rows
                    .keys()
                    .cloned()
                    .zip(noisy.into_iter().zip(count_e).zip(ratios))
                    .map(|(k, ((b, e), r))| (k, (b, e, r)))
                    .collect(),
            }
        }
        _ => {
            return Err(Error::InvalidConfig(
                "denominator corruption needs a count-based (histogram or tabular) model".into(),
            ))
        }
    };
    Ok(DensityRatioModel { kind, clip_max: model.clip_max, coverage: model.coverage })
}

/// Writes a two-coordinate histogram model as CSV for audit:
/// `bin_index_s0,bin_index_s1,count_b,count_e,ratio`, all cells.
pub fn write_histogram_csv(model: &DensityRatioModel, out: &mut impl Write) -> Result<()> {
    let RatioFn::Histogram { grid, dims, count_b, count_e, ratio } = &model.kind else {
        return Err(Error::InvalidConfig("histogram dump needs a histogram model".into()));
    };
    if *dims != 2 {
        return Err(Error::InvalidConfig(format!(
            "histogram dump covers two-coordinate models, got {dims}"
        )));
    }
    writeln!(out, "bin_index_s0,bin_index_s1,count_b,count_e,ratio")?;
    for (i, r) in ratio.iter().enumerate() {
        let multi = unflatten_cell(i, grid.bins_per_dim, *dims);
        writeln!(out, "{},{},{},{},{}", multi[0], multi[1], count_b[i], count_e[i], r)?;
    }
    Ok(())
}
