//! Nuisance regressors: predict the full-horizon return `G` from a short
//! trajectory prefix.
//!
//! Two families cover every domain in this crate: linear-in-features models
//! solved by (optionally weighted) least squares, and tabular per-key means
//! for discrete trajectory spaces. The weighted objective
//! `Σ w_i (f(τ_i) − G_i)²` is the workhorse behind the reweighted estimators:
//! passing density-ratio weights retargets the regression at the target
//! policy's trajectory distribution.

use std::collections::BTreeMap;

use crate::data::{BehaviorDataset, Trajectory};
use crate::error::{Error, Result};

/// Ridge added to the normal-equation diagonal purely for conditioning.
const RIDGE: f64 = 1e-10;

/// Relative pivot threshold below which the design is declared rank-deficient.
/// Sits well above the floor the conditioning ridge imposes on truly singular
/// systems and well below the smallest pivot any legitimate fit produces.
const RANK_TOL: f64 = 1e-9;

/// Fixed feature bases for linear regressors (applied to the concatenated
/// state components of a prefix).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureMap {
    /// `[s0, s1, s1²]` — realizable basis for the quadratic toy return.
    ToyQuadratic,
    /// `[s0, s1]` — deliberately misses the quadratic term.
    ToyLinear,
}

impl FeatureMap {
    pub fn name(&self) -> &'static str {
        match self {
            FeatureMap::ToyQuadratic => "toy_quadratic",
            FeatureMap::ToyLinear => "toy_linear",
        }
    }

    /// Number of input components expected from the flattened prefix.
    pub fn arity(&self) -> usize {
        2
    }

    /// Output dimension of the basis.
    pub fn dim(&self) -> usize {
        match self {
            FeatureMap::ToyQuadratic => 3,
            FeatureMap::ToyLinear => 2,
        }
    }

    /// Applies the basis to flattened prefix components.
    pub fn apply(&self, flat: &[f64]) -> Result<Vec<f64>> {
        if flat.len() != self.arity() {
            return Err(Error::InvalidConfig(format!(
                "feature map {} expects {} components, got {}",
                self.name(),
                self.arity(),
                flat.len()
            )));
        }
        Ok(match self {
            FeatureMap::ToyQuadratic => vec![flat[0], flat[1], flat[1] * flat[1]],
            FeatureMap::ToyLinear => vec![flat[0], flat[1]],
        })
    }
}

/// A fitted linear-in-features return model.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub features: FeatureMap,
    pub coefficients: Vec<f64>,
    pub intercept: f64,
}

impl LinearModel {
    /// Predicted return for a prefix: `θᵀφ(τ) + b`.
    pub fn predict(&self, prefix: &Trajectory) -> Result<f64> {
        let phi = self.features.apply(&prefix.flat_states())?;
        Ok(self.intercept + dot(&self.coefficients, &phi))
    }

    /// Plain-text dump (feature-map name plus coefficients) for audit diffs.
    pub fn dump(&self) -> String {
        let coeffs = self
            .coefficients
            .iter()
            .map(|c| format!("{c:.12e}"))
            .collect::<Vec<_>>()
            .join(" ");
        format!("{} intercept={:.12e} coefficients={}", self.features.name(), self.intercept, coeffs)
    }
}

/// Keying scheme mapping a discrete-state prefix to a lookup key.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrajectoryKey {
    /// Every recorded state id, in visit order.
    FullPrefix,
    /// State ids integer-divided by `divisor` before keying. Grouping ids
    /// that differ only in low-order bits lets a tabular model generalize
    /// across states the training policy never produced.
    ProjectedPrefix { divisor: u64 },
}

impl TrajectoryKey {
    pub fn key_of(&self, prefix: &Trajectory) -> Result<Vec<u64>> {
        let ids = prefix.state_ids()?;
        Ok(match self {
            TrajectoryKey::FullPrefix => ids,
            TrajectoryKey::ProjectedPrefix { divisor } => {
                ids.into_iter().map(|id| id / divisor).collect()
            }
        })
    }
}

/// Per-key empirical mean return with a global-mean fallback.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularModel {
    pub key: TrajectoryKey,
    /// key → (mean return, count of contributing items).
    pub table: BTreeMap<Vec<u64>, (f64, usize)>,
    /// Returned for keys never seen during fitting.
    pub default: f64,
}

impl TabularModel {
    pub fn predict(&self, prefix: &Trajectory) -> Result<f64> {
        let key = self.key.key_of(prefix)?;
        Ok(self.table.get(&key).map_or(self.default, |&(mean, _)| mean))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn validate_weights(weights: &[f64], n: usize) -> Result<()> {
    if weights.len() != n {
        return Err(Error::InvalidConfig(format!(
            "{} weights for {n} items",
            weights.len()
        )));
    }
    let mut total = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        if !w.is_finite() || w < 0.0 {
            return Err(Error::NegativeWeight { index: i, weight: w });
        }
        total += w;
    }
    if total <= 0.0 {
        return Err(Error::InsufficientData(
            "all regression weights are zero; nothing to fit".into(),
        ));
    }
    Ok(())
}

/// Least-squares fit of `G` on `φ(prefix)` with an intercept.
///
/// Minimizes `Σ w_i (θᵀφ(τ_i) + b − G_i)²` through the normal equations with
/// a tiny ridge for conditioning; `weights = None` means the unweighted
/// objective.
pub fn fit_least_squares(
    data: &BehaviorDataset,
    features: FeatureMap,
    weights: Option<&[f64]>,
) -> Result<LinearModel> {
    fit_least_squares_opts(data, features, weights, true)
}

/// As [`fit_least_squares`], with the intercept column made explicit.
/// Intercept-free bases are wanted when the generating process itself has
/// no constant term and the basis would otherwise go near-collinear under
/// concentrated weights.
pub fn fit_least_squares_opts(
    data: &BehaviorDataset,
    features: FeatureMap,
    weights: Option<&[f64]>,
    intercept: bool,
) -> Result<LinearModel> {
    let n = data.size_n();
    if n < features.dim() + 1 {
        return Err(Error::InsufficientData(format!(
            "need at least {} items to fit basis {}, got {n}",
            features.dim() + 1,
            features.name()
        )));
    }
    if let Some(w) = weights {
        validate_weights(w, n)?;
    }

    let d = features.dim() + usize::from(intercept);
    // Accumulate the normal system A = ΦᵀWΦ, rhs = ΦᵀWy in one pass.
    let mut a = vec![vec![0.0; d]; d];
    let mut rhs = vec![0.0; d];
    let mut row = vec![0.0; d];
    for (i, item) in data.items.iter().enumerate() {
        let phi = features.apply(&item.prefix.flat_states())?;
        row[..features.dim()].copy_from_slice(&phi);
        if intercept {
            row[d - 1] = 1.0;
        }
        let w = weights.map_or(1.0, |w| w[i]);
        if w == 0.0 {
            continue;
        }
        for j in 0..d {
            let wj = w * row[j];
            rhs[j] += wj * item.full_return;
            for l in j..d {
                a[j][l] += wj * row[l];
            }
        }
    }
    for j in 0..d {
        a[j][j] += RIDGE;
        for l in 0..j {
            a[j][l] = a[l][j];
        }
    }

    let theta = solve_normal_system(&a, &rhs, features.name(), weights.is_some())?;
    let (coefficients, b) = if intercept {
        (theta[..d - 1].to_vec(), theta[d - 1])
    } else {
        (theta, 0.0)
    };
    Ok(LinearModel { features, coefficients, intercept: b })
}

/// Weighted least squares on explicit design rows: the lowest-level entry,
/// for callers that assemble their own feature columns (action one-hots,
/// custom bases). Returns the coefficient vector in column order; include a
/// constant column yourself if an intercept is wanted.
pub fn fit_design_rows(
    rows: &[Vec<f64>],
    targets: &[f64],
    weights: Option<&[f64]>,
    basis: &str,
) -> Result<Vec<f64>> {
    let n = rows.len();
    if n == 0 || targets.len() != n {
        return Err(Error::InvalidConfig(format!(
            "{n} design rows against {} targets",
            targets.len()
        )));
    }
    let d = rows[0].len();
    if rows.iter().any(|r| r.len() != d) {
        return Err(Error::InvalidConfig("design rows have mixed widths".into()));
    }
    if n < d {
        return Err(Error::InsufficientData(format!(
            "need at least {d} rows to fit basis {basis}, got {n}"
        )));
    }
    if let Some(w) = weights {
        validate_weights(w, n)?;
    }
    let mut a = vec![vec![0.0; d]; d];
    let mut rhs = vec![0.0; d];
    for (i, row) in rows.iter().enumerate() {
        let w = weights.map_or(1.0, |w| w[i]);
        if w == 0.0 {
            continue;
        }
        for j in 0..d {
            let wj = w * row[j];
            rhs[j] += wj * targets[i];
            for l in j..d {
                a[j][l] += wj * row[l];
            }
        }
    }
    for j in 0..d {
        a[j][j] += RIDGE;
        for l in 0..j {
            a[j][l] = a[l][j];
        }
    }
    solve_normal_system(&a, &rhs, basis, weights.is_some())
}

/// Solves the normal system, choosing the failure semantics by fit kind.
///
/// Unweighted fits treat a rank-collapsed design as a configuration bug and
/// surface it. Weighted fits can collapse purely because the weights
/// concentrate the effective sample (a data phenomenon the caller cannot
/// prevent), so they fall back to a truncated-eigenvalue pseudo-inverse —
/// the minimum-norm answer standard least-squares routines return.
fn solve_normal_system(
    a: &[Vec<f64>],
    rhs: &[f64],
    basis: &str,
    tolerant: bool,
) -> Result<Vec<f64>> {
    let mut factor = a.to_vec();
    match cholesky_solve(&mut factor, rhs, basis) {
        Err(Error::RankDeficient { .. }) if tolerant => Ok(pseudo_inverse_solve(a, rhs)),
        other => other,
    }
}

/// Minimum-norm solve of a symmetric PSD system: cyclic Jacobi
/// eigendecomposition, inverting only eigenvalue directions above the rank
/// tolerance.
fn pseudo_inverse_solve(a: &[Vec<f64>], rhs: &[f64]) -> Vec<f64> {
    let d = rhs.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut v = vec![vec![0.0; d]; d];
    for (j, row) in v.iter_mut().enumerate() {
        row[j] = 1.0;
    }
    let total_norm = m
        .iter()
        .flatten()
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt()
        .max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let off = m
            .iter()
            .enumerate()
            .flat_map(|(p, row)| row.iter().skip(p + 1))
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt();
        if off <= 1e-14 * total_norm {
            break;
        }
        for p in 0..d {
            for q in p + 1..d {
                let apq = m[p][q];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * apq);
                let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
                let t = sign / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..d {
                    let mkp = m[k][p];
                    let mkq = m[k][q];
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..d {
                    let mpk = m[p][k];
                    let mqk = m[q][k];
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for k in 0..d {
                    let vkp = v[k][p];
                    let vkq = v[k][q];
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let eigenvalues: Vec<f64> = (0..d).map(|j| m[j][j]).collect();
    let lambda_max =
        eigenvalues.iter().cloned().fold(0.0f64, f64::max).max(f64::MIN_POSITIVE);
    let mut x = vec![0.0; d];
    for j in 0..d {
        if eigenvalues[j] > RANK_TOL * lambda_max {
            let projection: f64 = (0..d).map(|k| v[k][j] * rhs[k]).sum();
            let scale = projection / eigenvalues[j];
            for (xk, vk) in x.iter_mut().zip(&v) {
                *xk += scale * vk[j];
            }
        }
    }
    x
}

/// Solves the symmetric positive-definite system in place via Cholesky,
/// flagging rank deficiency through the relative pivot magnitude.
fn cholesky_solve(a: &mut [Vec<f64>], rhs: &[f64], basis: &str) -> Result<Vec<f64>> {
    let d = rhs.len();
    let max_diag = (0..d).map(|j| a[j][j].abs()).fold(0.0f64, f64::max).max(f64::MIN_POSITIVE);
    // Lower-triangular factor L with A = L Lᵀ, overwriting the input.
    for j in 0..d {
        for l in 0..j {
            let s = a[j][l] - (0..l).map(|k| a[j][k] * a[l][k]).sum::<f64>();
            a[j][l] = s / a[l][l];
        }
        let pivot = a[j][j] - (0..j).map(|k| a[j][k] * a[j][k]).sum::<f64>();
        if pivot <= RANK_TOL * max_diag {
            return Err(Error::RankDeficient {
                basis: basis.to_string(),
                pivot_index: j,
                relative_pivot: pivot / max_diag,
            });
        }
        a[j][j] = pivot.sqrt();
    }
    // Forward then backward substitution.
    let mut y = vec![0.0; d];
    for j in 0..d {
        y[j] = (rhs[j] - (0..j).map(|k| a[j][k] * y[k]).sum::<f64>()) / a[j][j];
    }
    let mut x = vec![0.0; d];
    for j in (0..d).rev() {
        x[j] = (y[j] - (j + 1..d).map(|k| a[k][j] * x[k]).sum::<f64>()) / a[j][j];
    }
    Ok(x)
}

/// Fits a per-key mean-return table, optionally weighted.
///
/// The fallback for unseen keys is the (weighted) global mean. Keys whose
/// total weight is zero are dropped so predictions for them fall back to the
/// global default instead of an undefined mean.
pub fn fit_tabular(
    data: &BehaviorDataset,
    key: TrajectoryKey,
    weights: Option<&[f64]>,
) -> Result<TabularModel> {
    if let Some(w) = weights {
        validate_weights(w, data.size_n())?;
    }
    let mut sums: BTreeMap<Vec<u64>, (f64, f64, usize)> = BTreeMap::new();
    let mut global = (0.0, 0.0);
    for (i, item) in data.items.iter().enumerate() {
        let w = weights.map_or(1.0, |w| w[i]);
        let k = key.key_of(&item.prefix)?;
        let entry = sums.entry(k).or_insert((0.0, 0.0, 0));
        entry.0 += w * item.full_return;
        entry.1 += w;
        entry.2 += 1;
        global.0 += w * item.full_return;
        global.1 += w;
    }
    let table = sums
        .into_iter()
        .filter(|(_, (_, wsum, _))| *wsum > 0.0)
        .map(|(k, (gsum, wsum, count))| (k, (gsum / wsum, count)))
        .collect();
    Ok(TabularModel { key, table, default: global.0 / global.1 })
}
