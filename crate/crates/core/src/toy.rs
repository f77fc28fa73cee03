//! The two-state synthetic domain used by the benchmark tables.
//!
//! Episodes are a single transition `s0 → s1`. Initial states sit on an
//! evenly spaced grid over `[0, 1.5]` plus Gaussian jitter. The behavior
//! kernel mixes three branches (stay put, contract toward a negative
//! multiple, jump to 1.5); the target kernel is a threshold rule
//! (`s1 = 1.5` below `s0 = 1.25`, else `0`), so the target concentrates on
//! a two-level band the behavior policy only thinly covers. The true return
//! is the quadratic `5·s0 + s1 + s1²`; behavior data observes it plus
//! `Normal(0, ω)` noise, target returns are never observed.
//!
//! Everything needed for oracle-grade audits is also here: the closed-form
//! conditional densities, the analytic density ratio, and the analytic
//! population value of the target policy.

use rand::Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::data::{BehaviorDataset, LabeledTrajectory, TargetDataset, Trajectory};
use crate::error::Result;
use crate::rng;

/// Standard deviation of the jitter applied to both state coordinates.
pub const STATE_NOISE_SIGMA: f64 = 0.1;

/// Branch probabilities of the behavior transition kernel.
pub const P_STAY: f64 = 0.5;
pub const P_CONTRACT: f64 = 0.45;
pub const P_JUMP: f64 = 1.0 - P_STAY - P_CONTRACT;

/// Generation parameters for the toy domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyConfig {
    pub n_behavior: usize,
    pub n_target: usize,
    /// Standard deviation of the observation noise on behavior returns.
    pub noise_omega: f64,
    /// Standard deviation of the state jitter (fixed at 0.1 in the tables).
    pub state_noise_sigma: f64,
    pub seed: u64,
}

impl Default for ToyConfig {
    fn default() -> Self {
        Self {
            n_behavior: 5000,
            n_target: 100,
            noise_omega: 1.0,
            state_noise_sigma: STATE_NOISE_SIGMA,
            seed: 0,
        }
    }
}

/// One generated toy episode with its bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToySample {
    pub s0: f64,
    pub s1: f64,
    /// Exactly `5·s0 + s1 + s1²` — noise never touches this field.
    pub true_return: f64,
    /// `true_return` plus observation noise (behavior data); equal to
    /// `true_return` for target samples, whose returns go unobserved.
    pub observed_return: f64,
}

/// Behavior-kernel branch identities.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BehaviorBranch {
    Stay,
    Contract,
    Jump,
}

/// The quadratic ground-truth return.
pub fn true_return(s0: f64, s1: f64) -> f64 {
    5.0 * s0 + s1 + s1 * s1
}

/// Mean of the target kernel: 1.5 below the threshold, 0 above.
pub fn target_mean_s1(s0: f64) -> f64 {
    if s0 < 1.25 {
        1.5
    } else {
        0.0
    }
}

/// Maps a uniform draw to a behavior branch with probabilities
/// (0.5, 0.45, 0.05).
pub fn sample_branch(x: f64) -> BehaviorBranch {
    if x < P_STAY {
        BehaviorBranch::Stay
    } else if x < P_STAY + P_CONTRACT {
        BehaviorBranch::Contract
    } else {
        BehaviorBranch::Jump
    }
}

/// Pre-noise `s1` for a behavior branch; `u ∈ [0, 1)` feeds the contract
/// branch's coefficient `−0.6 + 0.1·u`.
pub fn behavior_branch_value(s0: f64, branch: BehaviorBranch, u: f64) -> f64 {
    match branch {
        BehaviorBranch::Stay => s0,
        BehaviorBranch::Contract => (-0.6 + 0.1 * u) * s0,
        BehaviorBranch::Jump => 1.5,
    }
}

/// `n` evenly spaced points over `[0, 1.5]`, both endpoints included.
pub fn evenly_spaced(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.0];
    }
    (0..n).map(|i| 1.5 * i as f64 / (n - 1) as f64).collect()
}

fn normal_draw(rng: &mut impl Rng, std: f64) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    std * z
}

/// Generates behavior samples: grid + jitter initial states, three-branch
/// transitions, noisy observed returns.
///
/// Each randomness purpose draws from its own derived stream (grid jitter,
/// branch selection, branch coefficient, state jitter, return noise), so
/// changing ω or swapping an estimator never shifts any other draw.
pub fn behavior_samples(config: &ToyConfig) -> Vec<ToySample> {
    let mut grid_noise = rng::stream(config.seed, &["toy-behavior", "grid-noise"]);
    let mut branch_choice = rng::stream(config.seed, &["toy-behavior", "branch-choice"]);
    let mut branch_uniform = rng::stream(config.seed, &["toy-behavior", "branch-uniform"]);
    let mut state_noise = rng::stream(config.seed, &["toy-behavior", "state-noise"]);
    let mut return_noise = rng::stream(config.seed, &["toy-behavior", "return-noise"]);
    let sigma = config.state_noise_sigma;
    evenly_spaced(config.n_behavior)
        .into_iter()
        .map(|g| {
            let s0 = g + normal_draw(&mut grid_noise, sigma);
            let branch = sample_branch(branch_choice.gen::<f64>());
            // The coefficient draw is consumed on every branch to keep the
            // uniform stream aligned with the sample index.
            let u = branch_uniform.gen::<f64>();
            let s1 = behavior_branch_value(s0, branch, u) + normal_draw(&mut state_noise, sigma);
            let truth = true_return(s0, s1);
            ToySample {
                s0,
                s1,
                true_return: truth,
                observed_return: truth + normal_draw(&mut return_noise, config.noise_omega),
            }
        })
        .collect()
}

/// Generates target samples: same grid scheme, threshold transitions,
/// returns left unobserved (`observed_return` mirrors the truth).
pub fn target_samples(config: &ToyConfig) -> Vec<ToySample> {
    let mut grid_noise = rng::stream(config.seed, &["toy-target", "grid-noise"]);
    let mut state_noise = rng::stream(config.seed, &["toy-target", "state-noise"]);
    let sigma = config.state_noise_sigma;
    evenly_spaced(config.n_target)
        .into_iter()
        .map(|g| {
            let s0 = g + normal_draw(&mut grid_noise, sigma);
            let s1 = target_mean_s1(s0) + normal_draw(&mut state_noise, sigma);
            let truth = true_return(s0, s1);
            ToySample { s0, s1, true_return: truth, observed_return: truth }
        })
        .collect()
}

fn toy_prefix(sample: &ToySample) -> Trajectory {
    Trajectory::new(vec![vec![sample.s0], vec![sample.s1]], vec![], None, false)
        .expect("two states, no rewards is a valid toy prefix")
}

/// Full-horizon behavior data with observed returns.
pub fn sample_behavior(config: &ToyConfig) -> Result<BehaviorDataset> {
    BehaviorDataset::new(
        behavior_samples(config)
            .iter()
            .map(|s| LabeledTrajectory::new(toy_prefix(s), s.observed_return))
            .collect::<Result<Vec<_>>>()?,
    )
}

/// Short-horizon target prefixes plus the per-trajectory hidden truths.
///
/// The truths exist solely for the evaluation harness; estimators never see
/// them.
pub fn sample_target(config: &ToyConfig) -> Result<(TargetDataset, Vec<f64>)> {
    let samples = target_samples(config);
    let data = TargetDataset::new(samples.iter().map(toy_prefix).collect())?;
    Ok((data, samples.iter().map(|s| s.true_return).collect()))
}

/// Target prefixes with *observed* (noisy) return labels, as if the target
/// policy had been logged at full horizon, plus the hidden truths.
///
/// The prefixes and truths are draw-for-draw identical to [`sample_target`]
/// for the same configuration; the labels add return noise from an
/// independent stream.
pub fn sample_target_labeled(
    config: &ToyConfig,
) -> Result<(TargetDataset, BehaviorDataset, Vec<f64>)> {
    let samples = target_samples(config);
    let mut return_noise = rng::stream(config.seed, &["toy-target", "return-noise"]);
    let data = TargetDataset::new(samples.iter().map(toy_prefix).collect())?;
    let labeled = BehaviorDataset::new(
        samples
            .iter()
            .map(|s| {
                let g = s.true_return + normal_draw(&mut return_noise, config.noise_omega);
                LabeledTrajectory::new(toy_prefix(s), g)
            })
            .collect::<Result<Vec<_>>>()?,
    )?;
    Ok((data, labeled, samples.iter().map(|s| s.true_return).collect()))
}

// ---------------------------------------------------------------------------
// Analytic oracles
// ---------------------------------------------------------------------------

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

fn gaussian_pdf(x: f64, std: f64) -> f64 {
    let z = x / std;
    (-0.5 * z * z).exp() / (std * (2.0 * std::f64::consts::PI).sqrt())
}

/// Conditional density of `s1` given `s0` under the target kernel.
pub fn target_conditional_density(s0: f64, s1: f64) -> f64 {
    gaussian_pdf(s1 - target_mean_s1(s0), STATE_NOISE_SIGMA)
}

/// Conditional density of `s1` given `s0` under the behavior kernel.
///
/// The contract branch's coefficient is uniform over `[−0.6, −0.5)`, so its
/// conditional density is the average of Gaussians over that coefficient
/// range, which integrates to a difference of normal CDFs. The expression
/// `(Φ((s1+0.6·s0)/σ) − Φ((s1+0.5·s0)/σ)) / (0.1·s0)` keeps its sign for
/// negative `s0` (both numerator and denominator flip) and collapses to a
/// plain Gaussian as `s0 → 0`.
pub fn behavior_conditional_density(s0: f64, s1: f64) -> f64 {
    let sigma = STATE_NOISE_SIGMA;
    let contract = if s0.abs() < 1e-9 {
        gaussian_pdf(s1, sigma)
    } else {
        let phi = std_normal();
        (phi.cdf((s1 + 0.6 * s0) / sigma) - phi.cdf((s1 + 0.5 * s0) / sigma)) / (0.1 * s0)
    };
    P_STAY * gaussian_pdf(s1 - s0, sigma)
        + P_CONTRACT * contract
        + P_JUMP * gaussian_pdf(s1 - 1.5, sigma)
}

/// Exact trajectory density ratio `p(s0,s1 | target) / p(s0,s1 | behavior)`,
/// unclipped. Both kernels share the initial-state distribution, so the
/// ratio reduces to the conditional ratio.
pub fn analytic_density_ratio(s0: f64, s1: f64) -> f64 {
    target_conditional_density(s0, s1) / behavior_conditional_density(s0, s1)
}

/// Exact population value of the target policy when `m` grid points are
/// used for initial states:
/// `E[5·s0 + s1 + s1²] = 5·mean(grid) + 3.75·P(s0 < 1.25) + σ²`.
pub fn analytic_target_value(m: usize) -> f64 {
    let grid = evenly_spaced(m);
    let phi = std_normal();
    let sigma = STATE_NOISE_SIGMA;
    let mean_grid = grid.iter().sum::<f64>() / m as f64;
    let p_below: f64 =
        grid.iter().map(|g| phi.cdf((1.25 - g) / sigma)).sum::<f64>() / m as f64;
    5.0 * mean_grid + 3.75 * p_below + sigma * sigma
}
