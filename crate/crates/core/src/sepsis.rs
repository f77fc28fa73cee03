//! A discrete intensive-care MDP with exact dynamic-programming oracles.
//!
//! States combine a static diabetes flag, four ordinal vitals (heart rate,
//! blood pressure, oxygen, glucose), and the three treatment bits currently
//! active — 1440 states total. Actions set the next step's treatment bits:
//! `action = vasopressor·4 + antibiotics·2 + ventilation`. The behavior
//! policy chooses among actions 0–3 (no vasopressor); the target policy has
//! all 8.
//!
//! An episode ends in death (reward −1) when at least three vitals leave
//! their normal range, and in discharge (reward +1) when every vital is
//! normal and no treatment is active. Terminal states absorb with no
//! further reward. Rewards attach to the state being *entered*:
//! `r_t = R(s_{t+1})`.
//!
//! Dynamics follow a simple clinical story: a treated vital moves toward
//! normal with a treatment-specific probability and otherwise holds;
//! untreated normal vitals drift abnormal with a small probability
//! (glucose drifts faster for diabetics); untreated abnormal vitals stay
//! where they are, except glucose, which keeps drifting outward until it
//! pegs. Because treatment is the only route back to normal and treated
//! vitals never overshoot, the greedy policy is the same at every horizon,
//! which is what lets finite-horizon value iteration and stationary policy
//! iteration agree exactly.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use rand::Rng;

use crate::data::{
    discounted_return, BehaviorDataset, LabeledTrajectory, TargetDataset, Trajectory,
};
use crate::error::{Error, Result};
use crate::regression::TrajectoryKey;
use crate::rng;

/// Total number of encoded states.
pub const N_STATES: usize = 1440;

/// Actions available to the target policy (all treatment combinations).
pub const TARGET_ACTIONS: usize = 8;

/// Actions available to the behavior policy (no vasopressor).
pub const BEHAVIOR_ACTIONS: usize = 4;

/// Episode horizon.
pub const HORIZON: usize = 20;

/// Discount factor.
pub const DISCOUNT: f64 = 0.99;

/// Exploration rate of the ε-soft policies.
pub const SOFT_EPSILON: f64 = 0.15;

/// Transition-kernel rates. Fields are probabilities except `diab_mult`,
/// which scales the glucose drift for diabetic patients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SepsisParams {
    /// Antibiotics normalize heart rate.
    pub p_abx_hr: f64,
    /// Antibiotics weakly normalize blood pressure.
    pub p_abx_bp: f64,
    /// Vasopressors strongly normalize blood pressure.
    pub p_vaso_bp: f64,
    /// Ventilation normalizes oxygen.
    pub p_vent_o2: f64,
    /// Antibiotics step glucose one level toward normal.
    pub p_abx_glu: f64,
    /// Drift of an untreated normal heart rate (split between low and high).
    pub d_hr: f64,
    /// Drift of an untreated normal blood pressure.
    pub d_bp: f64,
    /// Drift of an untreated normal oxygen level.
    pub d_o2: f64,
    /// Outward drift per step of untreated glucose.
    pub d_glu: f64,
    /// Glucose-drift multiplier for diabetic patients.
    pub diab_mult: f64,
}

impl Default for SepsisParams {
    fn default() -> Self {
        Self {
            p_abx_hr: 0.6,
            p_abx_bp: 0.05,
            p_vaso_bp: 0.75,
            p_vent_o2: 0.7,
            p_abx_glu: 0.5,
            d_hr: 0.10,
            d_bp: 0.10,
            d_o2: 0.08,
            d_glu: 0.06,
            diab_mult: 3.0,
        }
    }
}

impl SepsisParams {
    /// Applies seeded ±10% multiplicative jitter to every rate (not the
    /// diabetes multiplier), clamped to `[0.01, 0.95]`. Draw order is the
    /// field declaration order.
    pub fn jittered(&self, seed: u64) -> Self {
        let mut stream = rng::stream(seed, &["sepsis", "param-jitter"]);
        let mut jitter = |p: f64| {
            let u: f64 = stream.gen_range(-1.0..1.0);
            (p * (1.0 + 0.1 * u)).clamp(0.01, 0.95)
        };
        Self {
            p_abx_hr: jitter(self.p_abx_hr),
            p_abx_bp: jitter(self.p_abx_bp),
            p_vaso_bp: jitter(self.p_vaso_bp),
            p_vent_o2: jitter(self.p_vent_o2),
            p_abx_glu: jitter(self.p_abx_glu),
            d_hr: jitter(self.d_hr),
            d_bp: jitter(self.d_bp),
            d_o2: jitter(self.d_o2),
            d_glu: jitter(self.d_glu),
            diab_mult: self.diab_mult,
        }
    }
}

/// A decoded state. Normal levels: heart rate 1 of 0–2, blood pressure 1 of
/// 0–2, oxygen 1 of 0–1, glucose 2 of 0–4.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SepsisState {
    pub diabetic: bool,
    pub heart_rate: u8,
    pub blood_pressure: u8,
    pub oxygen: u8,
    pub glucose: u8,
    /// Active-treatment bits, mirroring the action that produced the state.
    pub treatment: u8,
}

impl SepsisState {
    /// Stable enumeration: diabetes-major, then heart rate, blood pressure,
    /// oxygen, glucose, treatment bits.
    pub fn encode(&self) -> usize {
        (((((self.diabetic as usize * 3 + self.heart_rate as usize) * 3
            + self.blood_pressure as usize)
            * 2
            + self.oxygen as usize)
            * 5
            + self.glucose as usize)
            * 8)
            + self.treatment as usize
    }

    pub fn decode(id: usize) -> Self {
        debug_assert!(id < N_STATES);
        let treatment = (id % 8) as u8;
        let mut v = id / 8;
        let glucose = (v % 5) as u8;
        v /= 5;
        let oxygen = (v % 2) as u8;
        v /= 2;
        let blood_pressure = (v % 3) as u8;
        v /= 3;
        let heart_rate = (v % 3) as u8;
        Self { diabetic: v / 3 == 1, heart_rate, blood_pressure, oxygen, glucose, treatment }
    }

    /// Number of vitals outside their normal level.
    pub fn abnormal_vitals(&self) -> usize {
        (self.heart_rate != 1) as usize
            + (self.blood_pressure != 1) as usize
            + (self.oxygen != 1) as usize
            + (self.glucose != 2) as usize
    }

    /// Death: at least three vitals out of range.
    pub fn is_death(&self) -> bool {
        self.abnormal_vitals() >= 3
    }

    /// Discharge: all vitals normal with no active treatment.
    pub fn is_discharge(&self) -> bool {
        self.abnormal_vitals() == 0 && self.treatment == 0
    }
}

/// A finite MDP with sparse transition rows.
#[derive(Debug, Clone, PartialEq)]
pub struct MdpSpec {
    pub n_states: usize,
    pub behavior_actions: usize,
    pub target_actions: usize,
    /// `transitions[s][a]` lists `(next_state, probability)` pairs, sorted
    /// by next state.
    pub transitions: Vec<Vec<Vec<(usize, f64)>>>,
    /// Reward granted on entering each state.
    pub rewards: Vec<f64>,
    pub terminal: Vec<bool>,
    pub horizon: usize,
    pub discount: f64,
    /// Initial-state distribution used by rollouts and exact evaluation;
    /// defaults to uniform over non-terminal states.
    pub initial_distribution: Vec<f64>,
}

impl MdpSpec {
    /// Audits the structural invariants: row normalization within 1e−9,
    /// absorbing zero-reward-forward terminals, and a valid initial
    /// distribution.
    pub fn validate(&self) -> Result<()> {
        if self.transitions.len() != self.n_states
            || self.rewards.len() != self.n_states
            || self.terminal.len() != self.n_states
            || self.initial_distribution.len() != self.n_states
        {
            return Err(Error::InvalidConfig("state-table lengths disagree".into()));
        }
        for (s, per_action) in self.transitions.iter().enumerate() {
            if per_action.len() != self.target_actions {
                return Err(Error::InvalidConfig(format!(
                    "state {s} has {} action rows, expected {}",
                    per_action.len(),
                    self.target_actions
                )));
            }
            for (a, row) in per_action.iter().enumerate() {
                let total: f64 = row.iter().map(|&(_, p)| p).sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidConfig(format!(
                        "transition row ({s},{a}) sums to {total}"
                    )));
                }
                if row.iter().any(|&(s2, p)| s2 >= self.n_states || p < 0.0) {
                    return Err(Error::InvalidConfig(format!(
                        "transition row ({s},{a}) has an invalid entry"
                    )));
                }
                if self.terminal[s] && (row.len() != 1 || row[0] != (s, 1.0)) {
                    return Err(Error::InvalidConfig(format!(
                        "terminal state {s} is not absorbing under action {a}"
                    )));
                }
            }
        }
        let init_total: f64 = self.initial_distribution.iter().sum();
        if (init_total - 1.0).abs() > 1e-9 || self.initial_distribution.iter().any(|&p| p < 0.0)
        {
            return Err(Error::InvalidConfig(format!(
                "initial distribution sums to {init_total}"
            )));
        }
        Ok(())
    }
}

/// Next-level distributions for the four vitals under an action's treatment
/// bits. Each returned list is a small exact distribution over levels.
fn vital_distributions(
    params: &SepsisParams,
    state: &SepsisState,
    vaso: bool,
    abx: bool,
    vent: bool,
) -> [Vec<(u8, f64)>; 4] {
    let hr = state.heart_rate;
    let hr_d = if abx {
        if hr == 1 {
            vec![(1, 1.0)]
        } else {
            vec![(1, params.p_abx_hr), (hr, 1.0 - params.p_abx_hr)]
        }
    } else if hr == 1 {
        vec![(0, params.d_hr / 2.0), (2, params.d_hr / 2.0), (1, 1.0 - params.d_hr)]
    } else {
        vec![(hr, 1.0)]
    };

    let bp = state.blood_pressure;
    let bp_d = if vaso {
        if bp == 1 {
            vec![(1, 1.0)]
        } else {
            vec![(1, params.p_vaso_bp), (bp, 1.0 - params.p_vaso_bp)]
        }
    } else if abx {
        if bp == 1 {
            vec![(1, 1.0)]
        } else {
            vec![(1, params.p_abx_bp), (bp, 1.0 - params.p_abx_bp)]
        }
    } else if bp == 1 {
        vec![(0, params.d_bp / 2.0), (2, params.d_bp / 2.0), (1, 1.0 - params.d_bp)]
    } else {
        vec![(bp, 1.0)]
    };

    let o2 = state.oxygen;
    let o2_d = if vent {
        if o2 == 1 {
            vec![(1, 1.0)]
        } else {
            vec![(1, params.p_vent_o2), (0, 1.0 - params.p_vent_o2)]
        }
    } else if o2 == 1 {
        vec![(0, params.d_o2), (1, 1.0 - params.d_o2)]
    } else {
        vec![(o2, 1.0)]
    };

    let glu = state.glucose;
    let drift = (params.d_glu * if state.diabetic { params.diab_mult } else { 1.0 }).min(0.45);
    let glu_d = if abx {
        if glu == 2 {
            vec![(2, 1.0)]
        } else {
            let toward = if glu < 2 { glu + 1 } else { glu - 1 };
            vec![(toward, params.p_abx_glu), (glu, 1.0 - params.p_abx_glu)]
        }
    } else if glu == 2 {
        vec![(1, drift / 2.0), (3, drift / 2.0), (2, 1.0 - drift)]
    } else if glu == 1 || glu == 3 {
        let outward = if glu == 1 { 0 } else { 4 };
        vec![(outward, drift), (glu, 1.0 - drift)]
    } else {
        vec![(glu, 1.0)] // pegged at an extreme until treated
    };

    [hr_d, bp_d, o2_d, glu_d]
}

/// Builds the full MDP for explicit kernel rates (no jitter).
pub fn build_spec(params: &SepsisParams) -> MdpSpec {
    let mut rewards = vec![0.0; N_STATES];
    let mut terminal = vec![false; N_STATES];
    for id in 0..N_STATES {
        let state = SepsisState::decode(id);
        if state.is_death() {
            rewards[id] = -1.0;
            terminal[id] = true;
        } else if state.is_discharge() {
            rewards[id] = 1.0;
            terminal[id] = true;
        }
    }

    let mut transitions = Vec::with_capacity(N_STATES);
    for id in 0..N_STATES {
        if terminal[id] {
            transitions.push(vec![vec![(id, 1.0)]; TARGET_ACTIONS]);
            continue;
        }
        let state = SepsisState::decode(id);
        let mut per_action = Vec::with_capacity(TARGET_ACTIONS);
        for action in 0..TARGET_ACTIONS {
            let (vaso, abx, vent) =
                ((action >> 2) & 1 == 1, (action >> 1) & 1 == 1, action & 1 == 1);
            let [hr_d, bp_d, o2_d, glu_d] =
                vital_distributions(params, &state, vaso, abx, vent);
            let mut row: BTreeMap<usize, f64> = BTreeMap::new();
            for &(h2, ph) in &hr_d {
                for &(b2, pb) in &bp_d {
                    for &(x2, px) in &o2_d {
                        for &(g2, pg) in &glu_d {
                            let p = ph * pb * px * pg;
                            if p <= 0.0 {
                                continue;
                            }
                            let next = SepsisState {
                                diabetic: state.diabetic,
                                heart_rate: h2,
                                blood_pressure: b2,
                                oxygen: x2,
                                glucose: g2,
                                treatment: action as u8,
                            };
                            *row.entry(next.encode()).or_insert(0.0) += p;
                        }
                    }
                }
            }
            per_action.push(row.into_iter().collect());
        }
        transitions.push(per_action);
    }

    let n_live = terminal.iter().filter(|&&t| !t).count() as f64;
    let initial_distribution =
        terminal.iter().map(|&t| if t { 0.0 } else { 1.0 / n_live }).collect();
    MdpSpec {
        n_states: N_STATES,
        behavior_actions: BEHAVIOR_ACTIONS,
        target_actions: TARGET_ACTIONS,
        transitions,
        rewards,
        terminal,
        horizon: HORIZON,
        discount: DISCOUNT,
        initial_distribution,
    }
}

/// Builds the benchmark MDP: default rates under seeded ±10% jitter.
pub fn build_default_spec(seed: u64) -> MdpSpec {
    build_spec(&SepsisParams::default().jittered(seed))
}

/// The discrete trajectory key that drops treatment bits, grouping states
/// by their clinical vitals alone. The benchmark regressors and ratios use
/// it so tables stay well-populated at moderate sample sizes.
pub fn vitals_key() -> TrajectoryKey {
    TrajectoryKey::ProjectedPrefix { divisor: 8 }
}

/// A stationary stochastic policy over a fixed action-set size.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    /// `rows[s]` is a probability vector over this policy's action set.
    pub rows: Vec<Vec<f64>>,
    /// Exploration rate the policy was built with (0 for greedy).
    pub epsilon: f64,
}

impl Policy {
    pub fn n_actions(&self) -> usize {
        self.rows[0].len()
    }

    /// Greedy one-hot policy from explicit action choices.
    pub fn greedy(actions: &[usize], n_actions: usize) -> Self {
        let rows = actions
            .iter()
            .map(|&a| {
                let mut row = vec![0.0; n_actions];
                row[a] = 1.0;
                row
            })
            .collect();
        Self { rows, epsilon: 0.0 }
    }
}

/// Mixes a policy with the uniform distribution:
/// each row becomes `(1−ε)·row + ε·uniform`.
pub fn soften(policy: &Policy, epsilon: f64) -> Policy {
    let n = policy.n_actions();
    let rows = policy
        .rows
        .iter()
        .map(|row| row.iter().map(|p| (1.0 - epsilon) * p + epsilon / n as f64).collect())
        .collect();
    Policy { rows, epsilon }
}

/// One-step expected value of `(s, a)` given the value of being *in* each
/// next state with the remaining horizon.
fn action_value(spec: &MdpSpec, values: &[f64], s: usize, a: usize) -> f64 {
    spec.transitions[s][a]
        .iter()
        .map(|&(s2, p)| {
            p * (spec.rewards[s2]
                + spec.discount * if spec.terminal[s2] { 0.0 } else { values[s2] })
        })
        .sum()
}

/// One Bellman-optimality backup over the first `n_actions` actions.
/// Ties keep the lowest action id (improvement requires a 1e−15 margin).
fn optimal_backup(spec: &MdpSpec, values: &[f64], n_actions: usize) -> (Vec<f64>, Vec<usize>) {
    let mut next = vec![0.0; spec.n_states];
    let mut choice = vec![0usize; spec.n_states];
    for s in 0..spec.n_states {
        if spec.terminal[s] {
            continue;
        }
        let (mut best, mut best_action) = (f64::NEG_INFINITY, 0);
        for a in 0..n_actions {
            let q = action_value(spec, values, s, a);
            if q > best + 1e-15 {
                best = q;
                best_action = a;
            }
        }
        next[s] = best;
        choice[s] = best_action;
    }
    (next, choice)
}

/// One backup under a stochastic stationary policy.
fn policy_backup(spec: &MdpSpec, values: &[f64], policy: &Policy) -> Vec<f64> {
    let mut next = vec![0.0; spec.n_states];
    for s in 0..spec.n_states {
        if spec.terminal[s] {
            continue;
        }
        next[s] = policy.rows[s]
            .iter()
            .enumerate()
            .filter(|&(_, &p)| p > 0.0)
            .map(|(a, &p)| p * action_value(spec, values, s, a))
            .sum();
    }
    next
}

/// Finite-horizon optimal values by backward induction over the first
/// `policy_actions` actions.
///
/// Returns one table per remaining-step count: `result[k][s]` is the best
/// value achievable from `s` with `k` steps left, so `result[0]` is all
/// zeros and `result[spec.horizon]` is the start-of-episode table.
pub fn value_iteration(spec: &MdpSpec, policy_actions: usize) -> Vec<Vec<f64>> {
    let mut tables = Vec::with_capacity(spec.horizon + 1);
    tables.push(vec![0.0; spec.n_states]);
    for _ in 0..spec.horizon {
        let (next, _) = optimal_backup(spec, tables.last().unwrap(), policy_actions);
        tables.push(next);
    }
    tables
}

/// Stationary optimal policy over the first `action_count` actions, by
/// Howard-style policy iteration: iterative evaluation to a 1e−13 sup-norm
/// fixed point, then greedy improvement, until the policy stops changing.
pub fn policy_iteration(spec: &MdpSpec, action_count: usize) -> Policy {
    let mut actions = vec![0usize; spec.n_states];
    for _ in 0..1000 {
        // Evaluate the current deterministic policy to convergence. The
        // discount guarantees a contraction, so the sweep cap is generous.
        let mut values = vec![0.0; spec.n_states];
        for _ in 0..10_000 {
            let mut next = vec![0.0; spec.n_states];
            let mut delta: f64 = 0.0;
            for s in 0..spec.n_states {
                if spec.terminal[s] {
                    continue;
                }
                next[s] = action_value(spec, &values, s, actions[s]);
                delta = delta.max((next[s] - values[s]).abs());
            }
            values = next;
            if delta < 1e-13 {
                break;
            }
        }
        let (_, improved) = optimal_backup(spec, &values, action_count);
        if improved == actions {
            return Policy::greedy(&actions, action_count);
        }
        actions = improved;
    }
    Policy::greedy(&actions, action_count)
}

/// Start-of-episode value table of a stochastic policy over the finite
/// horizon, by exact backward induction.
pub fn finite_policy_values(spec: &MdpSpec, policy: &Policy) -> Vec<f64> {
    let mut values = vec![0.0; spec.n_states];
    for _ in 0..spec.horizon {
        values = policy_backup(spec, &values, policy);
    }
    values
}

/// Exact finite-horizon discounted value of a policy from an initial
/// distribution.
pub fn exact_policy_value(
    spec: &MdpSpec,
    policy: &Policy,
    initial_distribution: &[f64],
) -> Result<f64> {
    if initial_distribution.len() != spec.n_states {
        return Err(Error::InvalidConfig(format!(
            "initial distribution has {} entries for {} states",
            initial_distribution.len(),
            spec.n_states
        )));
    }
    let values = finite_policy_values(spec, policy);
    Ok(initial_distribution.iter().zip(&values).map(|(p, v)| p * v).sum())
}

fn sample_categorical(rng: &mut impl Rng, probs: impl Iterator<Item = (usize, f64)>) -> usize {
    let u: f64 = rng.gen();
    let mut cumulative = 0.0;
    let mut last = 0;
    for (index, p) in probs {
        cumulative += p;
        last = index;
        if u < cumulative {
            return index;
        }
    }
    last
}

/// One recorded episode: up to `max_steps` transitions, stopping early at a
/// terminal state. Action lists carry one entry per recorded state — the
/// final entry is the action the policy *would* take next, so truncated
/// prefixes always expose the action taken at their last state.
fn rollout_one(
    spec: &MdpSpec,
    policy: &Policy,
    max_steps: usize,
    init: &mut impl Rng,
    action_rng: &mut impl Rng,
    transition_rng: &mut impl Rng,
) -> Result<Trajectory> {
    let mut s = sample_categorical(
        init,
        spec.initial_distribution.iter().copied().enumerate().filter(|&(_, p)| p > 0.0),
    );
    let mut states = vec![vec![s as f64]];
    let mut actions = Vec::new();
    let mut rewards = Vec::new();
    for _ in 0..max_steps {
        if spec.terminal[s] {
            break;
        }
        let a = sample_categorical(
            action_rng,
            policy.rows[s].iter().copied().enumerate().filter(|&(_, p)| p > 0.0),
        );
        actions.push(a);
        let s2 = sample_categorical(transition_rng, spec.transitions[s][a].iter().copied());
        rewards.push(spec.rewards[s2]);
        states.push(vec![s2 as f64]);
        s = s2;
    }
    // The trailing action at the final recorded state.
    actions.push(sample_categorical(
        action_rng,
        policy.rows[s].iter().copied().enumerate().filter(|&(_, p)| p > 0.0),
    ));
    Trajectory::new(states, rewards, Some(actions), spec.terminal[s])
}

/// Runs `n` full-horizon episodes and labels each with its discounted
/// return.
pub fn rollout_behavior(
    spec: &MdpSpec,
    policy: &Policy,
    n: usize,
    seed: u64,
) -> Result<BehaviorDataset> {
    let mut init = rng::stream(seed, &["sepsis-rollout", "behavior", "init"]);
    let mut action_rng = rng::stream(seed, &["sepsis-rollout", "behavior", "action"]);
    let mut transition_rng = rng::stream(seed, &["sepsis-rollout", "behavior", "transition"]);
    let mut items = Vec::with_capacity(n);
    for _ in 0..n {
        let prefix = rollout_one(
            spec,
            policy,
            spec.horizon,
            &mut init,
            &mut action_rng,
            &mut transition_rng,
        )?;
        let g = discounted_return(&prefix.rewards, spec.discount);
        items.push(LabeledTrajectory::new(prefix, g)?);
    }
    BehaviorDataset::new(items)
}

/// Runs `n` episodes recorded only to `h_record` steps, as unlabeled
/// prefixes.
pub fn rollout_target(
    spec: &MdpSpec,
    policy: &Policy,
    n: usize,
    h_record: usize,
    seed: u64,
) -> Result<TargetDataset> {
    if h_record > spec.horizon {
        return Err(Error::HorizonExceeded { requested: h_record, recorded: spec.horizon });
    }
    let mut init = rng::stream(seed, &["sepsis-rollout", "target", "init"]);
    let mut action_rng = rng::stream(seed, &["sepsis-rollout", "target", "action"]);
    let mut transition_rng = rng::stream(seed, &["sepsis-rollout", "target", "transition"]);
    let mut items = Vec::with_capacity(n);
    for _ in 0..n {
        items.push(rollout_one(
            spec,
            policy,
            h_record,
            &mut init,
            &mut action_rng,
            &mut transition_rng,
        )?);
    }
    TargetDataset::new(items)
}

// ---------------------------------------------------------------------------
// Plain-text export/import
// ---------------------------------------------------------------------------

/// Writes a spec as plain text: header fields, sparse transition triples
/// `state,action,next_state,prob`, then a per-state
/// `state,reward,terminal,initial_prob` table.
pub fn export_spec(spec: &MdpSpec, out: &mut impl Write) -> Result<()> {
    writeln!(out, "n_states,{}", spec.n_states)?;
    writeln!(out, "behavior_actions,{}", spec.behavior_actions)?;
    writeln!(out, "target_actions,{}", spec.target_actions)?;
    writeln!(out, "horizon,{}", spec.horizon)?;
    writeln!(out, "discount,{}", spec.discount)?;
    let triple_count: usize = spec
        .transitions
        .iter()
        .map(|per_action| per_action.iter().map(Vec::len).sum::<usize>())
        .sum();
    writeln!(out, "transitions,{triple_count}")?;
    for (s, per_action) in spec.transitions.iter().enumerate() {
        for (a, row) in per_action.iter().enumerate() {
            for &(s2, p) in row {
                writeln!(out, "{s},{a},{s2},{p}")?;
            }
        }
    }
    writeln!(out, "states,{}", spec.n_states)?;
    for s in 0..spec.n_states {
        writeln!(
            out,
            "{s},{},{},{}",
            spec.rewards[s],
            spec.terminal[s] as u8,
            spec.initial_distribution[s]
        )?;
    }
    Ok(())
}

fn parse_error(line: usize, message: impl Into<String>) -> Error {
    Error::Serialization { line, message: message.into() }
}

/// Reads a spec written by [`export_spec`] and re-validates it.
pub fn import_spec(input: &mut impl BufRead) -> Result<MdpSpec> {
    let mut lines = Vec::new();
    for line in input.lines() {
        lines.push(line?);
    }
    fn header(lines: &[String], cursor: &mut usize, name: &str) -> Result<f64> {
        let line_no = *cursor + 1;
        let line = lines
            .get(*cursor)
            .ok_or_else(|| parse_error(line_no, format!("missing {name} header")))?;
        let (key, value) =
            line.split_once(',').ok_or_else(|| parse_error(line_no, "expected key,value"))?;
        if key != name {
            return Err(parse_error(line_no, format!("expected {name}, found {key}")));
        }
        let parsed = value
            .parse::<f64>()
            .map_err(|e| parse_error(line_no, format!("bad {name}: {e}")))?;
        *cursor += 1;
        Ok(parsed)
    }
    let mut cursor = 0;
    let n_states = header(&lines, &mut cursor, "n_states")? as usize;
    let behavior_actions = header(&lines, &mut cursor, "behavior_actions")? as usize;
    let target_actions = header(&lines, &mut cursor, "target_actions")? as usize;
    let horizon = header(&lines, &mut cursor, "horizon")? as usize;
    let discount = header(&lines, &mut cursor, "discount")?;
    let triple_count = header(&lines, &mut cursor, "transitions")? as usize;

    let mut transitions = vec![vec![Vec::new(); target_actions]; n_states];
    for _ in 0..triple_count {
        let line_no = cursor + 1;
        let line =
            lines.get(cursor).ok_or_else(|| parse_error(line_no, "missing transition row"))?;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(parse_error(line_no, "transition rows need state,action,next,prob"));
        }
        let s: usize =
            fields[0].parse().map_err(|e| parse_error(line_no, format!("bad state: {e}")))?;
        let a: usize =
            fields[1].parse().map_err(|e| parse_error(line_no, format!("bad action: {e}")))?;
        let s2: usize =
            fields[2].parse().map_err(|e| parse_error(line_no, format!("bad next: {e}")))?;
        let p: f64 =
            fields[3].parse().map_err(|e| parse_error(line_no, format!("bad prob: {e}")))?;
        if s >= n_states || a >= target_actions {
            return Err(parse_error(line_no, "transition indices out of range"));
        }
        transitions[s][a].push((s2, p));
        cursor += 1;
    }

    let state_count = header(&lines, &mut cursor, "states")? as usize;
    if state_count != n_states {
        return Err(parse_error(cursor, "state table length disagrees with n_states"));
    }
    let mut rewards = vec![0.0; n_states];
    let mut terminal = vec![false; n_states];
    let mut initial_distribution = vec![0.0; n_states];
    for _ in 0..state_count {
        let line_no = cursor + 1;
        let line =
            lines.get(cursor).ok_or_else(|| parse_error(line_no, "missing state row"))?;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(parse_error(line_no, "state rows need state,reward,terminal,init"));
        }
        let s: usize =
            fields[0].parse().map_err(|e| parse_error(line_no, format!("bad state: {e}")))?;
        if s >= n_states {
            return Err(parse_error(line_no, "state index out of range"));
        }
        rewards[s] =
            fields[1].parse().map_err(|e| parse_error(line_no, format!("bad reward: {e}")))?;
        terminal[s] = match fields[2] {
            "0" => false,
            "1" => true,
            other => return Err(parse_error(line_no, format!("bad terminal flag {other}"))),
        };
        initial_distribution[s] =
            fields[3].parse().map_err(|e| parse_error(line_no, format!("bad init: {e}")))?;
        cursor += 1;
    }

    let spec = MdpSpec {
        n_states,
        behavior_actions,
        target_actions,
        transitions,
        rewards,
        terminal,
        horizon,
        discount,
        initial_distribution,
    };
    spec.validate()?;
    Ok(spec)
}
