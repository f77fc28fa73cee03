//! Core trajectory, dataset, and fold types shared by every other module.
//!
//! A [`Trajectory`] is a short prefix of an episode: `h+1` state vectors and
//! the `h` rewards observed between them. Discrete-domain episodes also carry
//! one action per recorded state (the action chosen *at* that state; the last
//! one is the action the policy was about to take when recording stopped,
//! which downstream estimators need). A [`LabeledTrajectory`] additionally
//! carries the full-horizon return `G` of the episode the prefix was cut
//! from.
//!
//! # Dataset serialization
//!
//! Datasets serialize one record per line, comma-separated:
//!
//! ```text
//! traj_id, fold_id, h, s_0..s_h, r_0..r_{k-1}, G, terminated, actions
//! ```
//!
//! - `fold_id` is empty when no fold plan is attached;
//! - multi-dimensional states join their components with `;`;
//! - `k` (number of reward fields) is recovered from the field count, since
//!   some domains record no per-step rewards;
//! - `G` is empty for target datasets (their returns are never observed);
//! - `terminated` is `0`/`1`;
//! - `actions` joins action ids with `;`, empty when the domain has none.

use std::io::{BufRead, BufReader, Read, Write};

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng;

/// A recorded state-reward prefix of one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Visited states `s_0 .. s_h`, each a real vector (discrete domains
    /// store the state id as a single-component vector).
    pub states: Vec<Vec<f64>>,
    /// Rewards observed between consecutive states. Domains without
    /// per-step rewards leave this empty.
    pub rewards: Vec<f64>,
    /// One action id per recorded state, when the domain has actions.
    pub actions: Option<Vec<usize>>,
    /// Recorded horizon: `states.len() - 1`.
    pub horizon_h: usize,
    /// Whether the episode reached a terminal state within this prefix.
    pub terminated: bool,
}

impl Trajectory {
    /// Builds a trajectory, validating the length invariants.
    pub fn new(
        states: Vec<Vec<f64>>,
        rewards: Vec<f64>,
        actions: Option<Vec<usize>>,
        terminated: bool,
    ) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::InvalidConfig("trajectory needs at least one state".into()));
        }
        if !rewards.is_empty() && rewards.len() != states.len() - 1 {
            return Err(Error::InvalidConfig(format!(
                "got {} rewards for {} states; expected {} or none",
                rewards.len(),
                states.len(),
                states.len() - 1
            )));
        }
        if let Some(a) = &actions {
            if a.len() != states.len() {
                return Err(Error::InvalidConfig(format!(
                    "got {} actions for {} states; expected one per state",
                    a.len(),
                    states.len()
                )));
            }
        }
        let horizon_h = states.len() - 1;
        Ok(Self { states, rewards, actions, horizon_h, terminated })
    }

    /// All state components concatenated in visit order (feature-map input).
    pub fn flat_states(&self) -> Vec<f64> {
        self.states.iter().flatten().copied().collect()
    }

    /// State ids for discrete domains (each state must be 1-dimensional).
    pub fn state_ids(&self) -> Result<Vec<u64>> {
        self.states
            .iter()
            .map(|s| {
                if s.len() != 1 {
                    return Err(Error::UnsupportedDomain(
                        "discrete operation on a multi-dimensional state".into(),
                    ));
                }
                Ok(s[0].round() as u64)
            })
            .collect()
    }

    /// The action the policy chose at the final recorded state, if recorded.
    pub fn next_action(&self) -> Option<usize> {
        self.actions.as_ref().map(|a| *a.last().expect("validated non-empty"))
    }
}

/// A trajectory prefix labeled with the episode's full-horizon return.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledTrajectory {
    pub prefix: Trajectory,
    /// Return `G` over the full horizon (discounted where the domain says so).
    pub full_return: f64,
}

impl LabeledTrajectory {
    pub fn new(prefix: Trajectory, full_return: f64) -> Result<Self> {
        if !full_return.is_finite() {
            return Err(Error::InvalidConfig(format!("non-finite return {full_return}")));
        }
        Ok(Self { prefix, full_return })
    }
}

/// Full-horizon historical data collected under the behavior policy.
#[derive(Debug, Clone, PartialEq)]
pub struct BehaviorDataset {
    pub items: Vec<LabeledTrajectory>,
}

impl BehaviorDataset {
    pub fn new(items: Vec<LabeledTrajectory>) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::InsufficientData("behavior dataset is empty".into()));
        }
        Ok(Self { items })
    }

    pub fn size_n(&self) -> usize {
        self.items.len()
    }

    /// Observed full-horizon returns in item order.
    pub fn returns(&self) -> Vec<f64> {
        self.items.iter().map(|it| it.full_return).collect()
    }
}

/// Short-horizon on-policy prefixes from the target policy (returns unseen).
#[derive(Debug, Clone, PartialEq)]
pub struct TargetDataset {
    pub items: Vec<Trajectory>,
}

impl TargetDataset {
    pub fn new(items: Vec<Trajectory>) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::InsufficientData("target dataset is empty".into()));
        }
        Ok(Self { items })
    }

    pub fn size_m(&self) -> usize {
        self.items.len()
    }
}

/// Horizon bookkeeping: the recording cutoff `h`, the full horizon `H`, and
/// the discount applied to returns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HorizonConfig {
    pub short_h: usize,
    pub full_h: usize,
    pub discount: f64,
}

impl HorizonConfig {
    pub fn new(short_h: usize, full_h: usize, discount: f64) -> Result<Self> {
        if short_h < 1 {
            return Err(Error::InvalidConfig("short_h must be at least 1".into()));
        }
        if short_h > full_h {
            return Err(Error::InvalidConfig(format!(
                "short_h {short_h} exceeds full_h {full_h}"
            )));
        }
        if !(discount > 0.0 && discount <= 1.0) {
            return Err(Error::InvalidConfig(format!("discount {discount} outside (0, 1]")));
        }
        Ok(Self { short_h, full_h, discount })
    }
}

/// Cross-fitting fold assignments for a behavior/target dataset pair.
///
/// Assignments are stored explicitly (never recomputed) so any estimator run
/// can be replayed bit for bit from the persisted plan.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldPlan {
    pub k: usize,
    pub behavior_fold_of: Vec<usize>,
    pub target_fold_of: Vec<usize>,
}

impl FoldPlan {
    /// Indices of behavior items inside fold `fold`.
    pub fn behavior_in(&self, fold: usize) -> Vec<usize> {
        indices_eq(&self.behavior_fold_of, fold)
    }

    /// Indices of behavior items outside fold `fold` (the training complement).
    pub fn behavior_out(&self, fold: usize) -> Vec<usize> {
        indices_ne(&self.behavior_fold_of, fold)
    }

    pub fn target_in(&self, fold: usize) -> Vec<usize> {
        indices_eq(&self.target_fold_of, fold)
    }

    pub fn target_out(&self, fold: usize) -> Vec<usize> {
        indices_ne(&self.target_fold_of, fold)
    }
}

fn indices_eq(assignment: &[usize], fold: usize) -> Vec<usize> {
    assignment
        .iter()
        .enumerate()
        .filter_map(|(i, &f)| (f == fold).then_some(i))
        .collect()
}

fn indices_ne(assignment: &[usize], fold: usize) -> Vec<usize> {
    assignment
        .iter()
        .enumerate()
        .filter_map(|(i, &f)| (f != fold).then_some(i))
        .collect()
}

/// Assigns `n` behavior items and `m` target items to `k` folds.
///
/// Each dataset is shuffled with its own seeded stream and folds are dealt
/// round-robin over the shuffled order, so folds are a uniformly random
/// balanced partition (sizes differ by at most one) and generation-order
/// artifacts cannot leak into fold structure.
pub fn make_fold_plan(n: usize, m: usize, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::InvalidConfig(format!("cross-fitting needs k >= 2, got {k}")));
    }
    if n < k || m < k {
        return Err(Error::InsufficientData(format!(
            "need at least k={k} items per dataset for cross-fitting; got n={n}, m={m}"
        )));
    }
    Ok(FoldPlan {
        k,
        behavior_fold_of: shuffled_round_robin(n, k, seed, "behavior"),
        target_fold_of: shuffled_round_robin(m, k, seed, "target"),
    })
}

fn shuffled_round_robin(len: usize, k: usize, seed: u64, side: &str) -> Vec<usize> {
    let mut order: Vec<usize> = (0..len).collect();
    order.shuffle(&mut rng::stream(seed, &["fold-plan", side]));
    let mut fold_of = vec![0usize; len];
    for (pos, &item) in order.iter().enumerate() {
        fold_of[item] = pos % k;
    }
    fold_of
}

/// Cuts a labeled trajectory down to an `h`-step prefix.
///
/// The full-horizon return label is untouched. Episodes that terminated
/// before `h` are already as long as they will ever be, so they pass through
/// unchanged; asking a *non*-terminated trajectory for more steps than it
/// recorded is an error.
pub fn truncate(labeled: &LabeledTrajectory, h: usize) -> Result<LabeledTrajectory> {
    let recorded = labeled.prefix.horizon_h;
    if h >= recorded {
        if h == recorded || labeled.prefix.terminated {
            return Ok(labeled.clone());
        }
        return Err(Error::HorizonExceeded { requested: h, recorded });
    }
    let p = &labeled.prefix;
    let prefix = Trajectory::new(
        p.states[..=h].to_vec(),
        if p.rewards.is_empty() { Vec::new() } else { p.rewards[..h].to_vec() },
        p.actions.as_ref().map(|a| a[..=h].to_vec()),
        false, // a strict prefix of a longer recording never ends terminal
    )?;
    LabeledTrajectory::new(prefix, labeled.full_return)
}

/// Truncates every item of a behavior dataset to an `h`-step prefix.
pub fn truncate_dataset(data: &BehaviorDataset, h: usize) -> Result<BehaviorDataset> {
    BehaviorDataset::new(
        data.items.iter().map(|it| truncate(it, h)).collect::<Result<Vec<_>>>()?,
    )
}

/// `Σ_t discount^t · r_t` — the (possibly discounted) return of a reward
/// sequence, with `r_0` undiscounted.
pub fn discounted_return(rewards: &[f64], discount: f64) -> f64 {
    let mut total = 0.0;
    let mut scale = 1.0;
    for &r in rewards {
        total += scale * r;
        scale *= discount;
    }
    total
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

fn format_state(state: &[f64]) -> String {
    state.iter().map(|v| format!("{v}")).collect::<Vec<_>>().join(";")
}

fn parse_state(field: &str, line: usize) -> Result<Vec<f64>> {
    field
        .split(';')
        .map(|part| {
            part.trim().parse::<f64>().map_err(|e| Error::Serialization {
                line,
                message: format!("bad state component '{part}': {e}"),
            })
        })
        .collect()
}

fn format_record(
    traj_id: usize,
    fold: Option<usize>,
    t: &Trajectory,
    full_return: Option<f64>,
) -> String {
    let mut fields = vec![
        traj_id.to_string(),
        fold.map(|f| f.to_string()).unwrap_or_default(),
        t.horizon_h.to_string(),
    ];
    fields.extend(t.states.iter().map(|s| format_state(s)));
    fields.extend(t.rewards.iter().map(|r| format!("{r}")));
    fields.push(full_return.map(|g| format!("{g}")).unwrap_or_default());
    fields.push(if t.terminated { "1" } else { "0" }.to_string());
    fields.push(
        t.actions
            .as_ref()
            .map(|a| a.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";"))
            .unwrap_or_default(),
    );
    fields.join(",")
}

struct ParsedRecord {
    trajectory: Trajectory,
    fold: Option<usize>,
    full_return: Option<f64>,
}

fn parse_record(text: &str, line: usize) -> Result<ParsedRecord> {
    let fields: Vec<&str> = text.split(',').collect();
    if fields.len() < 7 {
        return Err(Error::Serialization {
            line,
            message: format!("expected at least 7 fields, got {}", fields.len()),
        });
    }
    let parse_usize = |field: &str, what: &str| {
        field.trim().parse::<usize>().map_err(|e| Error::Serialization {
            line,
            message: format!("bad {what} '{field}': {e}"),
        })
    };
    let fold = match fields[1].trim() {
        "" => None,
        f => Some(parse_usize(f, "fold id")?),
    };
    let h = parse_usize(fields[2], "horizon")?;
    let n_states = h + 1;
    // Trailing fields are fixed: G, terminated, actions. Whatever sits
    // between the states and those three is the reward block.
    let tail_start = fields.len() - 3;
    if 3 + n_states > tail_start {
        return Err(Error::Serialization {
            line,
            message: format!("horizon {h} inconsistent with {} fields", fields.len()),
        });
    }
    let states = fields[3..3 + n_states]
        .iter()
        .map(|f| parse_state(f, line))
        .collect::<Result<Vec<_>>>()?;
    let rewards = fields[3 + n_states..tail_start]
        .iter()
        .map(|f| {
            f.trim().parse::<f64>().map_err(|e| Error::Serialization {
                line,
                message: format!("bad reward '{f}': {e}"),
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    let full_return = match fields[tail_start].trim() {
        "" => None,
        g => Some(g.parse::<f64>().map_err(|e| Error::Serialization {
            line,
            message: format!("bad return '{g}': {e}"),
        })?),
    };
    let terminated = match fields[tail_start + 1].trim() {
        "0" => false,
        "1" => true,
        other => {
            return Err(Error::Serialization {
                line,
                message: format!("bad terminated flag '{other}'"),
            })
        }
    };
    let actions = match fields[tail_start + 2].trim() {
        "" => None,
        joined => Some(
            joined
                .split(';')
                .map(|a| parse_usize(a, "action"))
                .collect::<Result<Vec<usize>>>()?,
        ),
    };
    let trajectory =
        Trajectory::new(states, rewards, actions, terminated).map_err(|e| Error::Serialization {
            line,
            message: e.to_string(),
        })?;
    Ok(ParsedRecord { trajectory, fold, full_return })
}

/// Writes a behavior dataset (optionally with fold assignments) as CSV lines.
pub fn write_behavior_csv(
    out: &mut dyn Write,
    data: &BehaviorDataset,
    folds: Option<&FoldPlan>,
) -> Result<()> {
    for (i, item) in data.items.iter().enumerate() {
        let fold = folds.map(|f| f.behavior_fold_of[i]);
        writeln!(out, "{}", format_record(i, fold, &item.prefix, Some(item.full_return)))?;
    }
    Ok(())
}

/// Writes a target dataset as CSV lines; the return column stays empty.
pub fn write_target_csv(
    out: &mut dyn Write,
    data: &TargetDataset,
    folds: Option<&FoldPlan>,
) -> Result<()> {
    for (i, item) in data.items.iter().enumerate() {
        let fold = folds.map(|f| f.target_fold_of[i]);
        writeln!(out, "{}", format_record(i, fold, item, None))?;
    }
    Ok(())
}

/// Reads a behavior dataset back, returning fold assignments when present.
pub fn read_behavior_csv(input: &mut dyn Read) -> Result<(BehaviorDataset, Option<Vec<usize>>)> {
    let mut items = Vec::new();
    let mut folds = Vec::new();
    for (idx, line) in BufReader::new(input).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = parse_record(&line, idx + 1)?;
        let g = rec.full_return.ok_or_else(|| Error::Serialization {
            line: idx + 1,
            message: "behavior record missing return".into(),
        })?;
        items.push(LabeledTrajectory::new(rec.trajectory, g)?);
        folds.push(rec.fold);
    }
    let data = BehaviorDataset::new(items)?;
    Ok((data, collect_folds(folds)?))
}

/// Reads a target dataset back, returning fold assignments when present.
pub fn read_target_csv(input: &mut dyn Read) -> Result<(TargetDataset, Option<Vec<usize>>)> {
    let mut items = Vec::new();
    let mut folds = Vec::new();
    for (idx, line) in BufReader::new(input).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = parse_record(&line, idx + 1)?;
        if rec.full_return.is_some() {
            return Err(Error::Serialization {
                line: idx + 1,
                message: "target record carries a return; target returns are unobserved".into(),
            });
        }
        items.push(rec.trajectory);
        folds.push(rec.fold);
    }
    let data = TargetDataset::new(items)?;
    Ok((data, collect_folds(folds)?))
}

fn collect_folds(per_item: Vec<Option<usize>>) -> Result<Option<Vec<usize>>> {
    if per_item.iter().all(|f| f.is_none()) {
        return Ok(None);
    }
    per_item
        .into_iter()
        .enumerate()
        .map(|(i, f)| {
            f.ok_or_else(|| Error::Serialization {
                line: i + 1,
                message: "fold id present on some records but missing here".into(),
            })
        })
        .collect::<Result<Vec<usize>>>()
        .map(Some)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn chain_labeled(h: usize, terminated: bool) -> LabeledTrajectory {
        let states: Vec<Vec<f64>> = (0..=h).map(|t| vec![t as f64]).collect();
        let rewards: Vec<f64> = (0..h).map(|t| t as f64).collect();
        let actions: Vec<usize> = (0..=h).map(|t| t % 3).collect();
        LabeledTrajectory::new(
            Trajectory::new(states, rewards, Some(actions), terminated).unwrap(),
            4.5,
        )
        .unwrap()
    }

    #[test]
    fn discounted_return_plain_sum_when_undiscounted() {
        assert_abs_diff_eq!(discounted_return(&[1.0, 1.0], 1.0), 2.0);
    }

    #[test]
    fn discounted_return_final_step_power() {
        let mut rewards = vec![0.0; 20];
        rewards[19] = 1.0;
        assert_abs_diff_eq!(
            discounted_return(&rewards, 0.99),
            0.8261686238, // 0.99^19
            epsilon = 1e-10
        );
    }

    #[test]
    fn discounted_return_empty_is_zero() {
        assert_abs_diff_eq!(discounted_return(&[], 0.9), 0.0);
    }

    #[test]
    fn truncate_keeps_label_and_slices() {
        let full = chain_labeled(20, false);
        let cut = truncate(&full, 2).unwrap();
        assert_eq!(cut.prefix.states.len(), 3);
        assert_eq!(cut.prefix.rewards.len(), 2);
        assert_eq!(cut.prefix.actions.as_ref().unwrap().len(), 3);
        assert_eq!(cut.prefix.horizon_h, 2);
        assert_abs_diff_eq!(cut.full_return, full.full_return);
        assert!(!cut.prefix.terminated);
    }

    #[test]
    fn truncate_full_length_is_identity() {
        let full = chain_labeled(5, false);
        assert_eq!(truncate(&full, 5).unwrap(), full);
    }

    #[test]
    fn truncate_to_zero_keeps_initial_state_only() {
        let cut = truncate(&chain_labeled(5, false), 0).unwrap();
        assert_eq!(cut.prefix.states, vec![vec![0.0]]);
        assert!(cut.prefix.rewards.is_empty());
        assert_eq!(cut.prefix.actions.as_ref().unwrap().len(), 1);
    }

    #[test]
    fn truncate_is_idempotent() {
        let once = truncate(&chain_labeled(9, false), 4).unwrap();
        let twice = truncate(&once, 4).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn truncate_rejects_overlong_request() {
        let err = truncate(&chain_labeled(3, false), 4).unwrap_err();
        assert!(matches!(err, Error::HorizonExceeded { requested: 4, recorded: 3 }));
    }

    #[test]
    fn truncate_passes_short_terminated_episodes_through() {
        let ended = chain_labeled(1, true);
        let cut = truncate(&ended, 5).unwrap();
        assert_eq!(cut, ended);
        assert!(cut.prefix.terminated);
    }

    #[test]
    fn fold_plan_balances_even_split() {
        let plan = make_fold_plan(4, 4, 2, 0).unwrap();
        for assignment in [&plan.behavior_fold_of, &plan.target_fold_of] {
            let c0 = assignment.iter().filter(|&&f| f == 0).count();
            assert_eq!(c0, 2);
            assert_eq!(assignment.len(), 4);
        }
    }

    #[test]
    fn fold_plan_spreads_remainder() {
        let plan = make_fold_plan(5, 5, 2, 11).unwrap();
        let mut sizes: Vec<usize> =
            (0..2).map(|f| plan.behavior_in(f).len()).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![2, 3]);
    }

    #[test]
    fn fold_plan_rejects_tiny_datasets() {
        assert!(matches!(make_fold_plan(1, 1, 2, 0), Err(Error::InsufficientData(_))));
        assert!(matches!(make_fold_plan(10, 10, 1, 0), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn fold_plan_deterministic_per_seed() {
        assert_eq!(make_fold_plan(30, 10, 3, 5).unwrap(), make_fold_plan(30, 10, 3, 5).unwrap());
        assert_ne!(
            make_fold_plan(30, 10, 3, 5).unwrap().behavior_fold_of,
            make_fold_plan(30, 10, 3, 6).unwrap().behavior_fold_of
        );
    }

    #[test]
    fn fold_helpers_partition_indices() {
        let plan = make_fold_plan(7, 5, 3, 2).unwrap();
        for fold in 0..3 {
            let mut joined = plan.behavior_in(fold);
            joined.extend(plan.behavior_out(fold));
            joined.sort_unstable();
            assert_eq!(joined, (0..7).collect::<Vec<_>>());
        }
    }

    #[test]
    fn trajectory_validates_lengths() {
        assert!(Trajectory::new(vec![], vec![], None, false).is_err());
        assert!(Trajectory::new(vec![vec![0.0]], vec![1.0], None, false).is_err());
        assert!(
            Trajectory::new(vec![vec![0.0], vec![1.0]], vec![], Some(vec![0]), false).is_err()
        );
        // Toy-style: two states, no rewards.
        let toy = Trajectory::new(vec![vec![0.3], vec![1.5]], vec![], None, false).unwrap();
        assert_eq!(toy.horizon_h, 1);
    }

    #[test]
    fn horizon_config_validates() {
        assert!(HorizonConfig::new(2, 20, 0.99).is_ok());
        assert!(HorizonConfig::new(0, 20, 0.99).is_err());
        assert!(HorizonConfig::new(21, 20, 0.99).is_err());
        assert!(HorizonConfig::new(2, 20, 0.0).is_err());
        assert!(HorizonConfig::new(2, 20, 1.1).is_err());
    }

    #[test]
    fn behavior_csv_round_trips() {
        let data = BehaviorDataset::new(vec![
            chain_labeled(3, false),
            chain_labeled(1, true),
        ])
        .unwrap();
        let plan = FoldPlan { k: 2, behavior_fold_of: vec![1, 0], target_fold_of: vec![] };
        let mut buf = Vec::new();
        write_behavior_csv(&mut buf, &data, Some(&plan)).unwrap();
        let (back, folds) = read_behavior_csv(&mut buf.as_slice()).unwrap();
        assert_eq!(back, data);
        assert_eq!(folds, Some(vec![1, 0]));
    }

    #[test]
    fn target_csv_round_trips_with_vector_states() {
        let toy = Trajectory::new(vec![vec![0.25], vec![1.5]], vec![], None, false).unwrap();
        let wide =
            Trajectory::new(vec![vec![0.1, 0.2], vec![0.3, -0.4]], vec![], None, false).unwrap();
        let data = TargetDataset::new(vec![toy, wide]).unwrap();
        let mut buf = Vec::new();
        write_target_csv(&mut buf, &data, None).unwrap();
        let (back, folds) = read_target_csv(&mut buf.as_slice()).unwrap();
        assert_eq!(back, data);
        assert_eq!(folds, None);
    }

    #[test]
    fn target_reader_rejects_labeled_records() {
        let data = BehaviorDataset::new(vec![chain_labeled(2, false)]).unwrap();
        let mut buf = Vec::new();
        write_behavior_csv(&mut buf, &data, None).unwrap();
        assert!(matches!(
            read_target_csv(&mut buf.as_slice()),
            Err(Error::Serialization { .. })
        ));
    }
}
