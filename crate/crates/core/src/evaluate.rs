//! Value vectors: exact forward dynamic programming and seeded Monte Carlo.
//!
//! The exact evaluator runs one forward pass per objective over the
//! augmented state `(env state, policy memory, objective status)` where the
//! status carries both monitor states, the activity timer and the
//! success/activation counters. Mass leaving the episode is collected into
//! the joint distribution of `(successes, activations)`, from which every
//! aggregation mode is derived.
//!
//! Monte Carlo episode `i` draws from a ChaCha8 generator seeded with the
//! run seed and switched to stream `i`, so any episode can be regenerated
//! on its own and the run is identical on every platform.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::monitor::MonitorState;
use crate::objective::{AggregationMode, CompiledObjective, CompiledTask, EpisodeRecorder, EpisodeTrace, ObjectiveStatus};
use crate::policy::Policy;
use crate::task::{EpisodicTask, StateId};

/// Default bound on augmented states alive at one step of the forward pass.
pub const DEFAULT_STATE_CAP: usize = 10_000_000;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValueVector {
    pub values: Vec<f64>,
    pub mode: AggregationMode,
}

impl ValueVector {
    pub fn new(values: Vec<f64>, mode: AggregationMode) -> Self {
        ValueVector { values, mode }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl std::ops::Deref for ValueVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.values
    }
}

/// Per objective, probability of each `(successes, activations)` outcome.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct OutcomeDistribution {
    pub per_objective: Vec<BTreeMap<(u32, u32), f64>>,
}

impl OutcomeDistribution {
    pub fn total_mass(&self, objective: usize) -> f64 {
        self.per_objective[objective].values().sum()
    }

    /// Value of one objective under `mode`.
    pub fn value(&self, objective: usize, mode: AggregationMode) -> f64 {
        value_from_outcomes(&self.per_objective[objective], mode)
    }

    pub fn values(&self, mode: AggregationMode) -> ValueVector {
        ValueVector::new(
            (0..self.per_objective.len()).map(|i| self.value(i, mode)).collect(),
            mode,
        )
    }
}

fn value_from_outcomes(dist: &BTreeMap<(u32, u32), f64>, mode: AggregationMode) -> f64 {
    match mode {
        AggregationMode::EpisodeMeanZeroDefault => dist
            .iter()
            .filter(|((_, act), _)| *act > 0)
            .map(|(&(succ, act), p)| p * f64::from(succ) / f64::from(act))
            .sum(),
        AggregationMode::EpisodeMeanConditional => {
            let (mut num, mut den) = (0.0, 0.0);
            for (&(succ, act), p) in dist {
                if act > 0 {
                    num += p * f64::from(succ) / f64::from(act);
                    den += p;
                }
            }
            if den > 0.0 {
                num / den
            } else {
                0.0
            }
        }
        AggregationMode::RatioOfExpectations => {
            let (mut succ_sum, mut act_sum) = (0.0, 0.0);
            for (&(succ, act), p) in dist {
                succ_sum += p * f64::from(succ);
                act_sum += p * f64::from(act);
            }
            if act_sum > 0.0 {
                succ_sum / act_sum
            } else {
                0.0
            }
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct EvalOptions {
    pub max_augmented_states: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            max_augmented_states: DEFAULT_STATE_CAP,
        }
    }
}

/// A task with its objectives compiled, reusable across many policies.
pub struct Evaluator<'a> {
    compiled: CompiledTask<'a>,
    options: EvalOptions,
}

type AugmentedState = (StateId, MonitorState, ObjectiveStatus);

impl<'a> Evaluator<'a> {
    pub fn new(task: &'a EpisodicTask) -> Result<Self> {
        Ok(Evaluator {
            compiled: CompiledTask::new(task)?,
            options: EvalOptions::default(),
        })
    }

    pub fn with_options(mut self, options: EvalOptions) -> Self {
        self.options = options;
        self
    }

    pub fn task(&self) -> &'a EpisodicTask {
        self.compiled.task
    }

    pub fn compiled(&self) -> &CompiledTask<'a> {
        &self.compiled
    }

    pub fn outcomes(&self, policy: &Policy) -> Result<OutcomeDistribution> {
        policy.validate(&self.task().mdp)?;
        #[cfg(feature = "parallel")]
        let per_objective = {
            use rayon::prelude::*;
            self.compiled
                .objectives
                .par_iter()
                .map(|o| self.objective_outcomes(o, policy))
                .collect::<Result<Vec<_>>>()?
        };
        #[cfg(not(feature = "parallel"))]
        let per_objective = self
            .compiled
            .objectives
            .iter()
            .map(|o| self.objective_outcomes(o, policy))
            .collect::<Result<Vec<_>>>()?;
        Ok(OutcomeDistribution { per_objective })
    }

    pub fn exact(&self, policy: &Policy, mode: AggregationMode) -> Result<(ValueVector, OutcomeDistribution)> {
        let outcomes = self.outcomes(policy)?;
        Ok((outcomes.values(mode), outcomes))
    }

    fn objective_outcomes(&self, obj: &CompiledObjective, policy: &Policy) -> Result<BTreeMap<(u32, u32), f64>> {
        let task = self.task();
        let mdp = &task.mdp;
        let mut done: BTreeMap<(u32, u32), f64> = BTreeMap::new();
        let mut layer: BTreeMap<AugmentedState, f64> = BTreeMap::new();

        for &(s0, p) in &mdp.initial {
            if p <= 0.0 {
                continue;
            }
            let over = task.is_terminal(s0);
            let st = obj.start(s0, over);
            if over {
                *done.entry((st.successes, st.activations)).or_insert(0.0) += p;
            } else {
                *layer.entry((s0, policy.initial_memory(s0), st)).or_insert(0.0) += p;
            }
        }

        for t in 0..task.horizon {
            if layer.is_empty() {
                break;
            }
            let mut next_layer: BTreeMap<AugmentedState, f64> = BTreeMap::new();
            for (&(s, m, st), &p) in &layer {
                let dist = policy.distribution(m, s)?;
                for (a, &pa) in dist.iter().enumerate() {
                    if pa <= 0.0 {
                        continue;
                    }
                    let a = crate::task::ActionId(a);
                    for &(next, ps) in mdp.row(s, a) {
                        if ps <= 0.0 {
                            continue;
                        }
                        let q = p * pa * ps;
                        let over = task.ends_after(t, next);
                        let (st2, _) = obj.step(&st, a, next, over)?;
                        if over {
                            *done.entry((st2.successes, st2.activations)).or_insert(0.0) += q;
                        } else {
                            *next_layer.entry((next, policy.observe(m, a, next), st2)).or_insert(0.0) += q;
                        }
                    }
                }
                if next_layer.len() > self.options.max_augmented_states {
                    return Err(Error::CapExceeded {
                        what: "augmented state layer (use Monte Carlo instead)",
                        count: next_layer.len() as u128,
                        cap: self.options.max_augmented_states as u128,
                    });
                }
            }
            layer = next_layer;
        }
        debug_assert!(layer.is_empty(), "episodes must end by the horizon");
        Ok(done)
    }

    /// Runs one episode. All randomness comes from `rng`.
    pub fn sample_episode(&self, policy: &Policy, rng: &mut ChaCha8Rng) -> Result<EpisodeTrace> {
        let mdp = &self.task().mdp;
        let s0 = mdp.sample_initial(rng);
        let mut rec = EpisodeRecorder::new(&self.compiled, s0);
        let mut m = policy.initial_memory(s0);
        while !rec.is_over() {
            let s = rec.current_state();
            let a = policy.act(m, s, rng)?;
            let next = mdp.sample_next(s, a, rng);
            m = policy.observe(m, a, next);
            rec.push(a, next)?;
        }
        rec.finish()
    }

    pub fn monte_carlo(&self, policy: &Policy, episodes: u64, seed: u64, mode: AggregationMode) -> Result<McEstimate> {
        if episodes == 0 {
            return Err(Error::Empty("Monte Carlo needs at least one episode"));
        }
        policy.validate(&self.task().mdp)?;
        let k = self.compiled.objectives.len();
        let run = |i: u64| -> Result<Vec<(u32, u32)>> {
            let trace = self.sample_episode(policy, &mut episode_rng(seed, i))?;
            Ok((0..k).map(|o| trace.counts(o)).collect())
        };
        #[cfg(feature = "parallel")]
        let counts = {
            use rayon::prelude::*;
            (0..episodes).into_par_iter().map(run).collect::<Result<Vec<_>>>()?
        };
        #[cfg(not(feature = "parallel"))]
        let counts = (0..episodes).map(run).collect::<Result<Vec<_>>>()?;

        let mut values = Vec::with_capacity(k);
        let mut standard_errors = Vec::with_capacity(k);
        for o in 0..k {
            let (v, se) = aggregate_samples(counts.iter().map(|c| c[o]), mode);
            values.push(v);
            standard_errors.push(se);
        }
        Ok(McEstimate {
            values: ValueVector::new(values, mode),
            standard_errors,
            episodes,
            seed,
        })
    }
}

/// Generator for Monte Carlo episode `index` of a run seeded with `seed`.
pub fn episode_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn aggregate_samples(samples: impl Iterator<Item = (u32, u32)>, mode: AggregationMode) -> (f64, f64) {
    let samples: Vec<(u32, u32)> = samples.collect();
    let ratio = |s: u32, a: u32| f64::from(s) / f64::from(a);
    match mode {
        AggregationMode::EpisodeMeanZeroDefault => {
            let xs: Vec<f64> = samples.iter().map(|&(s, a)| if a == 0 { 0.0 } else { ratio(s, a) }).collect();
            mean_and_se(&xs)
        }
        AggregationMode::EpisodeMeanConditional => {
            let xs: Vec<f64> = samples.iter().filter(|(_, a)| *a > 0).map(|&(s, a)| ratio(s, a)).collect();
            mean_and_se(&xs)
        }
        AggregationMode::RatioOfExpectations => {
            let n = samples.len() as f64;
            let succ: Vec<f64> = samples.iter().map(|&(s, _)| f64::from(s)).collect();
            let act: Vec<f64> = samples.iter().map(|&(_, a)| f64::from(a)).collect();
            let (ms, ma) = (succ.iter().sum::<f64>() / n, act.iter().sum::<f64>() / n);
            if ma == 0.0 {
                return (0.0, 0.0);
            }
            let r = ms / ma;
            // delta method on the residuals s - r·a
            let resid: Vec<f64> = succ.iter().zip(&act).map(|(s, a)| s - r * a).collect();
            let (_, se_resid) = mean_and_se(&resid);
            (r, se_resid / ma)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct McEstimate {
    pub values: ValueVector,
    pub standard_errors: Vec<f64>,
    pub episodes: u64,
    pub seed: u64,
}

pub fn evaluate_exact(
    task: &EpisodicTask,
    policy: &Policy,
    mode: AggregationMode,
) -> Result<(ValueVector, OutcomeDistribution)> {
    Evaluator::new(task)?.exact(policy, mode)
}

pub fn evaluate_mc(
    task: &EpisodicTask,
    policy: &Policy,
    episodes: u64,
    seed: u64,
    mode: AggregationMode,
) -> Result<McEstimate> {
    Evaluator::new(task)?.monte_carlo(policy, episodes, seed, mode)
}

/// Episode traces for `episodes` seeded runs; episode `i` matches Monte Carlo episode `i`.
pub fn simulate(task: &EpisodicTask, policy: &Policy, episodes: u64, seed: u64) -> Result<Vec<EpisodeTrace>> {
    let ev = Evaluator::new(task)?;
    policy.validate(&task.mdp)?;
    (0..episodes)
        .map(|i| ev.sample_episode(policy, &mut episode_rng(seed, i)))
        .collect()
}

/// Weighted sum of values.
pub fn reconstruct_scalar(values: &[f64], weights: &[f64]) -> Result<f64> {
    if values.len() != weights.len() {
        return Err(Error::LengthMismatch {
            expected: values.len(),
            found: weights.len(),
        });
    }
    Ok(values.iter().zip(weights).map(|(v, w)| v * w).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gallery;
    use crate::policy::StationaryPolicy;

    fn sd(task: &EpisodicTask, choices: &[(&str, &str)]) -> Policy {
        StationaryPolicy::deterministic(
            &task.mdp,
            choices
                .iter()
                .map(|(s, a)| (task.mdp.state(s).unwrap(), task.mdp.action(a).unwrap())),
        )
        .into()
    }

    #[test]
    fn investment_event_probabilities() {
        let task = gallery::fixture("investment").unwrap().task;
        let (v, dist) = evaluate_exact(&task, &sd(&task, &[("s0", "a1")]), AggregationMode::default()).unwrap();
        assert_eq!(v.values, vec![0.9, 0.1, 0.0, 0.0]);
        for i in 0..4 {
            assert!((dist.total_mass(i) - 1.0).abs() < 1e-12);
        }
        let (v, _) = evaluate_exact(&task, &sd(&task, &[("s0", "a2")]), AggregationMode::default()).unwrap();
        assert_eq!(v.values, vec![0.0, 0.0, 0.7, 0.3]);
    }

    #[test]
    fn fork_uniform_is_one_half_each() {
        let task = gallery::fixture("fork").unwrap().task;
        let (v, _) = evaluate_exact(&task, &StationaryPolicy::uniform(&task).into(), AggregationMode::default()).unwrap();
        assert_eq!(v.values, vec![0.5, 0.5]);
    }

    #[test]
    fn two_starts_modes_differ_where_activation_is_partial() {
        let task = gallery::fixture("two_starts").unwrap().task;
        let p: Policy = gallery::two_starts_memory_policy(&task).into();
        let (d, _) = evaluate_exact(&task, &p, AggregationMode::EpisodeMeanZeroDefault).unwrap();
        let (c, _) = evaluate_exact(&task, &p, AggregationMode::EpisodeMeanConditional).unwrap();
        let (r, _) = evaluate_exact(&task, &p, AggregationMode::RatioOfExpectations).unwrap();
        assert_eq!(d.values, vec![0.5, 0.5]);
        assert_eq!(c.values, vec![1.0, 1.0]);
        assert_eq!(r.values, vec![1.0, 1.0]);
    }

    #[test]
    fn deterministic_mc_has_zero_error() {
        let task = gallery::fixture("taxi").unwrap().task;
        let p = sd(&task, &[("s0", "a1"), ("c", "a1"), ("p1", "a1"), ("p2", "a2")]);
        let est = evaluate_mc(&task, &p, 50, 3, AggregationMode::default()).unwrap();
        let (exact, _) = evaluate_exact(&task, &p, AggregationMode::default()).unwrap();
        assert_eq!(est.values.values, exact.values);
        assert!(est.standard_errors.iter().all(|&se| se == 0.0));
    }

    #[test]
    fn mc_is_reproducible_and_seed_dependent() {
        let task = gallery::fixture("fork").unwrap().task;
        let p: Policy = StationaryPolicy::uniform(&task).into();
        let a = evaluate_mc(&task, &p, 500, 11, AggregationMode::default()).unwrap();
        let b = evaluate_mc(&task, &p, 500, 11, AggregationMode::default()).unwrap();
        let c = evaluate_mc(&task, &p, 500, 12, AggregationMode::default()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.seed, 11);
        assert_eq!(c.seed, 12);
        let ta = simulate(&task, &p, 50, 11).unwrap();
        let tc = simulate(&task, &p, 50, 12).unwrap();
        assert_ne!(ta, tc);
        assert!(evaluate_mc(&task, &p, 0, 1, AggregationMode::default()).is_err());
    }

    #[test]
    fn simulate_matches_mc_episode_streams() {
        let task = gallery::fixture("two_starts").unwrap().task;
        let p: Policy = StationaryPolicy::uniform(&task).into();
        let traces = simulate(&task, &p, 20, 5).unwrap();
        let ev = Evaluator::new(&task).unwrap();
        for (i, t) in traces.iter().enumerate() {
            assert_eq!(&ev.sample_episode(&p, &mut episode_rng(5, i as u64)).unwrap(), t);
        }
    }

    #[test]
    fn state_cap_is_enforced() {
        let task = gallery::fixture("two_starts").unwrap().task;
        let ev = Evaluator::new(&task).unwrap().with_options(EvalOptions { max_augmented_states: 0 });
        let p: Policy = StationaryPolicy::uniform(&task).into();
        assert!(matches!(ev.exact(&p, AggregationMode::default()), Err(Error::CapExceeded { .. })));
    }

    #[test]
    fn reconstruct() {
        assert_eq!(reconstruct_scalar(&[0.9, 0.1, 0.0, 0.0], &[10.0, -10.0, 20.0, -20.0]).unwrap(), 8.0);
        assert_eq!(reconstruct_scalar(&[0.0, 0.0, 0.7, 0.3], &[10.0, -10.0, 20.0, -20.0]).unwrap(), 8.0);
        assert_eq!(reconstruct_scalar(&[0.3, 0.2], &[0.0, 0.0]).unwrap(), 0.0);
        assert!(reconstruct_scalar(&[0.3], &[1.0, 2.0]).is_err());
    }
}
