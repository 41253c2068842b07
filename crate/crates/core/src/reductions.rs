//! Constructions relating micro-objective tasks to standard RL.
//!
//! - [`generality_reduction`] turns a target stationary deterministic policy
//!   into one "take the target action here" event per non-terminal state,
//!   under the Pareto order. The target is then a maximal policy.
//! - [`expansion_reduction`] rewrites a discounted reward objective as a
//!   family of one-transition events `(t, s, a, s')`, each weighted by
//!   `γ^t · r(s, a, s')`; the weighted sum of their values is the
//!   discounted return. The family is finite because rewards vanish past
//!   the horizon.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluate::{evaluate_exact, reconstruct_scalar};
use crate::monitor::{MonitorSpec, MonitorState};
use crate::objective::{AggregationMode, MicroObjective};
use crate::order::PartialOrderSpec;
use crate::policy::{Policy, StationaryPolicy};
use crate::task::{ActionId, EpisodicMdp, EpisodicTask, Mdp, StateId};

/// Largest horizon the expansion accepts.
pub const DEFAULT_EXPANSION_HORIZON_CAP: u32 = 1000;

/// Reward `r(s, a, s')` and discount factor for one discounted objective.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscountedObjectiveSpec {
    pub reward: BTreeMap<(StateId, ActionId, StateId), f64>,
    pub gamma: f64,
}

impl DiscountedObjectiveSpec {
    pub fn new(gamma: f64) -> Self {
        DiscountedObjectiveSpec {
            reward: BTreeMap::new(),
            gamma,
        }
    }

    pub fn reward(&self, s: StateId, a: ActionId, next: StateId) -> f64 {
        self.reward.get(&(s, a, next)).copied().unwrap_or(0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::Parse(format!("gamma {} outside [0, 1]", self.gamma)));
        }
        if self.reward.values().any(|r| !r.is_finite()) {
            return Err(Error::Parse("rewards must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardEntry {
    pub from: String,
    pub action: String,
    pub to: String,
    pub reward: f64,
}

/// JSON form: `{"gamma": 0.9, "rewards": [{"from", "action", "to", "reward"}, ...]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardDocument {
    pub gamma: f64,
    pub rewards: Vec<RewardEntry>,
}

impl RewardDocument {
    pub fn resolve(&self, mdp: &Mdp) -> Result<DiscountedObjectiveSpec> {
        let mut spec = DiscountedObjectiveSpec::new(self.gamma);
        for e in &self.rewards {
            let key = (mdp.state(&e.from)?, mdp.action(&e.action)?, mdp.state(&e.to)?);
            *spec.reward.entry(key).or_insert(0.0) += e.reward;
        }
        spec.validate()?;
        Ok(spec)
    }
}

fn base_task(base: &EpisodicMdp, objectives: Vec<MicroObjective>, order: PartialOrderSpec) -> EpisodicTask {
    EpisodicTask {
        mdp: base.mdp.clone(),
        terminal: base.terminal.clone(),
        horizon: base.horizon,
        objectives,
        order,
    }
}

/// One "take `target(s)` in `s`" objective per non-terminal state, Pareto order.
pub fn generality_reduction(base: &EpisodicMdp, target: &StationaryPolicy) -> Result<EpisodicTask> {
    let mdp = &base.mdp;
    let mut objectives = Vec::new();
    for s in mdp.state_ids().filter(|s| !base.is_terminal(*s)) {
        let a = target.deterministic_action(s).ok_or_else(|| {
            Error::InvalidPolicy(format!(
                "target must choose one action in non-terminal state `{}`",
                mdp.state_name(s)
            ))
        })?;
        let (sn, an) = (mdp.state_name(s), mdp.action_name(a));
        objectives.push(MicroObjective::new(
            format!("take_{an}_in_{sn}"),
            MonitorSpec::states([sn]),
            MonitorSpec::StateActionSet {
                pairs: vec![(sn.to_string(), an.to_string())],
            },
            1,
        ));
    }
    Ok(base_task(base, objectives, PartialOrderSpec::Pareto))
}

/// Result of [`expansion_reduction`]: the task (ordered by the weighted sum)
/// and one weight per objective.
#[derive(Clone, Debug, PartialEq)]
pub struct Expansion {
    pub task: EpisodicTask,
    pub weights: Vec<f64>,
}

#[derive(Clone, Copy, Debug)]
pub struct ExpansionOptions {
    /// Drop `(t, s, a, s')` terms that cannot occur: `s` unreachable at step
    /// `t`, `s` terminal, or `P(s'|s,a) = 0`.
    pub prune: bool,
    pub max_horizon: u32,
}

impl Default for ExpansionOptions {
    fn default() -> Self {
        ExpansionOptions {
            prune: true,
            max_horizon: DEFAULT_EXPANSION_HORIZON_CAP,
        }
    }
}

/// States that can be occupied (non-terminal) at each step `0..T` under some policy.
fn reachable_by_step(base: &EpisodicMdp) -> Vec<BTreeSet<StateId>> {
    let mdp = &base.mdp;
    let mut layers = Vec::with_capacity(base.horizon as usize);
    let mut current: BTreeSet<StateId> = mdp
        .initial
        .iter()
        .filter(|(s, p)| *p > 0.0 && !base.is_terminal(*s))
        .map(|(s, _)| *s)
        .collect();
    for _ in 0..base.horizon {
        let mut next = BTreeSet::new();
        for &s in &current {
            for a in mdp.action_ids() {
                for &(t, p) in mdp.row(s, a) {
                    if p > 0.0 && !base.is_terminal(t) {
                        next.insert(t);
                    }
                }
            }
        }
        layers.push(std::mem::replace(&mut current, next));
    }
    layers
}

pub fn expansion_reduction(base: &EpisodicMdp, spec: &DiscountedObjectiveSpec) -> Result<Expansion> {
    expansion_reduction_with(base, spec, ExpansionOptions::default())
}

pub fn expansion_reduction_with(
    base: &EpisodicMdp,
    spec: &DiscountedObjectiveSpec,
    options: ExpansionOptions,
) -> Result<Expansion> {
    spec.validate()?;
    if base.horizon > options.max_horizon {
        return Err(Error::CapExceeded {
            what: "expansion horizon",
            count: u128::from(base.horizon),
            cap: u128::from(options.max_horizon),
        });
    }
    let mdp = &base.mdp;
    let reachable = options.prune.then(|| reachable_by_step(base));
    let mut objectives = Vec::new();
    let mut weights = Vec::new();
    for t in 0..base.horizon {
        for (&(s, a, next), &r) in &spec.reward {
            if r == 0.0 {
                continue;
            }
            if let Some(layers) = &reachable {
                let possible = mdp.row(s, a).iter().any(|&(x, p)| x == next && p > 0.0);
                if !layers[t as usize].contains(&s) || !possible {
                    continue;
                }
            }
            let (sn, an, nn) = (mdp.state_name(s), mdp.action_name(a), mdp.state_name(next));
            objectives.push(MicroObjective::new(
                format!("t{t}_{sn}_{an}_{nn}"),
                MonitorSpec::TimedStateSet {
                    states: vec![sn.to_string()],
                    times: vec![t],
                },
                MonitorSpec::TransitionSet {
                    transitions: vec![(sn.to_string(), an.to_string(), nn.to_string())],
                },
                1,
            ));
            weights.push(spec.gamma.powi(t as i32) * r);
        }
    }
    let order = PartialOrderSpec::Weighted {
        weights: weights.clone(),
    };
    Ok(Expansion {
        task: base_task(base, objectives, order),
        weights,
    })
}

/// Expected discounted return over the episode, by a forward pass over
/// `(state, policy memory)`. Independent of the micro-objective machinery.
pub fn discounted_value(base: &EpisodicMdp, spec: &DiscountedObjectiveSpec, policy: &Policy) -> Result<f64> {
    let mdp = &base.mdp;
    policy.validate(mdp)?;
    let mut layer: BTreeMap<(StateId, MonitorState), f64> = BTreeMap::new();
    for &(s, p) in &mdp.initial {
        if p > 0.0 && !base.is_terminal(s) {
            *layer.entry((s, policy.initial_memory(s))).or_insert(0.0) += p;
        }
    }
    let mut total = 0.0;
    let mut discount = 1.0;
    for _ in 0..base.horizon {
        let mut next_layer = BTreeMap::new();
        for (&(s, m), &p) in &layer {
            for (a, &pa) in policy.distribution(m, s)?.iter().enumerate() {
                if pa <= 0.0 {
                    continue;
                }
                let a = ActionId(a);
                for &(next, ps) in mdp.row(s, a) {
                    let q = p * pa * ps;
                    total += discount * q * spec.reward(s, a, next);
                    if !base.is_terminal(next) {
                        *next_layer.entry((next, policy.observe(m, a, next))).or_insert(0.0) += q;
                    }
                }
            }
        }
        layer = next_layer;
        discount *= spec.gamma;
    }
    Ok(total)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExpansionCheck {
    pub direct: f64,
    pub reconstructed: f64,
    pub difference: f64,
}

/// Compares the direct discounted value with the weighted sum of expansion values.
pub fn verify_expansion(base: &EpisodicMdp, spec: &DiscountedObjectiveSpec, policy: &Policy) -> Result<ExpansionCheck> {
    verify_expansion_with(base, spec, policy, ExpansionOptions::default())
}

pub fn verify_expansion_with(
    base: &EpisodicMdp,
    spec: &DiscountedObjectiveSpec,
    policy: &Policy,
    options: ExpansionOptions,
) -> Result<ExpansionCheck> {
    let direct = discounted_value(base, spec, policy)?;
    let expansion = expansion_reduction_with(base, spec, options)?;
    let reconstructed = if expansion.task.objectives.is_empty() {
        0.0
    } else {
        let (values, _) = evaluate_exact(&expansion.task, policy, AggregationMode::EpisodeMeanZeroDefault)?;
        reconstruct_scalar(&values, &expansion.weights)?
    };
    Ok(ExpansionCheck {
        direct,
        reconstructed,
        difference: (direct - reconstructed).abs(),
    })
}

/// Rewards of the introductory investment example: ±10 for the first plan, ±20 for the second.
pub fn investment_rewards(mdp: &Mdp) -> Result<DiscountedObjectiveSpec> {
    let mut spec = DiscountedObjectiveSpec::new(1.0);
    for (a, to, r) in [("a1", "s1", 10.0), ("a1", "s2", -10.0), ("a2", "s3", 20.0), ("a2", "s4", -20.0)] {
        spec.reward.insert((mdp.state("s0")?, mdp.action(a)?, mdp.state(to)?), r);
    }
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gallery;
    use crate::task::validate_task;

    fn investment_base() -> EpisodicMdp {
        EpisodicMdp::from(&gallery::fixture("investment").unwrap().task)
    }

    fn sd(mdp: &Mdp, s: &str, a: &str) -> StationaryPolicy {
        StationaryPolicy::deterministic(mdp, [(mdp.state(s).unwrap(), mdp.action(a).unwrap())])
    }

    #[test]
    fn generality_on_investment() {
        let base = investment_base();
        let task = generality_reduction(&base, &sd(&base.mdp, "s0", "a1")).unwrap();
        assert_eq!(task.objectives.len(), 1);
        let o = &task.objectives[0];
        assert_eq!(o.initiation, MonitorSpec::states(["s0"]));
        assert_eq!(
            o.termination,
            MonitorSpec::StateActionSet {
                pairs: vec![("s0".into(), "a1".into())]
            }
        );
        assert_eq!(o.horizon, 1);
        assert!(validate_task(&task).is_empty());
    }

    #[test]
    fn generality_counts_one_objective_per_state() {
        let mut base = investment_base();
        base.terminal.clear();
        let target = StationaryPolicy::deterministic(&base.mdp, base.mdp.state_ids().map(|s| (s, ActionId(0))));
        let task = generality_reduction(&base, &target).unwrap();
        assert_eq!(task.objectives.len(), 5);
    }

    #[test]
    fn generality_rejects_random_targets() {
        let base = investment_base();
        let task = gallery::fixture("investment").unwrap().task;
        let uniform = StationaryPolicy::uniform(&task);
        assert!(matches!(generality_reduction(&base, &uniform), Err(Error::InvalidPolicy(_))));
    }

    #[test]
    fn investment_expansion_weights_and_value() {
        let base = investment_base();
        let spec = investment_rewards(&base.mdp).unwrap();
        let exp = expansion_reduction(&base, &spec).unwrap();
        assert_eq!(exp.weights, vec![10.0, -10.0, 20.0, -20.0]);
        for a in ["a1", "a2"] {
            let p: Policy = sd(&base.mdp, "s0", a).into();
            let (v, _) = evaluate_exact(&exp.task, &p, AggregationMode::default()).unwrap();
            assert!((reconstruct_scalar(&v, &exp.weights).unwrap() - 8.0).abs() < 1e-10);
            let check = verify_expansion(&base, &spec, &p).unwrap();
            assert!(check.difference <= 1e-10, "{check:?}");
            assert!((check.direct - 8.0).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_reward_gives_empty_family() {
        let base = investment_base();
        let spec = DiscountedObjectiveSpec::new(0.9);
        let exp = expansion_reduction(&base, &spec).unwrap();
        assert!(exp.task.objectives.is_empty());
        let p: Policy = sd(&base.mdp, "s0", "a1").into();
        assert_eq!(verify_expansion(&base, &spec, &p).unwrap().reconstructed, 0.0);
    }

    #[test]
    fn horizon_cap() {
        let base = investment_base();
        let spec = investment_rewards(&base.mdp).unwrap();
        let opts = ExpansionOptions {
            prune: true,
            max_horizon: 0,
        };
        assert!(matches!(expansion_reduction_with(&base, &spec, opts), Err(Error::CapExceeded { .. })));
    }

    #[test]
    fn reward_document() {
        let base = investment_base();
        let doc: RewardDocument = serde_json::from_str(
            r#"{"gamma":1.0,"rewards":[{"from":"s0","action":"a1","to":"s1","reward":10},
                {"from":"s0","action":"a1","to":"s2","reward":-10},
                {"from":"s0","action":"a2","to":"s3","reward":20},
                {"from":"s0","action":"a2","to":"s4","reward":-20}]}"#,
        )
        .unwrap();
        assert_eq!(doc.resolve(&base.mdp).unwrap(), investment_rewards(&base.mdp).unwrap());
        let bad = RewardDocument {
            gamma: 1.5,
            rewards: vec![],
        };
        assert!(bad.resolve(&base.mdp).is_err());
    }
}
