//! Independent reference semantics for the integration tests.
//!
//! Everything here works on explicit episodes: it enumerates every history
//! with its probability and decides event membership and objective
//! lifecycles directly from the definitions, without compiled monitors or
//! the library's dynamic program.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use microrl_core::monitor::{DfaTable, MonitorSpec};
use microrl_core::order::PartialOrderSpec;
use microrl_core::policy::{FiniteMemoryPolicy, MemorySpec, Policy, StationaryPolicy};
use microrl_core::reductions::DiscountedObjectiveSpec;
use microrl_core::task::{EpisodicMdp, MdpDocument, TransitionEntry};
use microrl_core::{AggregationMode, EpisodicTask, MicroObjective, StateId};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// `s0 a0 s1 a1 ... sn` as indices.
#[derive(Clone, Debug, PartialEq)]
pub struct History {
    pub start: usize,
    pub steps: Vec<(usize, usize)>,
}

impl History {
    pub fn state(&self, t: usize) -> usize {
        if t == 0 {
            self.start
        } else {
            self.steps[t - 1].1
        }
    }

    pub fn prefix(&self, t: usize) -> History {
        History {
            start: self.start,
            steps: self.steps[..t].to_vec(),
        }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }
}

struct Names<'a> {
    states: &'a [String],
    actions: &'a [String],
}

impl Names<'_> {
    fn s(&self, name: &str) -> usize {
        self.states.iter().position(|x| x == name).expect("state name")
    }
    fn a(&self, name: &str) -> usize {
        self.actions.iter().position(|x| x == name).expect("action name")
    }
}

/// Runs an automaton table on the label sequence of `h`.
fn run_table(table: &DfaTable, states: &[String], actions: &[String], h: &History) -> String {
    let mut q = table.start.clone();
    let mut labels = vec![format!("^{}", states[h.start])];
    labels.extend(h.steps.iter().map(|&(a, s)| format!("{}/{}", actions[a], states[s])));
    for label in labels {
        let row = &table.table[&q];
        q = row.get(&label).or_else(|| row.get("*")).expect("total table").clone();
    }
    q
}

/// Whether the whole history `h` belongs to the event described by `spec`.
pub fn member(spec: &MonitorSpec, states: &[String], actions: &[String], h: &History) -> bool {
    let n = Names { states, actions };
    let t = h.len();
    let last = h.steps.last().map(|&(a, s2)| (h.state(t - 1), a, s2));
    match spec {
        MonitorSpec::StateSet { states: set } => set.iter().any(|x| n.s(x) == h.state(t)),
        MonitorSpec::StateActionSet { pairs } => {
            last.is_some_and(|(s, a, _)| pairs.iter().any(|(ps, pa)| n.s(ps) == s && n.a(pa) == a))
        }
        MonitorSpec::TransitionSet { transitions } => last.is_some_and(|(s, a, s2)| {
            transitions
                .iter()
                .any(|(ts, ta, tn)| n.s(ts) == s && n.a(ta) == a && n.s(tn) == s2)
        }),
        MonitorSpec::TimedStateSet { states: set, times } => {
            set.iter().any(|x| n.s(x) == h.state(t)) && times.iter().any(|&k| k as usize == t)
        }
        MonitorSpec::Dfa(table) => table.accepting.contains(&run_table(table, states, actions, h)),
    }
}

/// `(successes, activations)` per objective over one complete episode.
pub fn lifecycle(task: &EpisodicTask, h: &History) -> Vec<(u32, u32)> {
    let states = &task.mdp.states;
    let actions = &task.mdp.actions;
    let terminal = |s: usize| task.terminal.contains(&StateId(s));
    task.objectives
        .iter()
        .map(|o| {
            let (mut succ, mut act) = (0u32, 0u32);
            let mut active = false;
            let mut timer = 0u32;
            let root = h.prefix(0);
            if !terminal(h.start) && member(&o.initiation, states, actions, &root) {
                active = true;
                act += 1;
            }
            for t in 0..h.len() {
                let p = h.prefix(t + 1);
                let over = terminal(h.state(t + 1)) || t + 1 >= task.horizon as usize;
                if active {
                    timer += 1;
                    if member(&o.termination, states, actions, &p) {
                        succ += 1;
                        active = false;
                    } else if timer >= o.horizon || over {
                        active = false;
                    }
                }
                if !active && !over && member(&o.initiation, states, actions, &p) {
                    active = true;
                    timer = 0;
                    act += 1;
                }
            }
            (succ, act)
        })
        .collect()
}

/// Every complete episode of `base` under `policy`, with its probability.
pub fn episodes(base: &EpisodicMdp, policy: &Policy) -> Vec<(f64, History)> {
    let mut out = Vec::new();
    for &(s0, p) in &base.mdp.initial {
        if p <= 0.0 {
            continue;
        }
        let h = History {
            start: s0.0,
            steps: vec![],
        };
        if base.is_terminal(s0) {
            out.push((p, h));
            continue;
        }
        extend(base, policy, p, h, policy.initial_memory(s0), &mut out);
    }
    out
}

fn extend(
    base: &EpisodicMdp,
    policy: &Policy,
    p: f64,
    h: History,
    memory: microrl_core::MonitorState,
    out: &mut Vec<(f64, History)>,
) {
    let s = StateId(h.state(h.len()));
    let dist = policy.distribution(memory, s).expect("policy covers reachable states").to_vec();
    for (a, &pa) in dist.iter().enumerate() {
        if pa <= 0.0 {
            continue;
        }
        let action = microrl_core::ActionId(a);
        for &(next, pn) in base.mdp.row(s, action) {
            if pn <= 0.0 {
                continue;
            }
            let mut g = h.clone();
            g.steps.push((a, next.0));
            let q = p * pa * pn;
            if base.is_terminal(next) || g.len() >= base.horizon as usize {
                out.push((q, g));
            } else {
                let m = policy.observe(memory, action, next);
                extend(base, policy, q, g, m, out);
            }
        }
    }
}

/// Value vector from first principles over all episodes.
pub fn brute_force_values(task: &EpisodicTask, policy: &Policy, mode: AggregationMode) -> Vec<f64> {
    let base = EpisodicMdp::from(task);
    let k = task.objectives.len();
    let (mut mean, mut some, mut succ, mut act) = (vec![0.0; k], vec![0.0; k], vec![0.0; k], vec![0.0; k]);
    for (p, h) in episodes(&base, policy) {
        for (i, (s, a)) in lifecycle(task, &h).into_iter().enumerate() {
            succ[i] += p * f64::from(s);
            act[i] += p * f64::from(a);
            if a > 0 {
                mean[i] += p * f64::from(s) / f64::from(a);
                some[i] += p;
            }
        }
    }
    (0..k)
        .map(|i| match mode {
            AggregationMode::EpisodeMeanZeroDefault => mean[i],
            AggregationMode::EpisodeMeanConditional => {
                if some[i] > 0.0 {
                    mean[i] / some[i]
                } else {
                    0.0
                }
            }
            AggregationMode::RatioOfExpectations => {
                if act[i] > 0.0 {
                    succ[i] / act[i]
                } else {
                    0.0
                }
            }
        })
        .collect()
}

/// Expected discounted return summed over explicit episodes.
pub fn brute_force_discounted(base: &EpisodicMdp, spec: &DiscountedObjectiveSpec, policy: &Policy) -> f64 {
    episodes(base, policy)
        .into_iter()
        .map(|(p, h)| {
            let ret: f64 = h
                .steps
                .iter()
                .enumerate()
                .map(|(t, &(a, s2))| {
                    let r = spec.reward(StateId(h.state(t)), microrl_core::ActionId(a), StateId(s2));
                    spec.gamma.powi(t as i32) * r
                })
                .sum();
            p * ret
        })
        .sum()
}

// ---------------------------------------------------------------------------
// Random instances

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_distribution(rng: &mut ChaCha8Rng, support: &[String]) -> BTreeMap<String, f64> {
    let w: Vec<f64> = support.iter().map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = w.iter().sum();
    let mut d: BTreeMap<String, f64> = support.iter().cloned().zip(w.iter().map(|x| x / total)).collect();
    let last = support.last().expect("non-empty support").clone();
    let rest: f64 = d.iter().filter(|(k, _)| **k != last).map(|(_, v)| v).sum();
    d.insert(last, 1.0 - rest);
    d
}

fn pick(rng: &mut ChaCha8Rng, xs: &[String], max: usize) -> Vec<String> {
    let n = rng.random_range(1..=max.min(xs.len()));
    let mut chosen = BTreeSet::new();
    while chosen.len() < n {
        chosen.insert(rng.random_range(0..xs.len()));
    }
    chosen.into_iter().map(|i| xs[i].clone()).collect()
}

/// A random episodic MDP; `s0` is never terminal and always has initial mass.
pub fn random_mdp(rng: &mut ChaCha8Rng, max_states: usize, max_actions: usize, max_horizon: u32) -> EpisodicMdp {
    let ns = rng.random_range(2..=max_states);
    let na = rng.random_range(1..=max_actions);
    let states: Vec<String> = (0..ns).map(|i| format!("s{i}")).collect();
    let actions: Vec<String> = (0..na).map(|i| format!("a{i}")).collect();
    let terminal: Vec<String> = states[1..].iter().filter(|_| rng.random_bool(0.35)).cloned().collect();
    let mut transitions = Vec::new();
    for s in states.iter().filter(|s| !terminal.contains(s)) {
        for a in &actions {
            let support = pick(rng, &states, 3);
            transitions.push(TransitionEntry {
                from: s.clone(),
                action: a.clone(),
                to: random_distribution(rng, &support),
            });
        }
    }
    let mut init_support = vec![states[0].clone()];
    if rng.random_bool(0.4) {
        let other = states[rng.random_range(1..ns)].clone();
        init_support.push(other);
    }
    let doc = MdpDocument {
        initial: random_distribution(rng, &init_support),
        states,
        actions,
        transitions,
        terminal,
        horizon: rng.random_range(1..=max_horizon),
    };
    doc.resolve().expect("generated documents are well formed")
}

pub fn random_table(rng: &mut ChaCha8Rng, states: &[String], actions: &[String], accepting: bool) -> DfaTable {
    let nq = rng.random_range(1..=3);
    let names: Vec<String> = (0..nq).map(|i| format!("q{i}")).collect();
    let mut table = BTreeMap::new();
    for q in &names {
        let mut row = BTreeMap::new();
        for _ in 0..rng.random_range(0..=3) {
            let label = if rng.random_bool(0.3) {
                format!("^{}", states[rng.random_range(0..states.len())])
            } else {
                format!(
                    "{}/{}",
                    actions[rng.random_range(0..actions.len())],
                    states[rng.random_range(0..states.len())]
                )
            };
            row.insert(label, names[rng.random_range(0..nq)].clone());
        }
        row.insert("*".to_string(), names[rng.random_range(0..nq)].clone());
        table.insert(q.clone(), row);
    }
    DfaTable {
        accepting: if accepting {
            names.iter().filter(|_| rng.random_bool(0.5)).cloned().collect()
        } else {
            vec![]
        },
        start: names[0].clone(),
        states: names,
        table,
    }
}

pub fn random_monitor(rng: &mut ChaCha8Rng, states: &[String], actions: &[String], horizon: u32) -> MonitorSpec {
    let state = |rng: &mut ChaCha8Rng| states[rng.random_range(0..states.len())].clone();
    let action = |rng: &mut ChaCha8Rng| actions[rng.random_range(0..actions.len())].clone();
    match rng.random_range(0..5) {
        0 => MonitorSpec::StateSet {
            states: states.iter().filter(|_| rng.random_bool(0.4)).cloned().collect(),
        },
        1 => MonitorSpec::StateActionSet {
            pairs: (0..rng.random_range(1..=3)).map(|_| (state(rng), action(rng))).collect(),
        },
        2 => MonitorSpec::TransitionSet {
            transitions: (0..rng.random_range(1..=3))
                .map(|_| (state(rng), action(rng), state(rng)))
                .collect(),
        },
        3 => MonitorSpec::TimedStateSet {
            states: pick(rng, states, 2),
            times: (0..=horizon).filter(|_| rng.random_bool(0.5)).collect(),
        },
        _ => MonitorSpec::Dfa(random_table(rng, states, actions, true)),
    }
}

/// A random task with up to `max_states` states, horizon up to `max_horizon`
/// and one to three objectives over all monitor kinds.
pub fn random_task(seed: u64, max_states: usize, max_horizon: u32) -> EpisodicTask {
    let mut rng = rng(seed);
    let base = random_mdp(&mut rng, max_states, 3, max_horizon);
    let (states, actions) = (base.mdp.states.clone(), base.mdp.actions.clone());
    let objectives = (0..rng.random_range(1..=3))
        .map(|i| {
            MicroObjective::new(
                format!("o{i}"),
                random_monitor(&mut rng, &states, &actions, base.horizon),
                random_monitor(&mut rng, &states, &actions, base.horizon),
                rng.random_range(1..=base.horizon + 1),
            )
        })
        .collect();
    EpisodicTask {
        mdp: base.mdp,
        terminal: base.terminal,
        horizon: base.horizon,
        objectives,
        order: PartialOrderSpec::Pareto,
    }
}

fn random_action_distribution(rng: &mut ChaCha8Rng, na: usize, deterministic: bool) -> Vec<f64> {
    if deterministic {
        let mut d = vec![0.0; na];
        d[rng.random_range(0..na)] = 1.0;
        return d;
    }
    let w: Vec<f64> = (0..na).map(|_| rng.random_range(0.0..1.0) + 1e-3).collect();
    let total: f64 = w.iter().sum();
    let mut d: Vec<f64> = w.iter().map(|x| x / total).collect();
    let rest: f64 = d[..na - 1].iter().sum();
    d[na - 1] = 1.0 - rest;
    d
}

pub fn random_stationary(rng: &mut ChaCha8Rng, base: &EpisodicMdp, deterministic: bool) -> StationaryPolicy {
    let na = base.mdp.num_actions();
    let mut rule = vec![None; base.mdp.num_states()];
    for s in base.mdp.state_ids().filter(|s| !base.is_terminal(*s)) {
        rule[s.0] = Some(random_action_distribution(rng, na, deterministic));
    }
    StationaryPolicy { rule }
}

/// A policy with either initial-state memory or a random memory automaton.
pub fn random_finite_memory(rng: &mut ChaCha8Rng, base: &EpisodicMdp, deterministic: bool) -> FiniteMemoryPolicy {
    let spec = if rng.random_bool(0.5) {
        MemorySpec::InitialState
    } else {
        MemorySpec::Dfa(random_table(rng, &base.mdp.states, &base.mdp.actions, false))
    };
    let memory = spec.compile(&base.mdp).expect("memory compiles");
    let na = base.mdp.num_actions();
    let mut p = FiniteMemoryPolicy::new(memory, base.mdp.num_states());
    for m in 0..p.memory.num_states() {
        for s in base.mdp.state_ids().filter(|s| !base.is_terminal(*s)) {
            p.set(
                microrl_core::MonitorState(m as u32),
                s,
                random_action_distribution(rng, na, deterministic),
            );
        }
    }
    p
}

/// One of SD, SR, deterministic or randomized finite-memory, in rotation by `kind`.
pub fn random_policy(rng: &mut ChaCha8Rng, base: &EpisodicMdp, kind: usize) -> Policy {
    match kind % 4 {
        0 => random_stationary(rng, base, true).into(),
        1 => random_stationary(rng, base, false).into(),
        2 => random_finite_memory(rng, base, true).into(),
        _ => random_finite_memory(rng, base, false).into(),
    }
}

pub fn random_rewards(rng: &mut ChaCha8Rng, base: &EpisodicMdp, gamma: f64) -> DiscountedObjectiveSpec {
    let mut spec = DiscountedObjectiveSpec::new(gamma);
    for s in base.mdp.state_ids().filter(|s| !base.is_terminal(*s)) {
        for a in base.mdp.action_ids() {
            for &(next, _) in base.mdp.row(s, a) {
                if rng.random_bool(0.8) {
                    spec.reward.insert((s, a, next), rng.random_range(-1.0..=1.0));
                }
            }
        }
    }
    spec
}

pub fn max_abs_diff(u: &[f64], v: &[f64]) -> f64 {
    assert_eq!(u.len(), v.len());
    u.iter().zip(v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}
