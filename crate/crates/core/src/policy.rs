//! Stationary and finite-memory policies.
//!
//! History dependence is represented by a memory automaton over the same
//! token alphabet as the event monitors. The decision rule maps
//! `(memory, state)` to a distribution over actions. A stationary policy is
//! the one-memory-state special case.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::monitor::{DfaTable, HistoryMonitor, MonitorState, Token};
use crate::task::{ActionId, EpisodicTask, Mdp, StateId};
use crate::PROBABILITY_TOLERANCE;

/// Default bound on the number of policies an enumeration may produce.
pub const DEFAULT_ENUMERATION_CAP: u128 = 1_000_000;

/// Per-state action distribution over all actions, dense.
pub type ActionDistribution = Vec<f64>;

#[derive(Clone, Debug, PartialEq)]
pub struct StationaryPolicy {
    /// Indexed by state; `None` where the policy is undefined (e.g. terminal states).
    pub rule: Vec<Option<ActionDistribution>>,
}

impl StationaryPolicy {
    /// Deterministic policy from `(state, action)` pairs.
    pub fn deterministic(mdp: &Mdp, choices: impl IntoIterator<Item = (StateId, ActionId)>) -> Self {
        let mut rule = vec![None; mdp.num_states()];
        for (s, a) in choices {
            rule[s.0] = Some(point_mass(mdp.num_actions(), a));
        }
        StationaryPolicy { rule }
    }

    /// Uniform over actions in every non-terminal state.
    pub fn uniform(task: &EpisodicTask) -> Self {
        let na = task.mdp.num_actions();
        let rule = task
            .mdp
            .state_ids()
            .map(|s| (!task.is_terminal(s)).then(|| vec![1.0 / na as f64; na]))
            .collect();
        StationaryPolicy { rule }
    }

    /// The action chosen in `s`, if the rule there is a point mass.
    pub fn deterministic_action(&self, s: StateId) -> Option<ActionId> {
        self.rule.get(s.0)?.as_deref().and_then(point_mass_action)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FiniteMemoryPolicy {
    pub memory: HistoryMonitor,
    /// Indexed by `memory * |S| + state`.
    pub rule: Vec<Option<ActionDistribution>>,
    num_states: usize,
}

impl FiniteMemoryPolicy {
    pub fn new(memory: HistoryMonitor, num_states: usize) -> Self {
        let rule = vec![None; memory.num_states() * num_states];
        FiniteMemoryPolicy {
            memory,
            rule,
            num_states,
        }
    }

    pub fn set(&mut self, m: MonitorState, s: StateId, dist: ActionDistribution) {
        self.rule[m.0 as usize * self.num_states + s.0] = Some(dist);
    }

    pub fn get(&self, m: MonitorState, s: StateId) -> Option<&[f64]> {
        self.rule[m.0 as usize * self.num_states + s.0].as_deref()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Policy {
    Stationary(StationaryPolicy),
    FiniteMemory(FiniteMemoryPolicy),
}

impl From<StationaryPolicy> for Policy {
    fn from(p: StationaryPolicy) -> Self {
        Policy::Stationary(p)
    }
}

impl From<FiniteMemoryPolicy> for Policy {
    fn from(p: FiniteMemoryPolicy) -> Self {
        Policy::FiniteMemory(p)
    }
}

pub fn point_mass(num_actions: usize, a: ActionId) -> ActionDistribution {
    let mut d = vec![0.0; num_actions];
    d[a.0] = 1.0;
    d
}

fn point_mass_action(dist: &[f64]) -> Option<ActionId> {
    let mut support = dist.iter().enumerate().filter(|(_, &p)| p > 0.0);
    match (support.next(), support.next()) {
        (Some((a, _)), None) => Some(ActionId(a)),
        _ => None,
    }
}

impl Policy {
    /// Memory after the initial token.
    pub fn initial_memory(&self, s0: StateId) -> MonitorState {
        match self {
            Policy::Stationary(_) => MonitorState(0),
            Policy::FiniteMemory(p) => p.memory.advance(p.memory.start(), Token::Initial(s0)),
        }
    }

    /// Memory after observing the transition `(action, next)`.
    #[inline]
    pub fn observe(&self, m: MonitorState, action: ActionId, next: StateId) -> MonitorState {
        match self {
            Policy::Stationary(_) => m,
            Policy::FiniteMemory(p) => p.memory.advance(m, Token::Step { action, next }),
        }
    }

    pub fn distribution(&self, m: MonitorState, s: StateId) -> Result<&[f64]> {
        let dist = match self {
            Policy::Stationary(p) => p.rule.get(s.0).and_then(|d| d.as_deref()),
            Policy::FiniteMemory(p) => p.get(m, s),
        };
        dist.ok_or_else(|| match self {
            Policy::Stationary(_) => Error::InvalidPolicy(format!("no decision rule for state index {}", s.0)),
            Policy::FiniteMemory(p) => Error::InvalidPolicy(format!(
                "no decision rule for memory `{}` in state index {}",
                p.memory.name(m),
                s.0
            )),
        })
    }

    /// Samples an action. Point-mass rules never touch `rng`.
    pub fn act<R: RngCore + ?Sized>(&self, m: MonitorState, s: StateId, rng: &mut R) -> Result<ActionId> {
        let dist = self.distribution(m, s)?;
        if let Some(a) = point_mass_action(dist) {
            return Ok(a);
        }
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut last = None;
        for (a, &p) in dist.iter().enumerate() {
            if p <= 0.0 {
                continue;
            }
            acc += p;
            last = Some(ActionId(a));
            if u < acc {
                return Ok(ActionId(a));
            }
        }
        last.ok_or_else(|| Error::InvalidPolicy("empty action distribution".into()))
    }

    pub fn is_deterministic(&self) -> bool {
        let rules: &[Option<ActionDistribution>] = match self {
            Policy::Stationary(p) => &p.rule,
            Policy::FiniteMemory(p) => &p.rule,
        };
        rules.iter().flatten().all(|d| point_mass_action(d).is_some())
    }

    /// Checks every defined rule is a distribution over the task's actions.
    pub fn validate(&self, mdp: &Mdp) -> Result<()> {
        let rules: &[Option<ActionDistribution>] = match self {
            Policy::Stationary(p) => {
                if p.rule.len() != mdp.num_states() {
                    return Err(Error::InvalidPolicy(format!(
                        "rule covers {} states, task has {}",
                        p.rule.len(),
                        mdp.num_states()
                    )));
                }
                &p.rule
            }
            Policy::FiniteMemory(p) => {
                if p.num_states != mdp.num_states() || p.memory.alphabet().num_actions != mdp.num_actions() {
                    return Err(Error::InvalidPolicy("memory automaton built for a different task".into()));
                }
                &p.rule
            }
        };
        for d in rules.iter().flatten() {
            if d.len() != mdp.num_actions() {
                return Err(Error::InvalidPolicy(format!(
                    "distribution over {} actions, task has {}",
                    d.len(),
                    mdp.num_actions()
                )));
            }
            let sum: f64 = d.iter().sum();
            if d.iter().any(|p| !(p.is_finite() && *p >= 0.0)) || (sum - 1.0).abs() > PROBABILITY_TOLERANCE {
                return Err(Error::InvalidPolicy(format!("action probabilities {d:?} are not a distribution")));
            }
        }
        Ok(())
    }

    /// Compact text id, e.g. `s0:a1` or `s0:a1=0.5/a2=0.5` or `[s3]s0:a2`.
    pub fn describe(&self, mdp: &Mdp) -> String {
        let fmt_dist = |d: &[f64]| match point_mass_action(d) {
            Some(a) => mdp.action_name(a).to_string(),
            None => d
                .iter()
                .enumerate()
                .filter(|(_, &p)| p > 0.0)
                .map(|(a, p)| format!("{}={}", mdp.action_name(ActionId(a)), p))
                .collect::<Vec<_>>()
                .join("/"),
        };
        let mut parts = Vec::new();
        match self {
            Policy::Stationary(p) => {
                for (s, d) in p.rule.iter().enumerate() {
                    if let Some(d) = d {
                        parts.push(format!("{}:{}", mdp.state_name(StateId(s)), fmt_dist(d)));
                    }
                }
            }
            Policy::FiniteMemory(p) => {
                for (i, d) in p.rule.iter().enumerate() {
                    if let Some(d) = d {
                        let (m, s) = (i / p.num_states, i % p.num_states);
                        parts.push(format!(
                            "[{}]{}:{}",
                            p.memory.name(MonitorState(m as u32)),
                            mdp.state_name(StateId(s)),
                            fmt_dist(d)
                        ));
                    }
                }
            }
        }
        parts.join(";")
    }
}

// ---------------------------------------------------------------------------
// Memory

/// Serialized memory automaton.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum MemorySpec {
    /// A single memory state: stationary behaviour.
    None,
    /// Remembers the initial state; memory states are named after states.
    InitialState,
    Dfa(DfaTable),
}

impl MemorySpec {
    pub fn compile(&self, mdp: &Mdp) -> Result<HistoryMonitor> {
        let table = match self {
            MemorySpec::None => DfaTable {
                states: vec!["_".into()],
                start: "_".into(),
                accepting: vec![],
                table: BTreeMap::from([("_".into(), BTreeMap::from([("*".into(), "_".into())]))]),
            },
            MemorySpec::InitialState => {
                let mut states = vec!["pre".to_string()];
                states.extend(mdp.states.iter().cloned());
                let mut table = BTreeMap::new();
                let pre_row = mdp
                    .states
                    .iter()
                    .map(|s| (format!("^{s}"), s.clone()))
                    .chain([("*".to_string(), "pre".to_string())])
                    .collect();
                table.insert("pre".to_string(), pre_row);
                for s in &mdp.states {
                    table.insert(s.clone(), BTreeMap::from([("*".to_string(), s.clone())]));
                }
                if mdp.states.iter().any(|s| s == "pre") {
                    return Err(Error::InvalidPolicy(
                        "initial-state memory needs a task without a state named `pre`".into(),
                    ));
                }
                DfaTable {
                    states,
                    start: "pre".into(),
                    accepting: vec![],
                    table,
                }
            }
            MemorySpec::Dfa(table) => table.clone(),
        };
        table.compile(mdp).map_err(|e| Error::InvalidPolicy(format!("memory automaton: {e}")))
    }

    pub fn label(&self) -> &'static str {
        match self {
            MemorySpec::None => "none",
            MemorySpec::InitialState => "initial_state",
            MemorySpec::Dfa(_) => "dfa",
        }
    }
}

/// Memory states reachable once the initial token of some start state in
/// the support of μ has been consumed.
pub fn live_memory_states(memory: &HistoryMonitor, task: &EpisodicTask) -> Vec<MonitorState> {
    let alphabet = memory.alphabet();
    let mut seen = BTreeSet::new();
    let mut queue = VecDeque::new();
    for &(s, p) in &task.mdp.initial {
        if p > 0.0 {
            let m = memory.advance(memory.start(), Token::Initial(s));
            if seen.insert(m) {
                queue.push_back(m);
            }
        }
    }
    while let Some(m) = queue.pop_front() {
        for t in alphabet.tokens().filter(|t| matches!(t, Token::Step { .. })) {
            let n = memory.advance(m, t);
            if seen.insert(n) {
                queue.push_back(n);
            }
        }
    }
    seen.into_iter().collect()
}

// ---------------------------------------------------------------------------
// Documents

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ActionChoice {
    Action(String),
    Distribution(BTreeMap<String, f64>),
}

/// Memory of an `fm` document: either explicit states with an update
/// table, or a built-in automaton such as `{"type": "initial_state"}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MemoryField {
    Named(Vec<String>),
    Builtin(MemorySpec),
}

/// JSON policy document. Rule maps are keyed by state name; a `*` key
/// covers every non-terminal state not listed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolicyDocument {
    Uniform,
    Sd {
        map: BTreeMap<String, String>,
    },
    Sr {
        map: BTreeMap<String, BTreeMap<String, f64>>,
    },
    Fm {
        memory: MemoryField,
        /// Start memory state; required with named memory.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        initial: Option<String>,
        /// `memory -> token label -> memory`, as in a monitor DFA table.
        #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
        update: BTreeMap<String, BTreeMap<String, String>>,
        rule: BTreeMap<String, BTreeMap<String, ActionChoice>>,
    },
}

fn resolve_choice(mdp: &Mdp, choice: &ActionChoice) -> Result<ActionDistribution> {
    match choice {
        ActionChoice::Action(a) => Ok(point_mass(mdp.num_actions(), mdp.action(a)?)),
        ActionChoice::Distribution(d) => {
            let mut dist = vec![0.0; mdp.num_actions()];
            for (a, &p) in d {
                dist[mdp.action(a)?.0] += p;
            }
            Ok(dist)
        }
    }
}

fn resolve_rule(
    mdp: &Mdp,
    task: &EpisodicTask,
    rule: &BTreeMap<String, ActionChoice>,
) -> Result<Vec<Option<ActionDistribution>>> {
    let mut out = vec![None; mdp.num_states()];
    let wildcard = rule.get("*").map(|c| resolve_choice(mdp, c)).transpose()?;
    for (name, choice) in rule {
        if name != "*" {
            out[mdp.state(name)?.0] = Some(resolve_choice(mdp, choice)?);
        }
    }
    if let Some(w) = wildcard {
        for s in task.non_terminal_states() {
            out[s.0].get_or_insert_with(|| w.clone());
        }
    }
    Ok(out)
}

impl PolicyDocument {
    pub fn resolve(&self, task: &EpisodicTask) -> Result<Policy> {
        let mdp = &task.mdp;
        let stationary = |rule: BTreeMap<String, ActionChoice>| -> Result<Policy> {
            Ok(Policy::Stationary(StationaryPolicy {
                rule: resolve_rule(mdp, task, &rule)?,
            }))
        };
        let policy = match self {
            PolicyDocument::Uniform => Policy::Stationary(StationaryPolicy::uniform(task)),
            PolicyDocument::Sd { map } => {
                stationary(map.iter().map(|(s, a)| (s.clone(), ActionChoice::Action(a.clone()))).collect())?
            }
            PolicyDocument::Sr { map } => stationary(
                map.iter()
                    .map(|(s, d)| (s.clone(), ActionChoice::Distribution(d.clone())))
                    .collect(),
            )?,
            PolicyDocument::Fm {
                memory,
                initial,
                update,
                rule,
            } => {
                let spec = match memory {
                    MemoryField::Builtin(spec) => {
                        if initial.is_some() || !update.is_empty() {
                            return Err(Error::InvalidPolicy(
                                "`initial` and `update` apply only to named memory states".into(),
                            ));
                        }
                        spec.clone()
                    }
                    MemoryField::Named(states) => MemorySpec::Dfa(DfaTable {
                        states: states.clone(),
                        start: initial
                            .clone()
                            .ok_or_else(|| Error::InvalidPolicy("named memory needs an `initial` state".into()))?,
                        accepting: vec![],
                        table: update.clone(),
                    }),
                };
                let monitor = spec.compile(mdp)?;
                let mut p = FiniteMemoryPolicy::new(monitor, mdp.num_states());
                for (mem, per_state) in rule {
                    let m = p
                        .memory
                        .state_named(mem)
                        .ok_or_else(|| Error::InvalidPolicy(format!("unknown memory state `{mem}`")))?;
                    for (s, d) in resolve_rule(mdp, task, per_state)?.into_iter().enumerate() {
                        if let Some(d) = d {
                            p.set(m, StateId(s), d);
                        }
                    }
                }
                Policy::FiniteMemory(p)
            }
        };
        policy.validate(mdp)?;
        Ok(policy)
    }
}

pub fn load_policy(text: &str, task: &EpisodicTask) -> Result<Policy> {
    let doc: PolicyDocument = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    doc.resolve(task)
}

// ---------------------------------------------------------------------------
// Enumeration

fn checked_count(what: &'static str, base: u128, exponent: usize, cap: u128) -> Result<u128> {
    let count = u32::try_from(exponent)
        .ok()
        .and_then(|e| base.checked_pow(e))
        .unwrap_or(u128::MAX);
    if count > cap {
        return Err(Error::CapExceeded { what, count, cap });
    }
    Ok(count)
}

/// Mixed-radix odometer over `digits` positions; the first position varies slowest.
#[derive(Clone, Debug)]
struct Odometer {
    radices: Vec<usize>,
    next: Option<Vec<usize>>,
    remaining: usize,
}

impl Odometer {
    fn new(radices: Vec<usize>, count: u128) -> Self {
        let empty = radices.contains(&0);
        Odometer {
            next: (!empty).then(|| vec![0; radices.len()]),
            remaining: if empty { 0 } else { count as usize },
            radices,
        }
    }
}

impl Iterator for Odometer {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let current = self.next.take()?;
        self.remaining -= 1;
        let mut succ = current.clone();
        let mut carried = true;
        for i in (0..succ.len()).rev() {
            succ[i] += 1;
            if succ[i] < self.radices[i] {
                carried = false;
                break;
            }
            succ[i] = 0;
        }
        if !carried {
            self.next = Some(succ);
        }
        Some(current)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        (self.remaining, Some(self.remaining))
    }
}

impl ExactSizeIterator for Odometer {}

/// All stationary deterministic policies over the non-terminal states, in
/// lexicographic order of action indices (first state varies slowest).
pub fn enumerate_sd(task: &EpisodicTask) -> Result<impl ExactSizeIterator<Item = StationaryPolicy> + '_> {
    enumerate_sd_capped(task, DEFAULT_ENUMERATION_CAP)
}

pub fn enumerate_sd_capped(
    task: &EpisodicTask,
    cap: u128,
) -> Result<impl ExactSizeIterator<Item = StationaryPolicy> + '_> {
    let states = task.non_terminal_states();
    let na = task.mdp.num_actions();
    let count = checked_count("stationary deterministic class", na as u128, states.len(), cap)?;
    Ok(Odometer::new(vec![na; states.len()], count).map(move |digits| {
        StationaryPolicy::deterministic(&task.mdp, states.iter().zip(digits).map(|(&s, a)| (s, ActionId(a))))
    }))
}

/// Compositions of `total` into `parts` non-negative parts, largest first part first.
fn compositions(total: u32, parts: usize) -> Vec<Vec<u32>> {
    if parts == 0 {
        return Vec::new();
    }
    if parts == 1 {
        return vec![vec![total]];
    }
    let mut out = Vec::new();
    for first in (0..=total).rev() {
        for mut rest in compositions(total - first, parts - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

fn binomial(n: u128, k: u128) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

/// Stationary random policies whose probabilities are multiples of `1/resolution`.
pub fn sr_grid(
    task: &EpisodicTask,
    resolution: u32,
) -> Result<impl ExactSizeIterator<Item = StationaryPolicy> + '_> {
    sr_grid_capped(task, resolution, DEFAULT_ENUMERATION_CAP)
}

pub fn sr_grid_capped(
    task: &EpisodicTask,
    resolution: u32,
    cap: u128,
) -> Result<impl ExactSizeIterator<Item = StationaryPolicy> + '_> {
    if resolution == 0 {
        return Err(Error::InvalidPolicy("grid resolution must be at least 1".into()));
    }
    let states = task.non_terminal_states();
    let na = task.mdp.num_actions();
    let per_state = binomial(resolution as u128 + na as u128 - 1, na as u128 - 1);
    let count = checked_count("stationary random grid", per_state, states.len(), cap)?;
    let cells: Vec<ActionDistribution> = compositions(resolution, na)
        .into_iter()
        .map(|c| c.into_iter().map(|k| f64::from(k) / f64::from(resolution)).collect())
        .collect();
    Ok(Odometer::new(vec![cells.len(); states.len()], count).map(move |digits| {
        let mut rule = vec![None; task.mdp.num_states()];
        for (&s, d) in states.iter().zip(digits) {
            rule[s.0] = Some(cells[d].clone());
        }
        StationaryPolicy { rule }
    }))
}

/// `count` stationary random policies drawn uniformly from the simplex at
/// each non-terminal state. Policy `i` uses its own stream of `seed`.
pub fn sample_sr(task: &EpisodicTask, count: usize, seed: u64) -> Vec<StationaryPolicy> {
    let na = task.mdp.num_actions();
    (0..count)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let mut rule = vec![None; task.mdp.num_states()];
            for s in task.non_terminal_states() {
                // Normalized exponentials are uniform on the simplex.
                let w: Vec<f64> = (0..na).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
                let total: f64 = w.iter().sum();
                let mut d: Vec<f64> = w.iter().map(|x| x / total).collect();
                let rest: f64 = d[..na - 1].iter().sum();
                d[na - 1] = (1.0 - rest).max(0.0);
                rule[s.0] = Some(d);
            }
            StationaryPolicy { rule }
        })
        .collect()
}

/// All deterministic rules over `(live memory, decision state)` pairs with a
/// fixed memory automaton. Non-terminal states outside `decision_states`
/// take the first action. `decision_states = None` means all non-terminal states.
pub fn enumerate_fm_det<'a>(
    task: &'a EpisodicTask,
    memory: &MemorySpec,
    decision_states: Option<&[StateId]>,
) -> Result<impl ExactSizeIterator<Item = FiniteMemoryPolicy> + 'a> {
    enumerate_fm_det_capped(task, memory, decision_states, DEFAULT_ENUMERATION_CAP)
}

pub fn enumerate_fm_det_capped<'a>(
    task: &'a EpisodicTask,
    memory: &MemorySpec,
    decision_states: Option<&[StateId]>,
    cap: u128,
) -> Result<impl ExactSizeIterator<Item = FiniteMemoryPolicy> + 'a> {
    let monitor = memory.compile(&task.mdp)?;
    let live = live_memory_states(&monitor, task);
    if live.is_empty() {
        return Err(Error::InvalidPolicy("memory automaton has no live states".into()));
    }
    let non_terminal = task.non_terminal_states();
    let decision: Vec<StateId> = match decision_states {
        Some(d) => {
            if let Some(s) = d.iter().find(|s| task.is_terminal(**s) || s.0 >= task.mdp.num_states()) {
                return Err(Error::InvalidPolicy(format!("decision state index {} is not a non-terminal state", s.0)));
            }
            d.to_vec()
        }
        None => non_terminal.clone(),
    };
    let fixed: Vec<StateId> = non_terminal.iter().copied().filter(|s| !decision.contains(s)).collect();
    let na = task.mdp.num_actions();
    let pairs: Vec<(MonitorState, StateId)> = live
        .iter()
        .flat_map(|&m| decision.iter().map(move |&s| (m, s)))
        .collect();
    let count = checked_count("finite-memory deterministic class", na as u128, pairs.len(), cap)?;
    let ns = task.mdp.num_states();
    Ok(Odometer::new(vec![na; pairs.len()], count).map(move |digits| {
        let mut p = FiniteMemoryPolicy::new(monitor.clone(), ns);
        for &m in &live {
            for &s in &fixed {
                p.set(m, s, point_mass(na, ActionId(0)));
            }
        }
        for (&(m, s), a) in pairs.iter().zip(digits) {
            p.set(m, s, point_mass(na, ActionId(a)));
        }
        p
    }))
}

/// Policy class for frontier search: `sd`, `sr-grid:R`, `fm:MEMORY[:s,s,...]`.
#[derive(Clone, Debug, PartialEq)]
pub enum PolicyClass {
    Sd,
    SrGrid(u32),
    FmDet {
        memory: MemorySpec,
        decision_states: Option<Vec<String>>,
    },
}

impl PolicyClass {
    pub fn label(&self) -> String {
        match self {
            PolicyClass::Sd => "SD".into(),
            PolicyClass::SrGrid(r) => format!("SR-grid({r})"),
            PolicyClass::FmDet { memory, decision_states } => match decision_states {
                Some(d) => format!("FM-det({};{})", memory.label(), d.join(",")),
                None => format!("FM-det({})", memory.label()),
            },
        }
    }

    /// Materializes the class as policies, in enumeration order.
    pub fn policies(&self, task: &EpisodicTask) -> Result<Vec<Policy>> {
        Ok(match self {
            PolicyClass::Sd => enumerate_sd(task)?.map(Policy::from).collect(),
            PolicyClass::SrGrid(r) => sr_grid(task, *r)?.map(Policy::from).collect(),
            PolicyClass::FmDet { memory, decision_states } => {
                let decision = decision_states
                    .as_ref()
                    .map(|names| names.iter().map(|n| task.mdp.state(n)).collect::<Result<Vec<_>>>())
                    .transpose()?;
                enumerate_fm_det(task, memory, decision.as_deref())?.map(Policy::from).collect()
            }
        })
    }
}

impl fmt::Display for PolicyClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for PolicyClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("unknown policy class `{s}` (expected sd, sr-grid:R or fm:MEMORY[:STATES])"));
        if s == "sd" {
            return Ok(PolicyClass::Sd);
        }
        if let Some(r) = s.strip_prefix("sr-grid:") {
            return r.parse().map(PolicyClass::SrGrid).map_err(|_| bad());
        }
        if let Some(rest) = s.strip_prefix("fm:") {
            let (mem, states) = match rest.split_once(':') {
                Some((m, st)) => (m, Some(st.split(',').map(str::to_string).collect())),
                None => (rest, None),
            };
            let memory = match mem {
                "none" => MemorySpec::None,
                "initial" | "initial_state" => MemorySpec::InitialState,
                _ => return Err(bad()),
            };
            return Ok(PolicyClass::FmDet {
                memory,
                decision_states: states,
            });
        }
        Err(bad())
    }
}
