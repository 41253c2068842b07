//! Finite episodic MDPs and micro-objective tasks.
//!
//! The on-disk form is a JSON [`TaskDocument`] that refers to states and
//! actions by name. Loading resolves names into dense indices; the resolved
//! [`EpisodicTask`] is what every evaluator works on. Time is not part of
//! the state: evaluators track the step counter against [`EpisodicTask::horizon`].

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::monitor;
use crate::objective::MicroObjective;
use crate::order::PartialOrderSpec;
use crate::PROBABILITY_TOLERANCE;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StateId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ActionId(pub usize);

impl StateId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl ActionId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Sparse distribution over states, sorted by state index.
pub type StateDistribution = Vec<(StateId, f64)>;

/// States, actions, transition kernel and initial distribution.
#[derive(Clone, Debug, PartialEq)]
pub struct Mdp {
    pub states: Vec<String>,
    pub actions: Vec<String>,
    /// Row-major over `(state, action)`. An empty row means the pair is undefined.
    pub transitions: Vec<StateDistribution>,
    pub initial: StateDistribution,
}

impl Mdp {
    /// Creates an MDP with every transition row undefined.
    pub fn new(states: Vec<String>, actions: Vec<String>) -> Self {
        let rows = states.len() * actions.len();
        Mdp {
            states,
            actions,
            transitions: vec![Vec::new(); rows],
            initial: Vec::new(),
        }
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn state_ids(&self) -> impl Iterator<Item = StateId> {
        (0..self.states.len()).map(StateId)
    }

    pub fn action_ids(&self) -> impl Iterator<Item = ActionId> {
        (0..self.actions.len()).map(ActionId)
    }

    pub fn state(&self, name: &str) -> Result<StateId> {
        self.states
            .iter()
            .position(|s| s == name)
            .map(StateId)
            .ok_or_else(|| Error::UnknownState(name.to_string()))
    }

    pub fn action(&self, name: &str) -> Result<ActionId> {
        self.actions
            .iter()
            .position(|a| a == name)
            .map(ActionId)
            .ok_or_else(|| Error::UnknownAction(name.to_string()))
    }

    pub fn state_name(&self, s: StateId) -> &str {
        &self.states[s.0]
    }

    pub fn action_name(&self, a: ActionId) -> &str {
        &self.actions[a.0]
    }

    pub fn row(&self, s: StateId, a: ActionId) -> &[(StateId, f64)] {
        &self.transitions[s.0 * self.actions.len() + a.0]
    }

    pub fn row_mut(&mut self, s: StateId, a: ActionId) -> &mut StateDistribution {
        let n = self.actions.len();
        &mut self.transitions[s.0 * n + a.0]
    }

    /// Sets the row for `(s, a)`, sorting and merging duplicate entries.
    pub fn set_row(&mut self, s: StateId, a: ActionId, dist: impl IntoIterator<Item = (StateId, f64)>) {
        *self.row_mut(s, a) = normalize_sparse(dist);
    }

    pub fn set_initial(&mut self, dist: impl IntoIterator<Item = (StateId, f64)>) {
        self.initial = normalize_sparse(dist);
    }

    pub fn initial_probability(&self, s: StateId) -> f64 {
        self.initial
            .iter()
            .find(|(t, _)| *t == s)
            .map_or(0.0, |(_, p)| *p)
    }

    pub fn sample_initial<R: Rng + ?Sized>(&self, rng: &mut R) -> StateId {
        sample_sparse(&self.initial, rng)
    }

    pub fn sample_next<R: Rng + ?Sized>(&self, s: StateId, a: ActionId, rng: &mut R) -> StateId {
        sample_sparse(self.row(s, a), rng)
    }
}

fn normalize_sparse(dist: impl IntoIterator<Item = (StateId, f64)>) -> StateDistribution {
    let mut merged: BTreeMap<StateId, f64> = BTreeMap::new();
    for (s, p) in dist {
        *merged.entry(s).or_insert(0.0) += p;
    }
    merged.into_iter().collect()
}

/// Inverse-CDF sampling. A single-entry distribution consumes no randomness.
pub(crate) fn sample_sparse<R: Rng + ?Sized>(dist: &[(StateId, f64)], rng: &mut R) -> StateId {
    let support: Vec<_> = dist.iter().filter(|(_, p)| *p > 0.0).collect();
    match support.as_slice() {
        [] => panic!("sampling from an empty distribution"),
        [(s, _)] => *s,
        _ => {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            for (s, p) in &support {
                acc += p;
                if u < acc {
                    return *s;
                }
            }
            support[support.len() - 1].0
        }
    }
}

/// Finite MDP plus terminal states, horizon, micro-objectives and a partial order.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodicTask {
    pub mdp: Mdp,
    pub terminal: BTreeSet<StateId>,
    pub horizon: u32,
    pub objectives: Vec<MicroObjective>,
    pub order: PartialOrderSpec,
}

impl EpisodicTask {
    pub fn is_terminal(&self, s: StateId) -> bool {
        self.terminal.contains(&s)
    }

    pub fn non_terminal_states(&self) -> Vec<StateId> {
        self.mdp.state_ids().filter(|s| !self.is_terminal(*s)).collect()
    }

    pub fn num_objectives(&self) -> usize {
        self.objectives.len()
    }

    /// The episode is over after a transition into `next` taken at step `t`.
    pub fn ends_after(&self, t: u32, next: StateId) -> bool {
        self.is_terminal(next) || t + 1 >= self.horizon
    }

    /// Replaces missing rows of terminal states with self-loops.
    pub fn close_terminal_rows(&mut self) {
        let terminal: Vec<_> = self.terminal.iter().copied().collect();
        for s in terminal {
            for a in 0..self.mdp.num_actions() {
                let row = self.mdp.row_mut(s, ActionId(a));
                if row.is_empty() {
                    row.push((s, 1.0));
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn len(&self) -> usize {
        self.violations.len()
    }

    fn push(&mut self, field: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation {
            field: field.into(),
            message: message.into(),
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "  {}: {}", v.field, v.message)?;
        }
        Ok(())
    }
}

fn check_distribution(
    report: &mut ValidationReport,
    field: &str,
    dist: &[(StateId, f64)],
    num_states: usize,
) {
    let mut sum = 0.0;
    for &(s, p) in dist {
        if s.0 >= num_states {
            report.push(field, format!("references state index {} out of range", s.0));
        }
        if !(p.is_finite() && p >= 0.0) {
            report.push(field, format!("probability {p} is not a finite non-negative number"));
        }
        sum += p;
    }
    if (sum - 1.0).abs() > PROBABILITY_TOLERANCE {
        report.push(field, format!("probabilities sum to {sum}, expected 1"));
    }
}

/// Checks every task invariant. Violations are data: an empty report means valid.
pub fn validate_task(task: &EpisodicTask) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mdp = &task.mdp;
    let (ns, na) = (mdp.num_states(), mdp.num_actions());

    if ns == 0 {
        report.push("states", "no states declared");
    }
    if na == 0 {
        report.push("actions", "no actions declared");
    }
    for (field, names) in [("states", &mdp.states), ("actions", &mdp.actions)] {
        let mut seen = BTreeSet::new();
        for n in names {
            if !seen.insert(n) {
                report.push(field, format!("duplicate id `{n}`"));
            }
        }
    }
    if mdp.transitions.len() != ns * na {
        report.push(
            "transitions",
            format!("expected {} rows, found {}", ns * na, mdp.transitions.len()),
        );
    } else {
        for s in mdp.state_ids() {
            for a in mdp.action_ids() {
                let field = format!("transitions[{}, {}]", mdp.state_name(s), mdp.action_name(a));
                let row = mdp.row(s, a);
                if row.is_empty() {
                    report.push(field, "no distribution declared");
                } else {
                    check_distribution(&mut report, &field, row, ns);
                }
            }
        }
    }
    if mdp.initial.is_empty() {
        report.push("initial", "no distribution declared");
    } else {
        check_distribution(&mut report, "initial", &mdp.initial, ns);
    }

    if task.horizon < 1 {
        report.push("horizon", "must be at least 1");
    }
    for s in &task.terminal {
        if s.0 >= ns {
            report.push("terminal", format!("state index {} out of range", s.0));
        }
    }

    if task.objectives.is_empty() {
        report.push("objectives", "at least one micro-objective is required");
    }
    let mut names = BTreeSet::new();
    for (i, obj) in task.objectives.iter().enumerate() {
        let field = format!("objectives[{i}]");
        if !names.insert(obj.name.as_str()) {
            report.push(&field, format!("duplicate objective name `{}`", obj.name));
        }
        if obj.horizon < 1 {
            report.push(format!("{field}.horizon"), "must be at least 1");
        }
        for (part, spec) in [("init", &obj.initiation), ("term", &obj.termination)] {
            if let Err(e) = monitor::compile_for(spec, mdp, task.horizon) {
                report.push(format!("{field}.{part}"), e.to_string());
            }
        }
    }

    for problem in task.order.problems(task.objectives.len()) {
        report.push("order", problem);
    }
    report
}

// ---------------------------------------------------------------------------
// Documents

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionEntry {
    pub from: String,
    pub action: String,
    pub to: BTreeMap<String, f64>,
}

/// The JSON task document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskDocument {
    pub states: Vec<String>,
    pub actions: Vec<String>,
    pub transitions: Vec<TransitionEntry>,
    pub initial: BTreeMap<String, f64>,
    pub terminal: Vec<String>,
    pub horizon: u32,
    pub objectives: Vec<MicroObjective>,
    pub order: PartialOrderSpec,
}

/// A task document without objectives or order; input to the reductions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MdpDocument {
    pub states: Vec<String>,
    pub actions: Vec<String>,
    pub transitions: Vec<TransitionEntry>,
    pub initial: BTreeMap<String, f64>,
    pub terminal: Vec<String>,
    pub horizon: u32,
}

/// MDP, terminal set and horizon: everything a task has except objectives.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodicMdp {
    pub mdp: Mdp,
    pub terminal: BTreeSet<StateId>,
    pub horizon: u32,
}

fn resolve_mdp(
    states: &[String],
    actions: &[String],
    transitions: &[TransitionEntry],
    initial: &BTreeMap<String, f64>,
    terminal: &[String],
) -> Result<(Mdp, BTreeSet<StateId>)> {
    let state_ix: HashMap<&str, usize> = states.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let action_ix: HashMap<&str, usize> = actions.iter().enumerate().map(|(i, a)| (a.as_str(), i)).collect();
    let lookup_state = |name: &str, field: &str| {
        state_ix
            .get(name)
            .map(|&i| StateId(i))
            .ok_or_else(|| Error::Parse(format!("{field}: unknown state `{name}`")))
    };

    let mut mdp = Mdp::new(states.to_vec(), actions.to_vec());
    for (i, entry) in transitions.iter().enumerate() {
        let field = format!("transitions[{i}]");
        let s = lookup_state(&entry.from, &format!("{field}.from"))?;
        let a = action_ix
            .get(entry.action.as_str())
            .map(|&i| ActionId(i))
            .ok_or_else(|| Error::Parse(format!("{field}.action: unknown action `{}`", entry.action)))?;
        if !mdp.row(s, a).is_empty() {
            return Err(Error::Parse(format!(
                "{field}: duplicate row for ({}, {})",
                entry.from, entry.action
            )));
        }
        let mut row = Vec::with_capacity(entry.to.len());
        for (name, &p) in &entry.to {
            row.push((lookup_state(name, &format!("{field}.to"))?, p));
        }
        mdp.set_row(s, a, row);
    }
    let mut init = Vec::with_capacity(initial.len());
    for (name, &p) in initial {
        init.push((lookup_state(name, "initial")?, p));
    }
    mdp.set_initial(init);
    let terminal = terminal
        .iter()
        .map(|name| lookup_state(name, "terminal"))
        .collect::<Result<BTreeSet<_>>>()?;
    Ok((mdp, terminal))
}

fn mdp_entries(mdp: &Mdp, terminal: &BTreeSet<StateId>) -> (Vec<TransitionEntry>, BTreeMap<String, f64>) {
    let mut entries = Vec::new();
    for s in mdp.state_ids() {
        for a in mdp.action_ids() {
            let row = mdp.row(s, a);
            let implicit = terminal.contains(&s) && row.len() == 1 && row[0] == (s, 1.0);
            if row.is_empty() || implicit {
                continue;
            }
            entries.push(TransitionEntry {
                from: mdp.state_name(s).to_string(),
                action: mdp.action_name(a).to_string(),
                to: row.iter().map(|&(t, p)| (mdp.state_name(t).to_string(), p)).collect(),
            });
        }
    }
    let initial = mdp.initial.iter().map(|&(s, p)| (mdp.state_name(s).to_string(), p)).collect();
    (entries, initial)
}

impl TaskDocument {
    /// Resolves names and synthesizes terminal self-loops. Does not validate.
    pub fn resolve(&self) -> Result<EpisodicTask> {
        let (mdp, terminal) =
            resolve_mdp(&self.states, &self.actions, &self.transitions, &self.initial, &self.terminal)?;
        let mut task = EpisodicTask {
            mdp,
            terminal,
            horizon: self.horizon,
            objectives: self.objectives.clone(),
            order: self.order.clone(),
        };
        task.close_terminal_rows();
        Ok(task)
    }

    pub fn from_task(task: &EpisodicTask) -> Self {
        let (transitions, initial) = mdp_entries(&task.mdp, &task.terminal);
        TaskDocument {
            states: task.mdp.states.clone(),
            actions: task.mdp.actions.clone(),
            transitions,
            initial,
            terminal: task.terminal.iter().map(|&s| task.mdp.state_name(s).to_string()).collect(),
            horizon: task.horizon,
            objectives: task.objectives.clone(),
            order: task.order.clone(),
        }
    }
}

impl MdpDocument {
    pub fn resolve(&self) -> Result<EpisodicMdp> {
        let (mdp, terminal) =
            resolve_mdp(&self.states, &self.actions, &self.transitions, &self.initial, &self.terminal)?;
        let mut base = EpisodicMdp {
            mdp,
            terminal,
            horizon: self.horizon,
        };
        base.close_terminal_rows();
        Ok(base)
    }

    pub fn from_mdp(base: &EpisodicMdp) -> Self {
        let (transitions, initial) = mdp_entries(&base.mdp, &base.terminal);
        MdpDocument {
            states: base.mdp.states.clone(),
            actions: base.mdp.actions.clone(),
            transitions,
            initial,
            terminal: base.terminal.iter().map(|&s| base.mdp.state_name(s).to_string()).collect(),
            horizon: base.horizon,
        }
    }
}

impl EpisodicMdp {
    fn close_terminal_rows(&mut self) {
        for &s in &self.terminal {
            for a in 0..self.mdp.num_actions() {
                let n = self.mdp.num_actions();
                let row = &mut self.mdp.transitions[s.0 * n + a];
                if row.is_empty() {
                    row.push((s, 1.0));
                }
            }
        }
    }

    pub fn is_terminal(&self, s: StateId) -> bool {
        self.terminal.contains(&s)
    }
}

impl From<&EpisodicTask> for EpisodicMdp {
    fn from(task: &EpisodicTask) -> Self {
        EpisodicMdp {
            mdp: task.mdp.clone(),
            terminal: task.terminal.clone(),
            horizon: task.horizon,
        }
    }
}

/// Parses, resolves and validates a task document.
pub fn load_task(text: &str) -> Result<EpisodicTask> {
    let doc: TaskDocument = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let task = doc.resolve()?;
    let report = validate_task(&task);
    if report.is_empty() {
        Ok(task)
    } else {
        Err(Error::Invalid(report))
    }
}

/// Canonical document text: pretty JSON, sorted maps, implicit terminal loops omitted.
pub fn save_task(task: &EpisodicTask) -> String {
    let doc = TaskDocument::from_task(task);
    let mut text = serde_json::to_string_pretty(&doc).expect("task documents always serialize");
    text.push('\n');
    text
}

pub fn load_mdp(text: &str) -> Result<EpisodicMdp> {
    let doc: MdpDocument = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    doc.resolve()
}

pub fn save_mdp(base: &EpisodicMdp) -> String {
    let mut text = serde_json::to_string_pretty(&MdpDocument::from_mdp(base)).expect("mdp documents always serialize");
    text.push('\n');
    text
}
