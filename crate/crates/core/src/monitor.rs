//! History events as deterministic automata.
//!
//! An episode is presented to a monitor as a token stream: one
//! [`Token::Initial`] carrying the start state, then one [`Token::Step`]
//! per transition carrying the action taken and the state reached. After
//! consuming the tokens of `(h^t, s^t)` the monitor is accepting iff that
//! history belongs to the event.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::task::{ActionId, EpisodicTask, Mdp, StateId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Token {
    Initial(StateId),
    Step { action: ActionId, next: StateId },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MonitorState(pub u32);

/// Token alphabet of an MDP: `|S|` initial tokens followed by `|A|·|S|` step tokens.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Alphabet {
    pub num_states: usize,
    pub num_actions: usize,
}

impl Alphabet {
    pub fn of(mdp: &Mdp) -> Self {
        Alphabet {
            num_states: mdp.num_states(),
            num_actions: mdp.num_actions(),
        }
    }

    pub fn len(&self) -> usize {
        self.num_states * (1 + self.num_actions)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, token: Token) -> usize {
        match token {
            Token::Initial(s) => s.0,
            Token::Step { action, next } => self.num_states * (1 + action.0) + next.0,
        }
    }

    pub fn token(&self, index: usize) -> Token {
        if index < self.num_states {
            Token::Initial(StateId(index))
        } else {
            let rest = index - self.num_states;
            Token::Step {
                action: ActionId(rest / self.num_states),
                next: StateId(rest % self.num_states),
            }
        }
    }

    pub fn tokens(&self) -> impl Iterator<Item = Token> + '_ {
        (0..self.len()).map(|i| self.token(i))
    }
}

/// Text form of a token used in explicit tables: `^s0` for the initial
/// token, `a1/s1` for a step.
pub fn token_label(mdp: &Mdp, token: Token) -> String {
    match token {
        Token::Initial(s) => format!("^{}", mdp.state_name(s)),
        Token::Step { action, next } => format!("{}/{}", mdp.action_name(action), mdp.state_name(next)),
    }
}

pub fn parse_token(mdp: &Mdp, label: &str) -> Result<Token> {
    if let Some(state) = label.strip_prefix('^') {
        return Ok(Token::Initial(mdp.state(state)?));
    }
    let (action, next) = label
        .split_once('/')
        .ok_or_else(|| Error::InvalidMonitor(format!("malformed token `{label}`")))?;
    Ok(Token::Step {
        action: mdp.action(action)?,
        next: mdp.state(next)?,
    })
}

/// A complete DFA over the token alphabet of one MDP.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HistoryMonitor {
    names: Vec<String>,
    start: MonitorState,
    accepting: Vec<bool>,
    table: Vec<MonitorState>,
    alphabet: Alphabet,
}

impl HistoryMonitor {
    pub fn num_states(&self) -> usize {
        self.names.len()
    }

    pub fn start(&self) -> MonitorState {
        self.start
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn name(&self, q: MonitorState) -> &str {
        &self.names[q.0 as usize]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn state_named(&self, name: &str) -> Option<MonitorState> {
        self.names.iter().position(|n| n == name).map(|i| MonitorState(i as u32))
    }

    #[inline]
    pub fn advance(&self, q: MonitorState, token: Token) -> MonitorState {
        self.table[q.0 as usize * self.alphabet.len() + self.alphabet.index(token)]
    }

    #[inline]
    pub fn is_accepting(&self, q: MonitorState) -> bool {
        self.accepting[q.0 as usize]
    }

    pub fn accepting_states(&self) -> impl Iterator<Item = MonitorState> + '_ {
        self.accepting
            .iter()
            .enumerate()
            .filter(|(_, &a)| a)
            .map(|(i, _)| MonitorState(i as u32))
    }

    pub fn run(&self, tokens: impl IntoIterator<Item = Token>) -> MonitorState {
        tokens.into_iter().fold(self.start, |q, t| self.advance(q, t))
    }

    pub fn accepts(&self, tokens: impl IntoIterator<Item = Token>) -> bool {
        self.is_accepting(self.run(tokens))
    }

    /// Product automaton accepting where either operand accepts.
    pub fn union(&self, other: &HistoryMonitor) -> HistoryMonitor {
        self.product(other, |a, b| a || b)
    }

    /// Product automaton accepting where both operands accept.
    pub fn intersection(&self, other: &HistoryMonitor) -> HistoryMonitor {
        self.product(other, |a, b| a && b)
    }

    fn product(&self, other: &HistoryMonitor, accept: impl Fn(bool, bool) -> bool) -> HistoryMonitor {
        assert_eq!(self.alphabet, other.alphabet, "monitors over different alphabets");
        explore(
            self.alphabet,
            (self.start, other.start),
            |&(p, q), t| (self.advance(p, t), other.advance(q, t)),
            |&(p, q)| accept(self.is_accepting(p), other.is_accepting(q)),
            |&(p, q)| format!("({},{})", self.name(p), other.name(q)),
        )
    }
}

/// Breadth-first construction of the reachable part of an implicit automaton.
fn explore<K: Clone + Eq + Hash>(
    alphabet: Alphabet,
    start: K,
    step: impl Fn(&K, Token) -> K,
    accept: impl Fn(&K) -> bool,
    name: impl Fn(&K) -> String,
) -> HistoryMonitor {
    let mut index: HashMap<K, u32> = HashMap::new();
    let mut keys = vec![start.clone()];
    index.insert(start, 0);
    let mut queue = VecDeque::from([0u32]);
    let mut rows: Vec<Vec<MonitorState>> = vec![Vec::new()];
    while let Some(q) = queue.pop_front() {
        let key = keys[q as usize].clone();
        let mut row = Vec::with_capacity(alphabet.len());
        for t in alphabet.tokens() {
            let next = step(&key, t);
            let id = match index.get(&next) {
                Some(&id) => id,
                None => {
                    let id = keys.len() as u32;
                    index.insert(next.clone(), id);
                    keys.push(next);
                    rows.push(Vec::new());
                    queue.push_back(id);
                    id
                }
            };
            row.push(MonitorState(id));
        }
        rows[q as usize] = row;
    }
    HistoryMonitor {
        names: keys.iter().map(&name).collect(),
        start: MonitorState(0),
        accepting: keys.iter().map(&accept).collect(),
        table: rows.into_iter().flatten().collect(),
        alphabet,
    }
}

/// Explicit automaton table. Rows map token labels (`^s0`, `a1/s1`) to
/// successor names; a `*` entry covers every token the row omits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DfaTable {
    pub states: Vec<String>,
    pub start: String,
    #[serde(default)]
    pub accepting: Vec<String>,
    pub table: BTreeMap<String, BTreeMap<String, String>>,
}

impl DfaTable {
    pub fn compile(&self, mdp: &Mdp) -> Result<HistoryMonitor> {
        if self.states.is_empty() {
            return Err(Error::InvalidMonitor("automaton has no states".into()));
        }
        let ix: HashMap<&str, u32> = self.states.iter().enumerate().map(|(i, s)| (s.as_str(), i as u32)).collect();
        if ix.len() != self.states.len() {
            return Err(Error::InvalidMonitor("duplicate automaton state names".into()));
        }
        let lookup = |name: &str| {
            ix.get(name)
                .map(|&i| MonitorState(i))
                .ok_or_else(|| Error::InvalidMonitor(format!("unknown automaton state `{name}`")))
        };
        let alphabet = Alphabet::of(mdp);
        for row_name in self.table.keys() {
            lookup(row_name)?;
        }
        let mut table = vec![None; self.states.len() * alphabet.len()];
        for (q, name) in self.states.iter().enumerate() {
            let row = self.table.get(name).ok_or_else(|| {
                Error::InvalidMonitor(format!("automaton state `{name}` has no table row"))
            })?;
            let mut wildcard = None;
            for (label, target) in row {
                let target = lookup(target)?;
                if label == "*" {
                    wildcard = Some(target);
                    continue;
                }
                let t = parse_token(mdp, label)?;
                table[q * alphabet.len() + alphabet.index(t)] = Some(target);
            }
            for i in 0..alphabet.len() {
                let cell = &mut table[q * alphabet.len() + i];
                if cell.is_none() {
                    *cell = Some(wildcard.ok_or_else(|| {
                        Error::InvalidMonitor(format!(
                            "automaton state `{name}` has no successor for token `{}`",
                            token_label(mdp, alphabet.token(i))
                        ))
                    })?);
                }
            }
        }
        let accepting_set = self.accepting.iter().map(|n| lookup(n)).collect::<Result<BTreeSet<_>>>()?;
        Ok(HistoryMonitor {
            names: self.states.clone(),
            start: lookup(&self.start)?,
            accepting: (0..self.states.len()).map(|i| accepting_set.contains(&MonitorState(i as u32))).collect(),
            table: table.into_iter().map(Option::unwrap).collect(),
            alphabet,
        })
    }
}

/// Serialized description of a history event.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum MonitorSpec {
    /// The current state is in the set.
    StateSet { states: Vec<String> },
    /// The last transition took one of the listed actions in the matching state.
    StateActionSet { pairs: Vec<(String, String)> },
    /// The last transition was exactly one of the listed `(state, action, next)` triples.
    TransitionSet { transitions: Vec<(String, String, String)> },
    /// The current state is in the set and the current step is in `times`.
    TimedStateSet { states: Vec<String>, times: Vec<u32> },
    Dfa(DfaTable),
}

impl MonitorSpec {
    pub fn states<I: IntoIterator<Item = S>, S: Into<String>>(states: I) -> Self {
        MonitorSpec::StateSet {
            states: states.into_iter().map(Into::into).collect(),
        }
    }
}

fn state_set(mdp: &Mdp, names: &[String]) -> Result<Vec<bool>> {
    let mut set = vec![false; mdp.num_states()];
    for n in names {
        set[mdp.state(n)?.0] = true;
    }
    Ok(set)
}

/// Compiles a monitor against the states, actions and horizon of `task`.
pub fn compile(spec: &MonitorSpec, task: &EpisodicTask) -> Result<HistoryMonitor> {
    compile_for(spec, &task.mdp, task.horizon)
}

pub fn compile_for(spec: &MonitorSpec, mdp: &Mdp, horizon: u32) -> Result<HistoryMonitor> {
    let alphabet = Alphabet::of(mdp);
    let ns = mdp.num_states();
    match spec {
        MonitorSpec::StateSet { states } => {
            let set = state_set(mdp, states)?;
            // None before the initial token, then "current state is in the set".
            Ok(explore(
                alphabet,
                None::<bool>,
                |_, t| match t {
                    Token::Initial(s) | Token::Step { next: s, .. } => Some(set[s.0]),
                },
                |k| *k == Some(true),
                |k| match k {
                    None => "pre".into(),
                    Some(true) => "in".into(),
                    Some(false) => "out".into(),
                },
            ))
        }
        MonitorSpec::StateActionSet { pairs } => {
            let mut matched = vec![false; ns * mdp.num_actions()];
            for (s, a) in pairs {
                matched[mdp.state(s)?.0 * mdp.num_actions() + mdp.action(a)?.0] = true;
            }
            state_action_monitor(mdp, alphabet, |s, a, _| matched[s.0 * mdp.num_actions() + a.0])
        }
        MonitorSpec::TransitionSet { transitions } => {
            let mut matched = BTreeSet::new();
            for (s, a, t) in transitions {
                matched.insert((mdp.state(s)?, mdp.action(a)?, mdp.state(t)?));
            }
            state_action_monitor(mdp, alphabet, |s, a, t| matched.contains(&(s, a, t)))
        }
        MonitorSpec::TimedStateSet { states, times } => {
            let set = state_set(mdp, states)?;
            let times: BTreeSet<u32> = times.iter().copied().collect();
            // (step, in-set); the counter saturates at the horizon.
            Ok(explore(
                alphabet,
                None::<(u32, bool)>,
                |k, t| match (k, t) {
                    (_, Token::Initial(s)) => Some((0, set[s.0])),
                    (None, Token::Step { next, .. }) => Some((0, set[next.0])),
                    (Some((step, _)), Token::Step { next, .. }) => Some(((step + 1).min(horizon), set[next.0])),
                },
                |k| matches!(k, Some((step, true)) if times.contains(step)),
                |k| match k {
                    None => "pre".into(),
                    Some((step, inside)) => format!("t{step}:{}", if *inside { "in" } else { "out" }),
                },
            ))
        }
        MonitorSpec::Dfa(table) => table.compile(mdp),
    }
}

/// Tracks the current state plus a flag for "the transition just consumed matched".
fn state_action_monitor(
    mdp: &Mdp,
    alphabet: Alphabet,
    matches: impl Fn(StateId, ActionId, StateId) -> bool,
) -> Result<HistoryMonitor> {
    Ok(explore(
        alphabet,
        None::<(StateId, bool)>,
        |k, t| match (k, t) {
            (_, Token::Initial(s)) => Some((s, false)),
            (None, Token::Step { next, .. }) => Some((next, false)),
            (Some((s, _)), Token::Step { action, next }) => Some((next, matches(*s, action, next))),
        },
        |k| matches!(k, Some((_, true))),
        |k| match k {
            None => "pre".into(),
            Some((s, hit)) => format!("at:{}{}", mdp.state_name(*s), if *hit { "!" } else { "" }),
        },
    ))
}
