//! Micro-objective lifecycle.
//!
//! Per objective and per transition, in this order:
//! 1. both monitors consume the step token;
//! 2. if active, the timer advances; an accepting termination monitor ends
//!    the activation with return 1, otherwise reaching the objective horizon
//!    or the end of the episode ends it with return 0;
//! 3. if now inactive and the episode continues, an accepting initiation
//!    monitor starts a new activation with its timer at 0.
//!
//! Success is checked before the timeout, so an objective with horizon 1
//! succeeds when its event happens on the very next transition.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::monitor::{self, HistoryMonitor, MonitorSpec, MonitorState, Token};
use crate::task::{ActionId, EpisodicTask, StateId};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MicroObjective {
    pub name: String,
    #[serde(rename = "init")]
    pub initiation: MonitorSpec,
    #[serde(rename = "term")]
    pub termination: MonitorSpec,
    pub horizon: u32,
}

impl MicroObjective {
    pub fn new(name: impl Into<String>, initiation: MonitorSpec, termination: MonitorSpec, horizon: u32) -> Self {
        MicroObjective {
            name: name.into(),
            initiation,
            termination,
            horizon,
        }
    }
}

/// How multiple activations within an episode turn into one value.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregationMode {
    /// Expected per-episode mean of returns; episodes without activations count as 0.
    #[default]
    EpisodeMeanZeroDefault,
    /// Expected per-episode mean of returns, conditioned on at least one activation.
    EpisodeMeanConditional,
    /// Expected successes divided by expected activations.
    RatioOfExpectations,
}

impl AggregationMode {
    pub const ALL: [AggregationMode; 3] = [
        AggregationMode::EpisodeMeanZeroDefault,
        AggregationMode::EpisodeMeanConditional,
        AggregationMode::RatioOfExpectations,
    ];

    pub fn label(self) -> &'static str {
        match self {
            AggregationMode::EpisodeMeanZeroDefault => "default",
            AggregationMode::EpisodeMeanConditional => "conditional",
            AggregationMode::RatioOfExpectations => "ratio",
        }
    }
}

impl fmt::Display for AggregationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for AggregationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "default" | "episode_mean_zero_default" => Ok(AggregationMode::EpisodeMeanZeroDefault),
            "conditional" | "episode_mean_conditional" => Ok(AggregationMode::EpisodeMeanConditional),
            "ratio" | "ratio_of_expectations" => Ok(AggregationMode::RatioOfExpectations),
            other => Err(Error::Parse(format!(
                "unknown aggregation mode `{other}` (expected default, conditional or ratio)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Phase {
    Inactive,
    Active { timer: u32 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ObjectiveStatus {
    pub phase: Phase,
    pub phi: MonitorState,
    pub psi: MonitorState,
    pub activations: u32,
    pub successes: u32,
}

impl ObjectiveStatus {
    pub fn is_active(&self) -> bool {
        matches!(self.phase, Phase::Active { .. })
    }
}

/// A micro-objective with both monitors compiled.
#[derive(Clone, Debug)]
pub struct CompiledObjective {
    pub initiation: HistoryMonitor,
    pub termination: HistoryMonitor,
    pub horizon: u32,
}

impl CompiledObjective {
    pub fn compile(objective: &MicroObjective, task: &EpisodicTask) -> Result<Self> {
        Ok(CompiledObjective {
            initiation: monitor::compile(&objective.initiation, task)?,
            termination: monitor::compile(&objective.termination, task)?,
            horizon: objective.horizon,
        })
    }

    /// Status after the initial token. Nothing activates when the episode is
    /// already over at its first state.
    pub fn start(&self, s0: StateId, task_over: bool) -> ObjectiveStatus {
        let token = Token::Initial(s0);
        let phi = self.initiation.advance(self.initiation.start(), token);
        let psi = self.termination.advance(self.termination.start(), token);
        let activate = !task_over && self.initiation.is_accepting(phi);
        ObjectiveStatus {
            phase: if activate { Phase::Active { timer: 0 } } else { Phase::Inactive },
            phi,
            psi,
            activations: u32::from(activate),
            successes: 0,
        }
    }

    /// One transition of the lifecycle. Returns the new status and the return
    /// emitted if an activation ended (`Some(true)` for 1, `Some(false)` for 0).
    pub fn step(
        &self,
        status: &ObjectiveStatus,
        action: ActionId,
        next: StateId,
        task_over: bool,
    ) -> Result<(ObjectiveStatus, Option<bool>)> {
        if status.successes > status.activations {
            return Err(Error::Inconsistent(format!(
                "{} successes for {} activations",
                status.successes, status.activations
            )));
        }
        let token = Token::Step { action, next };
        let mut out = ObjectiveStatus {
            phi: self.initiation.advance(status.phi, token),
            psi: self.termination.advance(status.psi, token),
            ..*status
        };
        let mut emitted = None;
        if let Phase::Active { timer } = status.phase {
            if timer >= self.horizon {
                return Err(Error::Inconsistent(format!(
                    "active timer {timer} already at objective horizon {}",
                    self.horizon
                )));
            }
            let timer = timer + 1;
            if self.termination.is_accepting(out.psi) {
                out.phase = Phase::Inactive;
                out.successes += 1;
                emitted = Some(true);
            } else if timer >= self.horizon || task_over {
                out.phase = Phase::Inactive;
                emitted = Some(false);
            } else {
                out.phase = Phase::Active { timer };
            }
        }
        if !out.is_active() && !task_over && self.initiation.is_accepting(out.phi) {
            out.phase = Phase::Active { timer: 0 };
            out.activations += 1;
        }
        Ok((out, emitted))
    }
}

/// All objectives of a task, compiled once.
#[derive(Clone, Debug)]
pub struct CompiledTask<'a> {
    pub task: &'a EpisodicTask,
    pub objectives: Vec<CompiledObjective>,
}

impl<'a> CompiledTask<'a> {
    pub fn new(task: &'a EpisodicTask) -> Result<Self> {
        let objectives = task
            .objectives
            .iter()
            .map(|o| CompiledObjective::compile(o, task))
            .collect::<Result<_>>()?;
        Ok(CompiledTask { task, objectives })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ReturnEvent {
    pub objective: usize,
    pub success: bool,
}

pub fn init_episode(task: &CompiledTask<'_>, s0: StateId) -> Vec<ObjectiveStatus> {
    let over = task.task.is_terminal(s0);
    task.objectives.iter().map(|o| o.start(s0, over)).collect()
}

/// Advances every objective over the transition `(s, a, s')` taken at task step `t`.
pub fn on_step(
    task: &CompiledTask<'_>,
    statuses: &[ObjectiveStatus],
    s: StateId,
    a: ActionId,
    next: StateId,
    t: u32,
    task_over: bool,
) -> Result<(Vec<ObjectiveStatus>, Vec<ReturnEvent>)> {
    if statuses.len() != task.objectives.len() {
        return Err(Error::LengthMismatch {
            expected: task.objectives.len(),
            found: statuses.len(),
        });
    }
    if t >= task.task.horizon {
        return Err(Error::Inconsistent(format!("step {t} at or beyond the task horizon")));
    }
    if task.task.is_terminal(s) {
        return Err(Error::Inconsistent(format!(
            "transition out of terminal state `{}`",
            task.task.mdp.state_name(s)
        )));
    }
    let mut updated = Vec::with_capacity(statuses.len());
    let mut events = Vec::new();
    for (i, (obj, st)) in task.objectives.iter().zip(statuses).enumerate() {
        let (st, ret) = obj.step(st, a, next, task_over)?;
        if let Some(success) = ret {
            events.push(ReturnEvent { objective: i, success });
        }
        updated.push(st);
    }
    Ok((updated, events))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StepRecord {
    pub from: StateId,
    pub action: ActionId,
    pub to: StateId,
}

/// One activation: started after step `start` and settled by the transition
/// taken at step `end - 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ActivationRecord {
    pub start: u32,
    pub end: u32,
    pub success: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EpisodeTrace {
    pub initial: StateId,
    pub steps: Vec<StepRecord>,
    pub activations: Vec<Vec<ActivationRecord>>,
}

impl EpisodeTrace {
    /// `(successes, activations)` for one objective.
    pub fn counts(&self, objective: usize) -> (u32, u32) {
        let records = &self.activations[objective];
        (records.iter().filter(|r| r.success).count() as u32, records.len() as u32)
    }

    /// Text dump: a header line, one line per step, one line per activation.
    pub fn dump(&self, task: &EpisodicTask) -> String {
        let mdp = &task.mdp;
        let mut out = String::new();
        let _ = writeln!(out, "episode start {}", mdp.state_name(self.initial));
        for (t, s) in self.steps.iter().enumerate() {
            let _ = writeln!(
                out,
                "step {t} {} {} {}",
                mdp.state_name(s.from),
                mdp.action_name(s.action),
                mdp.state_name(s.to)
            );
        }
        for (obj, records) in task.objectives.iter().zip(&self.activations) {
            for r in records {
                let _ = writeln!(out, "activation {} {} {} {}", obj.name, r.start, r.end, u8::from(r.success));
            }
        }
        out
    }
}

/// What one episode contributes to an objective's value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Contribution {
    Value(f64),
    Undefined,
    Counts { successes: u32, activations: u32 },
}

pub fn contribution(successes: u32, activations: u32, mode: AggregationMode) -> Contribution {
    match mode {
        AggregationMode::EpisodeMeanZeroDefault if activations == 0 => Contribution::Value(0.0),
        AggregationMode::EpisodeMeanConditional if activations == 0 => Contribution::Undefined,
        AggregationMode::EpisodeMeanZeroDefault | AggregationMode::EpisodeMeanConditional => {
            Contribution::Value(f64::from(successes) / f64::from(activations))
        }
        AggregationMode::RatioOfExpectations => Contribution::Counts { successes, activations },
    }
}

pub fn episode_value_contribution(trace: &EpisodeTrace, objective: usize, mode: AggregationMode) -> Contribution {
    let (successes, activations) = trace.counts(objective);
    contribution(successes, activations, mode)
}

/// Drives the lifecycle along one episode and records its trace.
pub struct EpisodeRecorder<'t, 'a> {
    task: &'t CompiledTask<'a>,
    statuses: Vec<ObjectiveStatus>,
    open: Vec<Option<u32>>,
    trace: EpisodeTrace,
    current: StateId,
    over: bool,
}

impl<'t, 'a> EpisodeRecorder<'t, 'a> {
    pub fn new(task: &'t CompiledTask<'a>, s0: StateId) -> Self {
        let statuses = init_episode(task, s0);
        let open = statuses.iter().map(|s| s.is_active().then_some(0)).collect();
        EpisodeRecorder {
            task,
            statuses,
            open,
            trace: EpisodeTrace {
                initial: s0,
                steps: Vec::new(),
                activations: vec![Vec::new(); task.objectives.len()],
            },
            current: s0,
            over: task.task.is_terminal(s0),
        }
    }

    pub fn current_state(&self) -> StateId {
        self.current
    }

    pub fn is_over(&self) -> bool {
        self.over
    }

    pub fn statuses(&self) -> &[ObjectiveStatus] {
        &self.statuses
    }

    pub fn push(&mut self, action: ActionId, next: StateId) -> Result<Vec<ReturnEvent>> {
        if self.over {
            return Err(Error::Inconsistent("step after the episode ended".into()));
        }
        let t = self.trace.steps.len() as u32;
        let over = self.task.task.ends_after(t, next);
        let (statuses, events) = on_step(self.task, &self.statuses, self.current, action, next, t, over)?;
        for ev in &events {
            let start = self.open[ev.objective]
                .take()
                .ok_or_else(|| Error::Inconsistent("return from an inactive objective".into()))?;
            self.trace.activations[ev.objective].push(ActivationRecord {
                start,
                end: t + 1,
                success: ev.success,
            });
        }
        for (slot, st) in self.open.iter_mut().zip(&statuses) {
            if st.is_active() && slot.is_none() {
                *slot = Some(t + 1);
            }
        }
        self.trace.steps.push(StepRecord {
            from: self.current,
            action,
            to: next,
        });
        self.statuses = statuses;
        self.current = next;
        self.over = over;
        Ok(events)
    }

    pub fn finish(self) -> Result<EpisodeTrace> {
        if !self.over {
            return Err(Error::Inconsistent("episode has not ended".into()));
        }
        Ok(self.trace)
    }
}

/// Replays a complete step sequence through the lifecycle.
pub fn replay(task: &CompiledTask<'_>, initial: StateId, steps: &[(ActionId, StateId)]) -> Result<EpisodeTrace> {
    let mut rec = EpisodeRecorder::new(task, initial);
    for &(a, next) in steps {
        rec.push(a, next)?;
    }
    rec.finish()
}
