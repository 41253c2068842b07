//! Micro-objective tasks over finite episodic MDPs.
//!
//! A task is an MDP with terminal states and a horizon, plus a list of
//! micro-objectives. Each micro-objective is an (initiation, termination,
//! horizon) triple over history events; its value under a policy is the
//! probability-like expected 0/1 return. Policies are ranked by a partial
//! order over the resulting value vectors.
//!
//! Module map:
//! - [`task`]: MDP and episodic task types, validation, JSON documents.
//! - [`monitor`]: history events as deterministic automata over episode tokens.
//! - [`objective`]: activation / timer / termination lifecycle.
//! - [`policy`]: stationary and finite-memory policies, enumeration.
//! - [`evaluate`]: exact dynamic programming and seeded Monte Carlo.
//! - [`order`]: partial orders, dominance, maximal elements, frontiers.
//! - [`reductions`]: generality and discounted-objective expansion.
//! - [`gallery`]: built-in example tasks with their expected results.

pub mod error;
pub mod evaluate;
pub mod gallery;
pub mod monitor;
pub mod objective;
pub mod order;
pub mod policy;
pub mod reductions;
pub mod task;

pub use error::{Error, Result};
pub use evaluate::{
    evaluate_exact, evaluate_mc, reconstruct_scalar, simulate, Evaluator, McEstimate,
    OutcomeDistribution, ValueVector,
};
pub use monitor::{HistoryMonitor, MonitorSpec, MonitorState, Token};
pub use objective::{AggregationMode, EpisodeTrace, MicroObjective, ObjectiveStatus};
pub use order::{FrontierResult, PartialOrderSpec};
pub use policy::{MemorySpec, Policy, PolicyClass};
pub use task::{load_task, save_task, validate_task, ActionId, EpisodicTask, Mdp, StateId};

/// Absolute tolerance used for every value comparison downstream of evaluation.
pub const VALUE_TOLERANCE: f64 = 1e-9;

/// Tolerance on probability sums in task documents and policies.
pub const PROBABILITY_TOLERANCE: f64 = 1e-12;
