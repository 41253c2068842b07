//! Built-in example tasks and the results they are expected to reproduce.
//!
//! | name         | what it shows |
//! |--------------|---------------|
//! | `investment` | two plans with equal expected return but different loss probability |
//! | `taxi`       | pick-up then delivery as two objectives under the Pareto order |
//! | `maze`       | the same dynamics, reaching the goal first, helpers second (lexicographic) |
//! | `fork`       | a stationary random policy beats every deterministic one (product order) |
//! | `two_starts` | remembering the start state beats every stationary policy |
//! | `combined`   | a history-dependent random policy beats every history-dependent deterministic one |
//!
//! Taxi and maze share a six-state deterministic-choice layout:
//!
//! ```text
//!   s0 --a1--> c  --a1--> s1 (goal)
//!   s0 --a2--> p1 --a1--> s1 (0.9) | crash (0.1)
//!              c  --a2--> p2 --a1--> s1 (0.8) | crash (0.2)
//!   p1, p2 --a2--> crash
//! ```

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::evaluate::{reconstruct_scalar, Evaluator, ValueVector};
use crate::monitor::MonitorSpec;
use crate::objective::{AggregationMode, MicroObjective};
use crate::order::{self, Guard, PartialOrderSpec, PriorityLevel};
use crate::policy::{enumerate_sd, point_mass, FiniteMemoryPolicy, MemorySpec, Policy, PolicyClass, StationaryPolicy};
use crate::reductions::{expansion_reduction, investment_rewards};
use crate::task::{EpisodicMdp, EpisodicTask, TaskDocument, TransitionEntry};

pub const NAMES: [&str; 6] = ["investment", "taxi", "maze", "fork", "two_starts", "combined"];

#[derive(Clone, Debug)]
pub struct GalleryFixture {
    pub name: &'static str,
    pub task: EpisodicTask,
    /// Alternative orders the fixture is also checked under.
    pub order_variants: Vec<(&'static str, PartialOrderSpec)>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClaimResult {
    pub claim: String,
    pub passed: bool,
    pub detail: String,
}

type Row<'a> = (&'a str, &'a str, &'a [(&'a str, f64)]);

#[allow(clippy::too_many_arguments)]
fn build(
    states: &[&str],
    actions: &[&str],
    rows: &[Row<'_>],
    initial: &[(&str, f64)],
    terminal: &[&str],
    horizon: u32,
    objectives: Vec<MicroObjective>,
    order: PartialOrderSpec,
) -> EpisodicTask {
    let owned = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    let dist = |xs: &[(&str, f64)]| xs.iter().map(|(s, p)| (s.to_string(), *p)).collect::<BTreeMap<_, _>>();
    let doc = TaskDocument {
        states: owned(states),
        actions: owned(actions),
        transitions: rows
            .iter()
            .map(|(from, action, to)| TransitionEntry {
                from: from.to_string(),
                action: action.to_string(),
                to: dist(to),
            })
            .collect(),
        initial: dist(initial),
        terminal: owned(terminal),
        horizon,
        objectives,
        order,
    };
    doc.resolve().expect("gallery fixtures reference declared ids")
}

fn objective(name: &str, init: &[&str], term: &[&str], horizon: u32) -> MicroObjective {
    MicroObjective::new(
        name,
        MonitorSpec::states(init.iter().copied()),
        MonitorSpec::states(term.iter().copied()),
        horizon,
    )
}

pub fn investment_weighted_order() -> PartialOrderSpec {
    PartialOrderSpec::Weighted {
        weights: vec![10.0, -10.0, 20.0, -20.0],
    }
}

/// Loss of 20 must have probability below `epsilon`; ties broken by expected return.
pub fn investment_threshold_order(epsilon: f64) -> PartialOrderSpec {
    PartialOrderSpec::Threshold {
        guards: vec![Guard::max(3, epsilon)],
        fallback: Box::new(investment_weighted_order()),
    }
}

fn investment() -> GalleryFixture {
    let objectives = ["s1", "s2", "s3", "s4"]
        .iter()
        .map(|s| objective(&format!("enter_{s}"), &["s0"], &[s], 1))
        .collect();
    let task = build(
        &["s0", "s1", "s2", "s3", "s4"],
        &["a1", "a2"],
        &[
            ("s0", "a1", &[("s1", 0.9), ("s2", 0.1)]),
            ("s0", "a2", &[("s3", 0.7), ("s4", 0.3)]),
        ],
        &[("s0", 1.0)],
        &["s1", "s2", "s3", "s4"],
        1,
        objectives,
        investment_weighted_order(),
    );
    GalleryFixture {
        name: "investment",
        task,
        order_variants: vec![
            ("weighted", investment_weighted_order()),
            ("pareto", PartialOrderSpec::Pareto),
            ("threshold", investment_threshold_order(0.15)),
        ],
    }
}

const GRID_STATES: [&str; 6] = ["s0", "c", "p1", "p2", "s1", "crash"];
const GRID_ROWS: [Row<'static>; 8] = [
    ("s0", "a1", &[("c", 1.0)]),
    ("s0", "a2", &[("p1", 1.0)]),
    ("c", "a1", &[("s1", 1.0)]),
    ("c", "a2", &[("p2", 1.0)]),
    ("p1", "a1", &[("s1", 0.9), ("crash", 0.1)]),
    ("p1", "a2", &[("crash", 1.0)]),
    ("p2", "a1", &[("s1", 0.8), ("crash", 0.2)]),
    ("p2", "a2", &[("crash", 1.0)]),
];

fn grid_task(objectives: Vec<MicroObjective>, order: PartialOrderSpec) -> EpisodicTask {
    build(&GRID_STATES, &["a1", "a2"], &GRID_ROWS, &[("s0", 1.0)], &["s1", "crash"], 4, objectives, order)
}

fn taxi_objectives() -> Vec<MicroObjective> {
    vec![
        objective("pick_up", &["s0"], &["p1", "p2"], 2),
        objective("deliver", &["p1", "p2"], &["s1"], 2),
    ]
}

fn taxi() -> GalleryFixture {
    GalleryFixture {
        name: "taxi",
        task: grid_task(taxi_objectives(), PartialOrderSpec::Pareto),
        order_variants: vec![("pareto", PartialOrderSpec::Pareto)],
    }
}

pub fn maze_order() -> PartialOrderSpec {
    PartialOrderSpec::Lexicographic {
        priority: vec![PriorityLevel::Single(2), PriorityLevel::Group(vec![0, 1])],
    }
}

fn maze() -> GalleryFixture {
    let mut objectives = taxi_objectives();
    objectives.push(objective("reach_goal", &["s0"], &["s1"], 3));
    GalleryFixture {
        name: "maze",
        task: grid_task(objectives, maze_order()),
        order_variants: vec![("lex", maze_order()), ("pareto", PartialOrderSpec::Pareto)],
    }
}

fn fork() -> GalleryFixture {
    let order = PartialOrderSpec::Product { groups: vec![vec![0, 1]] };
    let task = build(
        &["s0", "s1", "s2"],
        &["a1", "a2"],
        &[("s0", "a1", &[("s1", 1.0)]), ("s0", "a2", &[("s2", 1.0)])],
        &[("s0", 1.0)],
        &["s1", "s2"],
        1,
        vec![objective("reach_s1", &["s0"], &["s1"], 1), objective("reach_s2", &["s0"], &["s2"], 1)],
        order.clone(),
    );
    GalleryFixture {
        name: "fork",
        task,
        order_variants: vec![("product", order)],
    }
}

fn two_start_task(objectives: Vec<MicroObjective>, order: PartialOrderSpec) -> EpisodicTask {
    build(
        &["s0", "s1", "s2", "s3", "s4"],
        &["a1", "a2"],
        &[
            ("s0", "a1", &[("s1", 1.0)]),
            ("s0", "a2", &[("s2", 1.0)]),
            ("s3", "a1", &[("s0", 1.0)]),
            ("s3", "a2", &[("s0", 1.0)]),
            ("s4", "a1", &[("s0", 1.0)]),
            ("s4", "a2", &[("s0", 1.0)]),
        ],
        &[("s3", 0.5), ("s4", 0.5)],
        &["s1", "s2"],
        2,
        objectives,
        order,
    )
}

fn two_starts() -> GalleryFixture {
    let task = two_start_task(
        vec![objective("s3_to_s2", &["s3"], &["s2"], 2), objective("s4_to_s1", &["s4"], &["s1"], 2)],
        PartialOrderSpec::Pareto,
    );
    GalleryFixture {
        name: "two_starts",
        task,
        order_variants: vec![("pareto", PartialOrderSpec::Pareto)],
    }
}

pub fn combined_order() -> PartialOrderSpec {
    PartialOrderSpec::Product {
        groups: vec![vec![0, 1], vec![2]],
    }
}

fn combined() -> GalleryFixture {
    let task = two_start_task(
        vec![
            objective("s3_to_s1", &["s3"], &["s1"], 2),
            objective("s3_to_s2", &["s3"], &["s2"], 2),
            objective("s4_to_s1", &["s4"], &["s1"], 2),
        ],
        combined_order(),
    );
    GalleryFixture {
        name: "combined",
        task,
        order_variants: vec![("product", combined_order())],
    }
}

pub fn fixture(name: &str) -> Result<GalleryFixture> {
    Ok(match name {
        "investment" => investment(),
        "taxi" => taxi(),
        "maze" => maze(),
        "fork" => fork(),
        "two_starts" => two_starts(),
        "combined" => combined(),
        other => return Err(Error::UnknownFixture(other.to_string())),
    })
}

/// One objective `({s0}, {s2}, 1)` on a loop `s0 → {s1, s2}`, `s1 → s0`;
/// used to script repeated activations within one episode.
pub fn lifecycle_task() -> EpisodicTask {
    build(
        &["s0", "s1", "s2"],
        &["go"],
        &[("s0", "go", &[("s1", 0.5), ("s2", 0.5)]), ("s1", "go", &[("s0", 1.0)])],
        &[("s0", 1.0)],
        &["s2"],
        6,
        vec![objective("reach_s2", &["s0"], &["s2"], 1)],
        PartialOrderSpec::Pareto,
    )
}

/// Deterministic policy from `(state, action)` names.
pub fn sd_policy(task: &EpisodicTask, choices: &[(&str, &str)]) -> StationaryPolicy {
    StationaryPolicy::deterministic(
        &task.mdp,
        choices
            .iter()
            .map(|(s, a)| (task.mdp.state(s).expect("known state"), task.mdp.action(a).expect("known action"))),
    )
}

/// Remembers the start state; in `s0` takes `s0_choice[m]`, elsewhere `a1`.
fn start_memory_policy(task: &EpisodicTask, s0_choice: [(&str, Vec<f64>); 2]) -> FiniteMemoryPolicy {
    let mdp = &task.mdp;
    let memory = MemorySpec::InitialState.compile(mdp).expect("initial-state memory compiles");
    let mut p = FiniteMemoryPolicy::new(memory, mdp.num_states());
    let s0 = mdp.state("s0").expect("s0");
    for (start, dist) in s0_choice {
        let m = p.memory.state_named(start).expect("memory named after a state");
        for s in task.non_terminal_states() {
            p.set(m, s, point_mass(mdp.num_actions(), crate::task::ActionId(0)));
        }
        p.set(m, s0, dist);
    }
    p
}

/// `a2` in `s0` when the episode started in `s3`, `a1` when it started in `s4`.
pub fn two_starts_memory_policy(task: &EpisodicTask) -> FiniteMemoryPolicy {
    start_memory_policy(task, [("s3", vec![0.0, 1.0]), ("s4", vec![1.0, 0.0])])
}

/// A fair coin in `s0` after starting in `s3`, `a1` after starting in `s4`.
pub fn combined_random_memory_policy(task: &EpisodicTask) -> FiniteMemoryPolicy {
    start_memory_policy(task, [("s3", vec![0.5, 0.5]), ("s4", vec![1.0, 0.0])])
}

// ---------------------------------------------------------------------------
// Claims

struct Claims(Vec<ClaimResult>);

impl Claims {
    fn check(&mut self, claim: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.0.push(ClaimResult {
            claim: claim.into(),
            passed,
            detail: detail.into(),
        });
    }
}

fn close(u: &[f64], v: &[f64], tol: f64) -> bool {
    u.len() == v.len() && u.iter().zip(v).all(|(a, b)| (a - b).abs() <= tol)
}

fn exact(ev: &Evaluator<'_>, p: impl Into<Policy>) -> Result<ValueVector> {
    ev.exact(&p.into(), AggregationMode::EpisodeMeanZeroDefault).map(|(v, _)| v)
}

/// Evaluates every documented claim of fixture `name` exactly.
pub fn run_fixture(name: &str) -> Result<Vec<ClaimResult>> {
    let fx = fixture(name)?;
    let task = &fx.task;
    let ev = Evaluator::new(task)?;
    let mut c = Claims(Vec::new());
    let mode = AggregationMode::EpisodeMeanZeroDefault;
    match name {
        "investment" => {
            let v1 = exact(&ev, sd_policy(task, &[("s0", "a1")]))?;
            let v2 = exact(&ev, sd_policy(task, &[("s0", "a2")]))?;
            c.check("a1 event probabilities are [0.9, 0.1, 0, 0]", close(&v1, &[0.9, 0.1, 0.0, 0.0], 1e-12), format!("{:?}", v1.values));
            c.check("a2 event probabilities are [0, 0, 0.7, 0.3]", close(&v2, &[0.0, 0.0, 0.7, 0.3], 1e-12), format!("{:?}", v2.values));
            let n = enumerate_sd(task)?.len();
            c.check("exactly 2 stationary deterministic policies", n == 2, format!("{n}"));

            let base = EpisodicMdp::from(task);
            let exp = expansion_reduction(&base, &investment_rewards(&task.mdp)?)?;
            let eev = Evaluator::new(&exp.task)?;
            let r1 = reconstruct_scalar(&exact(&eev, sd_policy(task, &[("s0", "a1")]))?, &exp.weights)?;
            let r2 = reconstruct_scalar(&exact(&eev, sd_policy(task, &[("s0", "a2")]))?, &exp.weights)?;
            c.check(
                "reward expansion reconstructs an expected return of 8 for both plans",
                (r1 - 8.0).abs() <= 1e-10 && (r2 - 8.0).abs() <= 1e-10,
                format!("a1 {r1}, a2 {r2}"),
            );
            let w = investment_weighted_order();
            let mutual = order::leq(&w, &v1, &v2)? && order::leq(&w, &v2, &v1)?;
            c.check("weighted order: the two plans are mutually leq", mutual, "both scalarize to 8");
            let pareto = order::maximal_elements(&PartialOrderSpec::Pareto, &[&v1[..], &v2[..]])?;
            c.check("pareto order: both plans maximal", pareto == vec![0, 1], format!("{pareto:?}"));
            let thr = order::maximal_elements(&investment_threshold_order(0.15), &[&v1[..], &v2[..]])?;
            c.check("threshold order (loss-20 probability < 0.15): only a1 maximal", thr == vec![0], format!("{thr:?}"));
            let sweep_ok = (1..=30).all(|i| {
                let eps = f64::from(i) / 100.0;
                order::maximal_elements(&investment_threshold_order(eps), &[&v1[..], &v2[..]]).ok() == Some(vec![0])
            });
            c.check("threshold selects only a1 for every epsilon in 0.01..=0.30", sweep_ok, "step 0.01");
        }
        "taxi" | "maze" => {
            let direct = exact(&ev, sd_policy(task, &[("s0", "a1"), ("c", "a1"), ("p1", "a1"), ("p2", "a1")]))?;
            let via_p1 = exact(&ev, sd_policy(task, &[("s0", "a2"), ("c", "a1"), ("p1", "a1"), ("p2", "a1")]))?;
            let via_p2 = exact(&ev, sd_policy(task, &[("s0", "a1"), ("c", "a2"), ("p1", "a1"), ("p2", "a1")]))?;
            let (e_direct, e_p1, e_p2): (&[f64], &[f64], &[f64]) = if name == "taxi" {
                (&[0.0, 0.0], &[1.0, 0.9], &[1.0, 0.8])
            } else {
                (&[0.0, 0.0, 1.0], &[1.0, 0.9, 0.9], &[1.0, 0.8, 0.8])
            };
            c.check(format!("direct route values {e_direct:?}"), close(&direct, e_direct, 1e-12), format!("{:?}", direct.values));
            c.check(format!("pick-up at p1 values {e_p1:?}"), close(&via_p1, e_p1, 1e-12), format!("{:?}", via_p1.values));
            c.check(format!("pick-up at p2 values {e_p2:?}"), close(&via_p2, e_p2, 1e-12), format!("{:?}", via_p2.values));
            let f = order::frontier(task, &PolicyClass::Sd, mode)?;
            let maximal: Vec<&str> = f.maximal_entries().map(|e| e.descriptor.as_str()).collect();
            let (label, prefix) = if name == "taxi" {
                ("maximal SD policies are exactly the 4 that pick up at p1 (values [1, 0.9])", "s0:a2;c:")
            } else {
                ("lexicographic maximal SD policies are exactly the 4 direct routes", "s0:a1;c:a1;")
            };
            let ok = maximal.len() == 4
                && maximal.iter().all(|d| d.starts_with(prefix))
                && (name == "maze" || maximal.iter().all(|d| d.contains("p1:a1")));
            c.check(label, ok, maximal.join(" | "));
            if name == "maze" {
                let pareto_incomparable = !order::leq(&PartialOrderSpec::Pareto, &direct, &via_p1)?
                    && !order::leq(&PartialOrderSpec::Pareto, &via_p1, &direct)?;
                let lex_above = order::strictly_dominates(&maze_order(), &direct, &via_p1)?;
                c.check(
                    "direct route is Pareto-incomparable to the p1 route but lexicographically above it",
                    pareto_incomparable && lex_above,
                    "",
                );
            } else {
                let dominated = order::strictly_dominates(&task.order, &via_p1, &direct)?;
                c.check("p1 route strictly dominates the direct route", dominated, "");
            }
        }
        "fork" => {
            let uniform = exact(&ev, StationaryPolicy::uniform(task))?;
            c.check("uniform random policy values (0.5, 0.5)", close(&uniform, &[0.5, 0.5], 1e-12), format!("{:?}", uniform.values));
            let sd: Vec<ValueVector> = enumerate_sd(task)?.map(|p| exact(&ev, p)).collect::<Result<_>>()?;
            let corners = sd.len() == 2 && close(&sd[0], &[1.0, 0.0], 1e-12) && close(&sd[1], &[0.0, 1.0], 1e-12);
            c.check("deterministic policies give (1, 0) and (0, 1)", corners, format!("{sd:?}"));
            let mut dom = true;
            for v in &sd {
                dom &= order::strictly_dominates(&task.order, &uniform, v)?;
            }
            c.check("uniform strictly dominates both deterministic policies (product order)", dom, "");
            let f = order::frontier(task, &PolicyClass::SrGrid(2), mode)?;
            let maximal: Vec<&[f64]> = f.maximal_entries().map(|e| &e.values.values[..]).collect();
            let only_uniform = maximal.len() == 1 && close(maximal[0], &[0.5, 0.5], 1e-12);
            c.check("SR-grid(2) frontier flags only the uniform policy", only_uniform, format!("{maximal:?}"));
        }
        "two_starts" => {
            let mem = exact(&ev, two_starts_memory_policy(task))?;
            c.check("start-state memory policy values (0.5, 0.5)", close(&mem, &[0.5, 0.5], 1e-12), format!("{:?}", mem.values));
            let s0 = task.mdp.state("s0")?;
            let mut on_line = true;
            let mut dominated = true;
            let mut n = 0;
            for p in crate::policy::sr_grid(task, 10)? {
                let a1 = p.rule[s0.0].as_ref().map_or(0.0, |d| d[0]);
                let v = exact(&ev, p)?;
                on_line &= close(&v, &[0.5 * (1.0 - a1), 0.5 * a1], 1e-12);
                dominated &= order::strictly_dominates(&task.order, &mem, &v)?;
                n += 1;
            }
            c.check("every SR-grid(10) policy lies on (0.5(1-p), 0.5p)", on_line, format!("{n} policies"));
            c.check("memory policy strictly dominates every SR-grid(10) policy", dominated, format!("{n} policies"));
            let class = PolicyClass::FmDet {
                memory: MemorySpec::InitialState,
                decision_states: Some(vec!["s0".into()]),
            };
            let f = order::frontier(task, &class, mode)?;
            let maximal: Vec<&[f64]> = f.maximal_entries().map(|e| &e.values.values[..]).collect();
            let ok = f.entries.len() == 4 && maximal.len() == 1 && close(maximal[0], &[0.5, 0.5], 1e-12);
            c.check("FM-det(start state; s0) has 4 policies and only the memory policy is maximal", ok, format!("{maximal:?}"));
        }
        "combined" => {
            let hr = exact(&ev, combined_random_memory_policy(task))?;
            c.check("random memory policy values (0.25, 0.25, 0.5)", close(&hr, &[0.25, 0.25, 0.5], 1e-12), format!("{:?}", hr.values));
            let class = PolicyClass::FmDet {
                memory: MemorySpec::InitialState,
                decision_states: Some(vec!["s0".into()]),
            };
            let mut all = true;
            let mut n = 0;
            for p in class.policies(task)? {
                all &= order::strictly_dominates(&task.order, &hr, &exact(&ev, p)?)?;
                n += 1;
            }
            c.check("strictly dominates every deterministic start-state-memory policy", all, format!("{n} policies"));
            let mut all = true;
            let mut n = 0;
            for p in crate::policy::sr_grid(task, 10)? {
                all &= order::strictly_dominates(&task.order, &hr, &exact(&ev, p)?)?;
                n += 1;
            }
            c.check("strictly dominates every SR-grid(10) stationary policy", all, format!("{n} policies"));
        }
        _ => unreachable!("fixture() rejected unknown names"),
    }
    Ok(c.0)
}
