//! `microrl`: evaluate, search and check micro-objective tasks from the command line.
//!
//! Exit status: 0 on success, 1 when a check fails, 2 on usage or input errors.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use microrl_core::evaluate::Evaluator;
use microrl_core::order::{check_order_axioms, frontier};
use microrl_core::policy::{load_policy, MemorySpec, Policy, PolicyClass};
use microrl_core::reductions::{expansion_reduction, generality_reduction, RewardDocument};
use microrl_core::task::load_mdp;
use microrl_core::{gallery, load_task, save_task, simulate, AggregationMode, EpisodicTask, PartialOrderSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

#[derive(Parser)]
#[command(name = "microrl", version, about = "Micro-objective tasks over finite episodic MDPs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Exact,
    Mc,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReduceMode {
    Generality,
    Expansion,
}

#[derive(Subcommand)]
enum Command {
    /// Value vector of one policy, as a JSON report.
    Eval {
        #[arg(long)]
        task: PathBuf,
        #[arg(long)]
        policy: PathBuf,
        #[arg(long, value_enum, default_value = "exact")]
        method: Method,
        #[arg(long, default_value_t = 10_000)]
        episodes: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// default, conditional or ratio.
        #[arg(long, default_value = "default")]
        mode: AggregationMode,
    },
    /// Evaluates a whole policy class and flags the maximal policies (CSV).
    Frontier {
        #[arg(long)]
        task: PathBuf,
        /// sd, sr-grid:R, fm:none, fm:initial[:s,...] or fm:PATH to a memory JSON file.
        #[arg(long)]
        class: String,
        #[arg(long, default_value = "default")]
        mode: AggregationMode,
    },
    /// Samples seeded episodes.
    Simulate {
        #[arg(long)]
        task: PathBuf,
        #[arg(long)]
        policy: PathBuf,
        #[arg(long, default_value_t = 1)]
        episodes: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Print every step and activation instead of per-episode counts.
        #[arg(long)]
        trace: bool,
    },
    /// Builds a micro-objective task from an MDP document.
    Reduce {
        #[arg(long, value_enum)]
        mode: ReduceMode,
        #[arg(long)]
        mdp: PathBuf,
        /// Target policy document (generality).
        #[arg(long, required_if_eq("mode", "generality"))]
        target: Option<PathBuf>,
        /// Reward document (expansion).
        #[arg(long, required_if_eq("mode", "expansion"))]
        reward: Option<PathBuf>,
        /// Where to write the task document.
        #[arg(long)]
        out: PathBuf,
        /// Where to write the expansion weights (JSON array).
        #[arg(long, required_if_eq("mode", "expansion"))]
        weights: Option<PathBuf>,
    },
    /// Checks reflexivity, transitivity and antisymmetry of the task's order on random vectors.
    CheckOrder {
        #[arg(long)]
        task: PathBuf,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Prints a built-in task, or runs its expected-results check.
    Gallery {
        /// One of investment, taxi, maze, fork, two_starts, combined; omit to list them.
        name: Option<String>,
        #[arg(long)]
        run: bool,
    },
}

enum Failure {
    Check(String),
    Input(String),
}

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Input(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Input(format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Outcome {
    fs::write(path, text).map_err(|e| Failure::Input(format!("cannot write {}: {e}", path.display())))
}

fn task_from(path: &Path) -> Result<EpisodicTask, Failure> {
    load_task(&read(path)?).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn policy_from(path: &Path, task: &EpisodicTask) -> Result<Policy, Failure> {
    load_policy(&read(path)?, task).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn parse_class(spec: &str) -> Result<PolicyClass, Failure> {
    match spec.parse::<PolicyClass>() {
        Ok(c) => Ok(c),
        Err(e) => {
            let path = spec.strip_prefix("fm:").map(Path::new).filter(|p| p.is_file());
            let Some(path) = path else {
                return Err(e.into());
            };
            let memory: MemorySpec =
                serde_json::from_str(&read(path)?).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
            Ok(PolicyClass::FmDet {
                memory,
                decision_states: None,
            })
        }
    }
}

fn eval(task: &Path, policy: &Path, method: Method, episodes: u64, seed: u64, mode: AggregationMode) -> Outcome {
    let task = task_from(task)?;
    let policy = policy_from(policy, &task)?;
    let ev = Evaluator::new(&task)?;
    let names: Vec<&str> = task.objectives.iter().map(|o| o.name.as_str()).collect();
    let report = match method {
        Method::Exact => {
            let (values, outcomes) = ev.exact(&policy, mode)?;
            let objectives: Vec<_> = names
                .iter()
                .enumerate()
                .map(|(i, name)| {
                    let dist: Vec<_> = outcomes.per_objective[i]
                        .iter()
                        .map(|(&(s, a), &p)| json!({"successes": s, "activations": a, "probability": p}))
                        .collect();
                    json!({"name": name, "value": values[i], "outcomes": dist})
                })
                .collect();
            json!({"method": "exact", "mode": mode.label(), "policy": policy.describe(&task.mdp), "objectives": objectives})
        }
        Method::Mc => {
            let est = ev.monte_carlo(&policy, episodes, seed, mode)?;
            let objectives: Vec<_> = names
                .iter()
                .enumerate()
                .map(|(i, name)| json!({"name": name, "value": est.values[i], "standard_error": est.standard_errors[i]}))
                .collect();
            json!({
                "method": "mc",
                "mode": mode.label(),
                "policy": policy.describe(&task.mdp),
                "episodes": episodes,
                "seed": seed,
                "objectives": objectives,
            })
        }
    };
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn run_simulate(task: &Path, policy: &Path, episodes: u64, seed: u64, trace: bool) -> Outcome {
    let task = task_from(task)?;
    let policy = policy_from(policy, &task)?;
    for (i, t) in simulate(&task, &policy, episodes, seed)?.iter().enumerate() {
        if trace {
            print!("{}", t.dump(&task));
        } else {
            let counts: Vec<String> = (0..task.objectives.len())
                .map(|o| {
                    let (s, a) = t.counts(o);
                    format!("{}={s}/{a}", task.objectives[o].name)
                })
                .collect();
            println!("episode {i} steps {} {}", t.steps.len(), counts.join(" "));
        }
    }
    Ok(())
}

fn reduce(
    mode: ReduceMode,
    mdp: &Path,
    target: Option<&Path>,
    reward: Option<&Path>,
    out: &Path,
    weights: Option<&Path>,
) -> Outcome {
    let base = load_mdp(&read(mdp)?).map_err(|e| Failure::Input(format!("{}: {e}", mdp.display())))?;
    match mode {
        ReduceMode::Generality => {
            let target = target.ok_or_else(|| Failure::Input("--target is required".into()))?;
            let shell = EpisodicTask {
                mdp: base.mdp.clone(),
                terminal: base.terminal.clone(),
                horizon: base.horizon,
                objectives: vec![],
                order: PartialOrderSpec::Pareto,
            };
            let Policy::Stationary(p) = policy_from(target, &shell)? else {
                return Err(Failure::Input("the generality target must be a stationary policy".into()));
            };
            let task = generality_reduction(&base, &p)?;
            write(out, &save_task(&task))?;
            eprintln!("wrote {} objectives to {}", task.objectives.len(), out.display());
        }
        ReduceMode::Expansion => {
            let reward = reward.ok_or_else(|| Failure::Input("--reward is required".into()))?;
            let weights = weights.ok_or_else(|| Failure::Input("--weights is required".into()))?;
            let doc: RewardDocument = serde_json::from_str(&read(reward)?)
                .map_err(|e| Failure::Input(format!("{}: {e}", reward.display())))?;
            let spec = doc.resolve(&base.mdp)?;
            let exp = expansion_reduction(&base, &spec)?;
            write(out, &save_task(&exp.task))?;
            write(weights, &format!("{}\n", serde_json::to_string(&exp.weights)?))?;
            eprintln!("wrote {} objectives to {}", exp.weights.len(), out.display());
        }
    }
    Ok(())
}

fn check_order(task: &Path, samples: usize, seed: u64) -> Outcome {
    let task = task_from(task)?;
    let k = task.objectives.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Values on a coarse grid so that ties and comparable pairs actually occur.
    let vectors: Vec<Vec<f64>> = (0..samples)
        .map(|_| (0..k).map(|_| f64::from(rng.random_range(0..=4u8)) / 4.0).collect())
        .collect();
    let report = check_order_axioms(&task.order, &vectors)?;
    print!("order: {}\n{}", task.order.label(), report.render());
    if report.is_preorder() {
        Ok(())
    } else {
        Err(Failure::Check("order is not a preorder".into()))
    }
}

fn run_gallery(name: Option<&str>, run: bool) -> Outcome {
    let Some(name) = name else {
        for n in gallery::NAMES {
            println!("{n}");
        }
        return Ok(());
    };
    if !run {
        print!("{}", save_task(&gallery::fixture(name)?.task));
        return Ok(());
    }
    let claims = gallery::run_fixture(name)?;
    let failed = claims.iter().filter(|c| !c.passed).count();
    for c in &claims {
        let status = if c.passed { "PASS" } else { "FAIL" };
        if c.detail.is_empty() {
            println!("{status} {}", c.claim);
        } else {
            println!("{status} {} ({})", c.claim, c.detail);
        }
    }
    if failed == 0 {
        Ok(())
    } else {
        Err(Failure::Check(format!("{failed} of {} claims failed", claims.len())))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Eval {
            task,
            policy,
            method,
            episodes,
            seed,
            mode,
        } => eval(task, policy, *method, *episodes, *seed, *mode),
        Command::Frontier { task, class, mode } => (|| {
            let task = task_from(task)?;
            let class = parse_class(class)?;
            print!("{}", frontier(&task, &class, *mode)?.to_csv());
            Ok(())
        })(),
        Command::Simulate {
            task,
            policy,
            episodes,
            seed,
            trace,
        } => run_simulate(task, policy, *episodes, *seed, *trace),
        Command::Reduce {
            mode,
            mdp,
            target,
            reward,
            out,
            weights,
        } => reduce(*mode, mdp, target.as_deref(), reward.as_deref(), out, weights.as_deref()),
        Command::CheckOrder { task, samples, seed } => check_order(task, *samples, *seed),
        Command::Gallery { name, run } => run_gallery(name.as_deref(), *run),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check(msg)) => {
            eprintln!("check failed: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
