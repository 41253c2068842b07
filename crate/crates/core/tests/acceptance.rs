//! End-to-end acceptance checks. Runs as a plain binary so every criterion
//! prints one PASS/FAIL line; exits non-zero if any criterion fails.

mod support;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use microrl_core::gallery::{self, sd_policy};
use microrl_core::order::{self, check_order_axioms, Guard, PartialOrderSpec, PriorityLevel};
use microrl_core::policy::{enumerate_sd, sr_grid, Policy, PolicyClass, StationaryPolicy};
use microrl_core::reductions::{discounted_value, expansion_reduction, generality_reduction, investment_rewards};
use microrl_core::task::EpisodicMdp;
use microrl_core::{evaluate_exact, evaluate_mc, objective, reconstruct_scalar, AggregationMode, EpisodicTask};
use rand::Rng;
use support::{brute_force_discounted, brute_force_values, max_abs_diff};

type Outcome = Result<String, String>;

const DEFAULT: AggregationMode = AggregationMode::EpisodeMeanZeroDefault;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn exact(task: &EpisodicTask, p: impl Into<Policy>) -> Result<Vec<f64>, String> {
    evaluate_exact(task, &p.into(), DEFAULT)
        .map(|(v, _)| v.values)
        .map_err(|e| e.to_string())
}

fn investment() -> EpisodicTask {
    gallery::fixture("investment").unwrap().task
}

fn investment_vectors() -> Result<(Vec<f64>, Vec<f64>), String> {
    let task = investment();
    Ok((
        exact(&task, sd_policy(&task, &[("s0", "a1")]))?,
        exact(&task, sd_policy(&task, &[("s0", "a2")]))?,
    ))
}

fn criterion_1() -> Outcome {
    let (v1, v2) = investment_vectors()?;
    ensure(max_abs_diff(&v1, &[0.9, 0.1, 0.0, 0.0]) <= 1e-12, || format!("a1 gave {v1:?}"))?;
    ensure(max_abs_diff(&v2, &[0.0, 0.0, 0.7, 0.3]) <= 1e-12, || format!("a2 gave {v2:?}"))?;
    Ok(format!("a1 {v1:?}, a2 {v2:?}"))
}

fn criterion_2() -> Outcome {
    let task = investment();
    let base = EpisodicMdp::from(&task);
    let rewards = investment_rewards(&task.mdp).map_err(|e| e.to_string())?;
    let exp = expansion_reduction(&base, &rewards).map_err(|e| e.to_string())?;
    let mut out = Vec::new();
    for a in ["a1", "a2"] {
        let p: Policy = sd_policy(&task, &[("s0", a)]).into();
        let values = exact(&exp.task, p.clone())?;
        let r = reconstruct_scalar(&values, &exp.weights).map_err(|e| e.to_string())?;
        let oracle = brute_force_discounted(&base, &rewards, &p);
        ensure((r - 8.0).abs() <= 1e-10, || format!("{a} reconstructed {r}"))?;
        ensure((oracle - 8.0).abs() <= 1e-10, || format!("{a} episode-sum oracle {oracle}"))?;
        out.push(format!("{a} {r}"));
    }
    let (v1, v2) = investment_vectors()?;
    let w = gallery::investment_weighted_order();
    let both = order::leq(&w, &v1, &v2).unwrap() && order::leq(&w, &v2, &v1).unwrap();
    ensure(both, || "weighted order does not relate the plans both ways".into())?;
    Ok(format!("{}; mutually leq under weights [10, -10, 20, -20]", out.join(", ")))
}

fn criterion_3() -> Outcome {
    let (v1, v2) = investment_vectors()?;
    let set = [&v1[..], &v2[..]];
    let at = |eps: f64| order::maximal_elements(&gallery::investment_threshold_order(eps), &set).unwrap();
    ensure(at(0.15) == vec![0], || format!("eps 0.15 selected {:?}", at(0.15)))?;
    for i in 1..=300 {
        let eps = f64::from(i) / 1000.0;
        ensure(at(eps) == vec![0], || format!("eps {eps} selected {:?}", at(eps)))?;
    }
    // Once both plans satisfy the guard the weighted fallback ties them.
    ensure(at(0.31) == vec![0, 1], || format!("eps 0.31 selected {:?}", at(0.31)))?;
    Ok("only a1 for eps = 0.15 and every eps in 0.001..=0.300 (step 0.001)".into())
}

fn criterion_4() -> Outcome {
    let task = gallery::fixture("fork").unwrap().task;
    let uniform: Policy = StationaryPolicy::uniform(&task).into();
    let u = exact(&task, uniform.clone())?;
    let oracle = brute_force_values(&task, &uniform, DEFAULT);
    ensure(max_abs_diff(&u, &[0.5, 0.5]) <= 1e-12, || format!("uniform gave {u:?}"))?;
    ensure(max_abs_diff(&u, &oracle) <= 1e-12, || format!("episode oracle gave {oracle:?}"))?;
    let sd: Vec<Vec<f64>> = enumerate_sd(&task).unwrap().map(|p| exact(&task, p)).collect::<Result<_, _>>()?;
    ensure(sd == vec![vec![1.0, 0.0], vec![0.0, 1.0]], || format!("SD vectors {sd:?}"))?;
    for v in &sd {
        ensure(order::strictly_dominates(&task.order, &u, v).unwrap(), || format!("uniform does not dominate {v:?}"))?;
    }
    let f = order::frontier(&task, &PolicyClass::SrGrid(2), DEFAULT).map_err(|e| e.to_string())?;
    let maximal: Vec<&str> = f.maximal_entries().map(|e| e.descriptor.as_str()).collect();
    ensure(maximal == ["s0:a1=0.5/a2=0.5"], || format!("SR-grid(2) maximal {maximal:?}"))?;
    Ok(format!("uniform {u:?}; SR-grid(2) maximal {maximal:?}"))
}

fn criterion_5() -> Outcome {
    let task = gallery::fixture("two_starts").unwrap().task;
    let mem: Policy = gallery::two_starts_memory_policy(&task).into();
    let m = exact(&task, mem.clone())?;
    ensure(max_abs_diff(&m, &[0.5, 0.5]) <= 1e-12, || format!("memory policy gave {m:?}"))?;
    let oracle = brute_force_values(&task, &mem, DEFAULT);
    ensure(max_abs_diff(&m, &oracle) <= 1e-12, || format!("episode oracle gave {oracle:?}"))?;
    let s0 = task.mdp.state("s0").unwrap();
    let mut n = 0;
    for p in sr_grid(&task, 10).unwrap() {
        let q = p.rule[s0.0].as_ref().unwrap()[0];
        let v = exact(&task, p)?;
        ensure(max_abs_diff(&v, &[0.5 * (1.0 - q), 0.5 * q]) <= 1e-12, || format!("P(a1)={q} gave {v:?}"))?;
        ensure(order::strictly_dominates(&task.order, &m, &v).unwrap(), || format!("{v:?} not dominated"))?;
        n += 1;
    }
    Ok(format!("memory policy {m:?} strictly dominates all {n} SR-grid(10) policies"))
}

fn criterion_6() -> Outcome {
    let mut checked = 0;
    for seed in 0..10 {
        let mut rng = support::rng(600 + seed);
        let base = support::random_mdp(&mut rng, 4, 3, 5);
        let target = support::random_stationary(&mut rng, &base, true);
        let task = generality_reduction(&base, &target).map_err(|e| e.to_string())?;
        let tv = exact(&task, target.clone())?;
        let oracle = brute_force_values(&task, &target.clone().into(), DEFAULT);
        ensure(max_abs_diff(&tv, &oracle) <= 1e-10, || format!("seed {seed}: target {tv:?} vs oracle {oracle:?}"))?;
        for p in enumerate_sd(&task).unwrap() {
            let v = exact(&task, p.clone())?;
            ensure(!order::strictly_dominates(&PartialOrderSpec::Pareto, &v, &tv).unwrap(), || {
                format!("seed {seed}: {v:?} dominates target {tv:?}")
            })?;
            checked += 1;
        }
    }
    Ok(format!("10 random MDPs, {checked} SD policies compared against their targets"))
}

fn criterion_7() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for seed in 0..10 {
        let mut rng = support::rng(600 + seed);
        let mut base = support::random_mdp(&mut rng, 4, 3, 5);
        base.horizon = 6;
        let rewards = support::random_rewards(&mut rng, &base, 0.9);
        let exp = expansion_reduction(&base, &rewards).map_err(|e| e.to_string())?;
        for kind in 0..4 {
            let policy = support::random_policy(&mut rng, &base, kind);
            let direct = discounted_value(&base, &rewards, &policy).map_err(|e| e.to_string())?;
            let values = exact(&exp.task, policy.clone())?;
            let reconstructed = reconstruct_scalar(&values, &exp.weights).unwrap();
            let summed = brute_force_discounted(&base, &rewards, &policy);
            let diff = (direct - reconstructed).abs().max((summed - reconstructed).abs());
            ensure(diff <= 1e-9, || {
                format!("seed {seed} policy kind {kind}: direct {direct}, episodes {summed}, expansion {reconstructed}")
            })?;
            worst = worst.max(diff);
            count += 1;
        }
    }
    Ok(format!("{count} policies (SD, SR, FM-det, FM-random); worst difference {worst:.1e}"))
}

fn criterion_8() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut comparisons = 0;
    let mut informative = 0;
    for seed in 0..120 {
        let task = support::random_task(800 + seed, 5, 4);
        let base = EpisodicMdp::from(&task);
        let mut rng = support::rng(900 + seed);
        for kind in 0..4 {
            let policy = support::random_policy(&mut rng, &base, kind);
            for mode in AggregationMode::ALL {
                let (v, _) = evaluate_exact(&task, &policy, mode).map_err(|e| e.to_string())?;
                let oracle = brute_force_values(&task, &policy, mode);
                let d = max_abs_diff(&v, &oracle);
                ensure(d <= 1e-10, || format!("seed {seed} kind {kind} {mode}: {:?} vs {oracle:?}", v.values))?;
                worst = worst.max(d);
                comparisons += 1;
                informative += usize::from(oracle.iter().any(|&x| x > 0.0 && x < 1.0));
            }
        }
    }
    ensure(informative * 4 >= comparisons, || format!("only {informative} of {comparisons} evaluations were non-degenerate"))?;
    Ok(format!(
        "{comparisons} evaluations on 120 random tasks ({informative} with a fractional component); worst difference {worst:.1e}"
    ))
}

fn criterion_9() -> Outcome {
    const EPISODES: u64 = 100_000;
    let fork = gallery::fixture("fork").unwrap().task;
    let two_starts = gallery::fixture("two_starts").unwrap().task;
    let inv = investment();
    let cases: Vec<(&str, &EpisodicTask, Policy, u64)> = vec![
        ("fork uniform", &fork, StationaryPolicy::uniform(&fork).into(), 9001),
        ("two_starts memory", &two_starts, gallery::two_starts_memory_policy(&two_starts).into(), 9002),
        ("two_starts uniform", &two_starts, StationaryPolicy::uniform(&two_starts).into(), 9003),
        ("investment a1", &inv, sd_policy(&inv, &[("s0", "a1")]).into(), 9004),
        ("investment a2", &inv, sd_policy(&inv, &[("s0", "a2")]).into(), 9005),
    ];
    let mut worst: f64 = 0.0;
    for (name, task, policy, seed) in &cases {
        let est = evaluate_mc(task, policy, EPISODES, *seed, DEFAULT).map_err(|e| e.to_string())?;
        let (v, _) = evaluate_exact(task, policy, DEFAULT).map_err(|e| e.to_string())?;
        for i in 0..v.len() {
            let (m, se) = (est.values[i], est.standard_errors[i]);
            let dev = (m - v[i]).abs();
            ensure(dev <= 4.0 * se || (se == 0.0 && dev == 0.0), || {
                format!("{name} seed {seed} component {i}: {m} vs {} (se {se})", v[i])
            })?;
            if se > 0.0 {
                worst = worst.max(dev / se);
            }
        }
    }
    Ok(format!("5 cases x 1e5 episodes, seeds 9001..=9005; largest deviation {worst:.2} se"))
}

fn criterion_10() -> Outcome {
    let orders = [
        PartialOrderSpec::Pareto,
        PartialOrderSpec::Lexicographic {
            priority: vec![PriorityLevel::Single(2), PriorityLevel::Group(vec![0, 1]), PriorityLevel::Single(3)],
        },
        PartialOrderSpec::Weighted {
            weights: vec![1.0, -2.0, 0.5, 3.0],
        },
        PartialOrderSpec::Threshold {
            guards: vec![Guard::max(3, 0.5)],
            fallback: Box::new(PartialOrderSpec::Pareto),
        },
        PartialOrderSpec::Product {
            groups: vec![vec![0, 1], vec![2, 3]],
        },
    ];
    let mut rng = support::rng(1010);
    for o in &orders {
        for trial in 0..100 {
            // Coarse grid values so that ties and comparable pairs occur.
            let triple: Vec<Vec<f64>> = (0..3)
                .map(|_| (0..4).map(|_| f64::from(rng.random_range(0..=4u8)) / 4.0).collect())
                .collect();
            let r = check_order_axioms(o, &triple).map_err(|e| e.to_string())?;
            ensure(r.reflexive && r.transitive, || format!("{} trial {trial}: {}", o.label(), r.render()))?;
        }
    }
    let (v1, v2) = investment_vectors()?;
    let r = check_order_axioms(&gallery::investment_weighted_order(), &[v1, v2]).unwrap();
    ensure(r.classification() == "preorder only", || r.render())?;
    Ok("5 order types x 100 triples reflexive and transitive; weighted investment order: preorder only".into())
}

fn criterion_11() -> Outcome {
    let task = gallery::lifecycle_task();
    let compiled = objective::CompiledTask::new(&task).map_err(|e| e.to_string())?;
    let id = |s: &str| task.mdp.state(s).unwrap();
    let go = task.mdp.action("go").unwrap();
    let script = [id("s1"), id("s0"), id("s1"), id("s0"), id("s2")];
    let steps: Vec<_> = script.iter().map(|&s| (go, s)).collect();
    let trace = objective::replay(&compiled, id("s0"), &steps).map_err(|e| e.to_string())?;
    let returns: Vec<bool> = trace.activations[0].iter().map(|r| r.success).collect();
    ensure(returns == [false, false, true], || format!("returns {returns:?}"))?;
    let value = objective::episode_value_contribution(&trace, 0, DEFAULT);
    ensure(value == objective::Contribution::Value(1.0 / 3.0), || format!("value {value:?}"))?;
    let h = support::History {
        start: 0,
        steps: script.iter().map(|s| (go.0, s.0)).collect(),
    };
    let oracle = support::lifecycle(&task, &h);
    ensure(oracle == [(1, 3)], || format!("oracle counts {oracle:?}"))?;
    Ok("returns (0, 0, 1), episode value 1/3".into())
}

type Criterion = (&'static str, fn() -> Outcome, Option<Duration>);

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("investment event probabilities", criterion_1, Some(Duration::from_secs(1))),
        ("investment expected return via expansion", criterion_2, None),
        ("threshold order selects a1", criterion_3, None),
        ("stationary random beats deterministic (fork)", criterion_4, Some(Duration::from_secs(1))),
        ("initial-state memory beats stationary (two_starts)", criterion_5, Some(Duration::from_secs(5))),
        ("generality reduction keeps the target maximal", criterion_6, Some(Duration::from_secs(30))),
        ("expansion matches discounted return", criterion_7, Some(Duration::from_secs(60))),
        ("exact evaluation matches episode enumeration", criterion_8, None),
        ("Monte Carlo within 4 standard errors", criterion_9, None),
        ("order axioms", criterion_10, None),
        ("three activations give 1/3", criterion_11, None),
    ];
    let mut failed = 0;
    for (i, (name, run, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let outcome = match (outcome, budget) {
            (Ok(_), Some(b)) if elapsed > *b => Err(format!("took {elapsed:.2?}, budget {b:?}")),
            (o, _) => o,
        };
        let (status, detail) = match &outcome {
            Ok(d) => ("PASS", d.as_str()),
            Err(d) => ("FAIL", d.as_str()),
        };
        println!("{status} criterion {:>2}: {name} [{elapsed:.2?}] {detail}", i + 1);
        failed += usize::from(outcome.is_err());
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
