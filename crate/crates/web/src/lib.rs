//! Browser bindings for the demo page in `www/`.
//!
//! Each operation has a plain Rust function returning a JSON string (tested
//! natively) and a thin `wasm_bindgen` wrapper that maps errors to JS strings.

use microrl_core::gallery;
use microrl_core::order::{maximal_elements, strictly_dominates};
use microrl_core::policy::{load_policy, Policy, StationaryPolicy};
use microrl_core::{evaluate_exact, load_task, AggregationMode, EpisodicTask};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

fn fixture(name: &str) -> Result<EpisodicTask, String> {
    gallery::fixture(name).map(|f| f.task).map_err(|e| e.to_string())
}

fn values(task: &EpisodicTask, policy: &Policy, mode: AggregationMode) -> Result<Vec<f64>, String> {
    evaluate_exact(task, policy, mode)
        .map(|(v, _)| v.values)
        .map_err(|e| e.to_string())
}

fn probability(p: f64) -> Result<f64, String> {
    if (0.0..=1.0).contains(&p) {
        Ok(p)
    } else {
        Err(format!("probability {p} outside [0, 1]"))
    }
}

/// Two-start task: a stationary policy taking `a1` in `s0` with probability
/// `p`, against the policy that remembers where the episode started.
pub fn memory_vs_stationary(p: f64) -> Result<String, String> {
    let p = probability(p)?;
    let task = fixture("two_starts")?;
    let mut stationary = StationaryPolicy::uniform(&task);
    let s0 = task.mdp.state("s0").map_err(|e| e.to_string())?;
    stationary.rule[s0.0] = Some(vec![p, 1.0 - p]);
    let stationary: Policy = stationary.into();
    let memory: Policy = gallery::two_starts_memory_policy(&task).into();
    let sv = values(&task, &stationary, AggregationMode::default())?;
    let mv = values(&task, &memory, AggregationMode::default())?;
    let dominated = strictly_dominates(&task.order, &mv, &sv).map_err(|e| e.to_string())?;
    Ok(json!({
        "objectives": task.objectives.iter().map(|o| o.name.as_str()).collect::<Vec<_>>(),
        "stationary": sv,
        "memory": mv,
        "memory_strictly_dominates": dominated,
    })
    .to_string())
}

/// Investment task under "loss-20 probability below `epsilon`, then
/// expected return": values of both plans and which are maximal.
pub fn threshold_selection(epsilon: f64) -> Result<String, String> {
    let task = fixture("investment")?;
    let plans = ["a1", "a2"];
    let vectors = plans
        .iter()
        .map(|a| values(&task, &gallery::sd_policy(&task, &[("s0", a)]).into(), AggregationMode::default()))
        .collect::<Result<Vec<_>, _>>()?;
    let order = gallery::investment_threshold_order(epsilon);
    let maximal = maximal_elements(&order, &vectors).map_err(|e| e.to_string())?;
    let expected_return = |v: &[f64]| 10.0 * v[0] - 10.0 * v[1] + 20.0 * v[2] - 20.0 * v[3];
    let rows: Vec<Value> = plans
        .iter()
        .zip(&vectors)
        .enumerate()
        .map(|(i, (a, v))| {
            json!({
                "plan": a,
                "values": v,
                "expected_return": expected_return(v),
                "maximal": maximal.contains(&i),
            })
        })
        .collect();
    Ok(json!({ "epsilon": epsilon, "plans": rows }).to_string())
}

/// Exact values of a policy document on a task document.
pub fn evaluate_documents(task: &str, policy: &str, mode: &str) -> Result<String, String> {
    let task = load_task(task).map_err(|e| format!("task: {e}"))?;
    let policy = load_policy(policy, &task).map_err(|e| format!("policy: {e}"))?;
    let mode: AggregationMode = mode.parse().map_err(|e: microrl_core::Error| e.to_string())?;
    let v = values(&task, &policy, mode)?;
    let objectives: Vec<Value> = task
        .objectives
        .iter()
        .zip(&v)
        .map(|(o, x)| json!({"name": o.name, "value": x}))
        .collect();
    Ok(json!({ "mode": mode.label(), "policy": policy.describe(&task.mdp), "objectives": objectives }).to_string())
}

/// Task document of a built-in example, for pre-filling the editor.
pub fn gallery_document(name: &str) -> Result<String, String> {
    Ok(microrl_core::save_task(&fixture(name)?))
}

#[wasm_bindgen(js_name = memoryVsStationary)]
pub fn memory_vs_stationary_js(p: f64) -> Result<String, JsValue> {
    memory_vs_stationary(p).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = thresholdSelection)]
pub fn threshold_selection_js(epsilon: f64) -> Result<String, JsValue> {
    threshold_selection(epsilon).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = evaluateDocuments)]
pub fn evaluate_documents_js(task: &str, policy: &str, mode: &str) -> Result<String, JsValue> {
    evaluate_documents(task, policy, mode).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = galleryDocument)]
pub fn gallery_document_js(name: &str) -> Result<String, JsValue> {
    gallery_document(name).map_err(|e| JsValue::from_str(&e))
}
