//! Partial orders over value vectors, dominance and maximal elements.
//!
//! Every scalar comparison uses [`VALUE_TOLERANCE`]: `a ≤ b` iff `a ≤ b + tol`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluate::{Evaluator, ValueVector};
use crate::objective::AggregationMode;
use crate::policy::{Policy, PolicyClass};
use crate::task::EpisodicTask;
use crate::VALUE_TOLERANCE;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PriorityLevel {
    Single(usize),
    Group(Vec<usize>),
}

impl PriorityLevel {
    fn indices(&self) -> &[usize] {
        match self {
            PriorityLevel::Single(i) => std::slice::from_ref(i),
            PriorityLevel::Group(g) => g,
        }
    }
}

/// A bound on one component. `max` requires `v < max`, `min` requires `v > min`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Guard {
    pub index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
}

impl Guard {
    pub fn max(index: usize, bound: f64) -> Self {
        Guard {
            index,
            max: Some(bound),
            min: None,
        }
    }

    fn satisfied(&self, v: &[f64]) -> bool {
        let x = v[self.index];
        self.max.is_none_or(|m| x + VALUE_TOLERANCE < m) && self.min.is_none_or(|m| x > m + VALUE_TOLERANCE)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum PartialOrderSpec {
    /// Componentwise `≤`.
    Pareto,
    /// Levels compared in priority order; the first level where the vectors
    /// differ decides, by componentwise `≤` within that level.
    #[serde(rename = "lex")]
    Lexicographic { priority: Vec<PriorityLevel> },
    /// Scalarization by a weighted sum; a total preorder.
    Weighted { weights: Vec<f64> },
    /// Vectors violating any guard sit below every vector satisfying all of
    /// them; otherwise the fallback order decides.
    Threshold {
        guards: Vec<Guard>,
        fallback: Box<PartialOrderSpec>,
    },
    /// Componentwise `≤` on the products of each index group.
    Product { groups: Vec<Vec<usize>> },
}

fn le(a: f64, b: f64) -> bool {
    a <= b + VALUE_TOLERANCE
}

fn approx_eq(a: f64, b: f64) -> bool {
    (a - b).abs() <= VALUE_TOLERANCE
}

impl PartialOrderSpec {
    /// Constraint violations for vectors of length `k`.
    pub fn problems(&self, k: usize) -> Vec<String> {
        let mut out = Vec::new();
        let check_index = |i: usize, out: &mut Vec<String>| {
            if i >= k {
                out.push(format!("index {i} out of range for {k} objectives"));
            }
        };
        match self {
            PartialOrderSpec::Pareto => {}
            PartialOrderSpec::Lexicographic { priority } => {
                if priority.is_empty() {
                    out.push("lexicographic order needs at least one level".into());
                }
                for level in priority {
                    if level.indices().is_empty() {
                        out.push("empty lexicographic level".into());
                    }
                    for &i in level.indices() {
                        check_index(i, &mut out);
                    }
                }
            }
            PartialOrderSpec::Weighted { weights } => {
                if weights.len() != k {
                    out.push(format!("{} weights for {k} objectives", weights.len()));
                }
                if weights.iter().any(|w| !w.is_finite()) {
                    out.push("weights must be finite".into());
                }
            }
            PartialOrderSpec::Threshold { guards, fallback } => {
                let mut seen = std::collections::BTreeSet::new();
                for g in guards {
                    check_index(g.index, &mut out);
                    if !seen.insert(g.index) {
                        out.push(format!("two guards on index {}", g.index));
                    }
                    if g.max.is_none() && g.min.is_none() {
                        out.push(format!("guard on index {} has no bound", g.index));
                    }
                    if g.max.iter().chain(&g.min).any(|b| !b.is_finite()) {
                        out.push(format!("guard on index {} has a non-finite bound", g.index));
                    }
                }
                out.extend(fallback.problems(k));
            }
            PartialOrderSpec::Product { groups } => {
                if groups.is_empty() {
                    out.push("product order needs at least one group".into());
                }
                for g in groups {
                    if g.is_empty() {
                        out.push("empty product group".into());
                    }
                    for &i in g {
                        check_index(i, &mut out);
                    }
                }
            }
        }
        out
    }

    pub fn label(&self) -> &'static str {
        match self {
            PartialOrderSpec::Pareto => "pareto",
            PartialOrderSpec::Lexicographic { .. } => "lex",
            PartialOrderSpec::Weighted { .. } => "weighted",
            PartialOrderSpec::Threshold { .. } => "threshold",
            PartialOrderSpec::Product { .. } => "product",
        }
    }

    fn leq_unchecked(&self, u: &[f64], v: &[f64]) -> bool {
        match self {
            PartialOrderSpec::Pareto => u.iter().zip(v).all(|(a, b)| le(*a, *b)),
            PartialOrderSpec::Lexicographic { priority } => {
                for level in priority {
                    let idx = level.indices();
                    if idx.iter().all(|&i| approx_eq(u[i], v[i])) {
                        continue;
                    }
                    return idx.iter().all(|&i| le(u[i], v[i]));
                }
                true
            }
            PartialOrderSpec::Weighted { weights } => le(dot(weights, u), dot(weights, v)),
            PartialOrderSpec::Threshold { guards, fallback } => {
                let ok_u = guards.iter().all(|g| g.satisfied(u));
                let ok_v = guards.iter().all(|g| g.satisfied(v));
                match (ok_u, ok_v) {
                    (false, true) => true,
                    (true, false) => false,
                    _ => fallback.leq_unchecked(u, v),
                }
            }
            PartialOrderSpec::Product { groups } => groups.iter().all(|g| {
                let pu: f64 = g.iter().map(|&i| u[i]).product();
                let pv: f64 = g.iter().map(|&i| v[i]).product();
                le(pu, pv)
            }),
        }
    }
}

fn dot(w: &[f64], v: &[f64]) -> f64 {
    w.iter().zip(v).map(|(a, b)| a * b).sum()
}

fn check_lengths(order: &PartialOrderSpec, u: &[f64], v: &[f64]) -> Result<()> {
    if u.len() != v.len() {
        return Err(Error::LengthMismatch {
            expected: u.len(),
            found: v.len(),
        });
    }
    if let Some(p) = order.problems(u.len()).into_iter().next() {
        return Err(Error::Parse(format!("order does not fit vectors of length {}: {p}", u.len())));
    }
    Ok(())
}

/// `u ⪯ v`.
pub fn leq(order: &PartialOrderSpec, u: &[f64], v: &[f64]) -> Result<bool> {
    check_lengths(order, u, v)?;
    Ok(order.leq_unchecked(u, v))
}

/// `v ⪯ u` and not `u ⪯ v`: `u` strictly dominates `v`.
pub fn strictly_dominates(order: &PartialOrderSpec, u: &[f64], v: &[f64]) -> Result<bool> {
    check_lengths(order, u, v)?;
    Ok(order.leq_unchecked(v, u) && !order.leq_unchecked(u, v))
}

/// Indices of vectors that no other vector strictly dominates.
pub fn maximal_elements<V: AsRef<[f64]>>(order: &PartialOrderSpec, vectors: &[V]) -> Result<Vec<usize>> {
    let first = vectors.first().ok_or(Error::Empty("maximal elements of an empty set"))?;
    for v in vectors {
        check_lengths(order, first.as_ref(), v.as_ref())?;
    }
    Ok((0..vectors.len())
        .filter(|&i| {
            let vi = vectors[i].as_ref();
            !vectors.iter().any(|w| {
                let w = w.as_ref();
                order.leq_unchecked(vi, w) && !order.leq_unchecked(w, vi)
            })
        })
        .collect())
}

impl AsRef<[f64]> for ValueVector {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct AxiomReport {
    pub vectors: usize,
    pub reflexive: bool,
    pub transitive: bool,
    pub antisymmetric: bool,
    pub reflexivity_failures: Vec<usize>,
    pub transitivity_failures: Vec<(usize, usize, usize)>,
    /// Distinct vectors that are mutually `⪯`.
    pub antisymmetry_violations: Vec<(usize, usize)>,
}

impl AxiomReport {
    pub fn is_preorder(&self) -> bool {
        self.reflexive && self.transitive
    }

    pub fn classification(&self) -> &'static str {
        match (self.is_preorder(), self.antisymmetric) {
            (true, true) => "partial order",
            (true, false) => "preorder only",
            (false, _) => "not a preorder",
        }
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "vectors: {}", self.vectors);
        let _ = writeln!(out, "reflexive: {}", self.reflexive);
        let _ = writeln!(out, "transitive: {}", self.transitive);
        let _ = writeln!(out, "antisymmetric: {}", self.antisymmetric);
        for (i, j) in &self.antisymmetry_violations {
            let _ = writeln!(out, "  mutual leq between distinct vectors {i} and {j}");
        }
        for (i, j, k) in &self.transitivity_failures {
            let _ = writeln!(out, "  transitivity fails on ({i}, {j}, {k})");
        }
        let _ = writeln!(out, "classification: {}", self.classification());
        out
    }
}

/// Checks reflexivity and transitivity on `vectors`; mutual `⪯` between
/// distinct vectors is reported as an antisymmetry violation.
pub fn check_order_axioms<V: AsRef<[f64]>>(order: &PartialOrderSpec, vectors: &[V]) -> Result<AxiomReport> {
    let mut report = AxiomReport {
        vectors: vectors.len(),
        reflexive: true,
        transitive: true,
        antisymmetric: true,
        ..Default::default()
    };
    if let Some(first) = vectors.first() {
        for v in vectors {
            check_lengths(order, first.as_ref(), v.as_ref())?;
        }
    }
    let n = vectors.len();
    let rel: Vec<Vec<bool>> = (0..n)
        .map(|i| (0..n).map(|j| order.leq_unchecked(vectors[i].as_ref(), vectors[j].as_ref())).collect())
        .collect();
    for i in 0..n {
        if !rel[i][i] {
            report.reflexive = false;
            report.reflexivity_failures.push(i);
        }
        for j in 0..n {
            if i < j && rel[i][j] && rel[j][i] {
                let same = vectors[i]
                    .as_ref()
                    .iter()
                    .zip(vectors[j].as_ref())
                    .all(|(a, b)| approx_eq(*a, *b));
                if !same {
                    report.antisymmetric = false;
                    report.antisymmetry_violations.push((i, j));
                }
            }
            if !rel[i][j] {
                continue;
            }
            for k in (0..n).filter(|&k| rel[j][k]) {
                if !rel[i][k] {
                    report.transitive = false;
                    report.transitivity_failures.push((i, j, k));
                }
            }
        }
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrontierEntry {
    pub descriptor: String,
    pub policy: Policy,
    pub values: ValueVector,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrontierResult {
    pub class_label: String,
    pub entries: Vec<FrontierEntry>,
    pub maximal: Vec<bool>,
}

impl FrontierResult {
    pub fn maximal_entries(&self) -> impl Iterator<Item = &FrontierEntry> {
        self.entries.iter().zip(&self.maximal).filter(|(_, m)| **m).map(|(e, _)| e)
    }

    /// CSV with columns `policy_id,v_1..v_k,maximal`.
    pub fn to_csv(&self) -> String {
        let k = self.entries.first().map_or(0, |e| e.values.len());
        let mut out = String::from("policy_id");
        for i in 1..=k {
            let _ = write!(out, ",v_{i}");
        }
        out.push_str(",maximal\n");
        for (e, m) in self.entries.iter().zip(&self.maximal) {
            out.push_str(&csv_field(&e.descriptor));
            for v in &e.values.values {
                let _ = write!(out, ",{v}");
            }
            let _ = writeln!(out, ",{m}");
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Evaluates every policy of `class` exactly and flags maximal elements
/// under the task's own order.
pub fn frontier(task: &EpisodicTask, class: &PolicyClass, mode: AggregationMode) -> Result<FrontierResult> {
    frontier_with_order(task, class, mode, &task.order)
}

pub fn frontier_with_order(
    task: &EpisodicTask,
    class: &PolicyClass,
    mode: AggregationMode,
    order: &PartialOrderSpec,
) -> Result<FrontierResult> {
    let policies = class.policies(task)?;
    frontier_of(task, class.label(), policies, mode, order)
}

/// Frontier over an explicit list of policies.
pub fn frontier_of(
    task: &EpisodicTask,
    class_label: String,
    policies: Vec<Policy>,
    mode: AggregationMode,
    order: &PartialOrderSpec,
) -> Result<FrontierResult> {
    let ev = Evaluator::new(task)?;
    let eval = |p: &Policy| ev.exact(p, mode).map(|(v, _)| v);
    #[cfg(feature = "parallel")]
    let values = {
        use rayon::prelude::*;
        policies.par_iter().map(eval).collect::<Result<Vec<_>>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let values = policies.iter().map(eval).collect::<Result<Vec<_>>>()?;

    let maximal = if values.is_empty() {
        Vec::new()
    } else {
        let idx = maximal_elements(order, &values)?;
        let mut flags = vec![false; values.len()];
        for i in idx {
            flags[i] = true;
        }
        flags
    };
    let entries = policies
        .into_iter()
        .zip(values)
        .map(|(policy, values)| FrontierEntry {
            descriptor: policy.describe(&task.mdp),
            policy,
            values,
        })
        .collect();
    Ok(FrontierResult {
        class_label,
        entries,
        maximal,
    })
}
