//! Set cover reduced to equal-cost classification.
//!
//! For a universe `S` and family `F` of `n` subsets, the reduced problem has
//! one row per element (its membership pattern over `F`) plus an all-zero row
//! `m`. Row `m` carries prior `n/(n+1)`, every other row `1/((m-1)(n+1))`, and
//! every column costs 1. A cover of size at most `k` exists exactly when an
//! optimal tree inspects at most `k` distinct columns on row `m`'s path; those
//! columns index a cover.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exact::{ExactError, ExactSolver};
use crate::model::Problem;
use crate::tree::path_columns;

/// Size guard for [`brute_force_cover`].
pub const MAX_BRUTE_FORCE_SUBSETS: usize = 20;

/// Label of the all-zero row.
pub const ZERO_ROW_LABEL: &str = "none";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReductionError {
    #[error("set cover instance has no subsets")]
    NoSubsets,
    #[error("universe lists element {0} twice")]
    DuplicateElement(i64),
    #[error("subset {subset} contains {element}, which is not in the universe")]
    UnknownElement { subset: usize, element: i64 },
    #[error("reduction degenerate: {0}")]
    Degenerate(String),
    #[error("brute force supports at most {MAX_BRUTE_FORCE_SUBSETS} subsets, got {0}")]
    TooManySubsets(usize),
    #[error(transparent)]
    Exact(#[from] ExactError),
}

/// `{"universe":[...],"subsets":[[...],...],"k":int}`
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetCoverInstance {
    pub universe: Vec<i64>,
    pub subsets: Vec<Vec<i64>>,
    pub k: usize,
}

impl SetCoverInstance {
    fn check(&self) -> Result<(), ReductionError> {
        if self.subsets.is_empty() {
            return Err(ReductionError::NoSubsets);
        }
        let mut seen = BTreeSet::new();
        for &e in &self.universe {
            if !seen.insert(e) {
                return Err(ReductionError::DuplicateElement(e));
            }
        }
        for (subset, members) in self.subsets.iter().enumerate() {
            if let Some(&element) = members.iter().find(|e| !seen.contains(e)) {
                return Err(ReductionError::UnknownElement { subset, element });
            }
        }
        Ok(())
    }

    /// Elements that no subset contains.
    pub fn uncovered(&self) -> Vec<i64> {
        self.universe
            .iter()
            .copied()
            .filter(|e| !self.subsets.iter().any(|s| s.contains(e)))
            .collect()
    }

    /// Whether the subsets at `indices` (0-based) cover the universe.
    pub fn is_cover(&self, indices: &[usize]) -> bool {
        self.universe
            .iter()
            .all(|e| indices.iter().any(|&j| self.subsets[j].contains(e)))
    }
}

/// Builds the classification problem for `instance`. Elements with identical
/// membership patterns (or in no subset, which collides with the zero row)
/// make the rows non-distinct and are rejected.
pub fn reduce(instance: &SetCoverInstance) -> Result<Problem, ReductionError> {
    instance.check()?;
    let n = instance.subsets.len();
    let elements = instance.universe.len();
    let mut rows: Vec<Vec<bool>> = instance
        .universe
        .iter()
        .map(|e| instance.subsets.iter().map(|s| s.contains(e)).collect())
        .collect();
    rows.push(vec![false; n]);
    for i in 0..rows.len() {
        for k in (i + 1)..rows.len() {
            if rows[i] == rows[k] {
                let who = |r: usize| {
                    instance
                        .universe
                        .get(r)
                        .map_or_else(|| "the all-zero row".to_string(), |e| format!("element {e}"))
                };
                return Err(ReductionError::Degenerate(format!(
                    "{} and {} have the same membership pattern",
                    who(i),
                    who(k)
                )));
            }
        }
    }
    let priors = if elements == 0 {
        vec![1.0]
    } else {
        let m = (elements + 1) as f64;
        let nf = n as f64;
        let mut p = vec![1.0 / ((m - 1.0) * (nf + 1.0)); elements];
        p.push(nf / (nf + 1.0));
        p
    };
    let mut labels: Vec<String> = instance.universe.iter().map(|e| format!("e{e}")).collect();
    labels.push(ZERO_ROW_LABEL.to_string());
    Problem::new(labels, rows, priors, vec![1.0; n])
        .map_err(|e| ReductionError::Degenerate(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverDecision {
    pub yes: bool,
    /// Distinct columns (0-based subset indices) on the zero row's path in
    /// the optimal tree; empty when the instance is trivially infeasible.
    pub e_m: Vec<usize>,
    /// The cover when the answer is yes (equals `e_m`).
    pub witness: Option<Vec<usize>>,
    /// Optimal expected cost of the reduced problem, when it was solved.
    pub optimal_cost: Option<f64>,
}

/// Decides "is there a cover of size at most k" by solving the reduced
/// problem exactly. Among cost-optimal trees the solver prefers the one with
/// the shortest path to the zero row.
pub fn decide_cover(instance: &SetCoverInstance) -> Result<CoverDecision, ReductionError> {
    instance.check()?;
    if !instance.uncovered().is_empty() {
        return Ok(CoverDecision {
            yes: false,
            e_m: Vec::new(),
            witness: None,
            optimal_cost: None,
        });
    }
    let problem = reduce(instance)?;
    let zero_row = problem.num_rows() - 1;
    let sol = ExactSolver::with_target_row(&problem, zero_row)?.solve();
    let e_m: Vec<usize> = path_columns(&sol.tree, &problem, zero_row)
        .expect("optimal tree is valid")
        .into_iter()
        .collect();
    let yes = e_m.len() <= instance.k;
    assert!(
        instance.is_cover(&e_m),
        "columns on the zero row's path must cover the universe"
    );
    Ok(CoverDecision {
        yes,
        witness: yes.then(|| e_m.clone()),
        e_m,
        optimal_cost: Some(sol.cost),
    })
}

/// Bounds `(p_m·|E_m|, p_m·|E_m| + (1−p_m)·n)` that the optimal cost of a
/// reduced instance with `n` subsets must lie in (strictly above the lower
/// one, at most the upper one) when the universe is non-empty.
pub fn cost_bounds(n: usize, e_m: usize) -> (f64, f64) {
    let nf = n as f64;
    let pm = nf / (nf + 1.0);
    let lo = pm * e_m as f64;
    (lo, lo + (1.0 - pm) * nf)
}

/// Smallest number of subsets covering the universe by exhaustive search;
/// `None` when no cover exists.
pub fn brute_force_cover(instance: &SetCoverInstance) -> Result<Option<usize>, ReductionError> {
    let n = instance.subsets.len();
    if n > MAX_BRUTE_FORCE_SUBSETS {
        return Err(ReductionError::TooManySubsets(n));
    }
    let elements: Vec<i64> = instance.universe.clone();
    let masks: Vec<u32> = instance
        .subsets
        .iter()
        .map(|s| {
            elements
                .iter()
                .enumerate()
                .filter(|(_, e)| s.contains(e))
                .fold(0u32, |m, (i, _)| m | 1 << i)
        })
        .collect();
    // Elements beyond 32 are not representable; the guard on subsets keeps
    // instances small but the universe needs its own check.
    assert!(elements.len() <= 32, "brute force supports at most 32 elements");
    let full: u64 = (1u64 << elements.len()) - 1;
    let mut best: Option<usize> = None;
    for choice in 0u32..(1u32 << n) {
        let size = choice.count_ones() as usize;
        if best.is_some_and(|b| size >= b) {
            continue;
        }
        let covered = (0..n)
            .filter(|j| choice >> j & 1 == 1)
            .fold(0u64, |acc, j| acc | masks[j] as u64);
        if covered == full {
            best = Some(size);
        }
    }
    Ok(best)
}
