//! Solver selection by name, shared by the CLI, the benchmark and the
//! consultation service.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::exact::{ExactError, ExactSolver};
use crate::heuristics::{
    build_entropy_tree, build_hybrid_tree, build_signature_tree, entropy_pick, signature_pick,
    HeuristicConfig, HybridSolver,
};
use crate::model::{Problem, SurvivorSet};
use crate::tree::{expected_cost, ClassTree};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Dp,
    Entropy,
    Signature,
    Hybrid,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Dp, Method::Entropy, Method::Signature, Method::Hybrid];

    pub fn name(self) -> &'static str {
        match self {
            Method::Dp => "dp",
            Method::Entropy => "entropy",
            Method::Signature => "signature",
            Method::Hybrid => "hybrid",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown method {s:?} (expected dp, entropy, signature or hybrid)"))
    }
}

#[derive(Debug, Clone)]
pub struct Solved {
    pub tree: ClassTree,
    pub cost: f64,
}

pub fn build_tree(
    problem: &Problem,
    method: Method,
    config: HeuristicConfig,
) -> Result<ClassTree, ExactError> {
    Ok(match method {
        Method::Dp => ExactSolver::new(problem)?.solve().tree,
        Method::Entropy => build_entropy_tree(problem, config.entropy_rule),
        Method::Signature => build_signature_tree(problem),
        Method::Hybrid => build_hybrid_tree(problem, config),
    })
}

/// Builds the tree and evaluates it. For `dp` the reported cost is the
/// optimal value from the recursion.
pub fn solve(problem: &Problem, method: Method, config: HeuristicConfig) -> Result<Solved, ExactError> {
    if method == Method::Dp {
        let sol = ExactSolver::new(problem)?.solve();
        return Ok(Solved {
            tree: sol.tree,
            cost: sol.cost,
        });
    }
    let tree = build_tree(problem, method, config)?;
    let cost = expected_cost(&tree, problem).expect("solver trees classify every row");
    Ok(Solved { tree, cost })
}

/// The column `method` would inspect next for `survivors`; `None` once a
/// single row is left. Identical to walking the method's full tree.
pub fn recommend(
    problem: &Problem,
    survivors: &SurvivorSet,
    method: Method,
    config: HeuristicConfig,
) -> Result<Option<usize>, ExactError> {
    if survivors.len() < 2 {
        return Ok(None);
    }
    Ok(match method {
        Method::Dp => ExactSolver::new(problem)?.best_column(survivors),
        Method::Entropy => entropy_pick(problem, survivors, config.entropy_rule).map(|c| c.column),
        Method::Signature => signature_pick(problem, survivors).map(|c| c.column),
        Method::Hybrid => HybridSolver::new(problem, config).best_column(survivors),
    })
}
