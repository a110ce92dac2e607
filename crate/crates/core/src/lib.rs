//! Minimum expected-cost sequential classification.
//!
//! A problem is a binary pattern matrix (one distinct row per class), prior
//! class probabilities and per-column inspection costs. Solvers produce
//! classification trees that decide which column to inspect next:
//!
//! * [`exact`] – optimal trees by dynamic programming over survivor sets;
//! * [`heuristics`] – entropy-per-cost, signature (guess-and-verify) and
//!   their hybrid;
//! * [`generator`] and [`bench`] – stratified random instances and the
//!   heuristic-vs-optimum error grid;
//! * [`reduction`] – set cover to equal-cost classification;
//! * [`consult`] – a live questioning session driven by any method.

pub mod bench;
pub mod consult;
pub mod exact;
pub mod generator;
pub mod heuristics;
pub mod methods;
pub mod model;
pub mod reduction;
pub mod tree;

pub use exact::{solve_dp, ExactError, ExactSolution, ExactSolver};
pub use heuristics::{EntropyRule, HeuristicConfig};
pub use methods::Method;
pub use model::{Problem, ProblemError, ProblemFile, SurvivorSet, ValidationReport};
pub use tree::{expected_cost, verify, ClassTree};
