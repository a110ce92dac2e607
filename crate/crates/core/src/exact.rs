//! Exact minimum-expected-cost trees by dynamic programming over survivor
//! sets, plus brute-force enumerators used as test oracles on tiny instances.
//!
//! The recursion runs on unnormalized masses,
//! `U(S) = min_j [P(S) c_j + U(S_j0) + U(S_j1)]` with `U({i}) = 0`, so the
//! optimal expected cost of `S` is `U(S) / P(S)` and no state is ever
//! renormalized. Only columns that split `S` are candidate moves.

use rustc_hash::FxHashMap;
use thiserror::Error;

use crate::model::{Problem, SurvivorSet};
use crate::tree::ClassTree;

/// Largest row count the exact solver accepts (survivor sets are `u32` masks
/// and the memo may hold up to `2^L` states).
pub const MAX_EXACT_ROWS: usize = 24;

/// Size guard for the brute-force oracles.
pub const MAX_ORACLE_DIM: usize = 5;

const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ExactError {
    #[error("exact solver supports at most {max} rows, problem has {rows}")]
    TooLarge { rows: usize, max: usize },
    #[error("brute-force oracle supports at most {max}x{max}, problem is {rows}x{cols}")]
    OracleTooLarge { rows: usize, cols: usize, max: usize },
}

#[derive(Debug, Clone)]
pub struct ExactSolution {
    pub tree: ClassTree,
    /// Minimum expected cost.
    pub cost: f64,
    /// Number of non-singleton survivor sets solved.
    pub states: usize,
}

#[derive(Debug, Clone, Copy)]
struct MemoEntry {
    /// `U(S)`: optimal unnormalized cost.
    cost: f64,
    column: u32,
    /// Distinct columns on the target row's path (0 when untracked).
    target_depth: u32,
}

/// Memo of optimal unnormalized costs and best first columns keyed by
/// survivor mask. Confined to one solver.
#[derive(Debug, Default)]
pub struct MemoTable {
    entries: FxHashMap<u32, MemoEntry>,
}

impl MemoTable {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Reusable exact solver for one problem. Costs are memoized across calls, so
/// asking for the best column of many survivor sets of the same problem is
/// cheap after the first solve.
pub struct ExactSolver<'a> {
    problem: &'a Problem,
    ones: Vec<u32>,
    priors: Vec<f64>,
    /// Row whose path length is minimized among cost-optimal choices.
    target: Option<u32>,
    memo: MemoTable,
}

impl<'a> ExactSolver<'a> {
    pub fn new(problem: &'a Problem) -> Result<Self, ExactError> {
        let rows = problem.num_rows();
        if rows > MAX_EXACT_ROWS {
            return Err(ExactError::TooLarge {
                rows,
                max: MAX_EXACT_ROWS,
            });
        }
        let ones = (0..problem.num_cols())
            .map(|j| {
                (0..rows)
                    .filter(|&i| problem.value(i, j))
                    .fold(0u32, |m, i| m | 1 << i)
            })
            .collect();
        Ok(Self {
            problem,
            ones,
            priors: problem.priors().to_vec(),
            target: None,
            memo: MemoTable::default(),
        })
    }

    /// Among cost-optimal choices (within a relative `1e-12`), prefer the ones
    /// that inspect the fewest distinct columns on `row`'s path.
    pub fn with_target_row(problem: &'a Problem, row: usize) -> Result<Self, ExactError> {
        let mut solver = Self::new(problem)?;
        solver.target = Some(1 << row);
        Ok(solver)
    }

    fn full_mask(&self) -> u32 {
        let rows = self.problem.num_rows();
        if rows == 32 {
            u32::MAX
        } else {
            (1u32 << rows) - 1
        }
    }

    fn mask_of(&self, survivors: &SurvivorSet) -> u32 {
        survivors.iter().fold(0u32, |m, i| m | 1 << i)
    }

    fn mass(&self, mut mask: u32) -> f64 {
        let mut total = 0.0;
        while mask != 0 {
            total += self.priors[mask.trailing_zeros() as usize];
            mask &= mask - 1;
        }
        total
    }

    fn entry(&mut self, mask: u32) -> Option<MemoEntry> {
        if mask.count_ones() <= 1 {
            return None;
        }
        if let Some(e) = self.memo.entries.get(&mask) {
            return Some(*e);
        }
        let mass = self.mass(mask);
        let in_target = self.target.is_some_and(|t| mask & t != 0);
        let mut min_cost = f64::INFINITY;
        let mut chosen: Option<(f64, u32, u32)> = None;
        for j in 0..self.ones.len() {
            let one = mask & self.ones[j];
            let zero = mask & !self.ones[j];
            if one == 0 || zero == 0 {
                continue;
            }
            let e0 = self.entry(zero);
            let e1 = self.entry(one);
            let cost = mass * self.problem.cost(j)
                + e0.map_or(0.0, |e| e.cost)
                + e1.map_or(0.0, |e| e.cost);
            let depth = if in_target {
                let t = self.target.unwrap_or(0);
                let child = if one & t != 0 { e1 } else { e0 };
                1 + child.map_or(0, |e| e.target_depth)
            } else {
                0
            };
            min_cost = min_cost.min(cost);
            let take = match chosen {
                None => true,
                Some((best, _, best_depth)) => {
                    let tol = TIE_TOLERANCE * best.abs().max(1.0);
                    cost < best - tol || (cost <= best + tol && depth < best_depth)
                }
            };
            if take {
                chosen = Some((cost, j as u32, depth));
            }
        }
        let (_, column, target_depth) =
            chosen.expect("distinct rows always have a distinguishing column");
        let entry = MemoEntry {
            cost: min_cost,
            column,
            target_depth,
        };
        self.memo.entries.insert(mask, entry);
        Some(entry)
    }

    /// Optimal unnormalized cost `U(S)`.
    pub fn unnormalized_cost(&mut self, survivors: &SurvivorSet) -> f64 {
        let mask = self.mask_of(survivors);
        self.entry(mask).map_or(0.0, |e| e.cost)
    }

    /// Optimal first column for `survivors`, `None` for a singleton.
    pub fn best_column(&mut self, survivors: &SurvivorSet) -> Option<usize> {
        let mask = self.mask_of(survivors);
        self.entry(mask).map(|e| e.column as usize)
    }

    fn build(&mut self, mask: u32) -> ClassTree {
        match self.entry(mask) {
            None => {
                let row = mask.trailing_zeros() as usize;
                ClassTree::leaf(self.problem.label(row))
            }
            Some(e) => {
                let ones = self.ones[e.column as usize];
                ClassTree::inspect(
                    e.column as usize,
                    self.build(mask & !ones),
                    self.build(mask & ones),
                )
            }
        }
    }

    /// Optimal tree for the rows in `survivors`.
    pub fn tree_for(&mut self, survivors: &SurvivorSet) -> ClassTree {
        let mask = self.mask_of(survivors);
        self.build(mask)
    }

    pub fn solve(&mut self) -> ExactSolution {
        let full = self.full_mask();
        let cost = self.entry(full).map_or(0.0, |e| e.cost);
        let tree = self.build(full);
        ExactSolution {
            tree,
            cost,
            states: self.memo.len(),
        }
    }

    pub fn memo(&self) -> &MemoTable {
        &self.memo
    }
}

/// Minimum expected-cost tree. Ties between columns go to the lowest index.
pub fn solve_dp(problem: &Problem) -> Result<ExactSolution, ExactError> {
    Ok(ExactSolver::new(problem)?.solve())
}

fn oracle_guard(problem: &Problem) -> Result<(), ExactError> {
    if problem.num_rows() > MAX_ORACLE_DIM || problem.num_cols() > MAX_ORACLE_DIM {
        return Err(ExactError::OracleTooLarge {
            rows: problem.num_rows(),
            cols: problem.num_cols(),
            max: MAX_ORACLE_DIM,
        });
    }
    Ok(())
}

/// Brute-force minimum expected cost: every informative column at every
/// survivor set, recomputed from scratch each time it is reached.
pub fn enumerate_all_trees(problem: &Problem) -> Result<f64, ExactError> {
    oracle_guard(problem)?;
    fn go(problem: &Problem, rows: &[usize]) -> f64 {
        if rows.len() <= 1 {
            return 0.0;
        }
        let mass: f64 = rows.iter().map(|&i| problem.priors()[i]).sum();
        let mut best = f64::INFINITY;
        for j in 0..problem.num_cols() {
            let (one, zero): (Vec<usize>, Vec<usize>) =
                rows.iter().partition(|&&i| problem.value(i, j));
            if one.is_empty() || zero.is_empty() {
                continue;
            }
            let cost = mass * problem.cost(j) + go(problem, &zero) + go(problem, &one);
            best = best.min(cost);
        }
        best
    }
    let rows: Vec<usize> = (0..problem.num_rows()).collect();
    Ok(go(problem, &rows))
}

/// Every tree that classifies the problem using only splitting columns.
/// Trees with non-splitting inspections are strictly dominated in both cost
/// and weight, so they are left out.
pub fn enumerate_trees(problem: &Problem) -> Result<Vec<ClassTree>, ExactError> {
    oracle_guard(problem)?;
    fn go(problem: &Problem, rows: &[usize]) -> Vec<ClassTree> {
        if rows.len() == 1 {
            return vec![ClassTree::leaf(problem.label(rows[0]))];
        }
        let mut out = Vec::new();
        for j in 0..problem.num_cols() {
            let (one, zero): (Vec<usize>, Vec<usize>) =
                rows.iter().partition(|&&i| problem.value(i, j));
            if one.is_empty() || zero.is_empty() {
                continue;
            }
            let left = go(problem, &zero);
            let right = go(problem, &one);
            for l in &left {
                for r in &right {
                    out.push(ClassTree::inspect(j, l.clone(), r.clone()));
                }
            }
        }
        out
    }
    let rows: Vec<usize> = (0..problem.num_rows()).collect();
    Ok(go(problem, &rows))
}
