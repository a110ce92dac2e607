//! Entropy-per-cost, signature (guess-and-verify) and hybrid tree builders.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};

use crate::model::{binary_entropy, Problem, SurvivorSet};
use crate::tree::ClassTree;

const TIE_TOLERANCE: f64 = 1e-12;

/// `a` and `b` are treated as equal scores.
fn ties(a: f64, b: f64) -> bool {
    (a - b).abs() <= TIE_TOLERANCE * a.abs().max(b.abs()).max(1.0)
}

/// Column-scoring rule of the entropy heuristic.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EntropyRule {
    /// Maximize expected entropy reduction per unit cost.
    #[default]
    ReductionPerCost,
    /// Minimize expected posterior entropy per unit cost.
    PosteriorPerCost,
}

impl fmt::Display for EntropyRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EntropyRule::ReductionPerCost => "reduction-per-cost",
            EntropyRule::PosteriorPerCost => "posterior-per-cost",
        })
    }
}

impl FromStr for EntropyRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "reduction-per-cost" => Ok(EntropyRule::ReductionPerCost),
            "posterior-per-cost" => Ok(EntropyRule::PosteriorPerCost),
            other => Err(format!(
                "unknown entropy rule {other:?} (expected reduction-per-cost or posterior-per-cost)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct HeuristicConfig {
    pub entropy_rule: EntropyRule,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeuristicKind {
    Entropy,
    Signature,
}

/// One heuristic decision with the score that won it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeuristicChoice {
    pub method: HeuristicKind,
    pub column: usize,
    /// Entropy rule: the rule's per-cost score. Signature: the winning row's
    /// probability-to-cost ratio.
    pub score: f64,
    /// Hypothesized row (signature heuristic only).
    pub row: Option<usize>,
}

/// Columns whose joint values in `row` occur in no other surviving row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Signature {
    pub row: usize,
    /// Sorted column indices.
    pub columns: Vec<usize>,
    pub total_cost: f64,
}

/// Survivor priors renormalized, indexed by row (zero outside `survivors`).
fn weight_vector(problem: &Problem, survivors: &SurvivorSet) -> Vec<f64> {
    let mut q = vec![0.0; problem.num_rows()];
    for (i, w) in problem.conditional_weights(survivors) {
        q[i] = w;
    }
    q
}

fn bits_mass(q: &[f64], bits: &FixedBitSet) -> f64 {
    bits.ones().map(|i| q[i]).sum()
}

/// Rows of `pool` whose value in `column` differs from `row`'s.
fn differing(problem: &Problem, pool: &FixedBitSet, row: usize, column: usize) -> FixedBitSet {
    let mut out = pool.clone();
    if problem.value(row, column) {
        out.difference_with(problem.column_ones(column));
    } else {
        out.intersect_with(problem.column_ones(column));
    }
    out
}

/// Entropy heuristic decision for `survivors`; `None` when fewer than two
/// rows survive. Ties go to the cheaper column, then the lower index.
pub fn entropy_pick(
    problem: &Problem,
    survivors: &SurvivorSet,
    rule: EntropyRule,
) -> Option<HeuristicChoice> {
    if survivors.len() < 2 {
        return None;
    }
    let mut best: Option<(f64, usize)> = None;
    for j in problem.informative_columns(survivors) {
        let split = problem.split(survivors, j);
        let cost = problem.cost(j);
        // Higher is better for both rules.
        let score = match rule {
            // The column value is a function of the class, so the expected
            // entropy reduction equals the entropy of the split itself.
            EntropyRule::ReductionPerCost => binary_entropy(split.w0) / cost,
            EntropyRule::PosteriorPerCost => {
                let posterior = split.w0 * problem.survivor_entropy(&split.zero)
                    + split.w1 * problem.survivor_entropy(&split.one);
                -posterior / cost
            }
        };
        let better = match best {
            None => true,
            Some((b, bj)) => {
                if ties(score, b) {
                    cost < problem.cost(bj) && !ties(cost, problem.cost(bj))
                } else {
                    score > b
                }
            }
        };
        if better {
            best = Some((score, j));
        }
    }
    let (score, column) = best.expect("distinct surviving rows have an informative column");
    Some(HeuristicChoice {
        method: HeuristicKind::Entropy,
        column,
        score: match rule {
            EntropyRule::ReductionPerCost => score,
            EntropyRule::PosteriorPerCost => -score,
        },
        row: None,
    })
}

/// Greedy signature for `row` grown from `seed`: repeatedly add the column
/// with the largest ratio of discrimination probability (renormalized mass of
/// still-undiscriminated rows it separates from `row`) to cost.
pub fn build_signature(
    problem: &Problem,
    survivors: &SurvivorSet,
    row: usize,
    seed: usize,
) -> Signature {
    let q = weight_vector(problem, survivors);
    build_signature_weighted(problem, survivors, &q, row, seed, f64::INFINITY)
        .expect("unbounded growth always completes")
}

/// `cost` exceeds `limit` by more than the tie tolerance.
fn over_budget(cost: f64, limit: f64) -> bool {
    cost > limit && !ties(cost, limit)
}

/// Grows the signature, giving up (`None`) once its cost is strictly over
/// `budget`; such a signature can neither win nor tie.
fn build_signature_weighted(
    problem: &Problem,
    survivors: &SurvivorSet,
    q: &[f64],
    row: usize,
    seed: usize,
    budget: f64,
) -> Option<Signature> {
    let mut total_cost = problem.cost(seed);
    if over_budget(total_cost, budget) {
        return None;
    }
    let own = problem.row(row);
    let mut pending: Vec<usize> = survivors
        .iter()
        .filter(|&r| r != row && problem.value(r, seed) == own[seed])
        .collect();
    let mut columns = vec![seed];
    while !pending.is_empty() {
        let mut best: Option<(f64, usize)> = None;
        for j in 0..problem.num_cols() {
            if columns.contains(&j) {
                continue;
            }
            let mut hit = false;
            let mut mass = 0.0;
            for &r in &pending {
                if problem.value(r, j) != own[j] {
                    hit = true;
                    mass += q[r];
                }
            }
            if !hit {
                continue;
            }
            let ratio = mass / problem.cost(j);
            let better = match best {
                None => true,
                Some((b, _)) => !ties(ratio, b) && ratio > b,
            };
            if better {
                best = Some((ratio, j));
            }
        }
        let (_, j) = best.expect("distinct rows are separable");
        columns.push(j);
        total_cost += problem.cost(j);
        if over_budget(total_cost, budget) {
            return None;
        }
        pending.retain(|&r| problem.value(r, j) == own[j]);
    }
    columns.sort_unstable();
    Some(Signature {
        row,
        columns,
        total_cost,
    })
}

/// Cheapest greedy signature over every informative seed column. Ties go to
/// fewer columns, then the lexicographically smaller column set.
pub fn best_signature(problem: &Problem, survivors: &SurvivorSet, row: usize) -> Signature {
    let q = weight_vector(problem, survivors);
    best_signature_weighted(problem, survivors, &q, row, f64::INFINITY)
        .expect("row must share the survivor set with at least one other row")
}

/// For each surviving row other than `row`, the cheapest column separating
/// it from `row` (indexed by row, infinite elsewhere).
fn separation_costs(problem: &Problem, survivors: &SurvivorSet, row: usize) -> Vec<f64> {
    let own = problem.row(row);
    let mut sep = vec![f64::INFINITY; problem.num_rows()];
    for r in survivors.iter().filter(|&r| r != row) {
        let other = problem.row(r);
        sep[r] = (0..problem.num_cols())
            .filter(|&j| other[j] != own[j])
            .map(|j| problem.cost(j))
            .fold(f64::INFINITY, f64::min);
    }
    sep
}

/// As [`best_signature`], but `None` when every signature costs strictly more
/// than `budget`. A seed is skipped when its cost plus the dearest separation
/// it leaves open already exceeds the best signature found so far.
fn best_signature_weighted(
    problem: &Problem,
    survivors: &SurvivorSet,
    q: &[f64],
    row: usize,
    budget: f64,
) -> Option<Signature> {
    let sep = separation_costs(problem, survivors, row);
    let own = problem.row(row);
    let mut best: Option<Signature> = None;
    for seed in problem.informative_columns(survivors) {
        let limit = best.as_ref().map_or(budget, |b| b.total_cost.min(budget));
        let open = survivors
            .iter()
            .filter(|&r| r != row && problem.value(r, seed) == own[seed])
            .map(|r| sep[r])
            .fold(0.0, f64::max);
        if over_budget(problem.cost(seed) + open, limit) {
            continue;
        }
        let Some(sig) = build_signature_weighted(problem, survivors, q, row, seed, limit) else {
            continue;
        };
        let better = match &best {
            None => true,
            Some(b) => {
                if ties(sig.total_cost, b.total_cost) {
                    (sig.columns.len(), &sig.columns) < (b.columns.len(), &b.columns)
                } else {
                    sig.total_cost < b.total_cost
                }
            }
        };
        if better {
            best = Some(sig);
        }
    }
    best
}

/// Guess-and-verify decision: hypothesize the surviving row with the best
/// ratio of conditional probability to signature cost, then inspect the
/// signature column the survivors are least likely to match.
pub fn signature_pick(problem: &Problem, survivors: &SurvivorSet) -> Option<HeuristicChoice> {
    if survivors.len() < 2 {
        return None;
    }
    let q = weight_vector(problem, survivors);
    // A row's signature must separate it from every other survivor, so the
    // dearest of those separations bounds its cost from below and its Step 2
    // ratio from above. Rows are visited by decreasing weight so a strong
    // candidate is found early; rows that cannot reach it are skipped and the
    // rest only grow signatures cheap enough to compete. Equal ratios go to
    // the lower row, as in a scan by index.
    let mut order: Vec<usize> = survivors.iter().collect();
    order.sort_by(|&a, &b| q[b].total_cmp(&q[a]).then(a.cmp(&b)));
    let mut chosen: Option<(f64, Signature)> = None;
    for row in order {
        let budget = match &chosen {
            None => f64::INFINITY,
            Some((b, _)) => {
                let floor = separation_costs(problem, survivors, row)
                    .into_iter()
                    .filter(|c| c.is_finite())
                    .fold(0.0, f64::max);
                let bound = q[row] / floor;
                if bound < *b && !ties(bound, *b) {
                    continue;
                }
                if *b > 0.0 {
                    q[row] / *b
                } else {
                    f64::INFINITY
                }
            }
        };
        let Some(sig) = best_signature_weighted(problem, survivors, &q, row, budget) else {
            continue;
        };
        let ratio = q[row] / sig.total_cost;
        let better = match &chosen {
            None => true,
            Some((b, s)) => {
                if ties(ratio, *b) {
                    row < s.row
                } else {
                    ratio > *b
                }
            }
        };
        if better {
            chosen = Some((ratio, sig));
        }
    }
    let (ratio, sig) = chosen.expect("survivor set is non-empty");
    let row = sig.row;
    let mut best: Option<(f64, usize)> = None;
    for &j in &sig.columns {
        let differ = differing(problem, survivors.bits(), row, j);
        let mut matching = survivors.bits().clone();
        matching.difference_with(&differ);
        let p_match = bits_mass(&q, &matching);
        let better = match best {
            None => true,
            Some((b, bj)) => {
                if ties(p_match, b) {
                    let (c, bc) = (problem.cost(j), problem.cost(bj));
                    !ties(c, bc) && c < bc
                } else {
                    p_match < b
                }
            }
        };
        if better {
            best = Some((p_match, j));
        }
    }
    let (_, column) = best.expect("signature has at least one column");
    Some(HeuristicChoice {
        method: HeuristicKind::Signature,
        column,
        score: ratio,
        row: Some(row),
    })
}

fn build_greedy(
    problem: &Problem,
    survivors: &SurvivorSet,
    pick: &mut dyn FnMut(&SurvivorSet) -> Option<usize>,
) -> ClassTree {
    match pick(survivors) {
        None => {
            let row = survivors.first().expect("non-empty survivor set");
            ClassTree::leaf(problem.label(row))
        }
        Some(j) => {
            let split = problem.split(survivors, j);
            let if_false = build_greedy(problem, &split.zero, pick);
            let if_true = build_greedy(problem, &split.one, pick);
            ClassTree::inspect(j, if_false, if_true)
        }
    }
}

pub fn build_entropy_tree(problem: &Problem, rule: EntropyRule) -> ClassTree {
    build_greedy(problem, &problem.all_rows(), &mut |s| {
        entropy_pick(problem, s, rule).map(|c| c.column)
    })
}

pub fn build_signature_tree(problem: &Problem) -> ClassTree {
    build_greedy(problem, &problem.all_rows(), &mut |s| {
        signature_pick(problem, s).map(|c| c.column)
    })
}

/// Hybrid builder: at every survivor set it expands both heuristics' columns
/// and keeps the one whose subtree is cheaper (entropy's on ties). Results
/// are memoized per survivor set, so the column for any set is available
/// after construction.
pub struct HybridSolver<'a> {
    problem: &'a Problem,
    config: HeuristicConfig,
    memo: HashMap<FixedBitSet, (f64, usize)>,
}

impl<'a> HybridSolver<'a> {
    pub fn new(problem: &'a Problem, config: HeuristicConfig) -> Self {
        Self {
            problem,
            config,
            memo: HashMap::new(),
        }
    }

    /// Unnormalized expected cost of the hybrid subtree for `survivors`.
    pub fn unnormalized_cost(&mut self, survivors: &SurvivorSet) -> f64 {
        self.solve(survivors).map_or(0.0, |(c, _)| c)
    }

    pub fn best_column(&mut self, survivors: &SurvivorSet) -> Option<usize> {
        self.solve(survivors).map(|(_, j)| j)
    }

    fn branch_cost(&mut self, survivors: &SurvivorSet, column: usize) -> f64 {
        let split = self.problem.split(survivors, column);
        survivors.mass() * self.problem.cost(column)
            + self.unnormalized_cost(&split.zero)
            + self.unnormalized_cost(&split.one)
    }

    fn solve(&mut self, survivors: &SurvivorSet) -> Option<(f64, usize)> {
        if survivors.len() < 2 {
            return None;
        }
        if let Some(&hit) = self.memo.get(survivors.bits()) {
            return Some(hit);
        }
        let e = entropy_pick(self.problem, survivors, self.config.entropy_rule)?.column;
        let s = signature_pick(self.problem, survivors)?.column;
        let cost_e = self.branch_cost(survivors, e);
        let result = if s == e {
            (cost_e, e)
        } else {
            let cost_s = self.branch_cost(survivors, s);
            if cost_s < cost_e && !ties(cost_s, cost_e) {
                (cost_s, s)
            } else {
                (cost_e, e)
            }
        };
        self.memo.insert(survivors.bits().clone(), result);
        Some(result)
    }

    pub fn tree_for(&mut self, survivors: &SurvivorSet) -> ClassTree {
        match self.best_column(survivors) {
            None => {
                let row = survivors.first().expect("non-empty survivor set");
                ClassTree::leaf(self.problem.label(row))
            }
            Some(j) => {
                let split = self.problem.split(survivors, j);
                let if_false = self.tree_for(&split.zero);
                let if_true = self.tree_for(&split.one);
                ClassTree::inspect(j, if_false, if_true)
            }
        }
    }

    /// Number of survivor sets expanded so far.
    pub fn states(&self) -> usize {
        self.memo.len()
    }
}

pub fn build_hybrid_tree(problem: &Problem, config: HeuristicConfig) -> ClassTree {
    HybridSolver::new(problem, config).tree_for(&problem.all_rows())
}
