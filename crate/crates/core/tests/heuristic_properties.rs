mod common;

use classtree::heuristics::{
    best_signature, build_entropy_tree, build_hybrid_tree, build_signature_tree, entropy_pick,
    signature_pick,
};
use classtree::methods::{build_tree, solve};
use classtree::{expected_cost, solve_dp, verify, ClassTree, EntropyRule, HeuristicConfig, Method};
use classtree::{Problem, SurvivorSet};
use common::*;
use proptest::prelude::*;

fn ties(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

fn weights(problem: &Problem, s: &SurvivorSet) -> Vec<f64> {
    let mut q = vec![0.0; problem.num_rows()];
    let mass: f64 = s.iter().map(|i| problem.priors()[i]).sum();
    for i in s.iter() {
        q[i] = if mass > 0.0 {
            problem.priors()[i] / mass
        } else {
            1.0 / s.len() as f64
        };
    }
    q
}

fn informative(problem: &Problem, s: &SurvivorSet) -> Vec<usize> {
    (0..problem.num_cols())
        .filter(|&j| {
            let ones = s.iter().filter(|&i| problem.value(i, j)).count();
            ones > 0 && ones < s.len()
        })
        .collect()
}

/// Unpruned greedy signature, written directly from the procedure.
fn reference_signature(problem: &Problem, s: &SurvivorSet, q: &[f64], row: usize, seed: usize) -> (f64, Vec<usize>) {
    let differs = |r: usize, j: usize| problem.value(r, j) != problem.value(row, j);
    let mut cols = vec![seed];
    let mut left: Vec<usize> = s.iter().filter(|&r| r != row && !differs(r, seed)).collect();
    while !left.is_empty() {
        let mut best: Option<(f64, usize)> = None;
        for j in (0..problem.num_cols()).filter(|j| !cols.contains(j)) {
            let hits: Vec<usize> = left.iter().copied().filter(|&r| differs(r, j)).collect();
            if hits.is_empty() {
                continue;
            }
            let ratio = hits.iter().map(|&r| q[r]).sum::<f64>() / problem.cost(j);
            if best.is_none_or(|(b, _)| !ties(ratio, b) && ratio > b) {
                best = Some((ratio, j));
            }
        }
        let j = best.unwrap().1;
        cols.push(j);
        left.retain(|&r| !differs(r, j));
    }
    cols.sort_unstable();
    (cols.iter().map(|&j| problem.cost(j)).sum(), cols)
}

fn reference_best_signature(problem: &Problem, s: &SurvivorSet, q: &[f64], row: usize) -> (f64, Vec<usize>) {
    let mut best: Option<(f64, Vec<usize>)> = None;
    for seed in informative(problem, s) {
        let (c, cols) = reference_signature(problem, s, q, row, seed);
        let better = match &best {
            None => true,
            Some((bc, bcols)) if ties(c, *bc) => (cols.len(), &cols) < (bcols.len(), bcols),
            Some((bc, _)) => c < *bc,
        };
        if better {
            best = Some((c, cols));
        }
    }
    best.unwrap()
}

/// Steps 2 and 3 without any pruning.
fn reference_signature_pick(problem: &Problem, s: &SurvivorSet) -> usize {
    let q = weights(problem, s);
    let mut chosen: Option<(f64, usize, Vec<usize>)> = None;
    for row in s.iter() {
        let (cost, cols) = reference_best_signature(problem, s, &q, row);
        let ratio = q[row] / cost;
        if chosen.as_ref().is_none_or(|(b, _, _)| !ties(ratio, *b) && ratio > *b) {
            chosen = Some((ratio, row, cols));
        }
    }
    let (_, row, cols) = chosen.unwrap();
    let mut best: Option<(f64, usize)> = None;
    for j in cols {
        let matching: f64 = s
            .iter()
            .filter(|&r| problem.value(r, j) == problem.value(row, j))
            .map(|r| q[r])
            .sum();
        let better = match best {
            None => true,
            Some((b, bj)) if ties(matching, b) => {
                !ties(problem.cost(j), problem.cost(bj)) && problem.cost(j) < problem.cost(bj)
            }
            Some((b, _)) => matching < b,
        };
        if better {
            best = Some((matching, j));
        }
    }
    best.unwrap().1
}

fn reference_signature_tree(problem: &Problem, s: &SurvivorSet) -> ClassTree {
    if s.len() == 1 {
        return ClassTree::leaf(problem.label(s.first().unwrap()));
    }
    let j = reference_signature_pick(problem, s);
    let split = problem.split(s, j);
    ClassTree::inspect(
        j,
        reference_signature_tree(problem, &split.zero),
        reference_signature_tree(problem, &split.one),
    )
}

/// Cheapest column set whose values single out `row` among `s`.
fn brute_force_signature_cost(problem: &Problem, s: &SurvivorSet, row: usize) -> f64 {
    let n = problem.num_cols();
    let mut best = f64::INFINITY;
    for mask in 1u32..(1 << n) {
        let unique = s.iter().filter(|&r| r != row).all(|r| {
            (0..n).any(|j| mask >> j & 1 == 1 && problem.value(r, j) != problem.value(row, j))
        });
        if unique {
            let cost: f64 = (0..n).filter(|j| mask >> j & 1 == 1).map(|j| problem.cost(j)).sum();
            best = best.min(cost);
        }
    }
    best
}

fn all_configs() -> [HeuristicConfig; 2] {
    [
        HeuristicConfig::default(),
        HeuristicConfig {
            entropy_rule: EntropyRule::PosteriorPerCost,
        },
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn pruned_signature_tree_matches_reference(problem in arb_problem(12, 12)) {
        let reference = reference_signature_tree(&problem, &problem.all_rows());
        prop_assert_eq!(build_signature_tree(&problem), reference);
    }

    #[test]
    fn best_signature_matches_reference(problem in arb_problem(10, 10)) {
        let s = problem.all_rows();
        prop_assume!(s.len() >= 2);
        let q = weights(&problem, &s);
        for row in 0..problem.num_rows() {
            let sig = best_signature(&problem, &s, row);
            let (cost, cols) = reference_best_signature(&problem, &s, &q, row);
            prop_assert_eq!(&sig.columns, &cols);
            prop_assert!(close(sig.total_cost, cost, 1e-12));
        }
    }

    #[test]
    fn signatures_are_valid_and_not_below_optimum(problem in arb_problem(10, 10)) {
        let s = problem.all_rows();
        prop_assume!(s.len() >= 2);
        for row in 0..problem.num_rows() {
            let sig = best_signature(&problem, &s, row);
            for r in (0..problem.num_rows()).filter(|&r| r != row) {
                prop_assert!(sig.columns.iter().any(|&j| problem.value(r, j) != problem.value(row, j)));
            }
            let optimum = brute_force_signature_cost(&problem, &s, row);
            prop_assert!(sig.total_cost >= optimum - 1e-9);
        }
    }

    #[test]
    fn heuristic_trees_verify_and_respect_bounds(problem in arb_problem(10, 10)) {
        let optimum = solve_dp(&problem).unwrap().cost;
        for cfg in all_configs() {
            let e = build_entropy_tree(&problem, cfg.entropy_rule);
            let s = build_signature_tree(&problem);
            let h = build_hybrid_tree(&problem, cfg);
            for t in [&e, &s, &h] {
                prop_assert!(verify(t, &problem).valid);
            }
            let (ce, cs, ch) = (
                expected_cost(&e, &problem).unwrap(),
                expected_cost(&s, &problem).unwrap(),
                expected_cost(&h, &problem).unwrap(),
            );
            prop_assert!(ch <= ce + 1e-9 && ch <= cs + 1e-9, "hybrid {ch} entropy {ce} signature {cs}");
            prop_assert!(optimum <= ch + 1e-9);
        }
    }

    #[test]
    fn methods_are_deterministic(problem in arb_problem(10, 10)) {
        for m in Method::ALL {
            let a = build_tree(&problem, m, HeuristicConfig::default()).unwrap();
            let b = build_tree(&problem, m, HeuristicConfig::default()).unwrap();
            prop_assert_eq!(a, b);
        }
    }

    /// The default rule's score is the literal expected entropy reduction.
    #[test]
    fn entropy_score_is_expected_reduction(problem in arb_problem(10, 10)) {
        let s = problem.all_rows();
        prop_assume!(s.len() >= 2);
        let pick = entropy_pick(&problem, &s, EntropyRule::ReductionPerCost).unwrap();
        let split = problem.split(&s, pick.column);
        let reduction = problem.survivor_entropy(&s)
            - split.w0 * problem.survivor_entropy(&split.zero)
            - split.w1 * problem.survivor_entropy(&split.one);
        prop_assert!(close(pick.score, reduction / problem.cost(pick.column), 1e-9));
    }

    /// Uniform priors and costs: the entropy pick is a most balanced split.
    #[test]
    fn uniform_entropy_pick_is_most_balanced(problem in arb_problem(10, 10)) {
        let unit = uniform_problem((0..problem.num_rows()).map(|i| problem.row(i).to_vec()).collect());
        let s = unit.all_rows();
        prop_assume!(s.len() >= 2);
        let pick = entropy_pick(&unit, &s, EntropyRule::ReductionPerCost).unwrap();
        let gap = |j: usize| (unit.split(&s, j).w0 - 0.5).abs();
        let best = informative(&unit, &s).into_iter().map(gap).fold(f64::INFINITY, f64::min);
        prop_assert!(close(gap(pick.column), best, 1e-9));
    }

    #[test]
    fn solve_reports_the_tree_cost(problem in arb_problem(10, 10)) {
        for m in Method::ALL {
            let solved = solve(&problem, m, HeuristicConfig::default()).unwrap();
            prop_assert!(close(solved.cost, expected_cost(&solved.tree, &problem).unwrap(), 1e-9));
        }
    }
}

#[test]
fn signature_pick_reports_row_and_ratio() {
    let p = worked();
    let pick = signature_pick(&p, &p.all_rows()).unwrap();
    assert_eq!(pick.row, Some(2));
    assert_eq!(pick.column, 3);
    assert!((pick.score - 0.3).abs() < 1e-12);
}
