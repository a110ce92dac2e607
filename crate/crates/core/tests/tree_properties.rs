mod common;

use classtree::exact::enumerate_trees;
use classtree::tree::{expected_cost_recursive, path_columns, tree_weight};
use classtree::{expected_cost, verify, ClassTree, Problem, SurvivorSet};
use common::*;
use proptest::prelude::*;
use rand::seq::IndexedRandom;
use rand::Rng;

/// Random valid tree: a uniformly chosen splitting column at every node.
fn random_tree<R: Rng>(problem: &Problem, survivors: &SurvivorSet, rng: &mut R) -> ClassTree {
    if survivors.len() == 1 {
        return ClassTree::leaf(problem.label(survivors.first().unwrap()));
    }
    let cols: Vec<usize> = problem.informative_columns(survivors).collect();
    let j = *cols.choose(rng).unwrap();
    let split = problem.split(survivors, j);
    ClassTree::inspect(
        j,
        random_tree(problem, &split.zero, rng),
        random_tree(problem, &split.one, rng),
    )
}

fn internal_weight(tree: &ClassTree, problem: &Problem, survivors: &SurvivorSet) -> f64 {
    match tree {
        ClassTree::Leaf { .. } => 0.0,
        ClassTree::Inspect {
            column,
            if_false,
            if_true,
        } => {
            let split = problem.split(survivors, *column);
            survivors.mass()
                + internal_weight(if_false, problem, &split.zero)
                + internal_weight(if_true, problem, &split.one)
        }
    }
}

proptest! {
    #[test]
    fn path_sum_matches_recursion(problem in arb_problem(10, 10), seed in any::<u64>()) {
        let tree = random_tree(&problem, &problem.all_rows(), &mut rng(seed));
        prop_assert!(verify(&tree, &problem).valid);
        let a = expected_cost(&tree, &problem).unwrap();
        let b = expected_cost_recursive(&tree, &problem).unwrap();
        prop_assert!(close(a, b, 1e-9), "{a} vs {b}");
    }

    #[test]
    fn unit_cost_equals_internal_weight(problem in arb_problem(10, 10), seed in any::<u64>()) {
        let unit = from_rows(
            (0..problem.num_rows()).map(|i| problem.row(i).to_vec()).collect(),
            problem.priors().to_vec(),
            vec![1.0; problem.num_cols()],
        );
        let tree = random_tree(&unit, &unit.all_rows(), &mut rng(seed));
        let cost = expected_cost(&tree, &unit).unwrap();
        let internal = internal_weight(&tree, &unit, &unit.all_rows());
        prop_assert!(close(cost, internal, 1e-9));
        let total: f64 = unit.priors().iter().sum();
        prop_assert!(close(tree_weight(&tree, &unit).unwrap(), internal + total, 1e-9));
    }

    #[test]
    fn json_round_trip(problem in arb_problem(8, 8), seed in any::<u64>()) {
        let tree = random_tree(&problem, &problem.all_rows(), &mut rng(seed));
        let back: ClassTree = serde_json::from_str(&tree.to_json()).unwrap();
        prop_assert_eq!(back, tree);
    }

    #[test]
    fn every_path_classifies_its_row(problem in arb_problem(10, 10), seed in any::<u64>()) {
        let tree = random_tree(&problem, &problem.all_rows(), &mut rng(seed));
        for i in 0..problem.num_rows() {
            let cols = path_columns(&tree, &problem, i).unwrap();
            // The columns on a row's path tell it apart from every other row.
            for k in (0..problem.num_rows()).filter(|&k| k != i) {
                prop_assert!(cols.iter().any(|&j| problem.value(i, j) != problem.value(k, j)));
            }
        }
    }

    /// Uniform costs: a tree has minimum expected cost exactly when it has
    /// minimum weight.
    #[test]
    fn cost_minimal_iff_weight_minimal(problem in arb_problem(4, 4)) {
        let unit = from_rows(
            (0..problem.num_rows()).map(|i| problem.row(i).to_vec()).collect(),
            problem.priors().to_vec(),
            vec![1.0; problem.num_cols()],
        );
        let trees = enumerate_trees(&unit).unwrap();
        let costs: Vec<f64> = trees.iter().map(|t| expected_cost(t, &unit).unwrap()).collect();
        let weights: Vec<f64> = trees.iter().map(|t| tree_weight(t, &unit).unwrap()).collect();
        let min_c = costs.iter().copied().fold(f64::INFINITY, f64::min);
        let min_w = weights.iter().copied().fold(f64::INFINITY, f64::min);
        for (c, w) in costs.iter().zip(&weights) {
            prop_assert_eq!(close(*c, min_c, 1e-9), close(*w, min_w, 1e-9));
        }
    }
}

#[test]
fn hand_built_tree() {
    let p = worked();
    let tree: ClassTree = serde_json::from_str(
        r#"{"inspect":2,
            "if_false":{"inspect":4,"if_false":{"class":"c"},"if_true":{"class":"a"}},
            "if_true":{"inspect":3,"if_false":{"class":"b"},"if_true":{"class":"d"}}}"#,
    )
    .unwrap();
    assert!(verify(&tree, &p).valid);
    assert!((expected_cost(&tree, &p).unwrap() - 2.9).abs() < 1e-12);
}
