mod common;

use std::sync::Arc;

use classtree::consult::{AnswerMode, ConsultError, Session, Status};
use classtree::methods::build_tree;
use classtree::tree::path_columns;
use classtree::{HeuristicConfig, Method};
use common::*;
use proptest::prelude::*;

proptest! {
    /// A strict session answered with row i's pattern walks row i's path in
    /// the strategy's tree.
    #[test]
    fn strict_sessions_replay_tree_paths(problem in arb_problem(10, 10)) {
        let problem = Arc::new(problem);
        let cfg = HeuristicConfig::default();
        for method in Method::ALL {
            let tree = build_tree(&problem, method, cfg).unwrap();
            for row in 0..problem.num_rows() {
                let mut s = Session::new(problem.clone(), method, AnswerMode::Strict, cfg).unwrap();
                while let Some(j) = s.recommendation() {
                    let total: f64 = s.posterior().iter().map(|(_, w)| w).sum();
                    prop_assert!((total - 1.0).abs() < 1e-9);
                    s.answer(j, problem.value(row, j)).unwrap();
                }
                prop_assert_eq!(s.status(), &Status::Classified { label: problem.label(row).to_string() });
                let path = path_columns(&tree, &problem, row).unwrap();
                let observed: Vec<usize> = s.observed().iter().map(|o| o.column).collect();
                let mut sorted = observed.clone();
                sorted.sort_unstable();
                prop_assert_eq!(sorted, path.iter().copied().collect::<Vec<_>>());
                let cost: f64 = path.iter().map(|&j| problem.cost(j)).sum();
                prop_assert!(close(s.cost_so_far(), cost, 1e-12));
            }
        }
    }

    /// Free mode: any order of answers consistent with a row ends on that row.
    #[test]
    fn free_sessions_converge(problem in arb_problem(8, 8), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let problem = Arc::new(problem);
        let mut order: Vec<usize> = (0..problem.num_cols()).collect();
        order.shuffle(&mut rng(seed));
        let row = seed as usize % problem.num_rows();
        let mut s = Session::new(problem.clone(), Method::Entropy, AnswerMode::Free, HeuristicConfig::default()).unwrap();
        for j in order {
            if s.status().is_settled() {
                prop_assert_eq!(s.answer(j, true), Err(ConsultError::Settled));
                break;
            }
            s.answer(j, problem.value(row, j)).unwrap();
            prop_assert!(s.survivors().contains(row));
        }
        prop_assert_eq!(s.status(), &Status::Classified { label: problem.label(row).to_string() });
    }
}
