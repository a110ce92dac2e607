//! Classification trees: evaluation, verification and path extraction.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Problem, SurvivorSet};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TreeError {
    #[error("invalid tree: column {column} is out of range")]
    ColumnOutOfRange { column: usize },
    #[error("invalid tree: row {row} ({expected}) reaches leaf {found:?}")]
    Misclassified {
        row: usize,
        expected: String,
        found: String,
    },
    #[error("invalid tree: column {column} is inspected twice on one path")]
    RepeatedColumn { column: usize },
}

/// A questioning policy. Internal nodes inspect a column (0-based here,
/// 1-based on the wire); the false branch is taken when the property is
/// absent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "TreeWire", into = "TreeWire")]
pub enum ClassTree {
    Leaf {
        label: String,
    },
    Inspect {
        column: usize,
        if_false: Box<ClassTree>,
        if_true: Box<ClassTree>,
    },
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum TreeWire {
    Leaf {
        class: String,
    },
    Inspect {
        inspect: usize,
        if_false: Box<ClassTree>,
        if_true: Box<ClassTree>,
    },
}

impl TryFrom<TreeWire> for ClassTree {
    type Error = String;

    fn try_from(wire: TreeWire) -> Result<Self, Self::Error> {
        match wire {
            TreeWire::Leaf { class } => Ok(ClassTree::Leaf { label: class }),
            TreeWire::Inspect { inspect: 0, .. } => {
                Err("\"inspect\" is a 1-based column number, got 0".to_string())
            }
            TreeWire::Inspect {
                inspect,
                if_false,
                if_true,
            } => Ok(ClassTree::Inspect {
                column: inspect - 1,
                if_false,
                if_true,
            }),
        }
    }
}

impl From<ClassTree> for TreeWire {
    fn from(tree: ClassTree) -> Self {
        match tree {
            ClassTree::Leaf { label } => TreeWire::Leaf { class: label },
            ClassTree::Inspect {
                column,
                if_false,
                if_true,
            } => TreeWire::Inspect {
                inspect: column + 1,
                if_false,
                if_true,
            },
        }
    }
}

impl ClassTree {
    pub fn leaf(label: impl Into<String>) -> Self {
        ClassTree::Leaf {
            label: label.into(),
        }
    }

    pub fn inspect(column: usize, if_false: ClassTree, if_true: ClassTree) -> Self {
        ClassTree::Inspect {
            column,
            if_false: Box::new(if_false),
            if_true: Box::new(if_true),
        }
    }

    pub fn root_column(&self) -> Option<usize> {
        match self {
            ClassTree::Leaf { .. } => None,
            ClassTree::Inspect { column, .. } => Some(*column),
        }
    }

    pub fn num_internal(&self) -> usize {
        match self {
            ClassTree::Leaf { .. } => 0,
            ClassTree::Inspect {
                if_false, if_true, ..
            } => 1 + if_false.num_internal() + if_true.num_internal(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            ClassTree::Leaf { .. } => 0,
            ClassTree::Inspect {
                if_false, if_true, ..
            } => 1 + if_false.depth().max(if_true.depth()),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("tree serializes")
    }

    /// Indented rendering with 1-based column numbers.
    pub fn render(&self, problem: &Problem) -> String {
        fn go(t: &ClassTree, problem: &Problem, indent: usize, out: &mut String) {
            let pad = "  ".repeat(indent);
            match t {
                ClassTree::Leaf { label } => {
                    let _ = writeln!(out, "{pad}=> {label}");
                }
                ClassTree::Inspect {
                    column,
                    if_false,
                    if_true,
                } => {
                    let name = problem
                        .column_names()
                        .and_then(|n| n.get(*column))
                        .map(|n| format!(" ({n})"))
                        .unwrap_or_default();
                    let cost = problem.costs().get(*column).copied().unwrap_or(f64::NAN);
                    let _ = writeln!(out, "{pad}inspect {}{name} [cost {cost}]", column + 1);
                    let _ = writeln!(out, "{pad}  if 0:");
                    go(if_false, problem, indent + 2, out);
                    let _ = writeln!(out, "{pad}  if 1:");
                    go(if_true, problem, indent + 2, out);
                }
            }
        }
        let mut out = String::new();
        go(self, problem, 0, &mut out);
        out
    }
}

/// Follows row `row` down the tree; returns the inspected columns in order and
/// the leaf label reached.
fn route<'t>(
    tree: &'t ClassTree,
    problem: &Problem,
    row: usize,
) -> Result<(Vec<usize>, &'t str), TreeError> {
    let mut node = tree;
    let mut path = Vec::new();
    loop {
        match node {
            ClassTree::Leaf { label } => return Ok((path, label)),
            ClassTree::Inspect {
                column,
                if_false,
                if_true,
            } => {
                if *column >= problem.num_cols() {
                    return Err(TreeError::ColumnOutOfRange { column: *column });
                }
                path.push(*column);
                node = if problem.value(row, *column) {
                    if_true
                } else {
                    if_false
                };
            }
        }
    }
}

fn classified_route(
    tree: &ClassTree,
    problem: &Problem,
    row: usize,
) -> Result<Vec<usize>, TreeError> {
    let (path, label) = route(tree, problem, row)?;
    if label != problem.label(row) {
        return Err(TreeError::Misclassified {
            row,
            expected: problem.label(row).to_string(),
            found: label.to_string(),
        });
    }
    Ok(path)
}

/// Distinct columns inspected on the way to `row`'s leaf.
pub fn path_columns(
    tree: &ClassTree,
    problem: &Problem,
    row: usize,
) -> Result<BTreeSet<usize>, TreeError> {
    Ok(route(tree, problem, row)?.0.into_iter().collect())
}

/// Expected inspection cost, `sum_i p(i) * (cost of the distinct columns on
/// row i's path)`.
pub fn expected_cost(tree: &ClassTree, problem: &Problem) -> Result<f64, TreeError> {
    let mut total = 0.0;
    for row in 0..problem.num_rows() {
        let path = classified_route(tree, problem, row)?;
        let cols: BTreeSet<usize> = path.into_iter().collect();
        let path_cost: f64 = cols.iter().map(|&j| problem.cost(j)).sum();
        total += problem.priors()[row] * path_cost;
    }
    Ok(total)
}

/// Expected cost through the node recursion: a leaf costs nothing, an
/// inspection costs its column plus the branch-probability-weighted costs of
/// its children. Kept as an independent cross-check of [`expected_cost`].
pub fn expected_cost_recursive(tree: &ClassTree, problem: &Problem) -> Result<f64, TreeError> {
    fn go(t: &ClassTree, problem: &Problem, s: &SurvivorSet) -> Result<f64, TreeError> {
        match t {
            ClassTree::Leaf { label } => {
                if let Some(row) = s.iter().find(|&r| problem.label(r) != label) {
                    return Err(TreeError::Misclassified {
                        row,
                        expected: problem.label(row).to_string(),
                        found: label.clone(),
                    });
                }
                Ok(0.0)
            }
            ClassTree::Inspect {
                column,
                if_false,
                if_true,
            } => {
                if *column >= problem.num_cols() {
                    return Err(TreeError::ColumnOutOfRange { column: *column });
                }
                let split = problem.split(s, *column);
                let (w0, w1) = if s.mass() > 0.0 {
                    (split.w0, split.w1)
                } else {
                    (0.0, 0.0)
                };
                let c0 = go(if_false, problem, &split.zero)?;
                let c1 = go(if_true, problem, &split.one)?;
                Ok(problem.cost(*column) + w0 * c0 + w1 * c1)
            }
        }
    }
    go(tree, problem, &problem.all_rows())
}

/// Sum over every node (internal and terminal) of the prior mass reaching it.
pub fn tree_weight(tree: &ClassTree, problem: &Problem) -> Result<f64, TreeError> {
    fn go(t: &ClassTree, problem: &Problem, s: &SurvivorSet) -> Result<f64, TreeError> {
        match t {
            ClassTree::Leaf { label } => {
                if let Some(row) = s.iter().find(|&r| problem.label(r) != label) {
                    return Err(TreeError::Misclassified {
                        row,
                        expected: problem.label(row).to_string(),
                        found: label.clone(),
                    });
                }
                Ok(s.mass())
            }
            ClassTree::Inspect {
                column,
                if_false,
                if_true,
            } => {
                if *column >= problem.num_cols() {
                    return Err(TreeError::ColumnOutOfRange { column: *column });
                }
                let split = problem.split(s, *column);
                Ok(s.mass() + go(if_false, problem, &split.zero)? + go(if_true, problem, &split.one)?)
            }
        }
    }
    go(tree, problem, &problem.all_rows())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verification {
    pub valid: bool,
    /// First row (0-based) that is misrouted, when the failure is row-specific.
    pub failing_row: Option<usize>,
    pub error: Option<TreeError>,
}

/// Checks that every row reaches a leaf carrying its own label and that no
/// root-to-leaf path inspects a column twice.
pub fn verify(tree: &ClassTree, problem: &Problem) -> Verification {
    fn repeated(t: &ClassTree, seen: &mut Vec<usize>) -> Option<usize> {
        match t {
            ClassTree::Leaf { .. } => None,
            ClassTree::Inspect {
                column,
                if_false,
                if_true,
            } => {
                if seen.contains(column) {
                    return Some(*column);
                }
                seen.push(*column);
                let r = repeated(if_false, seen).or_else(|| repeated(if_true, seen));
                seen.pop();
                r
            }
        }
    }
    let fail = |row, error| Verification {
        valid: false,
        failing_row: row,
        error: Some(error),
    };
    if let Some(column) = repeated(tree, &mut Vec::new()) {
        return fail(None, TreeError::RepeatedColumn { column });
    }
    for row in 0..problem.num_rows() {
        match classified_route(tree, problem, row) {
            Ok(_) => {}
            Err(e @ TreeError::Misclassified { .. }) => return fail(Some(row), e),
            Err(e) => return fail(None, e),
        }
    }
    Verification {
        valid: true,
        failing_row: None,
        error: None,
    }
}
