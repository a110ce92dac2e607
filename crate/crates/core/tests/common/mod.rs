#![allow(dead_code)]

use classtree::Problem;
use proptest::prelude::*;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const WORKED: &str = r#"{
    "labels": ["a", "b", "c", "d"],
    "matrix": [[1,0,0,1],[0,1,0,1],[1,0,1,0],[0,1,1,1]],
    "p": [0.4, 0.2, 0.3, 0.1],
    "c": [3, 1, 4, 1]
}"#;

pub fn worked() -> Problem {
    Problem::from_json(WORKED).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `rows` distinct random rows over `cols` columns; needs `rows <= 2^cols`.
pub fn distinct_rows<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Vec<Vec<bool>> {
    assert!(cols < 64 && rows as u64 <= 1u64 << cols);
    if cols <= 16 {
        sample(rng, 1usize << cols, rows)
            .into_iter()
            .map(|code| (0..cols).map(|j| code >> j & 1 == 1).collect())
            .collect()
    } else {
        let mut out: Vec<Vec<bool>> = Vec::new();
        while out.len() < rows {
            let row: Vec<bool> = (0..cols).map(|_| rng.random_bool(0.5)).collect();
            if !out.contains(&row) {
                out.push(row);
            }
        }
        out
    }
}

pub fn from_rows(rows: Vec<Vec<bool>>, priors: Vec<f64>, costs: Vec<f64>) -> Problem {
    let labels = (0..rows.len()).map(|i| format!("r{i}")).collect();
    Problem::new(labels, rows, priors, costs).unwrap()
}

/// Random problem with priors drawn uniformly then normalized (a few set to
/// zero) and costs in `[0.1, 10)`.
pub fn random_problem<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Problem {
    let matrix = distinct_rows(rng, rows, cols);
    let mut p: Vec<f64> = (0..rows)
        .map(|_| {
            if rng.random_bool(0.1) {
                0.0
            } else {
                rng.random_range(0.01..1.0)
            }
        })
        .collect();
    if p.iter().all(|&x| x == 0.0) {
        p[0] = 1.0;
    }
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= total);
    let c = (0..cols).map(|_| rng.random_range(0.1..10.0)).collect();
    from_rows(matrix, p, c)
}

/// Random shape with `1 <= rows <= max_rows`, `1 <= cols <= max_cols` and
/// room for distinct rows.
pub fn random_shape<R: Rng>(rng: &mut R, max_rows: usize, max_cols: usize) -> (usize, usize) {
    let cols = rng.random_range(1..=max_cols);
    let cap = if cols >= 63 { max_rows } else { max_rows.min(1 << cols) };
    (rng.random_range(1..=cap), cols)
}

pub fn uniform_problem(rows: Vec<Vec<bool>>) -> Problem {
    let l = rows.len();
    let n = rows[0].len();
    from_rows(rows, vec![1.0 / l as f64; l], vec![1.0; n])
}

/// Proptest strategy for problems up to the given size.
pub fn arb_problem(max_rows: usize, max_cols: usize) -> impl Strategy<Value = Problem> {
    any::<u64>().prop_map(move |seed| {
        let mut r = rng(seed);
        let (l, n) = random_shape(&mut r, max_rows, max_cols);
        random_problem(&mut r, l, n)
    })
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}
