//! Seeded random problems stratified by prior entropy and cost dispersion.
//!
//! The grid has 5 entropy bins of equal width over `[0, log2 L]` and 10
//! coefficient-of-variation bins of width 0.1 over `[0, 1]`. Every problem is
//! a pure function of `(seed, entropy_bin, cv_bin, index)`.

use std::collections::HashSet;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, LogNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{coefficient_of_variation, entropy, Problem};

pub const ENTROPY_BINS: usize = 5;
pub const CV_BINS: usize = 10;
pub const MAX_ATTEMPTS: usize = 100_000;

/// Recorded in manifests so runs can be reproduced elsewhere.
pub const RNG_DESCRIPTION: &str =
    "ChaCha8Rng (rand_chacha 0.9) seeded per problem with splitmix64(seed, entropy_bin, cv_bin, index)";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GenError {
    #[error("{rows} distinct rows do not exist with {cols} binary columns")]
    TooManyRows { rows: usize, cols: usize },
    #[error("infeasible request: {0}")]
    Infeasible(String),
    #[error("gave up after {MAX_ATTEMPTS} attempts sampling {0}")]
    BudgetExhausted(&'static str),
}

/// Lower and upper entropy bound (bits) of `bin` for an `rows`-class problem.
pub fn entropy_bin_bounds(rows: usize, bin: usize) -> (f64, f64) {
    let width = (rows as f64).log2() / ENTROPY_BINS as f64;
    (bin as f64 * width, (bin + 1) as f64 * width)
}

pub fn cv_bin_bounds(bin: usize) -> (f64, f64) {
    (bin as f64 / CV_BINS as f64, (bin + 1) as f64 / CV_BINS as f64)
}

/// Half-open bins, except that the top bin also holds its upper bound.
fn in_bin(value: f64, (lo, hi): (f64, f64), top: bool) -> bool {
    value >= lo && (value < hi || (top && value <= hi + 1e-12))
}

pub fn entropy_bin_of(rows: usize, h: f64) -> Option<usize> {
    (0..ENTROPY_BINS).find(|&b| in_bin(h, entropy_bin_bounds(rows, b), b + 1 == ENTROPY_BINS))
}

pub fn cv_bin_of(cv: f64) -> Option<usize> {
    (0..CV_BINS).find(|&b| in_bin(cv, cv_bin_bounds(b), b + 1 == CV_BINS))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub rows: usize,
    pub cols: usize,
    pub problems_per_cell: usize,
    pub seed: u64,
}

impl GridSpec {
    pub fn cells(&self) -> impl Iterator<Item = GridCellSpec> + '_ {
        (0..ENTROPY_BINS).flat_map(move |e| {
            (0..CV_BINS).map(move |c| GridCellSpec {
                entropy_bin: e,
                cv_bin: c,
                rows: self.rows,
                cols: self.cols,
                problems_per_cell: self.problems_per_cell,
                seed: self.seed,
            })
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridCellSpec {
    pub entropy_bin: usize,
    pub cv_bin: usize,
    pub rows: usize,
    pub cols: usize,
    pub problems_per_cell: usize,
    pub seed: u64,
}

impl GridCellSpec {
    pub fn entropy_bounds(&self) -> (f64, f64) {
        entropy_bin_bounds(self.rows, self.entropy_bin)
    }

    pub fn cv_bounds(&self) -> (f64, f64) {
        cv_bin_bounds(self.cv_bin)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Generator for one problem of one cell.
pub fn problem_rng(seed: u64, entropy_bin: usize, cv_bin: usize, index: usize) -> ChaCha8Rng {
    let mut h = splitmix64(seed);
    for part in [entropy_bin as u64, cv_bin as u64, index as u64] {
        h = splitmix64(h ^ part);
    }
    ChaCha8Rng::seed_from_u64(h)
}

/// `rows` distinct uniform rows over `{0,1}^cols`, resampled until no column
/// is constant.
pub fn gen_matrix<R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    rng: &mut R,
) -> Result<Vec<Vec<bool>>, GenError> {
    if cols < usize::BITS as usize && rows > 1usize << cols {
        return Err(GenError::TooManyRows { rows, cols });
    }
    if rows < 2 || cols == 0 {
        return Err(GenError::Infeasible(format!(
            "a {rows}x{cols} matrix always has a constant column"
        )));
    }
    let mut attempts = 0;
    loop {
        let mut seen = HashSet::with_capacity(rows);
        let mut matrix = Vec::with_capacity(rows);
        while matrix.len() < rows {
            attempts += 1;
            if attempts > MAX_ATTEMPTS {
                return Err(GenError::BudgetExhausted("a matrix"));
            }
            let row: Vec<bool> = (0..cols).map(|_| rng.random()).collect();
            if seen.insert(row.clone()) {
                matrix.push(row);
            }
        }
        let constant = (0..cols).any(|j| matrix.iter().all(|r: &Vec<bool>| r[j] == matrix[0][j]));
        if !constant {
            return Ok(matrix);
        }
    }
}

fn dirichlet<R: Rng + ?Sized>(k: usize, alpha: f64, rng: &mut R) -> Vec<f64> {
    let gamma = Gamma::new(alpha, 1.0).expect("positive shape");
    let draws: Vec<f64> = (0..k).map(|_| gamma.sample(rng)).collect();
    let total: f64 = draws.iter().sum();
    draws.into_iter().map(|d| d / total).collect()
}

/// Strictly positive prior vector whose entropy falls in `bin`.
///
/// Candidates come from a symmetric Dirichlet with concentration log-uniform
/// in `[0.01, 100]`, or from a spike family (one row holding `1 - eps`, the
/// rest spread by such a Dirichlet), and are rejected until they land in the
/// bin.
pub fn gen_priors<R: Rng + ?Sized>(
    rows: usize,
    bin: usize,
    rng: &mut R,
) -> Result<Vec<f64>, GenError> {
    if rows < 2 || bin >= ENTROPY_BINS {
        return Err(GenError::Infeasible(format!(
            "entropy bin {bin} for {rows} classes"
        )));
    }
    let bounds = entropy_bin_bounds(rows, bin);
    let top = bin + 1 == ENTROPY_BINS;
    for _ in 0..MAX_ATTEMPTS {
        let alpha = 10f64.powf(rng.random_range(-2.0..=2.0));
        let mut p = if rng.random_bool(0.5) {
            let eps = 10f64.powf(rng.random_range(-4.0..=0.0));
            let spike = rng.random_range(0..rows);
            let rest = dirichlet(rows - 1, alpha, rng);
            let mut p = Vec::with_capacity(rows);
            let mut it = rest.into_iter();
            for i in 0..rows {
                p.push(if i == spike {
                    1.0 - eps
                } else {
                    eps * it.next().unwrap_or(0.0)
                });
            }
            p
        } else {
            dirichlet(rows, alpha, rng)
        };
        let total: f64 = p.iter().sum();
        if !total.is_finite() || total <= 0.0 {
            continue;
        }
        p.iter_mut().for_each(|x| *x /= total);
        if p.iter().any(|&x| !(x > 0.0)) {
            continue;
        }
        let h = entropy(&p).unwrap_or(f64::NAN);
        if in_bin(h, bounds, top) {
            return Ok(p);
        }
    }
    Err(GenError::BudgetExhausted("priors"))
}

/// Positive costs with mean 1 whose coefficient of variation falls in `bin`.
///
/// Draws are log-normal with the dispersion taken from a grid around the
/// value whose population CV is the bin midpoint, then rejected on the
/// measured CV.
pub fn gen_costs<R: Rng + ?Sized>(
    cols: usize,
    bin: usize,
    rng: &mut R,
) -> Result<Vec<f64>, GenError> {
    if bin >= CV_BINS || cols == 0 || (cols == 1 && bin > 0) {
        return Err(GenError::Infeasible(format!(
            "cost CV bin {bin} with {cols} columns"
        )));
    }
    let bounds = cv_bin_bounds(bin);
    let top = bin + 1 == CV_BINS;
    let mid = (bounds.0 + bounds.1) / 2.0;
    let target_sigma = (1.0 + mid * mid).ln().sqrt();
    for _ in 0..MAX_ATTEMPTS {
        let step = rng.random_range(0..=10) as f64;
        let sigma = target_sigma * (0.5 + step / 10.0);
        let dist = LogNormal::new(0.0, sigma).expect("valid log-normal");
        let mut c: Vec<f64> = (0..cols).map(|_| dist.sample(rng)).collect();
        let cv = coefficient_of_variation(&c);
        if in_bin(cv, bounds, top) {
            let mean = c.iter().sum::<f64>() / cols as f64;
            c.iter_mut().for_each(|x| *x /= mean);
            if c.iter().all(|&x| x > 0.0 && x.is_finite()) {
                return Ok(c);
            }
        }
    }
    Err(GenError::BudgetExhausted("costs"))
}

/// Problem `index` of a grid cell, labelled `C1..CL`.
pub fn gen_problem(cell: &GridCellSpec, index: usize) -> Result<Problem, GenError> {
    let mut rng = problem_rng(cell.seed, cell.entropy_bin, cell.cv_bin, index);
    let matrix = gen_matrix(cell.rows, cell.cols, &mut rng)?;
    let priors = gen_priors(cell.rows, cell.entropy_bin, &mut rng)?;
    let costs = gen_costs(cell.cols, cell.cv_bin, &mut rng)?;
    let labels = (1..=cell.rows).map(|i| format!("C{i}")).collect();
    Ok(Problem::new(labels, matrix, priors, costs).expect("generated problems are valid"))
}

#[derive(Debug, Clone)]
pub struct GeneratedProblem {
    pub entropy_bin: usize,
    pub cv_bin: usize,
    pub index: usize,
    pub problem: Problem,
    pub entropy: f64,
    pub cv: f64,
}

/// Every problem of the grid, in (entropy bin, cv bin, index) order.
pub fn generate_grid(spec: &GridSpec) -> Result<Vec<GeneratedProblem>, GenError> {
    let jobs: Vec<(GridCellSpec, usize)> = spec
        .cells()
        .flat_map(|cell| (0..spec.problems_per_cell).map(move |i| (cell, i)))
        .collect();
    jobs.into_par_iter()
        .map(|(cell, index)| {
            let problem = gen_problem(&cell, index)?;
            let entropy = entropy(problem.priors()).expect("priors are positive");
            let cv = coefficient_of_variation(problem.costs());
            Ok(GeneratedProblem {
                entropy_bin: cell.entropy_bin,
                cv_bin: cell.cv_bin,
                index,
                problem,
                entropy,
                cv,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(7)
    }

    #[test]
    fn bins_partition_their_ranges() {
        let (lo, _) = entropy_bin_bounds(10, 0);
        let (_, hi) = entropy_bin_bounds(10, 4);
        assert_eq!(lo, 0.0);
        assert!((hi - 10f64.log2()).abs() < 1e-12);
        for b in 0..4 {
            assert_eq!(entropy_bin_bounds(10, b).1, entropy_bin_bounds(10, b + 1).0);
        }
        assert!((entropy_bin_bounds(10, 1).0 - 0.664).abs() < 1e-3);
        assert_eq!(cv_bin_of(0.0), Some(0));
        assert_eq!(cv_bin_of(1.0), Some(9));
        assert_eq!(cv_bin_of(0.95), Some(9));
        assert_eq!(cv_bin_of(1.01), None);
        assert_eq!(entropy_bin_of(10, 10f64.log2()), Some(4));
    }

    #[test]
    fn matrix_is_distinct_and_informative() {
        let m = gen_matrix(4, 4, &mut rng()).unwrap();
        assert_eq!(m, gen_matrix(4, 4, &mut rng()).unwrap());
        let set: HashSet<_> = m.iter().collect();
        assert_eq!(set.len(), 4);
        for j in 0..4 {
            assert!(m.iter().any(|r| r[j]) && m.iter().any(|r| !r[j]));
        }
    }

    #[test]
    fn full_cube() {
        let m = gen_matrix(16, 4, &mut rng()).unwrap();
        let set: HashSet<_> = m.iter().collect();
        assert_eq!(set.len(), 16);
    }

    #[test]
    fn too_many_rows() {
        assert_eq!(
            gen_matrix(5, 2, &mut rng()),
            Err(GenError::TooManyRows { rows: 5, cols: 2 })
        );
    }

    #[test]
    fn priors_land_in_each_bin() {
        let mut r = rng();
        for bin in 0..ENTROPY_BINS {
            for _ in 0..20 {
                let p = gen_priors(10, bin, &mut r).unwrap();
                assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                assert!(p.iter().all(|&x| x > 0.0));
                let h = entropy(&p).unwrap();
                assert_eq!(entropy_bin_of(10, h), Some(bin), "h = {h}");
            }
        }
    }

    #[test]
    fn lowest_bin_is_spiked() {
        let mut r = rng();
        for _ in 0..20 {
            let p = gen_priors(10, 0, &mut r).unwrap();
            let max = p.iter().cloned().fold(0.0, f64::max);
            assert!(max > 0.9, "max = {max}");
        }
    }

    #[test]
    fn infeasible_priors() {
        assert!(matches!(gen_priors(2, 5, &mut rng()), Err(GenError::Infeasible(_))));
        assert!(matches!(gen_priors(1, 0, &mut rng()), Err(GenError::Infeasible(_))));
    }

    #[test]
    fn costs_land_in_each_bin() {
        let mut r = rng();
        for bin in 0..CV_BINS {
            for _ in 0..20 {
                let c = gen_costs(10, bin, &mut r).unwrap();
                assert!(c.iter().all(|&x| x > 0.0));
                assert!((c.iter().sum::<f64>() / 10.0 - 1.0).abs() < 1e-9);
                assert_eq!(cv_bin_of(coefficient_of_variation(&c)), Some(bin));
            }
        }
    }

    #[test]
    fn problems_are_deterministic() {
        let cell = GridCellSpec {
            entropy_bin: 2,
            cv_bin: 3,
            rows: 6,
            cols: 5,
            problems_per_cell: 1,
            seed: 11,
        };
        let a = gen_problem(&cell, 0).unwrap();
        let b = gen_problem(&cell, 0).unwrap();
        assert_eq!(a.to_file(), b.to_file());
        assert_ne!(a.to_file(), gen_problem(&cell, 1).unwrap().to_file());
        assert_eq!(a.labels()[0], "C1");
    }

    #[test]
    fn lowest_cell_fifty_problems() {
        let cell = GridCellSpec {
            entropy_bin: 0,
            cv_bin: 0,
            rows: 10,
            cols: 10,
            problems_per_cell: 50,
            seed: 3,
        };
        for i in 0..50 {
            let p = gen_problem(&cell, i).unwrap();
            assert!(p.warnings().is_empty());
            assert_eq!(entropy_bin_of(10, entropy(p.priors()).unwrap()), Some(0));
            assert!(coefficient_of_variation(p.costs()) < 0.1);
        }
    }
}
