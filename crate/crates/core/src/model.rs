//! The classification problem `(A, p, c)` and the statistical primitives the
//! solvers share: survivor sets, column splits, entropy and cost dispersion.

use std::fmt;
use std::hash::{Hash, Hasher};

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance on the sum of the prior vector.
pub const PRIOR_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("invalid problem: {0}")]
    Invalid(ValidationReport),
    #[error("malformed problem file: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("empty distribution")]
    EmptyDistribution,
    #[error("weight {0} is negative or not finite")]
    BadWeight(f64),
}

/// On-disk problem representation.
///
/// Matrix entries are strict 0/1 integers; `column_names` is optional display
/// metadata that no solver reads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub labels: Vec<String>,
    pub matrix: Vec<Vec<u8>>,
    pub p: Vec<f64>,
    pub c: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub column_names: Option<Vec<String>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub severity: Severity,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    fn error(&mut self, message: impl Into<String>) {
        self.violations.push(Violation {
            severity: Severity::Error,
            message: message.into(),
        });
    }

    fn warn(&mut self, message: impl Into<String>) {
        self.violations.push(Violation {
            severity: Severity::Warning,
            message: message.into(),
        });
    }

    /// True when there are no error-severity violations.
    pub fn is_valid(&self) -> bool {
        self.errors().next().is_none()
    }

    pub fn errors(&self) -> impl Iterator<Item = &Violation> {
        self.violations
            .iter()
            .filter(|v| v.severity == Severity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Violation> {
        self.violations
            .iter()
            .filter(|v| v.severity == Severity::Warning)
    }

    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for v in &self.violations {
            if !first {
                f.write_str("; ")?;
            }
            first = false;
            let tag = match v.severity {
                Severity::Error => "error",
                Severity::Warning => "warning",
            };
            write!(f, "{tag}: {}", v.message)?;
        }
        Ok(())
    }
}

/// Checks a problem file against every structural invariant. Constant columns
/// are reported as warnings only.
pub fn validate(file: &ProblemFile) -> ValidationReport {
    let mut report = ValidationReport::default();
    let rows = file.matrix.len();
    if rows == 0 {
        report.error("matrix has no rows");
        return report;
    }
    let cols = file.matrix[0].len();
    if cols == 0 {
        report.error("matrix has no columns");
    }
    let mut well_formed = true;
    for (i, row) in file.matrix.iter().enumerate() {
        if row.len() != cols {
            report.error(format!(
                "ragged matrix: row {i} has {} entries, expected {cols}",
                row.len()
            ));
            well_formed = false;
        }
        for (j, &v) in row.iter().enumerate() {
            if v > 1 {
                report.error(format!("entry ({i},{j}) is {v}, expected 0 or 1"));
                well_formed = false;
            }
        }
    }
    if file.labels.len() != rows {
        report.error(format!(
            "{} labels for {rows} rows",
            file.labels.len()
        ));
    }
    for i in 0..file.labels.len() {
        for k in (i + 1)..file.labels.len() {
            if file.labels[i] == file.labels[k] {
                report.error(format!("duplicate labels {i},{k} ({:?})", file.labels[i]));
            }
        }
    }
    if file.p.len() != rows {
        report.error(format!("{} priors for {rows} rows", file.p.len()));
    } else {
        let mut sum = 0.0;
        for (i, &p) in file.p.iter().enumerate() {
            if !p.is_finite() || p < 0.0 {
                report.error(format!("prior {i} is {p}, expected a non-negative number"));
            }
            sum += p;
        }
        if (sum - 1.0).abs() > PRIOR_SUM_TOLERANCE {
            report.error(format!("priors sum to {sum}, expected 1"));
        }
    }
    if file.c.len() != cols {
        report.error(format!("{} costs for {cols} columns", file.c.len()));
    }
    for (j, &c) in file.c.iter().enumerate() {
        if !c.is_finite() || c <= 0.0 {
            report.error(format!("cost {j} is {c}, expected a positive number"));
        }
    }
    if let Some(names) = &file.column_names {
        if names.len() != cols {
            report.error(format!("{} column names for {cols} columns", names.len()));
        }
    }
    if !well_formed {
        return report;
    }
    for i in 0..rows {
        for k in (i + 1)..rows {
            if file.matrix[i] == file.matrix[k] {
                report.error(format!("duplicate rows {i},{k}"));
            }
        }
    }
    let constant: Vec<usize> = (0..cols)
        .filter(|&j| file.matrix.iter().all(|r| r[j] == file.matrix[0][j]))
        .collect();
    if cols > 0 && constant.len() == cols {
        report.warn("all columns informationless");
    } else {
        for j in constant {
            report.warn(format!("column {j} is informationless (constant)"));
        }
    }
    report
}

/// A validated classification problem: distinct binary rows, one per class,
/// with prior class probabilities and per-column inspection costs.
#[derive(Debug, Clone)]
pub struct Problem {
    labels: Vec<String>,
    rows: Vec<Vec<bool>>,
    priors: Vec<f64>,
    costs: Vec<f64>,
    column_names: Option<Vec<String>>,
    column_ones: Vec<FixedBitSet>,
    warnings: Vec<Violation>,
}

impl Problem {
    pub fn new(
        labels: Vec<String>,
        rows: Vec<Vec<bool>>,
        priors: Vec<f64>,
        costs: Vec<f64>,
    ) -> Result<Self, ProblemError> {
        let matrix = rows
            .iter()
            .map(|r| r.iter().map(|&b| u8::from(b)).collect())
            .collect();
        Self::from_file(ProblemFile {
            labels,
            matrix,
            p: priors,
            c: costs,
            column_names: None,
        })
    }

    pub fn from_file(file: ProblemFile) -> Result<Self, ProblemError> {
        let report = validate(&file);
        if !report.is_valid() {
            return Err(ProblemError::Invalid(report));
        }
        let rows: Vec<Vec<bool>> = file
            .matrix
            .iter()
            .map(|r| r.iter().map(|&v| v == 1).collect())
            .collect();
        let n_rows = rows.len();
        let n_cols = rows[0].len();
        let column_ones = (0..n_cols)
            .map(|j| {
                let mut bits = FixedBitSet::with_capacity(n_rows);
                for (i, row) in rows.iter().enumerate() {
                    bits.set(i, row[j]);
                }
                bits
            })
            .collect();
        Ok(Self {
            labels: file.labels,
            rows,
            priors: file.p,
            costs: file.c,
            column_names: file.column_names,
            column_ones,
            warnings: report.warnings().cloned().collect(),
        })
    }

    pub fn from_json(text: &str) -> Result<Self, ProblemError> {
        Self::from_file(serde_json::from_str(text)?)
    }

    pub fn to_file(&self) -> ProblemFile {
        ProblemFile {
            labels: self.labels.clone(),
            matrix: self
                .rows
                .iter()
                .map(|r| r.iter().map(|&b| u8::from(b)).collect())
                .collect(),
            p: self.priors.clone(),
            c: self.costs.clone(),
            column_names: self.column_names.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("problem serializes")
    }

    /// Number of rows (classes), `L`.
    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    /// Number of columns (inspectable properties), `N`.
    pub fn num_cols(&self) -> usize {
        self.costs.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, row: usize) -> &str {
        &self.labels[row]
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    pub fn cost(&self, column: usize) -> f64 {
        self.costs[column]
    }

    pub fn row(&self, row: usize) -> &[bool] {
        &self.rows[row]
    }

    pub fn value(&self, row: usize, column: usize) -> bool {
        self.rows[row][column]
    }

    pub fn column_names(&self) -> Option<&[String]> {
        self.column_names.as_deref()
    }

    /// Rows having a 1 in `column`.
    pub fn column_ones(&self, column: usize) -> &FixedBitSet {
        &self.column_ones[column]
    }

    /// Warnings raised during validation (constant columns).
    pub fn warnings(&self) -> &[Violation] {
        &self.warnings
    }

    /// Total prior mass of a set of rows.
    pub fn mass(&self, rows: &FixedBitSet) -> f64 {
        rows.ones().map(|i| self.priors[i]).sum()
    }

    pub fn survivors(&self, rows: FixedBitSet) -> SurvivorSet {
        let mass = self.mass(&rows);
        SurvivorSet { rows, mass }
    }

    pub fn all_rows(&self) -> SurvivorSet {
        let mut rows = FixedBitSet::with_capacity(self.num_rows());
        rows.insert_range(..);
        self.survivors(rows)
    }

    pub fn singleton(&self, row: usize) -> SurvivorSet {
        let mut rows = FixedBitSet::with_capacity(self.num_rows());
        rows.insert(row);
        self.survivors(rows)
    }

    /// A column is informative for `survivors` when it takes both values
    /// among them.
    pub fn is_informative(&self, survivors: &SurvivorSet, column: usize) -> bool {
        let ones = survivors.rows.intersection_count(&self.column_ones[column]);
        ones > 0 && ones < survivors.len()
    }

    pub fn informative_columns<'a>(
        &'a self,
        survivors: &'a SurvivorSet,
    ) -> impl Iterator<Item = usize> + 'a {
        (0..self.num_cols()).filter(move |&j| self.is_informative(survivors, j))
    }

    /// Partitions `survivors` by their value in `column`.
    pub fn split(&self, survivors: &SurvivorSet, column: usize) -> ColumnSplit {
        let mut one = survivors.rows.clone();
        one.intersect_with(&self.column_ones[column]);
        let mut zero = survivors.rows.clone();
        zero.difference_with(&self.column_ones[column]);
        let one = self.survivors(one);
        let zero = self.survivors(zero);
        let (w0, w1) = if survivors.mass > 0.0 {
            let w0 = zero.mass / survivors.mass;
            (w0, 1.0 - w0)
        } else {
            let w0 = zero.len() as f64 / survivors.len().max(1) as f64;
            (w0, 1.0 - w0)
        };
        ColumnSplit {
            column,
            zero,
            one,
            w0,
            w1,
        }
    }

    /// Rows of `survivors` consistent with observing `value` in `column`.
    pub fn restrict(&self, survivors: &SurvivorSet, column: usize, value: bool) -> SurvivorSet {
        let split = self.split(survivors, column);
        if value {
            split.one
        } else {
            split.zero
        }
    }

    /// Priors of `survivors` renormalized to sum to one. Zero-mass survivor
    /// sets fall back to uniform weights so heuristics still have a
    /// well-defined distribution to work with.
    pub fn conditional_weights(&self, survivors: &SurvivorSet) -> Vec<(usize, f64)> {
        if survivors.mass > 0.0 {
            survivors
                .iter()
                .map(|i| (i, self.priors[i] / survivors.mass))
                .collect()
        } else {
            let n = survivors.len() as f64;
            survivors.iter().map(|i| (i, 1.0 / n)).collect()
        }
    }

    /// Classification entropy (bits) of the renormalized survivor priors.
    pub fn survivor_entropy(&self, survivors: &SurvivorSet) -> f64 {
        let weights: Vec<f64> = self
            .conditional_weights(survivors)
            .into_iter()
            .map(|(_, w)| w)
            .collect();
        entropy(&weights).unwrap_or(0.0)
    }
}

/// Rows still consistent with the observations made so far, with their total
/// prior mass cached. Equality and hashing consider the rows only.
#[derive(Debug, Clone)]
pub struct SurvivorSet {
    rows: FixedBitSet,
    mass: f64,
}

impl SurvivorSet {
    pub fn len(&self) -> usize {
        self.rows.count_ones(..)
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_clear()
    }

    pub fn contains(&self, row: usize) -> bool {
        self.rows.contains(row)
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn bits(&self) -> &FixedBitSet {
        &self.rows
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.rows.ones()
    }

    pub fn first(&self) -> Option<usize> {
        self.rows.minimum()
    }

    pub fn to_vec(&self) -> Vec<usize> {
        self.iter().collect()
    }
}

impl PartialEq for SurvivorSet {
    fn eq(&self, other: &Self) -> bool {
        self.rows == other.rows
    }
}

impl Eq for SurvivorSet {}

impl Hash for SurvivorSet {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.rows.hash(state);
    }
}

/// Result of partitioning a survivor set on one column.
#[derive(Debug, Clone)]
pub struct ColumnSplit {
    pub column: usize,
    pub zero: SurvivorSet,
    pub one: SurvivorSet,
    /// Conditional probability that the column reads 0.
    pub w0: f64,
    /// Conditional probability that the column reads 1.
    pub w1: f64,
}

impl ColumnSplit {
    pub fn is_informative(&self) -> bool {
        !self.zero.is_empty() && !self.one.is_empty()
    }
}

/// Shannon entropy in bits of `weights` after normalization; `0 log 0 = 0`.
pub fn entropy(weights: &[f64]) -> Result<f64, StatsError> {
    let mut total = 0.0;
    for &w in weights {
        if !w.is_finite() || w < 0.0 {
            return Err(StatsError::BadWeight(w));
        }
        total += w;
    }
    if total <= 0.0 {
        return Err(StatsError::EmptyDistribution);
    }
    let h = weights
        .iter()
        .filter(|&&w| w > 0.0)
        .map(|&w| {
            let q = w / total;
            -q * q.log2()
        })
        .sum::<f64>();
    Ok(h.max(0.0))
}

/// Binary entropy of a split with branch probabilities `(w, 1 - w)`.
pub fn binary_entropy(w: f64) -> f64 {
    let term = |q: f64| if q > 0.0 { -q * q.log2() } else { 0.0 };
    term(w) + term(1.0 - w)
}

/// Population standard deviation divided by the mean.
pub fn coefficient_of_variation(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "coefficient of variation of an empty vector");
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    var.sqrt() / mean
}

#[cfg(test)]
mod tests {
    use super::*;

    fn worked() -> Problem {
        Problem::from_json(
            r#"{"labels":["a","b","c","d"],
                "matrix":[[1,0,0,1],[0,1,0,1],[1,0,1,0],[0,1,1,1]],
                "p":[0.4,0.2,0.3,0.1],"c":[3,1,4,1]}"#,
        )
        .unwrap()
    }

    fn file(matrix: Vec<Vec<u8>>, p: Vec<f64>, c: Vec<f64>) -> ProblemFile {
        ProblemFile {
            labels: (0..matrix.len()).map(|i| format!("r{i}")).collect(),
            matrix,
            p,
            c,
            column_names: None,
        }
    }

    #[test]
    fn worked_problem_is_clean() {
        let p = worked();
        assert!(validate(&p.to_file()).is_empty());
        assert!(p.warnings().is_empty());
    }

    #[test]
    fn single_row_warns_informationless() {
        let report = validate(&file(vec![vec![1, 0]], vec![1.0], vec![1.0, 2.0]));
        assert!(report.is_valid());
        let w: Vec<_> = report.warnings().map(|v| v.message.as_str()).collect();
        assert_eq!(w, vec!["all columns informationless"]);
    }

    #[test]
    fn duplicate_rows_rejected() {
        let report = validate(&file(
            vec![vec![1, 0], vec![1, 0]],
            vec![0.5, 0.5],
            vec![1.0, 1.0],
        ));
        assert!(!report.is_valid());
        assert!(report.errors().any(|v| v.message == "duplicate rows 0,1"));
    }

    #[test]
    fn bad_costs_and_priors() {
        let report = validate(&file(
            vec![vec![1, 0], vec![0, 1]],
            vec![0.5, 0.6],
            vec![0.0, -1.0],
        ));
        let msgs: Vec<_> = report.errors().map(|v| v.message.clone()).collect();
        assert_eq!(msgs.len(), 3, "{msgs:?}");
        assert!(msgs.iter().any(|m| m.starts_with("priors sum")));
    }

    #[test]
    fn ragged_and_non_binary_rejected() {
        let err = Problem::from_json(
            r#"{"labels":["a","b"],"matrix":[[1,0],[1]],"p":[0.5,0.5],"c":[1,1]}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("ragged"));
        let err = Problem::from_json(
            r#"{"labels":["a","b"],"matrix":[[1,0],[2,1]],"p":[0.5,0.5],"c":[1,1]}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("expected 0 or 1"));
        assert!(matches!(
            Problem::from_json(r#"{"labels":["a"],"matrix":[[true]],"p":[1],"c":[1]}"#),
            Err(ProblemError::Json(_))
        ));
    }

    #[test]
    fn constant_column_is_a_warning() {
        let p = Problem::new(
            vec!["x".into(), "y".into()],
            vec![vec![true, true], vec![false, true]],
            vec![0.5, 0.5],
            vec![1.0, 1.0],
        )
        .unwrap();
        assert_eq!(p.warnings().len(), 1);
        assert!(!p.is_informative(&p.all_rows(), 1));
        assert!(p.is_informative(&p.all_rows(), 0));
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(entropy(&[0.5, 0.5]).unwrap(), 1.0);
        assert_eq!(entropy(&[1.0]).unwrap(), 0.0);
        assert!((entropy(&[0.4, 0.2, 0.3, 0.1]).unwrap() - 1.846_439_3).abs() < 1e-4);
        assert_eq!(entropy(&[0.0, 0.0]), Err(StatsError::EmptyDistribution));
        assert!(matches!(entropy(&[-1.0, 2.0]), Err(StatsError::BadWeight(_))));
    }

    #[test]
    fn cv_examples() {
        assert_eq!(coefficient_of_variation(&[1.0, 1.0, 1.0, 1.0]), 0.0);
        assert!((coefficient_of_variation(&[3.0, 1.0, 4.0, 1.0]) - 0.5774).abs() < 1e-3);
    }

    #[test]
    fn split_on_second_column() {
        let p = worked();
        let s = p.split(&p.all_rows(), 1);
        assert_eq!(s.zero.to_vec(), vec![0, 2]);
        assert_eq!(s.one.to_vec(), vec![1, 3]);
        assert!((s.w0 - 0.7).abs() < 1e-12);
        assert!((s.w1 - 0.3).abs() < 1e-12);
        assert!(s.is_informative());
    }

    #[test]
    fn split_singleton_and_uninformative() {
        let p = worked();
        let s = p.split(&p.singleton(2), 0);
        assert!(!s.is_informative());
        assert!(s.w0 == 0.0 || s.w0 == 1.0);

        let mut rows = FixedBitSet::with_capacity(4);
        rows.insert(0);
        rows.insert(1);
        let s = p.split(&p.survivors(rows), 3);
        assert!(s.zero.is_empty());
        assert_eq!(s.one.to_vec(), vec![0, 1]);
    }

    #[test]
    fn zero_mass_survivors_use_uniform_weights() {
        let p = Problem::new(
            vec!["x".into(), "y".into(), "z".into()],
            vec![vec![true, false], vec![false, true], vec![false, false]],
            vec![1.0, 0.0, 0.0],
            vec![1.0, 1.0],
        )
        .unwrap();
        let rest = p.restrict(&p.all_rows(), 0, false);
        assert_eq!(rest.mass(), 0.0);
        let w = p.conditional_weights(&rest);
        assert_eq!(w, vec![(1, 0.5), (2, 0.5)]);
        let s = p.split(&rest, 1);
        assert_eq!(s.w0, 0.5);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn random_problem() -> impl Strategy<Value = Problem> {
            (2usize..7, 2usize..7).prop_flat_map(|(l, n)| {
                let rows = proptest::sample::subsequence((0u32..(1 << n)).collect::<Vec<_>>(), l.min(1 << n));
                (rows, proptest::collection::vec(0.01f64..1.0, l), Just(n))
            }).prop_map(|(rows, w, n)| {
                let l = rows.len();
                let total: f64 = w[..l].iter().sum();
                Problem::new(
                    (0..l).map(|i| format!("r{i}")).collect(),
                    rows.iter().map(|r| (0..n).map(|j| r >> j & 1 == 1).collect()).collect(),
                    w[..l].iter().map(|x| x / total).collect(),
                    vec![1.0; n],
                ).unwrap()
            })
        }

        proptest! {
            #[test]
            fn split_conserves_mass(p in random_problem(), col in 0usize..7) {
                let col = col % p.num_cols();
                let all = p.all_rows();
                let s = p.split(&all, col);
                prop_assert!((s.zero.mass() + s.one.mass() - all.mass()).abs() < 1e-12);
                prop_assert!((s.w0 + s.w1 - 1.0).abs() < 1e-12);
                prop_assert_eq!(s.zero.len() + s.one.len(), all.len());
                // splitting a branch again on the same column leaves the other side empty
                let again = p.split(&s.one, col);
                prop_assert!(again.zero.is_empty());
            }

            #[test]
            fn entropy_scale_and_permutation(w in proptest::collection::vec(0.0f64..5.0, 1..8), k in 0.01f64..100.0) {
                prop_assume!(w.iter().any(|&x| x > 0.0));
                let h = entropy(&w).unwrap();
                let scaled: Vec<f64> = w.iter().map(|x| x * k).collect();
                prop_assert!((entropy(&scaled).unwrap() - h).abs() < 1e-9);
                let mut rev = w.clone();
                rev.reverse();
                prop_assert!((entropy(&rev).unwrap() - h).abs() < 1e-9);
                let positive = w.iter().filter(|&&x| x > 0.0).count() as f64;
                prop_assert!(h <= positive.log2() + 1e-9);
            }

            #[test]
            fn uniform_entropy_is_maximal(k in 1usize..20) {
                let h = entropy(&vec![1.0; k]).unwrap();
                prop_assert!((h - (k as f64).log2()).abs() < 1e-12);
            }
        }
    }
}
