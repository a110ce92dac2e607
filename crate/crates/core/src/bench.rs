//! Heuristic-versus-optimum benchmark over the entropy x cost-CV grid.

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exact::{ExactError, ExactSolver};
use crate::generator::{
    self, cv_bin_bounds, entropy_bin_bounds, GenError, GridSpec, CV_BINS, ENTROPY_BINS,
};
use crate::heuristics::HeuristicConfig;
use crate::methods::{build_tree, Method};
use crate::model::Problem;
use crate::tree::expected_cost;

/// Slack allowed below the optimum before a heuristic cost is an error.
pub const OPTIMUM_SLACK: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("optimal cost {0} is not positive")]
    NonPositiveOptimum(f64),
    #[error("heuristic cost {heuristic} is below the optimum {optimal}")]
    BelowOptimum { heuristic: f64, optimal: f64 },
    #[error(transparent)]
    Exact(#[from] ExactError),
    #[error(transparent)]
    Gen(#[from] GenError),
    #[error("bad CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("could not build worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

/// `100 (heuristic - optimal) / optimal`, with float dust clamped to zero.
pub fn relative_error(heuristic: f64, optimal: f64) -> Result<f64, BenchError> {
    if !(optimal > 0.0) {
        return Err(BenchError::NonPositiveOptimum(optimal));
    }
    if heuristic < optimal - OPTIMUM_SLACK {
        return Err(BenchError::BelowOptimum { heuristic, optimal });
    }
    Ok((100.0 * (heuristic - optimal) / optimal).max(0.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRun {
    pub method: Method,
    pub cost: f64,
    pub rel_err_pct: f64,
    pub time_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemOutcome {
    pub entropy_bin: usize,
    pub cv_bin: usize,
    pub index: usize,
    pub optimal: f64,
    pub runs: Vec<MethodRun>,
}

impl ProblemOutcome {
    pub fn run(&self, method: Method) -> Option<&MethodRun> {
        self.runs.iter().find(|r| r.method == method)
    }
}

/// Solves `problem` exactly and with each requested method.
pub fn evaluate_problem(
    problem: &Problem,
    methods: &[Method],
    config: HeuristicConfig,
) -> Result<(f64, Vec<MethodRun>), BenchError> {
    let start = Instant::now();
    let optimal = ExactSolver::new(problem)?.solve().cost;
    let dp_ms = start.elapsed().as_secs_f64() * 1e3;
    let mut runs = Vec::with_capacity(methods.len());
    for &method in methods {
        let (cost, time_ms) = if method == Method::Dp {
            (optimal, dp_ms)
        } else {
            let start = Instant::now();
            let tree = build_tree(problem, method, config)?;
            let time_ms = start.elapsed().as_secs_f64() * 1e3;
            (
                expected_cost(&tree, problem).expect("solver trees classify every row"),
                time_ms,
            )
        };
        let rel_err_pct = if problem.num_rows() < 2 {
            0.0
        } else {
            relative_error(cost, optimal)?
        };
        runs.push(MethodRun {
            method,
            cost,
            rel_err_pct,
            time_ms,
        });
    }
    Ok((optimal, runs))
}

/// One CSV row: aggregate of one method over one grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub method: Method,
    pub entropy_bin: usize,
    pub cv_bin: usize,
    pub n_problems: usize,
    pub mean_rel_err_pct: f64,
    pub median: f64,
    pub max: f64,
    pub mean_time_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchGrid {
    pub rows: usize,
    pub cols: usize,
    pub methods: Vec<Method>,
    pub cells: Vec<CellResult>,
}

impl BenchGrid {
    pub fn cell(&self, method: Method, entropy_bin: usize, cv_bin: usize) -> Option<&CellResult> {
        self.cells
            .iter()
            .find(|c| c.method == method && c.entropy_bin == entropy_bin && c.cv_bin == cv_bin)
    }

    fn weighted_mean<'a>(cells: impl Iterator<Item = &'a CellResult>) -> Option<f64> {
        let (sum, n) = cells.fold((0.0, 0usize), |(s, n), c| {
            (s + c.mean_rel_err_pct * c.n_problems as f64, n + c.n_problems)
        });
        (n > 0).then(|| sum / n as f64)
    }

    /// Mean relative error of `method` over every problem in the grid.
    pub fn overall_mean(&self, method: Method) -> Option<f64> {
        Self::weighted_mean(self.cells.iter().filter(|c| c.method == method))
    }

    /// Mean relative error of `method` over one entropy bin (all CV bins).
    pub fn entropy_bin_mean(&self, method: Method, entropy_bin: usize) -> Option<f64> {
        Self::weighted_mean(
            self.cells
                .iter()
                .filter(|c| c.method == method && c.entropy_bin == entropy_bin),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub size: usize,
    pub method: Method,
    pub instances: usize,
    pub mean_time_ms: f64,
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub spec: GridSpec,
    pub methods: Vec<Method>,
    pub heuristics: HeuristicConfig,
    /// Worker threads; `None` uses rayon's default.
    pub jobs: Option<usize>,
    /// Square sizes for the timing report; empty skips it.
    pub scaling_sizes: Vec<usize>,
    pub scaling_instances: usize,
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub grid: BenchGrid,
    /// Per-problem results in (entropy bin, cv bin, index) order.
    pub outcomes: Vec<ProblemOutcome>,
    /// Cells that could not be generated.
    pub skipped: Vec<String>,
    pub scaling: Vec<ScalingPoint>,
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Folds per-problem outcomes into one [`CellResult`] per method and cell.
/// Outcomes are sorted first, so the result does not depend on their order.
pub fn aggregate(rows: usize, cols: usize, methods: &[Method], outcomes: &[ProblemOutcome]) -> BenchGrid {
    let mut sorted: Vec<&ProblemOutcome> = outcomes.iter().collect();
    sorted.sort_by_key(|o| (o.entropy_bin, o.cv_bin, o.index));
    let mut cells = Vec::new();
    for &method in methods {
        for e in 0..ENTROPY_BINS {
            for c in 0..CV_BINS {
                let runs: Vec<&MethodRun> = sorted
                    .iter()
                    .filter(|o| o.entropy_bin == e && o.cv_bin == c)
                    .filter_map(|o| o.run(method))
                    .collect();
                if runs.is_empty() {
                    continue;
                }
                let n = runs.len() as f64;
                let mut errs: Vec<f64> = runs.iter().map(|r| r.rel_err_pct).collect();
                let mean = errs.iter().sum::<f64>() / n;
                errs.sort_by(f64::total_cmp);
                cells.push(CellResult {
                    method,
                    entropy_bin: e,
                    cv_bin: c,
                    n_problems: runs.len(),
                    mean_rel_err_pct: mean,
                    median: median(&errs),
                    max: *errs.last().expect("non-empty"),
                    mean_time_ms: runs.iter().map(|r| r.time_ms).sum::<f64>() / n,
                });
            }
        }
    }
    BenchGrid {
        rows,
        cols,
        methods: methods.to_vec(),
        cells,
    }
}

fn run_grid_inner(config: &BenchConfig) -> Result<BenchReport, BenchError> {
    let spec = &config.spec;
    let mut skipped = Vec::new();
    let mut jobs = Vec::new();
    for cell in spec.cells() {
        // Probe one problem so an infeasible cell is skipped as a whole.
        match generator::gen_problem(&cell, 0) {
            Ok(_) => jobs.extend((0..spec.problems_per_cell).map(|i| (cell, i))),
            Err(e) => skipped.push(format!(
                "entropy bin {} / cv bin {}: {e}",
                cell.entropy_bin, cell.cv_bin
            )),
        }
    }
    let outcomes: Vec<ProblemOutcome> = jobs
        .into_par_iter()
        .map(|(cell, index)| {
            let problem = generator::gen_problem(&cell, index)?;
            let (optimal, runs) = evaluate_problem(&problem, &config.methods, config.heuristics)?;
            Ok(ProblemOutcome {
                entropy_bin: cell.entropy_bin,
                cv_bin: cell.cv_bin,
                index,
                optimal,
                runs,
            })
        })
        .collect::<Result<_, BenchError>>()?;
    let grid = aggregate(spec.rows, spec.cols, &config.methods, &outcomes);
    let scaling = if config.scaling_sizes.is_empty() {
        Vec::new()
    } else {
        scaling_report(
            &config.scaling_sizes,
            config.scaling_instances,
            spec.seed,
            &config.methods,
            config.heuristics,
        )?
    };
    Ok(BenchReport {
        grid,
        outcomes,
        skipped,
        scaling,
    })
}

/// Generates and solves every problem of the grid. Deterministic apart from
/// the timing columns.
pub fn run_grid(config: &BenchConfig) -> Result<BenchReport, BenchError> {
    match config.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()?
            .install(|| run_grid_inner(config)),
        None => run_grid_inner(config),
    }
}

/// Mean single-threaded solve time per method on `instances` square problems
/// of each size (middle entropy and CV bins). The first evaluation of each
/// method at each size is a warm-up and is not timed.
pub fn scaling_report(
    sizes: &[usize],
    instances: usize,
    seed: u64,
    methods: &[Method],
    config: HeuristicConfig,
) -> Result<Vec<ScalingPoint>, BenchError> {
    let mut out = Vec::new();
    for &size in sizes {
        let cell = generator::GridCellSpec {
            entropy_bin: 2,
            cv_bin: 5,
            rows: size,
            cols: size,
            problems_per_cell: instances,
            seed,
        };
        let problems: Vec<Problem> = (0..instances.max(1))
            .map(|i| generator::gen_problem(&cell, i))
            .collect::<Result<_, _>>()?;
        for &method in methods {
            build_tree(&problems[0], method, config)?;
            let start = Instant::now();
            for p in &problems {
                build_tree(p, method, config)?;
            }
            let total = start.elapsed().as_secs_f64() * 1e3;
            out.push(ScalingPoint {
                size,
                method,
                instances: problems.len(),
                mean_time_ms: total / problems.len() as f64,
            });
        }
    }
    Ok(out)
}

pub const CSV_HEADER: [&str; 8] = [
    "method",
    "entropy_bin",
    "cv_bin",
    "n_problems",
    "mean_rel_err_pct",
    "median",
    "max",
    "mean_time_ms",
];

/// CSV rendering; floats use the shortest representation that round-trips.
pub fn to_csv(cells: &[CellResult]) -> String {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("in-memory write");
    for c in cells {
        w.serialize(c).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}

pub fn from_csv(text: &str) -> Result<Vec<CellResult>, BenchError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

/// Markdown tables, one per method: rows are entropy bins, columns CV bins.
pub fn to_markdown(grid: &BenchGrid) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# Mean relative percentage error ({}x{} problems)\n",
        grid.rows, grid.cols
    );
    for &method in &grid.methods {
        let _ = writeln!(out, "## {method}\n");
        let _ = write!(out, "| Entropy \\ CV of costs |");
        for c in 0..CV_BINS {
            let (lo, hi) = cv_bin_bounds(c);
            let _ = write!(out, " {lo:.1}-{hi:.1} |");
        }
        let _ = writeln!(out, " all |");
        let _ = writeln!(out, "|---|{}---|", "---:|".repeat(CV_BINS));
        for e in 0..ENTROPY_BINS {
            let (lo, hi) = entropy_bin_bounds(grid.rows, e);
            let _ = write!(out, "| {lo:.2}-{hi:.2} |");
            for c in 0..CV_BINS {
                match grid.cell(method, e, c) {
                    Some(cell) => {
                        let _ = write!(out, " {:.2} |", cell.mean_rel_err_pct);
                    }
                    None => out.push_str(" - |"),
                }
            }
            match grid.entropy_bin_mean(method, e) {
                Some(m) => {
                    let _ = writeln!(out, " {m:.2} |");
                }
                None => out.push_str(" - |\n"),
            }
        }
        if let Some(m) = grid.overall_mean(method) {
            let _ = writeln!(out, "\noverall mean: {m:.3}%");
        }
        out.push('\n');
    }
    out
}

pub fn scaling_to_csv(points: &[ScalingPoint]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for p in points {
        w.serialize(p).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}
