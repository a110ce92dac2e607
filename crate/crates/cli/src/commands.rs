use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write as _};
use std::path::Path;

use classtree::bench::{self, BenchConfig, BenchError};
use classtree::exact::ExactError;
use classtree::generator::{self, GridSpec, RNG_DESCRIPTION};
use classtree::methods::solve;
use classtree::model::{coefficient_of_variation, entropy};
use classtree::reduction::{decide_cover, reduce, ReductionError, SetCoverInstance};
use classtree::{verify, ClassTree, HeuristicConfig, Problem};
use classtree_service::ServiceConfig;
use serde::Serialize;
use serde_json::json;

use crate::{
    BenchArgs, Cli, Command, EvalArgs, Failure, Format, GenArgs, GridArgs, ReduceArgs, ServeArgs,
    SolveArgs,
};

type Outcome = Result<(), Failure>;

macro_rules! say {
    ($out:expr, $($arg:tt)*) => {{
        let _ = writeln!($out, $($arg)*);
    }};
}

macro_rules! put {
    ($out:expr, $($arg:tt)*) => {{
        let _ = write!($out, $($arg)*);
    }};
}

pub fn run(cli: &Cli) -> Outcome {
    let config = HeuristicConfig {
        entropy_rule: cli.entropy_rule,
    };
    let mut out = String::new();
    let result = match &cli.command {
        Command::Solve(args) => solve_cmd(&mut out, cli.format, config, args),
        Command::Eval(args) => eval_cmd(&mut out, cli.format, args),
        Command::Gen(args) => gen_cmd(&mut out, cli.format, cli.seed, args),
        Command::Bench(args) => bench_cmd(&mut out, cli.format, cli.seed, config, args),
        Command::ReduceSetcover(args) => reduce_cmd(&mut out, cli.format, args),
        Command::Serve(args) => serve_cmd(args),
    };
    emit(&out);
    result
}

/// Writes `text` to stdout; a closed pipe is not an error.
fn emit(text: &str) {
    let mut stdout = io::stdout().lock();
    if let Err(e) = stdout
        .write_all(text.as_bytes())
        .and_then(|()| stdout.flush())
    {
        if e.kind() != io::ErrorKind::BrokenPipe {
            eprintln!("classtree: cannot write output: {e}");
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn write(path: &Path, contents: &str) -> Outcome {
    fs::write(path, contents).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn load_problem(path: &Path) -> Result<Problem, Failure> {
    let problem = Problem::from_json(&read(path)?)
        .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    for w in problem.warnings() {
        eprintln!("warning: {}", w.message);
    }
    Ok(problem)
}

fn pretty<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("value serializes")
}

fn exact_failure(e: ExactError) -> Failure {
    Failure::Input(e.to_string())
}

fn solve_cmd(
    out: &mut String,
    format: Format,
    config: HeuristicConfig,
    args: &SolveArgs,
) -> Outcome {
    let problem = load_problem(&args.input)?;
    let solved = solve(&problem, args.method, config).map_err(exact_failure)?;
    if let Some(path) = &args.output {
        write(path, &(solved.tree.to_json() + "\n"))?;
    }
    match format {
        Format::Text => {
            put!(out, "{}", solved.tree.render(&problem));
            say!(out, "expected cost: {:.6}", solved.cost);
        }
        Format::Csv => {
            say!(out, "method,cost");
            say!(out, "{},{:.6}", args.method, solved.cost);
        }
        Format::Json => say!(
            out,
            "{}",
            pretty(&json!({
                "method": args.method,
                "cost": solved.cost,
                "tree": solved.tree,
            }))
        ),
    }
    Ok(())
}

fn eval_cmd(out: &mut String, format: Format, args: &EvalArgs) -> Outcome {
    let problem = load_problem(&args.input)?;
    let tree: ClassTree = serde_json::from_str(&read(&args.tree)?)
        .map_err(|e| Failure::Input(format!("{}: malformed tree: {e}", args.tree.display())))?;
    let check = verify(&tree, &problem);
    let cost = check
        .valid
        .then(|| classtree::expected_cost(&tree, &problem).expect("verified tree"));
    let failing = check
        .failing_row
        .map(|r| (r + 1, problem.label(r).to_string()));
    let error = check.error.as_ref().map(ToString::to_string);
    match format {
        Format::Text => match cost {
            Some(c) => {
                say!(out, "valid");
                say!(out, "expected cost: {c:.6}");
            }
            None => {
                say!(out, "invalid");
                if let Some((row, label)) = &failing {
                    say!(out, "failing row: {row} ({label})");
                }
                if let Some(e) = &error {
                    say!(out, "{e}");
                }
            }
        },
        Format::Csv => {
            say!(out, "valid,failing_row,cost");
            say!(
                out,
                "{},{},{}",
                check.valid,
                failing
                    .as_ref()
                    .map(|f| f.0.to_string())
                    .unwrap_or_default(),
                cost.map(|c| format!("{c:.6}")).unwrap_or_default()
            );
        }
        Format::Json => say!(
            out,
            "{}",
            pretty(&json!({
                "valid": check.valid,
                "failingRow": failing.as_ref().map(|f| f.0),
                "failingLabel": failing.as_ref().map(|f| &f.1),
                "error": error,
                "cost": cost,
            }))
        ),
    }
    if check.valid {
        Ok(())
    } else {
        Err(Failure::Domain("tree is invalid".into()))
    }
}

fn grid_spec(seed: u64, grid: &GridArgs) -> GridSpec {
    GridSpec {
        rows: grid.rows as usize,
        cols: grid.cols as usize,
        problems_per_cell: grid.per_cell,
        seed,
    }
}

fn create_dir(dir: &Path) -> Outcome {
    fs::create_dir_all(dir).map_err(|e| Failure::Input(format!("{}: {e}", dir.display())))
}

#[derive(Serialize)]
struct GeneratedEntry {
    file: String,
    entropy_bin: usize,
    cv_bin: usize,
    index: usize,
    entropy: f64,
    cv: f64,
}

fn gen_cmd(out: &mut String, format: Format, seed: u64, args: &GenArgs) -> Outcome {
    let spec = grid_spec(seed, &args.grid);
    create_dir(&args.grid.out)?;
    let mut entries = Vec::new();
    let mut skipped = Vec::new();
    'cells: for cell in spec.cells() {
        let mut problems = Vec::with_capacity(spec.problems_per_cell);
        for index in 0..spec.problems_per_cell {
            match generator::gen_problem(&cell, index) {
                Ok(p) => problems.push(p),
                Err(e) => {
                    skipped.push(format!(
                        "entropy bin {} / cv bin {}: {e}",
                        cell.entropy_bin, cell.cv_bin
                    ));
                    continue 'cells;
                }
            }
        }
        for (index, problem) in problems.into_iter().enumerate() {
            let file = format!("e{}-cv{}-{index:04}.json", cell.entropy_bin, cell.cv_bin);
            write(&args.grid.out.join(&file), &(problem.to_json() + "\n"))?;
            entries.push(GeneratedEntry {
                file,
                entropy_bin: cell.entropy_bin,
                cv_bin: cell.cv_bin,
                index,
                entropy: entropy(problem.priors()).expect("generated priors are positive"),
                cv: coefficient_of_variation(problem.costs()),
            });
        }
    }
    let manifest = json!({
        "seed": seed,
        "rng": RNG_DESCRIPTION,
        "spec": spec,
        "version": env!("CARGO_PKG_VERSION"),
        "problems": entries,
        "skipped": skipped,
    });
    write(
        &args.grid.out.join("manifest.json"),
        &(pretty(&manifest) + "\n"),
    )?;
    for s in &skipped {
        eprintln!("warning: skipped {s}");
    }
    match format {
        Format::Text => say!(
            out,
            "wrote {} problems to {}",
            entries.len(),
            args.grid.out.display()
        ),
        Format::Csv => {
            say!(out, "file,entropy_bin,cv_bin,index,entropy,cv");
            for e in &entries {
                say!(
                    out,
                    "{},{},{},{},{},{}",
                    e.file,
                    e.entropy_bin,
                    e.cv_bin,
                    e.index,
                    e.entropy,
                    e.cv
                );
            }
        }
        Format::Json => say!(out, "{}", pretty(&manifest)),
    }
    Ok(())
}

/// Square sizes timed by `bench` run from this up to the grid size in steps of 2.
const SCALING_MIN: usize = 4;
const SCALING_INSTANCES: usize = 5;

fn bench_cmd(
    out: &mut String,
    format: Format,
    seed: u64,
    heuristics: HeuristicConfig,
    args: &BenchArgs,
) -> Outcome {
    let spec = grid_spec(seed, &args.grid);
    let mut methods = args.methods.clone();
    methods.sort();
    methods.dedup();
    let config = BenchConfig {
        spec,
        methods: methods.clone(),
        heuristics,
        jobs: args.jobs,
        scaling_sizes: (SCALING_MIN..=spec.rows.min(spec.cols))
            .step_by(2)
            .collect(),
        scaling_instances: SCALING_INSTANCES,
    };
    let report = bench::run_grid(&config).map_err(|e| match e {
        BenchError::BelowOptimum { .. } | BenchError::NonPositiveOptimum(_) => {
            Failure::Domain(e.to_string())
        }
        other => Failure::Input(other.to_string()),
    })?;
    create_dir(&args.grid.out)?;
    let csv = bench::to_csv(&report.grid.cells);
    let tables = bench::to_markdown(&report.grid);
    let manifest = json!({
        "seed": seed,
        "rng": RNG_DESCRIPTION,
        "spec": spec,
        "methods": methods,
        "entropyRule": heuristics.entropy_rule.to_string(),
        "version": env!("CARGO_PKG_VERSION"),
        "skipped": report.skipped,
    });
    write(&args.grid.out.join("grid.csv"), &csv)?;
    write(&args.grid.out.join("tables.md"), &tables)?;
    write(
        &args.grid.out.join("scaling.csv"),
        &bench::scaling_to_csv(&report.scaling),
    )?;
    write(
        &args.grid.out.join("manifest.json"),
        &(pretty(&manifest) + "\n"),
    )?;
    for s in &report.skipped {
        eprintln!("warning: skipped {s}");
    }
    match format {
        Format::Text => put!(out, "{tables}"),
        Format::Csv => put!(out, "{csv}"),
        Format::Json => say!(out, "{}", pretty(&report.grid)),
    }
    Ok(())
}

fn one_based(columns: &[usize]) -> Vec<usize> {
    columns.iter().map(|j| j + 1).collect()
}

fn reduce_cmd(out: &mut String, format: Format, args: &ReduceArgs) -> Outcome {
    let instance: SetCoverInstance = serde_json::from_str(&read(&args.input)?).map_err(|e| {
        Failure::Input(format!(
            "{}: malformed set cover instance: {e}",
            args.input.display()
        ))
    })?;
    let input_failure = |e: ReductionError| Failure::Input(e.to_string());
    let uncovered = instance.uncovered();
    let decision = decide_cover(&instance).map_err(input_failure)?;
    // An element in no subset collides with the zero row, so only covered
    // instances have a reduced problem.
    let problem = if uncovered.is_empty() {
        Some(reduce(&instance).map_err(input_failure)?)
    } else {
        None
    };
    if let (Some(path), Some(p)) = (&args.output, &problem) {
        write(path, &(p.to_json() + "\n"))?;
    }
    let verdict = if decision.yes { "yes" } else { "no" };
    match format {
        Format::Text => {
            if let Some(p) = &problem {
                say!(
                    out,
                    "reduced problem: {} rows x {} columns",
                    p.num_rows(),
                    p.num_cols()
                );
            }
            let mut line = format!("{verdict}: k = {}", instance.k);
            if !uncovered.is_empty() {
                let _ = write!(line, ", elements {uncovered:?} are in no subset");
            } else {
                let _ = write!(
                    line,
                    ", optimal tree's zero row inspects subsets {:?}",
                    one_based(&decision.e_m)
                );
            }
            if let Some(w) = &decision.witness {
                let _ = write!(line, ", cover {:?}", one_based(w));
            }
            say!(out, "{line}");
            if let Some(v) = decision.optimal_cost {
                say!(out, "optimal expected cost: {v:.6}");
            }
        }
        Format::Csv => {
            say!(out, "yes,k,e_m,witness,optimal_cost");
            let join = |v: &[usize]| {
                one_based(v)
                    .iter()
                    .map(ToString::to_string)
                    .collect::<Vec<_>>()
                    .join(" ")
            };
            say!(
                out,
                "{},{},{},{},{}",
                decision.yes,
                instance.k,
                join(&decision.e_m),
                decision.witness.as_deref().map(join).unwrap_or_default(),
                decision
                    .optimal_cost
                    .map(|v| v.to_string())
                    .unwrap_or_default()
            );
        }
        Format::Json => say!(
            out,
            "{}",
            pretty(&json!({
                "yes": decision.yes,
                "k": instance.k,
                "eM": one_based(&decision.e_m),
                "witness": decision.witness.as_deref().map(one_based),
                "uncovered": uncovered,
                "optimalCost": decision.optimal_cost,
                "problem": problem.as_ref().map(Problem::to_file),
            }))
        ),
    }
    Ok(())
}

fn serve_cmd(args: &ServeArgs) -> Outcome {
    let config = ServiceConfig {
        port: args.port,
        data_dir: args.data.clone(),
        ui_dir: args.ui.clone(),
        ..ServiceConfig::default()
    };
    let runtime = tokio::runtime::Runtime::new()
        .map_err(|e| Failure::Input(format!("cannot start runtime: {e}")))?;
    runtime
        .block_on(classtree_service::serve(config))
        .map_err(|e| Failure::Input(format!("service stopped: {e}")))
}
