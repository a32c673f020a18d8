use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use divtree_core::pipeline::{Check, Pipeline, RunConfig};
use divtree_core::solver::{grid_stats, tree_stats};
use divtree_core::tree::verify_decomposition_bound;
use divtree_core::{Error, ErrorClass, GridFunction};
use serde_json::json;

/// Exit codes.
const PASS: u8 = 0;
const IO_FAILURE: u8 = 1;
const BOUND_VIOLATED: u8 = 2;
const SPEC_ERROR: u8 = 3;
const DEGENERATE: u8 = 4;
const DATA_ERROR: u8 = 5;

#[derive(Parser)]
#[command(name = "divtree", version, about = "Tree decompositions and weighted right inverses of the divergence")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decompose the data along the tree and write per-node summaries.
    Decompose(RunArgs),
    /// Solve div u = f and check the weighted estimate.
    Solve(RunArgs),
    /// Run the invariant suite for the domain family.
    Verify(RunArgs),
    /// Write plot data: subdomain outlines and weight fields.
    Report(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Domain specification (JSON).
    #[arg(long)]
    domain: PathBuf,
    /// Cell size.
    #[arg(long)]
    h: Option<f64>,
    /// Integrability exponent, p > 1.
    #[arg(long)]
    p: Option<f64>,
    /// Weight exponent, κ ≥ 0.
    #[arg(long)]
    kappa: Option<f64>,
    /// Whitney max level, cusp truncation depth or Hölder piling levels.
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "divtree-out")]
    out: PathBuf,
}

impl RunArgs {
    fn config(&self) -> Result<RunConfig, Error> {
        let mut config = RunConfig::from_file(&self.domain)?;
        config.h = self.h.or(config.h);
        config.p = self.p.or(config.p);
        config.kappa = self.kappa.or(config.kappa);
        config.depth = self.depth.or(config.depth);
        config.seed = self.seed.or(config.seed);
        config.validate()?;
        Ok(config)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { SPEC_ERROR } else { PASS });
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(SPEC_ERROR);
    }
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.class() {
                ErrorClass::Spec => SPEC_ERROR,
                ErrorClass::Degenerate => DEGENERATE,
                ErrorClass::Data => DATA_ERROR,
                ErrorClass::Io => IO_FAILURE,
            })
        }
    }
}

/// Caps the global pool at `DIVTREE_THREADS` when set.
fn configure_threads() -> Result<(), Error> {
    let Ok(value) = std::env::var("DIVTREE_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| Error::InvalidParameter(format!("DIVTREE_THREADS must be a positive integer, got {value:?}")))?;
    rayon::ThreadPoolBuilder::new().num_threads(threads).build_global().map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))
}

fn run(command: Command) -> Result<u8, Error> {
    match command {
        Command::Decompose(args) => decompose(&args),
        Command::Solve(args) => solve(&args),
        Command::Verify(args) => verify(&args),
        Command::Report(args) => report(&args),
    }
}

fn prepare(args: &RunArgs) -> Result<Pipeline, Error> {
    let pipeline = Pipeline::build(args.config()?)?;
    fs::create_dir_all(&args.out)?;
    Ok(pipeline)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, Error> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_json(dir: &Path, name: &str, value: &impl serde::Serialize) -> Result<(), Error> {
    let mut out = create(dir, name)?;
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| Error::Io(e.into()))?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn decompose(args: &RunArgs) -> Result<u8, Error> {
    let pipeline = prepare(args)?;
    let f = pipeline.data()?;
    let d = pipeline.decompose(&f)?;
    let tog = &pipeline.tog;
    let tree = tog.tree();
    let p = pipeline.config.p();
    let omega = tog.tree_weight();
    let dv = tog.grid().cell_measure();
    let mut csv = create(&args.out, "decomposition.csv")?;
    writeln!(csv, "node,parent,depth,integral,support_cells,weighted_norm")?;
    let mut nodes = Vec::with_capacity(tree.len());
    for (t, g) in d.parts.iter().enumerate() {
        let support = g.values.iter().filter(|v| **v != 0.0).count();
        let norm = (g.cells.iter().zip(&g.values).map(|(c, v)| (v * omega.value(c)[0]).abs().powf(p)).sum::<f64>() * dv).powf(1.0 / p);
        let parent = tree.parent(t).map_or(String::new(), |q| q.to_string());
        writeln!(csv, "{t},{parent},{},{:e},{support},{norm:e}", tree.depth(t), d.integrals[t])?;
        nodes.push(
            json!({ "node": t, "parent": tree.parent(t), "integral": d.integrals[t], "support_cells": support, "weighted_norm": norm }),
        );
    }
    csv.flush()?;
    let bound = verify_decomposition_bound(tog, &f, Some(&d), p, None)?;
    write_json(
        &args.out,
        "report.json",
        &json!({
            "config": pipeline.config.resolved(),
            "grid": grid_stats(tog, pipeline.truncated_cells),
            "tree_stats": tree_stats(tog),
            "decomposition_bound": bound,
            "per_node": nodes,
        }),
    )?;
    println!("{} nodes, decomposition ratio {:.4e} against C1 = {:.4}", tree.len(), bound.ratio * bound.constant, bound.constant);
    Ok(if bound.passed { PASS } else { BOUND_VIOLATED })
}

fn solve(args: &RunArgs) -> Result<u8, Error> {
    let pipeline = prepare(args)?;
    let f = pipeline.data()?;
    let (solution, report) = pipeline.solve(&f)?;
    divtree_core::grid::write_grid_function_csv(&solution.u, create(&args.out, "u.csv")?)?;
    let mut residual = GridFunction::zeros(f.grid().clone(), f.mask().clone(), 1)?;
    for c in f.masked_cells() {
        residual.values_mut()[c] = solution.divergence.value(c)[0] - f.value(c)[0];
    }
    divtree_core::grid::write_grid_function_csv(&residual, create(&args.out, "residual.csv")?)?;
    let mut out = create(&args.out, "report.json")?;
    writeln!(out, "{}", report.to_json())?;
    out.flush()?;
    let c = &report.constants;
    println!(
        "C_emp = {} C_theory = {:.4} residual = {}",
        c.C_emp.map_or("n/a".into(), |v| format!("{v:.4}")),
        c.C_theory,
        report.residual.map_or("n/a".into(), |v| format!("{v:.3e}"))
    );
    Ok(if report.passed() { PASS } else { BOUND_VIOLATED })
}

fn verify(args: &RunArgs) -> Result<u8, Error> {
    let pipeline = prepare(args)?;
    let rows: Vec<Check> = pipeline.verify()?;
    let mut csv = create(&args.out, "verify.csv")?;
    writeln!(csv, "check,passed,detail")?;
    for r in &rows {
        writeln!(csv, "{},{},\"{}\"", r.name, r.passed, r.detail.replace('"', "'"))?;
        println!("{:<20} {}  {}", r.name, if r.passed { "pass" } else { "FAIL" }, r.detail);
    }
    csv.flush()?;
    write_json(&args.out, "verify.json", &json!({ "config": pipeline.config.resolved(), "checks": rows }))?;
    Ok(if rows.iter().all(|r| r.passed) { PASS } else { BOUND_VIOLATED })
}

fn report(args: &RunArgs) -> Result<u8, Error> {
    let pipeline = prepare(args)?;
    let tog = &pipeline.tog;
    let tree = tog.tree();
    let grid = tog.grid();
    let n = grid.dim();
    let axes = |prefix: &str| (0..n).map(|k| format!("{prefix}{k}")).collect::<Vec<_>>().join(",");
    let mut nodes = create(&args.out, "nodes.csv")?;
    writeln!(
        nodes,
        "node,parent,depth,{},{},{},{},omega_cells,connector_cells",
        axes("omega_lo"),
        axes("omega_hi"),
        axes("connector_lo"),
        axes("connector_hi")
    )?;
    let join = |v: &[f64]| v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(",");
    let blank = vec![""; n].join(",");
    for (t, node) in tree.nodes().iter().enumerate() {
        let b = node.omega.bbox();
        let (clo, chi) = match &node.connector {
            Some(c) => (join(&c.bbox().lo), join(&c.bbox().hi)),
            None => (blank.clone(), blank.clone()),
        };
        let parent = tree.parent(t).map_or(String::new(), |q| q.to_string());
        writeln!(
            nodes,
            "{t},{parent},{},{},{},{clo},{chi},{},{}",
            tree.depth(t),
            join(&b.lo),
            join(&b.hi),
            tog.omega_cells(t).len(),
            tog.connector_cells(t).len()
        )?;
    }
    nodes.flush()?;
    let omega = tog.tree_weight();
    let bar = pipeline.weights.bar.as_ref();
    let hat = pipeline.weights.hat.as_ref();
    let mut weights = create(&args.out, "weights.csv")?;
    writeln!(weights, "{},omega,omega_bar,w_hat", axes("x"))?;
    let mut x = vec![0.0; n];
    for c in (0..grid.len()).filter(|&c| tog.mask()[c]) {
        grid.center(c, &mut x);
        writeln!(
            weights,
            "{},{:e},{:e},{:e}",
            join(&x),
            omega.value(c)[0],
            bar.map_or(1.0, |w| w.value(c)[0]),
            hat.map_or(1.0, |w| w.value(c)[0])
        )?;
    }
    weights.flush()?;
    write_json(
        &args.out,
        "summary.json",
        &json!({
            "config": pipeline.config.resolved(),
            "grid": grid_stats(tog, pipeline.truncated_cells),
            "tree_stats": tree_stats(tog),
        }),
    )?;
    println!("{} nodes, {} masked cells written to {}", tree.len(), tog.masked_cell_count(), args.out.display());
    Ok(PASS)
}
