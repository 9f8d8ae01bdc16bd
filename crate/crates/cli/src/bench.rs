//! Seeded multi-run benchmark over one or more instance files.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Args;
use serde::Serialize;

use evrp_core::{Instance, RunSummary, Solver};

use crate::SolverFlags;

pub const CSV_HEADER: [&str; 7] = ["name", "min", "mean", "std", "runs", "avg_evals", "avg_seconds"];

#[derive(Args)]
pub struct BenchArgs {
    /// Instance files or directories holding `.evrp` files.
    #[arg(required = true)]
    paths: Vec<PathBuf>,
    #[arg(long, default_value_t = 20)]
    runs: usize,
    /// Base seed; run `i` uses `seeds + i`.
    #[arg(long, default_value_t = 1)]
    seeds: u64,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    json: Option<PathBuf>,
    /// Independent runs executed concurrently.
    #[arg(long, default_value_t = 1)]
    parallel: usize,
    #[command(flatten)]
    solver: SolverFlags,
}

#[derive(Serialize)]
#[serde(untagged)]
enum Row {
    Done(RunSummary),
    Failed { name: String, error: String },
}

fn instance_files(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut files: Vec<PathBuf> = fs::read_dir(p)
                .with_context(|| format!("listing {}", p.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "evrp"))
                .collect();
            files.sort();
            out.extend(files);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
}

fn run_one(path: &Path, args: &BenchArgs) -> Result<RunSummary> {
    let inst = Instance::from_file(path)?;
    let solver = Solver::new(&inst, args.solver.params())?;
    let seeds: Vec<u64> = (0..args.runs as u64).map(|i| args.seeds + i).collect();
    Ok(solver.run_experiment(&seeds, args.parallel)?)
}

fn csv_record(row: &Row) -> Vec<String> {
    match row {
        Row::Done(s) => vec![
            s.name.clone(),
            s.min.to_string(),
            s.mean.to_string(),
            s.std.to_string(),
            s.runs.to_string(),
            s.avg_evals.to_string(),
            s.avg_seconds.to_string(),
        ],
        Row::Failed { name, .. } => {
            vec![name.clone(), "ERROR".into(), "ERROR".into(), "ERROR".into(), "0".into(), String::new(), String::new()]
        }
    }
}

pub fn cmd_bench(args: &BenchArgs) -> Result<ExitCode> {
    anyhow::ensure!(args.runs >= 1, "--runs must be at least 1");
    args.solver.params().validate()?;
    let files = instance_files(&args.paths)?;
    let mut rows = Vec::with_capacity(files.len());
    for path in &files {
        let row = match run_one(path, args) {
            Ok(mut summary) => {
                if summary.name.is_empty() {
                    summary.name = stem(path);
                }
                Row::Done(summary)
            }
            Err(e) => {
                eprintln!("{}: {e:#}", path.display());
                Row::Failed { name: stem(path), error: format!("{e:#}") }
            }
        };
        rows.push(row);
    }

    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(CSV_HEADER)?;
    for row in &rows {
        wtr.write_record(csv_record(row))?;
    }
    let table = String::from_utf8(wtr.into_inner()?)?;
    print!("{table}");
    if let Some(p) = &args.csv {
        fs::write(p, &table).with_context(|| format!("writing {}", p.display()))?;
    }
    if let Some(p) = &args.json {
        fs::write(p, serde_json::to_string_pretty(&rows)? + "\n")
            .with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(ExitCode::SUCCESS)
}
