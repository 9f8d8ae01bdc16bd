//! `evrp` command-line front end: solve, bench and validate.

mod bench;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use evrp_core::oracles::brute_evrp;
use evrp_core::{validate, ChargedSolution, EvolutionParams, Instance, SolveError, Solver, SolverParams};

/// Exit status for a run that found no feasible solution.
const EXIT_INFEASIBLE: u8 = 2;
/// Exit status for a solution file with constraint violations.
const EXIT_VIOLATIONS: u8 = 3;

#[derive(Parser)]
#[command(name = "evrp", version, about = "Trilevel memetic solver for the electric vehicle routing problem")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one instance and write the best solution.
    Solve(SolveArgs),
    /// Run seeded repetitions over instances and report min/mean/std.
    Bench(bench::BenchArgs),
    /// Check a solution file against an instance.
    Validate(ValidateArgs),
}

#[derive(Args, Clone, Debug)]
pub struct SolverFlags {
    #[arg(long, default_value_t = 200)]
    population: usize,
    #[arg(long, default_value_t = 30)]
    elites: usize,
    #[arg(long, default_value_t = 1.6)]
    pressure: f64,
    #[arg(long, default_value_t = 3)]
    knn: usize,
    /// Battery bins while optimising.
    #[arg(long, default_value_t = 151)]
    bins: usize,
    /// Battery bins for the final repair of the best solution.
    #[arg(long, default_value_t = 100_001)]
    bins_finish: usize,
    /// Evaluation budget per node (budget = multiplier x node count).
    #[arg(long, default_value_t = 25_000)]
    budget_multiplier: u64,
    #[arg(long)]
    max_generations: Option<usize>,
    #[arg(long, default_value_t = 0.95)]
    crossover_rate: f64,
    #[arg(long, default_value_t = 0.3)]
    mutation_rate: f64,
}

impl SolverFlags {
    pub fn params(&self) -> SolverParams {
        SolverParams {
            evolution: EvolutionParams {
                population_size: self.population,
                selection_pressure: self.pressure,
                elite_count: self.elites,
                crossover_rate: self.crossover_rate,
                mutation_rate: self.mutation_rate,
            },
            k_nn: self.knn,
            bins_optimize: self.bins,
            bins_finish: self.bins_finish,
            budget_multiplier: self.budget_multiplier,
            max_generations: self.max_generations,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Args)]
struct SolveArgs {
    instance: PathBuf,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Solution output path (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    /// Run report path (JSON); printed to stderr when absent.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Also solve exhaustively (at most 8 customers) and report the gap.
    #[arg(long)]
    oracle: bool,
    #[command(flatten)]
    solver: SolverFlags,
}

#[derive(Args)]
struct ValidateArgs {
    instance: PathBuf,
    solution: PathBuf,
}

#[derive(Serialize)]
struct OracleReport {
    cost: Option<f64>,
    gap: Option<f64>,
}

#[derive(Serialize)]
struct SolveReport {
    instance: String,
    seed: u64,
    cost: f64,
    pre_finish_cost: f64,
    routes: usize,
    evaluations: u64,
    budget: u64,
    generations: usize,
    wall_seconds: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle: Option<OracleReport>,
}

fn load_instance(path: &Path) -> Result<Instance> {
    Instance::from_file(path).with_context(|| format!("loading {}", path.display()))
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_solve(args: &SolveArgs) -> Result<ExitCode> {
    let inst = load_instance(&args.instance)?;
    let solver = Solver::new(&inst, args.solver.params())?;
    let run = match solver.solve(args.seed) {
        Ok(run) => run,
        Err(SolveError::NoFeasibleSolution) => {
            eprintln!("{}: no feasible solution found", inst.name());
            return Ok(ExitCode::from(EXIT_INFEASIBLE));
        }
        Err(e) => return Err(e.into()),
    };

    let solution_text = match args.format {
        Format::Text => run.best.to_text(&inst),
        Format::Json => serde_json::to_string_pretty(&run.best.to_json(&inst))? + "\n",
    };
    write_output(args.out.as_deref(), &solution_text)?;

    let oracle = args.oracle.then(|| {
        anyhow::ensure!(inst.customers().len() <= 8, "--oracle needs at most 8 customers");
        let cost = brute_evrp(&inst).map(|s| s.total_distance);
        Ok(OracleReport { cost, gap: cost.map(|c| run.best_cost - c) })
    });
    let report = SolveReport {
        instance: inst.name().to_string(),
        seed: run.seed,
        cost: run.best_cost,
        pre_finish_cost: run.pre_finish_cost,
        routes: run.best.routes.len(),
        evaluations: run.evaluations_used,
        budget: run.budget,
        generations: run.generations,
        wall_seconds: run.wall_time.as_secs_f64(),
        oracle: oracle.transpose()?,
    };
    let json = serde_json::to_string_pretty(&report)? + "\n";
    match &args.report {
        Some(p) => fs::write(p, json).with_context(|| format!("writing {}", p.display()))?,
        None => eprint!("{json}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_validate(args: &ValidateArgs) -> Result<ExitCode> {
    let inst = load_instance(&args.instance)?;
    let text = fs::read_to_string(&args.solution).with_context(|| format!("reading {}", args.solution.display()))?;
    let sol =
        ChargedSolution::parse_text(&text, &inst).with_context(|| format!("parsing {}", args.solution.display()))?;
    let report = validate(&sol, &inst);
    println!("COST {:.6}", sol.total_distance);
    print!("{report}");
    Ok(if report.is_empty() { ExitCode::SUCCESS } else { ExitCode::from(EXIT_VIOLATIONS) })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve(args) => cmd_solve(args),
        Command::Bench(args) => bench::cmd_bench(args),
        Command::Validate(args) => cmd_validate(args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
