//! Trilevel memetic solver for the electric vehicle routing problem (EVRP).
//!
//! The search runs over customer permutations only. Each permutation is
//! turned into capacity-feasible routes by an exact split dynamic program,
//! and charging stops are then inserted per route by a battery-binned
//! dynamic program over precomputed station-to-station chains.
//!
//! ```no_run
//! use evrp_core::{Instance, SolverParams, solve};
//!
//! let inst = Instance::from_file("data/wcci2020/E-n22-k4.evrp").unwrap();
//! let run = solve(&inst, &SolverParams::default(), 1).unwrap();
//! println!("{:.2}", run.best_cost);
//! ```

pub mod charging;
pub mod construction;
pub mod evolution;
pub mod instance;
pub mod local_search;
pub mod oracles;
pub mod solution;
pub mod solver;
pub mod split;

pub use charging::{
    charged_split, insert_stations, repair_solution, BinScale, ChargedRoute, Infeasible, StationPathTable,
};
pub use construction::{initial_population, rng_from_seed, stochastic_nn, RngStream};
pub use evolution::{Evaluator, EvolutionParams, ParamError};
pub use instance::{Instance, InstanceError, InstanceSpec, Node, NodeId, NodeKind};
pub use local_search::{intra_route_distance, local_search, Neighbourhood};
pub use solution::{
    genotype_hash, objective, validate, ChargedSolution, ConstraintTag, Genotype, RoutePlan, Violation, ViolationReport,
};
pub use solver::{
    cost_statistics, run_experiment, solve, RunResult, RunSummary, SolveError, Solver, SolverParams, TrilevelEvaluator,
};
pub use split::{split, split_cost_lower_bound, SplitError};
