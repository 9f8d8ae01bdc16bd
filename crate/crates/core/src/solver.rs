//! The trilevel pipeline and the generation loop.
//!
//! One fitness evaluation = split the permutation into routes, improve the
//! customer order inside each route (2-opt, then swap), split again, then
//! insert charging stations with the optimisation bin count. The run budget
//! is counted in such evaluations; cache hits are free.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::charging::{charged_split, repair_solution, Infeasible, StationPathTable};
use crate::construction::{initial_population, rng_from_seed};
use crate::evolution::{evolve_generation, Evaluator, EvolutionParams, ParamError};
use crate::instance::{Instance, NodeId};
use crate::local_search::{local_search, Neighbourhood};
use crate::solution::{validate, ChargedSolution, Genotype, RoutePlan};
use crate::split::split;

/// Consecutive generations without a single evaluation that end a run.
pub const STALL_GENERATIONS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverParams {
    pub evolution: EvolutionParams,
    pub k_nn: usize,
    pub bins_optimize: usize,
    pub bins_finish: usize,
    pub budget_multiplier: u64,
    pub max_generations: Option<usize>,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            evolution: EvolutionParams::default(),
            k_nn: 3,
            bins_optimize: 151,
            bins_finish: 100_001,
            budget_multiplier: 25_000,
            max_generations: None,
        }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<(), ParamError> {
        self.evolution.validate()?;
        if self.k_nn == 0 {
            return Err(ParamError::Other("nearest-neighbour window must be at least 1".into()));
        }
        if self.bins_optimize < 2 {
            return Err(ParamError::Other("bin count must be at least 2".into()));
        }
        if self.bins_finish < self.bins_optimize {
            return Err(ParamError::Other("finishing bin count below the optimisation bin count".into()));
        }
        if self.budget_multiplier == 0 {
            return Err(ParamError::Other("budget multiplier must be positive".into()));
        }
        Ok(())
    }

    /// Evaluation budget for `inst`: multiplier times the total node count.
    pub fn budget(&self, inst: &Instance) -> u64 {
        self.budget_multiplier * inst.node_count() as u64
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SolveError {
    #[error("invalid parameters: {0}")]
    Params(#[from] ParamError),
    #[error("no feasible solution found")]
    NoFeasibleSolution,
}

/// Best individual seen so far together with its charged solution.
#[derive(Debug, Clone)]
pub struct Incumbent {
    pub genotype: Genotype,
    pub plan: RoutePlan,
    pub solution: ChargedSolution,
}

/// Full trilevel fitness with an evaluation counter and budget.
///
/// When the distance-optimal routes of a permutation cannot all be charged,
/// [`charged_split`] chooses the routes instead; the fitness is infinite only
/// if that fails too.
pub struct TrilevelEvaluator<'a> {
    inst: &'a Instance,
    table: &'a StationPathTable,
    bins: usize,
    budget: u64,
    used: u64,
    best: Option<Incumbent>,
}

impl<'a> TrilevelEvaluator<'a> {
    pub fn new(inst: &'a Instance, table: &'a StationPathTable, bins: usize, budget: u64) -> Self {
        TrilevelEvaluator { inst, table, bins, budget, used: 0, best: None }
    }

    pub fn evaluations(&self) -> u64 {
        self.used
    }

    pub fn budget(&self) -> u64 {
        self.budget
    }

    pub fn incumbent(&self) -> Option<&Incumbent> {
        self.best.as_ref()
    }

    pub fn into_incumbent(self) -> Option<Incumbent> {
        self.best
    }

    fn plan(&self, perm: &[NodeId]) -> RoutePlan {
        split(perm, self.inst).expect("instance demands never exceed capacity")
    }
}

impl Evaluator for TrilevelEvaluator<'_> {
    fn evaluate(&mut self, g: &mut Genotype) -> Option<f64> {
        if let Some(f) = g.fitness() {
            return Some(f);
        }
        if self.used >= self.budget {
            return None;
        }
        self.used += 1;

        let plan = self.plan(g.perm());
        g.set_route_starts(plan.route_starts());
        let improved = local_search(g, Neighbourhood::TwoOpt, self.inst);
        let improved = local_search(&improved, Neighbourhood::Swap, self.inst);
        let plan = if improved.perm() != g.perm() {
            *g = improved;
            let plan = self.plan(g.perm());
            g.set_route_starts(plan.route_starts());
            plan
        } else {
            plan
        };

        let charged = repair_solution(&plan, self.bins, self.inst, self.table).map(|s| (plan, s)).or_else(|_| {
            let (plan, solution) = charged_split(g.perm(), self.bins, self.inst, self.table)?;
            g.set_route_starts(plan.route_starts());
            Ok::<_, Infeasible>((plan, solution))
        });
        let fitness = match charged {
            Ok((plan, solution)) => {
                let cost = solution.total_distance;
                if self.best.as_ref().is_none_or(|b| cost < b.solution.total_distance) {
                    let mut genotype = g.clone();
                    genotype.set_fitness(cost);
                    self.best = Some(Incumbent { genotype, plan, solution });
                }
                cost
            }
            Err(_) => f64::INFINITY,
        };
        g.set_fitness(fitness);
        Some(fitness)
    }

    fn route_starts(&self, perm: &[NodeId]) -> Vec<usize> {
        self.plan(perm).route_starts()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunResult {
    pub best: ChargedSolution,
    pub best_cost: f64,
    /// Cost of the same genotype before the fine-grained finishing repair.
    pub pre_finish_cost: f64,
    pub best_perm: Vec<NodeId>,
    pub evaluations_used: u64,
    pub budget: u64,
    pub generations: usize,
    #[serde(with = "duration_secs")]
    pub wall_time: Duration,
    pub seed: u64,
}

mod duration_secs {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        d.as_secs_f64().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_secs_f64(f64::deserialize(d)?))
    }
}

/// Solver bound to one instance; the station table is built once and shared
/// by every run.
pub struct Solver<'a> {
    inst: &'a Instance,
    params: SolverParams,
    table: StationPathTable,
}

impl<'a> Solver<'a> {
    pub fn new(inst: &'a Instance, params: SolverParams) -> Result<Self, SolveError> {
        params.validate()?;
        let table = StationPathTable::build(inst);
        Ok(Solver { inst, params, table })
    }

    pub fn params(&self) -> &SolverParams {
        &self.params
    }

    pub fn table(&self) -> &StationPathTable {
        &self.table
    }

    /// One seeded run: initial population, generations until the budget or
    /// the generation cap runs out, then a fine-grained charging repair of
    /// the best genotype ever evaluated.
    ///
    /// The run also ends after [`STALL_GENERATIONS`] consecutive generations
    /// that produced no new genotype, which happens on instances with fewer
    /// distinct permutations than the population holds.
    pub fn solve(&self, seed: u64) -> Result<RunResult, SolveError> {
        let start = Instant::now();
        let inst = self.inst;
        let params = &self.params;
        let mut rng = rng_from_seed(seed);
        let budget = params.budget(inst);
        let mut evaluator = TrilevelEvaluator::new(inst, &self.table, params.bins_optimize, budget);

        let mut pop = initial_population(inst, params.evolution.population_size, params.k_nn, &mut rng);
        let mut exhausted = false;
        let mut evaluated = Vec::with_capacity(pop.len());
        for mut g in pop.drain(..) {
            if evaluator.evaluate(&mut g).is_none() {
                exhausted = true;
                break;
            }
            evaluated.push(g);
        }
        let mut pop = dedup_evaluated(evaluated);

        let mut generations = 0;
        let mut stalled = 0;
        while !exhausted
            && !pop.is_empty()
            && stalled < STALL_GENERATIONS
            && params.max_generations.is_none_or(|cap| generations < cap)
        {
            let before = evaluator.evaluations();
            match evolve_generation(&pop, &params.evolution, inst, &mut evaluator, &mut rng) {
                Some(next) => {
                    pop = next;
                    generations += 1;
                    stalled = if evaluator.evaluations() == before { stalled + 1 } else { 0 };
                }
                None => exhausted = true,
            }
        }

        let evaluations_used = evaluator.evaluations();
        let incumbent = evaluator.into_incumbent().ok_or(SolveError::NoFeasibleSolution)?;
        let pre_finish_cost = incumbent.solution.total_distance;
        let best = match repair_solution(&incumbent.plan, params.bins_finish, inst, &self.table) {
            Ok(finished) if finished.total_distance <= pre_finish_cost => finished,
            _ => incumbent.solution,
        };
        debug_assert!(validate(&best, inst).is_empty());
        Ok(RunResult {
            best_cost: best.total_distance,
            best,
            pre_finish_cost,
            best_perm: incumbent.genotype.into_perm(),
            evaluations_used,
            budget,
            generations,
            wall_time: start.elapsed(),
            seed,
        })
    }

    /// Runs every seed (on up to `parallel` threads) and aggregates the costs.
    pub fn run_experiment(&self, seeds: &[u64], parallel: usize) -> Result<RunSummary, SolveError> {
        assert!(!seeds.is_empty(), "need at least one run");
        let threads = parallel.clamp(1, seeds.len());
        let mut results: Vec<Option<Result<RunResult, SolveError>>> = (0..seeds.len()).map(|_| None).collect();
        if threads == 1 {
            for (slot, &seed) in results.iter_mut().zip(seeds) {
                *slot = Some(self.solve(seed));
            }
        } else {
            let chunk = seeds.len().div_ceil(threads);
            std::thread::scope(|scope| {
                for (slots, seeds) in results.chunks_mut(chunk).zip(seeds.chunks(chunk)) {
                    scope.spawn(move || {
                        for (slot, &seed) in slots.iter_mut().zip(seeds) {
                            *slot = Some(self.solve(seed));
                        }
                    });
                }
            });
        }
        let runs = results.into_iter().map(|r| r.expect("every seed ran")).collect::<Result<Vec<_>, _>>()?;
        Ok(RunSummary::from_runs(self.inst.name(), &runs))
    }
}

fn dedup_evaluated(pop: Vec<Genotype>) -> Vec<Genotype> {
    let mut seen = std::collections::HashSet::new();
    pop.into_iter().filter(|g| seen.insert(g.hash())).collect()
}

/// Convenience wrapper building a [`Solver`] for a single run.
pub fn solve(inst: &Instance, params: &SolverParams, seed: u64) -> Result<RunResult, SolveError> {
    Solver::new(inst, params.clone())?.solve(seed)
}

/// Convenience wrapper for [`Solver::run_experiment`].
pub fn run_experiment(
    inst: &Instance,
    params: &SolverParams,
    seeds: &[u64],
    parallel: usize,
) -> Result<RunSummary, SolveError> {
    Solver::new(inst, params.clone())?.run_experiment(seeds, parallel)
}

/// Per-instance statistics over seeded runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub name: String,
    pub runs: usize,
    pub min: f64,
    pub mean: f64,
    /// Sample standard deviation; 0 for a single run.
    pub std: f64,
    pub avg_evals: f64,
    pub avg_seconds: f64,
    pub costs: Vec<f64>,
    pub seeds: Vec<u64>,
}

impl RunSummary {
    pub fn from_runs(name: &str, runs: &[RunResult]) -> Self {
        let costs: Vec<f64> = runs.iter().map(|r| r.best_cost).collect();
        let (min, mean, std) = cost_statistics(&costs);
        let n = runs.len().max(1) as f64;
        RunSummary {
            name: name.to_string(),
            runs: runs.len(),
            min,
            mean,
            std,
            avg_evals: runs.iter().map(|r| r.evaluations_used as f64).sum::<f64>() / n,
            avg_seconds: runs.iter().map(|r| r.wall_time.as_secs_f64()).sum::<f64>() / n,
            costs,
            seeds: runs.iter().map(|r| r.seed).collect(),
        }
    }
}

/// Minimum, mean and sample standard deviation.
pub fn cost_statistics(costs: &[f64]) -> (f64, f64, f64) {
    if costs.is_empty() {
        return (f64::NAN, f64::NAN, f64::NAN);
    }
    let n = costs.len() as f64;
    let min = costs.iter().copied().fold(f64::INFINITY, f64::min);
    let mean = costs.iter().sum::<f64>() / n;
    let std =
        if costs.len() < 2 { 0.0 } else { (costs.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() };
    (min, mean, std)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::InstanceSpec;

    fn pair(cap: u64) -> Instance {
        Instance::from_spec(InstanceSpec {
            customers: vec![(1.0, 0.0, 1), (2.0, 0.0, 1)],
            stations: vec![(1.0, 1.0)],
            capacity: cap,
            battery: 10.0,
            consumption: 1.0,
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn evaluation_of_two_customer_fixture() {
        let inst = pair(2);
        let table = StationPathTable::build(&inst);
        let mut ev = TrilevelEvaluator::new(&inst, &table, 151, 10);
        let mut g = Genotype::new(vec![NodeId(1), NodeId(2)]);
        assert_eq!(ev.evaluate(&mut g), Some(4.0));
        assert_eq!(ev.evaluations(), 1);
        assert_eq!(g.route_starts(), Some(&[0][..]));
        // cache hit: no budget consumed
        assert_eq!(ev.evaluate(&mut g), Some(4.0));
        assert_eq!(ev.evaluations(), 1);
    }

    #[test]
    fn unreachable_customer_is_infinite() {
        let inst = Instance::from_spec(InstanceSpec {
            customers: vec![(9.0, 0.0, 1)],
            stations: vec![(2.0, 0.0)],
            capacity: 1,
            battery: 3.0,
            consumption: 1.0,
            ..Default::default()
        })
        .unwrap();
        let table = StationPathTable::build(&inst);
        let mut ev = TrilevelEvaluator::new(&inst, &table, 151, 10);
        let mut g = Genotype::new(vec![NodeId(1)]);
        assert_eq!(ev.evaluate(&mut g), Some(f64::INFINITY));
        assert!(ev.incumbent().is_none());
        let params = SolverParams { max_generations: Some(2), ..Default::default() };
        assert_eq!(solve(&inst, &params, 1).unwrap_err(), SolveError::NoFeasibleSolution);
    }

    #[test]
    fn budget_stops_evaluation() {
        let inst = pair(2);
        let table = StationPathTable::build(&inst);
        let mut ev = TrilevelEvaluator::new(&inst, &table, 151, 1);
        let mut a = Genotype::new(vec![NodeId(1), NodeId(2)]);
        let mut b = Genotype::new(vec![NodeId(2), NodeId(1)]);
        assert!(ev.evaluate(&mut a).is_some());
        assert!(ev.evaluate(&mut b).is_none());
        assert_eq!(b.fitness(), None);
    }

    #[test]
    fn zero_generations_returns_best_initial() {
        let inst = pair(1);
        let params = SolverParams { max_generations: Some(0), ..Default::default() };
        let run = solve(&inst, &params, 5).unwrap();
        assert_eq!(run.generations, 0);
        assert_eq!(run.best_cost, 6.0);
        assert!(run.evaluations_used <= run.budget);
        assert!(run.best_cost <= run.pre_finish_cost);
    }

    #[test]
    fn statistics() {
        assert_eq!(cost_statistics(&[3.0]), (3.0, 3.0, 0.0));
        let (min, mean, std) = cost_statistics(&[1.0, 2.0, 3.0]);
        assert_eq!((min, mean, std), (1.0, 2.0, 1.0));
    }

    #[test]
    fn params_reject_inverted_bins() {
        let p = SolverParams { bins_finish: 11, ..Default::default() };
        assert!(p.validate().is_err());
    }
}
