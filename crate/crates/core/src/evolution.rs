//! One memetic generation: linear-ranking selection, distributed crossover,
//! nearest-neighbour mutations, elitism and duplicate rejection.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::{Instance, NodeId};
use crate::solution::Genotype;

/// Offspring attempts per population slot before falling back.
pub const DEDUP_ATTEMPTS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionParams {
    pub population_size: usize,
    pub selection_pressure: f64,
    pub elite_count: usize,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
}

impl Default for EvolutionParams {
    fn default() -> Self {
        EvolutionParams {
            population_size: 200,
            selection_pressure: 1.6,
            elite_count: 30,
            crossover_rate: 0.95,
            mutation_rate: 0.3,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ParamError {
    #[error("population size must be at least 1")]
    EmptyPopulation,
    #[error("selection pressure {0} outside [1, 2]")]
    Pressure(f64),
    #[error("elite count {elites} must be below the population size {size}")]
    Elites { elites: usize, size: usize },
    #[error("{name} rate {value} outside [0, 1]")]
    Rate { name: &'static str, value: f64 },
    #[error("{0}")]
    Other(String),
}

impl EvolutionParams {
    pub fn validate(&self) -> Result<(), ParamError> {
        if self.population_size == 0 {
            return Err(ParamError::EmptyPopulation);
        }
        if !(1.0..=2.0).contains(&self.selection_pressure) {
            return Err(ParamError::Pressure(self.selection_pressure));
        }
        if self.elite_count >= self.population_size {
            return Err(ParamError::Elites { elites: self.elite_count, size: self.population_size });
        }
        for (name, value) in [("crossover", self.crossover_rate), ("mutation", self.mutation_rate)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(ParamError::Rate { name, value });
            }
        }
        Ok(())
    }
}

/// Fitness source for a generation. All individuals of a population go
/// through the same implementation so their fitness values are comparable.
pub trait Evaluator {
    /// Evaluates `g`, filling its fitness and route caches. Returns `None`
    /// without touching `g` once the evaluation budget is spent.
    fn evaluate(&mut self, g: &mut Genotype) -> Option<f64>;

    /// Route boundaries of a permutation, without consuming budget.
    fn route_starts(&self, perm: &[NodeId]) -> Vec<usize>;
}

/// Linear-ranking probabilities, best rank first.
///
/// `p(r) = (SP - (2 SP - 2)(r - 1)/(N - 1)) / N` for ranks `r = 1..=N`.
pub fn rank_probabilities(n: usize, pressure: f64) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    let nf = n as f64;
    (0..n).map(|r| (pressure - (2.0 * pressure - 2.0) * r as f64 / (nf - 1.0)) / nf).collect()
}

/// Samples ranks (0 = best) from the linear-ranking distribution.
#[derive(Debug, Clone)]
pub struct RankSelector {
    cumulative: Vec<f64>,
}

impl RankSelector {
    pub fn new(n: usize, pressure: f64) -> Self {
        assert!(n >= 1);
        let mut acc = 0.0;
        let cumulative = rank_probabilities(n, pressure)
            .into_iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        RankSelector { cumulative }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let total = *self.cumulative.last().unwrap();
        let u = rng.gen::<f64>() * total;
        self.cumulative.partition_point(|&c| c <= u).min(self.cumulative.len() - 1)
    }
}

/// Indices of `pop` from best to worst fitness (unevaluated and infeasible last).
pub fn ranking(pop: &[Genotype]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..pop.len()).collect();
    order.sort_by(|&a, &b| pop[a].rank_key().total_cmp(&pop[b].rank_key()));
    order
}

/// Picks one parent from a population by linear ranking.
pub fn rank_select<'a, R: Rng + ?Sized>(pop: &'a [Genotype], pressure: f64, rng: &mut R) -> &'a Genotype {
    let order = ranking(pop);
    let r = RankSelector::new(pop.len(), pressure).sample(rng);
    &pop[order[r]]
}

fn route_containing(g: &Genotype, pos: usize) -> std::ops::Range<usize> {
    g.route_ranges()
        .expect("crossover parents need cached routes")
        .into_iter()
        .find(|r| r.contains(&pos))
        .expect("position inside the permutation")
}

fn dedup_first(seq: impl IntoIterator<Item = NodeId>) -> Vec<NodeId> {
    let mut seen = HashSet::new();
    seq.into_iter().filter(|c| seen.insert(*c)).collect()
}

fn splice(base: &[NodeId], removed: &HashSet<NodeId>, at: usize, block: Vec<NodeId>) -> Vec<NodeId> {
    let mut kept: Vec<NodeId> = base.iter().copied().filter(|c| !removed.contains(c)).collect();
    let at = at.min(kept.len());
    kept.splice(at..at, block);
    kept
}

/// Distributed crossover around a given customer.
///
/// `sub1`/`sub2` are the routes of `p1`/`p2` holding `customer`. Both children
/// drop every customer of `sub1 ∪ sub2` from their parent and re-insert a
/// block at the parent's original route start: `sub2 ++ sub1` for the first
/// child and `rev(sub1) ++ rev(sub2)` for the second, keeping the first
/// occurrence of each customer.
pub fn distributed_crossover_at(p1: &Genotype, p2: &Genotype, customer: NodeId) -> (Genotype, Genotype) {
    let pos1 = p1.perm().iter().position(|&c| c == customer).expect("customer in first parent");
    let pos2 = p2.perm().iter().position(|&c| c == customer).expect("customer in second parent");
    let r1 = route_containing(p1, pos1);
    let r2 = route_containing(p2, pos2);
    let sub1 = &p1.perm()[r1.clone()];
    let sub2 = &p2.perm()[r2.clone()];
    let removed: HashSet<NodeId> = sub1.iter().chain(sub2).copied().collect();

    let block1 = dedup_first(sub2.iter().chain(sub1).copied());
    let block2 = dedup_first(sub1.iter().rev().chain(sub2.iter().rev()).copied());
    let child1 = splice(p1.perm(), &removed, r1.start, block1);
    let child2 = splice(p2.perm(), &removed, r2.start, block2);
    (Genotype::new(child1), Genotype::new(child2))
}

/// Distributed crossover around a uniformly drawn customer.
pub fn distributed_crossover<R: Rng + ?Sized>(p1: &Genotype, p2: &Genotype, rng: &mut R) -> (Genotype, Genotype) {
    let customer = *p1.perm().choose(rng).expect("non-empty parent");
    distributed_crossover_at(p1, p2, customer)
}

/// Position of the customer nearest to `perm[pos]` that lies in another
/// route; ties go to the lower node index.
fn nearest_other_route(g: &Genotype, pos: usize, inst: &Instance) -> Option<usize> {
    let route_of = g.route_index_by_position()?;
    let a = g.perm()[pos];
    let mut best: Option<(f64, usize, usize)> = None;
    for (q, &c) in g.perm().iter().enumerate() {
        if route_of[q] == route_of[pos] {
            continue;
        }
        let key = (inst.distance(a, c), c.index(), q);
        if best.is_none_or(|b| (key.0, key.1) < (b.0, b.1)) {
            best = Some(key);
        }
    }
    best.map(|b| b.2)
}

fn has_two_routes(g: &Genotype) -> bool {
    g.route_starts().is_some_and(|s| s.len() >= 2)
}

/// Swaps the customer at `pos` with its nearest customer from another route.
pub fn heuristic_swap_at(g: &Genotype, pos: usize, inst: &Instance) -> Genotype {
    match nearest_other_route(g, pos, inst) {
        Some(q) if has_two_routes(g) => {
            let mut perm = g.perm().to_vec();
            perm.swap(pos, q);
            Genotype::new(perm)
        }
        _ => g.clone(),
    }
}

pub fn heuristic_swap<R: Rng + ?Sized>(g: &Genotype, inst: &Instance, rng: &mut R) -> Genotype {
    if !has_two_routes(g) {
        return g.clone();
    }
    let pos = rng.gen_range(0..g.perm().len());
    heuristic_swap_at(g, pos, inst)
}

/// Moves the nearest other-route customer of `perm[pos]` to just after it.
pub fn heuristic_move_at(g: &Genotype, pos: usize, inst: &Instance) -> Genotype {
    match nearest_other_route(g, pos, inst) {
        Some(q) if has_two_routes(g) => {
            let mut perm = g.perm().to_vec();
            let moved = perm.remove(q);
            let anchor = if q < pos { pos - 1 } else { pos };
            perm.insert(anchor + 1, moved);
            Genotype::new(perm)
        }
        _ => g.clone(),
    }
}

pub fn heuristic_move<R: Rng + ?Sized>(g: &Genotype, inst: &Instance, rng: &mut R) -> Genotype {
    if !has_two_routes(g) {
        return g.clone();
    }
    let pos = rng.gen_range(0..g.perm().len());
    heuristic_move_at(g, pos, inst)
}

/// Produces the next population, or `None` if the evaluator ran out of
/// budget part-way.
///
/// The `elite_count` best individuals are carried over untouched. Every
/// other slot is filled by offspring: two rank-selected parents, crossover
/// with `crossover_rate`, then one of the two mutations (chosen uniformly)
/// with `mutation_rate`, then evaluation. Offspring whose hash already sits
/// in the new population are discarded, both before and after evaluation.
/// After [`DEDUP_ATTEMPTS`] discards for a slot one shuffled permutation is
/// tried, and if that also collides the best unused member of the old
/// population fills the slot, which keeps the hashes pairwise distinct.
pub fn evolve_generation<E: Evaluator, R: Rng + ?Sized>(
    pop: &[Genotype],
    params: &EvolutionParams,
    inst: &Instance,
    evaluator: &mut E,
    rng: &mut R,
) -> Option<Vec<Genotype>> {
    let order = ranking(pop);
    let target = pop.len().min(params.population_size.max(1));
    let elites = params.elite_count.min(target);
    let selector = RankSelector::new(pop.len(), params.selection_pressure);

    let mut next: Vec<Genotype> = Vec::with_capacity(target);
    let mut hashes = HashSet::with_capacity(target);
    for &i in order.iter().take(elites) {
        if hashes.insert(pop[i].hash()) {
            next.push(pop[i].clone());
        }
    }

    let mut queue: Vec<Genotype> = Vec::new();
    while next.len() < target {
        let mut placed = false;
        for _ in 0..DEDUP_ATTEMPTS {
            if queue.is_empty() {
                let p1 = &pop[order[selector.sample(rng)]];
                let p2 = &pop[order[selector.sample(rng)]];
                let (c1, c2) = if rng.gen::<f64>() < params.crossover_rate {
                    distributed_crossover(p1, p2, rng)
                } else {
                    (Genotype::new(p1.perm().to_vec()), Genotype::new(p2.perm().to_vec()))
                };
                for mut child in [c2, c1] {
                    if rng.gen::<f64>() < params.mutation_rate {
                        child.set_route_starts(evaluator.route_starts(child.perm()));
                        child = if rng.gen_bool(0.5) {
                            heuristic_swap(&child, inst, rng)
                        } else {
                            heuristic_move(&child, inst, rng)
                        };
                    }
                    queue.push(child);
                }
            }
            let mut child = queue.pop().unwrap();
            if hashes.contains(&child.hash()) {
                continue;
            }
            evaluator.evaluate(&mut child)?;
            if hashes.insert(child.hash()) {
                next.push(child);
                placed = true;
                break;
            }
        }
        if placed {
            continue;
        }
        let mut perm = inst.customers().to_vec();
        perm.shuffle(rng);
        let mut fresh = Genotype::new(perm);
        if !hashes.contains(&fresh.hash()) {
            evaluator.evaluate(&mut fresh)?;
            if hashes.insert(fresh.hash()) {
                next.push(fresh);
                continue;
            }
        }
        let spare = order
            .iter()
            .map(|&i| &pop[i])
            .find(|g| !hashes.contains(&g.hash()))
            .expect("old population holds enough distinct members");
        hashes.insert(spare.hash());
        next.push(spare.clone());
    }
    Some(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construction::rng_from_seed;
    use crate::instance::InstanceSpec;

    fn ids(v: &[usize]) -> Vec<NodeId> {
        v.iter().map(|&i| NodeId(i)).collect()
    }

    fn with_routes(perm: &[usize], starts: Vec<usize>) -> Genotype {
        let mut g = Genotype::new(ids(perm));
        g.set_route_starts(starts);
        g
    }

    #[test]
    fn rank_probabilities_match_formula() {
        let p = rank_probabilities(2, 1.6);
        assert!((p[0] - 0.8).abs() < 1e-12 && (p[1] - 0.2).abs() < 1e-12);
        let p = rank_probabilities(3, 1.6);
        let want = [1.6 / 3.0, 1.0 / 3.0, 0.4 / 3.0];
        for (a, b) in p.iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for x in rank_probabilities(7, 1.0) {
            assert!((x - 1.0 / 7.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rank_select_prefers_best() {
        let mut a = Genotype::new(ids(&[1, 2]));
        a.set_fitness(5.0);
        let mut b = Genotype::new(ids(&[2, 1]));
        b.set_fitness(f64::INFINITY);
        let pop = vec![b, a];
        let mut rng = rng_from_seed(3);
        let best = (0..10_000).filter(|_| rank_select(&pop, 1.6, &mut rng).fitness() == Some(5.0)).count();
        // p = 0.8, sd = 40
        assert!((7_880..=8_120).contains(&best), "{best}");
    }

    #[test]
    fn crossover_hand_trace() {
        let p1 = with_routes(&[1, 2, 3, 4], vec![0, 2]);
        let p2 = with_routes(&[3, 1, 4, 2], vec![0, 2]);
        let (c1, c2) = distributed_crossover_at(&p1, &p2, NodeId(1));
        assert_eq!(c1.perm(), ids(&[3, 1, 2, 4]).as_slice());
        assert_eq!(c2.perm(), ids(&[2, 1, 3, 4]).as_slice());
        assert_eq!(c1.fitness(), None);
        assert_eq!(c1.route_starts(), None);
    }

    #[test]
    fn crossover_of_identical_single_route_parents() {
        let p = with_routes(&[1, 2, 3, 4, 5], vec![0]);
        let (c1, c2) = distributed_crossover_at(&p, &p, NodeId(3));
        assert_eq!(c1.perm(), p.perm());
        assert_eq!(c2.perm(), ids(&[5, 4, 3, 2, 1]).as_slice());
    }

    fn five_customers() -> Instance {
        // route A = customers 1,2 near the origin, route B = 3,4,5 further out
        Instance::from_spec(InstanceSpec {
            customers: vec![(0.0, 1.0, 1), (1.0, 1.0, 1), (5.0, 5.0, 1), (1.5, 2.0, 1), (9.0, 9.0, 1)],
            capacity: 5,
            battery: 100.0,
            consumption: 1.0,
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn swap_exchanges_with_nearest_cross_route_customer() {
        let inst = five_customers();
        let g = with_routes(&[1, 2, 3, 4, 5], vec![0, 2]);
        // customer 1 at (0,1): other-route distances 3 -> 6.40, 4 -> 1.80, 5 -> 12.04
        let out = heuristic_swap_at(&g, 0, &inst);
        assert_eq!(out.perm(), ids(&[4, 2, 3, 1, 5]).as_slice());
        assert_eq!(out.fitness(), None);
    }

    #[test]
    fn move_relocates_after_anchor() {
        let inst = five_customers();
        let g = with_routes(&[1, 2, 3, 4, 5], vec![0, 2]);
        let out = heuristic_move_at(&g, 0, &inst);
        assert_eq!(out.perm(), ids(&[1, 4, 2, 3, 5]).as_slice());
        // customer 5 at (9,9): nearest in route A is 2 at (1,1), which sits before it
        let out = heuristic_move_at(&g, 4, &inst);
        assert_eq!(out.perm(), ids(&[1, 3, 4, 5, 2]).as_slice());
        assert_eq!(out.perm().len(), 5);
    }

    #[test]
    fn single_route_mutations_are_identity() {
        let inst = five_customers();
        let g = with_routes(&[1, 2, 3, 4, 5], vec![0]);
        let mut rng = rng_from_seed(1);
        assert_eq!(heuristic_swap(&g, &inst, &mut rng), g);
        assert_eq!(heuristic_move(&g, &inst, &mut rng), g);
    }

    #[test]
    fn params_validation() {
        assert!(EvolutionParams::default().validate().is_ok());
        let bad = EvolutionParams { selection_pressure: 2.5, ..Default::default() };
        assert_eq!(bad.validate(), Err(ParamError::Pressure(2.5)));
        let bad = EvolutionParams { elite_count: 200, ..Default::default() };
        assert!(matches!(bad.validate(), Err(ParamError::Elites { .. })));
    }
}
