mod common;

use std::collections::HashSet;

use evrp_core::evolution::{
    distributed_crossover, evolve_generation, heuristic_move, heuristic_swap, rank_probabilities, RankSelector,
};
use evrp_core::local_search::improve_route;
use evrp_core::{
    initial_population, intra_route_distance, local_search, rng_from_seed, split, Evaluator, EvolutionParams, Genotype,
    Instance, Neighbourhood, StationPathTable, TrilevelEvaluator,
};
use proptest::prelude::*;

fn routed(inst: &Instance, perm: Vec<evrp_core::NodeId>) -> Genotype {
    let starts = split(&perm, inst).unwrap().route_starts();
    let mut g = Genotype::new(perm);
    g.set_route_starts(starts);
    g
}

fn route_lengths(g: &Genotype, inst: &Instance) -> Vec<f64> {
    g.route_ranges().unwrap().into_iter().map(|r| intra_route_distance(&g.perm()[r], inst)).collect()
}

fn sorted_routes(g: &Genotype) -> Vec<Vec<usize>> {
    g.route_ranges()
        .unwrap()
        .into_iter()
        .map(|r| {
            let mut v: Vec<usize> = g.perm()[r].iter().map(|c| c.index()).collect();
            v.sort_unstable();
            v
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn local_search_is_monotone_idempotent_and_route_preserving(
        seed in any::<u64>(),
        n in 1usize..=25,
        q in 3u64..=30,
        two_opt in any::<bool>(),
    ) {
        let mode = if two_opt { Neighbourhood::TwoOpt } else { Neighbourhood::Swap };
        let mut rng = rng_from_seed(seed);
        let inst = common::roomy_instance(&mut rng, n, 0, q);
        let g = routed(&inst, common::shuffled_customers(&inst, &mut rng));
        let once = local_search(&g, mode, &inst);
        let before = route_lengths(&g, &inst);
        let after = route_lengths(&once, &inst);
        for (b, a) in before.iter().zip(&after) {
            prop_assert!(a <= b);
        }
        if once.perm() != g.perm() {
            prop_assert!(after.iter().sum::<f64>() < before.iter().sum::<f64>());
        }
        prop_assert_eq!(once.route_starts(), g.route_starts());
        prop_assert_eq!(sorted_routes(&once), sorted_routes(&g));
        let twice = local_search(&once, mode, &inst);
        prop_assert_eq!(twice.perm(), once.perm());
    }

    #[test]
    fn descent_terminates_within_bound(seed in any::<u64>(), n in 2usize..=40) {
        let mut rng = rng_from_seed(seed);
        let inst = common::roomy_instance(&mut rng, n, 0, 1);
        let mut route = common::shuffled_customers(&inst, &mut rng);
        for mode in [Neighbourhood::TwoOpt, Neighbourhood::Swap] {
            prop_assert!(improve_route(&mut route, mode, &inst) < 1_000_000);
        }
    }

    #[test]
    fn operators_preserve_permutation(seed in any::<u64>(), n in 1usize..=30, q in 2u64..=20) {
        let mut rng = rng_from_seed(seed);
        let inst = common::roomy_instance(&mut rng, n, 0, q);
        let p1 = routed(&inst, common::shuffled_customers(&inst, &mut rng));
        let p2 = routed(&inst, common::shuffled_customers(&inst, &mut rng));
        let (c1, c2) = distributed_crossover(&p1, &p2, &mut rng);
        prop_assert!(c1.is_permutation_of(&inst));
        prop_assert!(c2.is_permutation_of(&inst));
        prop_assert!(heuristic_swap(&p1, &inst, &mut rng).is_permutation_of(&inst));
        prop_assert!(heuristic_move(&p1, &inst, &mut rng).is_permutation_of(&inst));
        let ls = local_search(&p1, Neighbourhood::TwoOpt, &inst);
        prop_assert!(ls.is_permutation_of(&inst));
    }
}

#[test]
fn rank_selection_matches_linear_ranking() {
    const DRAWS: usize = 100_000;
    for (n, sp, block) in [(10, 1.6, 1), (7, 2.0, 1), (5, 1.0, 1), (30, 1.6, 3), (200, 1.6, 20)] {
        let probs = rank_probabilities(n, sp);
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let selector = RankSelector::new(n, sp);
        let mut rng = rng_from_seed(n as u64);
        let mut counts = vec![0usize; n];
        for _ in 0..DRAWS {
            counts[selector.sample(&mut rng)] += 1;
        }
        for (r, (c, p)) in counts.chunks(block).zip(probs.chunks(block)).enumerate() {
            let freq = c.iter().sum::<usize>() as f64 / DRAWS as f64;
            let p: f64 = p.iter().sum();
            let se = (p * (1.0 - p) / DRAWS as f64).sqrt();
            assert!((freq - p).abs() <= 3.0 * se + 1e-12, "n={n} sp={sp} rank block {r}: {freq} vs {p}");
        }
    }
}

#[test]
fn initial_population_is_deterministic_and_distinct() {
    let mut rng = rng_from_seed(3);
    let inst = common::tight_instance(&mut rng, 15, 3, 20, 0.8);
    let a = initial_population(&inst, 60, 3, &mut rng_from_seed(11));
    let b = initial_population(&inst, 60, 3, &mut rng_from_seed(11));
    assert_eq!(a.len(), 60);
    assert_eq!(
        a.iter().map(|g| g.perm().to_vec()).collect::<Vec<_>>(),
        b.iter().map(|g| g.perm().to_vec()).collect::<Vec<_>>()
    );
    let hashes: HashSet<u64> = a.iter().map(|g| g.hash()).collect();
    assert_eq!(hashes.len(), a.len());
    assert!(a.iter().all(|g| g.is_permutation_of(&inst)));
}

#[test]
fn generations_keep_elites_and_distinct_members() {
    let mut rng = rng_from_seed(21);
    let inst = common::tight_instance(&mut rng, 12, 3, 15, 1.1);
    let table = StationPathTable::build(&inst);
    let params = EvolutionParams { population_size: 40, elite_count: 6, ..Default::default() };
    let mut eval = TrilevelEvaluator::new(&inst, &table, 151, u64::MAX);
    let mut pop = initial_population(&inst, params.population_size, 3, &mut rng);
    for g in pop.iter_mut() {
        eval.evaluate(g);
    }
    let best = |p: &[Genotype]| p.iter().map(|g| g.rank_key()).fold(f64::INFINITY, f64::min);
    let mut incumbent = eval.incumbent().unwrap().solution.total_distance;
    for _ in 0..25 {
        let next = evolve_generation(&pop, &params, &inst, &mut eval, &mut rng).unwrap();
        assert_eq!(next.len(), pop.len());
        assert!(best(&next) <= best(&pop));
        let hashes: HashSet<u64> = next.iter().map(|g| g.hash()).collect();
        assert_eq!(hashes.len(), next.len());
        assert!(next.iter().all(|g| g.is_permutation_of(&inst)));
        let now = eval.incumbent().unwrap().solution.total_distance;
        assert!(now <= incumbent);
        incumbent = now;
        pop = next;
    }
}
