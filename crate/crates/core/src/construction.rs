//! Initial population from a randomised nearest-neighbour tour builder.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::instance::{Instance, NodeId};
use crate::solution::Genotype;

/// Seeded deterministic random stream used by every stochastic component.
pub type RngStream = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> RngStream {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Builds a customer permutation starting at the depot, each time picking
/// uniformly among the `k` nearest unvisited customers of the last node.
///
/// Equidistant candidates are ordered by node index before the window is
/// cut, so the draw is reproducible for a given stream.
pub fn stochastic_nn<R: Rng + ?Sized>(inst: &Instance, k: usize, rng: &mut R) -> Genotype {
    assert!(k >= 1, "candidate window must hold at least one customer");
    let mut remaining: Vec<NodeId> = inst.customers().to_vec();
    let mut perm = Vec::with_capacity(remaining.len());
    let mut last = inst.depot();
    while !remaining.is_empty() {
        let window = k.min(remaining.len());
        let key = |c: &NodeId| (inst.distance(last, *c), c.index());
        if window < remaining.len() {
            remaining.select_nth_unstable_by(window - 1, |a, b| key(a).partial_cmp(&key(b)).unwrap());
        }
        remaining[..window].sort_by(|a, b| key(a).partial_cmp(&key(b)).unwrap());
        let pick = rng.gen_range(0..window);
        let next = remaining.swap_remove(pick);
        perm.push(next);
        last = next;
    }
    Genotype::new(perm)
}

/// Up to `size` hash-distinct genotypes.
///
/// Nearest-neighbour tours are drawn until `size` distinct ones exist or
/// `100 * size` draws were spent; the shortfall is then topped up with
/// shuffled permutations under the same cap. Tiny instances can end up with
/// fewer than `size` members.
pub fn initial_population<R: Rng + ?Sized>(inst: &Instance, size: usize, k: usize, rng: &mut R) -> Vec<Genotype> {
    assert!(size >= 1);
    let cap = 100 * size;
    let mut seen = HashSet::with_capacity(size);
    let mut pop = Vec::with_capacity(size);
    for _ in 0..cap {
        if pop.len() == size {
            return pop;
        }
        let g = stochastic_nn(inst, k, rng);
        if seen.insert(g.hash()) {
            pop.push(g);
        }
    }
    let mut perm = inst.customers().to_vec();
    for _ in 0..cap {
        if pop.len() == size {
            break;
        }
        perm.shuffle(rng);
        let g = Genotype::new(perm.clone());
        if seen.insert(g.hash()) {
            pop.push(g);
        }
    }
    pop
}
