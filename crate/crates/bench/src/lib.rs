//! Seeded synthetic instances for the pipeline benchmarks.

use evrp_core::{Instance, InstanceSpec, NodeId};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Uniform customers and stations on a 1000x1000 square, depot in the
/// middle, capacity for roughly `per_route` customers and a battery of
/// `battery_fraction` times the longest out-and-back trip.
pub fn synthetic_instance(
    customers: usize,
    stations: usize,
    per_route: u64,
    battery_fraction: f64,
    seed: u64,
) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let depot = (500.0, 500.0);
    let cust: Vec<(f64, f64, u64)> = (0..customers)
        .map(|_| (rng.gen_range(0.0..1000.0), rng.gen_range(0.0..1000.0), rng.gen_range(1..=20)))
        .collect();
    let far = cust.iter().map(|&(x, y, _)| (x - depot.0).hypot(y - depot.1)).fold(1.0, f64::max);
    Instance::from_spec(InstanceSpec {
        name: format!("synthetic-{customers}-{stations}"),
        depot,
        customers: cust,
        stations: (0..stations).map(|_| (rng.gen_range(0.0..1000.0), rng.gen_range(0.0..1000.0))).collect(),
        capacity: (10 * per_route).max(20),
        battery: battery_fraction * 2.0 * far,
        consumption: 1.0,
        ..Default::default()
    })
    .expect("generated instance is valid")
}

/// A seeded shuffle of the customers of `inst`.
pub fn random_perm(inst: &Instance, seed: u64) -> Vec<NodeId> {
    let mut perm = inst.customers().to_vec();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    perm
}
