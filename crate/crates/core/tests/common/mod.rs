#![allow(dead_code)]

use evrp_core::{Instance, InstanceSpec, NodeId};
use rand::seq::SliceRandom;
use rand::Rng;

fn point<R: Rng>(rng: &mut R, span: f64) -> (f64, f64) {
    (rng.gen_range(0.0..span), rng.gen_range(0.0..span))
}

/// Customers and stations scattered uniformly over a `span` square with the
/// depot in the middle. The battery comfortably covers any out-and-back trip.
pub fn roomy_instance<R: Rng>(rng: &mut R, customers: usize, stations: usize, capacity: u64) -> Instance {
    let span = 100.0;
    let spec = InstanceSpec {
        name: "roomy".into(),
        depot: (span / 2.0, span / 2.0),
        customers: (0..customers)
            .map(|_| {
                let (x, y) = point(rng, span);
                (x, y, rng.gen_range(1..=capacity))
            })
            .collect(),
        stations: (0..stations).map(|_| point(rng, span)).collect(),
        capacity,
        battery: 10.0 * span,
        consumption: 1.0,
        ..Default::default()
    };
    Instance::from_spec(spec).unwrap()
}

/// Like [`roomy_instance`] but with a battery of `fraction` times the longest
/// out-and-back trip, so routes usually need charging.
pub fn tight_instance<R: Rng>(
    rng: &mut R,
    customers: usize,
    stations: usize,
    capacity: u64,
    fraction: f64,
) -> Instance {
    tight_instance_with_demand(rng, customers, stations, capacity, capacity, fraction)
}

/// [`tight_instance`] with demands drawn from `1..=max_demand`.
pub fn tight_instance_with_demand<R: Rng>(
    rng: &mut R,
    customers: usize,
    stations: usize,
    capacity: u64,
    max_demand: u64,
    fraction: f64,
) -> Instance {
    let span = 100.0;
    let depot = (span / 2.0, span / 2.0);
    let cust: Vec<(f64, f64, u64)> = (0..customers)
        .map(|_| {
            let (x, y) = point(rng, span);
            (x, y, rng.gen_range(1..=max_demand))
        })
        .collect();
    let far = cust.iter().map(|&(x, y, _)| ((x - depot.0).powi(2) + (y - depot.1).powi(2)).sqrt()).fold(1.0, f64::max);
    let consumption = rng.gen_range(0.8..1.5);
    let spec = InstanceSpec {
        name: "tight".into(),
        depot,
        customers: cust,
        stations: (0..stations).map(|_| point(rng, span)).collect(),
        capacity,
        battery: fraction * 2.0 * far * consumption,
        consumption,
        ..Default::default()
    };
    Instance::from_spec(spec).unwrap()
}

pub fn shuffled_customers<R: Rng>(inst: &Instance, rng: &mut R) -> Vec<NodeId> {
    let mut perm = inst.customers().to_vec();
    perm.shuffle(rng);
    perm
}

/// Instance whose customers all fit in one vehicle, for single-route checks.
pub fn route_fixture<R: Rng>(rng: &mut R, customers: usize, stations: usize, fraction: f64) -> Instance {
    tight_instance_with_demand(rng, customers, stations, 100, 100 / customers.max(1) as u64, fraction)
}
