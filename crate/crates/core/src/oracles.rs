//! Exhaustive reference solvers for tiny instances.
//!
//! None of these share code with the dynamic programs they check: the split
//! oracle enumerates depot-insertion patterns, the charging oracle enumerates
//! station sequences per leg against a continuous battery, and the EVRP
//! oracle combines both over every customer permutation.

use std::collections::HashMap;

use crate::instance::{Instance, NodeId, NodeKind};
use crate::solution::{ChargedSolution, BATTERY_TOLERANCE};

/// Minimal depot-inclusive split cost of `perm` and the route start indices
/// achieving it, by trying all `2^(n-1)` depot-insertion patterns.
///
/// Returns `(INFINITY, [])` when no pattern respects the capacity.
pub fn brute_split(perm: &[NodeId], inst: &Instance) -> (f64, Vec<usize>) {
    let n = perm.len();
    if n == 0 {
        return (0.0, Vec::new());
    }
    assert!(n <= 20, "pattern enumeration is exponential");
    let depot = inst.depot();
    let mut best = (f64::INFINITY, Vec::new());
    for mask in 0u32..(1 << (n - 1)) {
        // bit k set: a new route starts at position k + 1
        let mut starts = vec![0];
        starts.extend((0..n - 1).filter(|k| mask & (1 << k) != 0).map(|k| k + 1));
        let mut cost = 0.0;
        let mut ok = true;
        for (r, &s) in starts.iter().enumerate() {
            let e = starts.get(r + 1).copied().unwrap_or(n);
            let load: u64 = perm[s..e].iter().map(|&c| inst.demand(c)).sum();
            if load > inst.capacity() {
                ok = false;
                break;
            }
            cost += inst.distance(depot, perm[s]);
            for k in s..e - 1 {
                cost += inst.distance(perm[k], perm[k + 1]);
            }
            cost += inst.distance(perm[e - 1], depot);
        }
        if ok && cost < best.0 {
            best = (cost, starts);
        }
    }
    best
}

/// Cheapest continuous-battery charging of one route.
#[derive(Debug, Clone, PartialEq)]
pub struct BruteCharge {
    pub cost: f64,
    pub visits: Vec<NodeId>,
}

#[derive(Clone)]
struct Label {
    battery: f64,
    cost: f64,
    visits: Vec<NodeId>,
}

/// Station sequences of length `0..=max_len` (repetition allowed).
fn station_sequences(stations: &[NodeId], max_len: usize) -> Vec<Vec<NodeId>> {
    let mut all = vec![Vec::new()];
    let mut layer = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for seq in &layer {
            for &s in stations {
                let mut longer: Vec<NodeId> = seq.clone();
                longer.push(s);
                next.push(longer);
            }
        }
        all.extend(next.iter().cloned());
        layer = next;
    }
    all
}

/// Enumerates up to `max_insertions` station stops on every leg of the
/// depot-delimited `route` (customers only), simulating the battery exactly
/// with full recharges at stations. Labels that are both poorer in battery
/// and costlier than another label at the same route position are dropped,
/// which never discards an optimal completion.
pub fn brute_charge(route: &[NodeId], inst: &Instance, max_insertions: usize) -> Option<BruteCharge> {
    let depot = inst.depot();
    let mut nodes = vec![depot];
    nodes.extend_from_slice(route);
    nodes.push(depot);
    let sequences = station_sequences(inst.stations(), max_insertions);
    let full = inst.battery();

    let mut labels = vec![Label { battery: full, cost: 0.0, visits: vec![depot] }];
    for w in nodes.windows(2) {
        let (from, to) = (w[0], w[1]);
        let mut next = Vec::new();
        for label in &labels {
            'seq: for seq in &sequences {
                let mut battery = label.battery;
                let mut cost = label.cost;
                let mut at = from;
                for &stop in seq.iter().chain(std::iter::once(&to)) {
                    battery -= inst.energy(at, stop);
                    if battery < -BATTERY_TOLERANCE {
                        continue 'seq;
                    }
                    cost += inst.distance(at, stop);
                    if inst.kind(stop) != NodeKind::Customer {
                        battery = full;
                    }
                    at = stop;
                }
                let mut visits = label.visits.clone();
                visits.extend_from_slice(seq);
                visits.push(to);
                next.push(Label { battery, cost, visits });
            }
        }
        next.sort_by(|a, b| a.cost.total_cmp(&b.cost).then(b.battery.total_cmp(&a.battery)));
        let mut kept: Vec<Label> = Vec::new();
        for l in next {
            if kept.last().is_none_or(|k| l.battery > k.battery) {
                kept.push(l);
            }
        }
        if kept.is_empty() {
            return None;
        }
        labels = kept;
    }
    labels.into_iter().min_by(|a, b| a.cost.total_cmp(&b.cost)).map(|l| BruteCharge { cost: l.cost, visits: l.visits })
}

/// Global optimum of a tiny instance: every customer permutation, every
/// capacity-feasible depot pattern, and [`brute_charge`] with up to three
/// stops per leg on every route. `None` when nothing is feasible.
pub fn brute_evrp(inst: &Instance) -> Option<ChargedSolution> {
    const MAX_STOPS: usize = 3;
    let customers = inst.customers().to_vec();
    let n = customers.len();
    assert!(n <= 8, "permutation enumeration is factorial");
    if n == 0 {
        return Some(ChargedSolution::empty());
    }
    let mut memo: HashMap<Vec<NodeId>, Option<BruteCharge>> = HashMap::new();
    let mut best: Option<(f64, Vec<Vec<NodeId>>)> = None;

    let mut perm = customers;
    let mut c = vec![0usize; n];
    let mut visit = |perm: &[NodeId]| {
        for mask in 0u32..(1 << (n - 1)) {
            let mut starts = vec![0];
            starts.extend((0..n - 1).filter(|k| mask & (1 << k) != 0).map(|k| k + 1));
            let mut total = 0.0;
            let mut routes = Vec::with_capacity(starts.len());
            let mut ok = true;
            for (r, &s) in starts.iter().enumerate() {
                let e = starts.get(r + 1).copied().unwrap_or(n);
                let seg = &perm[s..e];
                if seg.iter().map(|&x| inst.demand(x)).sum::<u64>() > inst.capacity() {
                    ok = false;
                    break;
                }
                let charged = memo.entry(seg.to_vec()).or_insert_with(|| brute_charge(seg, inst, MAX_STOPS));
                match charged {
                    Some(ch) => {
                        total += ch.cost;
                        routes.push(ch.visits.clone());
                    }
                    None => {
                        ok = false;
                        break;
                    }
                }
            }
            if ok && best.as_ref().is_none_or(|b| total < b.0) {
                best = Some((total, routes));
            }
        }
    };
    // Heap's algorithm
    visit(&perm);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            visit(&perm);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    best.map(|(_, routes)| ChargedSolution::from_routes(routes, inst))
}
