//! Charging-station insertion for fixed routes.
//!
//! The battery is discretised into `K` levels; level `i` stands for
//! `i * B / (K - 1)` units of energy and every leg consumes its energy
//! rounded *up* to whole bins, so a route accepted by the table is always
//! feasible for the continuous battery model.
//!
//! Between two consecutive route nodes the vehicle either drives straight
//! through or detours via an entry station and an exit station. The cheapest
//! station-to-station chain (each hop drivable on a full battery) is
//! precomputed once per instance in a [`StationPathTable`]. Arriving at the
//! next node after a detour leaves a full battery minus the exit leg.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::{Instance, NodeId};
use crate::solution::{ChargedSolution, RoutePlan};

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
#[error("route cannot be served even with charging stops")]
pub struct Infeasible;

/// Maps energies onto whole battery bins.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinScale {
    k: usize,
    bin_energy: f64,
}

impl BinScale {
    /// # Panics
    /// If `k < 2`.
    pub fn new(k: usize, battery: f64) -> Self {
        assert!(k >= 2, "need at least two battery bins, got {k}");
        BinScale { k, bin_energy: battery / (k - 1) as f64 }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn bin_energy(&self) -> f64 {
        self.bin_energy
    }

    /// Index of the full-battery bin.
    pub fn full(&self) -> usize {
        self.k - 1
    }

    /// Whole bins needed to cover `energy`, rounded up. Saturates above the
    /// full battery so callers can compare against [`BinScale::full`].
    #[inline]
    pub fn bins_for(&self, energy: f64) -> usize {
        if energy <= 0.0 {
            return 0;
        }
        let bins = (energy / self.bin_energy).ceil();
        if bins > self.k as f64 {
            self.k
        } else {
            bins as usize
        }
    }
}

/// All-pairs cheapest station chains where every hop fits on a full battery.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StationPathTable {
    stations: Vec<NodeId>,
    cost: Vec<f64>,
    /// `pred[a * m + b]` is the station preceding `b` on the chain from `a`.
    pred: Vec<usize>,
}

const NO_PRED: usize = usize::MAX;

impl StationPathTable {
    /// Dijkstra from every station over the dense station graph.
    pub fn build(inst: &Instance) -> Self {
        let stations = inst.stations().to_vec();
        let m = stations.len();
        let mut cost = vec![f64::INFINITY; m * m];
        let mut pred = vec![NO_PRED; m * m];
        let battery = inst.battery();
        let hop = |a: usize, b: usize| {
            let e = inst.energy(stations[a], stations[b]);
            (e <= battery).then(|| inst.distance(stations[a], stations[b]))
        };
        let mut done = vec![false; m];
        for src in 0..m {
            let row = &mut cost[src * m..(src + 1) * m];
            let prow = &mut pred[src * m..(src + 1) * m];
            done.fill(false);
            row[src] = 0.0;
            for _ in 0..m {
                let mut u = NO_PRED;
                for v in 0..m {
                    if !done[v] && row[v].is_finite() && (u == NO_PRED || row[v] < row[u]) {
                        u = v;
                    }
                }
                if u == NO_PRED {
                    break;
                }
                done[u] = true;
                for v in 0..m {
                    if done[v] {
                        continue;
                    }
                    if let Some(d) = hop(u, v) {
                        let cand = row[u] + d;
                        if cand < row[v] {
                            row[v] = cand;
                            prow[v] = u;
                        }
                    }
                }
            }
        }
        StationPathTable { stations, cost, pred }
    }

    pub fn len(&self) -> usize {
        self.stations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stations.is_empty()
    }

    /// Node id of the station at table position `a`.
    pub fn station(&self, a: usize) -> NodeId {
        self.stations[a]
    }

    /// Chain distance between table positions `a` and `b` (infinite if unreachable).
    #[inline]
    pub fn cost(&self, a: usize, b: usize) -> f64 {
        self.cost[a * self.stations.len() + b]
    }

    /// Stations visited from `a` to `b`, both ends included.
    pub fn path(&self, a: usize, b: usize) -> Vec<NodeId> {
        let m = self.stations.len();
        let mut out = vec![self.stations[b]];
        let mut at = b;
        while at != a {
            at = self.pred[a * m + at];
            assert!(at != NO_PRED, "no chain between stations {a} and {b}");
            out.push(self.stations[at]);
        }
        out.reverse();
        out
    }
}

/// One depot-to-depot route with its charging stops.
#[derive(Debug, Clone, PartialEq)]
pub struct ChargedRoute {
    pub visits: Vec<NodeId>,
    pub distance: f64,
}

#[derive(Clone, Copy, Debug)]
enum Parent {
    None,
    Direct,
    Charge { from: u32, entry: u32, exit: u32 },
}

/// Inserts charging stops into `route` (customers only, depot implied at
/// both ends) with a `k`-bin battery.
///
/// Runs in `O(r * (K + m^2))` for a route of `r` customers and `m` stations:
/// for each entry station only the best residual able to reach it matters,
/// which a suffix minimum over the previous column supplies.
pub fn insert_stations(
    route: &[NodeId],
    k: usize,
    inst: &Instance,
    table: &StationPathTable,
) -> Result<ChargedRoute, Infeasible> {
    let depot = inst.depot();
    let mut nodes = Vec::with_capacity(route.len() + 2);
    nodes.push(depot);
    nodes.extend_from_slice(route);
    nodes.push(depot);

    // the whole route fits on one battery
    let direct_energy: f64 = nodes.windows(2).map(|w| inst.energy(w[0], w[1])).sum();
    if direct_energy <= inst.battery() {
        let distance = nodes.windows(2).map(|w| inst.distance(w[0], w[1])).sum();
        return Ok(ChargedRoute { visits: nodes, distance });
    }

    let scale = BinScale::new(k, inst.battery());
    let full = scale.full();
    let m = table.len();
    let cols = nodes.len();
    let mut dp = vec![f64::INFINITY; cols * k];
    let mut parent = vec![Parent::None; cols * k];
    dp[full] = 0.0;

    let mut suffix_val = vec![f64::INFINITY; k + 1];
    let mut suffix_arg = vec![0usize; k + 1];
    let mut entry_best = vec![(f64::INFINITY, 0usize); m];

    for j in 1..cols {
        let (prev_col, cur_col) = dp.split_at_mut(j * k);
        let prev_col = &prev_col[(j - 1) * k..];
        let cur_col = &mut cur_col[..k];
        let cur_parent = &mut parent[j * k..(j + 1) * k];
        let from = nodes[j - 1];
        let to = nodes[j];

        let leg_bins = scale.bins_for(inst.energy(from, to));
        if leg_bins <= full {
            let leg = inst.distance(from, to);
            for i in 0..=(full - leg_bins) {
                let p = prev_col[i + leg_bins];
                if p < f64::INFINITY {
                    cur_col[i] = p + leg;
                    cur_parent[i] = Parent::Direct;
                }
            }
        }

        if m == 0 {
            continue;
        }
        // best residual at j-1 with at least `i` bins left
        suffix_val[k] = f64::INFINITY;
        for i in (0..k).rev() {
            // ties keep the larger residual
            if prev_col[i] < suffix_val[i + 1] {
                suffix_val[i] = prev_col[i];
                suffix_arg[i] = i;
            } else {
                suffix_val[i] = suffix_val[i + 1];
                suffix_arg[i] = suffix_arg[i + 1];
            }
        }
        for (a, slot) in entry_best.iter_mut().enumerate() {
            let s = table.station(a);
            let need = scale.bins_for(inst.energy(from, s));
            *slot = if need <= full && suffix_val[need].is_finite() {
                (suffix_val[need] + inst.distance(from, s), suffix_arg[need])
            } else {
                (f64::INFINITY, 0)
            };
        }
        for b in 0..m {
            let s = table.station(b);
            let exit_bins = scale.bins_for(inst.energy(s, to));
            if exit_bins > full {
                continue;
            }
            let tail = inst.distance(s, to);
            let target = full - exit_bins;
            for (a, &(head, from_bin)) in entry_best.iter().enumerate() {
                if !head.is_finite() {
                    continue;
                }
                let chain = table.cost(a, b);
                if !chain.is_finite() {
                    continue;
                }
                let cand = head + chain + tail;
                if cand < cur_col[target] {
                    cur_col[target] = cand;
                    cur_parent[target] = Parent::Charge { from: from_bin as u32, entry: a as u32, exit: b as u32 };
                }
            }
        }
    }

    let last = (cols - 1) * k;
    let mut best = f64::INFINITY;
    let mut best_i = 0;
    for i in 0..k {
        if dp[last + i] < best {
            best = dp[last + i];
            best_i = i;
        }
    }
    if !best.is_finite() {
        return Err(Infeasible);
    }

    let mut rev_visits = vec![nodes[cols - 1]];
    let mut i = best_i;
    for j in (1..cols).rev() {
        match parent[j * k + i] {
            Parent::Direct => {
                i += scale.bins_for(inst.energy(nodes[j - 1], nodes[j]));
            }
            Parent::Charge { from, entry, exit } => {
                let chain = table.path(entry as usize, exit as usize);
                rev_visits.extend(chain.into_iter().rev());
                i = from as usize;
            }
            Parent::None => unreachable!("finite cell without parent"),
        }
        rev_visits.push(nodes[j - 1]);
    }
    rev_visits.reverse();
    let distance = rev_visits.windows(2).map(|w| inst.distance(w[0], w[1])).sum();
    Ok(ChargedRoute { visits: rev_visits, distance })
}

/// Charges every route of `plan`; the battery is full at each depot departure.
pub fn repair_solution(
    plan: &RoutePlan,
    k: usize,
    inst: &Instance,
    table: &StationPathTable,
) -> Result<ChargedSolution, Infeasible> {
    let routes = plan
        .routes
        .iter()
        .map(|r| insert_stations(r, k, inst, table).map(|c| c.visits))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ChargedSolution::from_routes(routes, inst))
}

/// Splits `perm` into capacity-feasible routes minimising the *charged*
/// distance: `best[j] = min_i best[i] + insert_stations(perm[i..j])`.
///
/// Slower than the distance-only split, so it is only worth running when the
/// distance-optimal routes of `perm` cannot all be charged.
pub fn charged_split(
    perm: &[NodeId],
    k: usize,
    inst: &Instance,
    table: &StationPathTable,
) -> Result<(RoutePlan, ChargedSolution), Infeasible> {
    let n = perm.len();
    let mut best = vec![f64::INFINITY; n + 1];
    let mut back: Vec<Option<(usize, Vec<NodeId>)>> = vec![None; n + 1];
    best[0] = 0.0;
    for i in 0..n {
        if !best[i].is_finite() {
            continue;
        }
        let mut load = 0;
        for j in i + 1..=n {
            load += inst.demand(perm[j - 1]);
            if load > inst.capacity() {
                break;
            }
            if let Ok(route) = insert_stations(&perm[i..j], k, inst, table) {
                let cand = best[i] + route.distance;
                if cand < best[j] {
                    best[j] = cand;
                    back[j] = Some((i, route.visits));
                }
            }
        }
    }
    if !best[n].is_finite() {
        return Err(Infeasible);
    }
    let mut routes = Vec::new();
    let mut visits = Vec::new();
    let mut j = n;
    while j > 0 {
        let (i, v) = back[j].take().expect("finite prefix has a predecessor");
        routes.push(perm[i..j].to_vec());
        visits.push(v);
        j = i;
    }
    routes.reverse();
    visits.reverse();
    let depot = inst.depot();
    let split_cost = routes
        .iter()
        .map(|r| {
            inst.distance(depot, r[0])
                + r.windows(2).map(|w| inst.distance(w[0], w[1])).sum::<f64>()
                + inst.distance(r[r.len() - 1], depot)
        })
        .sum();
    Ok((RoutePlan { routes, split_cost }, ChargedSolution::from_routes(visits, inst)))
}
