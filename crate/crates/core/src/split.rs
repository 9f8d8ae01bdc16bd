//! Exact route assignment for a fixed customer order.
//!
//! `dp[i][j]` is the shortest depot-inclusive distance that serves the first
//! `j` customers of the permutation and leaves `i` units of cargo capacity
//! after customer `j`. Column `j` is built from column `j - 1` either by
//! driving straight on (`dp[i + d_j][j-1] + d(c_{j-1}, c_j)`) or by going
//! back to the depot first, which resets the capacity to `Q - d_j`.
//!
//! Cargo quantities are divided by [`Instance::cargo_unit`] before the table
//! is built. Only two columns are alive at a time; backtracking uses one
//! restock record per column since every other cell must have been reached
//! by driving straight on.

use thiserror::Error;

use crate::instance::{Instance, NodeId};
use crate::solution::RoutePlan;

#[derive(Debug, Error, PartialEq)]
pub enum SplitError {
    #[error("customer {0} has demand above the vehicle capacity")]
    InfeasibleDemand(NodeId),
}

/// Cell value: distance first, then route count for tie-breaking.
#[derive(Clone, Copy, PartialEq, Debug)]
struct Cell {
    cost: f64,
    routes: u32,
}

impl Cell {
    const INF: Cell = Cell { cost: f64::INFINITY, routes: u32::MAX };

    #[inline]
    fn better_than(self, other: Cell) -> bool {
        self.cost < other.cost || (self.cost == other.cost && self.routes < other.routes)
    }
}

#[derive(Clone, Copy, Debug)]
struct Restock {
    /// Whether the cell `Q - d_j` of this column was reached via the depot.
    won: bool,
    /// Residual capacity in column `j - 1` the restock came from.
    from: usize,
}

/// Splits `perm` into capacity-feasible routes of minimal total distance.
pub fn split(perm: &[NodeId], inst: &Instance) -> Result<RoutePlan, SplitError> {
    if perm.is_empty() {
        return Ok(RoutePlan { routes: Vec::new(), split_cost: 0.0 });
    }
    let unit = inst.cargo_unit();
    let cap = (inst.capacity() / unit) as usize;
    let demand: Vec<usize> = perm
        .iter()
        .map(|&c| {
            let d = inst.demand(c);
            if d > inst.capacity() {
                Err(SplitError::InfeasibleDemand(c))
            } else {
                Ok((d / unit) as usize)
            }
        })
        .collect::<Result<_, _>>()?;
    let depot = inst.depot();
    let n = perm.len();

    let mut prev = vec![Cell::INF; cap + 1];
    let mut cur = vec![Cell::INF; cap + 1];
    prev[cap] = Cell { cost: 0.0, routes: 1 };
    let mut restocks = Vec::with_capacity(n);

    for j in 0..n {
        let dj = demand[j];
        let here = perm[j];
        let from_node = if j == 0 { depot } else { perm[j - 1] };
        let leg = inst.distance(from_node, here);
        cur.fill(Cell::INF);

        // drive straight on
        for i in 0..=(cap - dj) {
            let p = prev[i + dj];
            if p.cost.is_finite() {
                cur[i] = Cell { cost: p.cost + leg, routes: p.routes };
            }
        }

        // back to the depot between customer j-1 and j (the first customer
        // already leaves from the depot)
        let mut record = Restock { won: false, from: 0 };
        if j > 0 {
            let mut best = Cell::INF;
            let mut best_i = 0;
            for (i, &p) in prev.iter().enumerate() {
                if p.better_than(best) {
                    best = p;
                    best_i = i;
                }
            }
            if best.cost.is_finite() {
                let via_depot = Cell {
                    cost: best.cost + inst.distance(from_node, depot) + inst.distance(depot, here),
                    routes: best.routes + 1,
                };
                let target = cap - dj;
                if via_depot.better_than(cur[target]) {
                    cur[target] = via_depot;
                    record = Restock { won: true, from: best_i };
                }
            }
        }
        restocks.push(record);
        std::mem::swap(&mut prev, &mut cur);
    }

    let last = perm[n - 1];
    let mut best = Cell::INF;
    let mut best_i = 0;
    for (i, &p) in prev.iter().enumerate() {
        if p.better_than(best) {
            best = p;
            best_i = i;
        }
    }
    let split_cost = best.cost + inst.distance(last, depot);

    // Walk back through the columns: a cell at residual i in column j came from
    // the depot iff the column's restock record won exactly that cell.
    let mut starts = Vec::new();
    let mut i = best_i;
    for j in (0..n).rev() {
        let rec = restocks[j];
        if rec.won && i == cap - demand[j] {
            starts.push(j);
            i = rec.from;
        } else {
            i += demand[j];
        }
    }
    starts.push(0);
    starts.reverse();
    starts.dedup();

    let mut routes = Vec::with_capacity(starts.len());
    for (k, &s) in starts.iter().enumerate() {
        let e = starts.get(k + 1).copied().unwrap_or(n);
        routes.push(perm[s..e].to_vec());
    }
    Ok(RoutePlan { routes, split_cost })
}

/// Admissible lower bound on [`split`]'s cost for `perm`.
///
/// Combines two bounds: the open path through the permutation plus both
/// depot end legs (each inserted depot visit can only lengthen the path, by
/// the triangle inequality), and twice the largest depot-customer distance.
pub fn split_cost_lower_bound(perm: &[NodeId], inst: &Instance) -> f64 {
    let (Some(&first), Some(&last)) = (perm.first(), perm.last()) else {
        return 0.0;
    };
    let depot = inst.depot();
    let open: f64 = perm.windows(2).map(|w| inst.distance(w[0], w[1])).sum();
    let path_bound = inst.distance(depot, first) + open + inst.distance(last, depot);
    let radius = perm.iter().map(|&c| inst.distance(depot, c)).fold(0.0, f64::max);
    path_bound.max(2.0 * radius)
}
