//! Intra-route 2-opt and swap descent on the customer order.
//!
//! Only customer-to-customer edges inside a route are scored; depot legs and
//! charging stops are left to the later stages. Moves are accepted as soon
//! as they shorten the route and the scan restarts, until a full pass finds
//! nothing.

use crate::instance::{Instance, NodeId};
use crate::solution::Genotype;

/// Smallest gain accepted as an improvement; keeps float noise from cycling.
const MIN_GAIN: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Neighbourhood {
    TwoOpt,
    Swap,
}

/// Sum of consecutive customer distances, no depot legs.
pub fn intra_route_distance(route: &[NodeId], inst: &Instance) -> f64 {
    route.windows(2).map(|w| inst.distance(w[0], w[1])).sum()
}

/// Improves every cached route of `g` to a local optimum of `mode`.
///
/// Returns the genotype unchanged when it has no cached routes. Route
/// membership is preserved, so the boundaries stay valid.
pub fn local_search(g: &Genotype, mode: Neighbourhood, inst: &Instance) -> Genotype {
    let Some(ranges) = g.route_ranges() else {
        return g.clone();
    };
    let mut perm = g.perm().to_vec();
    let mut changed = false;
    for range in ranges {
        changed |= improve_route(&mut perm[range], mode, inst) > 0;
    }
    if !changed {
        return g.clone();
    }
    let mut out = g.clone();
    out.set_perm(perm, true);
    out
}

/// Runs descent on one route in place; returns the number of accepted moves.
pub fn improve_route(route: &mut [NodeId], mode: Neighbourhood, inst: &Instance) -> usize {
    let n = route.len();
    if n < 2 {
        return 0;
    }
    let d = |a: NodeId, b: NodeId| inst.distance(a, b);
    let mut moves = 0;
    'restart: loop {
        for i in 0..n - 1 {
            for j in i + 1..n {
                let delta = match mode {
                    Neighbourhood::TwoOpt => two_opt_delta(route, i, j, d),
                    Neighbourhood::Swap => swap_delta(route, i, j, d),
                };
                if delta < -MIN_GAIN {
                    match mode {
                        Neighbourhood::TwoOpt => route[i..=j].reverse(),
                        Neighbourhood::Swap => route.swap(i, j),
                    }
                    moves += 1;
                    continue 'restart;
                }
            }
        }
        return moves;
    }
}

/// Change in open-path length from reversing `route[i..=j]`.
fn two_opt_delta(route: &[NodeId], i: usize, j: usize, d: impl Fn(NodeId, NodeId) -> f64) -> f64 {
    let n = route.len();
    let mut delta = 0.0;
    if i > 0 {
        delta += d(route[i - 1], route[j]) - d(route[i - 1], route[i]);
    }
    if j + 1 < n {
        delta += d(route[i], route[j + 1]) - d(route[j], route[j + 1]);
    }
    delta
}

/// Change in open-path length from exchanging positions `i < j`.
fn swap_delta(route: &[NodeId], i: usize, j: usize, d: impl Fn(NodeId, NodeId) -> f64) -> f64 {
    if j == i + 1 {
        return two_opt_delta(route, i, j, d);
    }
    let n = route.len();
    let (a, b) = (route[i], route[j]);
    let mut delta = 0.0;
    if i > 0 {
        delta += d(route[i - 1], b) - d(route[i - 1], a);
    }
    delta += d(b, route[i + 1]) - d(a, route[i + 1]);
    delta += d(route[j - 1], a) - d(route[j - 1], b);
    if j + 1 < n {
        delta += d(a, route[j + 1]) - d(b, route[j + 1]);
    }
    delta
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::InstanceSpec;

    fn points(pts: &[(f64, f64)]) -> Instance {
        Instance::from_spec(InstanceSpec {
            depot: (-5.0, -5.0),
            customers: pts.iter().map(|&(x, y)| (x, y, 1)).collect(),
            capacity: pts.len() as u64,
            battery: 1e6,
            consumption: 1.0,
            ..Default::default()
        })
        .unwrap()
    }

    fn one_route(perm: Vec<usize>) -> Genotype {
        let mut g = Genotype::new(perm.into_iter().map(NodeId).collect());
        g.set_route_starts(vec![0]);
        g
    }

    #[test]
    fn intra_route_distance_basics() {
        let inst = points(&[(0.0, 0.0), (3.0, 4.0)]);
        assert_eq!(intra_route_distance(&[NodeId(1)], &inst), 0.0);
        assert_eq!(intra_route_distance(&[NodeId(1), NodeId(2)], &inst), 5.0);
    }

    #[test]
    fn optimal_route_is_a_fixpoint() {
        let inst = points(&[(1.0, 0.0), (2.0, 0.0), (3.0, 0.0)]);
        let g = one_route(vec![1, 2, 3]);
        for mode in [Neighbourhood::TwoOpt, Neighbourhood::Swap] {
            assert_eq!(local_search(&g, mode, &inst).perm(), g.perm());
        }
    }

    #[test]
    fn collinear_route_becomes_monotone() {
        // nodes 1,2,3 sit at x = 3, 1, 2; visiting order 3,1,2 by x is non-monotone
        let inst = points(&[(3.0, 0.0), (1.0, 0.0), (2.0, 0.0)]);
        let g = one_route(vec![1, 2, 3]);
        let before = intra_route_distance(g.perm(), &inst);
        assert_eq!(before, 3.0);
        for mode in [Neighbourhood::TwoOpt, Neighbourhood::Swap] {
            let out = local_search(&g, mode, &inst);
            let xs: Vec<f64> = out.perm().iter().map(|&c| inst.node(c).x).collect();
            assert!(xs == [1.0, 2.0, 3.0] || xs == [3.0, 2.0, 1.0], "{xs:?}");
            assert_eq!(intra_route_distance(out.perm(), &inst), 2.0);
        }
    }

    #[test]
    fn two_opt_uncrosses_square() {
        let inst = points(&[(0.0, 0.0), (1.0, 1.0), (1.0, 0.0), (0.0, 1.0)]);
        let g = one_route(vec![1, 2, 3, 4]);
        let before = intra_route_distance(g.perm(), &inst);
        assert!((before - (1.0 + 2.0 * 2f64.sqrt())).abs() < 1e-12);
        let out = local_search(&g, Neighbourhood::TwoOpt, &inst);
        // any open path along three sides of the square is uncrossed
        assert_eq!(intra_route_distance(out.perm(), &inst), 3.0);
        let uncrossed = [NodeId(1), NodeId(3), NodeId(2), NodeId(4)];
        let mut g2 = Genotype::new(uncrossed.to_vec());
        g2.set_route_starts(vec![0]);
        assert_eq!(local_search(&g2, Neighbourhood::TwoOpt, &inst).perm(), &uncrossed);
    }

    #[test]
    fn routes_are_improved_independently() {
        let inst = points(&[(0.0, 0.0), (5.0, 0.0), (1.0, 0.0), (9.0, 9.0), (7.0, 7.0), (8.0, 8.0)]);
        let mut g = Genotype::new((1..=6).map(NodeId).collect());
        g.set_route_starts(vec![0, 3]);
        let out = local_search(&g, Neighbourhood::Swap, &inst);
        let ranges = out.route_ranges().unwrap();
        let mut first: Vec<_> = out.perm()[ranges[0].clone()].to_vec();
        first.sort();
        assert_eq!(first, vec![NodeId(1), NodeId(2), NodeId(3)]);
        assert_eq!(out.route_starts(), Some(&[0, 3][..]));
    }

    #[test]
    fn deltas_match_full_recomputation() {
        let inst = points(&[(0.0, 0.0), (4.0, 1.0), (2.0, 5.0), (7.0, 3.0), (1.0, 8.0), (6.0, 6.0)]);
        let route: Vec<NodeId> = (1..=6).map(NodeId).collect();
        let d = |a, b| inst.distance(a, b);
        let base = intra_route_distance(&route, &inst);
        for i in 0..5 {
            for j in i + 1..6 {
                let mut r = route.clone();
                r[i..=j].reverse();
                let want = intra_route_distance(&r, &inst) - base;
                assert!((two_opt_delta(&route, i, j, d) - want).abs() < 1e-9);
                let mut r = route.clone();
                r.swap(i, j);
                let want = intra_route_distance(&r, &inst) - base;
                assert!((swap_delta(&route, i, j, d) - want).abs() < 1e-9);
            }
        }
    }
}
