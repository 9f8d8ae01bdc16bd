//! Genotypes, route plans and charged solutions, plus the feasibility checker.

use std::collections::hash_map::DefaultHasher;
use std::fmt;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::{Instance, NodeId, NodeKind};

/// Absolute slack allowed when checking a battery level against zero.
pub const BATTERY_TOLERANCE: f64 = 1e-9;

/// Order-sensitive 64-bit digest of a customer sequence.
pub fn genotype_hash(perm: &[NodeId]) -> u64 {
    let mut hasher = DefaultHasher::new();
    perm.hash(&mut hasher);
    hasher.finish()
}

/// A customer permutation with caches filled in by evaluation.
///
/// `route_starts` holds the index of the first customer of every route from
/// the latest split (always starting with 0). Any change to the permutation
/// goes through [`Genotype::new`] or [`Genotype::set_perm`], which drop the
/// fitness cache.
#[derive(Debug, Clone, PartialEq)]
pub struct Genotype {
    perm: Vec<NodeId>,
    route_starts: Option<Vec<usize>>,
    fitness: Option<f64>,
    hash: u64,
}

impl Genotype {
    pub fn new(perm: Vec<NodeId>) -> Self {
        let hash = genotype_hash(&perm);
        Genotype { perm, route_starts: None, fitness: None, hash }
    }

    pub fn perm(&self) -> &[NodeId] {
        &self.perm
    }

    pub fn into_perm(self) -> Vec<NodeId> {
        self.perm
    }

    pub fn hash(&self) -> u64 {
        self.hash
    }

    pub fn fitness(&self) -> Option<f64> {
        self.fitness
    }

    /// Fitness for ranking; unevaluated individuals rank with the infeasible ones.
    pub fn rank_key(&self) -> f64 {
        self.fitness.unwrap_or(f64::INFINITY)
    }

    pub fn route_starts(&self) -> Option<&[usize]> {
        self.route_starts.as_deref()
    }

    /// Replaces the permutation. Route boundaries survive only when the caller
    /// asks for it (within-route reorderings keep route membership).
    pub fn set_perm(&mut self, perm: Vec<NodeId>, keep_routes: bool) {
        self.hash = genotype_hash(&perm);
        self.perm = perm;
        self.fitness = None;
        if !keep_routes {
            self.route_starts = None;
        }
    }

    pub fn set_route_starts(&mut self, starts: Vec<usize>) {
        debug_assert!(starts.first().map_or(self.perm.is_empty(), |&s| s == 0));
        debug_assert!(starts.windows(2).all(|w| w[0] < w[1]));
        self.route_starts = Some(starts);
    }

    pub fn set_fitness(&mut self, fitness: f64) {
        self.fitness = Some(fitness);
    }

    /// Index ranges of the cached routes.
    pub fn route_ranges(&self) -> Option<Vec<std::ops::Range<usize>>> {
        let starts = self.route_starts.as_ref()?;
        Some(ranges_from_starts(starts, self.perm.len()))
    }

    /// Route index of every position, from the cached boundaries.
    pub fn route_index_by_position(&self) -> Option<Vec<usize>> {
        let ranges = self.route_ranges()?;
        let mut out = vec![0; self.perm.len()];
        for (r, range) in ranges.into_iter().enumerate() {
            out[range].fill(r);
        }
        Some(out)
    }

    /// True when `perm` holds every customer of `inst` exactly once.
    pub fn is_permutation_of(&self, inst: &Instance) -> bool {
        is_customer_permutation(&self.perm, inst)
    }
}

pub(crate) fn ranges_from_starts(starts: &[usize], len: usize) -> Vec<std::ops::Range<usize>> {
    starts.iter().enumerate().map(|(k, &s)| s..starts.get(k + 1).copied().unwrap_or(len)).collect()
}

pub fn is_customer_permutation(perm: &[NodeId], inst: &Instance) -> bool {
    if perm.len() != inst.customers().len() {
        return false;
    }
    let mut seen = vec![false; inst.node_count()];
    for &c in perm {
        if c.index() >= seen.len() || inst.kind(c) != NodeKind::Customer || seen[c.index()] {
            return false;
        }
        seen[c.index()] = true;
    }
    true
}

/// Capacity-feasible partition of a permutation into depot-delimited routes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutePlan {
    pub routes: Vec<Vec<NodeId>>,
    /// Depot-inclusive distance of the routes, without any charging detours.
    pub split_cost: f64,
}

impl RoutePlan {
    /// Start index of each route inside the concatenated permutation.
    pub fn route_starts(&self) -> Vec<usize> {
        let mut starts = Vec::with_capacity(self.routes.len());
        let mut at = 0;
        for r in &self.routes {
            starts.push(at);
            at += r.len();
        }
        starts
    }

    pub fn concatenated(&self) -> Vec<NodeId> {
        self.routes.iter().flatten().copied().collect()
    }
}

/// Routes with charging stops, plus battery and cargo traces.
///
/// Every route is a full node sequence starting and ending at the depot.
/// `battery_trace[r][k]` is the energy left on arrival at visit `k` of route
/// `r` (before any recharge), and `cargo_trace[r][k]` the unused cargo
/// capacity after serving visit `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChargedSolution {
    pub routes: Vec<Vec<NodeId>>,
    pub total_distance: f64,
    pub battery_trace: Vec<Vec<f64>>,
    pub cargo_trace: Vec<Vec<i64>>,
}

impl ChargedSolution {
    /// Builds a solution from full depot-to-depot routes, computing all traces.
    pub fn from_routes(routes: Vec<Vec<NodeId>>, inst: &Instance) -> Self {
        let mut battery_trace = Vec::with_capacity(routes.len());
        let mut cargo_trace = Vec::with_capacity(routes.len());
        for route in &routes {
            let (battery, cargo) = simulate_route(route, inst);
            battery_trace.push(battery);
            cargo_trace.push(cargo);
        }
        let total_distance = routes_distance(&routes, inst);
        ChargedSolution { routes, total_distance, battery_trace, cargo_trace }
    }

    pub fn empty() -> Self {
        ChargedSolution { routes: Vec::new(), total_distance: 0.0, battery_trace: Vec::new(), cargo_trace: Vec::new() }
    }

    /// Writes one route per line as space separated file ids, then `COST <value>`.
    pub fn to_text(&self, inst: &Instance) -> String {
        let mut out = String::new();
        for route in &self.routes {
            let line: Vec<String> = route.iter().map(|&n| inst.file_id(n).to_string()).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out.push_str(&format!("COST {:.6}\n", self.total_distance));
        out
    }

    pub fn to_json(&self, inst: &Instance) -> serde_json::Value {
        let routes: Vec<Vec<usize>> =
            self.routes.iter().map(|r| r.iter().map(|&n| inst.file_id(n)).collect()).collect();
        serde_json::json!({
            "routes": routes,
            "battery_trace": self.battery_trace,
            "cargo_trace": self.cargo_trace,
            "objective": self.total_distance,
        })
    }

    /// Parses the text format written by [`ChargedSolution::to_text`]; a
    /// trailing `COST` line is optional and ignored.
    pub fn parse_text(text: &str, inst: &Instance) -> Result<Self, SolutionParseError> {
        let mut routes = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let raw = raw.trim();
            if raw.is_empty() {
                continue;
            }
            if raw.to_ascii_uppercase().starts_with("COST") {
                continue;
            }
            let mut route = Vec::new();
            for field in raw.split_whitespace() {
                let id: usize = field
                    .parse()
                    .map_err(|_| SolutionParseError { line, message: format!("bad node id {field:?}") })?;
                let node = inst
                    .from_file_id(id)
                    .ok_or_else(|| SolutionParseError { line, message: format!("unknown node id {id}") })?;
                route.push(node);
            }
            routes.push(route);
        }
        Ok(ChargedSolution::from_routes(routes, inst))
    }
}

#[derive(Debug, Error, PartialEq)]
#[error("line {line}: {message}")]
pub struct SolutionParseError {
    pub line: usize,
    pub message: String,
}

fn routes_distance(routes: &[Vec<NodeId>], inst: &Instance) -> f64 {
    routes.iter().map(|r| r.windows(2).map(|w| inst.distance(w[0], w[1])).sum::<f64>()).sum()
}

fn simulate_route(route: &[NodeId], inst: &Instance) -> (Vec<f64>, Vec<i64>) {
    let mut battery = Vec::with_capacity(route.len());
    let mut cargo = Vec::with_capacity(route.len());
    let mut level = inst.battery();
    let mut load = inst.capacity() as i64;
    for (k, &node) in route.iter().enumerate() {
        if k > 0 {
            level -= inst.energy(route[k - 1], node);
        }
        battery.push(level);
        if inst.kind(node) != NodeKind::Customer {
            level = inst.battery();
        }
        load -= inst.demand(node) as i64;
        cargo.push(load);
    }
    (battery, cargo)
}

/// Total distance over consecutive visit pairs of every route.
pub fn objective(sol: &ChargedSolution, inst: &Instance) -> f64 {
    routes_distance(&sol.routes, inst)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConstraintTag {
    CustomerOnce,
    FlowConservation,
    Battery,
    Cargo,
    DepotEndpoints,
}

impl fmt::Display for ConstraintTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub tag: ConstraintTag,
    pub location: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ViolationReport {
    pub violations: Vec<Violation>,
}

impl ViolationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, tag: ConstraintTag) -> bool {
        self.violations.iter().any(|v| v.tag == tag)
    }

    fn push(&mut self, tag: ConstraintTag, location: String) {
        self.violations.push(Violation { tag, location });
    }
}

impl fmt::Display for ViolationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return writeln!(f, "feasible");
        }
        for v in &self.violations {
            writeln!(f, "{}: {}", v.tag, v.location)?;
        }
        Ok(())
    }
}

/// Checks a solution against the formulation: customers served once, routes
/// anchored at the depot, battery never negative (full recharge at the depot
/// and at every station) and route demand within capacity.
///
/// The battery and cargo checks re-simulate the routes; the stored traces are
/// not trusted.
pub fn validate(sol: &ChargedSolution, inst: &Instance) -> ViolationReport {
    let mut report = ViolationReport::default();
    let depot = inst.depot();
    let mut visits = vec![0usize; inst.node_count()];

    for (r, route) in sol.routes.iter().enumerate() {
        let fid = |n: NodeId| inst.file_id(n);
        if route.len() < 2 || route[0] != depot || route[route.len() - 1] != depot {
            report.push(ConstraintTag::DepotEndpoints, format!("route {r} does not start and end at the depot"));
        }
        for (k, w) in route.windows(2).enumerate() {
            if w[0] == w[1] {
                report.push(
                    ConstraintTag::FlowConservation,
                    format!("route {r}, leg {k}: self-loop at node {}", fid(w[0])),
                );
            }
        }
        if route.len() > 2 {
            for (k, &n) in route[1..route.len() - 1].iter().enumerate() {
                if n == depot {
                    report.push(
                        ConstraintTag::FlowConservation,
                        format!("route {r}, visit {}: depot inside route", k + 1),
                    );
                }
            }
        }
        for &n in route {
            if inst.kind(n) == NodeKind::Customer {
                visits[n.index()] += 1;
            }
        }

        let mut level = inst.battery();
        for (k, w) in route.windows(2).enumerate() {
            level -= inst.energy(w[0], w[1]);
            if level < -BATTERY_TOLERANCE {
                report.push(
                    ConstraintTag::Battery,
                    format!("route {r}, leg {k} ({} -> {}): battery at {:.6}", fid(w[0]), fid(w[1]), level),
                );
                // continue from an empty battery
                level = 0.0;
            }
            if inst.kind(w[1]) != NodeKind::Customer {
                level = inst.battery();
            }
        }

        let load: u64 = route.iter().map(|&n| inst.demand(n)).sum();
        if load > inst.capacity() {
            report.push(ConstraintTag::Cargo, format!("route {r}: load {load} exceeds capacity {}", inst.capacity()));
        }
    }

    for &c in inst.customers() {
        match visits[c.index()] {
            1 => {}
            0 => report.push(ConstraintTag::CustomerOnce, format!("customer {} not visited", inst.file_id(c))),
            n => report.push(ConstraintTag::CustomerOnce, format!("customer {} visited {n} times", inst.file_id(c))),
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::InstanceSpec;

    fn tiny() -> Instance {
        Instance::from_spec(InstanceSpec {
            name: "tiny".into(),
            depot: (0.0, 0.0),
            customers: vec![(1.0, 0.0, 1), (2.0, 0.0, 1)],
            stations: vec![(1.0, 1.0)],
            capacity: 2,
            battery: 10.0,
            consumption: 1.0,
            ..Default::default()
        })
        .unwrap()
    }

    fn ids(v: &[usize]) -> Vec<NodeId> {
        v.iter().map(|&i| NodeId(i)).collect()
    }

    #[test]
    fn objective_of_out_and_back() {
        let inst = Instance::from_spec(InstanceSpec {
            customers: vec![(3.0, 4.0, 1)],
            capacity: 1,
            battery: 100.0,
            consumption: 1.0,
            ..Default::default()
        })
        .unwrap();
        let sol = ChargedSolution::from_routes(vec![ids(&[0, 1, 0])], &inst);
        assert_eq!(objective(&sol, &inst), 10.0);
        assert_eq!(sol.total_distance, 10.0);
        assert_eq!(objective(&ChargedSolution::empty(), &inst), 0.0);
    }

    #[test]
    fn feasible_two_route_solution() {
        let inst = tiny();
        let sol = ChargedSolution::from_routes(vec![ids(&[0, 1, 0]), ids(&[0, 3, 2, 0])], &inst);
        assert!(validate(&sol, &inst).is_empty());
        assert_eq!(sol.cargo_trace[0], vec![2, 1, 1]);
        assert_eq!(sol.battery_trace[0], vec![10.0, 9.0, 8.0]);
    }

    #[test]
    fn duplicated_customer() {
        let inst = tiny();
        let sol = ChargedSolution::from_routes(vec![ids(&[0, 1, 0]), ids(&[0, 1, 2, 0])], &inst);
        let report = validate(&sol, &inst);
        assert!(report.has(ConstraintTag::CustomerOnce));
        assert!(!report.has(ConstraintTag::Battery));
    }

    #[test]
    fn battery_deficit_on_return_leg() {
        let inst = Instance::from_spec(InstanceSpec {
            customers: vec![(6.0, 0.0, 1)],
            capacity: 1,
            battery: 10.0,
            consumption: 1.0,
            ..Default::default()
        })
        .unwrap();
        let sol = ChargedSolution::from_routes(vec![ids(&[0, 1, 0])], &inst);
        let report = validate(&sol, &inst);
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].tag, ConstraintTag::Battery);
        assert!(report.violations[0].location.contains("leg 1"), "{}", report);
        assert_eq!(sol.battery_trace[0], vec![10.0, 4.0, -2.0]);
    }

    #[test]
    fn cargo_and_endpoint_violations() {
        let inst = tiny();
        let sol = ChargedSolution::from_routes(vec![ids(&[0, 1, 2, 1])], &inst);
        let report = validate(&sol, &inst);
        assert!(report.has(ConstraintTag::DepotEndpoints));
        assert!(report.has(ConstraintTag::Cargo));
        assert!(report.has(ConstraintTag::CustomerOnce));
    }

    #[test]
    fn reversal_keeps_objective() {
        let inst = tiny();
        let a = ChargedSolution::from_routes(vec![ids(&[0, 3, 2, 1, 0])], &inst);
        let b = ChargedSolution::from_routes(vec![ids(&[0, 1, 2, 3, 0])], &inst);
        assert!((objective(&a, &inst) - objective(&b, &inst)).abs() < 1e-12);
    }

    #[test]
    fn hash_is_order_sensitive() {
        let p = ids(&[1, 2, 3, 4]);
        let mut r = p.clone();
        r.reverse();
        assert_eq!(genotype_hash(&p), genotype_hash(&p.clone()));
        assert_ne!(genotype_hash(&p), genotype_hash(&r));
    }

    #[test]
    fn no_hash_collisions_over_random_perms() {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let base = ids(&(1..=50).collect::<Vec<_>>());
        let mut perms = std::collections::HashSet::new();
        let mut hashes = std::collections::HashSet::new();
        while perms.len() < 10_000 {
            let mut p = base.clone();
            p.shuffle(&mut rng);
            if perms.insert(p.clone()) {
                assert!(hashes.insert(genotype_hash(&p)), "collision");
            }
        }
    }

    #[test]
    fn text_round_trip() {
        let inst = tiny();
        let sol = ChargedSolution::from_routes(vec![ids(&[0, 1, 0]), ids(&[0, 3, 2, 0])], &inst);
        let text = sol.to_text(&inst);
        assert!(text.starts_with("1 2 1\n1 4 3 1\nCOST "));
        let back = ChargedSolution::parse_text(&text, &inst).unwrap();
        assert_eq!(back, sol);
        let err = ChargedSolution::parse_text("1 9 1\n", &inst).unwrap_err();
        assert_eq!(err.line, 1);
    }

    #[test]
    fn genotype_cache_rules() {
        let mut g = Genotype::new(ids(&[1, 2]));
        g.set_route_starts(vec![0, 1]);
        g.set_fitness(3.0);
        g.set_perm(ids(&[2, 1]), true);
        assert_eq!(g.fitness(), None);
        assert_eq!(g.route_starts(), Some(&[0, 1][..]));
        assert_eq!(g.route_index_by_position(), Some(vec![0, 1]));
        g.set_perm(ids(&[1, 2]), false);
        assert_eq!(g.route_starts(), None);
    }
}
