//! EVRP instances: parsing, serialization and Euclidean geometry.
//!
//! The accepted text format is the TSPLIB-flavoured layout used by the
//! WCCI2020 EVRP benchmark: a block of `KEY: value` header lines followed by
//! `NODE_COORD_SECTION`, `DEMAND_SECTION`, `STATIONS_COORD_SECTION`,
//! `DEPOT_SECTION` and a closing `EOF`. File ids are 1-based and are
//! remapped to dense 0-based [`NodeId`]s (`file id - 1`).

use std::fmt::{self, Write as _};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Dense 0-based index of a node inside an [`Instance`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub usize);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeKind {
    Depot,
    Customer,
    Station,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub kind: NodeKind,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum InstanceError {
    #[error("line {line}: missing mandatory header key {key}")]
    MissingKey { line: usize, key: &'static str },
    #[error("line {line}: duplicate node id {id}")]
    DuplicateNode { line: usize, id: usize },
    #[error("line {line}: node id {id} is outside 1..={max}")]
    NodeOutOfRange { line: usize, id: usize, max: usize },
    #[error("line {line}: demand given for unknown node {id}")]
    UnknownNode { line: usize, id: usize },
    #[error("line {line}: demand {demand} of node {id} exceeds capacity {capacity}")]
    DemandExceedsCapacity { line: usize, id: usize, demand: u64, capacity: u64 },
    #[error("line {line}: malformed number {text:?}")]
    BadNumber { line: usize, text: String },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: missing EOF terminator")]
    MissingEof { line: usize },
    #[error("invalid instance: {0}")]
    Invalid(String),
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
}

/// Immutable EVRP problem description with a precomputed distance matrix.
///
/// Safe to share between concurrent solver runs.
#[derive(Debug, Clone)]
pub struct Instance {
    name: String,
    nodes: Vec<Node>,
    demand: Vec<u64>,
    capacity: u64,
    battery: f64,
    consumption: f64,
    declared_vehicles: Option<u64>,
    declared_optimum: Option<f64>,
    depot: NodeId,
    customers: Vec<NodeId>,
    stations: Vec<NodeId>,
    cargo_unit: u64,
    dist: Vec<f64>,
}

/// Everything needed to assemble an [`Instance`] programmatically.
#[derive(Debug, Clone, Default)]
pub struct InstanceSpec {
    pub name: String,
    pub depot: (f64, f64),
    /// `(x, y, demand)` for each customer.
    pub customers: Vec<(f64, f64, u64)>,
    pub stations: Vec<(f64, f64)>,
    pub capacity: u64,
    pub battery: f64,
    pub consumption: f64,
    pub declared_vehicles: Option<u64>,
    pub declared_optimum: Option<f64>,
}

impl Instance {
    /// Builds an instance with the depot at index 0, customers next, then stations.
    pub fn from_spec(spec: InstanceSpec) -> Result<Self, InstanceError> {
        let mut nodes = Vec::with_capacity(1 + spec.customers.len() + spec.stations.len());
        let mut demand = Vec::with_capacity(nodes.capacity());
        nodes.push((NodeKind::Depot, spec.depot.0, spec.depot.1));
        demand.push(0);
        for &(x, y, d) in &spec.customers {
            nodes.push((NodeKind::Customer, x, y));
            demand.push(d);
        }
        for &(x, y) in &spec.stations {
            nodes.push((NodeKind::Station, x, y));
            demand.push(0);
        }
        Self::assemble(
            spec.name,
            nodes,
            demand,
            spec.capacity,
            spec.battery,
            spec.consumption,
            spec.declared_vehicles,
            spec.declared_optimum,
        )
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        name: String,
        raw: Vec<(NodeKind, f64, f64)>,
        demand: Vec<u64>,
        capacity: u64,
        battery: f64,
        consumption: f64,
        declared_vehicles: Option<u64>,
        declared_optimum: Option<f64>,
    ) -> Result<Self, InstanceError> {
        if capacity == 0 {
            return Err(InstanceError::Invalid("cargo capacity must be positive".into()));
        }
        if !(battery > 0.0 && battery.is_finite()) {
            return Err(InstanceError::Invalid("battery capacity must be positive".into()));
        }
        if !(consumption > 0.0 && consumption.is_finite()) {
            return Err(InstanceError::Invalid("consumption rate must be positive".into()));
        }
        let depots = raw.iter().filter(|n| n.0 == NodeKind::Depot).count();
        if depots != 1 {
            return Err(InstanceError::Invalid(format!("expected exactly one depot, found {depots}")));
        }
        let mut nodes = Vec::with_capacity(raw.len());
        let mut customers = Vec::new();
        let mut stations = Vec::new();
        let mut depot = NodeId(0);
        for (i, &(kind, x, y)) in raw.iter().enumerate() {
            if !(x.is_finite() && y.is_finite()) {
                return Err(InstanceError::Invalid(format!("node {i} has non-finite coordinates")));
            }
            let id = NodeId(i);
            match kind {
                NodeKind::Depot => depot = id,
                NodeKind::Customer => customers.push(id),
                NodeKind::Station => stations.push(id),
            }
            if kind != NodeKind::Customer && demand[i] != 0 {
                return Err(InstanceError::Invalid(format!("non-customer node {i} has demand")));
            }
            if demand[i] > capacity {
                return Err(InstanceError::Invalid(format!(
                    "demand {} of node {i} exceeds capacity {capacity}",
                    demand[i]
                )));
            }
            nodes.push(Node { id, kind, x, y });
        }

        let n = nodes.len();
        let mut dist = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let dx = nodes[i].x - nodes[j].x;
                let dy = nodes[i].y - nodes[j].y;
                let d = (dx * dx + dy * dy).sqrt();
                dist[i * n + j] = d;
                dist[j * n + i] = d;
            }
        }

        let cargo_unit = customers.iter().map(|c| demand[c.index()]).fold(capacity, gcd);

        Ok(Instance {
            name,
            nodes,
            demand,
            capacity,
            battery,
            consumption,
            declared_vehicles,
            declared_optimum,
            depot,
            customers,
            stations,
            cargo_unit,
            dist,
        })
    }

    pub fn parse(source: &str) -> Result<Self, InstanceError> {
        Parser::new(source).run()
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, InstanceError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| InstanceError::Io { path: path.display().to_string(), message: e.to_string() })?;
        Self::parse(&text)
    }

    /// Writes the instance back in the benchmark text format.
    pub fn to_evrp_string(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "NAME: {}", self.name);
        let _ = writeln!(out, "TYPE: EVRP");
        if let Some(v) = self.declared_optimum {
            let _ = writeln!(out, "OPTIMAL_VALUE: {v:?}");
        }
        if let Some(v) = self.declared_vehicles {
            let _ = writeln!(out, "VEHICLES: {v}");
        }
        let _ = writeln!(out, "DIMENSION: {}", self.customers.len() + 1);
        let _ = writeln!(out, "STATIONS: {}", self.stations.len());
        let _ = writeln!(out, "CAPACITY: {}", self.capacity);
        let _ = writeln!(out, "ENERGY_CAPACITY: {:?}", self.battery);
        let _ = writeln!(out, "ENERGY_CONSUMPTION: {:?}", self.consumption);
        let _ = writeln!(out, "EDGE_WEIGHT_TYPE: EUC_2D");
        let _ = writeln!(out, "NODE_COORD_SECTION");
        for node in &self.nodes {
            let _ = writeln!(out, "{} {:?} {:?}", self.file_id(node.id), node.x, node.y);
        }
        let _ = writeln!(out, "DEMAND_SECTION");
        for node in &self.nodes {
            if node.kind != NodeKind::Station {
                let _ = writeln!(out, "{} {}", self.file_id(node.id), self.demand[node.id.index()]);
            }
        }
        let _ = writeln!(out, "STATIONS_COORD_SECTION");
        for &s in &self.stations {
            let _ = writeln!(out, "{}", self.file_id(s));
        }
        let _ = writeln!(out, "DEPOT_SECTION");
        let _ = writeln!(out, "{}", self.file_id(self.depot));
        let _ = writeln!(out, "-1");
        let _ = writeln!(out, "EOF");
        out
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.index()]
    }

    pub fn kind(&self, id: NodeId) -> NodeKind {
        self.nodes[id.index()].kind
    }

    /// Total node count `|V_c| + |V_s| + 1`.
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn depot(&self) -> NodeId {
        self.depot
    }

    pub fn customers(&self) -> &[NodeId] {
        &self.customers
    }

    pub fn stations(&self) -> &[NodeId] {
        &self.stations
    }

    pub fn demand(&self, id: NodeId) -> u64 {
        self.demand[id.index()]
    }

    pub fn capacity(&self) -> u64 {
        self.capacity
    }

    pub fn battery(&self) -> f64 {
        self.battery
    }

    pub fn consumption(&self) -> f64 {
        self.consumption
    }

    pub fn declared_vehicles(&self) -> Option<u64> {
        self.declared_vehicles
    }

    pub fn declared_optimum(&self) -> Option<f64> {
        self.declared_optimum
    }

    /// Greatest common divisor of the capacity and every customer demand.
    ///
    /// Dividing all cargo quantities by this unit leaves every capacity
    /// decision unchanged and shrinks the split table.
    pub fn cargo_unit(&self) -> u64 {
        self.cargo_unit
    }

    /// 1-based id as written in instance and solution files.
    pub fn file_id(&self, id: NodeId) -> usize {
        id.index() + 1
    }

    pub fn from_file_id(&self, file_id: usize) -> Option<NodeId> {
        (file_id >= 1 && file_id <= self.nodes.len()).then(|| NodeId(file_id - 1))
    }

    /// Exact Euclidean distance.
    #[inline]
    pub fn distance(&self, i: NodeId, j: NodeId) -> f64 {
        self.dist[i.index() * self.nodes.len() + j.index()]
    }

    /// Battery energy consumed on the direct leg `i -> j`.
    #[inline]
    pub fn energy(&self, i: NodeId, j: NodeId) -> f64 {
        self.consumption * self.distance(i, j)
    }
}

impl PartialEq for Instance {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.nodes == other.nodes
            && self.demand == other.demand
            && self.capacity == other.capacity
            && self.battery == other.battery
            && self.consumption == other.consumption
            && self.declared_vehicles == other.declared_vehicles
            && self.declared_optimum == other.declared_optimum
            && self.depot == other.depot
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Section {
    Header,
    Coords,
    Demand,
    Stations,
    Depot,
}

struct Parser<'a> {
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
    name: String,
    dimension: Option<usize>,
    station_count: Option<usize>,
    capacity: Option<u64>,
    battery: Option<f64>,
    consumption: Option<f64>,
    vehicles: Option<u64>,
    optimum: Option<f64>,
    coords: Vec<Option<(f64, f64)>>,
    demand_entries: Vec<(usize, usize, u64)>,
    station_ids: Vec<(usize, usize)>,
    depot_ids: Vec<(usize, usize)>,
}

fn parse_num<T: std::str::FromStr>(text: &str, line: usize) -> Result<T, InstanceError> {
    text.trim().parse().map_err(|_| InstanceError::BadNumber { line, text: text.trim().to_string() })
}

fn section_of(keyword: &str) -> Option<Section> {
    match keyword.to_ascii_uppercase().as_str() {
        "NODE_COORD_SECTION" => Some(Section::Coords),
        "DEMAND_SECTION" => Some(Section::Demand),
        "STATIONS_COORD_SECTION" => Some(Section::Stations),
        "DEPOT_SECTION" => Some(Section::Depot),
        _ => None,
    }
}

impl<'a> Parser<'a> {
    fn new(source: &'a str) -> Self {
        Parser {
            lines: source.lines().enumerate(),
            name: String::new(),
            dimension: None,
            station_count: None,
            capacity: None,
            battery: None,
            consumption: None,
            vehicles: None,
            optimum: None,
            coords: Vec::new(),
            demand_entries: Vec::new(),
            station_ids: Vec::new(),
            depot_ids: Vec::new(),
        }
    }

    fn header(&mut self, key: &str, value: &str, line: usize) -> Result<(), InstanceError> {
        match key.to_ascii_uppercase().as_str() {
            "NAME" => self.name = value.to_string(),
            "DIMENSION" => self.dimension = Some(parse_num(value, line)?),
            "STATIONS" => self.station_count = Some(parse_num(value, line)?),
            "CAPACITY" => self.capacity = Some(parse_num(value, line)?),
            "ENERGY_CAPACITY" => self.battery = Some(parse_num(value, line)?),
            "ENERGY_CONSUMPTION" => self.consumption = Some(parse_num(value, line)?),
            "VEHICLES" => self.vehicles = Some(parse_num(value, line)?),
            "OPTIMAL_VALUE" => self.optimum = Some(parse_num(value, line)?),
            "EDGE_WEIGHT_TYPE" if !value.eq_ignore_ascii_case("EUC_2D") => {
                return Err(InstanceError::Malformed {
                    line,
                    message: format!("unsupported EDGE_WEIGHT_TYPE {value}"),
                });
            }
            // TYPE, COMMENT and unknown keys are skipped
            _ => {}
        }
        Ok(())
    }

    fn total_nodes(&mut self, line: usize) -> Result<usize, InstanceError> {
        if self.coords.is_empty() {
            let dim = self.dimension.ok_or(InstanceError::MissingKey { line, key: "DIMENSION" })?;
            let st = self.station_count.ok_or(InstanceError::MissingKey { line, key: "STATIONS" })?;
            self.coords = vec![None; dim + st];
        }
        Ok(self.coords.len())
    }

    fn node_id(&mut self, text: &str, line: usize) -> Result<usize, InstanceError> {
        let id: usize = parse_num(text, line)?;
        let max = self.total_nodes(line)?;
        if id == 0 || id > max {
            return Err(InstanceError::NodeOutOfRange { line, id, max });
        }
        Ok(id)
    }

    fn run(mut self) -> Result<Instance, InstanceError> {
        let mut section = Section::Header;
        let mut last_line = 0;
        let mut first_section_line = None;
        let mut saw_eof = false;
        while let Some((idx, raw)) = self.lines.next() {
            let line = idx + 1;
            last_line = line;
            let text = raw.trim();
            if text.is_empty() {
                continue;
            }
            if text.eq_ignore_ascii_case("EOF") {
                saw_eof = true;
                break;
            }
            if let Some(next) = section_of(text.split_whitespace().next().unwrap_or("")) {
                section = next;
                first_section_line.get_or_insert(line);
                self.total_nodes(line)?;
                continue;
            }
            match section {
                Section::Header => {
                    let Some((key, value)) = text.split_once(':') else {
                        return Err(InstanceError::Malformed {
                            line,
                            message: format!("expected `KEY: value`, got {text:?}"),
                        });
                    };
                    self.header(key.trim(), value.trim(), line)?;
                }
                Section::Coords => {
                    let fields: Vec<&str> = text.split_whitespace().collect();
                    if fields.len() != 3 {
                        return Err(InstanceError::Malformed {
                            line,
                            message: "coordinate lines need `id x y`".into(),
                        });
                    }
                    let id = self.node_id(fields[0], line)?;
                    let x: f64 = parse_num(fields[1], line)?;
                    let y: f64 = parse_num(fields[2], line)?;
                    if self.coords[id - 1].is_some() {
                        return Err(InstanceError::DuplicateNode { line, id });
                    }
                    self.coords[id - 1] = Some((x, y));
                }
                Section::Demand => {
                    let fields: Vec<&str> = text.split_whitespace().collect();
                    if fields.len() != 2 {
                        return Err(InstanceError::Malformed { line, message: "demand lines need `id demand`".into() });
                    }
                    let id: usize = parse_num(fields[0], line)?;
                    let demand: u64 = parse_num(fields[1], line)?;
                    if id == 0 || id > self.coords.len() || self.coords[id - 1].is_none() {
                        return Err(InstanceError::UnknownNode { line, id });
                    }
                    if self.demand_entries.iter().any(|e| e.1 == id) {
                        return Err(InstanceError::DuplicateNode { line, id });
                    }
                    self.demand_entries.push((line, id, demand));
                }
                Section::Stations => {
                    for field in text.split_whitespace() {
                        let id = self.node_id(field, line)?;
                        self.station_ids.push((line, id));
                    }
                }
                Section::Depot => {
                    for field in text.split_whitespace() {
                        let id: i64 = parse_num(field, line)?;
                        if id == -1 {
                            continue;
                        }
                        let id = self.node_id(field, line)?;
                        self.depot_ids.push((line, id));
                    }
                }
            }
        }
        if !saw_eof {
            return Err(InstanceError::MissingEof { line: last_line });
        }
        let key_line = first_section_line.unwrap_or(last_line);
        let capacity = self.capacity.ok_or(InstanceError::MissingKey { line: key_line, key: "CAPACITY" })?;
        let battery = self.battery.ok_or(InstanceError::MissingKey { line: key_line, key: "ENERGY_CAPACITY" })?;
        let consumption =
            self.consumption.ok_or(InstanceError::MissingKey { line: key_line, key: "ENERGY_CONSUMPTION" })?;
        let total = self.total_nodes(key_line)?;

        let mut kinds = vec![NodeKind::Customer; total];
        for &(line, id) in &self.station_ids {
            if kinds[id - 1] == NodeKind::Station {
                return Err(InstanceError::DuplicateNode { line, id });
            }
            kinds[id - 1] = NodeKind::Station;
        }
        match self.depot_ids.as_slice() {
            [(line, id)] => {
                if kinds[id - 1] == NodeKind::Station {
                    return Err(InstanceError::Malformed {
                        line: *line,
                        message: format!("node {id} cannot be both depot and station"),
                    });
                }
                kinds[id - 1] = NodeKind::Depot;
            }
            [] => return Err(InstanceError::Malformed { line: last_line, message: "no depot given".into() }),
            [_, (line, _), ..] => {
                return Err(InstanceError::Malformed { line: *line, message: "more than one depot".into() })
            }
        }

        let mut demand = vec![0u64; total];
        for &(line, id, d) in &self.demand_entries {
            if d > capacity {
                return Err(InstanceError::DemandExceedsCapacity { line, id, demand: d, capacity });
            }
            if kinds[id - 1] != NodeKind::Customer && d != 0 {
                return Err(InstanceError::Malformed {
                    line,
                    message: format!("non-customer node {id} has non-zero demand"),
                });
            }
            demand[id - 1] = d;
        }

        let mut raw = Vec::with_capacity(total);
        for (i, c) in self.coords.iter().enumerate() {
            let (x, y) = c.ok_or_else(|| InstanceError::Malformed {
                line: key_line,
                message: format!("node {} has no coordinates", i + 1),
            })?;
            raw.push((kinds[i], x, y));
        }
        Instance::assemble(self.name, raw, demand, capacity, battery, consumption, self.vehicles, self.optimum)
    }
}
