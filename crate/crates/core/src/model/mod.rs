//! Network graph, component records and topology validation.
//!
//! A district heating network is a directed graph whose vertices are
//! junctions and whose edges are plants, pipes and loads. Steam leaves the
//! plant through the outgoing pipe system, condenses in the loads and returns
//! as water through the co-located return system.

mod synth;

pub use synth::{synth_network, SynthError, SynthSpec};

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::f64::consts::PI;
use std::fmt;
use thiserror::Error;

use crate::units::{celsius_to_kelvin, psi_to_pa};

/// Temperature at which the carrier changes phase, in kelvin.
pub const CONDENSATION_TEMPERATURE: f64 = 373.15;

/// Which half of the co-located network a junction or pipe belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// Steam side, plant outlet to load inlets.
    Outgoing,
    /// Condensate side, load outlets back to the plant inlet.
    Return,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Side::Outgoing => f.write_str("outgoing"),
            Side::Return => f.write_str("return"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Junction {
    pub id: String,
    /// Derived from the incident edges during validation.
    pub side: Side,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pipe {
    pub id: String,
    pub from: String,
    pub to: String,
    pub system: Side,
    /// m
    pub length: f64,
    /// Inner diameter, m.
    pub diameter: f64,
    /// Darcy-Weisbach friction factor.
    pub friction_factor: f64,
    /// W/(m·K)
    pub heat_loss_coeff: f64,
    /// Maximum additive boost of a pump at the pipe inlet, Pa. Zero when the
    /// pipe has no pump; only return pipes may carry one.
    #[serde(default)]
    pub pump_boost_max: f64,
}

impl Pipe {
    /// Inner cross-sectional area, always derived from the diameter.
    pub fn area(&self) -> f64 {
        PI * self.diameter * self.diameter / 4.0
    }

    pub fn has_pump(&self) -> bool {
        self.pump_boost_max > 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plant {
    pub id: String,
    /// Return-side inlet junction.
    pub from: String,
    /// Outgoing-side outlet junction.
    pub to: String,
    /// W
    pub power_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Load {
    pub id: String,
    /// Outgoing-side (steam) junction.
    pub from: String,
    /// Return-side (water) junction.
    pub to: String,
    /// Thermal demand, W.
    pub demand: f64,
}

/// Physical properties of steam and condensate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CarrierConstants {
    /// Specific gas constant of steam, J/(kg·K).
    pub r_steam: f64,
    /// Specific heat of steam at constant pressure, J/(kg·K).
    pub c_steam: f64,
    /// Specific heat of water, J/(kg·K).
    pub c_water: f64,
    /// Latent heat of vaporization, J/kg.
    pub latent_heat: f64,
    /// kg/m³
    pub rho_steam: f64,
    /// kg/m³
    pub rho_water: f64,
}

impl Default for CarrierConstants {
    fn default() -> Self {
        CarrierConstants {
            r_steam: 461.5,
            c_steam: 1996.0,
            c_water: 4186.0,
            latent_heat: 2.23e6,
            rho_steam: 0.5,
            rho_water: 1000.0,
        }
    }
}

impl CarrierConstants {
    /// Heat capacity of the carrier at the inlet and outlet of an edge.
    ///
    /// Steam flows through outgoing pipes and into loads and leaves plants;
    /// water flows through return pipes, out of loads and into plants.
    pub fn edge_capacities(&self, kind: EdgeKind) -> (f64, f64) {
        let (s, w) = (self.c_steam, self.c_water);
        match kind {
            EdgeKind::OutgoingPipe => (s, s),
            EdgeKind::ReturnPipe => (w, w),
            EdgeKind::Load => (s, w),
            EdgeKind::Plant => (w, s),
        }
    }

    fn check(&self, out: &mut Vec<ModelError>) {
        let fields = [
            ("r_steam", self.r_steam),
            ("c_steam", self.c_steam),
            ("c_water", self.c_water),
            ("latent_heat", self.latent_heat),
            ("rho_steam", self.rho_steam),
            ("rho_water", self.rho_water),
        ];
        for (field, value) in fields {
            if !(value > 0.0 && value.is_finite()) {
                out.push(ModelError::InvalidParameter {
                    id: "constants".into(),
                    field,
                    value,
                    requirement: "> 0",
                });
            }
        }
    }
}

/// Engineering limits on the network state. All values SI.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperationalBounds {
    pub t_max: f64,
    pub t_min: f64,
    /// Ambient temperature around the pipes.
    pub t_ext: f64,
    pub p_max: f64,
    pub p_min: f64,
    /// Lower bound on the plant outlet (steam) pressure.
    pub plant_outlet_p_min: f64,
    /// Lower bound on the plant inlet (condensate) pressure. Defaults to the
    /// global minimum; raise it to read the 40 psi requirement as an inlet
    /// floor instead of an outlet floor.
    #[serde(default)]
    pub plant_inlet_p_min: Option<f64>,
}

impl Default for OperationalBounds {
    fn default() -> Self {
        OperationalBounds {
            t_max: celsius_to_kelvin(150.0),
            t_min: celsius_to_kelvin(80.0),
            t_ext: celsius_to_kelvin(25.0),
            p_max: psi_to_pa(80.0),
            p_min: psi_to_pa(5.0),
            plant_outlet_p_min: psi_to_pa(40.0),
            plant_inlet_p_min: None,
        }
    }
}

impl OperationalBounds {
    pub fn plant_inlet_floor(&self) -> f64 {
        self.plant_inlet_p_min.unwrap_or(self.p_min)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let mut v = Vec::new();
        self.check(&mut v);
        match v.into_iter().next() {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }

    fn check(&self, out: &mut Vec<ModelError>) {
        let b = self;
        let all_finite = [b.t_max, b.t_min, b.t_ext, b.p_max, b.p_min, b.plant_outlet_p_min]
            .iter()
            .all(|v| v.is_finite());
        if !all_finite {
            out.push(ModelError::InvalidBounds("non-finite bound".into()));
            return;
        }
        if !(b.t_min < b.t_max) {
            out.push(ModelError::InvalidBounds(format!(
                "t_min ({}) must be below t_max ({})",
                b.t_min, b.t_max
            )));
        }
        if !(b.t_ext < b.t_min) {
            out.push(ModelError::InvalidBounds(format!(
                "t_ext ({}) must be below t_min ({})",
                b.t_ext, b.t_min
            )));
        }
        if !(b.t_ext > 0.0) {
            out.push(ModelError::InvalidBounds("t_ext must be positive".into()));
        }
        if !(b.p_min > 0.0 && b.p_min < b.p_max) {
            out.push(ModelError::InvalidBounds(format!(
                "require 0 < p_min ({}) < p_max ({})",
                b.p_min, b.p_max
            )));
        }
        for (name, floor) in [
            ("plant_outlet_p_min", Some(b.plant_outlet_p_min)),
            ("plant_inlet_p_min", b.plant_inlet_p_min),
        ] {
            if let Some(floor) = floor {
                if !(floor >= b.p_min && floor < b.p_max) {
                    out.push(ModelError::InvalidBounds(format!(
                        "{name} ({floor}) must lie in [p_min, p_max)"
                    )));
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    Plant,
    OutgoingPipe,
    ReturnPipe,
    Load,
}

impl EdgeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EdgeKind::Plant => "plant",
            EdgeKind::OutgoingPipe => "outgoing_pipe",
            EdgeKind::ReturnPipe => "return_pipe",
            EdgeKind::Load => "load",
        }
    }

    pub fn is_pipe(self) -> bool {
        matches!(self, EdgeKind::OutgoingPipe | EdgeKind::ReturnPipe)
    }
}

impl fmt::Display for EdgeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Unified view of one graph edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub kind: EdgeKind,
    /// Index into the component list of that kind.
    pub component: usize,
    pub from: usize,
    pub to: usize,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
    #[error("edge `{edge}` references unknown junction `{junction}`")]
    DanglingJunctionRef { edge: String, junction: String },
    #[error("graph is disconnected; unreachable junctions: {}", .0.join(", "))]
    DisconnectedGraph(Vec<String>),
    #[error("outgoing pipe `{0}` cannot carry a pump")]
    PumpOnOutgoingPipe(String),
    #[error("network has no plant")]
    PlantlessNetwork,
    #[error("network has no load")]
    LoadlessNetwork,
    #[error("network has no junctions")]
    EmptyNetwork,
    #[error("edge `{0}` starts and ends at the same junction")]
    SelfLoop(String),
    #[error("junction `{junction}` has no {missing} edge")]
    DeadEndJunction { junction: String, missing: &'static str },
    #[error("junction `{0}` touches both the outgoing and the return system")]
    SideConflict(String),
    #[error("`{id}`: {field} = {value} violates {requirement}")]
    InvalidParameter {
        id: String,
        field: &'static str,
        value: f64,
        requirement: &'static str,
    },
    #[error("invalid operational bounds: {0}")]
    InvalidBounds(String),
    #[error("diameter must be positive, got {0}")]
    NonpositiveDiameter(f64),
}

/// All violations found while validating a network.
#[derive(Debug, Clone, PartialEq, Error)]
pub struct ValidationErrors(pub Vec<ModelError>);

impl fmt::Display for ValidationErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} violation(s)", self.0.len())?;
        for e in &self.0 {
            write!(f, "\n  - {e}")?;
        }
        Ok(())
    }
}

impl ValidationErrors {
    pub fn contains(&self, pred: impl Fn(&ModelError) -> bool) -> bool {
        self.0.iter().any(pred)
    }
}

/// Cross-sectional area of a circular pipe, m².
pub fn cross_section_area(diameter: f64) -> Result<f64, ModelError> {
    if diameter > 0.0 && diameter.is_finite() {
        Ok(PI * diameter * diameter / 4.0)
    } else {
        Err(ModelError::NonpositiveDiameter(diameter))
    }
}

/// Unvalidated component lists, the serialized form of a [`Network`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawNetwork {
    pub junctions: Vec<String>,
    pub pipes: Vec<Pipe>,
    pub plants: Vec<Plant>,
    pub loads: Vec<Load>,
    #[serde(default)]
    pub constants: CarrierConstants,
    #[serde(default)]
    pub bounds: OperationalBounds,
}

/// A validated district heating network. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    junctions: Vec<Junction>,
    pipes: Vec<Pipe>,
    plants: Vec<Plant>,
    loads: Vec<Load>,
    constants: CarrierConstants,
    bounds: OperationalBounds,
    edges: Vec<Edge>,
    incoming: Vec<Vec<usize>>,
    outgoing: Vec<Vec<usize>>,
    junction_index: BTreeMap<String, usize>,
}

/// Validates raw components and builds a [`Network`].
///
/// Components are sorted by id so that every derived ordering (variable
/// layout, exported rows) is deterministic. Edges are indexed plants first,
/// then pipes, then loads.
pub fn build_network(raw: RawNetwork) -> Result<Network, ValidationErrors> {
    let RawNetwork {
        junctions,
        mut pipes,
        mut plants,
        mut loads,
        constants,
        bounds,
    } = raw;
    let mut errs = Vec::new();

    if junctions.is_empty() {
        errs.push(ModelError::EmptyNetwork);
    }
    if plants.is_empty() {
        errs.push(ModelError::PlantlessNetwork);
    }
    if loads.is_empty() {
        errs.push(ModelError::LoadlessNetwork);
    }
    constants.check(&mut errs);
    bounds.check(&mut errs);

    let mut junction_ids: Vec<String> = junctions;
    junction_ids.sort();
    let mut junction_index = BTreeMap::new();
    for (i, id) in junction_ids.iter().enumerate() {
        if junction_index.insert(id.clone(), i).is_some() {
            errs.push(ModelError::DuplicateId(id.clone()));
        }
    }
    junction_ids.dedup();
    // re-index after dedup so indices stay dense
    let junction_index: BTreeMap<String, usize> =
        junction_ids.iter().enumerate().map(|(i, id)| (id.clone(), i)).collect();

    pipes.sort_by(|a, b| a.id.cmp(&b.id));
    plants.sort_by(|a, b| a.id.cmp(&b.id));
    loads.sort_by(|a, b| a.id.cmp(&b.id));

    let mut edge_ids = BTreeSet::new();
    let all_edge_ids = plants
        .iter()
        .map(|p| &p.id)
        .chain(pipes.iter().map(|p| &p.id))
        .chain(loads.iter().map(|l| &l.id));
    for id in all_edge_ids {
        if junction_index.contains_key(id) || !edge_ids.insert(id.clone()) {
            errs.push(ModelError::DuplicateId(id.clone()));
        }
    }

    for p in &pipes {
        for (field, value) in [
            ("length", p.length),
            ("diameter", p.diameter),
            ("friction_factor", p.friction_factor),
            ("heat_loss_coeff", p.heat_loss_coeff),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                errs.push(ModelError::InvalidParameter {
                    id: p.id.clone(),
                    field,
                    value,
                    requirement: "> 0",
                });
            }
        }
        if !(p.pump_boost_max >= 0.0 && p.pump_boost_max.is_finite()) {
            errs.push(ModelError::InvalidParameter {
                id: p.id.clone(),
                field: "pump_boost_max",
                value: p.pump_boost_max,
                requirement: ">= 0",
            });
        }
        if p.system == Side::Outgoing && p.pump_boost_max > 0.0 {
            errs.push(ModelError::PumpOnOutgoingPipe(p.id.clone()));
        }
    }
    for p in &plants {
        if !(p.power_max > 0.0 && p.power_max.is_finite()) {
            errs.push(ModelError::InvalidParameter {
                id: p.id.clone(),
                field: "power_max",
                value: p.power_max,
                requirement: "> 0",
            });
        }
    }
    for l in &loads {
        if !(l.demand >= 0.0 && l.demand.is_finite()) {
            errs.push(ModelError::InvalidParameter {
                id: l.id.clone(),
                field: "demand",
                value: l.demand,
                requirement: ">= 0",
            });
        }
    }

    // Resolve endpoints and derive junction sides.
    let mut edges = Vec::new();
    let mut sides: Vec<BTreeSet<Side>> = vec![BTreeSet::new(); junction_ids.len()];
    {
        let mut add = |kind: EdgeKind,
                       component: usize,
                       id: &str,
                       from: &str,
                       to: &str,
                       from_side: Side,
                       to_side: Side,
                       errs: &mut Vec<ModelError>| {
            let f = junction_index.get(from).copied();
            let t = junction_index.get(to).copied();
            for (name, idx) in [(from, f), (to, t)] {
                if idx.is_none() {
                    errs.push(ModelError::DanglingJunctionRef {
                        edge: id.to_string(),
                        junction: name.to_string(),
                    });
                }
            }
            if let (Some(f), Some(t)) = (f, t) {
                if f == t {
                    errs.push(ModelError::SelfLoop(id.to_string()));
                }
                sides[f].insert(from_side);
                sides[t].insert(to_side);
                edges.push(Edge {
                    kind,
                    component,
                    from: f,
                    to: t,
                });
            }
        };
        for (i, p) in plants.iter().enumerate() {
            add(
                EdgeKind::Plant,
                i,
                &p.id,
                &p.from,
                &p.to,
                Side::Return,
                Side::Outgoing,
                &mut errs,
            );
        }
        for (i, p) in pipes.iter().enumerate() {
            let kind = match p.system {
                Side::Outgoing => EdgeKind::OutgoingPipe,
                Side::Return => EdgeKind::ReturnPipe,
            };
            add(kind, i, &p.id, &p.from, &p.to, p.system, p.system, &mut errs);
        }
        for (i, l) in loads.iter().enumerate() {
            add(
                EdgeKind::Load,
                i,
                &l.id,
                &l.from,
                &l.to,
                Side::Outgoing,
                Side::Return,
                &mut errs,
            );
        }
    }

    let mut incoming = vec![Vec::new(); junction_ids.len()];
    let mut outgoing = vec![Vec::new(); junction_ids.len()];
    for (e, edge) in edges.iter().enumerate() {
        outgoing[edge.from].push(e);
        incoming[edge.to].push(e);
    }

    let mut junctions = Vec::with_capacity(junction_ids.len());
    for (i, id) in junction_ids.iter().enumerate() {
        if incoming[i].is_empty() {
            errs.push(ModelError::DeadEndJunction {
                junction: id.clone(),
                missing: "incoming",
            });
        }
        if outgoing[i].is_empty() {
            errs.push(ModelError::DeadEndJunction {
                junction: id.clone(),
                missing: "outgoing",
            });
        }
        let side = match sides[i].len() {
            0 => Side::Outgoing,
            1 => *sides[i].iter().next().unwrap(),
            _ => {
                errs.push(ModelError::SideConflict(id.clone()));
                Side::Outgoing
            }
        };
        junctions.push(Junction { id: id.clone(), side });
    }

    if !junction_ids.is_empty() {
        let unreached = unreachable_junctions(junction_ids.len(), &edges);
        if !unreached.is_empty() {
            errs.push(ModelError::DisconnectedGraph(
                unreached.iter().map(|&i| junction_ids[i].clone()).collect(),
            ));
        }
    }

    if !errs.is_empty() {
        return Err(ValidationErrors(errs));
    }

    Ok(Network {
        junctions,
        pipes,
        plants,
        loads,
        constants,
        bounds,
        edges,
        incoming,
        outgoing,
        junction_index,
    })
}

fn unreachable_junctions(n: usize, edges: &[Edge]) -> Vec<usize> {
    let mut adj = vec![Vec::new(); n];
    for e in edges {
        adj[e.from].push(e.to);
        adj[e.to].push(e.from);
    }
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0]);
    seen[0] = true;
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    (0..n).filter(|&i| !seen[i]).collect()
}

/// Component census of a network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetworkSummary {
    pub junctions: usize,
    pub plants: usize,
    pub loads: usize,
    pub outgoing_pipes: usize,
    pub return_pipes: usize,
    pub pumps: usize,
    /// Independent loops in the outgoing and return pipe subgraphs.
    pub outgoing_loops: usize,
    pub return_loops: usize,
    pub total_demand: f64,
}

impl fmt::Display for NetworkSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} junctions, {} plant(s), {} loads, {}+{} pipes ({} pumps), total demand {:.2} MW",
            self.junctions,
            self.plants,
            self.loads,
            self.outgoing_pipes,
            self.return_pipes,
            self.pumps,
            self.total_demand / 1e6
        )
    }
}

impl Network {
    pub fn junctions(&self) -> &[Junction] {
        &self.junctions
    }

    pub fn pipes(&self) -> &[Pipe] {
        &self.pipes
    }

    pub fn plants(&self) -> &[Plant] {
        &self.plants
    }

    pub fn loads(&self) -> &[Load] {
        &self.loads
    }

    pub fn constants(&self) -> &CarrierConstants {
        &self.constants
    }

    pub fn bounds(&self) -> &OperationalBounds {
        &self.bounds
    }

    /// All edges: plants, then pipes, then loads, each sorted by id.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Edges delivering flow into junction `j`.
    pub fn incoming(&self, j: usize) -> &[usize] {
        &self.incoming[j]
    }

    /// Edges taking flow out of junction `j`.
    pub fn outgoing(&self, j: usize) -> &[usize] {
        &self.outgoing[j]
    }

    pub fn junction_index(&self, id: &str) -> Option<usize> {
        self.junction_index.get(id).copied()
    }

    pub fn edge_id(&self, e: usize) -> &str {
        let edge = &self.edges[e];
        match edge.kind {
            EdgeKind::Plant => &self.plants[edge.component].id,
            EdgeKind::OutgoingPipe | EdgeKind::ReturnPipe => &self.pipes[edge.component].id,
            EdgeKind::Load => &self.loads[edge.component].id,
        }
    }

    pub fn edge_index(&self, id: &str) -> Option<usize> {
        (0..self.edges.len()).find(|&e| self.edge_id(e) == id)
    }

    /// Edge index of the `i`-th plant.
    pub fn plant_edge(&self, i: usize) -> usize {
        i
    }

    /// Edge index of pipe `i`.
    pub fn pipe_edge(&self, i: usize) -> usize {
        self.plants.len() + i
    }

    /// Edge index of load `i`.
    pub fn load_edge(&self, i: usize) -> usize {
        self.plants.len() + self.pipes.len() + i
    }

    pub fn load_index(&self, id: &str) -> Option<usize> {
        self.loads.binary_search_by(|l| l.id.as_str().cmp(id)).ok()
    }

    pub fn pipe(&self, edge: &Edge) -> Option<&Pipe> {
        edge.kind.is_pipe().then(|| &self.pipes[edge.component])
    }

    /// Pipe indices that carry a pump, in pipe order.
    pub fn pumped_pipes(&self) -> Vec<usize> {
        (0..self.pipes.len()).filter(|&i| self.pipes[i].has_pump()).collect()
    }

    pub fn total_demand(&self) -> f64 {
        self.loads.iter().map(|l| l.demand).sum()
    }

    /// Edge capacities `(c_in, c_out)` for edge `e`.
    pub fn edge_capacities(&self, e: usize) -> (f64, f64) {
        self.constants.edge_capacities(self.edges[e].kind)
    }

    pub fn summary(&self) -> NetworkSummary {
        let count = |side| self.pipes.iter().filter(|p| p.system == side).count();
        let side_nodes = |side| self.junctions.iter().filter(|j| j.side == side).count();
        NetworkSummary {
            junctions: self.junctions.len(),
            plants: self.plants.len(),
            loads: self.loads.len(),
            outgoing_pipes: count(Side::Outgoing),
            return_pipes: count(Side::Return),
            pumps: self.pumped_pipes().len(),
            outgoing_loops: self.pipe_loops(Side::Outgoing, side_nodes(Side::Outgoing)),
            return_loops: self.pipe_loops(Side::Return, side_nodes(Side::Return)),
            total_demand: self.total_demand(),
        }
    }

    /// Cycle rank of the pipe subgraph on one side.
    fn pipe_loops(&self, side: Side, nodes: usize) -> usize {
        let mut parent: Vec<usize> = (0..self.junctions.len()).collect();
        fn find(parent: &mut [usize], mut i: usize) -> usize {
            while parent[i] != i {
                parent[i] = parent[parent[i]];
                i = parent[i];
            }
            i
        }
        let mut edges = 0;
        let mut merges = 0;
        for e in &self.edges {
            let matches = matches!(
                (e.kind, side),
                (EdgeKind::OutgoingPipe, Side::Outgoing) | (EdgeKind::ReturnPipe, Side::Return)
            );
            if !matches {
                continue;
            }
            edges += 1;
            let (a, b) = (find(&mut parent, e.from), find(&mut parent, e.to));
            if a != b {
                parent[a] = b;
                merges += 1;
            }
        }
        let _ = nodes;
        edges - merges
    }

    /// True when both pipe subgraphs are forests.
    pub fn is_radial(&self) -> bool {
        let s = self.summary();
        s.outgoing_loops == 0 && s.return_loops == 0
    }

    /// Serializable form; `build_network(net.to_raw())` reproduces `net`.
    pub fn to_raw(&self) -> RawNetwork {
        RawNetwork {
            junctions: self.junctions.iter().map(|j| j.id.clone()).collect(),
            pipes: self.pipes.clone(),
            plants: self.plants.clone(),
            loads: self.loads.clone(),
            constants: self.constants,
            bounds: self.bounds,
        }
    }

    /// Copy of this network with replaced load demands (W, in load order).
    pub fn with_demands(&self, demands: &[f64]) -> Network {
        assert_eq!(demands.len(), self.loads.len());
        let mut net = self.clone();
        for (l, &q) in net.loads.iter_mut().zip(demands) {
            l.demand = q;
        }
        net
    }

    pub fn with_bounds(&self, bounds: OperationalBounds) -> Network {
        let mut net = self.clone();
        net.bounds = bounds;
        net
    }

    pub fn with_plant_capacity(&self, power_max: f64) -> Network {
        let mut net = self.clone();
        for p in &mut net.plants {
            p.power_max = power_max;
        }
        net
    }
}

/// Smallest valid network: one plant, one outgoing pipe, one load, one
/// return pipe, arranged as a single loop over four junctions.
pub fn minimal_network(demand: f64, power_max: f64) -> Network {
    let pipe = |id: &str, from: &str, to: &str, system: Side| {
        let (friction_factor, heat_loss_coeff, diameter) = match system {
            Side::Outgoing => (0.01, 0.1, 0.15),
            Side::Return => (0.002, 0.05, 0.05),
        };
        Pipe {
            id: id.into(),
            from: from.into(),
            to: to.into(),
            system,
            length: 100.0,
            diameter,
            friction_factor,
            heat_loss_coeff,
            pump_boost_max: 0.0,
        }
    };
    let raw = RawNetwork {
        junctions: ["J1", "J2", "J3", "J4"].map(String::from).to_vec(),
        pipes: vec![
            pipe("OP1", "J1", "J2", Side::Outgoing),
            pipe("RP1", "J3", "J4", Side::Return),
        ],
        plants: vec![Plant {
            id: "PLANT".into(),
            from: "J4".into(),
            to: "J1".into(),
            power_max,
        }],
        loads: vec![Load {
            id: "L1".into(),
            from: "J2".into(),
            to: "J3".into(),
            demand,
        }],
        constants: CarrierConstants::default(),
        bounds: OperationalBounds::default(),
    };
    build_network(raw).expect("minimal network is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw_minimal() -> RawNetwork {
        minimal_network(1e6, 30e6).to_raw()
    }

    #[test]
    fn minimal_cycle_is_valid() {
        let net = minimal_network(1e6, 30e6);
        assert_eq!(net.junctions().len(), 4);
        assert_eq!(net.edges().len(), 4);
        let sides: Vec<Side> = net.junctions().iter().map(|j| j.side).collect();
        assert_eq!(sides, [Side::Outgoing, Side::Outgoing, Side::Return, Side::Return]);
        assert!(net.is_radial());
        for j in 0..4 {
            assert_eq!(net.incoming(j).len(), 1);
            assert_eq!(net.outgoing(j).len(), 1);
        }
    }

    #[test]
    fn dangling_reference_is_reported() {
        let mut raw = raw_minimal();
        raw.pipes[0].to = "J99".into();
        let err = build_network(raw).unwrap_err();
        assert!(err.contains(|e| matches!(e,
            ModelError::DanglingJunctionRef { junction, .. } if junction == "J99")));
    }

    #[test]
    fn duplicate_ids_are_reported() {
        let mut raw = raw_minimal();
        raw.junctions.push("J2".into());
        let err = build_network(raw).unwrap_err();
        assert!(err.contains(|e| matches!(e, ModelError::DuplicateId(id) if id == "J2")));

        let mut raw = raw_minimal();
        raw.loads[0].id = "OP1".into();
        let err = build_network(raw).unwrap_err();
        assert!(err.contains(|e| matches!(e, ModelError::DuplicateId(id) if id == "OP1")));
    }

    #[test]
    fn pump_on_outgoing_pipe_is_rejected() {
        let mut raw = raw_minimal();
        raw.pipes[0].pump_boost_max = 1000.0;
        let err = build_network(raw).unwrap_err();
        assert!(err.contains(|e| matches!(e, ModelError::PumpOnOutgoingPipe(_))));
    }

    #[test]
    fn plantless_network_is_rejected() {
        let mut raw = raw_minimal();
        raw.plants.clear();
        let err = build_network(raw).unwrap_err();
        assert!(err.contains(|e| matches!(e, ModelError::PlantlessNetwork)));
    }

    #[test]
    fn disconnected_graph_is_rejected() {
        let mut raw = raw_minimal();
        raw.junctions.extend(["K1", "K2"].map(String::from));
        raw.pipes.push(Pipe {
            id: "OPX".into(),
            from: "K1".into(),
            to: "K2".into(),
            ..raw.pipes[0].clone()
        });
        raw.pipes.push(Pipe {
            id: "OPY".into(),
            from: "K2".into(),
            to: "K1".into(),
            ..raw.pipes[0].clone()
        });
        let err = build_network(raw).unwrap_err();
        assert!(err.contains(|e| matches!(e, ModelError::DisconnectedGraph(v) if v.len() == 2)));
    }

    #[test]
    fn dead_end_junction_is_rejected() {
        let mut raw = raw_minimal();
        raw.junctions.push("J5".into());
        raw.pipes.push(Pipe {
            id: "OP2".into(),
            from: "J1".into(),
            to: "J5".into(),
            ..raw.pipes[0].clone()
        });
        let err = build_network(raw).unwrap_err();
        assert!(err.contains(|e| matches!(e,
            ModelError::DeadEndJunction { junction, missing: "outgoing" } if junction == "J5")));
    }

    #[test]
    fn side_conflicts_are_rejected() {
        let mut raw = raw_minimal();
        // return pipe leaving the steam-side junction J2
        raw.pipes[1].from = "J2".into();
        let err = build_network(raw).unwrap_err();
        assert!(err.contains(|e| matches!(e, ModelError::SideConflict(_))));
    }

    #[test]
    fn invalid_parameters_are_listed() {
        let mut raw = raw_minimal();
        raw.pipes[0].length = 0.0;
        raw.pipes[1].heat_loss_coeff = -1.0;
        raw.loads[0].demand = -5.0;
        let err = build_network(raw).unwrap_err();
        assert_eq!(
            err.0
                .iter()
                .filter(|e| matches!(e, ModelError::InvalidParameter { .. }))
                .count(),
            3
        );
    }

    #[test]
    fn bounds_invariants() {
        let mut b = OperationalBounds::default();
        assert!(b.validate().is_ok());
        b.p_min = b.p_max + 1.0;
        assert!(matches!(b.validate(), Err(ModelError::InvalidBounds(_))));
        let mut b = OperationalBounds::default();
        b.t_ext = b.t_min;
        assert!(b.validate().is_err());
    }

    #[test]
    fn cross_section_area_values() {
        // pi * 0.09 / 4, evaluated independently at high precision
        assert!((cross_section_area(0.3).unwrap() - 0.070_685_834_705_770_35).abs() < 1e-15);
        let unit = cross_section_area(2.0 / PI.sqrt()).unwrap();
        assert!((unit - 1.0).abs() < 1e-15);
        assert_eq!(cross_section_area(0.0), Err(ModelError::NonpositiveDiameter(0.0)));
        assert!(cross_section_area(-1.0).is_err());
    }

    #[test]
    fn rebuild_from_raw_is_identity() {
        let net = minimal_network(2.5e6, 30e6);
        let again = build_network(net.to_raw()).unwrap();
        assert_eq!(net, again);
        let json = serde_json::to_string(&net.to_raw()).unwrap();
        let parsed: RawNetwork = serde_json::from_str(&json).unwrap();
        assert_eq!(build_network(parsed).unwrap(), net);
    }

    #[test]
    fn edge_capacity_lookup_by_phase() {
        let c = CarrierConstants::default();
        assert_eq!(c.edge_capacities(EdgeKind::Plant), (4186.0, 1996.0));
        assert_eq!(c.edge_capacities(EdgeKind::Load), (1996.0, 4186.0));
        assert_eq!(c.edge_capacities(EdgeKind::OutgoingPipe), (1996.0, 1996.0));
        assert_eq!(c.edge_capacities(EdgeKind::ReturnPipe), (4186.0, 4186.0));
    }
}
