//! Flattening of a network into the thermal network flow optimization
//! problem and into square simulation systems.

mod simulation;
mod state;

pub use simulation::{assemble_simulation, Setpoints, SimulationSystem};
pub use state::NetworkState;

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use thiserror::Error;

use crate::model::{EdgeKind, Network, Side, CONDENSATION_TEMPERATURE as TC};
use crate::physics::{
    load_power_local, pipe_temperature_local, plant_power_local, steam_pressure_local, water_pressure_local, EdgeState,
    Local,
};
use crate::scenario::{apply_scenario, Scenario, ScenarioError};
use crate::solver::Nlp;
use crate::units::{KELVIN_OFFSET, PA_PER_PSI, W_PER_MW};

/// Lower bound on every edge flow, kg/s. Keeps the pipe temperature decay
/// smooth.
pub const FLOW_FLOOR: f64 = 1e-6;
/// Floor on the reference flow used for row scaling, kg/s.
const REFERENCE_FLOW_FLOOR: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NlpError {
    #[error("scenario does not match the network: {0}")]
    ScenarioMismatch(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("non-finite value in residual {index} ({family})")]
    NonFiniteValue { index: usize, family: RowFamily },
    #[error("state vector has {got} entries, layout has {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error(
        "simulation system is not square: {variables} variables, {fixed} fixed, \
         {equations} independent equations ({explanation})"
    )]
    NonSquareSystem {
        variables: usize,
        fixed: usize,
        equations: usize,
        explanation: String,
    },
    #[error("setpoint refers to unknown variable {0}")]
    UnknownSetpoint(String),
}

impl From<ScenarioError> for NlpError {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::UnknownLoad(_) => NlpError::ScenarioMismatch(e.to_string()),
            other => NlpError::InvalidScenario(other.to_string()),
        }
    }
}

/// Named handle of a single decision variable.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "var", content = "id", rename_all = "snake_case")]
pub enum VarKey {
    Pressure(String),
    Temperature(String),
    Flow(String),
    InletTemperature(String),
    OutletTemperature(String),
    PumpBoost(String),
    Excess(String),
    Unmet(String),
}

impl fmt::Display for VarKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (name, id) = match self {
            VarKey::Pressure(id) => ("p", id),
            VarKey::Temperature(id) => ("T", id),
            VarKey::Flow(id) => ("f", id),
            VarKey::InletTemperature(id) => ("T_in", id),
            VarKey::OutletTemperature(id) => ("T_out", id),
            VarKey::PumpBoost(id) => ("alpha", id),
            VarKey::Excess(id) => ("QE", id),
            VarKey::Unmet(id) => ("QS", id),
        };
        write!(f, "{name}[{id}]")
    }
}

/// Flat index map of all decision variables.
///
/// Blocks, in order: junction pressures, junction temperatures, edge flows,
/// edge inlet temperatures, edge outlet temperatures, pump boosts, load
/// excess slacks, load unmet slacks. Within a block entities follow the
/// network's sorted order.
#[derive(Debug, Clone, PartialEq)]
pub struct VariableLayout {
    junction_ids: Vec<String>,
    edge_ids: Vec<String>,
    /// Edge index of each pumped pipe.
    pump_edges: Vec<usize>,
    pump_of_edge: Vec<Option<usize>>,
    load_ids: Vec<String>,
}

pub fn index_variables(net: &Network) -> VariableLayout {
    let pump_edges: Vec<usize> = net.pumped_pipes().into_iter().map(|i| net.pipe_edge(i)).collect();
    let mut pump_of_edge = vec![None; net.edges().len()];
    for (k, &e) in pump_edges.iter().enumerate() {
        pump_of_edge[e] = Some(k);
    }
    VariableLayout {
        junction_ids: net.junctions().iter().map(|j| j.id.clone()).collect(),
        edge_ids: (0..net.edges().len()).map(|e| net.edge_id(e).to_string()).collect(),
        pump_edges,
        pump_of_edge,
        load_ids: net.loads().iter().map(|l| l.id.clone()).collect(),
    }
}

impl VariableLayout {
    fn nv(&self) -> usize {
        self.junction_ids.len()
    }

    fn ne(&self) -> usize {
        self.edge_ids.len()
    }

    pub fn len(&self) -> usize {
        2 * self.nv() + 3 * self.ne() + self.pump_edges.len() + 2 * self.load_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn p(&self, j: usize) -> usize {
        j
    }

    pub fn t(&self, j: usize) -> usize {
        self.nv() + j
    }

    pub fn f(&self, e: usize) -> usize {
        2 * self.nv() + e
    }

    pub fn t_in(&self, e: usize) -> usize {
        2 * self.nv() + self.ne() + e
    }

    pub fn t_out(&self, e: usize) -> usize {
        2 * self.nv() + 2 * self.ne() + e
    }

    /// Variable of the `k`-th pump.
    pub fn alpha(&self, k: usize) -> usize {
        2 * self.nv() + 3 * self.ne() + k
    }

    pub fn pump_of_edge(&self, e: usize) -> Option<usize> {
        self.pump_of_edge[e]
    }

    pub fn pump_edges(&self) -> &[usize] {
        &self.pump_edges
    }

    pub fn qe(&self, l: usize) -> usize {
        2 * self.nv() + 3 * self.ne() + self.pump_edges.len() + l
    }

    pub fn qs(&self, l: usize) -> usize {
        self.qe(l) + self.load_ids.len()
    }

    pub fn key(&self, index: usize) -> VarKey {
        let (nv, ne, np, nl) = (self.nv(), self.ne(), self.pump_edges.len(), self.load_ids.len());
        let mut i = index;
        if i < nv {
            return VarKey::Pressure(self.junction_ids[i].clone());
        }
        i -= nv;
        if i < nv {
            return VarKey::Temperature(self.junction_ids[i].clone());
        }
        i -= nv;
        for make in [VarKey::Flow, VarKey::InletTemperature, VarKey::OutletTemperature] {
            if i < ne {
                return make(self.edge_ids[i].clone());
            }
            i -= ne;
        }
        if i < np {
            return VarKey::PumpBoost(self.edge_ids[self.pump_edges[i]].clone());
        }
        i -= np;
        if i < nl {
            return VarKey::Excess(self.load_ids[i].clone());
        }
        i -= nl;
        assert!(i < nl, "variable index {index} out of range");
        VarKey::Unmet(self.load_ids[i].clone())
    }

    pub fn index(&self, key: &VarKey) -> Option<usize> {
        let junction = |id: &str| self.junction_ids.binary_search_by(|j| j.as_str().cmp(id)).ok();
        let edge = |id: &str| self.edge_ids.iter().position(|e| e == id);
        let load = |id: &str| self.load_ids.binary_search_by(|l| l.as_str().cmp(id)).ok();
        match key {
            VarKey::Pressure(id) => junction(id).map(|j| self.p(j)),
            VarKey::Temperature(id) => junction(id).map(|j| self.t(j)),
            VarKey::Flow(id) => edge(id).map(|e| self.f(e)),
            VarKey::InletTemperature(id) => edge(id).map(|e| self.t_in(e)),
            VarKey::OutletTemperature(id) => edge(id).map(|e| self.t_out(e)),
            VarKey::PumpBoost(id) => edge(id).and_then(|e| self.pump_of_edge[e]).map(|k| self.alpha(k)),
            VarKey::Excess(id) => load(id).map(|l| self.qe(l)),
            VarKey::Unmet(id) => load(id).map(|l| self.qs(l)),
        }
    }
}

/// Weights of the objective terms, all in display units (MW, psi, °C, kg/s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveWeights {
    /// Load slacks QE + QS, per MW.
    pub slack: f64,
    /// Plant outlet pressure, per psi.
    pub outlet_pressure: f64,
    /// Plant outlet temperature, per °C.
    pub outlet_temperature: f64,
    /// Plant flow, per kg/s.
    pub flow: f64,
    /// Plant inlet pressure, per psi.
    pub inlet_pressure: f64,
}

impl Default for ObjectiveWeights {
    fn default() -> Self {
        ObjectiveWeights {
            slack: 1.0,
            outlet_pressure: 1.0,
            outlet_temperature: 1.0,
            flow: 1.0,
            inlet_pressure: 1.0,
        }
    }
}

impl ObjectiveWeights {
    pub fn scaled(&self, k: f64) -> Self {
        ObjectiveWeights {
            slack: k * self.slack,
            outlet_pressure: k * self.outlet_pressure,
            outlet_temperature: k * self.outlet_temperature,
            flow: k * self.flow,
            inlet_pressure: k * self.inlet_pressure,
        }
    }
}

/// Constraint family of a row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RowFamily {
    PipeTemperature,
    SteamPressure,
    WaterPressure,
    LoadBalance,
    Mixing,
    JunctionMass,
    JunctionEnergy,
    PlantCapacity,
    LoadPressureOrder,
}

impl fmt::Display for RowFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RowFamily::PipeTemperature => "pipe temperature",
            RowFamily::SteamPressure => "steam pressure",
            RowFamily::WaterPressure => "water pressure",
            RowFamily::LoadBalance => "load balance",
            RowFamily::Mixing => "junction mixing",
            RowFamily::JunctionMass => "junction mass",
            RowFamily::JunctionEnergy => "junction energy",
            RowFamily::PlantCapacity => "plant capacity",
            RowFamily::LoadPressureOrder => "load pressure order",
        };
        f.write_str(s)
    }
}

const ABSENT: usize = usize::MAX;

/// A row whose value is a [`Local`] of a few variables.
#[derive(Debug, Clone, PartialEq)]
struct LocalRow<const N: usize> {
    row: usize,
    edge: usize,
    vars: [usize; N],
    jac: [usize; N],
    /// (i, j, position) for each structurally nonzero local Hessian entry.
    hess: Vec<(usize, usize, usize)>,
}

#[derive(Debug, Clone, PartialEq)]
struct LinearRow {
    row: usize,
    /// (variable, coefficient, Jacobian position)
    entries: Vec<(usize, f64, usize)>,
}

#[derive(Debug, Clone, PartialEq)]
struct EnergyTerm {
    f: usize,
    t: usize,
    /// ±c
    coef: f64,
    jac_f: usize,
    jac_t: usize,
    hess: usize,
}

#[derive(Debug, Clone, PartialEq)]
struct EnergyRow {
    row: usize,
    terms: Vec<EnergyTerm>,
}

#[derive(Default)]
struct Pattern {
    jac: Vec<(usize, usize)>,
    hess: BTreeMap<(usize, usize), usize>,
    hess_list: Vec<(usize, usize)>,
}

impl Pattern {
    fn jac(&mut self, row: usize, col: usize) -> usize {
        self.jac.push((row, col));
        self.jac.len() - 1
    }

    fn hess(&mut self, a: usize, b: usize) -> usize {
        let key = (a.max(b), a.min(b));
        if let Some(&pos) = self.hess.get(&key) {
            return pos;
        }
        self.hess_list.push(key);
        self.hess.insert(key, self.hess_list.len() - 1);
        self.hess_list.len() - 1
    }

    fn local<const N: usize>(
        &mut self,
        row: usize,
        edge: usize,
        vars: [usize; N],
        pairs: &[(usize, usize)],
    ) -> LocalRow<N> {
        let mut jac = [ABSENT; N];
        for i in 0..N {
            if vars[i] != ABSENT {
                jac[i] = self.jac(row, vars[i]);
            }
        }
        let hess = pairs
            .iter()
            .filter(|&&(i, j)| vars[i] != ABSENT && vars[j] != ABSENT)
            .map(|&(i, j)| (i, j, self.hess(vars[i], vars[j])))
            .collect();
        LocalRow {
            row,
            edge,
            vars,
            jac,
            hess,
        }
    }
}

/// The assembled optimization problem. Constraint rows are scaled to order
/// one; [`NlpProblem::row_scale`] converts back to SI.
#[derive(Debug, Clone, PartialEq)]
pub struct NlpProblem {
    net: Network,
    layout: VariableLayout,
    weights: ObjectiveWeights,
    scenario_name: String,
    reference_flow: f64,
    var_lo: Vec<f64>,
    var_hi: Vec<f64>,
    var_scale: Vec<f64>,
    con_lo: Vec<f64>,
    con_hi: Vec<f64>,
    row_scale: Vec<f64>,
    families: Vec<RowFamily>,
    n_equalities: usize,
    temperature_rows: Vec<LocalRow<3>>,
    steam_rows: Vec<LocalRow<5>>,
    water_rows: Vec<LocalRow<4>>,
    load_rows: Vec<LocalRow<5>>,
    plant_rows: Vec<LocalRow<3>>,
    linear_rows: Vec<LinearRow>,
    energy_rows: Vec<EnergyRow>,
    objective_terms: Vec<(usize, f64)>,
    objective_offset: f64,
    jac_structure: Vec<(usize, usize)>,
    hess_structure: Vec<(usize, usize)>,
    redundant: Vec<usize>,
}

/// Builds the optimization problem for `net` under scenario `scen`.
pub fn assemble_tnfo(net: &Network, scen: &Scenario, weights: &ObjectiveWeights) -> Result<NlpProblem, NlpError> {
    let eff = apply_scenario(net, scen)?;
    let effective = eff.network(net);
    Ok(NlpProblem::new(effective, *weights, eff.name.clone()))
}

impl NlpProblem {
    /// Assembles the problem for a network whose demands, capacities and
    /// bounds are already final.
    pub fn new(net: Network, weights: ObjectiveWeights, scenario_name: String) -> NlpProblem {
        let layout = index_variables(&net);
        let c = *net.constants();
        let b = *net.bounds();
        let n = layout.len();
        let reference_flow = (net.total_demand() / c.latent_heat).max(REFERENCE_FLOW_FLOOR);
        let energy_scale = 1.0 / (c.c_water * reference_flow * b.t_max);
        // Junction and load rows are scaled by the flow they carry so that
        // lightly loaded branches stay well conditioned.
        let guess_flows = edge_flow_guess(&net, reference_flow_guess(&net));
        let local_floor = REFERENCE_FLOW_FLOOR * reference_flow;
        let junction_flow: Vec<f64> = (0..net.junctions().len())
            .map(|j| {
                let inflow: f64 = net.incoming(j).iter().map(|&e| guess_flows[e]).sum();
                let outflow: f64 = net.outgoing(j).iter().map(|&e| guess_flows[e]).sum();
                inflow.max(outflow).max(local_floor)
            })
            .collect();

        let mut pat = Pattern::default();
        let mut families = Vec::new();
        let mut row_scale = Vec::new();
        let mut push_row = |families: &mut Vec<RowFamily>, family, scale| {
            families.push(family);
            row_scale.push(scale);
            families.len() - 1
        };

        let edges = net.edges().to_vec();
        let pipe_edges: Vec<usize> = (0..net.pipes().len()).map(|i| net.pipe_edge(i)).collect();

        let mut temperature_rows = Vec::new();
        for &e in &pipe_edges {
            let row = push_row(&mut families, RowFamily::PipeTemperature, 1.0 / b.t_max);
            let vars = [layout.f(e), layout.t_in(e), layout.t_out(e)];
            temperature_rows.push(pat.local(row, e, vars, &[(0, 0), (0, 1)]));
        }

        let mut steam_rows = Vec::new();
        let mut water_rows = Vec::new();
        for &e in &pipe_edges {
            let edge = edges[e];
            let (pin, pout) = (layout.p(edge.from), layout.p(edge.to));
            match edge.kind {
                EdgeKind::OutgoingPipe => {
                    let row = push_row(&mut families, RowFamily::SteamPressure, 1.0 / (b.p_max * b.p_max));
                    let vars = [layout.f(e), layout.t_in(e), layout.t_out(e), pin, pout];
                    steam_rows.push(pat.local(row, e, vars, &[(0, 0), (0, 1), (0, 2), (3, 3), (4, 4)]));
                }
                _ => {
                    let row = push_row(&mut families, RowFamily::WaterPressure, 1.0 / b.p_max);
                    let alpha = layout.pump_of_edge(e).map_or(ABSENT, |k| layout.alpha(k));
                    let vars = [layout.f(e), pin, pout, alpha];
                    water_rows.push(pat.local(row, e, vars, &[(0, 0)]));
                }
            }
        }

        let mut load_rows = Vec::new();
        for l in 0..net.loads().len() {
            let e = net.load_edge(l);
            let local = guess_flows[e].max(local_floor);
            let row = push_row(
                &mut families,
                RowFamily::LoadBalance,
                1.0 / (c.c_water * local * b.t_max),
            );
            let vars = [layout.f(e), layout.t_in(e), layout.t_out(e), layout.qe(l), layout.qs(l)];
            load_rows.push(pat.local(row, e, vars, &[(0, 1), (0, 2)]));
        }

        let mut linear_rows = Vec::new();
        for (e, edge) in edges.iter().enumerate() {
            let row = push_row(&mut families, RowFamily::Mixing, 1.0 / b.t_max);
            let entries = vec![
                (layout.t_in(e), 1.0, pat.jac(row, layout.t_in(e))),
                (layout.t(edge.from), -1.0, pat.jac(row, layout.t(edge.from))),
            ];
            linear_rows.push(LinearRow { row, entries });
        }

        let mut mass_rows = Vec::new();
        for j in 0..net.junctions().len() {
            let row = push_row(&mut families, RowFamily::JunctionMass, 1.0 / junction_flow[j]);
            mass_rows.push(row);
            let mut entries = Vec::new();
            for &e in net.incoming(j) {
                entries.push((layout.f(e), 1.0, pat.jac(row, layout.f(e))));
            }
            for &e in net.outgoing(j) {
                entries.push((layout.f(e), -1.0, pat.jac(row, layout.f(e))));
            }
            linear_rows.push(LinearRow { row, entries });
        }

        let mut energy_rows = Vec::new();
        for j in 0..net.junctions().len() {
            let row = push_row(
                &mut families,
                RowFamily::JunctionEnergy,
                1.0 / (c.c_water * junction_flow[j] * b.t_max),
            );
            let mut terms = Vec::new();
            let term = |pat: &mut Pattern, f: usize, t: usize, coef: f64| EnergyTerm {
                f,
                t,
                coef,
                jac_f: pat.jac(row, f),
                jac_t: pat.jac(row, t),
                hess: pat.hess(f, t),
            };
            for &e in net.incoming(j) {
                let c_out = net.edge_capacities(e).1;
                terms.push(term(&mut pat, layout.f(e), layout.t_out(e), c_out));
            }
            for &e in net.outgoing(j) {
                let c_in = net.edge_capacities(e).0;
                terms.push(term(&mut pat, layout.f(e), layout.t_in(e), -c_in));
            }
            energy_rows.push(EnergyRow { row, terms });
        }
        let n_equalities = families.len();

        let mut plant_rows = Vec::new();
        for p in 0..net.plants().len() {
            let e = net.plant_edge(p);
            let row = push_row(&mut families, RowFamily::PlantCapacity, energy_scale);
            let vars = [layout.f(e), layout.t_in(e), layout.t_out(e)];
            plant_rows.push(pat.local(row, e, vars, &[(0, 1), (0, 2)]));
        }
        for l in 0..net.loads().len() {
            let edge = edges[net.load_edge(l)];
            let row = push_row(&mut families, RowFamily::LoadPressureOrder, 1.0 / b.p_max);
            let entries = vec![
                (layout.p(edge.from), 1.0, pat.jac(row, layout.p(edge.from))),
                (layout.p(edge.to), -1.0, pat.jac(row, layout.p(edge.to))),
            ];
            linear_rows.push(LinearRow { row, entries });
        }

        let m = families.len();
        let mut con_lo = vec![0.0; m];
        let mut con_hi = vec![0.0; m];
        for row in n_equalities..m {
            match families[row] {
                RowFamily::PlantCapacity => {
                    con_lo[row] = f64::NEG_INFINITY;
                    con_hi[row] = 0.0;
                }
                _ => {
                    con_lo[row] = 0.0;
                    con_hi[row] = f64::INFINITY;
                }
            }
        }

        // Variable bounds.
        let inf = f64::INFINITY;
        let mut var_lo = vec![-inf; n];
        let mut var_hi = vec![inf; n];
        for j in 0..net.junctions().len() {
            var_lo[layout.p(j)] = b.p_min;
            var_hi[layout.p(j)] = b.p_max;
            var_lo[layout.t(j)] = b.t_min;
            var_hi[layout.t(j)] = b.t_max;
        }
        for (e, edge) in edges.iter().enumerate() {
            var_lo[layout.f(e)] = FLOW_FLOOR;
            match edge.kind {
                EdgeKind::Plant => {
                    var_hi[layout.t_in(e)] = TC;
                    var_lo[layout.t_out(e)] = TC;
                    var_hi[layout.t_out(e)] = b.t_max;
                    var_lo[layout.p(edge.to)] = var_lo[layout.p(edge.to)].max(b.plant_outlet_p_min);
                    var_lo[layout.p(edge.from)] = var_lo[layout.p(edge.from)].max(b.plant_inlet_floor());
                }
                EdgeKind::Load => {
                    var_lo[layout.t_in(e)] = TC;
                    var_lo[layout.t_out(e)] = b.t_ext;
                    var_hi[layout.t_out(e)] = TC;
                }
                _ => {}
            }
        }
        for (k, &e) in layout.pump_edges().iter().enumerate() {
            var_lo[layout.alpha(k)] = 0.0;
            var_hi[layout.alpha(k)] = net.pipe(&edges[e]).unwrap().pump_boost_max;
        }
        for l in 0..net.loads().len() {
            var_lo[layout.qe(l)] = 0.0;
            var_lo[layout.qs(l)] = 0.0;
        }

        // Objective, linear in display units.
        let mut objective_terms = Vec::new();
        let mut objective_offset = 0.0;
        for l in 0..net.loads().len() {
            objective_terms.push((layout.qe(l), weights.slack / W_PER_MW));
            objective_terms.push((layout.qs(l), weights.slack / W_PER_MW));
        }
        for p in 0..net.plants().len() {
            let e = net.plant_edge(p);
            let edge = edges[e];
            objective_terms.push((layout.p(edge.to), weights.outlet_pressure / PA_PER_PSI));
            objective_terms.push((layout.t_out(e), weights.outlet_temperature));
            objective_offset -= weights.outlet_temperature * KELVIN_OFFSET;
            objective_terms.push((layout.f(e), weights.flow));
            objective_terms.push((layout.p(edge.from), weights.inlet_pressure / PA_PER_PSI));
        }

        // The mass rows sum to zero identically on a connected graph.
        let redundant = net
            .plants()
            .first()
            .map(|_| mass_rows[edges[net.plant_edge(0)].from])
            .into_iter()
            .collect();

        let mut var_scale = vec![1.0; n];
        for j in 0..net.junctions().len() {
            var_scale[layout.p(j)] = 1e5;
            var_scale[layout.t(j)] = 100.0;
        }
        for e in 0..edges.len() {
            var_scale[layout.f(e)] = guess_flows[e].max(1e-2 * reference_flow);
            var_scale[layout.t_in(e)] = 100.0;
            var_scale[layout.t_out(e)] = 100.0;
        }
        for k in 0..layout.pump_edges().len() {
            var_scale[layout.alpha(k)] = var_hi[layout.alpha(k)].max(1.0);
        }
        for l in 0..net.loads().len() {
            var_scale[layout.qe(l)] = W_PER_MW;
            var_scale[layout.qs(l)] = W_PER_MW;
        }

        NlpProblem {
            net,
            layout,
            weights,
            scenario_name,
            reference_flow,
            var_lo,
            var_hi,
            var_scale,
            con_lo,
            con_hi,
            row_scale,
            families,
            n_equalities,
            temperature_rows,
            steam_rows,
            water_rows,
            load_rows,
            plant_rows,
            linear_rows,
            energy_rows,
            objective_terms,
            objective_offset,
            jac_structure: pat.jac,
            hess_structure: pat.hess_list,
            redundant,
        }
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn layout(&self) -> &VariableLayout {
        &self.layout
    }

    pub fn weights(&self) -> &ObjectiveWeights {
        &self.weights
    }

    pub fn scenario_name(&self) -> &str {
        &self.scenario_name
    }

    /// Number of leading rows that are equalities; the rest are inequalities.
    pub fn num_equalities(&self) -> usize {
        self.n_equalities
    }

    pub fn row_family(&self, row: usize) -> RowFamily {
        self.families[row]
    }

    /// Factor applied to the SI residual of each row.
    pub fn row_scale(&self) -> &[f64] {
        &self.row_scale
    }

    pub fn reference_flow(&self) -> f64 {
        self.reference_flow
    }

    /// Edge state for edge `e` read from the flat vector `x`.
    pub fn edge_state(&self, x: &[f64], e: usize) -> EdgeState {
        let lay = &self.layout;
        let edge = self.net.edges()[e];
        let mut s = EdgeState {
            f: x[lay.f(e)],
            t_in: x[lay.t_in(e)],
            t_out: x[lay.t_out(e)],
            p_in: x[lay.p(edge.from)],
            p_out: x[lay.p(edge.to)],
            ..Default::default()
        };
        if let Some(k) = lay.pump_of_edge(e) {
            s.alpha = x[lay.alpha(k)];
        }
        if edge.kind == EdgeKind::Load {
            let l = edge.component;
            s.qe = x[lay.qe(l)];
            s.qs = x[lay.qs(l)];
        }
        s
    }

    fn pipe_of(&self, e: usize) -> &crate::model::Pipe {
        &self.net.pipes()[self.net.edges()[e].component]
    }

    fn temperature_local(&self, x: &[f64], r: &LocalRow<3>) -> Local<3> {
        let cap = self.net.edge_capacities(r.edge).0;
        let s = self.edge_state(x, r.edge);
        pipe_temperature_local(&s, self.pipe_of(r.edge), cap, self.net.bounds().t_ext)
    }

    fn steam_local(&self, x: &[f64], r: &LocalRow<5>) -> Local<5> {
        let c = self.net.constants();
        let s = self.edge_state(x, r.edge);
        steam_pressure_local(&s, self.pipe_of(r.edge), c.r_steam, c.c_steam, self.net.bounds().t_ext)
    }

    fn water_local(&self, x: &[f64], r: &LocalRow<4>) -> Local<4> {
        let s = self.edge_state(x, r.edge);
        water_pressure_local(&s, self.pipe_of(r.edge), self.net.constants().rho_water)
    }

    fn load_local(&self, x: &[f64], r: &LocalRow<5>) -> Local<5> {
        let q = self.net.loads()[self.net.edges()[r.edge].component].demand;
        load_power_local(&self.edge_state(x, r.edge), q, self.net.constants())
    }

    fn plant_local(&self, x: &[f64], r: &LocalRow<3>) -> Local<3> {
        let cap = self.net.plants()[self.net.edges()[r.edge].component].power_max;
        let mut l = plant_power_local(&self.edge_state(x, r.edge), self.net.constants());
        l.value -= cap;
        l
    }

    /// Scaled residuals, objective and Jacobian values at `x`.
    pub fn evaluate(&self, x: &[f64]) -> Result<Evaluation, NlpError> {
        if x.len() != self.layout.len() {
            return Err(NlpError::DimensionMismatch {
                expected: self.layout.len(),
                got: x.len(),
            });
        }
        let mut residuals = vec![0.0; self.num_cons()];
        self.constraints(x, &mut residuals);
        if let Some(index) = residuals.iter().position(|r| !r.is_finite()) {
            return Err(NlpError::NonFiniteValue {
                index,
                family: self.families[index],
            });
        }
        let mut jacobian = vec![0.0; self.jac_structure.len()];
        self.jacobian_values(x, &mut jacobian);
        if let Some(pos) = jacobian.iter().position(|v| !v.is_finite()) {
            let index = self.jac_structure[pos].0;
            return Err(NlpError::NonFiniteValue {
                index,
                family: self.families[index],
            });
        }
        Ok(Evaluation {
            objective: self.objective(x),
            residuals,
            jacobian,
        })
    }

    /// Residuals in SI units (scaling undone).
    pub fn residuals_si(&self, x: &[f64]) -> Vec<f64> {
        let mut r = vec![0.0; self.num_cons()];
        self.constraints(x, &mut r);
        r.iter().zip(&self.row_scale).map(|(v, s)| v / s).collect()
    }

    /// Starting point: pressures mid-range, temperatures mid-range on each
    /// side, flows from downstream demand, slacks zero, pumps half open.
    pub fn initial_guess(&self) -> Vec<f64> {
        let net = &self.net;
        let lay = &self.layout;
        let b = net.bounds();
        let mut x = vec![0.0; lay.len()];
        for (j, junction) in net.junctions().iter().enumerate() {
            x[lay.p(j)] = 0.5 * (self.var_lo[lay.p(j)] + self.var_hi[lay.p(j)]);
            x[lay.t(j)] = match junction.side {
                Side::Outgoing => 0.5 * (TC + b.t_max),
                Side::Return => 0.5 * (b.t_min + b.t_max),
            };
        }
        let flows = edge_flow_guess(net, reference_flow_guess(net));
        for (e, edge) in net.edges().iter().enumerate() {
            x[lay.f(e)] = flows[e];
            x[lay.t_in(e)] = x[lay.t(edge.from)];
            x[lay.t_out(e)] = x[lay.t(edge.to)];
        }
        for k in 0..lay.pump_edges().len() {
            x[lay.alpha(k)] = 0.5 * self.var_hi[lay.alpha(k)];
        }
        x
    }

    /// Projects `x` into the variable bounds.
    pub fn clamp_to_bounds(&self, x: &mut [f64]) {
        for i in 0..x.len() {
            x[i] = x[i].clamp(self.var_lo[i], self.var_hi[i]);
        }
    }
}

/// Scaled residuals, objective and Jacobian values at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub objective: f64,
    pub residuals: Vec<f64>,
    /// Values in the order of the problem's Jacobian structure.
    pub jacobian: Vec<f64>,
}

/// Free-function form of [`NlpProblem::evaluate`].
pub fn evaluate(problem: &NlpProblem, x: &[f64]) -> Result<Evaluation, NlpError> {
    problem.evaluate(x)
}

/// Free-function form of [`NlpProblem::initial_guess`] for a network and
/// scenario.
pub fn initial_guess(net: &Network, scen: &Scenario) -> Result<Vec<f64>, NlpError> {
    Ok(assemble_tnfo(net, scen, &ObjectiveWeights::default())?.initial_guess())
}

/// Plant flow needed to condense the total demand.
fn reference_flow_guess(net: &Network) -> f64 {
    let q = net.total_demand();
    if q > 0.0 {
        q / net.constants().latent_heat
    } else {
        FLOW_FLOOR
    }
}

/// Edge flows obtained by routing each load's share of `total` along a
/// breadth-first path from the plant outlet and back to the plant inlet.
/// Parallel pipes split evenly.
fn edge_flow_guess(net: &Network, total: f64) -> Vec<f64> {
    let edges = net.edges();
    let mut flows = vec![0.0; edges.len()];
    let q_total = net.total_demand();
    let share = |l: usize| {
        if q_total > 0.0 {
            total * net.loads()[l].demand / q_total
        } else {
            0.0
        }
    };
    for p in 0..net.plants().len() {
        flows[net.plant_edge(p)] = total / net.plants().len() as f64;
    }

    let nj = net.junctions().len();
    // BFS over pipe edges of one side, either forward from a root or backward.
    let bfs = |root: usize, kind: EdgeKind, forward: bool| -> Vec<Option<usize>> {
        let mut via = vec![None; nj];
        let mut seen = vec![false; nj];
        seen[root] = true;
        let mut queue = VecDeque::from([root]);
        while let Some(u) = queue.pop_front() {
            let adj = if forward { net.outgoing(u) } else { net.incoming(u) };
            for &e in adj {
                if edges[e].kind != kind {
                    continue;
                }
                let v = if forward { edges[e].to } else { edges[e].from };
                if !seen[v] {
                    seen[v] = true;
                    via[v] = Some(e);
                    queue.push_back(v);
                }
            }
        }
        via
    };
    let parallel = |e: usize| -> Vec<usize> {
        let (a, b, k) = (edges[e].from, edges[e].to, edges[e].kind);
        net.outgoing(a)
            .iter()
            .copied()
            .filter(|&o| edges[o].to == b && edges[o].kind == k)
            .collect()
    };

    for p in 0..net.plants().len() {
        let plant = edges[net.plant_edge(p)];
        let out_via = bfs(plant.to, EdgeKind::OutgoingPipe, true);
        let ret_via = bfs(plant.from, EdgeKind::ReturnPipe, false);
        for l in 0..net.loads().len() {
            let load = edges[net.load_edge(l)];
            let q = share(l) / net.plants().len() as f64;
            flows[net.load_edge(l)] += q;
            let mut j = load.from;
            while let Some(e) = out_via[j] {
                let group = parallel(e);
                for &g in &group {
                    flows[g] += q / group.len() as f64;
                }
                j = edges[e].from;
            }
            let mut j = load.to;
            while let Some(e) = ret_via[j] {
                let group = parallel(e);
                for &g in &group {
                    flows[g] += q / group.len() as f64;
                }
                j = edges[e].to;
            }
        }
    }
    for f in &mut flows {
        *f = f.max(FLOW_FLOOR);
    }
    flows
}

impl Nlp for NlpProblem {
    fn num_vars(&self) -> usize {
        self.layout.len()
    }

    fn num_cons(&self) -> usize {
        self.families.len()
    }

    fn var_bounds(&self) -> (&[f64], &[f64]) {
        (&self.var_lo, &self.var_hi)
    }

    fn con_bounds(&self) -> (&[f64], &[f64]) {
        (&self.con_lo, &self.con_hi)
    }

    fn var_scaling(&self) -> Vec<f64> {
        self.var_scale.clone()
    }

    fn objective(&self, x: &[f64]) -> f64 {
        self.objective_offset + self.objective_terms.iter().map(|&(i, w)| w * x[i]).sum::<f64>()
    }

    fn gradient(&self, _x: &[f64], grad: &mut [f64]) {
        grad.fill(0.0);
        for &(i, w) in &self.objective_terms {
            grad[i] += w;
        }
    }

    fn constraints(&self, x: &[f64], g: &mut [f64]) {
        macro_rules! locals {
            ($rows:expr, $eval:ident) => {
                for r in $rows {
                    g[r.row] = self.row_scale[r.row] * self.$eval(x, r).value;
                }
            };
        }
        locals!(&self.temperature_rows, temperature_local);
        locals!(&self.steam_rows, steam_local);
        locals!(&self.water_rows, water_local);
        locals!(&self.load_rows, load_local);
        locals!(&self.plant_rows, plant_local);
        for r in &self.linear_rows {
            let v: f64 = r.entries.iter().map(|&(i, c, _)| c * x[i]).sum();
            g[r.row] = self.row_scale[r.row] * v;
        }
        for r in &self.energy_rows {
            let v: f64 = r.terms.iter().map(|t| t.coef * x[t.f] * x[t.t]).sum();
            g[r.row] = self.row_scale[r.row] * v;
        }
    }

    fn jacobian_structure(&self) -> &[(usize, usize)] {
        &self.jac_structure
    }

    fn jacobian_values(&self, x: &[f64], values: &mut [f64]) {
        macro_rules! locals {
            ($rows:expr, $eval:ident) => {
                for r in $rows {
                    let l = self.$eval(x, r);
                    let s = self.row_scale[r.row];
                    for (i, &pos) in r.jac.iter().enumerate() {
                        if pos != ABSENT {
                            values[pos] = s * l.grad[i];
                        }
                    }
                }
            };
        }
        locals!(&self.temperature_rows, temperature_local);
        locals!(&self.steam_rows, steam_local);
        locals!(&self.water_rows, water_local);
        locals!(&self.load_rows, load_local);
        locals!(&self.plant_rows, plant_local);
        for r in &self.linear_rows {
            for &(_, c, pos) in &r.entries {
                values[pos] = self.row_scale[r.row] * c;
            }
        }
        for r in &self.energy_rows {
            let s = self.row_scale[r.row];
            for t in &r.terms {
                values[t.jac_f] = s * t.coef * x[t.t];
                values[t.jac_t] = s * t.coef * x[t.f];
            }
        }
    }

    fn hessian_structure(&self) -> &[(usize, usize)] {
        &self.hess_structure
    }

    fn hessian_values(&self, x: &[f64], _obj_factor: f64, lambda: &[f64], values: &mut [f64]) {
        values.fill(0.0);
        macro_rules! locals {
            ($rows:expr, $eval:ident) => {
                for r in $rows {
                    let w = lambda[r.row] * self.row_scale[r.row];
                    if w == 0.0 {
                        continue;
                    }
                    let l = self.$eval(x, r);
                    for &(i, j, pos) in &r.hess {
                        values[pos] += w * l.hess[i][j];
                    }
                }
            };
        }
        locals!(&self.temperature_rows, temperature_local);
        locals!(&self.steam_rows, steam_local);
        locals!(&self.water_rows, water_local);
        locals!(&self.load_rows, load_local);
        locals!(&self.plant_rows, plant_local);
        for r in &self.energy_rows {
            let w = lambda[r.row] * self.row_scale[r.row];
            for t in &r.terms {
                values[t.hess] += w * t.coef;
            }
        }
    }

    fn redundant_constraints(&self) -> &[usize] {
        &self.redundant
    }
}

#[cfg(test)]
mod tests;
