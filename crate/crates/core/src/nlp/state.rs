use super::{NlpProblem, RowFamily};
use crate::model::{EdgeKind, CONDENSATION_TEMPERATURE as TC};
use crate::physics::{load_power_local, plant_power_local, EdgeState};
use crate::solver::Nlp;

/// A solved (or candidate) operating point, unflattened per entity. All
/// values SI.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    pub x: Vec<f64>,
    pub junction_pressure: Vec<f64>,
    pub junction_temperature: Vec<f64>,
    /// Indexed like the network's edges.
    pub edges: Vec<EdgeState>,
    pub objective: f64,
    /// Largest scaled violation over equality rows and inequality bounds.
    pub max_scaled_residual: f64,
    /// kg/s
    pub max_mass_residual: f64,
    /// W
    pub max_energy_residual: f64,
    /// Power delivered by each plant, W.
    pub plant_power: Vec<f64>,
    /// Σ Q over loads, W.
    pub required: f64,
    pub total_excess: f64,
    pub total_unmet: f64,
    /// Σ c f (T_in - T_out) over all pipes, W.
    pub pipe_losses: f64,
    /// Largest violation of load inlet ≥ 373.15 K and outlet ≤ 373.15 K.
    pub load_phase_violation: f64,
    /// Largest p_out - p_in over loads, Pa (positive when violated).
    pub pressure_order_violation: f64,
    /// Largest plant power above capacity, W.
    pub capacity_violation: f64,
}

impl NetworkState {
    pub fn from_vector(problem: &NlpProblem, x: Vec<f64>) -> NetworkState {
        let net = problem.network();
        let lay = problem.layout();
        let c = net.constants();
        let nj = net.junctions().len();
        let edges: Vec<EdgeState> = (0..net.edges().len()).map(|e| problem.edge_state(&x, e)).collect();

        let mut g = vec![0.0; problem.num_cons()];
        problem.constraints(&x, &mut g);
        let (lo, hi) = problem.con_bounds();
        let mut max_scaled = 0.0f64;
        let mut max_mass = 0.0f64;
        let mut max_energy = 0.0f64;
        for (row, &v) in g.iter().enumerate() {
            let viol = (lo[row] - v).max(v - hi[row]).max(0.0);
            max_scaled = max_scaled.max(viol);
            let si = v / problem.row_scale()[row];
            match problem.row_family(row) {
                RowFamily::JunctionMass => max_mass = max_mass.max(si.abs()),
                RowFamily::JunctionEnergy => max_energy = max_energy.max(si.abs()),
                _ => {}
            }
        }

        let mut plant_power = Vec::new();
        let mut capacity_violation = 0.0f64;
        for (p, plant) in net.plants().iter().enumerate() {
            let w = plant_power_local(&edges[net.plant_edge(p)], c).value;
            capacity_violation = capacity_violation.max(w - plant.power_max);
            plant_power.push(w);
        }

        let mut required = 0.0;
        let mut total_excess = 0.0;
        let mut total_unmet = 0.0;
        let mut load_phase_violation = 0.0f64;
        let mut pressure_order_violation = 0.0f64;
        for (l, load) in net.loads().iter().enumerate() {
            let s = &edges[net.load_edge(l)];
            required += load.demand;
            total_excess += s.qe;
            total_unmet += s.qs;
            load_phase_violation = load_phase_violation.max(TC - s.t_in).max(s.t_out - TC);
            pressure_order_violation = pressure_order_violation.max(s.p_out - s.p_in);
        }

        let mut pipe_losses = 0.0;
        for (e, edge) in net.edges().iter().enumerate() {
            if edge.kind.is_pipe() {
                let s = &edges[e];
                pipe_losses += net.edge_capacities(e).0 * s.f * (s.t_in - s.t_out);
            }
        }

        NetworkState {
            junction_pressure: (0..nj).map(|j| x[lay.p(j)]).collect(),
            junction_temperature: (0..nj).map(|j| x[lay.t(j)]).collect(),
            edges,
            objective: problem.objective(&x),
            max_scaled_residual: max_scaled,
            max_mass_residual: max_mass,
            max_energy_residual: max_energy,
            plant_power,
            required,
            total_excess,
            total_unmet,
            pipe_losses,
            load_phase_violation: load_phase_violation.max(0.0),
            pressure_order_violation: pressure_order_violation.max(0.0),
            capacity_violation: capacity_violation.max(0.0),
            x,
        }
    }

    pub fn supplied(&self) -> f64 {
        self.plant_power.iter().sum()
    }

    /// Σ (Q + QE - QS) + pipe losses; equals the supplied power at any
    /// point satisfying the junction balances.
    pub fn audited_supply(&self) -> f64 {
        self.required + self.total_excess - self.total_unmet + self.pipe_losses
    }

    /// Relative mismatch between supplied power and the audit.
    pub fn audit_error(&self) -> f64 {
        let s = self.supplied();
        (s - self.audited_supply()).abs() / s.abs().max(1.0)
    }

    /// Edge state of the first plant.
    pub fn plant(&self) -> &EdgeState {
        &self.edges[0]
    }

    /// Residual of the load balance for every load, W.
    pub fn load_residuals(&self, problem: &NlpProblem) -> Vec<f64> {
        let net = problem.network();
        net.loads()
            .iter()
            .enumerate()
            .map(|(l, load)| load_power_local(&self.edges[net.load_edge(l)], load.demand, net.constants()).value)
            .collect()
    }

    /// Flows of all edges of the given kind, in edge order.
    pub fn flows_of(&self, problem: &NlpProblem, kind: EdgeKind) -> Vec<(usize, f64)> {
        problem
            .network()
            .edges()
            .iter()
            .enumerate()
            .filter(|(_, e)| e.kind == kind)
            .map(|(i, _)| (i, self.edges[i].f))
            .collect()
    }
}
