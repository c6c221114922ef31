use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{NlpError, NlpProblem, ObjectiveWeights, VarKey};
use crate::model::Network;
use crate::solver::{Nlp, SquareSystem};

/// Values held fixed in a simulation, by variable name. SI units.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Setpoints {
    pub values: Vec<(VarKey, f64)>,
}

impl Setpoints {
    /// Plant outlet temperature and pressure, plant inlet pressure, pump
    /// boosts, load slacks and load outlet temperatures read from `x`.
    ///
    /// These fix exactly the decisions of the optimization problem; every
    /// remaining variable, including all flows, follows from the physics.
    pub fn from_optimum(problem: &NlpProblem, x: &[f64]) -> Setpoints {
        let net = problem.network();
        let lay = problem.layout();
        let mut keys = Vec::new();
        for p in 0..net.plants().len() {
            let e = net.plant_edge(p);
            let edge = net.edges()[e];
            keys.push(lay.t_out(e));
            keys.push(lay.p(edge.to));
            keys.push(lay.p(edge.from));
        }
        for k in 0..lay.pump_edges().len() {
            keys.push(lay.alpha(k));
        }
        for l in 0..net.loads().len() {
            keys.push(lay.qe(l));
            keys.push(lay.qs(l));
            keys.push(lay.t_out(net.load_edge(l)));
        }
        Setpoints {
            values: keys.into_iter().map(|i| (lay.key(i), x[i])).collect(),
        }
    }

    /// Plant outlet temperature, both plant pressures and the plant flow,
    /// plus pump boosts and load slacks. Square only for single-load
    /// networks, where the plant flow settles the load outlet temperature.
    pub fn plant_flow_control(problem: &NlpProblem, x: &[f64]) -> Setpoints {
        let net = problem.network();
        let lay = problem.layout();
        let mut keys = Vec::new();
        for p in 0..net.plants().len() {
            let e = net.plant_edge(p);
            let edge = net.edges()[e];
            keys.extend([lay.t_out(e), lay.p(edge.to), lay.p(edge.from), lay.f(e)]);
        }
        for k in 0..lay.pump_edges().len() {
            keys.push(lay.alpha(k));
        }
        for l in 0..net.loads().len() {
            keys.extend([lay.qe(l), lay.qs(l)]);
        }
        Setpoints {
            values: keys.into_iter().map(|i| (lay.key(i), x[i])).collect(),
        }
    }

    pub fn set(&mut self, key: VarKey, value: f64) {
        match self.values.iter_mut().find(|(k, _)| *k == key) {
            Some(slot) => slot.1 = value,
            None => self.values.push((key, value)),
        }
    }

    pub fn get(&self, key: &VarKey) -> Option<f64> {
        self.values.iter().find(|(k, _)| k == key).map(|(_, v)| *v)
    }

    pub fn remove(&mut self, key: &VarKey) -> Option<f64> {
        let pos = self.values.iter().position(|(k, _)| k == key)?;
        Some(self.values.remove(pos).1)
    }
}

/// Square nonlinear system: all equality rows except redundant ones, in the
/// variables not fixed by setpoints.
#[derive(Debug, Clone)]
pub struct SimulationSystem {
    problem: NlpProblem,
    fixed: Vec<Option<f64>>,
    free: Vec<usize>,
    rows: Vec<usize>,
    /// Position of each free variable's column, or `usize::MAX`.
    column_of: Vec<usize>,
    /// Position of each kept row, or `usize::MAX`.
    row_of: Vec<usize>,
}

/// Builds the simulation system of `net` with `setpoints` held fixed.
pub fn assemble_simulation(net: &Network, setpoints: &Setpoints) -> Result<SimulationSystem, NlpError> {
    let problem = NlpProblem::new(net.clone(), ObjectiveWeights::default(), "simulation".into());
    SimulationSystem::new(problem, setpoints)
}

impl SimulationSystem {
    pub fn new(problem: NlpProblem, setpoints: &Setpoints) -> Result<SimulationSystem, NlpError> {
        let n = problem.num_vars();
        let mut fixed = vec![None; n];
        for (key, value) in &setpoints.values {
            let i = problem
                .layout()
                .index(key)
                .ok_or_else(|| NlpError::UnknownSetpoint(key.to_string()))?;
            fixed[i] = Some(*value);
        }
        let free: Vec<usize> = (0..n).filter(|&i| fixed[i].is_none()).collect();
        let redundant = problem.redundant_constraints();
        let rows: Vec<usize> = (0..problem.num_equalities())
            .filter(|r| !redundant.contains(r))
            .collect();
        let n_fixed = n - free.len();
        if free.len() != rows.len() {
            let explanation = if free.len() > rows.len() {
                format!("{} more variable(s) must be fixed", free.len() - rows.len())
            } else {
                format!("{} fixed variable(s) too many", rows.len().abs_diff(free.len()))
            };
            return Err(NlpError::NonSquareSystem {
                variables: n,
                fixed: n_fixed,
                equations: rows.len(),
                explanation,
            });
        }
        let mut column_of = vec![usize::MAX; n];
        for (k, &i) in free.iter().enumerate() {
            column_of[i] = k;
        }
        let mut row_of = vec![usize::MAX; problem.num_cons()];
        for (k, &r) in rows.iter().enumerate() {
            row_of[r] = k;
        }
        Ok(SimulationSystem {
            problem,
            fixed,
            free,
            rows,
            column_of,
            row_of,
        })
    }

    pub fn problem(&self) -> &NlpProblem {
        &self.problem
    }

    /// Free-variable part of a full vector.
    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.free.iter().map(|&i| full[i]).collect()
    }

    /// Full vector from free values and the setpoints.
    pub fn expand(&self, free: &[f64]) -> Vec<f64> {
        let mut full: Vec<f64> = self.fixed.iter().map(|v| v.unwrap_or(0.0)).collect();
        for (k, &i) in self.free.iter().enumerate() {
            full[i] = free[k];
        }
        full
    }

    /// Starting point: the problem's initial guess with setpoints applied.
    pub fn initial_guess(&self) -> Vec<f64> {
        let mut full = self.problem.initial_guess();
        for (i, v) in self.fixed.iter().enumerate() {
            if let Some(v) = v {
                full[i] = *v;
            }
        }
        self.restrict(&full)
    }
}

impl SquareSystem for SimulationSystem {
    fn dim(&self) -> usize {
        self.free.len()
    }

    fn residual(&self, x: &[f64], r: &mut [f64]) {
        let full = self.expand(x);
        let mut g = vec![0.0; self.problem.num_cons()];
        self.problem.constraints(&full, &mut g);
        for (k, &row) in self.rows.iter().enumerate() {
            r[k] = g[row];
        }
    }

    fn jacobian(&self, x: &[f64], jac: &mut DMatrix<f64>) {
        let full = self.expand(x);
        let structure = self.problem.jacobian_structure();
        let mut values = vec![0.0; structure.len()];
        self.problem.jacobian_values(&full, &mut values);
        jac.fill(0.0);
        for (&(row, col), v) in structure.iter().zip(values) {
            let (i, j) = (self.row_of[row], self.column_of[col]);
            if i != usize::MAX && j != usize::MAX {
                jac[(i, j)] += v;
            }
        }
    }
}
