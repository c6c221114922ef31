//! Scenario definitions, batch runs and demand sweeps.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

use crate::model::{ModelError, Network, OperationalBounds};
use crate::nlp::{NetworkState, NlpError, NlpProblem, ObjectiveWeights};
use crate::solver::{solve_nlp, SolveReport, SolveStatus, SolverError, SolverOptions};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("scenario references unknown load `{0}`")]
    UnknownLoad(String),
    #[error("multiplier for `{target}` must be finite and >= 0, got {value}")]
    InvalidMultiplier { target: String, value: f64 },
    #[error("demand override for `{load}` must be finite and >= 0, got {value}")]
    InvalidDemand { load: String, value: f64 },
    #[error("plant capacity must be positive, got {0}")]
    InvalidCapacity(f64),
    #[error(transparent)]
    InvalidBounds(#[from] ModelError),
    #[error("total demand is zero")]
    ZeroDemand,
    #[error("sweep requires from <= to and at least 2 steps")]
    InvalidSweep,
}

/// Optional replacements for individual operational bounds, SI units.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundOverrides {
    pub t_max: Option<f64>,
    pub t_min: Option<f64>,
    pub t_ext: Option<f64>,
    pub p_max: Option<f64>,
    pub p_min: Option<f64>,
    pub plant_outlet_p_min: Option<f64>,
    pub plant_inlet_p_min: Option<f64>,
}

impl BoundOverrides {
    pub fn is_empty(&self) -> bool {
        *self == BoundOverrides::default()
    }

    pub fn apply(&self, base: &OperationalBounds) -> OperationalBounds {
        let mut b = *base;
        let pick = |o: Option<f64>, v: f64| o.unwrap_or(v);
        b.t_max = pick(self.t_max, b.t_max);
        b.t_min = pick(self.t_min, b.t_min);
        b.t_ext = pick(self.t_ext, b.t_ext);
        b.p_max = pick(self.p_max, b.p_max);
        b.p_min = pick(self.p_min, b.p_min);
        b.plant_outlet_p_min = pick(self.plant_outlet_p_min, b.plant_outlet_p_min);
        if self.plant_inlet_p_min.is_some() {
            b.plant_inlet_p_min = self.plant_inlet_p_min;
        }
        b
    }
}

/// A set of changes to the base case. Demand changes compose as: per-load
/// multiplier if given, else the global multiplier; then absolute per-load
/// overrides replace the result.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub demand_multiplier: Option<f64>,
    #[serde(default)]
    pub load_multipliers: BTreeMap<String, f64>,
    /// Absolute demands, W.
    #[serde(default)]
    pub load_demands: BTreeMap<String, f64>,
    /// Capacity applied to every plant, W.
    #[serde(default)]
    pub plant_capacity: Option<f64>,
    #[serde(default)]
    pub bounds: BoundOverrides,
}

impl Scenario {
    pub fn baseline() -> Scenario {
        Scenario {
            name: "baseline".into(),
            ..Default::default()
        }
    }

    pub fn uniform(name: &str, multiplier: f64) -> Scenario {
        Scenario {
            name: name.into(),
            demand_multiplier: Some(multiplier),
            ..Default::default()
        }
    }

    /// Baseline plus four standard contingencies: the largest
    /// load tripled, all loads up 50 %, both combined, and the combination
    /// with plant capacity limited to 20 MW.
    pub fn contingency_set(net: &Network) -> Vec<Scenario> {
        let largest = largest_load(net).to_string();
        let tripled = BTreeMap::from([(largest, 3.0)]);
        vec![
            Scenario::baseline(),
            Scenario {
                name: "largest-load-x3".into(),
                load_multipliers: tripled.clone(),
                ..Default::default()
            },
            Scenario::uniform("uniform-x1.5", 1.5),
            Scenario {
                name: "combined".into(),
                demand_multiplier: Some(1.5),
                load_multipliers: tripled.clone(),
                ..Default::default()
            },
            Scenario {
                name: "combined-capacity-20MW".into(),
                demand_multiplier: Some(1.5),
                load_multipliers: tripled,
                plant_capacity: Some(20e6),
                ..Default::default()
            },
        ]
    }
}

/// Id of the load with the largest demand; ties go to the smallest id.
pub fn largest_load(net: &Network) -> &str {
    let mut best = &net.loads()[0];
    for l in net.loads() {
        if l.demand > best.demand {
            best = l;
        }
    }
    &best.id
}

/// A scenario resolved against a network.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveScenario {
    pub name: String,
    /// W, in load order.
    pub demands: Vec<f64>,
    pub plant_capacity: Option<f64>,
    pub bounds: OperationalBounds,
}

impl EffectiveScenario {
    /// Copy of `base` with this scenario's demands, capacity and bounds.
    pub fn network(&self, base: &Network) -> Network {
        let mut net = base.with_demands(&self.demands).with_bounds(self.bounds);
        if let Some(cap) = self.plant_capacity {
            net = net.with_plant_capacity(cap);
        }
        net
    }

    pub fn total_demand(&self) -> f64 {
        self.demands.iter().sum()
    }
}

pub fn apply_scenario(net: &Network, scen: &Scenario) -> Result<EffectiveScenario, ScenarioError> {
    let check_mult = |target: &str, v: f64| {
        if v.is_finite() && v >= 0.0 {
            Ok(())
        } else {
            Err(ScenarioError::InvalidMultiplier {
                target: target.to_string(),
                value: v,
            })
        }
    };
    let global = scen.demand_multiplier.unwrap_or(1.0);
    check_mult("all loads", global)?;
    for (id, &m) in &scen.load_multipliers {
        net.load_index(id)
            .ok_or_else(|| ScenarioError::UnknownLoad(id.clone()))?;
        check_mult(id, m)?;
    }
    for (id, &q) in &scen.load_demands {
        net.load_index(id)
            .ok_or_else(|| ScenarioError::UnknownLoad(id.clone()))?;
        if !(q.is_finite() && q >= 0.0) {
            return Err(ScenarioError::InvalidDemand {
                load: id.clone(),
                value: q,
            });
        }
    }
    if let Some(cap) = scen.plant_capacity {
        if !(cap > 0.0 && cap.is_finite()) {
            return Err(ScenarioError::InvalidCapacity(cap));
        }
    }
    let demands = net
        .loads()
        .iter()
        .map(|l| {
            let m = scen.load_multipliers.get(&l.id).copied().unwrap_or(global);
            scen.load_demands.get(&l.id).copied().unwrap_or(l.demand * m)
        })
        .collect();
    let bounds = scen.bounds.apply(net.bounds());
    bounds.validate()?;
    Ok(EffectiveScenario {
        name: scen.name.clone(),
        demands,
        plant_capacity: scen.plant_capacity,
        bounds,
    })
}

/// Objective weights and solver settings shared by every run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    pub weights: ObjectiveWeights,
    pub solver: SolverOptions,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RunError {
    #[error(transparent)]
    Nlp(#[from] NlpError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// One row of a results table. Powers in W, pressure in Pa, temperature
/// in K.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub name: String,
    pub status: String,
    pub required: f64,
    pub supplied: f64,
    pub pipe_losses: f64,
    pub excess: f64,
    pub unmet: f64,
    pub unmet_pct: f64,
    pub plant_t_out: f64,
    pub plant_p_out: f64,
    pub plant_f: f64,
    pub objective: f64,
    pub iterations: usize,
}

impl RunSummary {
    pub fn from_state(name: &str, problem: &NlpProblem, state: &NetworkState, report: &SolveReport) -> RunSummary {
        RunSummary::with_status(name, problem, state, &report.status.to_string(), report.iterations)
    }

    /// Summary of a state that did not come from the optimizer, such as a
    /// simulation.
    pub fn with_status(
        name: &str,
        problem: &NlpProblem,
        state: &NetworkState,
        status: &str,
        iterations: usize,
    ) -> RunSummary {
        let net = problem.network();
        let plant = net.edges()[net.plant_edge(0)];
        let unmet_pct = if state.required > 0.0 {
            100.0 * state.total_unmet / state.required
        } else {
            0.0
        };
        RunSummary {
            name: name.to_string(),
            status: status.to_string(),
            required: state.required,
            supplied: state.supplied(),
            pipe_losses: state.pipe_losses,
            excess: state.total_excess,
            unmet: state.total_unmet,
            unmet_pct,
            plant_t_out: state.plant().t_out,
            plant_p_out: state.junction_pressure[plant.to],
            plant_f: state.plant().f,
            objective: state.objective,
            iterations,
        }
    }
}

/// Result of one optimization run.
#[derive(Debug, Clone)]
pub struct Run {
    pub problem: NlpProblem,
    pub state: NetworkState,
    pub report: SolveReport,
    pub summary: RunSummary,
}

impl Run {
    pub fn is_optimal(&self) -> bool {
        self.report.status == SolveStatus::Optimal
    }
}

/// Solves the optimization problem of `net` under `scen`, starting from
/// `x0` when given and from the default initial guess otherwise.
pub fn optimize(net: &Network, scen: &Scenario, cfg: &RunConfig, x0: Option<&[f64]>) -> Result<Run, RunError> {
    let problem = crate::nlp::assemble_tnfo(net, scen, &cfg.weights)?;
    let start = match x0 {
        Some(x) => x.to_vec(),
        None => problem.initial_guess(),
    };
    let sol = solve_nlp(&problem, &start, &cfg.solver)?;
    let state = NetworkState::from_vector(&problem, sol.x);
    let summary = RunSummary::from_state(&scen.name, &problem, &state, &sol.report);
    Ok(Run {
        problem,
        state,
        report: sol.report,
        summary,
    })
}

/// Fraction of demand left unmet, Σ QS / Σ Q.
pub fn unmet_fraction(state: &NetworkState) -> Result<f64, ScenarioError> {
    if state.required <= 0.0 {
        return Err(ScenarioError::ZeroDemand);
    }
    Ok(state.total_unmet / state.required)
}

/// Outcome of one scenario in a batch.
#[derive(Debug, Clone)]
pub struct BatchRow {
    pub name: String,
    pub result: Result<Run, RunError>,
}

/// Unique names: repeated names get `-2`, `-3`, ... suffixes.
fn disambiguate(scenarios: &[Scenario]) -> Vec<String> {
    let mut used: BTreeSet<String> = scenarios.iter().map(|s| s.name.clone()).collect();
    let mut seen: BTreeSet<&str> = BTreeSet::new();
    scenarios
        .iter()
        .map(|s| {
            if seen.insert(s.name.as_str()) {
                return s.name.clone();
            }
            let mut k = 2;
            loop {
                let candidate = format!("{}-{k}", s.name);
                if used.insert(candidate.clone()) {
                    return candidate;
                }
                k += 1;
            }
        })
        .collect()
}

/// Solves every scenario independently, in parallel. Rows come back in
/// input order; failures are reported per row.
pub fn run_batch(net: &Network, scenarios: &[Scenario], cfg: &RunConfig) -> Vec<BatchRow> {
    let names = disambiguate(scenarios);
    scenarios
        .par_iter()
        .zip(names.par_iter())
        .map(|(scen, name)| {
            let mut scen = scen.clone();
            scen.name = name.clone();
            let result = optimize(net, &scen, cfg, None).map(|mut run| {
                run.summary.name = name.clone();
                run
            });
            BatchRow {
                name: name.clone(),
                result,
            }
        })
        .collect()
}

/// One point of a demand sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub multiplier: f64,
    pub status: Result<SolveStatus, String>,
    pub plant_t_out: f64,
    pub plant_f: f64,
    pub pipe_losses: f64,
    pub unmet: f64,
    /// Whether the accepted solution came from the warm start.
    pub warm_started: bool,
    pub state: Option<NetworkState>,
}

/// Uniform demand multipliers from `from` to `to` in `steps` points, each
/// solve warm-started from the previous accepted solution with a cold-start
/// fallback.
pub fn sensitivity_sweep(
    net: &Network,
    from: f64,
    to: f64,
    steps: usize,
    cfg: &RunConfig,
) -> Result<Vec<SweepPoint>, ScenarioError> {
    if !(from <= to) || steps < 2 || !from.is_finite() || !to.is_finite() {
        return Err(ScenarioError::InvalidSweep);
    }
    let mut points = Vec::with_capacity(steps);
    let mut previous: Option<Vec<f64>> = None;
    for k in 0..steps {
        let m = from + (to - from) * k as f64 / (steps - 1) as f64;
        let scen = Scenario::uniform(&format!("x{m:.4}"), m);
        let mut warm = false;
        let mut outcome = Err(RunError::Solver(SolverError::LinearSolveFailure));
        if let Some(x0) = &previous {
            outcome = optimize(net, &scen, cfg, Some(x0));
            warm = matches!(&outcome, Ok(run) if run.is_optimal());
        }
        if !warm {
            outcome = optimize(net, &scen, cfg, None);
        }
        let point = match outcome {
            Ok(run) => {
                if run.is_optimal() {
                    previous = Some(run.state.x.clone());
                }
                SweepPoint {
                    multiplier: m,
                    status: Ok(run.report.status),
                    plant_t_out: run.summary.plant_t_out,
                    plant_f: run.summary.plant_f,
                    pipe_losses: run.summary.pipe_losses,
                    unmet: run.summary.unmet,
                    warm_started: warm,
                    state: Some(run.state),
                }
            }
            Err(e) => SweepPoint {
                multiplier: m,
                status: Err(e.to_string()),
                plant_t_out: f64::NAN,
                plant_f: f64::NAN,
                pipe_losses: f64::NAN,
                unmet: f64::NAN,
                warm_started: false,
                state: None,
            },
        };
        points.push(point);
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{minimal_network, synth_network, SynthSpec};

    #[test]
    fn empty_scenario_is_identity() {
        let net = synth_network(&SynthSpec::full_scale(1)).unwrap();
        let eff = apply_scenario(&net, &Scenario::default()).unwrap();
        let base: Vec<f64> = net.loads().iter().map(|l| l.demand).collect();
        assert_eq!(eff.demands, base);
        assert_eq!(eff.bounds, *net.bounds());
    }

    #[test]
    fn multipliers_compose() {
        let net = synth_network(&SynthSpec::full_scale(1)).unwrap();
        let scenarios = Scenario::contingency_set(&net);
        let totals: Vec<f64> = scenarios
            .iter()
            .map(|s| apply_scenario(&net, s).unwrap().total_demand() / 1e6)
            .collect();
        let expected = [15.14, 21.43, 22.71, 27.4275, 27.4275];
        for (t, e) in totals.iter().zip(expected) {
            assert!((t - e).abs() < 1e-9, "{totals:?}");
        }
        let largest = net.load_index(largest_load(&net)).unwrap();
        let eff = apply_scenario(&net, &scenarios[1]).unwrap();
        assert!((eff.demands[largest] - 3.0 * net.loads()[largest].demand).abs() < 1e-6);
    }

    #[test]
    fn absolute_override_wins() {
        let net = minimal_network(1e6, 30e6);
        let scen = Scenario {
            demand_multiplier: Some(2.0),
            load_multipliers: BTreeMap::from([("L1".to_string(), 5.0)]),
            load_demands: BTreeMap::from([("L1".to_string(), 7.0)]),
            ..Default::default()
        };
        assert_eq!(apply_scenario(&net, &scen).unwrap().demands, vec![7.0]);
    }

    #[test]
    fn invalid_scenarios() {
        let net = minimal_network(1e6, 30e6);
        let unknown = Scenario {
            load_multipliers: BTreeMap::from([("L99".to_string(), 2.0)]),
            ..Default::default()
        };
        assert_eq!(
            apply_scenario(&net, &unknown),
            Err(ScenarioError::UnknownLoad("L99".into()))
        );
        let negative = Scenario::uniform("neg", -1.0);
        assert!(matches!(
            apply_scenario(&net, &negative),
            Err(ScenarioError::InvalidMultiplier { .. })
        ));
        let bad_bounds = Scenario {
            bounds: BoundOverrides {
                p_min: Some(1e6),
                ..Default::default()
            },
            ..Default::default()
        };
        assert!(matches!(
            apply_scenario(&net, &bad_bounds),
            Err(ScenarioError::InvalidBounds(_))
        ));
    }

    #[test]
    fn duplicate_names_get_suffixes() {
        let s = |n: &str| Scenario {
            name: n.into(),
            ..Default::default()
        };
        let names = disambiguate(&[s("a"), s("b"), s("a"), s("a-2"), s("a")]);
        assert_eq!(names, ["a", "b", "a-3", "a-2", "a-4"]);
    }

    #[test]
    fn sweep_arguments_validated() {
        let net = minimal_network(1e6, 30e6);
        let cfg = RunConfig::default();
        assert_eq!(
            sensitivity_sweep(&net, 2.0, 1.0, 5, &cfg).unwrap_err(),
            ScenarioError::InvalidSweep
        );
        assert_eq!(
            sensitivity_sweep(&net, 1.0, 2.0, 1, &cfg).unwrap_err(),
            ScenarioError::InvalidSweep
        );
    }
}
