use proptest::prelude::*;

use tnfo::io::{self, UnitsBlock};
use tnfo::model::{minimal_network, synth_network, SynthSpec};
use tnfo::nlp::{assemble_simulation, Setpoints};
use tnfo::scenario::{optimize, run_batch, RunConfig, Scenario};
use tnfo::solver::{solve_newton, NewtonOptions, Nlp, SolveStatus};

fn full_scale() -> tnfo::model::Network {
    synth_network(&SynthSpec::full_scale(7)).unwrap()
}

#[test]
fn network_file_round_trip_preserves_the_optimum() {
    let net = full_scale();
    let text = io::network_to_string(&net, &UnitsBlock::si());
    let back = io::parse_network_str(&text).unwrap();
    let cfg = RunConfig::default();
    let a = optimize(&net, &Scenario::baseline(), &cfg, None).unwrap();
    let b = optimize(&back, &Scenario::baseline(), &cfg, None).unwrap();
    assert_eq!(a.state.x, b.state.x);
}

#[test]
fn batch_matches_individual_runs() {
    let net = full_scale();
    let cfg = RunConfig::default();
    let scenarios = Scenario::contingency_set(&net);
    let rows = run_batch(&net, &scenarios, &cfg);
    assert_eq!(rows.len(), scenarios.len());
    for (row, scen) in rows.iter().zip(&scenarios) {
        assert_eq!(row.name, scen.name);
        let single = optimize(&net, scen, &cfg, None).unwrap();
        let batched = row.result.as_ref().unwrap();
        assert_eq!(batched.state.x, single.state.x);
        assert_eq!(batched.report.status, SolveStatus::Optimal);
    }
}

#[test]
fn duplicate_scenario_names_are_disambiguated() {
    let net = minimal_network(1e6, 30e6);
    let rows = run_batch(
        &net,
        &[Scenario::baseline(), Scenario::baseline()],
        &RunConfig::default(),
    );
    assert_eq!(rows[0].name, "baseline");
    assert_eq!(rows[1].name, "baseline-2");
}

#[test]
fn scaling_all_weights_keeps_the_argmin() {
    let net = full_scale();
    let base = RunConfig::default();
    let mut scaled = base.clone();
    scaled.weights = base.weights.scaled(10.0);
    let a = optimize(&net, &Scenario::baseline(), &base, None).unwrap();
    let b = optimize(&net, &Scenario::baseline(), &scaled, None).unwrap();
    assert!(a.is_optimal() && b.is_optimal());
    let scale = a.problem.var_scaling();
    let dev = a
        .state
        .x
        .iter()
        .zip(&b.state.x)
        .zip(&scale)
        .map(|((x, y), s)| (x - y).abs() / s)
        .fold(0.0f64, f64::max);
    assert!(dev < 1e-4, "argmin moved by {dev:e}");
    assert!((10.0 * a.summary.objective - b.summary.objective).abs() < 1e-6 * b.summary.objective);
}

#[test]
fn tighter_capacity_never_serves_more() {
    let net = full_scale();
    let cfg = RunConfig::default();
    let mut served = Vec::new();
    for cap in [40e6, 25e6, 20e6, 15e6] {
        let scen = Scenario {
            name: format!("cap-{cap}"),
            demand_multiplier: Some(1.8),
            plant_capacity: Some(cap),
            ..Default::default()
        };
        let run = optimize(&net, &scen, &cfg, None).unwrap();
        assert!(run.is_optimal(), "{}", scen.name);
        assert!(run.state.supplied() <= cap + 1.0);
        served.push(run.summary.required - run.summary.unmet);
    }
    for w in served.windows(2) {
        assert!(w[1] <= w[0] + 1.0, "{served:?}");
    }
}

#[test]
fn exported_setpoints_reproduce_the_optimum() {
    let net = full_scale();
    let run = optimize(&net, &Scenario::uniform("up", 1.3), &RunConfig::default(), None).unwrap();
    let text = io::setpoints_to_string(&Setpoints::from_optimum(&run.problem, &run.state.x), &UnitsBlock::si());
    let sp = io::parse_setpoints_str(&text).unwrap();
    let sys = assemble_simulation(run.problem.network(), &sp).unwrap();
    let rep = solve_newton(&sys, &sys.initial_guess(), &NewtonOptions::default()).unwrap();
    let x = sys.expand(&rep.x);
    let scale = run.problem.var_scaling();
    for ((a, b), s) in x.iter().zip(&run.state.x).zip(&scale) {
        assert!((a - b).abs() / s < 1e-6);
    }
}

#[test]
fn plant_flow_control_reproduces_a_single_load_optimum() {
    let net = synth_network(&SynthSpec::single_load(4e6, 3)).unwrap();
    let run = optimize(&net, &Scenario::baseline(), &RunConfig::default(), None).unwrap();
    assert!(run.is_optimal());
    let sp = Setpoints::plant_flow_control(&run.problem, &run.state.x);
    let sys = assemble_simulation(&net, &sp).unwrap();
    let rep = solve_newton(&sys, &sys.initial_guess(), &NewtonOptions::default()).unwrap();
    let x = sys.expand(&rep.x);
    let scale = run.problem.var_scaling();
    for ((a, b), s) in x.iter().zip(&run.state.x).zip(&scale) {
        assert!((a - b).abs() / s < 1e-6);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn minimal_network_solutions_balance(demand in 2e5f64..4e6, cap in 1e6f64..8e6) {
        let net = minimal_network(demand, cap);
        let run = optimize(&net, &Scenario::baseline(), &RunConfig::default(), None).unwrap();
        prop_assert!(run.is_optimal());
        let s = &run.state;
        prop_assert!(s.audit_error() < 1e-9);
        prop_assert!(s.max_mass_residual < 1e-9);
        prop_assert!(s.capacity_violation < 1.0);
        prop_assert!(s.total_excess >= 0.0 && s.total_unmet >= 0.0);
        // served power never exceeds what the plant can deliver net of pipe losses
        prop_assert!(s.required - s.total_unmet <= cap - s.pipe_losses + 1.0);
        for r in s.load_residuals(&run.problem) {
            prop_assert!(r.abs() < 1e-3);
        }
    }
}
