use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::model::{minimal_network, synth_network, SynthSpec};
use crate::solver::{fd_jacobian_extrapolated, max_relative_error};

fn full_scale() -> Network {
    synth_network(&SynthSpec::full_scale(7)).unwrap()
}

fn problem(net: &Network) -> NlpProblem {
    NlpProblem::new(net.clone(), ObjectiveWeights::default(), "test".into())
}

/// Random point inside the variable bounds; free variables near the guess.
fn random_point(p: &NlpProblem, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let guess = p.initial_guess();
    let (lo, hi) = p.var_bounds();
    let scale = p.var_scaling();
    (0..p.num_vars())
        .map(|i| {
            let (l, u) = (lo[i], hi[i]);
            match (l.is_finite(), u.is_finite()) {
                (true, true) => rng.gen_range(l + 1e-3 * (u - l)..u - 1e-3 * (u - l)),
                (true, false) => l + scale[i] * rng.gen_range(0.1..1.5),
                (false, true) => u - scale[i] * rng.gen_range(0.01..0.5),
                (false, false) => guess[i] + scale[i] * rng.gen_range(-0.3..0.3),
            }
        })
        .collect()
}

fn dense_jacobian(p: &NlpProblem, x: &[f64]) -> DMatrix<f64> {
    let mut v = vec![0.0; p.jacobian_structure().len()];
    p.jacobian_values(x, &mut v);
    let mut j = DMatrix::zeros(p.num_cons(), p.num_vars());
    for (&(r, c), v) in p.jacobian_structure().iter().zip(v) {
        j[(r, c)] += v;
    }
    j
}

#[test]
fn layout_counts() {
    for net in [minimal_network(1e6, 2e6), full_scale()] {
        let lay = index_variables(&net);
        let (v, e) = (net.junctions().len(), net.edges().len());
        let expected = 2 * v + 3 * e + net.pumped_pipes().len() + 2 * net.loads().len();
        assert_eq!(lay.len(), expected);
        for i in 0..lay.len() {
            assert_eq!(lay.index(&lay.key(i)), Some(i));
        }
    }
    assert_eq!(index_variables(&minimal_network(1e6, 2e6)).len(), 22);
}

#[test]
fn full_scale_row_counts() {
    let p = problem(&full_scale());
    let count = |f: RowFamily| (0..p.num_cons()).filter(|&r| p.row_family(r) == f).count();
    assert_eq!(count(RowFamily::LoadBalance), 45);
    assert_eq!(count(RowFamily::PipeTemperature), 136);
    assert_eq!(count(RowFamily::SteamPressure) + count(RowFamily::WaterPressure), 136);
    assert_eq!(count(RowFamily::JunctionMass), 134);
    assert_eq!(count(RowFamily::JunctionEnergy), 134);
    assert_eq!(count(RowFamily::Mixing), 182);
    assert_eq!(count(RowFamily::PlantCapacity), 1);
    assert_eq!(count(RowFamily::LoadPressureOrder), 45);
    assert_eq!(p.redundant_constraints().len(), 1);
}

#[test]
fn every_variable_is_used() {
    let p = problem(&full_scale());
    let mut used = vec![false; p.num_vars()];
    for &(_, c) in p.jacobian_structure() {
        used[c] = true;
    }
    let mut g = vec![0.0; p.num_vars()];
    p.gradient(&p.initial_guess(), &mut g);
    for (i, gi) in g.iter().enumerate() {
        used[i] |= *gi != 0.0;
    }
    assert!(used.iter().all(|&u| u));
}

#[test]
fn jacobian_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for net in [minimal_network(1e6, 2e6), full_scale()] {
        let p = problem(&net);
        for _ in 0..2 {
            let x = random_point(&p, &mut rng);
            let analytic = dense_jacobian(&p, &x);
            let fd = fd_jacobian_extrapolated(
                |x| {
                    let mut g = vec![0.0; p.num_cons()];
                    p.constraints(x, &mut g);
                    g
                },
                &x,
                1e-3,
            )
            .unwrap();
            let err = max_relative_error(&analytic, &fd, 1e-8);
            assert!(err < 1e-6, "jacobian error {err:e}");
        }
    }
}

#[test]
fn hessian_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for net in [minimal_network(1e6, 2e6), full_scale()] {
        let p = problem(&net);
        let x = random_point(&p, &mut rng);
        let lambda: Vec<f64> = (0..p.num_cons()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut hv = vec![0.0; p.hessian_structure().len()];
        p.hessian_values(&x, 1.0, &lambda, &mut hv);
        let n = p.num_vars();
        let mut analytic = DMatrix::zeros(n, n);
        for (&(i, j), v) in p.hessian_structure().iter().zip(hv) {
            analytic[(i, j)] += v;
            if i != j {
                analytic[(j, i)] += v;
            }
        }
        let fd = fd_jacobian_extrapolated(
            |x| {
                let mut v = vec![0.0; p.jacobian_structure().len()];
                p.jacobian_values(x, &mut v);
                let mut out = vec![0.0; n];
                for (&(r, c), v) in p.jacobian_structure().iter().zip(v) {
                    out[c] += lambda[r] * v;
                }
                out
            },
            &x,
            1e-3,
        )
        .unwrap();
        let err = max_relative_error(&analytic, &fd, 1e-8);
        assert!(err < 1e-6, "hessian error {err:e}");
    }
}

#[test]
fn simulation_dof_matches_equations() {
    for net in [minimal_network(1e6, 2e6), full_scale()] {
        let p = problem(&net);
        let x = p.initial_guess();
        let sp = Setpoints::from_optimum(&p, &x);
        assert_eq!(
            sp.values.len(),
            3 + p.layout().pump_edges().len() + 3 * net.loads().len()
        );
        let sys = SimulationSystem::new(p, &sp).unwrap();
        assert!(!sys.restrict(&x).is_empty());
    }
}

#[test]
fn plant_flow_control_square_only_for_single_load() {
    let net = minimal_network(1e6, 2e6);
    let p = problem(&net);
    let x = p.initial_guess();
    assert!(SimulationSystem::new(p.clone(), &Setpoints::plant_flow_control(&p, &x)).is_ok());
    let net = full_scale();
    let p = problem(&net);
    let x = p.initial_guess();
    let err = SimulationSystem::new(p.clone(), &Setpoints::plant_flow_control(&p, &x)).unwrap_err();
    assert!(matches!(err, NlpError::NonSquareSystem { .. }));
}
