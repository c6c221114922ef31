//! Seeded generator for full-scale test networks.
//!
//! The outgoing system is a random tree rooted at the plant outlet with a
//! single trunk pipe; the return system mirrors it with reversed pipes.
//! Pipes beyond the tree count are added as parallel twins of existing tree
//! pipes on both sides. Every leaf of the tree hosts a load, the remaining
//! loads sit on interior junctions.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::{build_network, CarrierConstants, Load, Network, OperationalBounds, Pipe, Plant, RawNetwork, Side};
use crate::units::psi_to_pa;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub plants: usize,
    pub loads: usize,
    pub out_pipes: usize,
    pub ret_pipes: usize,
    pub pumps: usize,
    /// Total junction count over both sides. Defaults to a pure tree,
    /// `2 * (out_pipes + 1)`.
    pub junctions: Option<usize>,
    /// W
    pub total_demand: f64,
    /// W
    pub plant_capacity: f64,
    pub seed: u64,
}

impl SynthSpec {
    /// Full-scale census: 134 junctions, 68 + 68 pipes,
    /// 11 pumps, 45 loads totalling 15.14 MW.
    pub fn full_scale(seed: u64) -> SynthSpec {
        SynthSpec {
            plants: 1,
            loads: 45,
            out_pipes: 68,
            ret_pipes: 68,
            pumps: 11,
            junctions: Some(134),
            total_demand: 15.14e6,
            plant_capacity: 40e6,
            seed,
        }
    }

    /// Same generator with a single load and a single pipe per side.
    pub fn single_load(total_demand: f64, seed: u64) -> SynthSpec {
        SynthSpec {
            plants: 1,
            loads: 1,
            out_pipes: 1,
            ret_pipes: 1,
            pumps: 0,
            junctions: None,
            total_demand,
            plant_capacity: 40e6,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("infeasible synthetic spec: {0}")]
    InfeasibleSpec(String),
}

/// Share of total demand held by the three dominant loads.
const DOMINANT_SHARES: [f64; 3] = [3.145 / 15.14, 0.13, 0.11];
/// Design velocities used to size pipes at base demand, m/s.
const STEAM_VELOCITY: f64 = 30.0;
const WATER_VELOCITY: f64 = 1.0;
/// Steam density at the design point (about 40 psi, 125 °C), kg/m³.
const STEAM_DESIGN_DENSITY: f64 = 1.5;
const STANDARD_DIAMETERS: [f64; 16] = [
    0.05, 0.065, 0.08, 0.1, 0.125, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5, 0.6, 0.7, 0.8,
];

fn standard_diameter(area: f64) -> f64 {
    let d = (4.0 * area / std::f64::consts::PI).sqrt();
    STANDARD_DIAMETERS
        .iter()
        .copied()
        .find(|&s| s >= d)
        .unwrap_or(*STANDARD_DIAMETERS.last().unwrap())
}

fn padded(prefix: &str, i: usize, count: usize) -> String {
    let width = count.to_string().len().max(2);
    format!("{prefix}{:0width$}", i + 1)
}

/// Generates a deterministic network for `spec`.
pub fn synth_network(spec: &SynthSpec) -> Result<Network, SynthError> {
    let bad = |msg: String| Err(SynthError::InfeasibleSpec(msg));
    if spec.plants != 1 {
        return bad(format!("exactly one plant supported, got {}", spec.plants));
    }
    if spec.loads == 0 {
        return bad("at least one load required".into());
    }
    if spec.out_pipes == 0 || spec.out_pipes != spec.ret_pipes {
        return bad(format!(
            "outgoing and return pipe counts must be equal and positive ({} vs {})",
            spec.out_pipes, spec.ret_pipes
        ));
    }
    if spec.pumps > spec.ret_pipes {
        return bad(format!("{} pumps exceed {} return pipes", spec.pumps, spec.ret_pipes));
    }
    if !(spec.total_demand > 0.0 && spec.total_demand.is_finite()) {
        return bad("total demand must be positive".into());
    }
    if !(spec.plant_capacity > 0.0) {
        return bad("plant capacity must be positive".into());
    }
    let junctions = spec.junctions.unwrap_or(2 * (spec.out_pipes + 1));
    if !junctions.is_multiple_of(2) || junctions < 4 {
        return bad(format!("junction count {junctions} must be even and >= 4"));
    }
    let n = junctions / 2;
    if spec.out_pipes < n - 1 {
        return bad(format!(
            "{} pipes per side cannot connect {} junctions",
            spec.out_pipes, n
        ));
    }
    if spec.loads > n - 1 {
        return bad(format!(
            "{} loads exceed the {} non-root junctions per side",
            spec.loads,
            n - 1
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    // Tree over outgoing junctions 0..n, node 0 is the plant outlet and only
    // feeds node 1. The leaf count never exceeds the load count.
    let mut parent = vec![usize::MAX; n];
    let mut children = vec![0usize; n];
    parent[1] = 0;
    children[0] = 1;
    let mut leaves = 1;
    for k in 2..n {
        let candidates: Vec<usize> = if leaves >= spec.loads {
            (1..k).filter(|&i| children[i] == 0).collect()
        } else {
            (1..k).collect()
        };
        let p = *candidates.choose(&mut rng).unwrap();
        if children[p] > 0 {
            leaves += 1;
        }
        children[p] += 1;
        parent[k] = p;
    }

    // Load placement: all leaves first, then random interior junctions.
    let mut hosts: Vec<usize> = (1..n).filter(|&i| children[i] == 0).collect();
    let mut interior: Vec<usize> = (1..n).filter(|&i| children[i] > 0).collect();
    interior.shuffle(&mut rng);
    hosts.extend(interior.into_iter().take(spec.loads - hosts.len()));
    hosts.shuffle(&mut rng);

    // Demand profile with three dominant loads.
    let dominant = spec.loads.min(3);
    let mut shares: Vec<f64> = DOMINANT_SHARES[..dominant].to_vec();
    if spec.loads <= 3 {
        let s: f64 = shares.iter().sum();
        shares.iter_mut().for_each(|x| *x /= s);
    } else {
        let rest = 1.0 - shares.iter().sum::<f64>();
        let w: Vec<f64> = (dominant..spec.loads).map(|_| rng.gen_range(0.3..1.0)).collect();
        let ws: f64 = w.iter().sum();
        shares.extend(w.iter().map(|x| rest * x / ws));
    }
    let demands: Vec<f64> = shares.iter().map(|s| s * spec.total_demand).collect();

    // Downstream demand per junction for pipe sizing.
    let mut downstream = vec![0.0; n];
    for (l, &h) in hosts.iter().enumerate() {
        downstream[h] += demands[l];
    }
    for k in (1..n).rev() {
        let p = parent[k];
        downstream[p] += downstream[k];
    }

    let c = CarrierConstants::default();
    let design_enthalpy = c.latent_heat + c.c_steam * 25.0 + c.c_water * 20.0;

    // Tree pipe k connects parent[k] -> k; twins duplicate random tree pipes.
    let mut segments: Vec<(usize, f64)> = (1..n)
        .map(|k| {
            let length = if k == 1 { 50.0 } else { rng.gen_range(20.0..120.0) };
            (k, length)
        })
        .collect();
    let twins = spec.out_pipes - (n - 1);
    for _ in 0..twins {
        let k = rng.gen_range(1..n);
        let base = segments.iter().find(|s| s.0 == k).unwrap().1;
        segments.push((k, base * rng.gen_range(1.0..1.3)));
    }

    let jid = |side: Side, k: usize| match side {
        Side::Outgoing => padded("J", k, junctions),
        Side::Return => padded("J", n + k, junctions),
    };

    let mut pipes = Vec::with_capacity(2 * segments.len());
    for (i, &(k, length)) in segments.iter().enumerate() {
        // parallel twins share the design flow
        let sharing = segments.iter().filter(|s| s.0 == k).count() as f64;
        let flow = downstream[k] / design_enthalpy / sharing;
        let d_steam = standard_diameter(flow / (STEAM_DESIGN_DENSITY * STEAM_VELOCITY));
        let d_water = standard_diameter(flow / (c.rho_water * WATER_VELOCITY));
        pipes.push(Pipe {
            id: padded("OP", i, segments.len()),
            from: jid(Side::Outgoing, parent[k]),
            to: jid(Side::Outgoing, k),
            system: Side::Outgoing,
            length,
            diameter: d_steam,
            friction_factor: 0.01,
            heat_loss_coeff: 0.1,
            pump_boost_max: 0.0,
        });
        pipes.push(Pipe {
            id: padded("RP", i, segments.len()),
            from: jid(Side::Return, k),
            to: jid(Side::Return, parent[k]),
            system: Side::Return,
            length,
            diameter: d_water,
            friction_factor: 0.002,
            heat_loss_coeff: 0.05,
            pump_boost_max: 0.0,
        });
    }
    let mut return_pipes: Vec<usize> = (0..pipes.len()).filter(|i| i % 2 == 1).collect();
    return_pipes.shuffle(&mut rng);
    for &i in return_pipes.iter().take(spec.pumps) {
        pipes[i].pump_boost_max = psi_to_pa(5.0);
    }

    let loads = hosts
        .iter()
        .zip(&demands)
        .enumerate()
        .map(|(l, (&h, &q))| Load {
            id: padded("L", l, spec.loads),
            from: jid(Side::Outgoing, h),
            to: jid(Side::Return, h),
            demand: q,
        })
        .collect();

    let raw = RawNetwork {
        junctions: (0..junctions).map(|i| padded("J", i, junctions)).collect(),
        pipes,
        plants: vec![Plant {
            id: "PLANT".into(),
            from: jid(Side::Return, 0),
            to: jid(Side::Outgoing, 0),
            power_max: spec.plant_capacity,
        }],
        loads,
        constants: c,
        bounds: OperationalBounds::default(),
    };
    build_network(raw).map_err(|e| SynthError::InfeasibleSpec(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_scale_counts() {
        let net = synth_network(&SynthSpec::full_scale(1)).unwrap();
        let s = net.summary();
        assert_eq!(s.junctions, 134);
        assert_eq!(s.plants, 1);
        assert_eq!(s.loads, 45);
        assert_eq!(s.outgoing_pipes, 68);
        assert_eq!(s.return_pipes, 68);
        assert_eq!(s.pumps, 11);
        assert!((s.total_demand - 15.14e6).abs() < 1e-3);
        // two parallel twins per side
        assert_eq!(s.outgoing_loops, 2);
        assert_eq!(s.return_loops, 2);
    }

    #[test]
    fn three_dominant_loads() {
        let net = synth_network(&SynthSpec::full_scale(7)).unwrap();
        let mut q: Vec<f64> = net.loads().iter().map(|l| l.demand).collect();
        q.sort_by(|a, b| b.partial_cmp(a).unwrap());
        assert!((q[0] - 3.145e6).abs() < 1.0);
        assert!(q[2] > 2.0 * q[3]);
    }

    #[test]
    fn deterministic_per_seed() {
        let a = synth_network(&SynthSpec::full_scale(3)).unwrap();
        let b = synth_network(&SynthSpec::full_scale(3)).unwrap();
        let c = synth_network(&SynthSpec::full_scale(4)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn single_load_is_a_single_loop() {
        let net = synth_network(&SynthSpec::single_load(1e6, 1)).unwrap();
        assert_eq!(net.junctions().len(), 4);
        assert_eq!(net.pipes().len(), 2);
        assert_eq!(net.loads().len(), 1);
        assert!(net.is_radial());
    }

    #[test]
    fn single_load_chain_with_more_pipes() {
        let spec = SynthSpec {
            out_pipes: 5,
            ret_pipes: 5,
            ..SynthSpec::single_load(1e6, 9)
        };
        let net = synth_network(&spec).unwrap();
        assert_eq!(net.junctions().len(), 12);
        assert!(net.is_radial());
    }

    #[test]
    fn infeasible_specs() {
        let base = SynthSpec::full_scale(1);
        let cases = [
            SynthSpec {
                pumps: 69,
                ..base.clone()
            },
            SynthSpec {
                ret_pipes: 67,
                ..base.clone()
            },
            SynthSpec {
                plants: 2,
                ..base.clone()
            },
            SynthSpec {
                total_demand: 0.0,
                ..base.clone()
            },
            SynthSpec {
                junctions: Some(200),
                ..base.clone()
            },
            SynthSpec {
                loads: 70,
                ..base.clone()
            },
        ];
        for spec in cases {
            assert!(
                matches!(synth_network(&spec), Err(SynthError::InfeasibleSpec(_))),
                "{spec:?}"
            );
        }
    }
}
