use proptest::prelude::*;
use std::collections::BTreeMap;

use super::*;
use crate::model::{minimal_network, synth_network, SynthSpec};
use crate::nlp::{Setpoints, VarKey};
use crate::scenario::{optimize, BoundOverrides, RunConfig, Scenario};
use crate::units::psi_to_pa;

const MINIMAL: &str = r#"{
  "schema": "tnfo-net/1",
  "units": {"pressure": "psi", "temperature": "C", "power": "MW", "length": "m", "heat_loss": "W/(m*K)"},
  "bounds": {"t_max": 150, "p_min": 5},
  "junctions": ["J1", "J2", "J3", "J4"],
  "plants": [{"id": "PLANT", "from": "J4", "to": "J1", "power_max": 30}],
  "pipes": [
    {"id": "OP1", "from": "J1", "to": "J2", "system": "outgoing", "length": 100, "diameter": 0.15,
     "friction_factor": 0.01, "heat_loss_coeff": 0.1},
    {"id": "RP1", "from": "J3", "to": "J4", "system": "return", "length": 100, "diameter": 0.05,
     "friction_factor": 0.002, "heat_loss_coeff": 0.05}
  ],
  "loads": [{"id": "L1", "from": "J2", "to": "J3", "demand": 1}]
}"#;

#[test]
fn minimal_file_parses_to_the_builtin_network() {
    let net = parse_network_str(MINIMAL).unwrap();
    assert_eq!(net, minimal_network(1e6, 30e6));
}

#[test]
fn missing_pressure_unit_names_the_field() {
    let text = MINIMAL.replace(r#""pressure": "psi", "#, "");
    match parse_network_str(&text) {
        Err(IoError::Unit(UnitError::Missing { field, group })) => {
            assert_eq!(field, "bounds.p_min");
            assert_eq!(group, "pressure");
        }
        other => panic!("expected a unit error, got {other:?}"),
    }
}

#[test]
fn unknown_unit_is_rejected() {
    let text = MINIMAL.replace(r#""length": "m""#, r#""length": "furlong""#);
    let err = parse_network_str(&text).unwrap_err();
    assert!(
        matches!(err, IoError::Unit(UnitError::Unknown { ref unit, .. }) if unit == "furlong"),
        "{err}"
    );
}

#[test]
fn unknown_fields_are_rejected() {
    let text = MINIMAL.replace(r#""demand": 1"#, r#""demand": 1, "priority": 2"#);
    let err = parse_network_str(&text).unwrap_err();
    assert!(matches!(&err, IoError::Format(m) if m.contains("priority")), "{err}");
}

#[test]
fn schema_version_is_checked_first() {
    let text = MINIMAL
        .replace("tnfo-net/1", "tnfo-net/2")
        .replace(r#""demand": 1"#, r#""demand": 1, "x": 0"#);
    assert!(matches!(
        parse_network_str(&text),
        Err(IoError::SchemaVersionMismatch { found, .. }) if found == "tnfo-net/2"
    ));
    assert!(matches!(
        parse_scenario_str(r#"{"schema": "tnfo-net/1", "name": "a"}"#),
        Err(IoError::SchemaVersionMismatch { .. })
    ));
}

#[test]
fn validation_errors_are_delegated() {
    let text = MINIMAL.replace(r#""diameter": 0.15"#, r#""diameter": -0.15"#);
    assert!(matches!(parse_network_str(&text), Err(IoError::Validation(_))));
}

#[test]
fn si_export_round_trips_exactly() {
    let net = synth_network(&SynthSpec::full_scale(3)).unwrap();
    let text = network_to_string(&net, &UnitsBlock::si());
    let back = parse_network_str(&text).unwrap();
    assert_eq!(back, net);
    assert_eq!(network_to_string(&back, &UnitsBlock::si()), text);
}

#[test]
fn display_export_round_trips_to_rounding() {
    let net = synth_network(&SynthSpec::full_scale(3)).unwrap();
    let back = parse_network_str(&network_to_string(&net, &UnitsBlock::display())).unwrap();
    let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(1.0);
    for (a, b) in net.loads().iter().zip(back.loads()) {
        assert!(rel(a.demand, b.demand) < 1e-12);
    }
    for (a, b) in net.pipes().iter().zip(back.pipes()) {
        assert!(rel(a.pump_boost_max, b.pump_boost_max) < 1e-12);
    }
    assert!(rel(net.bounds().p_max, back.bounds().p_max) < 1e-12);
    assert!(rel(net.bounds().t_min, back.bounds().t_min) < 1e-12);
}

#[test]
fn scenario_file_round_trip() {
    let scen = Scenario {
        name: "cap".into(),
        demand_multiplier: Some(1.5),
        load_multipliers: BTreeMap::from([("L1".to_string(), 3.0)]),
        load_demands: BTreeMap::from([("L2".to_string(), 2.5e5)]),
        plant_capacity: Some(20e6),
        bounds: BoundOverrides {
            p_max: Some(psi_to_pa(70.0)),
            ..Default::default()
        },
    };
    let text = scenario_to_string(&scen, &UnitsBlock::si());
    assert_eq!(parse_scenario_str(&text).unwrap(), scen);
    let display = parse_scenario_str(&scenario_to_string(&scen, &UnitsBlock::display())).unwrap();
    assert!((display.plant_capacity.unwrap() - 20e6).abs() < 1e-6);
    assert!((display.bounds.p_max.unwrap() - psi_to_pa(70.0)).abs() < 1e-6);
}

#[test]
fn scenario_without_power_unit_is_rejected() {
    let err = parse_scenario_str(r#"{"schema": "tnfo-scenario/1", "name": "s", "plant_capacity": 20}"#).unwrap_err();
    assert!(matches!(err, IoError::Unit(UnitError::Missing { ref field, .. }) if field == "plant_capacity"));
}

#[test]
fn setpoints_file_round_trip() {
    let mut sp = Setpoints::default();
    sp.set(VarKey::OutletTemperature("PLANT".into()), 398.0);
    sp.set(VarKey::Pressure("J1".into()), psi_to_pa(40.0));
    sp.set(VarKey::Excess("L1".into()), 0.0);
    sp.set(VarKey::Flow("PLANT".into()), 6.43);
    let text = setpoints_to_string(&sp, &UnitsBlock::si());
    assert_eq!(parse_setpoints_str(&text).unwrap(), sp);
    let display = parse_setpoints_str(&setpoints_to_string(&sp, &UnitsBlock::display())).unwrap();
    for ((ka, a), (kb, b)) in sp.values.iter().zip(&display.values) {
        assert_eq!(ka, kb);
        assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
    }
}

/// Minimal recursive-descent checker for the DOT language subset the
/// exporter may produce: attribute statements, node statements and edge
/// statements inside one `digraph`.
fn check_dot(text: &str) -> Result<(), String> {
    #[derive(Debug, PartialEq)]
    enum Tok {
        Id,
        Arrow,
        Punct(char),
    }
    let mut toks = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c == '"' {
            i += 1;
            loop {
                match chars.get(i) {
                    None => return Err("unterminated string".into()),
                    Some('\\') => i += 2,
                    Some('"') => break,
                    Some(_) => i += 1,
                }
            }
            i += 1;
            toks.push(Tok::Id);
        } else if c == '-' && chars.get(i + 1) == Some(&'>') {
            i += 2;
            toks.push(Tok::Arrow);
        } else if c.is_ascii_alphanumeric() || c == '_' || c == '.' || c == '-' {
            let numeric = c.is_ascii_digit() || c == '.' || c == '-';
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || "_.-".contains(chars[i])) {
                if numeric && !(chars[i].is_ascii_digit() || chars[i] == '.' || chars[i] == '-') {
                    return Err(format!("malformed numeral at {i}"));
                }
                if chars[i] == '-' && chars.get(i + 1) == Some(&'>') {
                    break;
                }
                i += 1;
            }
            toks.push(Tok::Id);
        } else if "{}[];=,".contains(c) {
            toks.push(Tok::Punct(c));
            i += 1;
        } else {
            return Err(format!("unexpected character {c:?}"));
        }
    }
    let mut pos = 0;
    let expect = |pos: &mut usize, t: Tok| -> Result<(), String> {
        if toks.get(*pos) == Some(&t) {
            *pos += 1;
            Ok(())
        } else {
            Err(format!("expected {t:?} at token {pos}, found {:?}", toks.get(*pos)))
        }
    };
    expect(&mut pos, Tok::Id)?; // digraph
    expect(&mut pos, Tok::Id)?; // name
    expect(&mut pos, Tok::Punct('{'))?;
    let attr_list = |pos: &mut usize| -> Result<(), String> {
        expect(pos, Tok::Punct('['))?;
        loop {
            if toks.get(*pos) == Some(&Tok::Punct(']')) {
                *pos += 1;
                return Ok(());
            }
            expect(pos, Tok::Id)?;
            expect(pos, Tok::Punct('='))?;
            expect(pos, Tok::Id)?;
            if toks.get(*pos) == Some(&Tok::Punct(',')) {
                *pos += 1;
            }
        }
    };
    loop {
        match toks.get(pos) {
            Some(Tok::Punct('}')) => {
                pos += 1;
                break;
            }
            Some(Tok::Id) => {
                pos += 1;
                match toks.get(pos) {
                    Some(Tok::Punct('=')) => {
                        pos += 1;
                        expect(&mut pos, Tok::Id)?;
                    }
                    Some(Tok::Arrow) => {
                        pos += 1;
                        expect(&mut pos, Tok::Id)?;
                        if toks.get(pos) == Some(&Tok::Punct('[')) {
                            attr_list(&mut pos)?;
                        }
                    }
                    Some(Tok::Punct('[')) => attr_list(&mut pos)?,
                    _ => {}
                }
                expect(&mut pos, Tok::Punct(';'))?;
            }
            other => return Err(format!("unexpected token {other:?} at {pos}")),
        }
    }
    if pos != toks.len() {
        return Err("trailing tokens after graph".into());
    }
    Ok(())
}

#[test]
fn dot_checker_rejects_broken_input() {
    assert!(check_dot("digraph g { a -> b [x=1]; }").is_ok());
    assert!(check_dot("digraph g { a -> ; }").is_err());
    assert!(check_dot("digraph g { a [x=\"1]; }").is_err());
    assert!(check_dot("digraph g { a -> b [x=1 }").is_err());
}

#[test]
fn exports_are_deterministic_and_parse_back() {
    let net = minimal_network(1e6, 30e6);
    let run = optimize(&net, &Scenario::baseline(), &RunConfig::default(), None).unwrap();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    export_results(&run.problem, &run.state, &run.summary, a.path()).unwrap();
    export_results(&run.problem, &run.state, &run.summary, b.path()).unwrap();
    for name in [JUNCTIONS_CSV, EDGES_CSV, SUMMARY_CSV, NETWORK_DOT, SETPOINTS_JSON] {
        let x = std::fs::read(a.path().join(name)).unwrap();
        let y = std::fs::read(b.path().join(name)).unwrap();
        assert!(!x.is_empty());
        assert_eq!(x, y, "{name} differs between exports");
    }

    let junctions: Vec<JunctionRow> = read_csv(&a.path().join(JUNCTIONS_CSV)).unwrap();
    assert_eq!(junctions, junction_rows(&net, &run.state));
    let edges: Vec<EdgeRow> = read_csv(&a.path().join(EDGES_CSV)).unwrap();
    assert_eq!(edges, edge_rows(&net, &run.state));
    let ids: Vec<&str> = edges.iter().map(|e| e.id.as_str()).collect();
    let mut sorted = ids.clone();
    sorted.sort();
    assert_eq!(ids, sorted);
    let summary: Vec<SummaryRow> = read_csv(&a.path().join(SUMMARY_CSV)).unwrap();
    assert_eq!(summary, vec![SummaryRow::from(&run.summary)]);

    let dot = std::fs::read_to_string(a.path().join(NETWORK_DOT)).unwrap();
    check_dot(&dot).unwrap();

    let sp = parse_setpoints(&a.path().join(SETPOINTS_JSON)).unwrap();
    let direct = Setpoints::from_optimum(&run.problem, &run.state.x);
    for ((ka, a), (kb, b)) in direct.values.iter().zip(&sp.values) {
        assert_eq!(ka, kb);
        assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
    }
}

#[test]
fn full_scale_network_dot_is_well_formed() {
    let net = synth_network(&SynthSpec::full_scale(7)).unwrap();
    let problem = crate::nlp::assemble_tnfo(&net, &Scenario::baseline(), &Default::default()).unwrap();
    let state = crate::nlp::NetworkState::from_vector(&problem, problem.initial_guess());
    let dot = network_dot(&net, &state);
    check_dot(&dot).unwrap();
    assert_eq!(dot.matches(" -> ").count(), net.edges().len());
}

#[test]
fn failed_rows_serialize() {
    let rows = vec![failed_summary_row("broken", "error: linear solve failed")];
    let text = csv_string(&rows).unwrap();
    let back: Vec<SummaryRow> = parse_csv(&text).unwrap();
    assert_eq!(back[0].scenario, "broken");
    assert!(back[0].required_mw.is_nan());
}

proptest! {
    #[test]
    fn edge_rows_round_trip(f in 0.0f64..50.0, t in 300.0f64..450.0, alpha in proptest::option::of(0.0f64..30.0)) {
        let row = EdgeRow {
            id: "e,1".into(),
            kind: crate::model::EdgeKind::ReturnPipe,
            f_kgps: f,
            t_in_c: t,
            t_out_c: t - 1.0,
            p_in_psi: 40.0,
            p_out_psi: 39.5,
            alpha_psi: alpha,
            qe_mw: None,
            qs_mw: None,
        };
        let back: Vec<EdgeRow> = parse_csv(&csv_string(std::slice::from_ref(&row)).unwrap()).unwrap();
        prop_assert_eq!(back, vec![row]);
    }

    #[test]
    fn scenario_round_trip_si(m in 0.0f64..5.0, cap in 1.0f64..1e8, demand in 0.0f64..1e7) {
        let scen = Scenario {
            name: "p".into(),
            demand_multiplier: Some(m),
            load_demands: BTreeMap::from([("L1".to_string(), demand)]),
            plant_capacity: Some(cap),
            ..Default::default()
        };
        let back = parse_scenario_str(&scenario_to_string(&scen, &UnitsBlock::si())).unwrap();
        prop_assert_eq!(back, scen);
    }
}
