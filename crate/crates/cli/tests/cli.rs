use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;
use tnfo::io::{self, UnitsBlock};
use tnfo::model::{synth_network, SynthSpec};
use tnfo::scenario::Scenario;

fn tnfo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tnfo")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Fixture {
    dir: TempDir,
    network: PathBuf,
    scenario: PathBuf,
}

fn fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let network = dir.path().join("network.json");
    let out = tnfo(&["synth", "--seed", "7", "--out", s(&network)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let scenario = dir.path().join("baseline.json");
    std::fs::write(
        &scenario,
        io::scenario_to_string(&Scenario::baseline(), &UnitsBlock::display()),
    )
    .unwrap();
    Fixture { dir, network, scenario }
}

#[test]
fn synth_writes_a_loadable_network() {
    let f = fixture();
    let net = io::parse_network(&f.network).unwrap();
    let expected = synth_network(&SynthSpec::full_scale(7)).unwrap();
    assert_eq!(net.summary().to_string(), expected.summary().to_string());
    let out = tnfo(&["validate", s(&f.network)]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("134 junctions"));
}

#[test]
fn invalid_inputs_exit_1() {
    let f = fixture();
    let missing = f.dir.path().join("missing.json");
    assert_eq!(code(&tnfo(&["validate", s(&missing)])), 1);

    let bad = f.dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"schema": "tnfo-net/2"}"#).unwrap();
    let out = tnfo(&["validate", s(&bad)]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("schema"));

    let text = std::fs::read_to_string(&f.network)
        .unwrap()
        .replacen("\"length\": ", "\"length\": -", 1);
    std::fs::write(&bad, text).unwrap();
    assert_eq!(code(&tnfo(&["validate", s(&bad)])), 1);

    let out_dir = f.dir.path().join("out");
    let opt = |extra: &[&str]| {
        let mut args = extra.to_vec();
        args.extend(["optimize", s(&f.network), s(&f.scenario), "-o", s(&out_dir)]);
        code(&tnfo(&args))
    };
    assert_eq!(opt(&["--weights", "speed=2"]), 1);
    assert_eq!(opt(&["--weights", "flow=-1"]), 1);
    assert_eq!(opt(&["--tol", "0"]), 1);
    assert_eq!(opt(&["--plant-outlet-pmin", "200"]), 1);
}

#[test]
fn usage_errors_exit_1_and_help_exits_0() {
    assert_eq!(code(&tnfo(&[])), 1);
    assert_eq!(code(&tnfo(&["optimize"])), 1);
    assert_eq!(code(&tnfo(&["frobnicate"])), 1);
    assert_eq!(code(&tnfo(&["--help"])), 0);
    assert_eq!(code(&tnfo(&["--version"])), 0);
}

#[test]
fn optimize_writes_all_outputs() {
    let f = fixture();
    let out_dir = f.dir.path().join("out");
    let out = tnfo(&["optimize", s(&f.network), s(&f.scenario), "-o", s(&out_dir)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for name in [
        io::JUNCTIONS_CSV,
        io::EDGES_CSV,
        io::SUMMARY_CSV,
        io::NETWORK_DOT,
        io::SETPOINTS_JSON,
    ] {
        assert!(out_dir.join(name).is_file(), "{name}");
    }
    let rows: Vec<io::SummaryRow> = io::read_csv(&out_dir.join(io::SUMMARY_CSV)).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].status, "optimal");
    assert!(rows[0].unmet_pct < 1e-3);
    let edges: Vec<io::EdgeRow> = io::read_csv(&out_dir.join(io::EDGES_CSV)).unwrap();
    assert_eq!(edges.len(), 1 + 136 + 45);
}

#[test]
fn iteration_limit_exits_2_but_still_writes() {
    let f = fixture();
    let out_dir = f.dir.path().join("out");
    let out = tnfo(&[
        "--max-iter",
        "2",
        "optimize",
        s(&f.network),
        s(&f.scenario),
        "-o",
        s(&out_dir),
    ]);
    assert_eq!(code(&out), 2);
    let rows: Vec<io::SummaryRow> = io::read_csv(&out_dir.join(io::SUMMARY_CSV)).unwrap();
    assert_eq!(rows[0].status, "iteration-limit");
}

#[test]
fn plant_outlet_floor_is_applied() {
    let f = fixture();
    let out_dir = f.dir.path().join("out");
    let args = [
        "--plant-outlet-pmin",
        "50",
        "optimize",
        s(&f.network),
        s(&f.scenario),
        "-o",
        s(&out_dir),
    ];
    assert_eq!(code(&tnfo(&args)), 0);
    let rows: Vec<io::SummaryRow> = io::read_csv(&out_dir.join(io::SUMMARY_CSV)).unwrap();
    assert!(rows[0].plant_p_out_psi >= 50.0 - 1e-6);
}

#[test]
fn simulate_reproduces_exported_setpoints() {
    let f = fixture();
    let opt_dir = f.dir.path().join("opt");
    assert_eq!(
        code(&tnfo(&["optimize", s(&f.network), s(&f.scenario), "-o", s(&opt_dir)])),
        0
    );
    let sim_dir = f.dir.path().join("sim");
    let out = tnfo(&[
        "simulate",
        s(&f.network),
        s(&opt_dir.join(io::SETPOINTS_JSON)),
        "-o",
        s(&sim_dir),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let a: Vec<io::JunctionRow> = io::read_csv(&opt_dir.join(io::JUNCTIONS_CSV)).unwrap();
    let b: Vec<io::JunctionRow> = io::read_csv(&sim_dir.join(io::JUNCTIONS_CSV)).unwrap();
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.id, y.id);
        assert!((x.p_psi - y.p_psi).abs() < 1e-4);
        assert!((x.t_c - y.t_c).abs() < 1e-4);
    }
}

#[test]
fn batch_runs_every_scenario_file() {
    let f = fixture();
    let net = io::parse_network(&f.network).unwrap();
    let scen_dir = f.dir.path().join("scenarios");
    std::fs::create_dir(&scen_dir).unwrap();
    for (k, scen) in Scenario::contingency_set(&net).iter().enumerate() {
        let text = io::scenario_to_string(scen, &UnitsBlock::display());
        std::fs::write(scen_dir.join(format!("{k}.json")), text).unwrap();
    }
    std::fs::write(scen_dir.join("notes.txt"), "not a scenario").unwrap();
    let out_dir = f.dir.path().join("out");
    let out = tnfo(&["batch", s(&f.network), s(&scen_dir), "-o", s(&out_dir)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let rows: Vec<io::SummaryRow> = io::read_csv(&out_dir.join(io::SUMMARY_CSV)).unwrap();
    let names: Vec<&str> = rows.iter().map(|r| r.scenario.as_str()).collect();
    assert_eq!(
        names,
        [
            "baseline",
            "largest-load-x3",
            "uniform-x1.5",
            "combined",
            "combined-capacity-20MW"
        ]
    );
    assert!(rows.iter().all(|r| r.status == "optimal"));
    assert!(rows[4].unmet_pct > 20.0);
    for name in names {
        assert!(out_dir.join(name).join(io::EDGES_CSV).is_file());
    }
}

#[test]
fn batch_of_empty_directory_is_invalid() {
    let f = fixture();
    let empty = f.dir.path().join("empty");
    std::fs::create_dir(&empty).unwrap();
    let out_dir = f.dir.path().join("out");
    assert_eq!(code(&tnfo(&["batch", s(&f.network), s(&empty), "-o", s(&out_dir)])), 1);
}

#[test]
fn sweep_writes_one_row_per_step() {
    let f = fixture();
    let out_dir = f.dir.path().join("out");
    let args = [
        "sweep",
        s(&f.network),
        "--from",
        "1",
        "--to",
        "1.5",
        "--steps",
        "4",
        "-o",
        s(&out_dir),
    ];
    assert_eq!(code(&tnfo(&args)), 0);
    let rows: Vec<io::SweepRow> = io::read_csv(&out_dir.join(io::SWEEP_CSV)).unwrap();
    assert_eq!(rows.len(), 4);
    assert!(rows.windows(2).all(|w| w[1].plant_f_kgps >= w[0].plant_f_kgps));

    let bad = [
        "sweep",
        s(&f.network),
        "--from",
        "2",
        "--to",
        "1",
        "--steps",
        "4",
        "-o",
        s(&out_dir),
    ];
    assert_eq!(code(&tnfo(&bad)), 1);
}
