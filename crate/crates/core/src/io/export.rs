//! Result tables (CSV) and graph annotation (Graphviz DOT), in display
//! units: psi, °C, MW and kg/s.

use serde::{de::DeserializeOwned, Deserialize, Serialize};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{files::setpoints_to_string, files::UnitsBlock, IoError};
use crate::model::{EdgeKind, Network};
use crate::nlp::{NetworkState, NlpProblem, Setpoints};
use crate::scenario::{RunSummary, SweepPoint};
use crate::units::{kelvin_to_celsius, pa_to_psi, w_to_mw};

pub const JUNCTIONS_CSV: &str = "junctions.csv";
pub const EDGES_CSV: &str = "edges.csv";
pub const SUMMARY_CSV: &str = "summary.csv";
pub const NETWORK_DOT: &str = "network.dot";
pub const SWEEP_CSV: &str = "sweep.csv";
pub const SETPOINTS_JSON: &str = "setpoints.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JunctionRow {
    pub id: String,
    pub p_psi: f64,
    #[serde(rename = "T_C")]
    pub t_c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeRow {
    pub id: String,
    pub kind: EdgeKind,
    pub f_kgps: f64,
    #[serde(rename = "T_in_C")]
    pub t_in_c: f64,
    #[serde(rename = "T_out_C")]
    pub t_out_c: f64,
    pub p_in_psi: f64,
    pub p_out_psi: f64,
    /// Empty for edges without a pump.
    pub alpha_psi: Option<f64>,
    /// Empty for edges other than loads.
    #[serde(rename = "QE_MW")]
    pub qe_mw: Option<f64>,
    #[serde(rename = "QS_MW")]
    pub qs_mw: Option<f64>,
}

/// One scenario row of the results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub scenario: String,
    pub status: String,
    #[serde(rename = "required_MW")]
    pub required_mw: f64,
    #[serde(rename = "supplied_MW")]
    pub supplied_mw: f64,
    #[serde(rename = "pipe_losses_MW")]
    pub pipe_losses_mw: f64,
    #[serde(rename = "excess_MW")]
    pub excess_mw: f64,
    #[serde(rename = "unmet_MW")]
    pub unmet_mw: f64,
    pub unmet_pct: f64,
    #[serde(rename = "plant_T_out_C")]
    pub plant_t_out_c: f64,
    pub plant_p_out_psi: f64,
    pub plant_f_kgps: f64,
    pub objective: f64,
    pub iterations: usize,
}

impl From<&RunSummary> for SummaryRow {
    fn from(s: &RunSummary) -> Self {
        SummaryRow {
            scenario: s.name.clone(),
            status: s.status.clone(),
            required_mw: w_to_mw(s.required),
            supplied_mw: w_to_mw(s.supplied),
            pipe_losses_mw: w_to_mw(s.pipe_losses),
            excess_mw: w_to_mw(s.excess),
            unmet_mw: w_to_mw(s.unmet),
            unmet_pct: s.unmet_pct,
            plant_t_out_c: kelvin_to_celsius(s.plant_t_out),
            plant_p_out_psi: pa_to_psi(s.plant_p_out),
            plant_f_kgps: s.plant_f,
            objective: s.objective,
            iterations: s.iterations,
        }
    }
}

/// A scenario that failed before producing a state.
pub fn failed_summary_row(name: &str, status: &str) -> SummaryRow {
    SummaryRow {
        scenario: name.to_string(),
        status: status.to_string(),
        required_mw: f64::NAN,
        supplied_mw: f64::NAN,
        pipe_losses_mw: f64::NAN,
        excess_mw: f64::NAN,
        unmet_mw: f64::NAN,
        unmet_pct: f64::NAN,
        plant_t_out_c: f64::NAN,
        plant_p_out_psi: f64::NAN,
        plant_f_kgps: f64::NAN,
        objective: f64::NAN,
        iterations: 0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub multiplier: f64,
    pub status: String,
    #[serde(rename = "plant_T_out_C")]
    pub plant_t_out_c: f64,
    pub plant_f_kgps: f64,
    #[serde(rename = "pipe_losses_MW")]
    pub pipe_losses_mw: f64,
    #[serde(rename = "unmet_MW")]
    pub unmet_mw: f64,
}

impl From<&SweepPoint> for SweepRow {
    fn from(p: &SweepPoint) -> Self {
        SweepRow {
            multiplier: p.multiplier,
            status: match &p.status {
                Ok(s) => s.to_string(),
                Err(e) => format!("error: {e}"),
            },
            plant_t_out_c: kelvin_to_celsius(p.plant_t_out),
            plant_f_kgps: p.plant_f,
            pipe_losses_mw: w_to_mw(p.pipe_losses),
            unmet_mw: w_to_mw(p.unmet),
        }
    }
}

/// Junction rows sorted by id.
pub fn junction_rows(net: &Network, state: &NetworkState) -> Vec<JunctionRow> {
    let mut rows: Vec<JunctionRow> = net
        .junctions()
        .iter()
        .enumerate()
        .map(|(j, junction)| JunctionRow {
            id: junction.id.clone(),
            p_psi: pa_to_psi(state.junction_pressure[j]),
            t_c: kelvin_to_celsius(state.junction_temperature[j]),
        })
        .collect();
    rows.sort_by(|a, b| a.id.cmp(&b.id));
    rows
}

/// Edge rows of every kind, sorted by id.
pub fn edge_rows(net: &Network, state: &NetworkState) -> Vec<EdgeRow> {
    let mut rows: Vec<EdgeRow> = net
        .edges()
        .iter()
        .enumerate()
        .map(|(e, edge)| {
            let s = &state.edges[e];
            let pumped = net.pipe(edge).is_some_and(|p| p.has_pump());
            let is_load = edge.kind == EdgeKind::Load;
            EdgeRow {
                id: net.edge_id(e).to_string(),
                kind: edge.kind,
                f_kgps: s.f,
                t_in_c: kelvin_to_celsius(s.t_in),
                t_out_c: kelvin_to_celsius(s.t_out),
                p_in_psi: pa_to_psi(s.p_in),
                p_out_psi: pa_to_psi(s.p_out),
                alpha_psi: pumped.then(|| pa_to_psi(s.alpha)),
                qe_mw: is_load.then(|| w_to_mw(s.qe)),
                qs_mw: is_load.then(|| w_to_mw(s.qs)),
            }
        })
        .collect();
    rows.sort_by(|a, b| a.id.cmp(&b.id));
    rows
}

pub fn csv_string<T: Serialize>(rows: &[T]) -> Result<String, IoError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| IoError::Csv(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| IoError::Csv(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output of UTF-8 fields is UTF-8"))
}

pub fn parse_csv<T: DeserializeOwned>(text: &str) -> Result<Vec<T>, IoError> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .collect::<Result<Vec<T>, _>>()
        .map_err(|e| IoError::Csv(e.to_string()))
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, IoError> {
    parse_csv(&super::read_to_string(path)?)
}

fn dot_quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for ch in s.chars() {
        match ch {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// Graphviz rendering of a solved network. Junctions carry pressure and
/// temperature, edges carry flow and temperatures; pipe pen width is
/// proportional to diameter.
pub fn network_dot(net: &Network, state: &NetworkState) -> String {
    let d_max = net.pipes().iter().map(|p| p.diameter).fold(0.0f64, f64::max);
    let mut out = String::new();
    out.push_str("digraph tnfo {\n  rankdir=LR;\n  node [shape=ellipse, fontsize=10];\n  edge [fontsize=8];\n");
    for (j, junction) in net.junctions().iter().enumerate() {
        let p = pa_to_psi(state.junction_pressure[j]);
        let t = kelvin_to_celsius(state.junction_temperature[j]);
        let label = format!("{}\n{p:.2} psi\n{t:.2} C", junction.id);
        let color = match junction.side {
            crate::model::Side::Outgoing => "firebrick",
            crate::model::Side::Return => "steelblue",
        };
        let _ = writeln!(
            out,
            "  {} [label={}, color={color}, side={}, p_psi={p:.6}, T_C={t:.6}];",
            dot_quote(&junction.id),
            dot_quote(&label),
            junction.side,
        );
    }
    for (e, edge) in net.edges().iter().enumerate() {
        let s = &state.edges[e];
        let from = &net.junctions()[edge.from].id;
        let to = &net.junctions()[edge.to].id;
        let (width, style) = match net.pipe(edge) {
            Some(p) if d_max > 0.0 => (0.5 + 4.5 * p.diameter / d_max, "solid"),
            _ => (1.0, "dashed"),
        };
        let label = format!("{}\n{:.3} kg/s", net.edge_id(e), s.f);
        let _ = writeln!(
            out,
            "  {} -> {} [id={}, kind={}, label={}, penwidth={width:.3}, style={style}, f_kgps={:.6}, T_in_C={:.6}, T_out_C={:.6}];",
            dot_quote(from),
            dot_quote(to),
            dot_quote(net.edge_id(e)),
            edge.kind,
            dot_quote(&label),
            s.f,
            kelvin_to_celsius(s.t_in),
            kelvin_to_celsius(s.t_out),
        );
    }
    out.push_str("}\n");
    out
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<(), IoError> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|source| IoError::Io { path, source })
}

pub fn ensure_dir(dir: &Path) -> Result<(), IoError> {
    fs::create_dir_all(dir).map_err(|source| IoError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

/// Writes junctions.csv, edges.csv, network.dot and setpoints.json for one
/// solved state.
pub fn export_state(problem: &NlpProblem, state: &NetworkState, dir: &Path) -> Result<(), IoError> {
    let net = problem.network();
    ensure_dir(dir)?;
    write(dir, JUNCTIONS_CSV, &csv_string(&junction_rows(net, state))?)?;
    write(dir, EDGES_CSV, &csv_string(&edge_rows(net, state))?)?;
    write(dir, NETWORK_DOT, &network_dot(net, state))?;
    let sp = Setpoints::from_optimum(problem, &state.x);
    write(dir, SETPOINTS_JSON, &setpoints_to_string(&sp, &UnitsBlock::display()))
}

/// Writes summary.csv with one row per entry.
pub fn export_summary(rows: &[SummaryRow], dir: &Path) -> Result<(), IoError> {
    ensure_dir(dir)?;
    write(dir, SUMMARY_CSV, &csv_string(rows)?)
}

/// All result files of a single run.
pub fn export_results(
    problem: &NlpProblem,
    state: &NetworkState,
    summary: &RunSummary,
    dir: &Path,
) -> Result<(), IoError> {
    export_state(problem, state, dir)?;
    export_summary(&[SummaryRow::from(summary)], dir)
}

pub fn export_sweep(points: &[SweepPoint], dir: &Path) -> Result<(), IoError> {
    ensure_dir(dir)?;
    let rows: Vec<SweepRow> = points.iter().map(SweepRow::from).collect();
    write(dir, SWEEP_CSV, &csv_string(&rows)?)
}
