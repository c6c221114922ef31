//! File formats and result export.

mod export;
mod files;
#[cfg(test)]
mod tests;

use std::path::{Path, PathBuf};
use thiserror::Error;

use crate::model::ValidationErrors;
use crate::scenario::ScenarioError;

pub use export::{
    csv_string, edge_rows, ensure_dir, export_results, export_state, export_summary, export_sweep, failed_summary_row,
    junction_rows, network_dot, parse_csv, read_csv, EdgeRow, JunctionRow, SummaryRow, SweepRow, EDGES_CSV,
    JUNCTIONS_CSV, NETWORK_DOT, SETPOINTS_JSON, SUMMARY_CSV, SWEEP_CSV,
};
pub use files::{
    network_to_string, parse_network, parse_network_str, parse_scenario, parse_scenario_str, parse_setpoints,
    parse_setpoints_str, scenario_to_string, setpoints_to_string, BoundsBlock, ConstantsBlock, LoadRecord, NetworkFile,
    PipeRecord, PlantRecord, ScenarioFile, SetpointRecord, SetpointVar, SetpointsFile, UnitsBlock, NETWORK_SCHEMA,
    SCENARIO_SCHEMA, SETPOINTS_SCHEMA,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum UnitError {
    #[error("field `{field}` has no `{group}` unit declared in the units block")]
    Missing { field: String, group: &'static str },
    #[error("field `{field}`: unknown {group} unit `{unit}`")]
    Unknown {
        field: String,
        group: &'static str,
        unit: String,
    },
}

#[derive(Debug, Error)]
pub enum IoError {
    #[error("cannot access {}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed document: {0}")]
    Format(String),
    #[error("schema version mismatch: expected `{expected}`, found `{found}`")]
    SchemaVersionMismatch { expected: &'static str, found: String },
    #[error(transparent)]
    Unit(#[from] UnitError),
    #[error("invalid network: {0}")]
    Validation(#[from] ValidationErrors),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("csv: {0}")]
    Csv(String),
}

impl IoError {
    /// Whether the error concerns the content of an input document rather
    /// than access to it.
    pub fn is_invalid_input(&self) -> bool {
        !matches!(self, IoError::Io { .. })
    }
}

fn read_to_string(path: &Path) -> Result<String, IoError> {
    std::fs::read_to_string(path).map_err(|source| IoError::Io {
        path: path.to_path_buf(),
        source,
    })
}
