//! Scenario files, the system text format, Graphviz export and reports.

mod dot;
mod report;
mod scenario;
mod text;

use std::path::Path;

pub use dot::{export_attack_dot, export_dot};
pub use report::{
    analyze_dltts, analyze_mechanism, attack_section, attack_system, metric_entry, run_scenario,
    strategy_sections, AttackSection, DecisionEntry, DlttsSection, DpCheck, EpsilonEntry,
    IndistEntry, MechanismSection, MetricEntry, Report, RunEntry, StrategySection, ThresholdLine,
    VerdictEntry, TOOL,
};
pub use scenario::{
    AdjacencyKind, AttackerSource, AttackerSpec, Indist, MechanismSpec, Options, Scenario,
    TableRole,
};
pub use text::{parse_dltts, read_dltts, write_dltts};

use crate::dltts::DlttsError;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum IoError {
    #[error("cannot read {path}: {message}")]
    Read { path: String, message: String },
    #[error("{what}, line {line}: {message}")]
    Parse {
        what: String,
        line: usize,
        message: String,
    },
    #[error("{location}: {message}")]
    Invalid { location: String, message: String },
    #[error("unknown {kind} '{name}'")]
    Unresolved { kind: &'static str, name: String },
    #[error("{module} ({location}): {message}")]
    Module {
        module: &'static str,
        location: String,
        message: String,
    },
    #[error(transparent)]
    Dltts(#[from] DlttsError),
}

pub(crate) fn read_file(path: &Path) -> Result<String, IoError> {
    std::fs::read_to_string(path).map_err(|e| IoError::Read {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}
