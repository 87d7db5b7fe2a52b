//! Input parsing, report generation and tabular output.

pub mod config;
pub mod report;
pub mod tables;

pub use config::{
    bundled_names, load_scenario, parse_config, ConfigError, Document, LoadedScenario,
    SimulationConfig, SolverChoice,
};
pub use report::{simulate, sweep, ReportError, SimulationReport, SweepKind, SweepReport};
