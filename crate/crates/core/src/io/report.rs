//! Simulation and sweep drivers and their machine-readable reports.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::StopEventRecord;
use crate::experiment::{replicate, run_once, Experiment, RunConfig, RunError};
use crate::metrics::{MonteCarloReport, RunSummary};
use crate::network::Violation;
use crate::solver::exact::TrajectorySample;
use crate::solver::upwind::{exact_edge_content, exact_exit_centroid, run_upwind, UpwindError};
use crate::solver::GridParams;

use super::config::{DwellSetting, LoadedScenario, ScenarioSettings, SolverChoice};
use super::tables;

pub const REPORT_FILE: &str = "report.json";
pub const SWEEP_FILE: &str = "sweep.json";
pub const RUN_INFO_FILE: &str = "run_info.json";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error(transparent)]
    Run(#[from] RunError),
    #[error(transparent)]
    Upwind(#[from] UpwindError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("no {REPORT_FILE} or {SWEEP_FILE} in {0}")]
    NothingToRender(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportHeader {
    pub name: String,
    pub master_seed: u64,
    pub runs: u64,
    pub horizon: f64,
    pub solver: SolverChoice,
    pub scenario: ScenarioSettings,
}

/// Upwind versus exact on one edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeCheck {
    pub edge: String,
    pub courant: f64,
    pub dt: f64,
    /// Largest relative per-step content difference; only meaningful at
    /// Courant number 1.
    pub max_relative_difference: f64,
    pub conservation_residual: f64,
    pub upwind_exit_centroid: Option<f64>,
    pub exact_exit_centroid: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCheck {
    pub grid: GridParams,
    pub edges: Vec<EdgeCheck>,
    pub min_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub header: ReportHeader,
    pub admissible: bool,
    pub violations: Vec<Violation>,
    pub single: Option<RunSummary>,
    pub monte_carlo: Option<MonteCarloReport>,
    pub grid_check: Option<GridCheck>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    Frequency,
    Cancellation,
    Shift,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub headway: Option<f64>,
    pub cancellation_rate: f64,
    pub shift: f64,
    pub report: MonteCarloReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub header: ReportHeader,
    pub kind: SweepKind,
    pub rows: Vec<SweepRow>,
}

/// Outcome of `simulate`, plus the detail of run 0 when requested.
#[derive(Debug, Clone)]
pub struct SimulationOutput {
    pub report: SimulationReport,
    pub trajectories: Option<Vec<TrajectorySample>>,
    pub events: Option<Vec<StopEventRecord>>,
}

fn header(s: &LoadedScenario) -> ReportHeader {
    ReportHeader {
        name: s.config.name.clone(),
        master_seed: s.config.seed_or_default(),
        runs: s.config.runs,
        horizon: s.config.horizon,
        solver: s.config.solver,
        scenario: s.config.scenario.clone(),
    }
}

/// Compare the grid solver with the exact solver on run 0.
pub fn grid_check(
    exp: &Experiment,
    cfg: &RunConfig,
    seed: u64,
    grid: &GridParams,
) -> Result<GridCheck, ReportError> {
    let outcome = run_once(exp, cfg, seed, 0)?;
    let field = run_upwind(&exp.network, &outcome.run, grid)?;
    let edges = field
        .edges
        .iter()
        .map(|g| {
            let exact = exact_edge_content(&outcome.run, g.edge, g.dt, g.steps());
            let max_relative_difference = g
                .content
                .iter()
                .zip(&exact)
                .map(|(a, b)| (a - b).abs() / b.abs().max(1.0))
                .fold(0.0, f64::max);
            EdgeCheck {
                edge: exp.network.track(g.edge).id.clone(),
                courant: g.courant,
                dt: g.dt,
                max_relative_difference,
                conservation_residual: g.conservation_residual(),
                upwind_exit_centroid: g.outflow_centroid(),
                exact_exit_centroid: exact_exit_centroid(&outcome.run, g.edge),
            }
        })
        .collect();
    Ok(GridCheck {
        grid: grid.clone(),
        edges,
        min_value: field.min_value(),
    })
}

/// Validate, then run once (`runs == 1`) or replicate.
pub fn simulate(s: &LoadedScenario, emit_detail: bool) -> Result<SimulationOutput, ReportError> {
    let exp = &s.experiment;
    let seed = s.config.seed_or_default();
    let admissibility = exp.validate();
    let mut report = SimulationReport {
        header: header(s),
        admissible: admissibility.is_admissible(),
        violations: admissibility.violations,
        single: None,
        monte_carlo: None,
        grid_check: None,
    };
    if !report.admissible {
        return Ok(SimulationOutput {
            report,
            trajectories: None,
            events: None,
        });
    }
    let cfg = s.config.scenario.run_config(emit_detail);
    let mut trajectories = None;
    let mut events = None;
    if s.config.solver != SolverChoice::Upwind {
        if s.config.runs == 1 || emit_detail {
            let outcome = run_once(exp, &cfg, seed, 0)?;
            if emit_detail {
                trajectories = Some(outcome.run.trajectory.clone());
                events = Some(outcome.run.log.stop_events.clone());
            }
            if s.config.runs == 1 {
                report.single = Some(outcome.summary);
            }
        }
        if s.config.runs > 1 {
            report.monte_carlo = Some(replicate(exp, &cfg, s.config.runs, seed));
        }
    }
    if s.config.solver != SolverChoice::Exact {
        report.grid_check = Some(grid_check(exp, &cfg, seed, &s.config.grid)?);
    }
    Ok(SimulationOutput {
        report,
        trajectories,
        events,
    })
}

pub const FREQUENCY_HEADWAYS: [f64; 5] = [40.0, 30.0, 20.0, 10.0, 5.0];
pub const CANCELLATION_HEADWAYS: [f64; 3] = [10.0, 20.0, 30.0];
pub const CANCELLATION_RATES: [f64; 4] = [0.0, 0.1, 0.2, 0.3];
pub const SHIFT_MINUTES: [f64; 4] = [0.0, 1.0, 2.0, 3.0];

/// Line moved by the shift sweep when the configuration names none.
pub const DEFAULT_SHIFT_LINE: &str = "1";

pub fn sweep(s: &LoadedScenario, kind: SweepKind) -> Result<SweepReport, ReportError> {
    let seed = s.config.seed_or_default();
    let runs = s.config.runs;
    let base_cfg = s.config.scenario.run_config(false);
    let mut rows = Vec::new();
    match kind {
        SweepKind::Frequency => {
            for h in FREQUENCY_HEADWAYS {
                let exp = s.experiment.with_headway(h)?;
                rows.push(SweepRow {
                    headway: Some(h),
                    cancellation_rate: base_cfg.disruption.cancellation_rate,
                    shift: 0.0,
                    report: replicate(&exp, &base_cfg, runs, seed),
                });
            }
        }
        SweepKind::Cancellation => {
            for h in CANCELLATION_HEADWAYS {
                let exp = s.experiment.with_headway(h)?;
                for rate in CANCELLATION_RATES {
                    let mut cfg = base_cfg.clone();
                    cfg.disruption.cancellation_rate = rate;
                    rows.push(SweepRow {
                        headway: Some(h),
                        cancellation_rate: rate,
                        shift: 0.0,
                        report: replicate(&exp, &cfg, runs, seed),
                    });
                }
            }
        }
        SweepKind::Shift => {
            let line = s
                .config
                .scenario
                .shift
                .as_ref()
                .map_or(DEFAULT_SHIFT_LINE, |sh| sh.line.as_str());
            for m in SHIFT_MINUTES {
                let exp = s.experiment.with_shift(line, m)?;
                rows.push(SweepRow {
                    headway: s.config.scenario.headway,
                    cancellation_rate: base_cfg.disruption.cancellation_rate,
                    shift: m,
                    report: replicate(&exp, &base_cfg, runs, seed),
                });
            }
        }
    }
    Ok(SweepReport {
        header: header(s),
        kind,
        rows,
    })
}

// ---------------------------------------------------------------- files

fn write(dir: &Path, name: &str, content: &str) -> Result<PathBuf, ReportError> {
    let path = dir.join(name);
    fs::write(&path, content).map_err(|source| ReportError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(path)
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialise");
    s.push('\n');
    s
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, ReportError> {
    let text = fs::read_to_string(path).map_err(|source| ReportError::Io {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| ReportError::Json {
        path: path.display().to_string(),
        source,
    })
}

fn ensure_dir(dir: &Path) -> Result<(), ReportError> {
    fs::create_dir_all(dir).map_err(|source| ReportError::Io {
        path: dir.display().to_string(),
        source,
    })
}

/// Wall-clock metadata, kept apart from the reproducible outputs.
pub fn write_run_info(dir: &Path, command: &str) -> Result<(), ReportError> {
    let secs = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let info = serde_json::json!({
        "command": command,
        "unix_time": secs,
        "version": env!("CARGO_PKG_VERSION"),
    });
    write(dir, RUN_INFO_FILE, &to_json(&info)).map(|_| ())
}

/// Table files derived from a simulation report.
pub fn simulation_tables(r: &SimulationReport) -> Vec<(&'static str, String)> {
    let mut out = Vec::new();
    if let Some(s) = &r.single {
        out.push(("totals.csv", tables::run_totals_table(s)));
        out.push((
            "waiting_by_stop.csv",
            tables::by_place_table("stop", &s.waiting),
        ));
        out.push((
            "waiting_by_hour.csv",
            tables::by_hour_table(&s.waiting.by_hour),
        ));
        out.push((
            "standing_by_edge.csv",
            tables::by_place_table("edge", &s.standing),
        ));
        out.push((
            "standing_by_hour.csv",
            tables::by_hour_table(&s.standing.by_hour),
        ));
        out.push(("utilization.csv", tables::run_utilization_table(s)));
    }
    if let Some(m) = &r.monte_carlo {
        out.push(("totals.csv", tables::mc_totals_table(m)));
        out.push(("waiting_by_stop.csv", tables::mc_waiting_by_stop_table(m)));
        out.push((
            "waiting_by_hour.csv",
            tables::by_hour_table(&m.waiting_by_hour),
        ));
        out.push((
            "standing_by_hour.csv",
            tables::by_hour_table(&m.standing_by_hour),
        ));
        out.push(("utilization.csv", tables::mc_utilization_table(m)));
    }
    if let Some(g) = &r.grid_check {
        let mut t = tables::Table::new(&[
            "edge",
            "courant",
            "dt",
            "max_relative_difference",
            "conservation_residual",
            "upwind_exit_centroid",
            "exact_exit_centroid",
        ]);
        for e in &g.edges {
            t.row([
                e.edge.clone(),
                tables::sig9(e.courant),
                tables::sig9(e.dt),
                tables::sig9(e.max_relative_difference),
                tables::sig9(e.conservation_residual),
                e.upwind_exit_centroid.map(tables::sig9).unwrap_or_default(),
                e.exact_exit_centroid.map(tables::sig9).unwrap_or_default(),
            ]);
        }
        out.push(("grid_check.csv", t.finish()));
    }
    out
}

pub fn write_simulation(
    dir: &Path,
    output: &SimulationOutput,
    net: &crate::network::TramNetwork,
) -> Result<(), ReportError> {
    ensure_dir(dir)?;
    write(dir, REPORT_FILE, &to_json(&output.report))?;
    for (name, content) in simulation_tables(&output.report) {
        write(dir, name, &content)?;
    }
    if let Some(t) = &output.trajectories {
        write(dir, "trajectories.csv", &tables::trajectory_table(t))?;
    }
    if let Some(e) = &output.events {
        write(dir, "events.csv", &tables::event_table(net, e))?;
    }
    Ok(())
}

pub fn write_sweep(dir: &Path, report: &SweepReport) -> Result<(), ReportError> {
    ensure_dir(dir)?;
    write(dir, SWEEP_FILE, &to_json(report))?;
    write(dir, "sweep.csv", &tables::sweep_table(report))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub enum SavedReport {
    Simulation(SimulationReport),
    Sweep(SweepReport),
}

pub fn load_saved(dir: &Path) -> Result<SavedReport, ReportError> {
    if dir.join(REPORT_FILE).exists() {
        return read_json(&dir.join(REPORT_FILE)).map(SavedReport::Simulation);
    }
    if dir.join(SWEEP_FILE).exists() {
        return read_json(&dir.join(SWEEP_FILE)).map(SavedReport::Sweep);
    }
    Err(ReportError::NothingToRender(dir.display().to_string()))
}

/// Tables of a saved report, as `(file name, content)`.
pub fn render(saved: &SavedReport) -> Vec<(&'static str, String)> {
    match saved {
        SavedReport::Simulation(r) => simulation_tables(r),
        SavedReport::Sweep(r) => vec![("sweep.csv", tables::sweep_table(r))],
    }
}

pub fn write_rendered(dir: &Path, saved: &SavedReport) -> Result<(), ReportError> {
    ensure_dir(dir)?;
    for (name, content) in render(saved) {
        write(dir, name, &content)?;
    }
    Ok(())
}

impl DwellSetting {
    pub fn label(self) -> &'static str {
        match self {
            DwellSetting::Off => "off",
            DwellSetting::Sum => "sum",
            DwellSetting::Paper => "paper",
        }
    }
}
