//! Dataset and run-configuration parsing.
//!
//! A dataset is a network document (TOML: stops, tracks, lines or explicit
//! trips, shared queues) plus line-oriented CSV tables for arrival rates,
//! alighting fractions and initial queues. A run configuration (TOML)
//! points at those files and carries the run parameters.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{AlightingTable, DemandMode, DemandTables};
use crate::experiment::{Experiment, RunConfig};
use crate::network::{
    EdgeIdx, NetworkError, QueueLayout, StopSpec, Timetable, TrackSpec, TramNetwork, Trip,
    DAY_MINUTES,
};
use crate::scenarios::{DisruptionPlan, DwellDelayModel, DwellMode, FailureSpec};
use crate::service::{expand_services, HourlyCapacity, LineService, ServicePeriod};
use crate::solver::GridParams;
use crate::stochastic::{HourlyProfile, RateTable, RateUnit};

pub const DEFAULT_RUNS: u64 = 1000;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: cannot read: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Toml { path: String, message: String },
    #[error("{path}:{line}: {message}")]
    Table {
        path: String,
        line: u64,
        message: String,
    },
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
    #[error("unknown bundled dataset `{0}`")]
    UnknownDataset(String),
}

impl ConfigError {
    fn invalid(path: &str, message: impl std::fmt::Display) -> Self {
        ConfigError::Invalid {
            path: path.to_string(),
            message: message.to_string(),
        }
    }

    fn table(path: &str, line: u64, message: impl std::fmt::Display) -> Self {
        ConfigError::Table {
            path: path.to_string(),
            line,
            message: message.to_string(),
        }
    }
}

/// Text of one input file together with where it came from.
#[derive(Debug, Clone)]
pub struct Document {
    pub origin: String,
    pub text: String,
}

impl Document {
    pub fn read(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        Ok(Self {
            origin: path.display().to_string(),
            text,
        })
    }

    fn embedded(dataset: &str, file: &str, text: &str) -> Self {
        Self {
            origin: format!("{dataset}/{file}"),
            text: text.to_string(),
        }
    }
}

fn parse_toml<T: serde::de::DeserializeOwned>(doc: &Document) -> Result<T, ConfigError> {
    toml::from_str(&doc.text).map_err(|e| ConfigError::Toml {
        path: doc.origin.clone(),
        message: e.to_string().trim_end().to_string(),
    })
}

// ---------------------------------------------------------------- network

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNetwork {
    name: Option<String>,
    measurement_stop: Option<String>,
    stops: Vec<RawStop>,
    tracks: Vec<RawTrack>,
    #[serde(default)]
    lines: Vec<RawLine>,
    #[serde(default)]
    trips: Vec<RawTrip>,
    #[serde(default)]
    shared_queues: Vec<RawPool>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStop {
    id: String,
    name: Option<String>,
    #[serde(default)]
    start: bool,
    #[serde(default)]
    terminal: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTrack {
    id: String,
    from: String,
    to: String,
    length_km: f64,
    speed_km_per_min: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLine {
    id: String,
    route: Vec<String>,
    anchor: String,
    minute: f64,
    capacity: Option<f64>,
    seats: Option<f64>,
    capacity_by_hour: Option<Vec<f64>>,
    seats_by_hour: Option<Vec<f64>>,
    periods: Vec<RawPeriod>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPeriod {
    start: f64,
    end: f64,
    headway: f64,
    #[serde(default)]
    peak: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTrip {
    id: String,
    line: Option<String>,
    route: Vec<String>,
    departure: f64,
    capacity: f64,
    seats: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPool {
    id: String,
    edges: Vec<String>,
}

/// Parsed network document.
#[derive(Debug, Clone)]
pub struct NetworkDoc {
    pub name: Option<String>,
    pub network: TramNetwork,
    pub services: Vec<LineService>,
    pub explicit_trips: Vec<Trip>,
    pub layout: QueueLayout,
    pub measurement_stop: Option<String>,
}

impl NetworkDoc {
    pub fn timetable(&self, horizon: f64) -> Result<Timetable, ConfigError> {
        let mut trips = expand_services(&self.network, &self.services, horizon)
            .map_err(|e| ConfigError::invalid("network", e))?;
        trips.extend(self.explicit_trips.iter().cloned());
        trips.sort_by(|a, b| {
            a.departure
                .total_cmp(&b.departure)
                .then_with(|| a.id.cmp(&b.id))
        });
        Timetable::new(trips, horizon).map_err(|e| ConfigError::invalid("network", e))
    }
}

fn hourly(path: &str, what: &str, values: &[f64]) -> Result<[f64; 24], ConfigError> {
    <[f64; 24]>::try_from(values).map_err(|_| {
        ConfigError::invalid(
            path,
            format!("{what} needs 24 hourly values, got {}", values.len()),
        )
    })
}

fn route(net: &TramNetwork, path: &str, ids: &[String]) -> Result<Vec<EdgeIdx>, ConfigError> {
    ids.iter()
        .map(|id| net.edge_idx(id).map_err(|e| ConfigError::invalid(path, e)))
        .collect()
}

pub fn parse_network(doc: &Document) -> Result<NetworkDoc, ConfigError> {
    let raw: RawNetwork = parse_toml(doc)?;
    let path = doc.origin.as_str();
    let net_err = |e: NetworkError| ConfigError::invalid(path, e);
    let stops = raw
        .stops
        .iter()
        .map(|s| StopSpec {
            id: s.id.clone(),
            name: s.name.clone(),
            is_start: s.start,
            is_terminal: s.terminal,
        })
        .collect();
    let tracks = raw
        .tracks
        .iter()
        .map(|t| TrackSpec::new(&t.id, &t.from, &t.to, t.length_km, t.speed_km_per_min))
        .collect();
    let network = TramNetwork::new(stops, tracks).map_err(net_err)?;

    let mut seen = HashSet::new();
    let mut services = Vec::new();
    for l in &raw.lines {
        if !seen.insert(l.id.clone()) {
            return Err(ConfigError::invalid(
                path,
                format!("duplicate line `{}`", l.id),
            ));
        }
        let capacity = match (&l.capacity_by_hour, &l.seats_by_hour, l.capacity, l.seats) {
            (Some(c), Some(s), None, None) => HourlyCapacity {
                total: hourly(path, "capacity_by_hour", c)?,
                seats: hourly(path, "seats_by_hour", s)?,
            },
            (None, None, Some(c), Some(s)) => HourlyCapacity::constant(c, s),
            _ => {
                return Err(ConfigError::invalid(
                    path,
                    format!(
                        "line `{}`: give either capacity and seats or capacity_by_hour and seats_by_hour",
                        l.id
                    ),
                ))
            }
        };
        let service = LineService {
            line: l.id.clone(),
            route: route(&network, path, &l.route)?,
            anchor: network.stop_idx(&l.anchor).map_err(net_err)?,
            minute: l.minute,
            periods: l
                .periods
                .iter()
                .map(|p| ServicePeriod {
                    start: p.start,
                    end: p.end,
                    headway: p.headway,
                    peak: p.peak,
                })
                .collect(),
            capacity,
        };
        service
            .check(&network)
            .map_err(|e| ConfigError::invalid(path, e))?;
        services.push(service);
    }

    let mut trip_ids = HashSet::new();
    let mut explicit_trips = Vec::new();
    for t in &raw.trips {
        if !trip_ids.insert(t.id.clone()) {
            return Err(ConfigError::invalid(
                path,
                format!("duplicate trip `{}`", t.id),
            ));
        }
        explicit_trips.push(Trip {
            id: t.id.clone(),
            line: t.line.clone().unwrap_or_else(|| t.id.clone()),
            edges: route(&network, path, &t.route)?,
            departure: t.departure,
            capacity: t.capacity,
            seat_capacity: t.seats,
        });
    }

    let pools: Vec<(String, Vec<String>)> = raw
        .shared_queues
        .iter()
        .map(|p| (p.id.clone(), p.edges.clone()))
        .collect();
    let layout = QueueLayout::with_shared(&network, &pools).map_err(net_err)?;
    if let Some(m) = &raw.measurement_stop {
        network.stop_idx(m).map_err(net_err)?;
    }
    Ok(NetworkDoc {
        name: raw.name,
        network,
        services,
        explicit_trips,
        layout,
        measurement_stop: raw.measurement_stop,
    })
}

// ---------------------------------------------------------------- tables

fn csv_reader(doc: &Document) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(doc.text.as_bytes())
}

fn record_line(rec: &csv::StringRecord) -> u64 {
    rec.position().map_or(0, |p| p.line())
}

fn header_index(
    doc: &Document,
    headers: &csv::StringRecord,
    name: &str,
) -> Result<usize, ConfigError> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| ConfigError::table(&doc.origin, 1, format!("missing column `{name}`")))
}

fn parse_hours(doc: &Document, line: u64, field: &str) -> Result<Vec<usize>, ConfigError> {
    if field.is_empty() || field == "all" {
        return Ok((0..24).collect());
    }
    match field.parse::<usize>() {
        Ok(h) if h < 24 => Ok(vec![h]),
        _ => Err(ConfigError::table(
            &doc.origin,
            line,
            format!("hour `{field}` is not in 0..=23 or `all`"),
        )),
    }
}

fn parse_number(doc: &Document, line: u64, what: &str, field: &str) -> Result<f64, ConfigError> {
    field
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| {
            ConfigError::table(
                &doc.origin,
                line,
                format!("{what} `{field}` is not a finite number"),
            )
        })
}

/// Arrival rates: columns `edge, hour, rate, unit` with unit `per_hour` or
/// `per_min` and hour `0..=23` or `all`. The edge column may also name a
/// stop, whose rate is split evenly over its outgoing tracks.
pub fn parse_rates(doc: &Document, net: &TramNetwork) -> Result<RateTable, ConfigError> {
    let mut reader = csv_reader(doc);
    let headers = reader
        .headers()
        .map_err(|e| ConfigError::table(&doc.origin, 1, e))?
        .clone();
    let [ie, ih, ir, iu] = ["edge", "hour", "rate", "unit"].map(|n| header_index(doc, &headers, n));
    let (ie, ih, ir, iu) = (ie?, ih?, ir?, iu?);
    let mut rows: BTreeMap<String, [Option<f64>; 24]> = BTreeMap::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            ConfigError::table(&doc.origin, line, e)
        })?;
        let line = record_line(&rec);
        let key = rec.get(ie).unwrap_or_default();
        // A stop id spreads the rate evenly over the stop's out-edges.
        let edges: Vec<&str> = match net.edge_idx(key) {
            Ok(_) => vec![key],
            Err(err) => match net.stop_idx(key) {
                Ok(v) if !net.outgoing(v).is_empty() => net
                    .outgoing(v)
                    .iter()
                    .map(|&e| net.track(e).id.as_str())
                    .collect(),
                Ok(_) => {
                    return Err(ConfigError::table(
                        &doc.origin,
                        line,
                        format!("stop `{key}` has no outgoing track"),
                    ))
                }
                Err(_) => return Err(ConfigError::table(&doc.origin, line, err)),
            },
        };
        let unit = match rec.get(iu).unwrap_or_default() {
            "per_hour" | "1/h" => RateUnit::PerHour,
            "per_min" | "1/min" => RateUnit::PerMin,
            other => {
                return Err(ConfigError::table(
                    &doc.origin,
                    line,
                    format!("unknown rate unit `{other}` (expected per_hour or per_min)"),
                ))
            }
        };
        let rate = parse_number(doc, line, "rate", rec.get(ir).unwrap_or_default())?;
        if rate < 0.0 {
            return Err(ConfigError::table(
                &doc.origin,
                line,
                format!("negative rate {rate}"),
            ));
        }
        let hours = parse_hours(doc, line, rec.get(ih).unwrap_or_default())?;
        let share = unit.to_per_min(rate) / edges.len() as f64;
        for edge in edges {
            let row = rows.entry(edge.to_string()).or_insert([None; 24]);
            for &h in &hours {
                if row[h].replace(share).is_some() {
                    return Err(ConfigError::table(
                        &doc.origin,
                        line,
                        format!("duplicate rate for edge `{edge}` hour {h}"),
                    ));
                }
            }
        }
    }
    let mut table = RateTable::new();
    for (edge, row) in rows {
        let profile = HourlyProfile::new(row.map(|r| r.unwrap_or(0.0)))
            .map_err(|e| ConfigError::invalid(&doc.origin, e))?;
        table.insert(edge, profile);
    }
    Ok(table)
}

/// Alighting fractions: columns `stop, in_edge, hour, fraction`. An empty
/// `in_edge` makes the row apply to every arrival at the stop.
pub fn parse_alighting(doc: &Document, net: &TramNetwork) -> Result<AlightingTable, ConfigError> {
    let mut reader = csv_reader(doc);
    let headers = reader
        .headers()
        .map_err(|e| ConfigError::table(&doc.origin, 1, e))?
        .clone();
    let [is, ie, ih, ifr] =
        ["stop", "in_edge", "hour", "fraction"].map(|n| header_index(doc, &headers, n));
    let (is, ie, ih, ifr) = (is?, ie?, ih?, ifr?);
    let mut table = AlightingTable::new();
    let mut seen = HashSet::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            ConfigError::table(&doc.origin, line, e)
        })?;
        let line = record_line(&rec);
        let stop = rec.get(is).unwrap_or_default();
        let edge = rec.get(ie).unwrap_or_default();
        let stop_idx = net
            .stop_idx(stop)
            .map_err(|e| ConfigError::table(&doc.origin, line, e))?;
        if !edge.is_empty() {
            let e = net
                .edge_idx(edge)
                .map_err(|e| ConfigError::table(&doc.origin, line, e))?;
            if net.track(e).head != stop_idx {
                return Err(ConfigError::table(
                    &doc.origin,
                    line,
                    format!("edge `{edge}` does not end at stop `{stop}`"),
                ));
            }
        }
        let fraction = parse_number(doc, line, "fraction", rec.get(ifr).unwrap_or_default())?;
        for h in parse_hours(doc, line, rec.get(ih).unwrap_or_default())? {
            if !seen.insert((stop.to_string(), edge.to_string(), h)) {
                return Err(ConfigError::table(
                    &doc.origin,
                    line,
                    format!("duplicate alighting row for stop `{stop}` hour {h}"),
                ));
            }
            let res = if edge.is_empty() {
                table.set_stop(stop, h, fraction)
            } else {
                table.set_edge(edge, h, fraction)
            };
            res.map_err(|e| ConfigError::table(&doc.origin, line, e))?;
        }
    }
    Ok(table)
}

/// Initial queues: columns `queue, passengers`.
pub fn parse_initial_queues(
    doc: &Document,
    layout: &QueueLayout,
) -> Result<BTreeMap<String, f64>, ConfigError> {
    let mut reader = csv_reader(doc);
    let headers = reader
        .headers()
        .map_err(|e| ConfigError::table(&doc.origin, 1, e))?
        .clone();
    let iq = header_index(doc, &headers, "queue")?;
    let ip = header_index(doc, &headers, "passengers")?;
    let mut out = BTreeMap::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            ConfigError::table(&doc.origin, line, e)
        })?;
        let line = record_line(&rec);
        let queue = rec.get(iq).unwrap_or_default();
        if !layout.queues().iter().any(|q| q.id == queue) {
            return Err(ConfigError::table(
                &doc.origin,
                line,
                format!("unknown queue `{queue}`"),
            ));
        }
        let n = parse_number(doc, line, "passengers", rec.get(ip).unwrap_or_default())?;
        if n < 0.0 {
            return Err(ConfigError::table(
                &doc.origin,
                line,
                format!("negative queue {n}"),
            ));
        }
        if out.insert(queue.to_string(), n).is_some() {
            return Err(ConfigError::table(
                &doc.origin,
                line,
                format!("duplicate queue `{queue}`"),
            ));
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------- run config

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverChoice {
    #[default]
    Exact,
    Upwind,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DwellSetting {
    /// No passenger-exchange delays.
    #[default]
    Off,
    Sum,
    Paper,
}

impl DwellSetting {
    pub fn model(self) -> Option<DwellDelayModel> {
        match self {
            DwellSetting::Off => None,
            DwellSetting::Sum => Some(DwellDelayModel::with_mode(DwellMode::Sum)),
            DwellSetting::Paper => Some(DwellDelayModel::with_mode(DwellMode::PaperLiteral)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftSetting {
    pub line: String,
    pub minutes: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSettings {
    #[serde(default)]
    pub demand: DemandMode,
    #[serde(default)]
    pub dwell: DwellSetting,
    #[serde(default)]
    pub cancellation_rate: f64,
    /// Failure kinds; `standard_failures = true` adds the default pair.
    #[serde(default)]
    pub failures: Vec<FailureSpec>,
    #[serde(default)]
    pub standard_failures: bool,
    pub headway: Option<f64>,
    pub shift: Option<ShiftSetting>,
}

impl ScenarioSettings {
    pub fn run_config(&self, record_trajectories: bool) -> RunConfig {
        let mut failures = self.failures.clone();
        if self.standard_failures {
            failures.extend(FailureSpec::standard());
        }
        RunConfig {
            dwell: self.dwell.model(),
            disruption: DisruptionPlan {
                cancellation_rate: self.cancellation_rate,
                failures,
                seed: None,
            },
            demand_mode: self.demand,
            record_trajectories,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    cfl: Option<f64>,
    dt: Option<f64>,
    cells: Option<usize>,
    snapshot_every: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    name: Option<String>,
    network: String,
    rates: Option<String>,
    alighting: Option<String>,
    initial_queues: Option<String>,
    horizon: Option<f64>,
    solver: Option<SolverChoice>,
    runs: Option<u64>,
    seed: Option<u64>,
    out: Option<String>,
    grid: Option<RawGrid>,
    scenario: Option<ScenarioSettings>,
}

/// Validated run configuration with every default applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub name: String,
    pub network: String,
    pub rates: Option<String>,
    pub alighting: Option<String>,
    pub initial_queues: Option<String>,
    pub horizon: f64,
    pub solver: SolverChoice,
    pub runs: u64,
    pub seed: Option<u64>,
    pub out: Option<String>,
    pub grid: GridParams,
    pub scenario: ScenarioSettings,
}

impl SimulationConfig {
    pub fn seed_or_default(&self) -> u64 {
        self.seed.unwrap_or(0)
    }
}

pub fn parse_config(doc: &Document) -> Result<SimulationConfig, ConfigError> {
    let raw: RawConfig = parse_toml(doc)?;
    let path = doc.origin.as_str();
    let horizon = raw.horizon.unwrap_or(DAY_MINUTES);
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(ConfigError::invalid(
            path,
            format!("horizon must be positive minutes, got {horizon}"),
        ));
    }
    let runs = raw.runs.unwrap_or(DEFAULT_RUNS);
    if runs == 0 {
        return Err(ConfigError::invalid(path, "runs must be at least 1"));
    }
    let solver = raw.solver.unwrap_or_default();
    if solver != SolverChoice::Exact && raw.seed.is_none() {
        return Err(ConfigError::invalid(
            path,
            "the upwind solver replays a fixed demand realisation and needs an explicit seed",
        ));
    }
    let mut grid = GridParams::default();
    if let Some(g) = raw.grid {
        grid.cfl = g.cfl.unwrap_or(grid.cfl);
        grid.dt = g.dt;
        grid.cells = g.cells.unwrap_or(grid.cells);
        grid.snapshot_every = g.snapshot_every.unwrap_or(0);
    }
    if !(grid.cfl > 0.0 && grid.cfl <= 1.0) {
        return Err(ConfigError::invalid(
            path,
            format!("grid cfl must lie in (0, 1], got {}", grid.cfl),
        ));
    }
    let scenario = raw.scenario.unwrap_or_default();
    if !(0.0..=1.0).contains(&scenario.cancellation_rate) {
        return Err(ConfigError::invalid(
            path,
            format!(
                "cancellation_rate {} outside [0, 1]",
                scenario.cancellation_rate
            ),
        ));
    }
    for f in &scenario.failures {
        f.check().map_err(|e| ConfigError::invalid(path, e))?;
    }
    Ok(SimulationConfig {
        name: raw.name.unwrap_or_else(|| "simulation".into()),
        network: raw.network,
        rates: raw.rates,
        alighting: raw.alighting,
        initial_queues: raw.initial_queues,
        horizon,
        solver,
        runs,
        seed: raw.seed,
        out: raw.out,
        grid,
        scenario,
    })
}

// ---------------------------------------------------------------- datasets

/// Where the files named by a configuration live.
#[derive(Debug, Clone)]
pub enum DatasetRoot {
    Directory(PathBuf),
    Bundled(&'static str),
}

impl DatasetRoot {
    fn open(&self, file: &str) -> Result<Document, ConfigError> {
        match self {
            DatasetRoot::Directory(dir) => Document::read(&dir.join(file)),
            DatasetRoot::Bundled(name) => bundled_file(name, file)
                .map(|text| Document::embedded(name, file, text))
                .ok_or_else(|| ConfigError::Read {
                    path: format!("{name}/{file}"),
                    source: std::io::Error::new(std::io::ErrorKind::NotFound, "not bundled"),
                }),
        }
    }
}

macro_rules! bundle {
    ($name:literal, [$($file:literal),*]) => {
        ($name, &[$(($file, include_str!(concat!("../../data/", $name, "/", $file)))),*])
    };
}

type Bundle = (&'static str, &'static [(&'static str, &'static str)]);

const BUNDLED: &[Bundle] = &[
    bundle!(
        "toy-line",
        ["config.toml", "network.toml", "rates.csv", "alighting.csv"]
    ),
    bundle!("example-2-1", ["config.toml", "network.toml"]),
    bundle!("example-2-1-mutated", ["config.toml", "network.toml"]),
    bundle!(
        "mannheim-line1",
        ["config.toml", "network.toml", "rates.csv", "alighting.csv"]
    ),
    bundle!(
        "feuerwache-network",
        ["config.toml", "network.toml", "rates.csv", "alighting.csv"]
    ),
];

pub fn bundled_names() -> Vec<&'static str> {
    BUNDLED.iter().map(|(n, _)| *n).collect()
}

fn bundled_file(name: &str, file: &str) -> Option<&'static str> {
    BUNDLED
        .iter()
        .find(|(n, _)| *n == name)
        .and_then(|(_, files)| files.iter().find(|(f, _)| *f == file).map(|(_, t)| *t))
}

/// A configuration together with the experiment it describes.
#[derive(Debug, Clone)]
pub struct LoadedScenario {
    pub config: SimulationConfig,
    pub network: NetworkDoc,
    pub experiment: Experiment,
}

/// Load a bundled dataset by name, a dataset directory holding
/// `config.toml`, or a configuration file.
pub fn load_scenario(spec: &str) -> Result<LoadedScenario, ConfigError> {
    if let Some((name, _)) = BUNDLED.iter().find(|(n, _)| *n == spec) {
        let root = DatasetRoot::Bundled(name);
        let config = parse_config(&root.open("config.toml")?)?;
        return assemble(config, &root);
    }
    let path = Path::new(spec);
    let (config_path, dir) = if path.is_dir() {
        (path.join("config.toml"), path.to_path_buf())
    } else if path.exists() {
        (
            path.to_path_buf(),
            path.parent().map(Path::to_path_buf).unwrap_or_default(),
        )
    } else {
        return Err(ConfigError::UnknownDataset(spec.to_string()));
    };
    let config = parse_config(&Document::read(&config_path)?)?;
    assemble(config, &DatasetRoot::Directory(dir))
}

pub fn assemble(
    config: SimulationConfig,
    root: &DatasetRoot,
) -> Result<LoadedScenario, ConfigError> {
    let net_doc = parse_network(&root.open(&config.network)?)?;
    let net = &net_doc.network;
    let mut demand = DemandTables::default();
    if let Some(f) = &config.rates {
        demand.rates = parse_rates(&root.open(f)?, net)?;
    }
    if let Some(f) = &config.alighting {
        demand.alighting = parse_alighting(&root.open(f)?, net)?;
    }
    if let Some(f) = &config.initial_queues {
        demand.initial_queues = parse_initial_queues(&root.open(f)?, &net_doc.layout)?;
    }
    let base = Experiment {
        name: config.name.clone(),
        network: net_doc.network.clone(),
        services: net_doc.services.clone(),
        timetable: net_doc.timetable(config.horizon)?,
        layout: net_doc.layout.clone(),
        demand,
        measurement_stop: net_doc
            .measurement_stop
            .as_deref()
            .map(|m| net.stop_idx(m))
            .transpose()
            .map_err(|e| ConfigError::invalid(&config.network, e))?,
    };
    let mut experiment = base;
    let wrap = |e: crate::experiment::RunError| ConfigError::invalid(&config.network, e);
    if let Some(h) = config.scenario.headway {
        experiment = experiment.with_headway(h).map_err(wrap)?;
    }
    if let Some(s) = &config.scenario.shift {
        experiment = experiment.with_shift(&s.line, s.minutes).map_err(wrap)?;
    }
    Ok(LoadedScenario {
        config,
        network: net_doc,
        experiment,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(text: &str) -> Document {
        Document {
            origin: "test".into(),
            text: text.into(),
        }
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config(&doc("network = \"n.toml\"\n")).unwrap();
        assert_eq!(c.horizon, 1440.0);
        assert_eq!(c.runs, 1000);
        assert_eq!(c.grid.cfl, 1.0);
        assert_eq!(c.solver, SolverChoice::Exact);
    }

    #[test]
    fn seed_and_runs_are_kept() {
        let c = parse_config(&doc("network = \"n.toml\"\nruns = 1000\nseed = 42\n")).unwrap();
        assert_eq!((c.runs, c.seed), (1000, Some(42)));
    }

    #[test]
    fn config_errors() {
        let dup = parse_config(&doc("network = \"a\"\nnetwork = \"b\"\n")).unwrap_err();
        assert!(dup.to_string().contains("line 2"), "{dup}");
        assert!(parse_config(&doc("horizon = 5\n")).is_err());
        assert!(parse_config(&doc("network = \"a\"\nbogus = 1\n")).is_err());
        assert!(parse_config(&doc("network = \"a\"\nsolver = \"upwind\"\n")).is_err());
        assert!(parse_config(&doc("network = \"a\"\nruns = 0\n")).is_err());
    }

    fn small_net() -> TramNetwork {
        TramNetwork::new(
            vec![StopSpec::new("a"), StopSpec::new("b")],
            vec![TrackSpec::new("ab", "a", "b", 1.0, 0.5)],
        )
        .unwrap()
    }

    #[test]
    fn rate_table_units_and_lines() {
        let net = small_net();
        let t = parse_rates(
            &doc("edge,hour,rate,unit\nab,16,120,per_hour\nab,17,1.5,per_min\n"),
            &net,
        )
        .unwrap();
        assert_eq!(t.profile("ab").rates()[16], 2.0);
        assert_eq!(t.profile("ab").rates()[17], 1.5);
        let bad = parse_rates(&doc("edge,hour,rate,unit\nab,16,120,per_day\n"), &net).unwrap_err();
        assert!(bad.to_string().starts_with("test:2:"), "{bad}");
        let dup = parse_rates(
            &doc("edge,hour,rate,unit\nab,all,1,per_hour\nab,3,1,per_hour\n"),
            &net,
        )
        .unwrap_err();
        assert!(dup.to_string().starts_with("test:3:"), "{dup}");
    }

    #[test]
    fn stop_rates_split_over_out_edges() {
        let net = TramNetwork::new(
            vec![StopSpec::new("a"), StopSpec::new("b"), StopSpec::new("c")],
            vec![
                TrackSpec::new("ab", "a", "b", 1.0, 0.5),
                TrackSpec::new("ac", "a", "c", 1.0, 0.5),
            ],
        )
        .unwrap();
        let t = parse_rates(
            &doc("edge,hour,rate,unit
a,all,3,per_min
"),
            &net,
        )
        .unwrap();
        assert_eq!(t.profile("ab").rates()[5], 1.5);
        assert_eq!(t.profile("ac").rates()[5], 1.5);
        let clash = parse_rates(
            &doc("edge,hour,rate,unit
a,all,3,per_min
ab,4,1,per_min
"),
            &net,
        )
        .unwrap_err();
        assert!(clash.to_string().starts_with("test:3:"), "{clash}");
        assert!(parse_rates(
            &doc("edge,hour,rate,unit
b,all,3,per_min
"),
            &net
        )
        .is_err());
        assert!(parse_rates(
            &doc("edge,hour,rate,unit
zz,all,3,per_min
"),
            &net
        )
        .is_err());
    }

    #[test]
    fn alighting_rows() {
        let net = small_net();
        let t = parse_alighting(
            &doc("stop,in_edge,hour,fraction\nb,,all,0.3\nb,ab,16,0.5\n"),
            &net,
        )
        .unwrap();
        assert_eq!(t.fraction("b", "ab", 16.5 * 60.0), 0.5);
        assert!(parse_alighting(&doc("stop,in_edge,hour,fraction\na,ab,1,0.5\n"), &net).is_err());
        assert!(parse_alighting(&doc("stop,in_edge,hour,fraction\nb,,1,1.5\n"), &net).is_err());
    }

    #[test]
    fn every_bundled_dataset_loads() {
        for name in bundled_names() {
            let s = load_scenario(name).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert!(!s.experiment.timetable.trips.is_empty(), "{name}");
        }
    }
}
