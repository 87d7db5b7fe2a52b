//! Directed tram network, trip-based timetables and schedule admissibility.
//!
//! A [`Timetable`] is a list of [`Trip`]s. The per-edge capacity function
//! `tau^e(t)` and the per-vertex routing map `delta_t^v` are derived from the
//! trips rather than stored, so the two views can never disagree.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Event times closer than this (in minutes) are treated as simultaneous.
pub const TIME_TOLERANCE: f64 = 1e-9;

/// Minutes in one service day; the default simulation horizon.
pub const DAY_MINUTES: f64 = 1440.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("duplicate stop id `{0}`")]
    DuplicateStop(String),
    #[error("duplicate edge id `{0}`")]
    DuplicateEdge(String),
    #[error("edge `{edge}` references unknown stop `{stop}`")]
    UnknownStop { edge: String, stop: String },
    #[error("unknown stop `{0}`")]
    NoSuchStop(String),
    #[error("unknown edge `{0}`")]
    UnknownEdge(String),
    #[error("edge `{edge}` has non-positive or non-finite length {length}")]
    InvalidLength { edge: String, length: f64 },
    #[error("edge `{edge}` has non-positive or non-finite velocity {velocity}")]
    InvalidVelocity { edge: String, velocity: f64 },
    #[error("shared queue `{pool}`: {reason}")]
    InvalidSharedQueue { pool: String, reason: String },
    #[error("invalid horizon {0}")]
    InvalidHorizon(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StopIdx(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EdgeIdx(pub usize);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stop {
    pub id: String,
    pub name: String,
    pub is_start: bool,
    pub is_terminal: bool,
}

/// One directed track between two consecutive stops.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Track {
    pub id: String,
    pub tail: StopIdx,
    pub head: StopIdx,
    /// Length in km.
    pub length: f64,
    /// Tram velocity in km/min.
    pub velocity: f64,
}

impl Track {
    /// Travel time `l_e / w_e` in minutes.
    pub fn travel_time(&self) -> f64 {
        self.length / self.velocity
    }
}

/// Construction input for a stop.
#[derive(Debug, Clone, PartialEq)]
pub struct StopSpec {
    pub id: String,
    pub name: Option<String>,
    pub is_start: bool,
    pub is_terminal: bool,
}

impl StopSpec {
    pub fn new(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            name: None,
            is_start: false,
            is_terminal: false,
        }
    }

    pub fn start(mut self) -> Self {
        self.is_start = true;
        self
    }

    pub fn terminal(mut self) -> Self {
        self.is_terminal = true;
        self
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }
}

/// Construction input for a track.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackSpec {
    pub id: String,
    pub from: String,
    pub to: String,
    pub length: f64,
    pub velocity: f64,
}

impl TrackSpec {
    pub fn new(
        id: impl Into<String>,
        from: impl Into<String>,
        to: impl Into<String>,
        length: f64,
        velocity: f64,
    ) -> Self {
        Self {
            id: id.into(),
            from: from.into(),
            to: to.into(),
            length,
            velocity,
        }
    }
}

/// Directed metric graph of stops and tracks.
///
/// Sources are always flagged as start stops and sinks as terminal stops;
/// inner stops keep whatever flags were declared.
#[derive(Debug, Clone)]
pub struct TramNetwork {
    stops: Vec<Stop>,
    tracks: Vec<Track>,
    incoming: Vec<Vec<EdgeIdx>>,
    outgoing: Vec<Vec<EdgeIdx>>,
    stop_index: HashMap<String, StopIdx>,
    edge_index: HashMap<String, EdgeIdx>,
}

impl TramNetwork {
    pub fn new(stops: Vec<StopSpec>, tracks: Vec<TrackSpec>) -> Result<Self, NetworkError> {
        let mut stop_index = HashMap::with_capacity(stops.len());
        let mut built_stops = Vec::with_capacity(stops.len());
        for (i, s) in stops.into_iter().enumerate() {
            if stop_index.insert(s.id.clone(), StopIdx(i)).is_some() {
                return Err(NetworkError::DuplicateStop(s.id));
            }
            built_stops.push(Stop {
                name: s.name.unwrap_or_else(|| s.id.clone()),
                id: s.id,
                is_start: s.is_start,
                is_terminal: s.is_terminal,
            });
        }

        let mut edge_index = HashMap::with_capacity(tracks.len());
        let mut built_tracks = Vec::with_capacity(tracks.len());
        let mut incoming = vec![Vec::new(); built_stops.len()];
        let mut outgoing = vec![Vec::new(); built_stops.len()];
        for (i, t) in tracks.into_iter().enumerate() {
            let lookup = |stop: &str| {
                stop_index
                    .get(stop)
                    .copied()
                    .ok_or_else(|| NetworkError::UnknownStop {
                        edge: t.id.clone(),
                        stop: stop.to_string(),
                    })
            };
            let tail = lookup(&t.from)?;
            let head = lookup(&t.to)?;
            if !(t.length.is_finite() && t.length > 0.0) {
                return Err(NetworkError::InvalidLength {
                    edge: t.id,
                    length: t.length,
                });
            }
            if !(t.velocity.is_finite() && t.velocity > 0.0) {
                return Err(NetworkError::InvalidVelocity {
                    edge: t.id,
                    velocity: t.velocity,
                });
            }
            if edge_index.insert(t.id.clone(), EdgeIdx(i)).is_some() {
                return Err(NetworkError::DuplicateEdge(t.id));
            }
            outgoing[tail.0].push(EdgeIdx(i));
            incoming[head.0].push(EdgeIdx(i));
            built_tracks.push(Track {
                id: t.id,
                tail,
                head,
                length: t.length,
                velocity: t.velocity,
            });
        }

        for (i, stop) in built_stops.iter_mut().enumerate() {
            if incoming[i].is_empty() {
                stop.is_start = true;
            }
            if outgoing[i].is_empty() {
                stop.is_terminal = true;
            }
        }

        Ok(Self {
            stops: built_stops,
            tracks: built_tracks,
            incoming,
            outgoing,
            stop_index,
            edge_index,
        })
    }

    pub fn stops(&self) -> &[Stop] {
        &self.stops
    }

    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    pub fn stop(&self, idx: StopIdx) -> &Stop {
        &self.stops[idx.0]
    }

    pub fn track(&self, idx: EdgeIdx) -> &Track {
        &self.tracks[idx.0]
    }

    pub fn stop_idx(&self, id: &str) -> Result<StopIdx, NetworkError> {
        self.stop_index
            .get(id)
            .copied()
            .ok_or_else(|| NetworkError::NoSuchStop(id.to_string()))
    }

    pub fn edge_idx(&self, id: &str) -> Result<EdgeIdx, NetworkError> {
        self.edge_index
            .get(id)
            .copied()
            .ok_or_else(|| NetworkError::UnknownEdge(id.to_string()))
    }

    /// Incoming edges `v⁻`.
    pub fn incoming(&self, v: StopIdx) -> &[EdgeIdx] {
        &self.incoming[v.0]
    }

    /// Outgoing edges `v⁺`.
    pub fn outgoing(&self, v: StopIdx) -> &[EdgeIdx] {
        &self.outgoing[v.0]
    }

    pub fn check_edge(&self, e: EdgeIdx) -> Result<(), NetworkError> {
        if e.0 < self.tracks.len() {
            Ok(())
        } else {
            Err(NetworkError::UnknownEdge(format!("#{}", e.0)))
        }
    }

    fn check_stop(&self, v: StopIdx) -> Result<(), NetworkError> {
        if v.0 < self.stops.len() {
            Ok(())
        } else {
            Err(NetworkError::NoSuchStop(format!("#{}", v.0)))
        }
    }
}

/// One scheduled tram journey: the generator of `tau^e` along its edges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trip {
    pub id: String,
    pub line: String,
    pub edges: Vec<EdgeIdx>,
    /// Departure at the tail of the first edge, minutes from midnight.
    pub departure: f64,
    /// Total capacity (seats plus standing room).
    pub capacity: f64,
    pub seat_capacity: f64,
}

impl Trip {
    /// Scheduled departure time at the tail of every edge of the trip.
    pub fn edge_departures(&self, net: &TramNetwork) -> Vec<f64> {
        let mut t = self.departure;
        self.edges
            .iter()
            .map(|&e| {
                let dep = t;
                t += net.track(e).travel_time();
                dep
            })
            .collect()
    }

    /// Scheduled arrival at the head of the last edge.
    pub fn final_arrival(&self, net: &TramNetwork) -> f64 {
        self.departure
            + self
                .edges
                .iter()
                .map(|&e| net.track(e).travel_time())
                .sum::<f64>()
    }

    pub fn origin(&self, net: &TramNetwork) -> Option<StopIdx> {
        self.edges.first().map(|&e| net.track(e).tail)
    }

    pub fn destination(&self, net: &TramNetwork) -> Option<StopIdx> {
        self.edges.last().map(|&e| net.track(e).head)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timetable {
    pub trips: Vec<Trip>,
    /// Horizon `T` in minutes.
    pub horizon: f64,
}

impl Timetable {
    pub fn new(trips: Vec<Trip>, horizon: f64) -> Result<Self, NetworkError> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(NetworkError::InvalidHorizon(horizon));
        }
        Ok(Self { trips, horizon })
    }

    pub fn empty(horizon: f64) -> Self {
        Self {
            trips: Vec::new(),
            horizon,
        }
    }

    pub fn trip(&self, id: &str) -> Option<&Trip> {
        self.trips.iter().find(|t| t.id == id)
    }
}

/// One atom of the capacity function `tau^e`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityEvent {
    pub time: f64,
    pub capacity: f64,
    pub seat_capacity: f64,
    pub trip: String,
}

/// Materialise `tau^e` for one edge as a time-sorted list of atoms.
///
/// Ties are kept (ordered by trip id); reporting them is the validator's job.
/// Departures after the horizon are left out.
pub fn derive_capacity_function(
    net: &TramNetwork,
    timetable: &Timetable,
    edge: EdgeIdx,
) -> Result<Vec<CapacityEvent>, NetworkError> {
    net.check_edge(edge)?;
    let mut out = Vec::new();
    for trip in &timetable.trips {
        let deps = trip.edge_departures(net);
        for (&e, &t) in trip.edges.iter().zip(&deps) {
            if e == edge && t <= timetable.horizon + TIME_TOLERANCE {
                out.push(CapacityEvent {
                    time: t,
                    capacity: trip.capacity,
                    seat_capacity: trip.seat_capacity,
                    trip: trip.id.clone(),
                });
            }
        }
    }
    out.sort_by(|a, b| a.time.total_cmp(&b.time).then_with(|| a.trip.cmp(&b.trip)));
    Ok(out)
}

/// Value of `delta_t^v(e)` for an arriving tram.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Routing {
    Continue(EdgeIdx),
    Terminate,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RouteError {
    #[error("no tram arrives at stop `{vertex}` via `{edge}` at t={time}")]
    NoArrival {
        vertex: String,
        edge: String,
        time: f64,
    },
    #[error("admissibility violation at stop `{vertex}`, t={time}: trips {trips:?} {reason}")]
    AdmissibilityViolation {
        vertex: String,
        time: f64,
        trips: Vec<String>,
        reason: String,
    },
    #[error("edge `{edge}` is not incident to stop `{vertex}`")]
    NotIncident { vertex: String, edge: String },
    #[error(transparent)]
    Network(#[from] NetworkError),
}

/// A tram passing a vertex: arrival via `in_edge` (none for a trip origin),
/// continuation via `out_edge` (none when the trip ends here).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Passage {
    pub time: f64,
    pub in_edge: Option<EdgeIdx>,
    pub out_edge: Option<EdgeIdx>,
    pub trip: usize,
}

/// Per-vertex passage lists; answers `delta_t^v` and its inverse.
#[derive(Debug, Clone)]
pub struct ScheduleIndex {
    passages: Vec<Vec<Passage>>,
}

impl ScheduleIndex {
    pub fn build(net: &TramNetwork, timetable: &Timetable) -> Self {
        let mut passages = vec![Vec::new(); net.stops().len()];
        for (ti, trip) in timetable.trips.iter().enumerate() {
            let mut t = trip.departure;
            let mut prev: Option<EdgeIdx> = None;
            for &e in &trip.edges {
                let tail = net.track(e).tail;
                passages[tail.0].push(Passage {
                    time: t,
                    in_edge: prev,
                    out_edge: Some(e),
                    trip: ti,
                });
                t += net.track(e).travel_time();
                prev = Some(e);
            }
            if let Some(last) = prev {
                passages[net.track(last).head.0].push(Passage {
                    time: t,
                    in_edge: Some(last),
                    out_edge: None,
                    trip: ti,
                });
            }
        }
        for list in &mut passages {
            list.sort_by(|a, b| a.time.total_cmp(&b.time).then(a.trip.cmp(&b.trip)));
        }
        Self { passages }
    }

    pub fn passages(&self, v: StopIdx) -> &[Passage] {
        &self.passages[v.0]
    }

    fn at_time(&self, v: StopIdx, t: f64) -> &[Passage] {
        let list = &self.passages[v.0];
        let lo = list.partition_point(|p| p.time < t - TIME_TOLERANCE);
        let hi = list.partition_point(|p| p.time <= t + TIME_TOLERANCE);
        &list[lo..hi]
    }

    /// `delta_t^v(in_edge)`.
    pub fn route_through_vertex(
        &self,
        net: &TramNetwork,
        timetable: &Timetable,
        vertex: StopIdx,
        in_edge: EdgeIdx,
        t: f64,
    ) -> Result<Routing, RouteError> {
        net.check_stop(vertex)?;
        net.check_edge(in_edge)?;
        if net.track(in_edge).head != vertex {
            return Err(RouteError::NotIncident {
                vertex: net.stop(vertex).id.clone(),
                edge: net.track(in_edge).id.clone(),
            });
        }
        let here = self.at_time(vertex, t);
        let arriving: Vec<&Passage> = here.iter().filter(|p| p.in_edge == Some(in_edge)).collect();
        let passage = match arriving.as_slice() {
            [] => {
                return Err(RouteError::NoArrival {
                    vertex: net.stop(vertex).id.clone(),
                    edge: net.track(in_edge).id.clone(),
                    time: t,
                })
            }
            [single] => *single,
            many => {
                return Err(RouteError::AdmissibilityViolation {
                    vertex: net.stop(vertex).id.clone(),
                    time: t,
                    trips: many
                        .iter()
                        .map(|p| timetable.trips[p.trip].id.clone())
                        .collect(),
                    reason: "arrive simultaneously on the same edge".into(),
                })
            }
        };
        match passage.out_edge {
            None => Ok(Routing::Terminate),
            Some(out) => {
                let claimants: Vec<&Passage> =
                    here.iter().filter(|p| p.out_edge == Some(out)).collect();
                if claimants.len() > 1 {
                    return Err(RouteError::AdmissibilityViolation {
                        vertex: net.stop(vertex).id.clone(),
                        time: t,
                        trips: claimants
                            .iter()
                            .map(|p| timetable.trips[p.trip].id.clone())
                            .collect(),
                        reason: format!("continue onto `{}` simultaneously", net.track(out).id),
                    });
                }
                Ok(Routing::Continue(out))
            }
        }
    }

    /// `(delta_t^v)^{-1}(out_edge)`: the edge the departing tram came from, or
    /// `None` when no tram departs or the departing trip originates here.
    pub fn inverse_route(
        &self,
        net: &TramNetwork,
        vertex: StopIdx,
        out_edge: EdgeIdx,
        t: f64,
    ) -> Result<Option<EdgeIdx>, RouteError> {
        net.check_stop(vertex)?;
        net.check_edge(out_edge)?;
        if net.track(out_edge).tail != vertex {
            return Err(RouteError::NotIncident {
                vertex: net.stop(vertex).id.clone(),
                edge: net.track(out_edge).id.clone(),
            });
        }
        Ok(self
            .at_time(vertex, t)
            .iter()
            .find(|p| p.out_edge == Some(out_edge))
            .and_then(|p| p.in_edge))
    }
}

/// Which admissibility rule a violation breaks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    /// Capacity must be finite and strictly positive.
    CapacityPositiveFinite,
    /// Seats must lie in `[0, capacity]`.
    SeatCapacity,
    /// Edges of a trip must form a connected directed path.
    ConnectedPath,
    /// At most one tram leaves a vertex along a given edge at any instant.
    InjectiveExceptEmpty,
    /// A tram keeps its capacity across vertices (no splitting, no merging).
    CapacityConservation,
    /// Trams may only end their journey at terminal stops.
    Termination,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Rule::CapacityPositiveFinite => "capacity-positive-finite",
            Rule::SeatCapacity => "seat-capacity",
            Rule::ConnectedPath => "connected-path",
            Rule::InjectiveExceptEmpty => "injective-except-empty",
            Rule::CapacityConservation => "capacity-conservation",
            Rule::Termination => "termination",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub rule: Rule,
    pub vertex: Option<String>,
    pub time: Option<f64>,
    pub trips: Vec<String>,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}]", self.rule)?;
        if let Some(v) = &self.vertex {
            write!(f, " stop={v}")?;
        }
        if let Some(t) = self.time {
            write!(f, " t={t}")?;
        }
        write!(f, " trips={} {}", self.trips.join(","), self.detail)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub violations: Vec<Violation>,
}

impl AdmissibilityReport {
    pub fn is_admissible(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn count(&self, rule: Rule) -> usize {
        self.violations.iter().filter(|v| v.rule == rule).count()
    }
}

/// Check a timetable against the admissibility rules. Never fails: every
/// defect becomes a report entry.
pub fn validate_schedule(net: &TramNetwork, timetable: &Timetable) -> AdmissibilityReport {
    let mut violations = Vec::new();
    let mut structurally_ok = vec![true; timetable.trips.len()];

    for (ti, trip) in timetable.trips.iter().enumerate() {
        if !(trip.capacity.is_finite() && trip.capacity > 0.0) {
            violations.push(Violation {
                rule: Rule::CapacityPositiveFinite,
                vertex: None,
                time: Some(trip.departure),
                trips: vec![trip.id.clone()],
                detail: format!("capacity {}", trip.capacity),
            });
        }
        if !(trip.seat_capacity.is_finite()
            && trip.seat_capacity >= 0.0
            && trip.seat_capacity <= trip.capacity)
        {
            violations.push(Violation {
                rule: Rule::SeatCapacity,
                vertex: None,
                time: Some(trip.departure),
                trips: vec![trip.id.clone()],
                detail: format!(
                    "seats {} with capacity {}",
                    trip.seat_capacity, trip.capacity
                ),
            });
        }
        if trip.edges.is_empty() || trip.edges.iter().any(|e| net.check_edge(*e).is_err()) {
            violations.push(Violation {
                rule: Rule::ConnectedPath,
                vertex: None,
                time: Some(trip.departure),
                trips: vec![trip.id.clone()],
                detail: "empty route or unknown edge".into(),
            });
            structurally_ok[ti] = false;
            continue;
        }
        for pair in trip.edges.windows(2) {
            let (a, b) = (net.track(pair[0]), net.track(pair[1]));
            if a.head != b.tail {
                violations.push(Violation {
                    rule: Rule::ConnectedPath,
                    vertex: Some(net.stop(a.head).id.clone()),
                    time: None,
                    trips: vec![trip.id.clone()],
                    detail: format!("`{}` does not continue onto `{}`", a.id, b.id),
                });
                structurally_ok[ti] = false;
            }
        }
        if structurally_ok[ti] {
            let end = trip.destination(net).expect("non-empty route");
            if !net.stop(end).is_terminal {
                violations.push(Violation {
                    rule: Rule::Termination,
                    vertex: Some(net.stop(end).id.clone()),
                    time: Some(trip.final_arrival(net)),
                    trips: vec![trip.id.clone()],
                    detail: "trip ends at a non-terminal stop".into(),
                });
            }
        }
    }

    // Injectivity: per outgoing edge, departures must be pairwise distinct in time.
    let mut per_edge: Vec<Vec<(f64, usize)>> = vec![Vec::new(); net.tracks().len()];
    for (ti, trip) in timetable.trips.iter().enumerate() {
        if !structurally_ok[ti] {
            continue;
        }
        for (&e, t) in trip.edges.iter().zip(trip.edge_departures(net)) {
            per_edge[e.0].push((t, ti));
        }
    }
    let mut tied: std::collections::HashSet<(usize, usize)> = Default::default();
    for (ei, deps) in per_edge.iter_mut().enumerate() {
        deps.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut i = 0;
        while i < deps.len() {
            let mut j = i + 1;
            while j < deps.len() && deps[j].0 - deps[i].0 <= TIME_TOLERANCE {
                j += 1;
            }
            if j - i > 1 {
                let track = net.track(EdgeIdx(ei));
                for &(_, ti) in &deps[i..j] {
                    tied.insert((ti, ei));
                }
                violations.push(Violation {
                    rule: Rule::InjectiveExceptEmpty,
                    vertex: Some(net.stop(track.tail).id.clone()),
                    time: Some(deps[i].0),
                    trips: deps[i..j]
                        .iter()
                        .map(|&(_, ti)| timetable.trips[ti].id.clone())
                        .collect(),
                    detail: format!("several trams leave along `{}` at once", track.id),
                });
            }
            i = j;
        }
    }

    // Capacity conservation across each vertex a trip passes, read off the
    // derived tau functions. Pairs already reported as ties are skipped.
    let tau_at = |e: EdgeIdx, t: f64| -> f64 {
        let deps = &per_edge[e.0];
        let lo = deps.partition_point(|d| d.0 < t - TIME_TOLERANCE);
        deps[lo..]
            .iter()
            .take_while(|d| d.0 <= t + TIME_TOLERANCE)
            .map(|d| timetable.trips[d.1].capacity)
            .sum()
    };
    for (ti, trip) in timetable.trips.iter().enumerate() {
        if !structurally_ok[ti] {
            continue;
        }
        let deps = trip.edge_departures(net);
        for k in 1..trip.edges.len() {
            let (e_in, e_out) = (trip.edges[k - 1], trip.edges[k]);
            if tied.contains(&(ti, e_in.0)) || tied.contains(&(ti, e_out.0)) {
                continue;
            }
            let before = tau_at(e_in, deps[k - 1]);
            let after = tau_at(e_out, deps[k]);
            if (before - after).abs() > 1e-9 * before.abs().max(1.0) {
                violations.push(Violation {
                    rule: Rule::CapacityConservation,
                    vertex: Some(net.stop(net.track(e_out).tail).id.clone()),
                    time: Some(deps[k]),
                    trips: vec![trip.id.clone()],
                    detail: format!("capacity {before} in, {after} out"),
                });
            }
        }
    }

    AdmissibilityReport { violations }
}

/// Assignment of outgoing edges to passenger queues. By default every edge
/// has its own queue; a shared pool lets several edges leaving the same stop
/// drain one platform queue.
#[derive(Debug, Clone, PartialEq)]
pub struct QueueLayout {
    queue_of_edge: Vec<usize>,
    queues: Vec<QueueInfo>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueInfo {
    pub id: String,
    pub stop: StopIdx,
    pub edges: Vec<EdgeIdx>,
}

impl QueueLayout {
    pub fn per_edge(net: &TramNetwork) -> Self {
        Self::with_shared(net, &[]).expect("no pools to validate")
    }

    /// `pools` holds `(pool id, member edge ids)`.
    pub fn with_shared(
        net: &TramNetwork,
        pools: &[(String, Vec<String>)],
    ) -> Result<Self, NetworkError> {
        let mut pool_of_edge: Vec<Option<usize>> = vec![None; net.tracks().len()];
        for (pi, (pool, members)) in pools.iter().enumerate() {
            let invalid = |reason: String| NetworkError::InvalidSharedQueue {
                pool: pool.clone(),
                reason,
            };
            if members.is_empty() {
                return Err(invalid("no member edges".into()));
            }
            let mut stop = None;
            for m in members {
                let e = net.edge_idx(m)?;
                let tail = net.track(e).tail;
                if *stop.get_or_insert(tail) != tail {
                    return Err(invalid("member edges leave different stops".into()));
                }
                if pool_of_edge[e.0].replace(pi).is_some() {
                    return Err(invalid(format!("edge `{m}` belongs to several pools")));
                }
            }
        }

        let mut queues: Vec<QueueInfo> = Vec::new();
        let mut pool_queue: HashMap<usize, usize> = HashMap::new();
        let mut queue_of_edge = vec![0; net.tracks().len()];
        for (ei, track) in net.tracks().iter().enumerate() {
            let qi = match pool_of_edge[ei] {
                Some(pi) => *pool_queue.entry(pi).or_insert_with(|| {
                    queues.push(QueueInfo {
                        id: pools[pi].0.clone(),
                        stop: track.tail,
                        edges: Vec::new(),
                    });
                    queues.len() - 1
                }),
                None => {
                    queues.push(QueueInfo {
                        id: track.id.clone(),
                        stop: track.tail,
                        edges: Vec::new(),
                    });
                    queues.len() - 1
                }
            };
            queues[qi].edges.push(EdgeIdx(ei));
            queue_of_edge[ei] = qi;
        }
        Ok(Self {
            queue_of_edge,
            queues,
        })
    }

    pub fn queue_of(&self, e: EdgeIdx) -> usize {
        self.queue_of_edge[e.0]
    }

    pub fn queues(&self) -> &[QueueInfo] {
        &self.queues
    }

    pub fn len(&self) -> usize {
        self.queues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queues.is_empty()
    }
}
