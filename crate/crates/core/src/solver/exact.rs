//! Exact solver. Each trip is one atomic passenger mass moving along its
//! edges at constant speed; all mass changes happen at stop events, which
//! are processed from a single time-ordered queue.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{alight, board, DemandTables, DynamicsError, StopEventRecord};
use crate::network::{
    EdgeIdx, QueueLayout, RouteError, Routing, ScheduleIndex, StopIdx, Timetable, TramNetwork,
};
use crate::scenarios::{DwellDelayModel, FailureSchedule, ScenarioError};
use crate::stochastic::ArrivalStream;

/// Minimal gap enforced between two departures onto the same edge.
pub const NO_OVERTAKE_GAP: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error(transparent)]
    Route(#[from] RouteError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("trip `{trip}` expected to continue onto `{expected}` but routing gave {got}")]
    RoutingMismatch {
        trip: String,
        expected: String,
        got: String,
    },
    #[error("{expected} arrival streams expected, got {got}")]
    StreamCount { expected: usize, got: usize },
    #[error("initial queue vector has {got} entries, layout has {expected}")]
    InitialQueueCount { expected: usize, got: usize },
}

#[derive(Debug, Clone, Default)]
pub struct ExactOptions {
    pub dwell: Option<DwellDelayModel>,
    pub failures: FailureSchedule,
    /// Stop at which capacity utilisation is sampled on departure.
    pub measurement_stop: Option<StopIdx>,
    /// Emit position samples every this many minutes.
    pub trajectory_step: Option<f64>,
}

/// Passenger mass handed from an incoming to an outgoing edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferRecord {
    pub time: f64,
    pub vertex: StopIdx,
    pub in_edge: EdgeIdx,
    pub out_edge: EdgeIdx,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueClosing {
    pub queue: usize,
    pub initial: f64,
    pub arrivals: f64,
    pub boarded: f64,
    pub final_length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripClosing {
    pub trip: String,
    pub final_onboard: f64,
    pub truncated: bool,
    pub total_delay: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EventLog {
    pub stop_events: Vec<StopEventRecord>,
    pub transfers: Vec<TransferRecord>,
    pub queues: Vec<QueueClosing>,
    pub trips: Vec<TripClosing>,
    pub warnings: Vec<String>,
}

/// Step-function data of one queue: enough to integrate it exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueTrajectory {
    pub queue: usize,
    pub stop: StopIdx,
    pub initial: f64,
    pub arrivals: Vec<f64>,
    /// `(time, passengers)` boarding events.
    pub boardings: Vec<(f64, f64)>,
}

/// One traversal of an edge by a tram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TravelSegment {
    pub trip: usize,
    pub edge: EdgeIdx,
    pub entry: f64,
    pub exit: f64,
    pub onboard: f64,
    pub seats: f64,
    pub delay: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilizationSample {
    pub trip: String,
    pub line: String,
    /// Scheduled departure at the measurement stop.
    pub scheduled: f64,
    pub time: f64,
    pub onboard: f64,
    pub seats: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub trip: String,
    pub edge: String,
    pub x: f64,
    pub onboard: f64,
    pub delay: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverDiagnostics {
    pub clamped_dwell: usize,
    pub overtaking_pushes: usize,
    pub total_dwell: f64,
    pub total_failure_delay: f64,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactRun {
    pub log: EventLog,
    pub queues: Vec<QueueTrajectory>,
    pub segments: Vec<TravelSegment>,
    pub utilization: Vec<UtilizationSample>,
    pub trajectory: Vec<TrajectorySample>,
    pub diagnostics: SolverDiagnostics,
    pub horizon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct StopCall {
    time: f64,
    vertex: usize,
    trip: usize,
    pos: usize,
}

impl Eq for StopCall {}

impl Ord for StopCall {
    // Reversed for a min-heap on (time, vertex, trip).
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then(other.vertex.cmp(&self.vertex))
            .then(other.trip.cmp(&self.trip))
    }
}

impl PartialOrd for StopCall {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct TripState {
    onboard: f64,
    delay: f64,
    /// Scheduled time at the current stop, accumulated like the index does.
    scheduled: f64,
}

struct QueueRun<'a> {
    level: f64,
    cursor: usize,
    stream: &'a ArrivalStream,
    boarded: f64,
}

impl QueueRun<'_> {
    /// Take in every arrival at or before `t`; returns how many.
    fn catch_up(&mut self, t: f64) -> f64 {
        let times = self.stream.times();
        let start = self.cursor;
        while self.cursor < times.len() && times[self.cursor] <= t {
            self.cursor += 1;
        }
        let n = (self.cursor - start) as f64;
        self.level += n;
        n
    }
}

/// Simulate one day. `streams` holds one arrival realisation per queue of
/// `layout`, `initial_queues` the queue lengths at time 0.
#[allow(clippy::too_many_arguments)]
pub fn run_exact(
    net: &TramNetwork,
    timetable: &Timetable,
    layout: &QueueLayout,
    demand: &DemandTables,
    streams: &[ArrivalStream],
    initial_queues: &[f64],
    options: &ExactOptions,
) -> Result<ExactRun, SolverError> {
    if streams.len() != layout.len() {
        return Err(SolverError::StreamCount {
            expected: layout.len(),
            got: streams.len(),
        });
    }
    if initial_queues.len() != layout.len() {
        return Err(SolverError::InitialQueueCount {
            expected: layout.len(),
            got: initial_queues.len(),
        });
    }
    if let Some(model) = &options.dwell {
        model.check()?;
    }
    let horizon = timetable.horizon;
    let index = ScheduleIndex::build(net, timetable);

    let mut queues: Vec<QueueRun> = streams
        .iter()
        .zip(initial_queues)
        .map(|(s, &q0)| QueueRun {
            level: q0,
            cursor: 0,
            stream: s,
            boarded: 0.0,
        })
        .collect();
    let mut boardings: Vec<Vec<(f64, f64)>> = vec![Vec::new(); layout.len()];
    let mut trips: Vec<TripState> = timetable
        .trips
        .iter()
        .map(|t| TripState {
            onboard: 0.0,
            delay: 0.0,
            scheduled: t.departure,
        })
        .collect();
    let mut last_departure: Vec<f64> = vec![f64::NEG_INFINITY; net.tracks().len()];
    let mut log = EventLog::default();
    let mut segments = Vec::new();
    let mut utilization = Vec::new();
    let mut diagnostics = SolverDiagnostics::default();
    let mut closings: Vec<Option<TripClosing>> = vec![None; timetable.trips.len()];

    let mut heap = BinaryHeap::new();
    for (ti, trip) in timetable.trips.iter().enumerate() {
        if let Some(origin) = trip.origin(net) {
            heap.push(StopCall {
                time: trip.departure,
                vertex: origin.0,
                trip: ti,
                pos: 0,
            });
        } else {
            closings[ti] = Some(TripClosing {
                trip: trip.id.clone(),
                final_onboard: 0.0,
                truncated: false,
                total_delay: 0.0,
            });
        }
    }

    while let Some(call) = heap.pop() {
        let trip = &timetable.trips[call.trip];
        let vertex = StopIdx(call.vertex);
        let t = call.time;
        let n_edges = trip.edges.len();

        if t > horizon {
            log.warnings.push(format!(
                "trip `{}` truncated at t={t:.6} beyond horizon {horizon}",
                trip.id
            ));
            closings[call.trip] = Some(TripClosing {
                trip: trip.id.clone(),
                final_onboard: trips[call.trip].onboard,
                truncated: true,
                total_delay: trips[call.trip].delay,
            });
            continue;
        }

        let in_edge = (call.pos > 0).then(|| trip.edges[call.pos - 1]);
        let out_edge = (call.pos < n_edges).then(|| trip.edges[call.pos]);
        let state = &mut trips[call.trip];
        let onboard_before = state.onboard;

        // Alighting, attached to the incoming edge.
        let (alighted, fraction) = match in_edge {
            None => (0.0, 0.0),
            Some(e) => {
                let fraction = if out_edge.is_none() {
                    1.0
                } else {
                    demand
                        .alighting
                        .fraction(&net.stop(vertex).id, &net.track(e).id, t)
                };
                let (a, rest) = alight(onboard_before, fraction, out_edge.is_none())?;
                state.onboard = rest;
                (a, fraction)
            }
        };

        // Coupling: the routing map must send the arriving tram where the
        // trip continues.
        if let Some(e_in) = in_edge {
            let routed =
                index.route_through_vertex(net, timetable, vertex, e_in, state.scheduled)?;
            let expected = match out_edge {
                Some(e) => Routing::Continue(e),
                None => Routing::Terminate,
            };
            if routed != expected {
                return Err(SolverError::RoutingMismatch {
                    trip: trip.id.clone(),
                    expected: format!("{expected:?}"),
                    got: format!("{routed:?}"),
                });
            }
            if let Some(e_out) = out_edge {
                log.transfers.push(TransferRecord {
                    time: t,
                    vertex,
                    in_edge: e_in,
                    out_edge: e_out,
                    mass: state.onboard,
                });
            }
        }

        let mut record = StopEventRecord {
            time: t,
            departure: t,
            vertex,
            trip: trip.id.clone(),
            in_edge,
            out_edge,
            queue: None,
            queue_before: 0.0,
            queue_after: 0.0,
            arrivals_since_last: 0.0,
            boarded: 0.0,
            alighted,
            onboard_before,
            onboard_after: state.onboard,
            alight_fraction: fraction,
            dwell: 0.0,
            failure_delay: 0.0,
            accrued_delay: state.delay,
        };

        let Some(e_out) = out_edge else {
            log.stop_events.push(record);
            closings[call.trip] = Some(TripClosing {
                trip: trip.id.clone(),
                final_onboard: state.onboard,
                truncated: false,
                total_delay: state.delay,
            });
            continue;
        };

        // Boarding from the queue of the departing edge.
        let qi = layout.queue_of(e_out);
        let queue = &mut queues[qi];
        let fresh = queue.catch_up(t);
        let q_before = queue.level;
        let boarded = board(q_before, trip.capacity, state.onboard)?;
        queue.level -= boarded;
        queue.boarded += boarded;
        if boarded > 0.0 {
            boardings[qi].push((t, boarded));
        }
        state.onboard += boarded;

        let dwell = match (&options.dwell, call.pos) {
            (Some(model), p) if p > 0 => {
                let d = model.evaluate(boarded, alighted)?;
                if d.clamped {
                    diagnostics.clamped_dwell += 1;
                }
                d.minutes
            }
            _ => 0.0,
        };
        let failure = options.failures.delay(call.trip, call.pos);
        if failure > 0.0 {
            diagnostics.failures += 1;
        }
        let mut departure = t + dwell + failure;
        if departure <= last_departure[e_out.0] {
            departure = last_departure[e_out.0] + NO_OVERTAKE_GAP;
            diagnostics.overtaking_pushes += 1;
        }
        last_departure[e_out.0] = departure;
        diagnostics.total_dwell += dwell;
        diagnostics.total_failure_delay += failure;
        state.delay += departure - t;

        record.queue = Some(qi);
        record.queue_before = q_before;
        record.queue_after = queue.level;
        record.arrivals_since_last = fresh;
        record.boarded = boarded;
        record.onboard_after = state.onboard;
        record.dwell = dwell;
        record.failure_delay = failure;
        record.departure = departure;
        record.accrued_delay = state.delay;
        log.stop_events.push(record);

        if options.measurement_stop == Some(vertex) {
            utilization.push(UtilizationSample {
                trip: trip.id.clone(),
                line: trip.line.clone(),
                scheduled: state.scheduled,
                time: departure,
                onboard: state.onboard,
                seats: trip.seat_capacity,
            });
        }

        let track = net.track(e_out);
        let arrival = departure + track.travel_time();
        segments.push(TravelSegment {
            trip: call.trip,
            edge: e_out,
            entry: departure,
            exit: arrival,
            onboard: state.onboard,
            seats: trip.seat_capacity,
            delay: state.delay,
        });
        // Delay stays a running sum; recomputing it as arrival minus the
        // scheduled clock lets rounding make it shrink.
        state.scheduled += track.travel_time();
        heap.push(StopCall {
            time: arrival,
            vertex: track.head.0,
            trip: call.trip,
            pos: call.pos + 1,
        });
    }

    let mut queue_trajectories = Vec::with_capacity(layout.len());
    for (qi, (queue, info)) in queues.iter_mut().zip(layout.queues()).enumerate() {
        let trailing = queue.catch_up(horizon);
        let arrivals: Vec<f64> = queue.stream.times()[..queue.cursor].to_vec();
        log.queues.push(QueueClosing {
            queue: qi,
            initial: initial_queues[qi],
            arrivals: arrivals.len() as f64,
            boarded: queue.boarded,
            final_length: queue.level,
        });
        let _ = trailing;
        queue_trajectories.push(QueueTrajectory {
            queue: qi,
            stop: info.stop,
            initial: initial_queues[qi],
            arrivals,
            boardings: std::mem::take(&mut boardings[qi]),
        });
    }
    log.trips = closings
        .into_iter()
        .enumerate()
        .map(|(ti, c)| {
            c.unwrap_or_else(|| TripClosing {
                trip: timetable.trips[ti].id.clone(),
                final_onboard: trips[ti].onboard,
                truncated: true,
                total_delay: trips[ti].delay,
            })
        })
        .collect();

    let trajectory = match options.trajectory_step {
        Some(step) if step > 0.0 => sample_trajectories(net, timetable, &segments, step, horizon),
        _ => Vec::new(),
    };

    Ok(ExactRun {
        log,
        queues: queue_trajectories,
        segments,
        utilization,
        trajectory,
        diagnostics,
        horizon,
    })
}

/// Positions on a fixed time grid, read off the travel segments.
pub fn sample_trajectories(
    net: &TramNetwork,
    timetable: &Timetable,
    segments: &[TravelSegment],
    step: f64,
    horizon: f64,
) -> Vec<TrajectorySample> {
    let mut out = Vec::new();
    for seg in segments {
        let track = net.track(seg.edge);
        let first = (seg.entry / step).ceil() as i64;
        let mut k = first.max(0);
        loop {
            let t = k as f64 * step;
            if t >= seg.exit || t > horizon {
                break;
            }
            out.push(TrajectorySample {
                t,
                trip: timetable.trips[seg.trip].id.clone(),
                edge: track.id.clone(),
                x: (track.velocity * (t - seg.entry)).clamp(0.0, track.length),
                onboard: seg.onboard,
                delay: seg.delay,
            });
            k += 1;
        }
    }
    out.sort_by(|a, b| a.t.total_cmp(&b.t).then_with(|| a.trip.cmp(&b.trip)));
    out
}
