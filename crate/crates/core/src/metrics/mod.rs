//! Waiting time, standing time and capacity utilisation of a finished run,
//! plus the Monte Carlo aggregation in [`montecarlo`].

pub mod montecarlo;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::network::TramNetwork;
use crate::solver::exact::{ExactRun, QueueTrajectory, TravelSegment, UtilizationSample};

pub use montecarlo::{monte_carlo, percentile, MonteCarloReport, Stat};

const MINUTES_PER_HOUR: f64 = 60.0;

/// A time integral in passenger-hours with its breakdowns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Breakdown {
    pub total: f64,
    /// Keyed by stop id (waiting) or edge id (standing).
    pub by_place: BTreeMap<String, f64>,
    pub by_hour: Vec<f64>,
}

impl Default for Breakdown {
    fn default() -> Self {
        Self {
            total: 0.0,
            by_place: BTreeMap::new(),
            by_hour: vec![0.0; 24],
        }
    }
}

/// Spread `weight` passengers over `[from, to)` into hourly buckets, in
/// passenger-hours.
fn add_interval(by_hour: &mut [f64], from: f64, to: f64, weight: f64) {
    if to <= from || weight == 0.0 {
        return;
    }
    let mut a = from.max(0.0);
    while a < to {
        let h = ((a / MINUTES_PER_HOUR).floor() as usize).min(23);
        let slot_end = if h == 23 {
            to
        } else {
            ((h + 1) as f64 * MINUTES_PER_HOUR).min(to)
        };
        by_hour[h] += weight * (slot_end - a) / MINUTES_PER_HOUR;
        a = slot_end;
    }
}

/// Exact integral of the queue step functions over `[0, horizon]`.
pub fn total_waiting_time(
    net: &TramNetwork,
    queues: &[QueueTrajectory],
    horizon: f64,
) -> Breakdown {
    let mut out = Breakdown::default();
    for q in queues {
        let mut minutes = q.initial * horizon;
        add_interval(&mut out.by_hour, 0.0, horizon, q.initial);
        for &a in q.arrivals.iter().filter(|&&a| a <= horizon) {
            minutes += horizon - a;
            add_interval(&mut out.by_hour, a, horizon, 1.0);
        }
        for &(t, b) in q.boardings.iter().filter(|(t, _)| *t <= horizon) {
            minutes -= b * (horizon - t);
            add_interval(&mut out.by_hour, t, horizon, -b);
        }
        let hours = minutes / MINUTES_PER_HOUR;
        *out.by_place
            .entry(net.stop(q.stop).id.clone())
            .or_insert(0.0) += hours;
        out.total += hours;
    }
    out
}

/// Standing passengers integrated over travel time, clipped to the horizon.
/// Dwell time at stops is not counted.
pub fn total_standing_time(
    net: &TramNetwork,
    segments: &[TravelSegment],
    horizon: f64,
) -> Breakdown {
    let mut out = Breakdown::default();
    for s in segments {
        let standing = (s.onboard - s.seats).max(0.0);
        let end = s.exit.min(horizon);
        if standing <= 0.0 || end <= s.entry {
            continue;
        }
        let hours = standing * (end - s.entry) / MINUTES_PER_HOUR;
        add_interval(&mut out.by_hour, s.entry, end, standing);
        *out.by_place
            .entry(net.track(s.edge).id.clone())
            .or_insert(0.0) += hours;
        out.total += hours;
    }
    out
}

/// Passengers per seat; `None` when the tram has no seats.
pub fn capacity_utilization(onboard: f64, seats: f64) -> Option<f64> {
    (seats > 0.0).then(|| onboard / seats)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilizationPoint {
    pub line: String,
    pub trip: String,
    pub scheduled: f64,
    pub time: f64,
    pub cu: Option<f64>,
}

pub fn utilization_series(samples: &[UtilizationSample]) -> Vec<UtilizationPoint> {
    let mut out: Vec<UtilizationPoint> = samples
        .iter()
        .map(|s| UtilizationPoint {
            line: s.line.clone(),
            trip: s.trip.clone(),
            scheduled: s.scheduled,
            time: s.time,
            cu: capacity_utilization(s.onboard, s.seats),
        })
        .collect();
    out.sort_by(|a, b| {
        a.line
            .cmp(&b.line)
            .then(a.scheduled.total_cmp(&b.scheduled))
    });
    out
}

/// Everything kept from one simulated day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run: u64,
    pub waiting: Breakdown,
    pub standing: Breakdown,
    /// Minutes of dwell delay summed over all stop events.
    pub dwell_minutes: f64,
    pub failure_minutes: f64,
    pub failures: usize,
    pub cancelled_trips: usize,
    pub trips: usize,
    pub boarded: f64,
    pub utilization: Vec<UtilizationPoint>,
    pub audit_residual: f64,
    pub warnings: usize,
}

impl RunSummary {
    pub fn from_run(
        net: &TramNetwork,
        run_index: u64,
        run: &ExactRun,
        audit_residual: f64,
    ) -> Self {
        Self {
            run: run_index,
            waiting: total_waiting_time(net, &run.queues, run.horizon),
            standing: total_standing_time(net, &run.segments, run.horizon),
            dwell_minutes: run.diagnostics.total_dwell,
            failure_minutes: run.diagnostics.total_failure_delay,
            failures: run.diagnostics.failures,
            cancelled_trips: 0,
            trips: run.log.trips.len(),
            boarded: run.log.stop_events.iter().map(|e| e.boarded).sum(),
            utilization: utilization_series(&run.utilization),
            audit_residual,
            warnings: run.log.warnings.len(),
        }
    }

    /// Named scalar metrics used by the aggregation.
    pub fn scalars(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("waiting_hours", self.waiting.total),
            ("standing_hours", self.standing.total),
            ("dwell_minutes", self.dwell_minutes),
            ("failure_minutes", self.failure_minutes),
            ("boarded", self.boarded),
        ]
    }
}
