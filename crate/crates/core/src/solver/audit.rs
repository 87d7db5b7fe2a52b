//! Passenger conservation checks over a finished event log.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::exact::EventLog;

pub const AUDIT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub subject: String,
    pub residual: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BalanceReport {
    /// Boarded minus alighted minus final onboard, and onboard jumps
    /// between consecutive events.
    pub trips: Vec<Residual>,
    /// Initial plus arrivals minus boarded minus final length.
    pub queues: Vec<Residual>,
    pub global: f64,
    pub total_arrivals: f64,
    pub total_alighted: f64,
    pub total_waiting_at_end: f64,
    pub total_in_transit: f64,
}

impl BalanceReport {
    pub fn passed(&self) -> bool {
        self.failures().is_empty() && self.global.abs() < AUDIT_TOLERANCE
    }

    pub fn max_residual(&self) -> f64 {
        self.trips
            .iter()
            .chain(&self.queues)
            .map(|r| r.residual.abs())
            .fold(self.global.abs(), f64::max)
    }

    /// Subjects whose residual exceeds the tolerance.
    pub fn failures(&self) -> Vec<&Residual> {
        self.trips
            .iter()
            .chain(&self.queues)
            .filter(|r| r.residual.is_nan() || r.residual.abs() >= AUDIT_TOLERANCE)
            .collect()
    }
}

pub fn mass_balance_audit(log: &EventLog) -> BalanceReport {
    struct Acc {
        boarded: f64,
        alighted: f64,
        last: f64,
        jumps: f64,
    }
    let mut per_trip: BTreeMap<&str, Acc> = BTreeMap::new();
    let mut total_boarded_events = 0.0;
    let mut total_alighted = 0.0;
    for ev in &log.stop_events {
        let acc = per_trip.entry(ev.trip.as_str()).or_insert(Acc {
            boarded: 0.0,
            alighted: 0.0,
            last: 0.0,
            jumps: 0.0,
        });
        acc.jumps += (ev.onboard_before - acc.last).abs();
        acc.jumps += (ev.onboard_before - ev.alighted + ev.boarded - ev.onboard_after).abs();
        acc.boarded += ev.boarded;
        acc.alighted += ev.alighted;
        acc.last = ev.onboard_after;
        total_boarded_events += ev.boarded;
        total_alighted += ev.alighted;
    }

    let mut report = BalanceReport::default();
    let mut total_in_transit = 0.0;
    for closing in &log.trips {
        let (b, a, jumps, last) = per_trip
            .get(closing.trip.as_str())
            .map_or((0.0, 0.0, 0.0, 0.0), |acc| {
                (acc.boarded, acc.alighted, acc.jumps, acc.last)
            });
        let mut residual = b - a - closing.final_onboard;
        residual = residual.abs() + jumps + (last - closing.final_onboard).abs();
        report.trips.push(Residual {
            subject: closing.trip.clone(),
            residual,
        });
        total_in_transit += closing.final_onboard;
    }

    let mut total_arrivals = 0.0;
    let mut total_initial = 0.0;
    let mut total_final = 0.0;
    let mut total_boarded_queues = 0.0;
    for q in &log.queues {
        report.queues.push(Residual {
            subject: format!("queue {}", q.queue),
            residual: q.initial + q.arrivals - q.boarded - q.final_length,
        });
        total_arrivals += q.arrivals;
        total_initial += q.initial;
        total_final += q.final_length;
        total_boarded_queues += q.boarded;
    }
    // Queues and trams must agree on how many people boarded, and every
    // person is waiting, riding or gone.
    report.global =
        (total_initial + total_arrivals - total_alighted - total_final - total_in_transit).abs()
            + (total_boarded_queues - total_boarded_events).abs();
    report.total_arrivals = total_arrivals;
    report.total_alighted = total_alighted;
    report.total_waiting_at_end = total_final;
    report.total_in_transit = total_in_transit;
    report
}
