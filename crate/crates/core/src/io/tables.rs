//! Plot-ready CSV tables. Numbers carry 9 significant digits.

use std::fmt::Write as _;

use crate::dynamics::StopEventRecord;
use crate::metrics::{Breakdown, MonteCarloReport, RunSummary, Stat};
use crate::network::TramNetwork;
use crate::solver::exact::TrajectorySample;

use super::report::SweepReport;

/// Format with 9 significant digits, plain notation where reasonable.
pub fn sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..15).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        let s = if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        };
        if s == "-0" {
            "0".into()
        } else {
            s
        }
    } else {
        let s = format!("{x:.8e}");
        let (mantissa, e) = s.split_once('e').unwrap_or((&s, "0"));
        let mantissa = mantissa.trim_end_matches('0').trim_end_matches('.');
        format!("{mantissa}e{e}")
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(sig9).unwrap_or_default()
}

/// Small CSV builder; cells are never quoted because ids contain no commas.
#[derive(Debug, Default)]
pub struct Table {
    out: String,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        let mut t = Table::default();
        t.out.push_str(&header.join(","));
        t.out.push('\n');
        t
    }

    pub fn row<I: IntoIterator<Item = String>>(&mut self, cells: I) {
        let cells: Vec<String> = cells.into_iter().collect();
        self.out.push_str(&cells.join(","));
        self.out.push('\n');
    }

    pub fn finish(self) -> String {
        self.out
    }
}

pub fn stat_cells(s: Option<&Stat>) -> [String; 3] {
    match s {
        Some(s) => [sig9(s.mean), sig9(s.p20), sig9(s.p80)],
        None => Default::default(),
    }
}

pub fn by_place_table(key: &str, b: &Breakdown) -> String {
    let mut t = Table::new(&[key, "hours"]);
    for (k, v) in &b.by_place {
        t.row([k.clone(), sig9(*v)]);
    }
    t.finish()
}

pub fn by_hour_table(values: &[f64]) -> String {
    let mut t = Table::new(&["hour", "hours"]);
    for (h, v) in values.iter().enumerate() {
        t.row([h.to_string(), sig9(*v)]);
    }
    t.finish()
}

pub fn run_totals_table(s: &RunSummary) -> String {
    let mut t = Table::new(&["metric", "value"]);
    for (name, v) in s.scalars() {
        t.row([name.to_string(), sig9(v)]);
    }
    t.row(["failures".into(), s.failures.to_string()]);
    t.row(["cancelled_trips".into(), s.cancelled_trips.to_string()]);
    t.finish()
}

pub fn run_utilization_table(s: &RunSummary) -> String {
    let mut t = Table::new(&["line", "trip", "scheduled", "time", "cu"]);
    for p in &s.utilization {
        t.row([
            p.line.clone(),
            p.trip.clone(),
            sig9(p.scheduled),
            sig9(p.time),
            opt(p.cu),
        ]);
    }
    t.finish()
}

pub fn mc_totals_table(r: &MonteCarloReport) -> String {
    let mut t = Table::new(&["metric", "mean", "p20", "p80", "min", "max"]);
    for (name, s) in &r.metrics {
        t.row([
            name.clone(),
            sig9(s.mean),
            sig9(s.p20),
            sig9(s.p80),
            sig9(s.min),
            sig9(s.max),
        ]);
    }
    t.finish()
}

pub fn mc_waiting_by_stop_table(r: &MonteCarloReport) -> String {
    let mut t = Table::new(&["stop", "hours"]);
    for (k, v) in &r.waiting_by_stop {
        t.row([k.clone(), sig9(*v)]);
    }
    t.finish()
}

pub fn mc_utilization_table(r: &MonteCarloReport) -> String {
    let mut t = Table::new(&["line", "scheduled", "cu_mean"]);
    for (line, at, cu) in &r.utilization {
        t.row([line.clone(), sig9(*at), sig9(*cu)]);
    }
    t.finish()
}

pub fn sweep_table(r: &SweepReport) -> String {
    let mut t = Table::new(&[
        "headway",
        "cancellation_rate",
        "shift",
        "waiting_mean",
        "waiting_p20",
        "waiting_p80",
        "standing_mean",
        "standing_p20",
        "standing_p80",
        "dwell_mean",
        "failed_runs",
    ]);
    for row in &r.rows {
        let mut cells = vec![
            opt(row.headway),
            sig9(row.cancellation_rate),
            sig9(row.shift),
        ];
        cells.extend(stat_cells(row.report.stat("waiting_hours")));
        cells.extend(stat_cells(row.report.stat("standing_hours")));
        cells.push(opt(row.report.stat("dwell_minutes").map(|s| s.mean)));
        cells.push(row.report.failed.len().to_string());
        t.row(cells);
    }
    t.finish()
}

pub fn trajectory_table(samples: &[TrajectorySample]) -> String {
    let mut t = Table::new(&["t", "trip_id", "edge_id", "x", "onboard", "delay"]);
    for s in samples {
        t.row([
            sig9(s.t),
            s.trip.clone(),
            s.edge.clone(),
            sig9(s.x),
            sig9(s.onboard),
            sig9(s.delay),
        ]);
    }
    t.finish()
}

pub fn event_table(net: &TramNetwork, events: &[StopEventRecord]) -> String {
    let mut out = String::from(
        "time,departure,stop,trip,in_edge,out_edge,queue_before,boarded,alighted,onboard_after,dwell,failure_delay\n",
    );
    let edge =
        |e: Option<crate::network::EdgeIdx>| e.map(|e| net.track(e).id.clone()).unwrap_or_default();
    for e in events {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            sig9(e.time),
            sig9(e.departure),
            net.stop(e.vertex).id,
            e.trip,
            edge(e.in_edge),
            edge(e.out_edge),
            sig9(e.queue_before),
            sig9(e.boarded),
            sig9(e.alighted),
            sig9(e.onboard_after),
            sig9(e.dwell),
            sig9(e.failure_delay)
        );
    }
    out
}
