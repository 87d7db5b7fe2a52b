mod support;

use std::collections::HashMap;

use tramflow::experiment::{run_once, RunConfig};
use tramflow::io::load_scenario;
use tramflow::metrics::{total_standing_time, total_waiting_time};
use tramflow::scenarios::{DwellDelayModel, DwellMode};
use tramflow::solver::upwind::{exact_edge_content, exact_exit_centroid};
use tramflow::solver::{run_upwind, GridParams};

use support::{random_config, random_experiment};

/// Midpoint Riemann sum of the queue step functions rebuilt from the
/// arrival streams and the stop event log.
fn riemann_waiting_hours(outcome: &tramflow::RunOutcome, horizon: f64, dt: f64) -> (f64, f64) {
    let mut total = 0.0;
    let mut jump_mass = 0.0;
    for (qi, q) in outcome.run.queues.iter().enumerate() {
        let mut jumps: Vec<(f64, f64)> = q.arrivals.iter().map(|&a| (a, 1.0)).collect();
        for ev in &outcome.run.log.stop_events {
            if ev.queue == Some(qi) && ev.boarded > 0.0 {
                jumps.push((ev.time, -ev.boarded));
            }
        }
        jumps.sort_by(|a, b| a.0.total_cmp(&b.0));
        jump_mass += jumps.iter().map(|j| j.1.abs()).sum::<f64>();
        let steps = (horizon / dt).round() as usize;
        let mut level = q.initial;
        let mut next = 0;
        for k in 0..steps {
            let mid = (k as f64 + 0.5) * dt;
            while next < jumps.len() && jumps[next].0 <= mid {
                level += jumps[next].1;
                next += 1;
            }
            total += level * dt;
        }
    }
    (total / 60.0, jump_mass * dt / 60.0)
}

#[test]
fn waiting_time_matches_riemann_sum() {
    for seed in 0..40u64 {
        let exp = random_experiment(seed);
        let outcome = run_once(&exp, &random_config(seed), seed, 0).unwrap();
        let horizon = exp.horizon();
        let dt = horizon / 200_000.0;
        let exact = total_waiting_time(&exp.network, &outcome.run.queues, horizon).total;
        let (riemann, bound) = riemann_waiting_hours(&outcome, horizon, dt);
        assert!(
            (exact - riemann).abs() <= bound + 1e-9,
            "seed {seed}: exact {exact} riemann {riemann} bound {bound}"
        );
    }
}

#[test]
fn standing_time_matches_event_log() {
    for seed in 0..40u64 {
        let exp = random_experiment(seed);
        let outcome = run_once(&exp, &random_config(seed), seed, 0).unwrap();
        let horizon = exp.horizon();
        let seats: HashMap<&str, f64> = outcome
            .timetable
            .trips
            .iter()
            .map(|t| (t.id.as_str(), t.seat_capacity))
            .collect();
        let mut by_trip: HashMap<&str, Vec<&tramflow::dynamics::StopEventRecord>> = HashMap::new();
        for ev in &outcome.run.log.stop_events {
            by_trip.entry(ev.trip.as_str()).or_default().push(ev);
        }
        let mut oracle = 0.0;
        for (trip, events) in &by_trip {
            for (i, ev) in events.iter().enumerate() {
                // A trip cut off by the horizon has no arrival event for its
                // last segment.
                let arrival = match (events.get(i + 1), ev.out_edge) {
                    (Some(next), _) => next.time,
                    (None, Some(e)) => ev.departure + exp.network.track(e).travel_time(),
                    (None, None) => continue,
                };
                let standing = (ev.onboard_after - seats[trip]).max(0.0);
                let end = arrival.min(horizon);
                if end > ev.departure {
                    oracle += standing * (end - ev.departure) / 60.0;
                }
            }
        }
        let metric = total_standing_time(&exp.network, &outcome.run.segments, horizon).total;
        assert!(
            (metric - oracle).abs() <= 1e-9 * (1.0 + oracle),
            "seed {seed}: {metric} vs {oracle}"
        );
    }
}

#[test]
fn unit_courant_upwind_reproduces_exact_contents() {
    let s = load_scenario("toy-line").unwrap();
    let outcome = run_once(&s.experiment, &RunConfig::default(), 7, 0).unwrap();
    let field = run_upwind(
        &s.experiment.network,
        &outcome.run,
        &GridParams::with_dt(0.1, 1.0),
    )
    .unwrap();
    let mut checked = 0;
    for g in &field.edges {
        assert_eq!(g.courant, 1.0);
        let exact = exact_edge_content(&outcome.run, g.edge, g.dt, g.steps());
        for (a, b) in g.content.iter().zip(&exact) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{a} vs {b}");
            checked += usize::from(*b > 0.0);
        }
    }
    assert!(checked > 100);
}

#[test]
fn dwell_run_still_replays_on_grid() {
    let s = load_scenario("toy-line").unwrap();
    let cfg = RunConfig {
        dwell: Some(DwellDelayModel {
            threshold: 5.0,
            slope: 0.1,
            mode: DwellMode::Sum,
        }),
        ..RunConfig::default()
    };
    let outcome = run_once(&s.experiment, &cfg, 7, 0).unwrap();
    assert!(outcome.run.diagnostics.total_dwell > 0.0);
    let field = run_upwind(
        &s.experiment.network,
        &outcome.run,
        &GridParams::with_dt(0.1, 0.5),
    )
    .unwrap();
    for g in &field.edges {
        assert!(g.conservation_residual().abs() <= 1e-12 * (1.0 + g.injected));
        if let (Some(up), Some(ex)) = (
            g.outflow_centroid(),
            exact_exit_centroid(&outcome.run, g.edge),
        ) {
            assert!((up - ex).abs() <= g.dt, "{up} vs {ex}");
        }
    }
}
