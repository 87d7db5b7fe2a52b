//! Random networks, timetables and demand for property tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tramflow::dynamics::{AlightingTable, DemandMode, DemandTables};
use tramflow::experiment::{Experiment, RunConfig, RunOutcome};
use tramflow::network::{QueueLayout, StopSpec, Timetable, TrackSpec, TramNetwork, Trip};
use tramflow::scenarios::{DisruptionPlan, DwellDelayModel, DwellMode, FailureSpec};
use tramflow::stochastic::{HourlyProfile, RateTable};

/// A trunk line with an optional feeder merging into it and an optional
/// branch leaving it, served by up to three lines.
pub fn random_experiment(seed: u64) -> Experiment {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(3..=6);
    let mut stops: Vec<StopSpec> = (0..n).map(|i| StopSpec::new(format!("T{i}"))).collect();
    let mut tracks = Vec::new();
    let length = |rng: &mut ChaCha8Rng| rng.random_range(0.5..4.0);
    for i in 0..n - 1 {
        let l = length(&mut rng);
        let w = rng.random_range(0.3..1.5);
        tracks.push(TrackSpec::new(
            format!("t{i}"),
            format!("T{i}"),
            format!("T{}", i + 1),
            l,
            w,
        ));
    }
    let feeder = rng.random_bool(0.6).then(|| rng.random_range(1..n - 1));
    let branch = rng.random_bool(0.6).then(|| rng.random_range(1..n - 1));
    if let Some(j) = feeder {
        stops.push(StopSpec::new("F"));
        let l = length(&mut rng);
        tracks.push(TrackSpec::new("f", "F", format!("T{j}"), l, 0.8));
    }
    if let Some(k) = branch {
        stops.push(StopSpec::new("X"));
        let l = length(&mut rng);
        tracks.push(TrackSpec::new("x", format!("T{k}"), "X", l, 0.8));
    }
    let net = TramNetwork::new(stops, tracks).expect("generated network is valid");
    let e = |id: &str| net.edge_idx(id).unwrap();
    let trunk =
        |from: usize, to: usize| (from..to).map(|i| e(&format!("t{i}"))).collect::<Vec<_>>();

    let mut routes = vec![("A", trunk(0, n - 1))];
    if let Some(j) = feeder {
        let mut r = vec![e("f")];
        match branch {
            Some(k) if k >= j && rng.random_bool(0.5) => {
                r.extend(trunk(j, k));
                r.push(e("x"));
            }
            _ => r.extend(trunk(j, n - 1)),
        }
        routes.push(("B", r));
    }
    if let Some(k) = branch {
        let mut r = trunk(0, k);
        r.push(e("x"));
        routes.push(("C", r));
    }

    let horizon = rng.random_range(60.0..200.0);
    let mut trips = Vec::new();
    for (line, route) in routes {
        let headway = rng.random_range(4.0..30.0);
        let capacity = rng.random_range(10.0..200.0);
        let seats = rng.random_range(0.0..=capacity);
        let mut t = rng.random_range(0.0..headway);
        let mut k = 0;
        while t < horizon {
            trips.push(Trip {
                id: format!("{line}-{k}"),
                line: line.into(),
                edges: route.clone(),
                departure: t,
                capacity,
                seat_capacity: seats,
            });
            t += headway;
            k += 1;
        }
    }
    let timetable = Timetable::new(trips, horizon).expect("generated timetable is valid");

    let mut rates = RateTable::new();
    for track in net.tracks() {
        if rng.random_bool(0.85) {
            let mut per_min = [0.0; 24];
            for r in per_min.iter_mut().take(4) {
                *r = rng.random_range(0.0..4.0);
            }
            rates.insert(track.id.clone(), HourlyProfile::new(per_min).unwrap());
        }
    }
    let mut alighting = AlightingTable::new();
    for stop in net.stops() {
        alighting
            .set_stop_all_day(&stop.id, rng.random_range(0.0..1.0))
            .unwrap();
    }
    let layout = match branch {
        Some(k) if rng.random_bool(0.4) => {
            let pool = vec![format!("t{k}"), "x".to_string()];
            QueueLayout::with_shared(&net, &[(format!("T{k}-pool"), pool)]).unwrap()
        }
        _ => QueueLayout::per_edge(&net),
    };
    let mut demand = DemandTables {
        rates,
        alighting,
        ..Default::default()
    };
    for q in layout.queues() {
        if rng.random_bool(0.3) {
            demand
                .initial_queues
                .insert(q.id.clone(), rng.random_range(0.0..60.0));
        }
    }
    Experiment {
        name: format!("random-{seed}"),
        network: net,
        services: Vec::new(),
        timetable,
        layout,
        demand,
        measurement_stop: None,
    }
}

/// Random dwell, cancellation and failure settings.
pub fn random_config(seed: u64) -> RunConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let dwell = match rng.random_range(0..3) {
        0 => None,
        1 => Some(DwellDelayModel::with_mode(DwellMode::Sum)),
        _ => Some(DwellDelayModel {
            threshold: rng.random_range(0.0..30.0),
            slope: rng.random_range(0.0..0.2),
            mode: DwellMode::PaperLiteral,
        }),
    };
    let failures = if rng.random_bool(0.5) {
        vec![FailureSpec {
            probability: rng.random_range(0.0..0.3),
            delay: rng.random_range(0.0..6.0),
        }]
    } else {
        Vec::new()
    };
    RunConfig {
        dwell,
        disruption: DisruptionPlan {
            cancellation_rate: if rng.random_bool(0.5) {
                rng.random_range(0.0..0.4)
            } else {
                0.0
            },
            failures,
            seed: None,
        },
        demand_mode: if rng.random_bool(0.9) {
            DemandMode::Poisson
        } else {
            DemandMode::Deterministic
        },
        record_trajectories: false,
    }
}

const EPS: f64 = 1e-9;

/// Event-level invariants of one run. Returns the first broken one.
pub fn check_run(exp: &Experiment, outcome: &RunOutcome) -> Result<(), String> {
    let net = &exp.network;
    let tt = &outcome.timetable;
    for ev in &outcome.run.log.stop_events {
        let trip = tt
            .trip(&ev.trip)
            .ok_or_else(|| format!("unknown trip {}", ev.trip))?;
        let at = format!(
            "trip {} at {} t={}",
            ev.trip,
            net.stop(ev.vertex).id,
            ev.time
        );
        if ev.queue_before < -EPS || ev.queue_after < -EPS {
            return Err(format!(
                "negative queue, {at}: {} -> {}",
                ev.queue_before, ev.queue_after
            ));
        }
        if ev.boarded < -EPS || ev.alighted < -EPS || ev.alighted > ev.onboard_before + EPS {
            return Err(format!(
                "bad exchange, {at}: b={} a={}",
                ev.boarded, ev.alighted
            ));
        }
        if ev.onboard_after < -EPS || ev.onboard_after > trip.capacity + EPS {
            return Err(format!(
                "onboard {} outside [0, {}], {at}",
                ev.onboard_after, trip.capacity
            ));
        }
        if (ev.onboard_before - ev.alighted + ev.boarded - ev.onboard_after).abs()
            > EPS * (1.0 + ev.onboard_after)
        {
            return Err(format!("onboard bookkeeping, {at}"));
        }
        if ev.queue.is_some()
            && (ev.queue_before - ev.boarded - ev.queue_after).abs() > EPS * (1.0 + ev.queue_before)
        {
            return Err(format!("queue bookkeeping, {at}"));
        }
        if ev.departure < ev.time - EPS {
            return Err(format!("departure before arrival, {at}"));
        }
    }

    // Delays accumulate and arrival times follow travel plus stop time.
    for trip in &tt.trips {
        let events: Vec<_> = outcome
            .run
            .log
            .stop_events
            .iter()
            .filter(|ev| ev.trip == trip.id)
            .collect();
        if events
            .windows(2)
            .any(|w| w[1].accrued_delay < w[0].accrued_delay)
        {
            return Err(format!("delay of {} decreases", trip.id));
        }
        let truncated = outcome
            .run
            .log
            .trips
            .iter()
            .any(|c| c.trip == trip.id && c.truncated);
        if truncated || events.len() != trip.edges.len() + 1 {
            continue;
        }
        let travel: f64 = trip.edges.iter().map(|&e| net.track(e).travel_time()).sum();
        let stopped: f64 = events[..events.len() - 1]
            .iter()
            .map(|ev| ev.departure - ev.time)
            .sum();
        let last = events.last().unwrap().time;
        let expected = trip.departure + travel + stopped;
        if (last - expected).abs() > 1e-9 * (1.0 + expected) {
            return Err(format!(
                "trip {} ends at {last}, expected {expected}",
                trip.id
            ));
        }
    }

    if !outcome.audit.passed() {
        return Err(format!("audit failed: {:?}", outcome.audit.failures()));
    }
    Ok(())
}
