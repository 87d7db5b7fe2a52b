mod support;

use proptest::prelude::*;

use tramflow::experiment::run_once;
use tramflow::metrics::total_waiting_time;
use tramflow::network::{derive_capacity_function, validate_schedule, Routing, ScheduleIndex};
use tramflow::solver::exact::QueueTrajectory;
use tramflow::solver::{run_upwind, GridParams};

use support::{check_run, random_config, random_experiment};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn generated_schedules_are_admissible(seed in any::<u64>()) {
        let exp = random_experiment(seed);
        let report = validate_schedule(&exp.network, &exp.timetable);
        prop_assert!(report.is_admissible(), "{:?}", report.violations);
    }

    #[test]
    fn event_invariants_hold(seed in any::<u64>(), master in any::<u64>()) {
        let exp = random_experiment(seed);
        let cfg = random_config(seed);
        let outcome = run_once(&exp, &cfg, master, 0).map_err(|e| TestCaseError::fail(e.to_string()))?;
        if let Err(msg) = check_run(&exp, &outcome) {
            prop_assert!(false, "{}", msg);
        }
    }

    #[test]
    fn routing_is_injective_and_invertible(seed in any::<u64>()) {
        let exp = random_experiment(seed);
        let (net, tt) = (&exp.network, &exp.timetable);
        let idx = ScheduleIndex::build(net, tt);
        for trip in &tt.trips {
            let deps = trip.edge_departures(net);
            for (i, &e_in) in trip.edges.iter().enumerate() {
                let v = net.track(e_in).head;
                let t = deps[i] + net.track(e_in).travel_time();
                let mut seen = Vec::new();
                for &other in net.incoming(v) {
                    if let Ok(Routing::Continue(out)) = idx.route_through_vertex(net, tt, v, other, t) {
                        prop_assert!(!seen.contains(&out), "two trams leave along one edge");
                        seen.push(out);
                        let back = idx.inverse_route(net, v, out, t).unwrap();
                        prop_assert_eq!(back, Some(other));
                    }
                }
                let expected = trip.edges.get(i + 1).map_or(Routing::Terminate, |&e| Routing::Continue(e));
                prop_assert_eq!(idx.route_through_vertex(net, tt, v, e_in, t).unwrap(), expected);
            }
        }
    }

    #[test]
    fn capacity_function_is_ordered_and_constant_along_trips(seed in any::<u64>()) {
        let exp = random_experiment(seed);
        let (net, tt) = (&exp.network, &exp.timetable);
        for (ei, _) in net.tracks().iter().enumerate() {
            let events = derive_capacity_function(net, tt, tramflow::EdgeIdx(ei)).unwrap();
            prop_assert!(events.windows(2).all(|w| w[0].time < w[1].time));
            prop_assert!(events.iter().all(|c| c.time.is_finite() && c.time >= 0.0 && c.time <= tt.horizon));
            for c in &events {
                let trip = tt.trip(&c.trip).unwrap();
                prop_assert_eq!(c.capacity, trip.capacity);
            }
        }
    }

    #[test]
    fn upwind_stays_nonnegative_and_conservative(seed in any::<u64>(), cfl in 0.05f64..=1.0) {
        let exp = random_experiment(seed);
        let cfg = random_config(seed);
        let outcome = run_once(&exp, &cfg, seed, 0).unwrap();
        let grid = GridParams { cfl, cells: 20, ..GridParams::default() };
        let field = run_upwind(&exp.network, &outcome.run, &grid).unwrap();
        prop_assert!(field.min_value() >= 0.0, "min {}", field.min_value());
        for g in &field.edges {
            let scale = 1.0 + g.injected;
            prop_assert!(g.conservation_residual().abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn waiting_is_additive_and_scales(seed in any::<u64>()) {
        let exp = random_experiment(seed);
        let outcome = run_once(&exp, &random_config(seed), seed, 0).unwrap();
        let horizon = exp.horizon();
        let queues = &outcome.run.queues;
        let whole = total_waiting_time(&exp.network, queues, horizon);

        let parts: f64 = whole.by_place.values().sum();
        prop_assert!((parts - whole.total).abs() <= 1e-9 * (1.0 + whole.total));
        let hours: f64 = whole.by_hour.iter().sum();
        prop_assert!((hours - whole.total).abs() <= 1e-9 * (1.0 + whole.total));

        // Disjoint stop subsets add up to the total.
        let (even, odd): (Vec<QueueTrajectory>, Vec<QueueTrajectory>) =
            queues.iter().cloned().partition(|q| q.stop.0 % 2 == 0);
        let split = total_waiting_time(&exp.network, &even, horizon).total
            + total_waiting_time(&exp.network, &odd, horizon).total;
        prop_assert!((split - whole.total).abs() <= 1e-9 * (1.0 + whole.total));

        let doubled: Vec<QueueTrajectory> = queues
            .iter()
            .map(|q| {
                let mut arrivals: Vec<f64> = q.arrivals.iter().flat_map(|&a| [a, a]).collect();
                arrivals.sort_by(f64::total_cmp);
                QueueTrajectory {
                    initial: 2.0 * q.initial,
                    arrivals,
                    boardings: q.boardings.iter().map(|&(t, b)| (t, 2.0 * b)).collect(),
                    ..q.clone()
                }
            })
            .collect();
        let twice = total_waiting_time(&exp.network, &doubled, horizon).total;
        prop_assert!((twice - 2.0 * whole.total).abs() <= 1e-9 * (1.0 + whole.total));
    }

    #[test]
    fn runs_are_reproducible(seed in any::<u64>(), run in 0u64..50) {
        let exp = random_experiment(seed);
        let cfg = random_config(seed);
        let a = run_once(&exp, &cfg, seed, run).unwrap();
        let b = run_once(&exp, &cfg, seed, run).unwrap();
        prop_assert_eq!(a.run.log, b.run.log);
        prop_assert_eq!(a.summary, b.summary);
    }
}
