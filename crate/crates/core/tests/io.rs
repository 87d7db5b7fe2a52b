use std::fs;

use tramflow::io::config::{parse_config, Document};
use tramflow::io::report::{
    load_saved, simulate, sweep, to_json, write_simulation, write_sweep, SavedReport,
    SimulationReport, SweepReport, REPORT_FILE,
};
use tramflow::io::{load_scenario, SweepKind};
use tramflow::network::Rule;

#[test]
fn line_one_sample_carries_the_published_stop_data() {
    let s = load_scenario("mannheim-line1").unwrap();
    let exp = &s.experiment;
    assert!(exp.validate().is_admissible());
    let net = &exp.network;
    let at_four_pm = 16.5 * 60.0;
    let rate = |edge: &str| exp.demand.rates.profile(edge).rate_at(at_four_pm) * 60.0;
    assert!((rate("PAR-STR") - 142.0).abs() < 1e-9);
    assert!((rate("HBF-TAT") - 169.0).abs() < 1e-9);
    assert!((exp.demand.alighting.fraction("PAR", "ABE-PAR", at_four_pm) - 0.26).abs() < 1e-12);
    assert!((exp.demand.alighting.fraction("HBF", "NEU-HBF", at_four_pm) - 0.36).abs() < 1e-12);
    let trip = &exp.timetable.trips[0];
    assert_eq!(trip.seat_capacity, 114.0);
    assert_eq!(trip.capacity - trip.seat_capacity, 136.0);
    assert_eq!(
        exp.measurement_stop.map(|v| net.stop(v).id.as_str()),
        Some("PAR")
    );
}

#[test]
fn junction_example_and_its_mutation() {
    let ok = load_scenario("example-2-1").unwrap();
    assert!(ok.experiment.validate().is_admissible());

    let bad = load_scenario("example-2-1-mutated").unwrap();
    let report = bad.experiment.validate();
    let mut times: Vec<f64> = report
        .violations
        .iter()
        .filter(|v| v.rule == Rule::InjectiveExceptEmpty)
        .filter_map(|v| v.time)
        .collect();
    times.sort_by(f64::total_cmp);
    assert_eq!(times, vec![4.0, 14.0, 24.0, 34.0, 44.0, 54.0]);
}

#[test]
fn simulation_report_round_trips() {
    let mut s = load_scenario("toy-line").unwrap();
    s.config.runs = 8;
    let out = simulate(&s, true).unwrap();
    let json = to_json(&out.report);
    let back: SimulationReport = serde_json::from_str(&json).unwrap();
    assert_eq!(back, out.report);
    assert_eq!(to_json(&back), json);
    assert_eq!(back.header.master_seed, 7);
    assert!(back.monte_carlo.is_some() && back.grid_check.is_some());

    let dir = tempfile::tempdir().unwrap();
    write_simulation(dir.path(), &out, &s.experiment.network).unwrap();
    match load_saved(dir.path()).unwrap() {
        SavedReport::Simulation(r) => assert_eq!(r, out.report),
        other => panic!("unexpected {other:?}"),
    }
    let trajectories = fs::read_to_string(dir.path().join("trajectories.csv")).unwrap();
    assert!(trajectories.starts_with("t,trip_id,edge_id,x,onboard,delay\n"));
    assert!(trajectories.lines().count() > 10);
}

#[test]
fn single_run_report_round_trips() {
    let mut s = load_scenario("toy-line").unwrap();
    s.config.runs = 1;
    let out = simulate(&s, false).unwrap();
    assert!(out.report.single.is_some());
    let back: SimulationReport = serde_json::from_str(&to_json(&out.report)).unwrap();
    assert_eq!(back, out.report);
}

#[test]
fn sweep_report_round_trips() {
    let mut s = load_scenario("toy-line").unwrap();
    s.config.runs = 4;
    let r = sweep(&s, SweepKind::Cancellation).unwrap();
    assert_eq!(r.rows.len(), 12);
    let back: SweepReport = serde_json::from_str(&to_json(&r)).unwrap();
    assert_eq!(back, r);

    let dir = tempfile::tempdir().unwrap();
    write_sweep(dir.path(), &r).unwrap();
    assert!(matches!(load_saved(dir.path()).unwrap(), SavedReport::Sweep(x) if x == r));
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 13);
}

#[test]
fn same_seed_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let mut bytes = Vec::new();
    for k in 0..2 {
        let mut s = load_scenario("toy-line").unwrap();
        s.config.runs = 16;
        let out = simulate(&s, true).unwrap();
        let d = dir.path().join(k.to_string());
        write_simulation(&d, &out, &s.experiment.network).unwrap();
        bytes.push(fs::read(d.join(REPORT_FILE)).unwrap());
    }
    assert_eq!(bytes[0], bytes[1]);

    let mut s = load_scenario("toy-line").unwrap();
    s.config.runs = 16;
    s.config.seed = Some(8);
    let other = to_json(&simulate(&s, false).unwrap().report);
    assert_ne!(other.as_bytes(), &bytes[0][..]);
}

#[test]
fn scenario_directory_on_disk() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("net.toml"),
        r#"
stops = [{ id = "a" }, { id = "b" }]
tracks = [{ id = "ab", from = "a", to = "b", length_km = 2.0, speed_km_per_min = 0.5 }]
trips = [
  { id = "t1", line = "1", route = ["ab"], departure = 5.0, capacity = 10, seats = 4 },
  { id = "t2", line = "1", route = ["ab"], departure = 25.0, capacity = 10, seats = 4 },
]
"#,
    )
    .unwrap();
    fs::write(
        dir.path().join("rates.csv"),
        "edge,hour,rate,unit\nab,all,0.5,per_min\n",
    )
    .unwrap();
    fs::write(
        dir.path().join("config.toml"),
        "network = \"net.toml\"\nrates = \"rates.csv\"\nhorizon = 60\nruns = 1\nseed = 3\n",
    )
    .unwrap();
    let s = load_scenario(dir.path().to_str().unwrap()).unwrap();
    assert_eq!(s.experiment.timetable.trips.len(), 2);
    let out = simulate(&s, false).unwrap();
    let single = out.report.single.unwrap();
    assert!(single.boarded > 0.0 && single.boarded <= 20.0);

    let doc = Document {
        origin: "inline.toml".into(),
        text: "network = \"net.toml\"\nrunz = 3\n".into(),
    };
    let err = parse_config(&doc).unwrap_err().to_string();
    assert!(err.contains("inline.toml") && err.contains("runz"), "{err}");
}
