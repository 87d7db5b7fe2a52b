//! Disruptions and schedule variants: passenger-exchange dwell delays,
//! random tram failures, trip cancellations, headway and shift scenarios.

use std::collections::HashMap;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{Timetable, TramNetwork};
use crate::service::{expand_services, LineService, ServiceError};
use crate::stochastic::substream_rng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("negative passenger count: boarded {boarded}, alighted {alighted}")]
    NegativeExchange { boarded: f64, alighted: f64 },
    #[error("cancellation rate {0} outside [0, 1]")]
    InvalidRate(f64),
    #[error("failure probability {0} outside [0, 1]")]
    InvalidProbability(f64),
    #[error("failure delay {0} is negative or not finite")]
    InvalidDelay(f64),
    #[error("dwell model needs a positive slope and a nonnegative threshold")]
    InvalidDwellModel,
    #[error(transparent)]
    Service(#[from] ServiceError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DwellMode {
    /// Delay grows with boarded plus alighted passengers.
    #[default]
    Sum,
    /// Delay grows with boarded minus alighted passengers, clamped at zero.
    PaperLiteral,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DwellDelayModel {
    pub threshold: f64,
    /// Minutes per passenger above the threshold.
    pub slope: f64,
    pub mode: DwellMode,
}

impl Default for DwellDelayModel {
    fn default() -> Self {
        Self {
            threshold: 50.0,
            slope: 1.0 / 50.0,
            mode: DwellMode::Sum,
        }
    }
}

/// Dwell delay in minutes together with a flag telling whether a negative
/// raw value had to be clamped to zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dwell {
    pub minutes: f64,
    pub clamped: bool,
}

impl DwellDelayModel {
    pub fn with_mode(mode: DwellMode) -> Self {
        Self {
            mode,
            ..Self::default()
        }
    }

    pub fn check(&self) -> Result<(), ScenarioError> {
        if self.threshold.is_finite()
            && self.threshold >= 0.0
            && self.slope.is_finite()
            && self.slope > 0.0
        {
            Ok(())
        } else {
            Err(ScenarioError::InvalidDwellModel)
        }
    }

    pub fn evaluate(&self, boarded: f64, alighted: f64) -> Result<Dwell, ScenarioError> {
        if boarded < 0.0 || alighted < 0.0 || boarded.is_nan() || alighted.is_nan() {
            return Err(ScenarioError::NegativeExchange { boarded, alighted });
        }
        if boarded + alighted <= self.threshold {
            return Ok(Dwell {
                minutes: 0.0,
                clamped: false,
            });
        }
        let raw = match self.mode {
            DwellMode::Sum => (boarded + alighted - self.threshold) * self.slope,
            DwellMode::PaperLiteral => (boarded - alighted - self.threshold) * self.slope,
        };
        Ok(if raw < 0.0 {
            Dwell {
                minutes: 0.0,
                clamped: true,
            }
        } else {
            Dwell {
                minutes: raw,
                clamped: false,
            }
        })
    }
}

pub fn dwell_delay(
    boarded: f64,
    alighted: f64,
    model: &DwellDelayModel,
) -> Result<f64, ScenarioError> {
    model.evaluate(boarded, alighted).map(|d| d.minutes)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FailureSpec {
    /// Chance that a single departing stop event suffers this failure.
    pub probability: f64,
    pub delay: f64,
}

impl FailureSpec {
    /// The two standard failure classes: rare long and more frequent short.
    pub fn standard() -> Vec<FailureSpec> {
        vec![
            FailureSpec {
                probability: 0.005,
                delay: 8.0,
            },
            FailureSpec {
                probability: 0.01,
                delay: 4.0,
            },
        ]
    }

    pub fn check(&self) -> Result<(), ScenarioError> {
        if !(0.0..=1.0).contains(&self.probability) {
            return Err(ScenarioError::InvalidProbability(self.probability));
        }
        if !(self.delay.is_finite() && self.delay >= 0.0) {
            return Err(ScenarioError::InvalidDelay(self.delay));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DisruptionPlan {
    pub cancellation_rate: f64,
    pub failures: Vec<FailureSpec>,
    /// Seed for cancellations and failures; the run's master seed otherwise.
    pub seed: Option<u64>,
}

impl DisruptionPlan {
    pub fn check(&self) -> Result<(), ScenarioError> {
        if !(0.0..=1.0).contains(&self.cancellation_rate) {
            return Err(ScenarioError::InvalidRate(self.cancellation_rate));
        }
        self.failures.iter().try_for_each(FailureSpec::check)
    }

    pub fn is_quiet(&self) -> bool {
        self.cancellation_rate == 0.0 && self.failures.iter().all(|f| f.probability == 0.0)
    }
}

/// Extra delay per (trip index, stop position) for one run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FailureSchedule {
    delays: HashMap<(usize, usize), f64>,
}

impl FailureSchedule {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn delay(&self, trip: usize, position: usize) -> f64 {
        self.delays.get(&(trip, position)).copied().unwrap_or(0.0)
    }

    pub fn count(&self) -> usize {
        self.delays.len()
    }

    pub fn total_delay(&self) -> f64 {
        self.delays.values().sum()
    }

    pub fn insert(&mut self, trip: usize, position: usize, delay: f64) {
        *self.delays.entry((trip, position)).or_insert(0.0) += delay;
    }
}

/// Draw failures for every departing stop event of every trip. Each spec
/// is an independent Bernoulli trial per event; hits add up.
pub fn inject_failures<R: Rng + ?Sized>(
    failures: &[FailureSpec],
    timetable: &Timetable,
    rng: &mut R,
) -> Result<FailureSchedule, ScenarioError> {
    failures.iter().try_for_each(FailureSpec::check)?;
    let mut schedule = FailureSchedule::none();
    if failures.iter().all(|f| f.probability == 0.0) {
        return Ok(schedule);
    }
    for (ti, trip) in timetable.trips.iter().enumerate() {
        for pos in 0..trip.edges.len() {
            for f in failures {
                if rng.random::<f64>() < f.probability {
                    schedule.insert(ti, pos, f.delay);
                }
            }
        }
    }
    Ok(schedule)
}

/// Remove `⌊rate·N⌋` trips: half at an even stride over the departure
/// order, the rest uniformly from the survivors.
pub fn apply_cancellations<R: Rng + ?Sized>(
    timetable: &Timetable,
    rate: f64,
    rng: &mut R,
) -> Result<Timetable, ScenarioError> {
    let removed = cancellation_indices(timetable, rate, rng)?;
    let mut keep = vec![true; timetable.trips.len()];
    for i in removed {
        keep[i] = false;
    }
    Ok(Timetable {
        trips: timetable
            .trips
            .iter()
            .zip(&keep)
            .filter(|(_, &k)| k)
            .map(|(t, _)| t.clone())
            .collect(),
        horizon: timetable.horizon,
    })
}

/// Indices (into `timetable.trips`) of the cancelled trips, sorted.
pub fn cancellation_indices<R: Rng + ?Sized>(
    timetable: &Timetable,
    rate: f64,
    rng: &mut R,
) -> Result<Vec<usize>, ScenarioError> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(ScenarioError::InvalidRate(rate));
    }
    let n = timetable.trips.len();
    let total = ((rate * n as f64) + 1e-9).floor() as usize;
    let total = total.min(n);
    if total == 0 {
        return Ok(Vec::new());
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let (ta, tb) = (&timetable.trips[a], &timetable.trips[b]);
        ta.departure
            .total_cmp(&tb.departure)
            .then_with(|| ta.id.cmp(&tb.id))
    });

    let even = total / 2;
    let mut chosen = vec![false; n];
    for k in 0..even {
        let pos = ((k as f64 + 0.5) * n as f64 / even as f64).floor() as usize;
        chosen[order[pos.min(n - 1)]] = true;
    }
    let rest: Vec<usize> = order.iter().copied().filter(|&i| !chosen[i]).collect();
    for j in index::sample(rng, rest.len(), total - even) {
        chosen[rest[j]] = true;
    }
    Ok((0..n).filter(|&i| chosen[i]).collect())
}

/// Timetable with every peak period running at `headway` minutes.
pub fn build_frequency_scenario(
    net: &TramNetwork,
    services: &[LineService],
    headway: f64,
    horizon: f64,
) -> Result<Timetable, ScenarioError> {
    let lines = services
        .iter()
        .map(|s| s.with_peak_headway(headway))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Timetable {
        trips: expand_services(net, &lines, horizon)?,
        horizon,
    })
}

/// Services with one line's departures moved by `minutes`.
pub fn shift_line(
    services: &[LineService],
    line: &str,
    minutes: f64,
) -> Result<Vec<LineService>, ScenarioError> {
    if !services.iter().any(|s| s.line == line) {
        return Err(ServiceError::UnknownLine(line.to_string()).into());
    }
    Ok(services
        .iter()
        .map(|s| {
            if s.line == line {
                s.shifted(minutes)
            } else {
                s.clone()
            }
        })
        .collect())
}

/// Per-run RNG for disruption draws.
pub fn disruption_rng(
    plan: &DisruptionPlan,
    master_seed: u64,
    run: u64,
    what: &str,
) -> rand_chacha::ChaCha8Rng {
    substream_rng(plan.seed.unwrap_or(master_seed), run, what)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{EdgeIdx, StopSpec, TrackSpec, Trip};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dwell_examples() {
        let sum = DwellDelayModel::default();
        let lit = DwellDelayModel::with_mode(DwellMode::PaperLiteral);
        assert_eq!(dwell_delay(20.0, 20.0, &sum).unwrap(), 0.0);
        assert_eq!(dwell_delay(20.0, 20.0, &lit).unwrap(), 0.0);
        assert!((dwell_delay(60.0, 40.0, &sum).unwrap() - 1.0).abs() < 1e-12);
        let d = lit.evaluate(60.0, 40.0).unwrap();
        assert_eq!(d.minutes, 0.0);
        assert!(d.clamped);
        assert!((dwell_delay(120.0, 10.0, &lit).unwrap() - 1.2).abs() < 1e-12);
        assert!(dwell_delay(-1.0, 0.0, &sum).is_err());
    }

    fn day(n: usize) -> Timetable {
        let trips = (0..n)
            .map(|i| Trip {
                id: format!("t{i:03}"),
                line: "1".into(),
                edges: vec![EdgeIdx(0)],
                departure: 300.0 + 10.0 * i as f64,
                capacity: 100.0,
                seat_capacity: 50.0,
            })
            .collect();
        Timetable {
            trips,
            horizon: 1440.0,
        }
    }

    #[test]
    fn cancellation_counts_and_stride() {
        let tt = day(96);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let removed = cancellation_indices(&tt, 0.25, &mut rng).unwrap();
        assert_eq!(removed.len(), 24);
        for k in 0..12 {
            assert!(removed.contains(&(4 + 8 * k)), "stride slot {k}");
        }
        let out = apply_cancellations(&tt, 0.25, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(out.trips.len(), 72);

        assert_eq!(apply_cancellations(&tt, 0.0, &mut rng).unwrap(), tt);
        assert!(apply_cancellations(&tt, 1.0, &mut rng)
            .unwrap()
            .trips
            .is_empty());
        assert!(apply_cancellations(&tt, 1.5, &mut rng).is_err());
    }

    #[test]
    fn cancellation_is_seed_deterministic() {
        let tt = day(50);
        let a = cancellation_indices(&tt, 0.3, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        let b = cancellation_indices(&tt, 0.3, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_probability_plan_fails_nothing() {
        let tt = day(20);
        let plan = vec![FailureSpec {
            probability: 0.0,
            delay: 8.0,
        }];
        let s = inject_failures(&plan, &tt, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(s.count(), 0);
        let certain = vec![FailureSpec {
            probability: 1.0,
            delay: 2.0,
        }];
        let s = inject_failures(&certain, &tt, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(s.count(), 20);
        assert_eq!(s.delay(3, 0), 2.0);
        assert!(inject_failures(
            &[FailureSpec {
                probability: 2.0,
                delay: 1.0
            }],
            &tt,
            &mut ChaCha8Rng::seed_from_u64(1)
        )
        .is_err());
    }

    #[test]
    fn shift_requires_known_line() {
        let net = TramNetwork::new(
            vec![StopSpec::new("a"), StopSpec::new("b")],
            vec![TrackSpec::new("ab", "a", "b", 1.0, 1.0)],
        )
        .unwrap();
        let s = LineService {
            line: "1".into(),
            route: vec![EdgeIdx(0)],
            anchor: net.stop_idx("a").unwrap(),
            minute: 3.0,
            periods: vec![crate::service::ServicePeriod {
                start: 300.0,
                end: 400.0,
                headway: 10.0,
                peak: true,
            }],
            capacity: crate::service::HourlyCapacity::constant(100.0, 50.0),
        };
        assert!(shift_line(std::slice::from_ref(&s), "2", 1.0).is_err());
        let shifted = shift_line(std::slice::from_ref(&s), "1", 1.0).unwrap();
        assert_eq!(shifted[0].minute, 4.0);
        let tt = build_frequency_scenario(&net, &[s], 20.0, 1440.0).unwrap();
        assert_eq!(tt.trips.len(), 5);
    }
}
