//! Stop-event microdynamics: alighting, boarding and queue evolution.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{EdgeIdx, QueueLayout, StopIdx, TramNetwork};
use crate::service::hour_of;
use crate::stochastic::{substream_seed, ArrivalStream, HourlyProfile, RateTable, StochasticError};

/// Floating slack for passenger-count invariants.
pub const COUNT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("alighting fraction {0} outside [0, 1]")]
    FractionOutOfRange(f64),
    #[error("negative passenger count {0}")]
    NegativeCount(f64),
    #[error("onboard {onboard} exceeds capacity {capacity}")]
    OverCapacity { onboard: f64, capacity: f64 },
    #[error("cannot advance queue backwards from {from} to {to}")]
    TimeReversal { from: f64, to: f64 },
    #[error("initial queue for unknown queue `{0}`")]
    UnknownQueue(String),
    #[error(transparent)]
    Stochastic(#[from] StochasticError),
}

/// Split `onboard` into `(alighted, remaining)`. At a trip end everyone
/// leaves regardless of `fraction`.
pub fn alight(onboard: f64, fraction: f64, is_trip_end: bool) -> Result<(f64, f64), DynamicsError> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(DynamicsError::FractionOutOfRange(fraction));
    }
    if onboard < 0.0 || !onboard.is_finite() {
        return Err(DynamicsError::NegativeCount(onboard));
    }
    let r = if is_trip_end { 1.0 } else { fraction };
    let alighted = r * onboard;
    Ok((alighted, onboard - alighted))
}

/// `min(q(t⁻), τ − onboard)` passengers board.
pub fn board(queue: f64, capacity: f64, onboard_after_alight: f64) -> Result<f64, DynamicsError> {
    if queue < 0.0 {
        return Err(DynamicsError::NegativeCount(queue));
    }
    if onboard_after_alight < 0.0 {
        return Err(DynamicsError::NegativeCount(onboard_after_alight));
    }
    if onboard_after_alight > capacity + COUNT_TOLERANCE {
        return Err(DynamicsError::OverCapacity {
            onboard: onboard_after_alight,
            capacity,
        });
    }
    Ok(queue.min((capacity - onboard_after_alight).max(0.0)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueState {
    pub queue: String,
    pub length: f64,
    pub updated_at: f64,
}

impl QueueState {
    pub fn new(queue: impl Into<String>, initial: f64) -> Self {
        Self {
            queue: queue.into(),
            length: initial,
            updated_at: 0.0,
        }
    }
}

/// Add the arrivals in `(from, to]`; boarding is applied separately.
pub fn advance_queue(
    state: &QueueState,
    stream: &ArrivalStream,
    from: f64,
    to: f64,
) -> Result<QueueState, DynamicsError> {
    if to < from {
        return Err(DynamicsError::TimeReversal { from, to });
    }
    let added = stream.count_up_to(to) - stream.count_up_to(from);
    Ok(QueueState {
        queue: state.queue.clone(),
        length: state.length + added as f64,
        updated_at: to,
    })
}

/// One tram call at a stop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StopEventRecord {
    /// Actual arrival (or origin departure) time.
    pub time: f64,
    /// Time the tram leaves again; equals `time` without dwell or failures.
    pub departure: f64,
    pub vertex: StopIdx,
    pub trip: String,
    pub in_edge: Option<EdgeIdx>,
    pub out_edge: Option<EdgeIdx>,
    pub queue: Option<usize>,
    pub queue_before: f64,
    pub queue_after: f64,
    pub arrivals_since_last: f64,
    pub boarded: f64,
    pub alighted: f64,
    pub onboard_before: f64,
    pub onboard_after: f64,
    pub alight_fraction: f64,
    pub dwell: f64,
    pub failure_delay: f64,
    /// Delay accumulated by the trip after this event.
    pub accrued_delay: f64,
}

/// Hourly alighting fractions per stop, optionally per incoming edge.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AlightingTable {
    by_stop: BTreeMap<String, [f64; 24]>,
    by_edge: BTreeMap<String, [f64; 24]>,
}

impl AlightingTable {
    pub fn new() -> Self {
        Self::default()
    }

    fn checked(fraction: f64) -> Result<f64, DynamicsError> {
        if (0.0..=1.0).contains(&fraction) {
            Ok(fraction)
        } else {
            Err(DynamicsError::FractionOutOfRange(fraction))
        }
    }

    pub fn set_stop(
        &mut self,
        stop: &str,
        hour: usize,
        fraction: f64,
    ) -> Result<(), DynamicsError> {
        self.by_stop.entry(stop.to_string()).or_insert([0.0; 24])[hour.min(23)] =
            Self::checked(fraction)?;
        Ok(())
    }

    pub fn set_edge(
        &mut self,
        in_edge: &str,
        hour: usize,
        fraction: f64,
    ) -> Result<(), DynamicsError> {
        self.by_edge.entry(in_edge.to_string()).or_insert([0.0; 24])[hour.min(23)] =
            Self::checked(fraction)?;
        Ok(())
    }

    pub fn set_stop_all_day(&mut self, stop: &str, fraction: f64) -> Result<(), DynamicsError> {
        self.by_stop
            .insert(stop.to_string(), [Self::checked(fraction)?; 24]);
        Ok(())
    }

    /// Fraction for a tram reaching `stop` via `in_edge` at time `t`. Edge
    /// rows override stop rows; unknown stops alight nobody.
    pub fn fraction(&self, stop: &str, in_edge: &str, t: f64) -> f64 {
        let h = hour_of(t);
        self.by_edge
            .get(in_edge)
            .or_else(|| self.by_stop.get(stop))
            .map_or(0.0, |row| row[h])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DemandMode {
    #[default]
    Poisson,
    /// Arrivals placed where the cumulative intensity crosses an integer.
    Deterministic,
}

/// Everything needed to generate passengers: arrival rates per out-edge,
/// alighting fractions and initial queues.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DemandTables {
    pub rates: RateTable,
    pub alighting: AlightingTable,
    /// Initial queue per queue id; absent means empty.
    pub initial_queues: BTreeMap<String, f64>,
}

impl DemandTables {
    /// Arrival profile of each queue: shared pools sum their members.
    pub fn queue_profiles(&self, net: &TramNetwork, layout: &QueueLayout) -> Vec<HourlyProfile> {
        layout
            .queues()
            .iter()
            .map(|q| {
                q.edges.iter().fold(HourlyProfile::default(), |acc, &e| {
                    acc.add(&self.rates.profile(&net.track(e).id))
                })
            })
            .collect()
    }

    pub fn initial_queue_vector(&self, layout: &QueueLayout) -> Result<Vec<f64>, DynamicsError> {
        let ids: HashMap<&str, usize> = layout
            .queues()
            .iter()
            .enumerate()
            .map(|(i, q)| (q.id.as_str(), i))
            .collect();
        let mut out = vec![0.0; layout.len()];
        for (id, &q0) in &self.initial_queues {
            let i = *ids
                .get(id.as_str())
                .ok_or_else(|| DynamicsError::UnknownQueue(id.clone()))?;
            if !(q0.is_finite() && q0 >= 0.0) {
                return Err(DynamicsError::NegativeCount(q0));
            }
            out[i] = q0;
        }
        Ok(out)
    }

    /// Draw one arrival realisation for every queue.
    pub fn realize(
        &self,
        net: &TramNetwork,
        layout: &QueueLayout,
        horizon: f64,
        mode: DemandMode,
        master_seed: u64,
        run: u64,
    ) -> Result<Vec<ArrivalStream>, DynamicsError> {
        let profiles = self.queue_profiles(net, layout);
        layout
            .queues()
            .iter()
            .zip(&profiles)
            .map(|(q, p)| {
                let key = format!("arrivals/{}", q.id);
                Ok(match mode {
                    DemandMode::Poisson => ArrivalStream::sample(
                        &q.id,
                        p,
                        horizon,
                        substream_seed(master_seed, run, &key),
                    )?,
                    DemandMode::Deterministic => ArrivalStream::deterministic(&q.id, p, horizon)?,
                })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{StopSpec, TrackSpec};
    use approx::assert_relative_eq;

    #[test]
    fn alighting_examples() {
        let (a, r) = alight(80.0, 0.26, false).unwrap();
        assert_relative_eq!(a, 20.8, epsilon = 1e-12);
        assert_relative_eq!(r, 59.2, epsilon = 1e-12);
        assert_eq!(alight(50.0, 0.3, true).unwrap(), (50.0, 0.0));
        assert_eq!(alight(0.0, 0.5, false).unwrap(), (0.0, 0.0));
        assert!(alight(10.0, 1.5, false).is_err());
        assert!(alight(10.0, -0.1, false).is_err());
    }

    #[test]
    fn boarding_examples() {
        assert_eq!(board(10.0, 100.0, 95.0).unwrap(), 5.0);
        assert_eq!(board(10.0, 100.0, 50.0).unwrap(), 10.0);
        assert_eq!(board(0.0, 100.0, 70.0).unwrap(), 0.0);
        assert!(matches!(
            board(1.0, 100.0, 101.0),
            Err(DynamicsError::OverCapacity { .. })
        ));
    }

    #[test]
    fn queue_advances_by_window_arrivals() {
        let s = ArrivalStream::from_times("q", vec![1.0, 2.0, 5.0], 10.0).unwrap();
        let q = QueueState::new("q", 0.5);
        let q = advance_queue(&q, &s, 0.0, 2.0).unwrap();
        assert_eq!(q.length, 2.5);
        let same = advance_queue(&q, &s, 2.0, 4.0).unwrap();
        assert_eq!(same.length, 2.5);
        assert!(advance_queue(&q, &s, 4.0, 3.0).is_err());
    }

    #[test]
    fn edge_rows_override_stop_rows() {
        let mut t = AlightingTable::new();
        t.set_stop_all_day("p", 0.26).unwrap();
        t.set_edge("x-p", 16, 0.5).unwrap();
        assert_eq!(t.fraction("p", "y-p", 16.5 * 60.0), 0.26);
        assert_eq!(t.fraction("p", "x-p", 16.5 * 60.0), 0.5);
        assert_eq!(t.fraction("q", "z", 100.0), 0.0);
        assert!(t.set_stop("p", 3, 1.2).is_err());
    }

    #[test]
    fn shared_pool_sums_rates() {
        let net = TramNetwork::new(
            vec![StopSpec::new("a"), StopSpec::new("b")],
            vec![
                TrackSpec::new("d1", "a", "b", 1.0, 1.0),
                TrackSpec::new("d2", "a", "b", 2.0, 1.0),
            ],
        )
        .unwrap();
        let mut demand = DemandTables::default();
        demand
            .rates
            .insert("d1", HourlyProfile::constant(1.0).unwrap());
        demand
            .rates
            .insert("d2", HourlyProfile::constant(0.5).unwrap());
        let layout =
            QueueLayout::with_shared(&net, &[("pool".into(), vec!["d1".into(), "d2".into()])])
                .unwrap();
        let p = demand.queue_profiles(&net, &layout);
        assert_eq!(p.len(), 1);
        assert_relative_eq!(p[0].rate_at(10.0), 1.5);
        demand.initial_queues.insert("pool".into(), 3.0);
        assert_eq!(demand.initial_queue_vector(&layout).unwrap(), vec![3.0]);
        demand.initial_queues.insert("nope".into(), 3.0);
        assert!(demand.initial_queue_vector(&layout).is_err());
    }
}
