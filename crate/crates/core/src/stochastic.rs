//! Passenger arrivals as inhomogeneous Poisson processes with hourly
//! piecewise-constant rates, sampled by thinning.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::service::hour_of;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StochasticError {
    #[error("rate {rate} in hour {hour} is negative or not finite")]
    InvalidRate { hour: usize, rate: f64 },
    #[error("time {t} outside [0, {horizon}]")]
    OutOfDomain { t: f64, horizon: f64 },
    #[error("invalid horizon {0}")]
    InvalidHorizon(f64),
    #[error("arrival times must be sorted and lie in [0, {horizon}]")]
    UnsortedTimes { horizon: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateUnit {
    PerMin,
    PerHour,
}

impl RateUnit {
    pub fn to_per_min(self, rate: f64) -> f64 {
        match self {
            RateUnit::PerMin => rate,
            RateUnit::PerHour => rate / 60.0,
        }
    }
}

/// Piecewise-constant rate with one value per hour, stored per minute.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HourlyProfile {
    per_min: [f64; 24],
}

impl Default for HourlyProfile {
    fn default() -> Self {
        Self { per_min: [0.0; 24] }
    }
}

impl HourlyProfile {
    pub fn new(per_min: [f64; 24]) -> Result<Self, StochasticError> {
        for (hour, &rate) in per_min.iter().enumerate() {
            if !(rate.is_finite() && rate >= 0.0) {
                return Err(StochasticError::InvalidRate { hour, rate });
            }
        }
        Ok(Self { per_min })
    }

    pub fn constant(per_min: f64) -> Result<Self, StochasticError> {
        Self::new([per_min; 24])
    }

    pub fn rates(&self) -> &[f64; 24] {
        &self.per_min
    }

    /// Rate at time `t` (minutes); times past the last hour use hour 23.
    pub fn rate_at(&self, t: f64) -> f64 {
        self.per_min[hour_of(t)]
    }

    pub fn max_rate(&self) -> f64 {
        self.per_min.iter().copied().fold(0.0, f64::max)
    }

    /// `∫_a^b λ(s) ds`, exact for the step function.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        let mut total = 0.0;
        let mut t = a;
        while t < b {
            let h = hour_of(t);
            let slot_end = if h == 23 {
                b
            } else {
                ((h + 1) as f64 * 60.0).min(b)
            };
            let end = if slot_end <= t { b } else { slot_end };
            total += self.per_min[h] * (end - t);
            t = end;
        }
        total
    }

    pub fn add(&self, other: &HourlyProfile) -> HourlyProfile {
        let mut per_min = self.per_min;
        for (a, b) in per_min.iter_mut().zip(other.per_min.iter()) {
            *a += b;
        }
        HourlyProfile { per_min }
    }

    pub fn scale(&self, factor: f64) -> HourlyProfile {
        let mut per_min = self.per_min;
        for a in &mut per_min {
            *a *= factor;
        }
        HourlyProfile { per_min }
    }
}

/// Arrival rate profiles keyed by outgoing edge id.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RateTable {
    profiles: BTreeMap<String, HourlyProfile>,
}

impl RateTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, edge: impl Into<String>, profile: HourlyProfile) {
        self.profiles.insert(edge.into(), profile);
    }

    /// Add `rate` (already per minute) to one hour of an edge.
    pub fn add_rate(
        &mut self,
        edge: &str,
        hour: usize,
        per_min: f64,
    ) -> Result<(), StochasticError> {
        if !(per_min.is_finite() && per_min >= 0.0) {
            return Err(StochasticError::InvalidRate {
                hour,
                rate: per_min,
            });
        }
        let entry = self.profiles.entry(edge.to_string()).or_default();
        entry.per_min[hour.min(23)] += per_min;
        Ok(())
    }

    pub fn get(&self, edge: &str) -> Option<&HourlyProfile> {
        self.profiles.get(edge)
    }

    pub fn profile(&self, edge: &str) -> HourlyProfile {
        self.profiles.get(edge).copied().unwrap_or_default()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &HourlyProfile)> {
        self.profiles.iter()
    }

    pub fn scaled(&self, factor: f64) -> RateTable {
        RateTable {
            profiles: self
                .profiles
                .iter()
                .map(|(k, v)| (k.clone(), v.scale(factor)))
                .collect(),
        }
    }
}

/// Thinning for an inhomogeneous Poisson process on `[0, horizon]`.
pub fn sample_arrivals<R: Rng + ?Sized>(
    profile: &HourlyProfile,
    horizon: f64,
    rng: &mut R,
) -> Result<Vec<f64>, StochasticError> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(StochasticError::InvalidHorizon(horizon));
    }
    let lambda_max = profile.max_rate();
    let mut times = Vec::new();
    if lambda_max <= 0.0 {
        return Ok(times);
    }
    let gap = Exp::new(lambda_max).expect("positive finite rate");
    let mut t = 0.0;
    while t < horizon {
        t += gap.sample(rng);
        if t > horizon {
            break;
        }
        let u: f64 = rng.random();
        if u <= profile.rate_at(t) / lambda_max {
            times.push(t);
        }
    }
    Ok(times)
}

/// Realized arrival times for one queue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrivalStream {
    pub key: String,
    pub seed: u64,
    pub horizon: f64,
    times: Vec<f64>,
}

impl ArrivalStream {
    pub fn sample(
        key: impl Into<String>,
        profile: &HourlyProfile,
        horizon: f64,
        seed: u64,
    ) -> Result<Self, StochasticError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let times = sample_arrivals(profile, horizon, &mut rng)?;
        Ok(Self {
            key: key.into(),
            seed,
            horizon,
            times,
        })
    }

    /// Noise-free demand: one arrival each time the cumulative intensity
    /// crosses an integer.
    pub fn deterministic(
        key: impl Into<String>,
        profile: &HourlyProfile,
        horizon: f64,
    ) -> Result<Self, StochasticError> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(StochasticError::InvalidHorizon(horizon));
        }
        let mut times = Vec::new();
        let mut cum = 0.0;
        let mut next = 1.0;
        let mut h = 0usize;
        loop {
            let start = h as f64 * 60.0;
            if start >= horizon {
                break;
            }
            let end = if h == 23 {
                horizon
            } else {
                ((h + 1) as f64 * 60.0).min(horizon)
            };
            let rate = profile.rates()[h.min(23)];
            let slot_mass = rate * (end - start);
            while rate > 0.0 && cum + slot_mass >= next - 1e-12 {
                let t = (start + (next - cum) / rate).min(end);
                times.push(t);
                next += 1.0;
            }
            cum += slot_mass;
            if end >= horizon {
                break;
            }
            h += 1;
        }
        Ok(Self {
            key: key.into(),
            seed: 0,
            horizon,
            times,
        })
    }

    pub fn from_times(
        key: impl Into<String>,
        times: Vec<f64>,
        horizon: f64,
    ) -> Result<Self, StochasticError> {
        let sorted = times.windows(2).all(|w| w[0] <= w[1]);
        let in_range = times.iter().all(|&t| (0.0..=horizon).contains(&t));
        if !sorted || !in_range {
            return Err(StochasticError::UnsortedTimes { horizon });
        }
        Ok(Self {
            key: key.into(),
            seed: 0,
            horizon,
            times,
        })
    }

    pub fn empty(key: impl Into<String>, horizon: f64) -> Self {
        Self {
            key: key.into(),
            seed: 0,
            horizon,
            times: Vec::new(),
        }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `X(t)`: number of arrivals at or before `t`.
    pub fn cumulative_arrivals(&self, t: f64) -> Result<usize, StochasticError> {
        if !(0.0..=self.horizon).contains(&t) {
            return Err(StochasticError::OutOfDomain {
                t,
                horizon: self.horizon,
            });
        }
        Ok(self.count_up_to(t))
    }

    /// Unchecked `X(t)`, saturating outside the domain.
    pub fn count_up_to(&self, t: f64) -> usize {
        self.times.partition_point(|&a| a <= t)
    }
}

/// SplitMix64 finaliser.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn fnv1a(key: &str) -> u64 {
    key.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Seed of the independent substream owned by `(run, key)` under `master`.
pub fn substream_seed(master: u64, run: u64, key: &str) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ run) ^ fnv1a(key))
}

pub fn substream_rng(master: u64, run: u64, key: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(substream_seed(master, run, key))
}
