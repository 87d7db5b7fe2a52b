//! Line service patterns: headway periods anchored at a reference stop,
//! expanded into concrete trips.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{EdgeIdx, StopIdx, TramNetwork, Trip};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ServiceError {
    #[error("line `{line}`: anchor stop `{stop}` is not on the route")]
    AnchorOffRoute { line: String, stop: String },
    #[error("line `{line}`: route is empty")]
    EmptyRoute { line: String },
    #[error("line `{line}`: route is not a connected path")]
    BrokenRoute { line: String },
    #[error("line `{line}`: invalid period [{start}, {end}) with headway {headway}")]
    InvalidPeriod {
        line: String,
        start: f64,
        end: f64,
        headway: f64,
    },
    #[error("invalid headway {0}")]
    InvalidHeadway(f64),
    #[error("unknown line `{0}`")]
    UnknownLine(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServicePeriod {
    /// Window start, minutes from midnight, applied at the anchor stop.
    pub start: f64,
    /// Window end (exclusive).
    pub end: f64,
    pub headway: f64,
    /// Peak periods are the ones rewritten by frequency scenarios.
    pub peak: bool,
}

/// Capacity of a line's trams by hour of the anchor departure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HourlyCapacity {
    pub total: [f64; 24],
    pub seats: [f64; 24],
}

impl HourlyCapacity {
    pub fn constant(total: f64, seats: f64) -> Self {
        Self {
            total: [total; 24],
            seats: [seats; 24],
        }
    }

    pub fn at(&self, t: f64) -> (f64, f64) {
        let h = hour_of(t);
        (self.total[h], self.seats[h])
    }
}

/// Hour slot of a time in minutes, clamped into 0..=23.
pub fn hour_of(t: f64) -> usize {
    if t <= 0.0 {
        0
    } else {
        ((t / 60.0).floor() as usize).min(23)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineService {
    pub line: String,
    pub route: Vec<EdgeIdx>,
    pub anchor: StopIdx,
    /// Departure minute at the anchor stop, taken modulo the headway.
    pub minute: f64,
    pub periods: Vec<ServicePeriod>,
    pub capacity: HourlyCapacity,
}

impl LineService {
    pub fn check(&self, net: &TramNetwork) -> Result<(), ServiceError> {
        if self.route.is_empty() {
            return Err(ServiceError::EmptyRoute {
                line: self.line.clone(),
            });
        }
        if self
            .route
            .windows(2)
            .any(|w| net.track(w[0]).head != net.track(w[1]).tail)
        {
            return Err(ServiceError::BrokenRoute {
                line: self.line.clone(),
            });
        }
        for p in &self.periods {
            if !(p.headway.is_finite()
                && p.headway > 0.0
                && p.start.is_finite()
                && p.end >= p.start)
            {
                return Err(ServiceError::InvalidPeriod {
                    line: self.line.clone(),
                    start: p.start,
                    end: p.end,
                    headway: p.headway,
                });
            }
        }
        self.anchor_offset(net).map(|_| ())
    }

    /// Travel time from the route origin to the anchor stop.
    pub fn anchor_offset(&self, net: &TramNetwork) -> Result<f64, ServiceError> {
        let mut t = 0.0;
        for &e in &self.route {
            if net.track(e).tail == self.anchor {
                return Ok(t);
            }
            t += net.track(e).travel_time();
        }
        match self.route.last() {
            Some(&e) if net.track(e).head == self.anchor => Ok(t),
            _ => Err(ServiceError::AnchorOffRoute {
                line: self.line.clone(),
                stop: net.stop(self.anchor).id.clone(),
            }),
        }
    }

    /// Anchor-stop times `start + (minute mod h) + k·h` inside every period.
    /// A final slot that would reach past the window end is dropped.
    pub fn anchor_times(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for p in &self.periods {
            let mut t = p.start + self.minute.rem_euclid(p.headway);
            while t < p.end - 1e-9 {
                out.push(t);
                t += p.headway;
            }
        }
        out.sort_by(f64::total_cmp);
        out
    }

    /// Expand into trips. Trips whose origin departure falls before 0 or at
    /// or after `horizon` are not generated.
    pub fn trips(&self, net: &TramNetwork, horizon: f64) -> Result<Vec<Trip>, ServiceError> {
        self.check(net)?;
        let offset = self.anchor_offset(net)?;
        let mut trips = Vec::new();
        for t in self.anchor_times() {
            let dep = t - offset;
            if dep < 0.0 || dep >= horizon {
                continue;
            }
            let (capacity, seats) = self.capacity.at(t);
            trips.push(Trip {
                id: format!("{}-{:04}", self.line, trips.len()),
                line: self.line.clone(),
                edges: self.route.clone(),
                departure: dep,
                capacity,
                seat_capacity: seats,
            });
        }
        Ok(trips)
    }

    /// Same line with every peak period running at `headway`.
    pub fn with_peak_headway(&self, headway: f64) -> Result<Self, ServiceError> {
        if !(headway.is_finite() && headway > 0.0) {
            return Err(ServiceError::InvalidHeadway(headway));
        }
        let mut out = self.clone();
        for p in out.periods.iter_mut().filter(|p| p.peak) {
            p.headway = headway;
        }
        Ok(out)
    }

    pub fn shifted(&self, minutes: f64) -> Self {
        let mut out = self.clone();
        out.minute += minutes;
        out
    }
}

/// Expand several lines into one trip list ordered by departure.
pub fn expand_services(
    net: &TramNetwork,
    services: &[LineService],
    horizon: f64,
) -> Result<Vec<Trip>, ServiceError> {
    let mut trips = Vec::new();
    for s in services {
        trips.extend(s.trips(net, horizon)?);
    }
    trips.sort_by(|a, b| {
        a.departure
            .total_cmp(&b.departure)
            .then_with(|| a.id.cmp(&b.id))
    });
    Ok(trips)
}
