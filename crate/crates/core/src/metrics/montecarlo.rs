//! Seeded parallel replication and percentile summaries.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::RunSummary;

/// Aggregates are flagged invalid when more runs than this fail.
pub const MAX_FAILED_SHARE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub p20: f64,
    pub p80: f64,
    pub min: f64,
    pub max: f64,
}

impl Stat {
    pub fn from_values(values: &[f64]) -> Option<Stat> {
        if values.is_empty() {
            return None;
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Some(Stat {
            mean: values.iter().sum::<f64>() / values.len() as f64,
            p20: percentile(&sorted, 0.2),
            p80: percentile(&sorted, 0.8),
            min: sorted[0],
            max: sorted[sorted.len() - 1],
        })
    }

    pub fn band(&self) -> f64 {
        self.p80 - self.p20
    }
}

/// Nearest-rank percentile of already sorted values.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of an empty sample");
    let rank = (p * sorted.len() as f64 - 1e-9).ceil().max(1.0) as usize;
    sorted[rank.min(sorted.len()) - 1]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedRun {
    pub run: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub runs: u64,
    pub master_seed: u64,
    pub failed: Vec<FailedRun>,
    pub valid: bool,
    pub metrics: BTreeMap<String, Stat>,
    pub waiting_by_stop: BTreeMap<String, f64>,
    pub waiting_by_hour: Vec<f64>,
    pub standing_by_hour: Vec<f64>,
    /// Mean utilisation per `(line, scheduled time)` at the measurement stop.
    pub utilization: Vec<(String, f64, f64)>,
    pub max_audit_residual: f64,
}

impl MonteCarloReport {
    pub fn stat(&self, name: &str) -> Option<&Stat> {
        self.metrics.get(name)
    }
}

/// Run `simulate` for runs `0..n` in parallel and summarise. Results are
/// reduced in run order, so the report does not depend on scheduling.
pub fn monte_carlo<F>(n: u64, master_seed: u64, simulate: F) -> MonteCarloReport
where
    F: Fn(u64) -> Result<RunSummary, String> + Sync,
{
    let results: Vec<Result<RunSummary, String>> = (0..n).into_par_iter().map(&simulate).collect();

    let mut failed = Vec::new();
    let mut scalars: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut waiting_by_stop: BTreeMap<String, f64> = BTreeMap::new();
    let mut waiting_by_hour = vec![0.0; 24];
    let mut standing_by_hour = vec![0.0; 24];
    let mut util: BTreeMap<(String, u64), (f64, f64, usize)> = BTreeMap::new();
    let mut max_audit_residual = 0.0f64;
    let mut ok = 0usize;
    for (run, result) in results.into_iter().enumerate() {
        let summary = match result {
            Ok(s) => s,
            Err(error) => {
                failed.push(FailedRun {
                    run: run as u64,
                    error,
                });
                continue;
            }
        };
        ok += 1;
        for (name, v) in summary.scalars() {
            scalars.entry(name.to_string()).or_default().push(v);
        }
        for (stop, v) in &summary.waiting.by_place {
            *waiting_by_stop.entry(stop.clone()).or_insert(0.0) += v;
        }
        for h in 0..24 {
            waiting_by_hour[h] += summary.waiting.by_hour[h];
            standing_by_hour[h] += summary.standing.by_hour[h];
        }
        for p in &summary.utilization {
            if let Some(cu) = p.cu {
                let e = util
                    .entry((p.line.clone(), p.scheduled.to_bits()))
                    .or_insert((p.scheduled, 0.0, 0));
                e.1 += cu;
                e.2 += 1;
            }
        }
        max_audit_residual = max_audit_residual.max(summary.audit_residual);
    }
    let norm = if ok > 0 { 1.0 / ok as f64 } else { 0.0 };
    waiting_by_stop.values_mut().for_each(|v| *v *= norm);
    waiting_by_hour.iter_mut().for_each(|v| *v *= norm);
    standing_by_hour.iter_mut().for_each(|v| *v *= norm);
    let mut utilization: Vec<(String, f64, f64)> = util
        .into_iter()
        .map(|((line, _), (t, sum, count))| (line, t, sum / count as f64))
        .collect();
    utilization.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));

    MonteCarloReport {
        runs: n,
        master_seed,
        valid: n > 0 && (failed.len() as f64) <= MAX_FAILED_SHARE * n as f64,
        failed,
        metrics: scalars
            .into_iter()
            .filter_map(|(k, v)| Stat::from_values(&v).map(|s| (k, s)))
            .collect(),
        waiting_by_stop,
        waiting_by_hour,
        standing_by_hour,
        utilization,
        max_audit_residual,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::Breakdown;

    fn summary(run: u64, waiting: f64) -> RunSummary {
        RunSummary {
            run,
            waiting: Breakdown {
                total: waiting,
                ..Breakdown::default()
            },
            standing: Breakdown::default(),
            dwell_minutes: 0.0,
            failure_minutes: 0.0,
            failures: 0,
            cancelled_trips: 0,
            trips: 0,
            boarded: 0.0,
            utilization: vec![],
            audit_residual: 0.0,
            warnings: 0,
        }
    }

    #[test]
    fn nearest_rank() {
        let v: Vec<f64> = (1..=10).map(f64::from).collect();
        assert_eq!(percentile(&v, 0.2), 2.0);
        assert_eq!(percentile(&v, 0.8), 8.0);
        assert_eq!(percentile(&[7.0], 0.2), 7.0);
        let thousand: Vec<f64> = (1..=1000).map(f64::from).collect();
        assert_eq!(percentile(&thousand, 0.2), 200.0);
    }

    #[test]
    fn single_run_collapses_the_band() {
        let r = monte_carlo(1, 0, |i| Ok(summary(i, 4.0)));
        let s = r.stat("waiting_hours").unwrap();
        assert_eq!((s.mean, s.p20, s.p80), (4.0, 4.0, 4.0));
    }

    #[test]
    fn too_many_failures_invalidate() {
        let r = monte_carlo(10, 0, |i| {
            if i < 2 {
                Err("boom".into())
            } else {
                Ok(summary(i, 1.0))
            }
        });
        assert_eq!(r.failed.len(), 2);
        assert!(!r.valid);
        let r = monte_carlo(10, 0, |i| {
            if i < 1 {
                Err("boom".into())
            } else {
                Ok(summary(i, 1.0))
            }
        });
        assert!(r.valid);
    }

    #[test]
    fn order_independent() {
        let a = monte_carlo(50, 1, |i| Ok(summary(i, (i * 7 % 13) as f64)));
        let b = monte_carlo(50, 1, |i| Ok(summary(i, (i * 7 % 13) as f64)));
        assert_eq!(a, b);
    }
}
