//! Left-sided upwind scheme on a uniform grid per edge. Used to
//! cross-check the exact solver: it replays the boardings and alighting
//! fractions recorded by an exact run, so both see the same demand.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{EdgeIdx, TramNetwork};

use super::exact::ExactRun;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UpwindError {
    #[error("CFL number {cfl} on edge `{edge}` exceeds 1")]
    Cfl { edge: String, cfl: f64 },
    #[error("invalid grid parameter: {0}")]
    InvalidGrid(String),
    #[error("transfer graph has a cycle through edge `{0}`")]
    Cycle(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridParams {
    /// Target Courant number `w dt / dx`.
    pub cfl: f64,
    /// Common time step in minutes. Without it every edge gets `cells`
    /// cells and its own step.
    pub dt: Option<f64>,
    pub cells: usize,
    /// Keep the node values every this many steps (0 keeps none).
    pub snapshot_every: usize,
}

impl Default for GridParams {
    fn default() -> Self {
        Self {
            cfl: 1.0,
            dt: None,
            cells: 100,
            snapshot_every: 0,
        }
    }
}

impl GridParams {
    pub fn with_dt(dt: f64, cfl: f64) -> Self {
        Self {
            cfl,
            dt: Some(dt),
            ..Self::default()
        }
    }

    fn check(&self) -> Result<(), UpwindError> {
        if !(self.cfl > 0.0 && self.cfl.is_finite()) {
            return Err(UpwindError::InvalidGrid(format!("cfl = {}", self.cfl)));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(UpwindError::InvalidGrid(format!("dt = {dt}")));
            }
        }
        if self.cells == 0 {
            return Err(UpwindError::InvalidGrid("cells = 0".into()));
        }
        Ok(())
    }
}

/// Grid solution on one edge. `content[j]` is the mass on the edge after
/// `j` steps, `outflow[j]` the mass leaving during step `j -> j + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeGrid {
    pub edge: EdgeIdx,
    pub dx: f64,
    pub dt: f64,
    pub courant: f64,
    pub cells: usize,
    pub content: Vec<f64>,
    pub outflow: Vec<f64>,
    pub injected: f64,
    /// `(step, cell masses 1..=K)`.
    pub snapshots: Vec<(usize, Vec<f64>)>,
    pub min_value: f64,
}

impl EdgeGrid {
    pub fn steps(&self) -> usize {
        self.content.len() - 1
    }

    pub fn total_outflow(&self) -> f64 {
        self.outflow.iter().sum()
    }

    /// Mass-weighted mean exit time.
    pub fn outflow_centroid(&self) -> Option<f64> {
        let total = self.total_outflow();
        (total > 0.0).then(|| {
            self.outflow
                .iter()
                .enumerate()
                .map(|(j, m)| j as f64 * self.dt * m)
                .sum::<f64>()
                / total
        })
    }

    /// `injected - outflow - final content`, relative to the injected mass.
    pub fn conservation_residual(&self) -> f64 {
        let last = *self.content.last().unwrap_or(&0.0);
        let r = self.injected - self.total_outflow() - last;
        if self.injected > 0.0 {
            r / self.injected
        } else {
            r
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridField {
    pub edges: Vec<EdgeGrid>,
}

impl GridField {
    pub fn edge(&self, e: EdgeIdx) -> &EdgeGrid {
        &self.edges[e.0]
    }

    pub fn min_value(&self) -> f64 {
        self.edges
            .iter()
            .map(|g| g.min_value)
            .fold(f64::INFINITY, f64::min)
    }
}

fn bin(t: f64, dt: f64) -> usize {
    (t / dt + 1e-9).floor().max(0.0) as usize
}

/// Edges ordered so that every transfer goes from an earlier to a later edge.
fn edge_order(net: &TramNetwork, run: &ExactRun) -> Result<Vec<EdgeIdx>, UpwindError> {
    let n = net.tracks().len();
    let mut succ: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut indeg = vec![0usize; n];
    for t in &run.log.transfers {
        if !succ[t.in_edge.0].contains(&t.out_edge.0) {
            succ[t.in_edge.0].push(t.out_edge.0);
            indeg[t.out_edge.0] += 1;
        }
    }
    let mut ready: Vec<usize> = (0..n).filter(|&e| indeg[e] == 0).rev().collect();
    let mut order = Vec::with_capacity(n);
    while let Some(e) = ready.pop() {
        order.push(EdgeIdx(e));
        for &f in &succ[e] {
            indeg[f] -= 1;
            if indeg[f] == 0 {
                ready.push(f);
            }
        }
    }
    if order.len() < n {
        let stuck = (0..n).find(|&e| indeg[e] > 0).unwrap_or(0);
        return Err(UpwindError::Cycle(net.track(EdgeIdx(stuck)).id.clone()));
    }
    Ok(order)
}

/// Run the grid scheme over the horizon of `run`, replaying its boardings
/// and alighting fractions.
pub fn run_upwind(
    net: &TramNetwork,
    run: &ExactRun,
    params: &GridParams,
) -> Result<GridField, UpwindError> {
    params.check()?;
    let order = edge_order(net, run)?;

    // Boarding injections and arrival events per edge.
    let mut injections: Vec<Vec<(f64, f64)>> = vec![Vec::new(); net.tracks().len()];
    let mut arrivals_on: HashMap<usize, Vec<usize>> = HashMap::new();
    for (k, ev) in run.log.stop_events.iter().enumerate() {
        if let Some(out) = ev.out_edge {
            if ev.boarded > 0.0 {
                injections[out.0].push((ev.departure, ev.boarded));
            }
        }
        if let Some(inn) = ev.in_edge {
            arrivals_on.entry(inn.0).or_default().push(k);
        }
    }
    for list in arrivals_on.values_mut() {
        list.sort_by(|&a, &b| {
            run.log.stop_events[a]
                .time
                .total_cmp(&run.log.stop_events[b].time)
        });
    }

    let mut grids: Vec<Option<EdgeGrid>> = vec![None; net.tracks().len()];
    for e in order {
        let track = net.track(e);
        let (dt, cells) = match params.dt {
            Some(dt) => {
                let k = (track.length * params.cfl / (track.velocity * dt) - 1e-9)
                    .ceil()
                    .max(1.0);
                (dt, k as usize)
            }
            None => {
                let dx = track.length / params.cells as f64;
                (dx * params.cfl / track.velocity, params.cells)
            }
        };
        let dx = track.length / cells as f64;
        let mut courant = track.velocity * dt / dx;
        if (courant - 1.0).abs() < 1e-12 {
            courant = 1.0;
        }
        if courant > 1.0 {
            return Err(UpwindError::Cfl {
                edge: track.id.clone(),
                cfl: courant,
            });
        }
        let steps = (run.horizon / dt - 1e-9).ceil().max(0.0) as usize;

        let mut inflow = vec![0.0; steps + 1];
        let mut injected = 0.0;
        for &(t, m) in &injections[e.0] {
            let b = bin(t, dt);
            if b < steps {
                inflow[b] += m;
                injected += m;
            }
        }

        let mut m = vec![0.0; cells + 1];
        let mut content = Vec::with_capacity(steps + 1);
        let mut outflow = vec![0.0; steps + 1];
        let mut snapshots = Vec::new();
        let mut min_value = 0.0f64;
        content.push(0.0);
        for j in 0..steps {
            if params.snapshot_every > 0 && j % params.snapshot_every == 0 {
                snapshots.push((j, m[1..].to_vec()));
            }
            m[0] = inflow[j] / courant;
            outflow[j] = courant * m[cells];
            for i in (1..=cells).rev() {
                m[i] -= courant * (m[i] - m[i - 1]);
            }
            let low = m[1..].iter().copied().fold(f64::INFINITY, f64::min);
            min_value = min_value.min(low);
            content.push(m[1..].iter().sum());
        }

        // Forward the outflow through the head vertex.
        if let Some(events) = arrivals_on.get(&e.0) {
            for (j, &mass) in outflow.iter().enumerate() {
                if mass == 0.0 {
                    continue;
                }
                let t = j as f64 * dt;
                let k = nearest(events, t, |k| run.log.stop_events[k].time);
                let ev = &run.log.stop_events[k];
                let Some(out) = ev.out_edge else { continue };
                let remaining = mass - ev.alight_fraction * mass;
                injections[out.0].push((t + (ev.departure - ev.time), remaining));
            }
        }

        grids[e.0] = Some(EdgeGrid {
            edge: e,
            dx,
            dt,
            courant,
            cells,
            content,
            outflow,
            injected,
            snapshots,
            min_value,
        });
    }
    Ok(GridField {
        edges: grids
            .into_iter()
            .map(|g| g.expect("every edge visited"))
            .collect(),
    })
}

fn nearest(sorted: &[usize], t: f64, time: impl Fn(usize) -> f64) -> usize {
    let pos = sorted.partition_point(|&k| time(k) < t);
    match (pos.checked_sub(1), sorted.get(pos)) {
        (Some(lo), Some(&hi)) => {
            if t - time(sorted[lo]) <= time(hi) - t {
                sorted[lo]
            } else {
                hi
            }
        }
        (Some(lo), None) => sorted[lo],
        (None, Some(&hi)) => hi,
        (None, None) => unreachable!("arrival list is never empty"),
    }
}

/// Exact mass on `edge` after each of `steps` grid steps of size `dt`: a
/// traversal counts at step `j` when `entry_bin < j <= exit_bin`.
pub fn exact_edge_content(run: &ExactRun, edge: EdgeIdx, dt: f64, steps: usize) -> Vec<f64> {
    let mut diff = vec![0.0; steps + 2];
    for seg in run.segments.iter().filter(|s| s.edge == edge) {
        let lo = bin(seg.entry, dt) + 1;
        let hi = bin(seg.exit, dt).min(steps);
        if lo <= hi {
            diff[lo] += seg.onboard;
            diff[hi + 1] -= seg.onboard;
        }
    }
    let mut out = Vec::with_capacity(steps + 1);
    let mut acc = 0.0;
    for d in diff.iter().take(steps + 1) {
        acc += d;
        out.push(acc);
    }
    out
}

/// Mass-weighted mean exit time of the exact traversals of `edge` that
/// finish within the horizon.
pub fn exact_exit_centroid(run: &ExactRun, edge: EdgeIdx) -> Option<f64> {
    let (num, den) = run
        .segments
        .iter()
        .filter(|s| s.edge == edge && s.exit <= run.horizon)
        .fold((0.0, 0.0), |(n, d), s| {
            (n + s.exit * s.onboard, d + s.onboard)
        });
    (den > 0.0).then(|| num / den)
}
