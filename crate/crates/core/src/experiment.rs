//! A fully specified simulation setup and the single-run / replicated
//! entry points built on it.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{DemandMode, DemandTables, DynamicsError};
use crate::metrics::{monte_carlo, MonteCarloReport, RunSummary};
use crate::network::{
    validate_schedule, AdmissibilityReport, QueueLayout, StopIdx, Timetable, TramNetwork,
};
use crate::scenarios::{
    apply_cancellations, build_frequency_scenario, disruption_rng, inject_failures, shift_line,
    DisruptionPlan, DwellDelayModel, ScenarioError,
};
use crate::service::{expand_services, LineService, ServiceError};
use crate::solver::{
    mass_balance_audit, run_exact, BalanceReport, ExactOptions, ExactRun, SolverError,
};

/// Sampling step of exported tram positions, minutes.
pub const TRAJECTORY_STEP: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RunError {
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Service(#[from] ServiceError),
    #[error("mass balance audit failed (max residual {0:e})")]
    Audit(f64),
}

#[derive(Debug, Clone)]
pub struct Experiment {
    pub name: String,
    pub network: TramNetwork,
    /// Line services the timetable was expanded from; empty when trips
    /// were listed explicitly.
    pub services: Vec<LineService>,
    pub timetable: Timetable,
    pub layout: QueueLayout,
    pub demand: DemandTables,
    pub measurement_stop: Option<StopIdx>,
}

impl Experiment {
    pub fn horizon(&self) -> f64 {
        self.timetable.horizon
    }

    pub fn validate(&self) -> AdmissibilityReport {
        validate_schedule(&self.network, &self.timetable)
    }

    /// Same experiment with every peak period at `headway` minutes.
    pub fn with_headway(&self, headway: f64) -> Result<Experiment, RunError> {
        let timetable =
            build_frequency_scenario(&self.network, &self.services, headway, self.horizon())?;
        let services = self
            .services
            .iter()
            .map(|s| s.with_peak_headway(headway))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Experiment {
            services,
            timetable,
            ..self.clone()
        })
    }

    /// Same experiment with one line's departures moved by `minutes`.
    pub fn with_shift(&self, line: &str, minutes: f64) -> Result<Experiment, RunError> {
        let services = shift_line(&self.services, line, minutes)?;
        let trips = expand_services(&self.network, &services, self.horizon())?;
        Ok(Experiment {
            services,
            timetable: Timetable {
                trips,
                horizon: self.horizon(),
            },
            ..self.clone()
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub dwell: Option<DwellDelayModel>,
    pub disruption: DisruptionPlan,
    pub demand_mode: DemandMode,
    pub record_trajectories: bool,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub summary: RunSummary,
    pub run: ExactRun,
    pub audit: BalanceReport,
    /// Timetable after cancellations.
    pub timetable: Timetable,
}

/// Simulate one day: cancel, draw failures, draw passengers, solve.
pub fn run_once(
    exp: &Experiment,
    cfg: &RunConfig,
    master_seed: u64,
    run: u64,
) -> Result<RunOutcome, RunError> {
    let plan = &cfg.disruption;
    plan.check()?;
    let timetable = if plan.cancellation_rate > 0.0 {
        let mut rng = disruption_rng(plan, master_seed, run, "cancellations");
        apply_cancellations(&exp.timetable, plan.cancellation_rate, &mut rng)?
    } else {
        exp.timetable.clone()
    };
    let cancelled = exp.timetable.trips.len() - timetable.trips.len();
    let mut rng = disruption_rng(plan, master_seed, run, "failures");
    let failures = inject_failures(&plan.failures, &timetable, &mut rng)?;

    let streams = exp.demand.realize(
        &exp.network,
        &exp.layout,
        exp.horizon(),
        cfg.demand_mode,
        master_seed,
        run,
    )?;
    let initial = exp.demand.initial_queue_vector(&exp.layout)?;
    let options = ExactOptions {
        dwell: cfg.dwell,
        failures,
        measurement_stop: exp.measurement_stop,
        trajectory_step: cfg.record_trajectories.then_some(TRAJECTORY_STEP),
    };
    let result = run_exact(
        &exp.network,
        &timetable,
        &exp.layout,
        &exp.demand,
        &streams,
        &initial,
        &options,
    )?;
    let audit = mass_balance_audit(&result.log);
    let mut summary = RunSummary::from_run(&exp.network, run, &result, audit.max_residual());
    summary.cancelled_trips = cancelled;
    Ok(RunOutcome {
        summary,
        run: result,
        audit,
        timetable,
    })
}

/// `runs` independent replications under `master_seed`. A run whose audit
/// fails is counted as failed.
pub fn replicate(
    exp: &Experiment,
    cfg: &RunConfig,
    runs: u64,
    master_seed: u64,
) -> MonteCarloReport {
    let cfg = RunConfig {
        record_trajectories: false,
        ..cfg.clone()
    };
    monte_carlo(runs, master_seed, |run| {
        let outcome = run_once(exp, &cfg, master_seed, run).map_err(|e| e.to_string())?;
        if !outcome.audit.passed() {
            return Err(RunError::Audit(outcome.audit.max_residual()).to_string());
        }
        Ok(outcome.summary)
    })
}
