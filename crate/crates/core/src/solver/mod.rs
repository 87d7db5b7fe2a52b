//! Transport solvers: the exact event-driven push-forward solver, the
//! upwind grid solver used for cross-checking, and the mass-balance audit.

pub mod audit;
pub mod exact;
pub mod upwind;

pub use audit::{mass_balance_audit, BalanceReport};
pub use exact::{run_exact, EventLog, ExactOptions, ExactRun, SolverError};
pub use upwind::{run_upwind, GridField, GridParams, UpwindError};
