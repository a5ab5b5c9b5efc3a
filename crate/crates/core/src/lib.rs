//! Multi-area interchange scheduling under uncertain net load.
//!
//! Each balancing area clears its own DC economic dispatch with the
//! interchange fixed at proxy buses. The schedulers move one interface at a
//! time to the point where the expected proxy prices on both sides meet.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dispatch;
pub mod netmodel;
pub mod oracle;
pub mod qp;
pub mod report;
pub mod scheduler;
pub mod stochastic;

pub use dispatch::{solve_dispatch, DispatchError, DispatchSolution};
pub use netmodel::{load_case, parse_case, Case, CaseError, CaseSystem, Network};
pub use qp::{solve_qp, QpError, QpSolution, QuadraticProgram};
pub use scheduler::{run_aibis, run_ce, run_sibis, Mode, ScheduleError, ScheduleTrace, SchedulerConfig, Status};
pub use stochastic::{sample_scenarios, NetLoadModel, ScenarioSet};
