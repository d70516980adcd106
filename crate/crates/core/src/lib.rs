//! Single-track train timetabling with Monte Carlo tree search.
//!
//! An occupancy-matrix simulator turns a sequence of dwell-time decisions
//! into a timetable (or a conflict). The planners search over those
//! sequences with UCT and its best-value variants, optionally scoring failed
//! rollouts by how far they got, and optionally warming new tree nodes with a
//! convolutional value network.

pub mod dataset;
pub mod error;
pub mod instance;
pub mod oracle;
pub mod planner;
pub mod sim;
pub mod timetable;
pub mod vaf;
pub mod validate;

pub use error::{Error, Result};
pub use instance::{Instance, Minutes};
pub use sim::{SimState, Simulator, Status};
pub use timetable::Timetable;
pub use validate::{validate_timetable, ValidationReport};
pub use planner::{solve, PlannerConfig, SolveResult, Variant};
