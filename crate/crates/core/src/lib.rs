//! Fluid model of sharing one unit-capacity processor among N queues.
//!
//! * [`fluid_model`]: closed-form local predictions of queue size, delay and
//!   drops for one pipe over the update horizon.
//! * [`state_analysis`]: feasibility criteria and steadiness of a whole
//!   system state, and the box of uniform confined allocations.
//! * [`optimizer`]: allocation solvers with independent oracles and
//!   optimality certificates.
//! * [`simulator`]: epoch-based evaluation of allocation policies on traces.

pub mod error;
pub mod fluid_model;
pub mod optimizer;
pub mod simulator;
pub mod state_analysis;

pub use error::{Error, Infeasibility, Result};
pub use fluid_model::{Allocation, BehaviorCase, PipePrediction, PipeState, SystemState};
pub use state_analysis::{classify_state, feasible_box, FeasibleBox, StateClass};
