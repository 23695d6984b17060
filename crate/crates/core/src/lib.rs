//! Joint radio (OFDMA power/subcarrier) and NFV (placement/scheduling) resource
//! allocation with elastic admission control.
//!
//! The crate is `no_std` (with `alloc`): every solver here is a pure function
//! of its inputs. File formats, the command line and the Monte Carlo runner
//! live in the `ranfv` companion crate.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod baselines;
pub mod error;
mod math;
pub mod metrics;
pub mod nfv;
pub mod oracle;
pub mod orchestrator;
pub mod radio;
pub mod scenario;

pub use error::Error;
pub use math::mix_seed;
pub use nfv::{ScheduleAssignment, ScheduleReport, TaskRef};
pub use orchestrator::{CostBreakdown, CostWeights, SolveOptions, SolveResult};
pub use radio::{PowerSolveOutcome, RadioAllocation};
pub use scenario::{NetworkScenario, ScenarioConfig};

pub type Result<T, E = Error> = core::result::Result<T, E>;
