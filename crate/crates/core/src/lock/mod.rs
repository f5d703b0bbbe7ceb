//! Pound-Drever-Hall locking of the OPO cavity.
//!
//! The cavity is reduced to a single Fabry-Perot response seen by the
//! modulated field; the piezo actuator shifts the resonance instantly
//! within its output limits.

mod pdh;
mod pid;
mod sim;

pub use pdh::{CavityResponse, ModulationSource};
pub use pid::{PidGains, PidState};
pub use sim::{simulate_lock, DisturbanceModel, LockSample, LockSummary, LockTrace};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LockError {
    #[error("invalid lock parameter: {0}")]
    InvalidParameter(String),
}
