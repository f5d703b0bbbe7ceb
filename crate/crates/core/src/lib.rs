//! Design and noise simulation of a diode-pumped, frequency-doubled laser
//! driving a triply resonant nondegenerate OPO, and the balanced detection
//! of the resulting twin beams.
//!
//! The crate is organised along the optical chain:
//!
//! - [`optics`]: ABCD matrices, Gaussian beams, ring-cavity eigenmodes.
//! - [`laser`]: steady-state green output of the intracavity-doubled laser.
//! - [`opo`]: loss budget, linewidth and intensity-difference squeezing.
//! - [`lock`]: Pound-Drever-Hall discriminant and a discrete PID lock loop.
//! - [`bench`]: Monte-Carlo photocurrent synthesis and Welch spectra.
//! - [`sweep`] and [`scenario`]: design sweeps and the JSON scenario format.
//! - [`commands`]: the analyses behind the `twinbeam` binary.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod commands;
pub mod error;
pub mod laser;
pub mod lock;
pub mod opo;
pub mod optics;
pub mod output;
pub mod scenario;
pub mod spectrum;
pub mod sweep;
pub mod units;

pub use error::{Error, Result};
