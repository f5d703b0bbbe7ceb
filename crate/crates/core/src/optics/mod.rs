//! Paraxial Gaussian-beam optics: ray-transfer matrices, the complex beam
//! parameter, ring-cavity eigenmodes and the pump-induced thermal lens.

mod beam;
mod cavity;
mod matrix;

pub use beam::{mode_match_overlap, BeamParameter};
pub use cavity::{RingCavity, ThermalLensModel};
pub use matrix::{OpticalElement, Plane, RayMatrix};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OpticsError {
    #[error("invalid optical element: {0}")]
    InvalidElement(String),

    #[error("beam parameter singular after propagation (c*q + d = 0)")]
    PropagationSingularity,

    #[error("non-physical beam: {0}")]
    NonPhysicalBeam(String),

    #[error("cavity unstable in {plane} plane: |(a+d)/2| = {half_trace_abs}")]
    Unstable { plane: Plane, half_trace_abs: f64 },

    #[error("beams have different wavelengths ({0} m vs {1} m)")]
    IncompatibleBeams(f64, f64),

    #[error("absorbed pump power must be positive, got {0} W")]
    NonPositivePump(f64),
}
