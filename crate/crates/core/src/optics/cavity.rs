use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{BeamParameter, OpticalElement, OpticsError, Plane, RayMatrix};

/// One full round trip of a ring resonator, starting at a reference plane.
#[derive(Debug, Clone, PartialEq)]
pub struct RingCavity {
    pub elements: Vec<OpticalElement>,
    pub wavelength: f64,
}

impl RingCavity {
    pub fn new(elements: Vec<OpticalElement>, wavelength: f64) -> Result<Self, OpticsError> {
        for el in &elements {
            el.validate()?;
        }
        if !(wavelength > 0.0) {
            return Err(OpticsError::InvalidElement(format!(
                "cavity wavelength must be positive, got {wavelength}"
            )));
        }
        Ok(Self {
            elements,
            wavelength,
        })
    }

    pub fn round_trip(&self, plane: Plane) -> Result<RayMatrix, OpticsError> {
        RayMatrix::chain(&self.elements, plane)
    }

    /// Geometric round-trip length.
    pub fn length(&self) -> f64 {
        self.elements.iter().map(OpticalElement::length).sum()
    }

    /// Half trace of the round-trip matrix; stable iff its magnitude is below one.
    pub fn stability(&self, plane: Plane) -> Result<f64, OpticsError> {
        Ok(self.round_trip(plane)?.half_trace())
    }

    /// Self-consistent beam at the reference plane.
    pub fn eigenmode(&self, plane: Plane) -> Result<BeamParameter, OpticsError> {
        let m = self.round_trip(plane)?;
        let half = m.half_trace();
        if !(half.abs() < 1.0) {
            return Err(OpticsError::Unstable {
                plane,
                half_trace_abs: half.abs(),
            });
        }
        // c q² + (d - a) q - b = 0, discriminant 4(m² - 1) < 0
        let im = (1.0 - half * half).sqrt() / m.c.abs();
        let q = Complex64::new((m.a - m.d) / (2.0 * m.c), im);
        BeamParameter::new(q, self.wavelength)
    }

    /// Eigenmode carried past the first `after` elements.
    pub fn beam_at(&self, plane: Plane, after: usize) -> Result<BeamParameter, OpticsError> {
        if after > self.elements.len() {
            return Err(OpticsError::InvalidElement(format!(
                "plane after element {after} but cavity has {} elements",
                self.elements.len()
            )));
        }
        let m = RayMatrix::chain(&self.elements[..after], plane)?;
        self.eigenmode(plane)?.propagate(&m)
    }
}

/// Pump-induced thermal lens, `f = k_thermal / P_absorbed`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermalLensModel {
    /// W·m
    pub k_thermal: f64,
}

impl ThermalLensModel {
    pub fn new(k_thermal: f64) -> Result<Self, OpticsError> {
        if !(k_thermal > 0.0 && k_thermal.is_finite()) {
            return Err(OpticsError::InvalidElement(format!(
                "thermal lens coefficient must be positive, got {k_thermal}"
            )));
        }
        Ok(Self { k_thermal })
    }

    /// Coefficient that reproduces focal length `f` at absorbed power `p`.
    pub fn calibrated(focal_length: f64, absorbed_pump: f64) -> Result<Self, OpticsError> {
        Self::new(focal_length * absorbed_pump)
    }

    pub fn focal_length(&self, absorbed_pump: f64) -> Result<f64, OpticsError> {
        if !(absorbed_pump > 0.0) {
            return Err(OpticsError::NonPositivePump(absorbed_pump));
        }
        Ok(self.k_thermal / absorbed_pump)
    }

    pub fn lens(&self, absorbed_pump: f64) -> Result<OpticalElement, OpticsError> {
        Ok(OpticalElement::ThinLens {
            f: self.focal_length(absorbed_pump)?,
        })
    }
}
