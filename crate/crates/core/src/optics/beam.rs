use std::f64::consts::PI;

use num_complex::Complex64;

use super::{OpticsError, RayMatrix};

/// Complex Gaussian beam parameter `q = z + i z_R`.
///
/// `Re(q)` is the distance past the waist and `Im(q)` the Rayleigh range of
/// the embedded (M² = 1) Gaussian. The beam-quality factor only scales the
/// reported radii: `w_real = w_embedded * sqrt(m2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamParameter {
    pub q: Complex64,
    pub wavelength: f64,
    pub m2: f64,
}

impl BeamParameter {
    pub fn new(q: Complex64, wavelength: f64) -> Result<Self, OpticsError> {
        Self::with_m2(q, wavelength, 1.0)
    }

    pub fn with_m2(q: Complex64, wavelength: f64, m2: f64) -> Result<Self, OpticsError> {
        let beam = Self { q, wavelength, m2 };
        beam.validate()?;
        Ok(beam)
    }

    /// Beam with embedded waist radius `w0` located `distance` before this plane.
    pub fn from_waist(w0: f64, distance: f64, wavelength: f64) -> Result<Self, OpticsError> {
        if !(w0 > 0.0) {
            return Err(OpticsError::NonPhysicalBeam(format!(
                "waist radius must be positive, got {w0}"
            )));
        }
        let z_r = PI * w0 * w0 / wavelength;
        Self::new(Complex64::new(distance, z_r), wavelength)
    }

    pub fn validate(&self) -> Result<(), OpticsError> {
        if !(self.q.im > 0.0) || !self.q.re.is_finite() || !self.q.im.is_finite() {
            return Err(OpticsError::NonPhysicalBeam(format!(
                "Im(q) must be positive, got q = {}",
                self.q
            )));
        }
        if !(self.wavelength > 0.0) {
            return Err(OpticsError::NonPhysicalBeam(format!(
                "wavelength must be positive, got {}",
                self.wavelength
            )));
        }
        if !(self.m2 >= 1.0) {
            return Err(OpticsError::NonPhysicalBeam(format!(
                "M² must be >= 1, got {}",
                self.m2
            )));
        }
        Ok(())
    }

    pub fn rayleigh_range(&self) -> f64 {
        self.q.im
    }

    /// Signed distance from the waist to this plane.
    pub fn distance_from_waist(&self) -> f64 {
        self.q.re
    }

    /// Embedded-Gaussian 1/e² waist radius.
    pub fn waist_radius(&self) -> f64 {
        (self.wavelength * self.q.im / PI).sqrt()
    }

    /// Embedded-Gaussian 1/e² radius at this plane.
    pub fn radius(&self) -> f64 {
        let inv = self.q.inv();
        (-self.wavelength / (PI * inv.im)).sqrt()
    }

    /// Radius of the real (M² > 1) beam at this plane.
    pub fn reported_radius(&self) -> f64 {
        self.radius() * self.m2.sqrt()
    }

    /// Waist radius of the real beam.
    pub fn reported_waist_radius(&self) -> f64 {
        self.waist_radius() * self.m2.sqrt()
    }

    /// Far-field half-angle divergence of the embedded Gaussian, rad.
    pub fn divergence(&self) -> f64 {
        self.wavelength / (PI * self.waist_radius())
    }

    /// Apply `q' = (a q + b) / (c q + d)`.
    pub fn propagate(&self, m: &RayMatrix) -> Result<Self, OpticsError> {
        let den = m.c * self.q + m.d;
        if den.norm() <= f64::EPSILON * (m.c.abs() * self.q.norm() + m.d.abs()) {
            return Err(OpticsError::PropagationSingularity);
        }
        let q = (m.a * self.q + m.b) / den;
        Self::with_m2(q, self.wavelength, self.m2)
    }
}

/// Power coupling between two fundamental Gaussian modes at a common plane,
/// `4 Im(q1) Im(q2) / |conj(q1) - q2|²`.
pub fn mode_match_overlap(q1: &BeamParameter, q2: &BeamParameter) -> Result<f64, OpticsError> {
    q1.validate()?;
    q2.validate()?;
    let rel = (q1.wavelength - q2.wavelength).abs() / q1.wavelength;
    if rel > 1e-9 {
        return Err(OpticsError::IncompatibleBeams(q1.wavelength, q2.wavelength));
    }
    let den = (q1.q.conj() - q2.q).norm_sqr();
    Ok((4.0 * q1.q.im * q2.q.im / den).min(1.0))
}
