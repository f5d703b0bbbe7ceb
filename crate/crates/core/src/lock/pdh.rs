use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::LockError;
use crate::opo::OpoConfig;

/// Field response of a two-mirror cavity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CavityResponse {
    /// Input/output coupler field reflectivity.
    pub r1: f64,
    /// Back-face field reflectivity.
    pub r2: f64,
    pub round_trip_amplitude_loss: f64,
    /// Free spectral range, Hz.
    pub fsr: f64,
}

impl CavityResponse {
    pub fn new(
        r1: f64,
        r2: f64,
        round_trip_amplitude_loss: f64,
        fsr: f64,
    ) -> Result<Self, LockError> {
        let cav = Self {
            r1,
            r2,
            round_trip_amplitude_loss,
            fsr,
        };
        cav.validate()?;
        Ok(cav)
    }

    /// Coupler `r1 = sqrt(1 - t1)`; the dissipative budget is lumped into
    /// the back-face reflectivity `r2 = sqrt(1 - l_diss)`.
    pub fn from_opo(cfg: &OpoConfig) -> Result<Self, LockError> {
        Self::new(
            (1.0 - cfg.t1).sqrt(),
            (1.0 - cfg.l_diss).sqrt(),
            0.0,
            cfg.linewidth().fsr,
        )
    }

    pub fn validate(&self) -> Result<(), LockError> {
        let ok = self.r1 > 0.0
            && self.r1 < 1.0
            && self.r2 > 0.0
            && self.r2 < 1.0
            && (0.0..1.0).contains(&self.round_trip_amplitude_loss)
            && self.fsr > 0.0;
        if !ok {
            return Err(LockError::InvalidParameter(format!(
                "cavity needs 0 < r1, r2 < 1, loss in [0, 1), fsr > 0; got {self:?}"
            )));
        }
        Ok(())
    }

    fn round_trip_amplitude(&self) -> f64 {
        1.0 - self.round_trip_amplitude_loss
    }

    fn product(&self) -> f64 {
        self.r1 * self.r2 * self.round_trip_amplitude()
    }

    /// Resonance full width at half maximum, Hz.
    pub fn fwhm(&self) -> f64 {
        let r = self.product();
        self.fsr / PI * 2.0 * ((1.0 - r) / (2.0 * r.sqrt())).asin()
    }

    pub fn finesse(&self) -> f64 {
        self.fsr / self.fwhm()
    }

    /// Reflected field `F(δ) = (r1 - a r2 e^{iδ}) / (1 - r1 r2 a e^{iδ})`
    /// for round-trip phase `δ`.
    pub fn reflection(&self, delta: f64) -> Complex64 {
        let e = Complex64::from_polar(1.0, delta);
        let a = self.round_trip_amplitude();
        (self.r1 - a * self.r2 * e) / (1.0 - self.product() * e)
    }

    /// dF/dδ.
    fn reflection_derivative(&self, delta: f64) -> Complex64 {
        let e = Complex64::from_polar(1.0, delta);
        let a = self.round_trip_amplitude();
        let den = 1.0 - self.product() * e;
        Complex64::i() * a * self.r2 * e * (self.r1 * self.r1 - 1.0) / (den * den)
    }

    fn intracavity_power(&self, delta: f64) -> f64 {
        let e = Complex64::from_polar(1.0, delta);
        (1.0 - self.r1 * self.r1) / (1.0 - self.product() * e).norm_sqr()
    }

    /// Power leaving through the back face, per unit incident power.
    pub fn transmitted_power(&self, delta: f64) -> f64 {
        self.intracavity_power(delta) * (1.0 - self.r2 * self.r2)
    }

    /// Power lost to the round-trip amplitude loss, per unit incident power.
    pub fn dissipated_power(&self, delta: f64) -> f64 {
        let a = self.round_trip_amplitude();
        self.intracavity_power(delta) * self.r2 * self.r2 * (1.0 - a * a)
    }

    /// Round-trip phase for a detuning in Hz.
    pub fn phase(&self, detuning_hz: f64) -> f64 {
        2.0 * PI * detuning_hz / self.fsr
    }

    /// PDH discriminant at `detuning_hz`, in units of the incident power.
    pub fn pdh_error(&self, modulation: &ModulationSource, detuning_hz: f64) -> f64 {
        let d = self.phase(detuning_hz);
        let dm = self.phase(modulation.frequency);
        let g = self.reflection(d) * self.reflection(d + dm).conj()
            - self.reflection(d).conj() * self.reflection(d - dm);
        modulation.sideband_product() * g.im
    }

    /// d(pdh_error)/d(detuning), per Hz.
    pub fn pdh_slope(&self, modulation: &ModulationSource, detuning_hz: f64) -> f64 {
        let d = self.phase(detuning_hz);
        let dm = self.phase(modulation.frequency);
        let (f0, fp, fm) = (
            self.reflection(d),
            self.reflection(d + dm),
            self.reflection(d - dm),
        );
        let (g0, gp, gm) = (
            self.reflection_derivative(d),
            self.reflection_derivative(d + dm),
            self.reflection_derivative(d - dm),
        );
        let dg = g0 * fp.conj() + f0 * gp.conj() - g0.conj() * fm - f0.conj() * gm;
        modulation.sideband_product() * dg.im * 2.0 * PI / self.fsr
    }
}

/// Phase modulation applied to the pump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModulationSource {
    /// Hz
    pub frequency: f64,
    /// Modulation depth β, rad.
    #[serde(default = "default_depth")]
    pub depth: f64,
}

fn default_depth() -> f64 {
    0.1
}

impl ModulationSource {
    pub fn validate(&self) -> Result<(), LockError> {
        if !(self.frequency > 0.0) || !(self.depth > 0.0 && self.depth < 0.5) {
            return Err(LockError::InvalidParameter(format!(
                "modulation needs frequency > 0 and 0 < depth < 0.5, got {self:?}"
            )));
        }
        Ok(())
    }

    /// `2 J0(β) J1(β)`, the carrier-sideband beat amplitude.
    fn sideband_product(&self) -> f64 {
        2.0 * bessel_j(0, self.depth) * bessel_j(1, self.depth)
    }
}

/// Power series for J_n(x); adequate for |x| < 1.
fn bessel_j(n: u32, x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = half.powi(n as i32) / (1..=n).map(f64::from).product::<f64>();
    let mut sum = term;
    for k in 1..20 {
        term *= -half * half / (k as f64 * (k + n) as f64);
        sum += term;
    }
    sum
}
