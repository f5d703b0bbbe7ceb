//! Triply resonant nondegenerate OPO: loss budget, cavity linewidth,
//! threshold and conversion, and the intensity-difference noise spectrum.
//!
//! All frequencies are ordinary (not angular) frequencies in Hz. The
//! intensity-difference spectrum at the OPO output, normalised to shot
//! noise and seen through a detection efficiency `η_det`, is
//!
//! ```text
//! S(Ω) = 1 - η_det η_esc / (1 + (Ω / Ω_c)²),   Ω_c = FWHM / 2
//! ```

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spectrum::{NoiseSpectrum, SpectrumError};
use crate::units::SPEED_OF_LIGHT;

/// KTP refractive index near 1080 nm used when a config does not override it.
pub const KTP_INDEX_1080: f64 = 1.83;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OpoError {
    #[error("invalid OPO parameter `{field}`: {message}")]
    InvalidParameter {
        field: &'static str,
        message: String,
    },

    #[error("OPO threshold not calibrated")]
    MissingThreshold,

    #[error("wavelengths violate energy conservation (relative error {0:.3e} > 1e-4)")]
    EnergyConservation(f64),

    #[error("measured PSD {measured} is below the loss floor 1 - η = {floor}; inferred PSD would be negative")]
    Unphysical { measured: f64, floor: f64 },

    #[error("invalid detection chain: {0}")]
    InvalidDetection(String),
}

fn default_index() -> f64 {
    KTP_INDEX_1080
}

/// Semimonolithic NOPO description. Lengths in metres, powers in watts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpoConfig {
    /// Output-coupler intensity transmission at the signal/idler wavelength.
    pub t1: f64,
    /// Coupler transmission at the pump wavelength (carried, not used by the spectrum).
    pub t2_pump: f64,
    /// Round-trip dissipative loss at the signal/idler wavelength.
    pub l_diss: f64,
    pub crystal_length: f64,
    #[serde(default = "default_index")]
    pub crystal_index: f64,
    pub air_gap: f64,
    pub pump_wavelength: f64,
    pub signal_wavelength: f64,
    pub idler_wavelength: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_threshold: Option<f64>,
}

impl OpoConfig {
    pub fn validate(&self) -> Result<(), OpoError> {
        let bad = |field: &'static str, message: String| {
            Err(OpoError::InvalidParameter { field, message })
        };
        if !(self.t1 > 0.0 && self.t1 < 1.0) {
            return bad("t1", format!("must lie in (0, 1), got {}", self.t1));
        }
        if !(self.t2_pump >= 0.0 && self.t2_pump <= 1.0) {
            return bad(
                "t2_pump",
                format!("must lie in [0, 1], got {}", self.t2_pump),
            );
        }
        if !(self.l_diss >= 0.0 && self.l_diss < 1.0) {
            return bad("l_diss", format!("must lie in [0, 1), got {}", self.l_diss));
        }
        if !(self.t1 + self.l_diss < 1.0) {
            return bad("l_diss", "t1 + l_diss must be below 1".into());
        }
        if !(self.crystal_index >= 1.0) {
            return bad(
                "crystal_index",
                format!("must be >= 1, got {}", self.crystal_index),
            );
        }
        if !(self.crystal_length >= 0.0) || !(self.air_gap >= 0.0) {
            return bad("air_gap", "lengths must be non-negative".into());
        }
        if self.optical_length() <= 0.0 {
            return bad("air_gap", "cavity optical length must be positive".into());
        }
        for (field, v) in [
            ("pump_wavelength", self.pump_wavelength),
            ("signal_wavelength", self.signal_wavelength),
            ("idler_wavelength", self.idler_wavelength),
        ] {
            if !(v > 0.0) {
                return bad(field, format!("must be positive, got {v}"));
            }
        }
        if let Some(p) = self.p_threshold {
            if !(p > 0.0) {
                return bad("p_threshold", format!("must be positive, got {p}"));
            }
        }
        let err = self.energy_conservation_error();
        if err >= 1e-4 {
            return Err(OpoError::EnergyConservation(err));
        }
        Ok(())
    }

    /// Total round-trip loss at the signal/idler wavelength.
    pub fn total_loss(&self) -> f64 {
        self.t1 + self.l_diss
    }

    /// Fraction of the intracavity loss that leaves through the coupler.
    pub fn escape_efficiency(&self) -> f64 {
        self.t1 / (self.t1 + self.l_diss)
    }

    /// One-way optical length of the linear cavity.
    pub fn optical_length(&self) -> f64 {
        self.air_gap + self.crystal_index * self.crystal_length
    }

    pub fn linewidth(&self) -> CavityLinewidth {
        let fsr = SPEED_OF_LIGHT / (2.0 * self.optical_length());
        let finesse = 2.0 * std::f64::consts::PI / self.total_loss();
        let fwhm = fsr / finesse;
        CavityLinewidth {
            fsr,
            finesse,
            fwhm,
            half_width: fwhm / 2.0,
        }
    }

    /// Normalised intensity-difference PSD at `freq` after detection efficiency `eta_det`.
    pub fn squeezing(&self, eta_det: f64, freq: f64) -> f64 {
        let omega_c = self.linewidth().half_width;
        1.0 - eta_det * self.escape_efficiency() / (1.0 + (freq / omega_c).powi(2))
    }

    /// [`OpoConfig::squeezing`] with the efficiency of a detection chain.
    pub fn squeezing_spectrum(&self, det: &DetectionChain, freq: f64) -> f64 {
        self.squeezing(det.total_efficiency(), freq)
    }

    pub fn spectrum(
        &self,
        eta_det: f64,
        frequencies: Vec<f64>,
    ) -> Result<NoiseSpectrum, SpectrumError> {
        NoiseSpectrum::from_fn(frequencies, |f| self.squeezing(eta_det, f))
    }

    /// `|1/λs + 1/λi - 1/λp| / (1/λp)`.
    pub fn energy_conservation_error(&self) -> f64 {
        let inv_p = 1.0 / self.pump_wavelength;
        (1.0 / self.signal_wavelength + 1.0 / self.idler_wavelength - inv_p).abs() / inv_p
    }

    pub fn threshold(&self) -> Result<f64, OpoError> {
        self.p_threshold.ok_or(OpoError::MissingThreshold)
    }

    /// Power conversion of pump into signal plus idler with pump depletion,
    /// `η_esc (4/σ)(sqrt(σ) - 1)` for `σ = pump / threshold > 1`.
    pub fn conversion_efficiency(&self, pump: f64) -> Result<f64, OpoError> {
        let sigma = pump / self.threshold()?;
        if !(sigma > 1.0) {
            return Ok(0.0);
        }
        let depletion = 4.0 / sigma * (sigma.sqrt() - 1.0);
        Ok((self.escape_efficiency() * depletion).clamp(0.0, 1.0))
    }

    /// Reporting-only coupling figure `(t1 + l) sqrt(t2 / (4 p_th))`.
    pub fn effective_coupling(&self) -> Result<f64, OpoError> {
        let p_th = self.threshold()?;
        Ok(self.total_loss() * (self.t2_pump / (4.0 * p_th)).sqrt())
    }

    /// Threshold ratio of `self` against `reference` at fixed coupling,
    /// `((t1 + l) / (t1_ref + l_ref))²`.
    pub fn threshold_scale(&self, reference: &OpoConfig) -> f64 {
        (self.total_loss() / reference.total_loss()).powi(2)
    }
}

/// Store a measured oscillation threshold.
pub fn calibrate_threshold(cfg: &OpoConfig, measured_p_th: f64) -> Result<OpoConfig, OpoError> {
    if !(measured_p_th > 0.0 && measured_p_th.is_finite()) {
        return Err(OpoError::InvalidParameter {
            field: "p_threshold",
            message: format!("measured threshold must be positive, got {measured_p_th}"),
        });
    }
    let out = OpoConfig {
        p_threshold: Some(measured_p_th),
        ..cfg.clone()
    };
    out.validate()?;
    Ok(out)
}

/// Shot-noise-normalised PSD after a beam-splitter loss of transmission `eta`.
pub fn apply_loss(s: f64, eta: f64) -> f64 {
    eta * s + 1.0 - eta
}

/// Invert [`apply_loss`]: PSD before a detection chain of efficiency `eta_det`.
pub fn detection_corrected(s_measured: f64, eta_det: f64) -> Result<f64, OpoError> {
    if !(eta_det > 0.0 && eta_det <= 1.0) {
        return Err(OpoError::InvalidDetection(format!(
            "efficiency must lie in (0, 1], got {eta_det}"
        )));
    }
    let floor = 1.0 - eta_det;
    // tolerate round-off at the boundary
    if s_measured < floor - 1e-12 {
        return Err(OpoError::Unphysical {
            measured: s_measured,
            floor,
        });
    }
    Ok(((s_measured - floor) / eta_det).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CavityLinewidth {
    pub fsr: f64,
    pub finesse: f64,
    pub fwhm: f64,
    /// Ω_c = FWHM / 2
    pub half_width: f64,
}

/// Balanced detector pair and subtractor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionChain {
    pub quantum_efficiency: f64,
    pub path_transmission: f64,
    /// Electronic noise of the difference channel relative to shot noise, dB (negative).
    pub electronic_floor_db: f64,
    pub cmrr_db: f64,
    /// Per-detector optical power limit, W.
    pub saturation: f64,
}

impl DetectionChain {
    pub fn validate(&self) -> Result<(), OpoError> {
        let eta = self.total_efficiency();
        if !(eta > 0.0 && eta <= 1.0)
            || !(self.quantum_efficiency > 0.0 && self.quantum_efficiency <= 1.0)
            || !(self.path_transmission > 0.0 && self.path_transmission <= 1.0)
        {
            return Err(OpoError::InvalidDetection(format!(
                "efficiencies must lie in (0, 1], got qe = {}, path = {}",
                self.quantum_efficiency, self.path_transmission
            )));
        }
        if !(self.electronic_floor_db < 0.0) {
            return Err(OpoError::InvalidDetection(format!(
                "electronic floor must be below shot noise, got {} dB",
                self.electronic_floor_db
            )));
        }
        if !(self.cmrr_db >= 0.0) || !(self.saturation > 0.0) {
            return Err(OpoError::InvalidDetection(
                "cmrr_db must be >= 0 and saturation > 0".into(),
            ));
        }
        Ok(())
    }

    pub fn total_efficiency(&self) -> f64 {
        self.quantum_efficiency * self.path_transmission
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::to_db;
    use proptest::prelude::*;

    fn shipped() -> OpoConfig {
        OpoConfig {
            t1: 0.03,
            t2_pump: 0.11,
            l_diss: 0.0036,
            crystal_length: 0.007,
            crystal_index: KTP_INDEX_1080,
            air_gap: 0.023,
            pump_wavelength: 540.0065e-9,
            signal_wavelength: 1080.030e-9,
            idler_wavelength: 1079.996e-9,
            p_threshold: Some(3.7e-3),
        }
    }

    #[test]
    fn reference_config_is_valid() {
        shipped().validate().unwrap();
    }

    #[test]
    fn escape_efficiency_values() {
        assert!((shipped().escape_efficiency() - 0.892_857).abs() < 1e-6);
        let lossless = OpoConfig {
            l_diss: 0.0,
            ..shipped()
        };
        assert_eq!(lossless.escape_efficiency(), 1.0);
        let t5 = OpoConfig {
            t1: 0.05,
            ..shipped()
        };
        assert!((t5.escape_efficiency() - 0.05 / 0.0536).abs() < 1e-15);
        assert!((t5.escape_efficiency() - 0.9328).abs() < 1e-4);
    }

    #[test]
    fn linewidth_of_reference_cavity() {
        let lw = shipped().linewidth();
        let l_opt = 0.023 + 1.83 * 0.007;
        assert!((lw.fsr - 299_792_458.0 / (2.0 * l_opt)).abs() < 1e-3);
        assert!((lw.fsr - 4.19e9).abs() < 0.01e9);
        assert!((lw.finesse - 187.0).abs() < 0.1);
        assert!((lw.fwhm - 22.4e6).abs() < 0.05e6);
        assert!((lw.fwhm / 22e6 - 1.0).abs() < 0.05);
        assert_eq!(lw.half_width, lw.fwhm / 2.0);

        let doubled = OpoConfig {
            t1: 0.0636,
            ..shipped()
        }
        .linewidth();
        assert!((doubled.finesse * 2.0 - lw.finesse).abs() < 1e-9);
        assert!((doubled.fwhm - 2.0 * lw.fwhm).abs() < 1e-3);

        let t5 = OpoConfig {
            t1: 0.05,
            ..shipped()
        }
        .linewidth();
        assert!((t5.fwhm - 35.7e6).abs() < 0.05e6);
    }

    #[test]
    fn squeezing_at_three_megahertz() {
        let cfg = shipped();
        // Ω_c from the geometric linewidth, independently evaluated
        let omega_c = 299_792_458.0 / (2.0 * (0.023 + 1.83 * 0.007)) * 0.0336
            / (2.0 * std::f64::consts::PI)
            / 2.0;
        let expected = 1.0 - (0.03 / 0.0336) / (1.0 + (3e6 / omega_c).powi(2));
        let s = cfg.squeezing(1.0, 3e6);
        assert!((s - expected).abs() < 1e-12);
        assert!((to_db(s) + 7.8).abs() < 0.15, "{} dB", to_db(s));

        let measured = cfg.squeezing(0.90, 3e6);
        assert!((measured - 0.25).abs() < 0.003);
        assert!((to_db(measured) + 5.9).abs() < 0.3);

        assert!(cfg.squeezing(1.0, 1e12) > 1.0 - 1e-9);
        assert_eq!(cfg.squeezing(0.9, 0.0), 1.0 - 0.9 * cfg.escape_efficiency());
    }

    #[test]
    fn detection_correction_values() {
        assert!((detection_corrected(1.0, 0.7).unwrap() - 1.0).abs() < 1e-15);
        let s = 10f64.powf(-0.59);
        let inferred = detection_corrected(s, 0.90).unwrap();
        assert!((inferred - 0.174).abs() < 1e-3);
        assert!((to_db(inferred) + 7.6).abs() < 0.05);
        assert!(detection_corrected(0.1, 0.9).unwrap().abs() < 1e-15);
        assert!(matches!(
            detection_corrected(0.05, 0.9),
            Err(OpoError::Unphysical { .. })
        ));
        assert!(detection_corrected(0.5, 0.0).is_err());
    }

    #[test]
    fn conversion_efficiency_model() {
        let cfg = shipped();
        assert_eq!(cfg.conversion_efficiency(3.7e-3).unwrap(), 0.0);
        assert_eq!(cfg.conversion_efficiency(1e-3).unwrap(), 0.0);
        let at_four = cfg.conversion_efficiency(4.0 * 3.7e-3).unwrap();
        assert!((at_four - cfg.escape_efficiency()).abs() < 1e-12);
        let at_working_point = cfg.conversion_efficiency(18.7e-3).unwrap();
        assert!(
            (at_working_point - 0.88).abs() < 0.005,
            "{at_working_point}"
        );
        let missing = OpoConfig {
            p_threshold: None,
            ..cfg
        };
        assert_eq!(
            missing.conversion_efficiency(0.01),
            Err(OpoError::MissingThreshold)
        );
    }

    #[test]
    fn energy_conservation_gate() {
        let cfg = shipped();
        assert!(cfg.energy_conservation_error() < 1e-5);
        let degenerate = OpoConfig {
            signal_wavelength: 1080e-9,
            idler_wavelength: 1080e-9,
            pump_wavelength: 540e-9,
            ..cfg.clone()
        };
        assert!(degenerate.energy_conservation_error() < 1e-15);
        let shifted = OpoConfig {
            signal_wavelength: 1081.030e-9,
            ..cfg
        };
        let err = shifted.energy_conservation_error();
        // 1/1080.03 - 1/1081.03 relative to 1/540.0065
        let expected = (1.0 / 1080.030 - 1.0 / 1081.030) * 540.0065;
        assert!((err - expected).abs() < 1e-6 * expected);
        assert!(err > 1e-4);
        assert!(matches!(
            shifted.validate(),
            Err(OpoError::EnergyConservation(_))
        ));
    }

    #[test]
    fn threshold_calibration() {
        let cfg = OpoConfig {
            p_threshold: None,
            ..shipped()
        };
        let cal = calibrate_threshold(&cfg, 3.7e-3).unwrap();
        assert_eq!(cal.p_threshold, Some(3.7e-3));
        assert!(cal.effective_coupling().unwrap() > 0.0);
        assert!(calibrate_threshold(&cfg, 0.0).is_err());
        let t5 = OpoConfig {
            t1: 0.05,
            ..cal.clone()
        };
        assert!((t5.threshold_scale(&cal) - 2.545).abs() < 1e-3);
    }

    proptest! {
        #[test]
        fn loss_composition_inverts(s in 0.0..1.0f64, eta in 1e-3..1.0f64) {
            let back = detection_corrected(apply_loss(s, eta), eta).unwrap();
            prop_assert!((back - s).abs() < 1e-9);
        }

        #[test]
        fn spectrum_bounded_and_monotone(f1 in 0.0..1e8f64, df in 0.0..1e8f64, eta in 0.01..1.0f64) {
            let cfg = shipped();
            let (a, b) = (cfg.squeezing(eta, f1), cfg.squeezing(eta, f1 + df));
            let floor = 1.0 - eta * cfg.escape_efficiency();
            prop_assert!(a >= floor - 1e-15 && a <= 1.0);
            prop_assert!(b >= a);
        }

        #[test]
        fn escape_monotone(t1 in 0.001..0.5f64, l in 0.0..0.3f64, dt in 0.0..0.1f64, dl in 0.0..0.1f64) {
            let base = OpoConfig { t1, l_diss: l, ..shipped() };
            let more_t = OpoConfig { t1: t1 + dt, ..base.clone() };
            let more_l = OpoConfig { l_diss: l + dl, ..base.clone() };
            prop_assert!(more_t.escape_efficiency() >= base.escape_efficiency());
            prop_assert!(more_l.escape_efficiency() <= base.escape_efficiency());
        }

        #[test]
        fn conversion_peaks_at_sigma_four(sigma in 1.0..100.0f64) {
            let cfg = shipped();
            let p_th = cfg.p_threshold.unwrap();
            let peak = cfg.conversion_efficiency(4.0 * p_th).unwrap();
            prop_assert!(cfg.conversion_efficiency(sigma * p_th).unwrap() <= peak + 1e-15);
        }
    }
}
