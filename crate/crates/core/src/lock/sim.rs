use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{CavityResponse, LockError, ModulationSource, PidGains, PidState};
use crate::spectrum::fmt_num;

/// Cavity-resonance disturbance seen by the lock, in Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisturbanceModel {
    /// Hz/s
    pub drift_rate: f64,
    /// White frequency jitter, Hz rms per sample.
    pub white_noise_rms: f64,
    #[serde(default)]
    pub initial_detuning: f64,
    /// Taken from the run seed, not from the scenario file.
    #[serde(skip)]
    pub seed: u64,
}

impl DisturbanceModel {
    pub fn validate(&self) -> Result<(), LockError> {
        if !self.drift_rate.is_finite() || !(self.white_noise_rms >= 0.0) {
            return Err(LockError::InvalidParameter(format!(
                "disturbance magnitudes must be finite and non-negative, got {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LockSample {
    pub t: f64,
    pub detuning: f64,
    pub error: f64,
    pub actuation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LockSummary {
    /// RMS detuning after the settling window, Hz.
    pub rms_detuning: f64,
    pub max_abs_detuning: f64,
    pub locked: bool,
    /// Time after which |detuning| stays below fwhm / 50.
    pub settle_time: Option<f64>,
    pub fwhm: f64,
    pub settle_window: f64,
    pub final_detuning: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LockTrace {
    pub samples: Vec<LockSample>,
    pub summary: LockSummary,
}

impl LockTrace {
    /// CSV `t_s,detuning_hz,error,actuation_hz`, keeping every `every`-th sample.
    pub fn to_csv(&self, every: usize) -> String {
        let mut out = String::from("t_s,detuning_hz,error,actuation_hz\n");
        for s in self.samples.iter().step_by(every.max(1)) {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                fmt_num(s.t),
                fmt_num(s.detuning),
                fmt_num(s.error),
                fmt_num(s.actuation)
            );
        }
        out
    }

    /// Number of sign changes of the detuning after `from` seconds.
    pub fn zero_crossings(&self, from: f64) -> usize {
        let signs: Vec<bool> = self
            .samples
            .iter()
            .filter(|s| s.t >= from && s.detuning != 0.0)
            .map(|s| s.detuning > 0.0)
            .collect();
        signs.windows(2).filter(|w| w[0] != w[1]).count()
    }
}

/// Unlock criterion: |detuning| above half the linewidth for longer than this.
const UNLOCK_HOLD: f64 = 10e-3;

/// Closed-loop lock simulation.
///
/// Each sample the detuning is the disturbance minus the previous
/// actuation; the PDH discriminant, scaled by its slope at resonance to read
/// in Hz, drives the PID.
pub fn simulate_lock(
    cavity: &CavityResponse,
    modulation: &ModulationSource,
    gains: &PidGains,
    disturbance: &DisturbanceModel,
    duration: f64,
    settle_window: f64,
) -> Result<LockTrace, LockError> {
    cavity.validate()?;
    modulation.validate()?;
    gains.validate()?;
    disturbance.validate()?;
    if !(duration > 0.0) {
        return Err(LockError::InvalidParameter(format!(
            "duration must be positive, got {duration}"
        )));
    }
    let slope = cavity.pdh_slope(modulation, 0.0);
    if slope == 0.0 || !slope.is_finite() {
        return Err(LockError::InvalidParameter(
            "PDH discriminant has no slope at resonance".into(),
        ));
    }
    let noise = Normal::new(0.0, disturbance.white_noise_rms)
        .map_err(|e| LockError::InvalidParameter(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(disturbance.seed);

    let period = gains.sample_period;
    let n = (duration / period).round() as usize;
    let fwhm = cavity.fwhm();
    let mut samples = Vec::with_capacity(n);
    let mut state = PidState::default();
    let mut actuation = 0.0;
    let mut outside_since: Option<f64> = None;
    let mut locked = true;

    for i in 0..n {
        let t = i as f64 * period;
        let jitter = if disturbance.white_noise_rms > 0.0 {
            noise.sample(&mut rng)
        } else {
            0.0
        };
        let detuning =
            disturbance.initial_detuning + disturbance.drift_rate * t + jitter - actuation;
        let error = cavity.pdh_error(modulation, detuning) / slope;
        let (next, out) = state.step(error, gains);
        state = next;
        actuation = out;
        samples.push(LockSample {
            t,
            detuning,
            error,
            actuation,
        });

        if detuning.abs() > fwhm / 2.0 {
            let since = *outside_since.get_or_insert(t);
            if t - since > UNLOCK_HOLD {
                locked = false;
            }
        } else {
            outside_since = None;
        }
    }

    let summary = summarize(&samples, fwhm, settle_window, locked);
    Ok(LockTrace { samples, summary })
}

fn summarize(samples: &[LockSample], fwhm: f64, settle_window: f64, locked: bool) -> LockSummary {
    let window: Vec<f64> = samples
        .iter()
        .filter(|s| s.t >= settle_window)
        .map(|s| s.detuning)
        .collect();
    let window = if window.is_empty() {
        samples.iter().map(|s| s.detuning).collect()
    } else {
        window
    };
    let rms_detuning = if window.is_empty() {
        0.0
    } else {
        (window.iter().map(|d| d * d).sum::<f64>() / window.len() as f64).sqrt()
    };
    let threshold = fwhm / 50.0;
    let settle_time = match samples.iter().rposition(|s| s.detuning.abs() >= threshold) {
        None => samples.first().map(|s| s.t),
        Some(last) => samples.get(last + 1).map(|s| s.t),
    };
    LockSummary {
        rms_detuning,
        max_abs_detuning: samples.iter().map(|s| s.detuning.abs()).fold(0.0, f64::max),
        locked,
        settle_time,
        fwhm,
        settle_window,
        final_detuning: samples.last().map_or(0.0, |s| s.detuning),
    }
}
