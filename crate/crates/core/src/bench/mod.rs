//! Monte-Carlo balanced-detection bench.
//!
//! Photocurrents are built from two independent Gaussian channels: the
//! difference channel `d` carries the (possibly squeezed) intensity-difference
//! spectrum after detection loss, the common channel `c` carries the excess
//! noise of each beam. The detectors see `i1 = (c + d)/2 + e1` and
//! `i2 = (c - d)/2 + e2` with independent electronic noise `e1`, `e2`.
//! Finite common-mode rejection leaks `g (i1 + i2)` into the difference,
//! `g² = 10^(-CMRR/10)`.
//!
//! Every spectrum is expressed relative to the shot-noise level, which is
//! unit-variance white noise at the sample rate.

mod synth;
mod welch;

pub use synth::{shaped_noise, white_noise};
pub use welch::{hann, welch_psd, AnalyzerSettings};

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spectrum::{NoiseSpectrum, SpectrumError};
use crate::units::{amplitude_from_db, from_db, to_db};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BenchError {
    #[error("invalid analyzer settings: {0}")]
    Settings(String),

    #[error("sample rate {sample_rate} Hz aliases the analysis band up to {max_frequency} Hz")]
    Aliasing {
        sample_rate: f64,
        max_frequency: f64,
    },

    #[error("record of {have} samples too short, need {need}")]
    InsufficientSamples { have: usize, need: usize },

    #[error("optical power {power} W per detector exceeds saturation limit {limit} W")]
    Saturation { power: f64, limit: f64 },

    #[error(transparent)]
    Spectrum(#[from] SpectrumError),
}

/// Excess intensity noise of each beam above shot noise, dB.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExcessNoise {
    Flat {
        db: f64,
    },
    /// Piecewise-linear in frequency, held constant beyond the end points.
    Table {
        points: Vec<(f64, f64)>,
    },
}

impl ExcessNoise {
    pub fn db_at(&self, freq: f64) -> f64 {
        match self {
            ExcessNoise::Flat { db } => *db,
            ExcessNoise::Table { points } => {
                let Some(first) = points.first() else {
                    return f64::NEG_INFINITY;
                };
                if freq <= first.0 {
                    return first.1;
                }
                for w in points.windows(2) {
                    let ((f0, d0), (f1, d1)) = (w[0], w[1]);
                    if freq <= f1 {
                        return d0 + (d1 - d0) * (freq - f0) / (f1 - f0);
                    }
                }
                points[points.len() - 1].1
            }
        }
    }
}

pub type PsdFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Noise budget of the twin beams and the balanced detector.
#[derive(Clone)]
pub struct TwinBeamNoiseModel {
    /// Pre-detection intensity-difference spectrum at the OPO output.
    pub diff_spectrum: PsdFn,
    pub excess: ExcessNoise,
    pub eta_det: f64,
    pub cmrr_db: f64,
    pub electronic_floor_db: f64,
    pub seed: u64,
    /// With light off only electronic noise remains.
    pub light_on: bool,
}

impl fmt::Debug for TwinBeamNoiseModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TwinBeamNoiseModel")
            .field("excess", &self.excess)
            .field("eta_det", &self.eta_det)
            .field("cmrr_db", &self.cmrr_db)
            .field("electronic_floor_db", &self.electronic_floor_db)
            .field("seed", &self.seed)
            .field("light_on", &self.light_on)
            .finish_non_exhaustive()
    }
}

impl TwinBeamNoiseModel {
    pub fn validate(&self) -> Result<(), BenchError> {
        if !(self.eta_det > 0.0 && self.eta_det <= 1.0) {
            return Err(BenchError::Settings(format!(
                "detection efficiency must lie in (0, 1], got {}",
                self.eta_det
            )));
        }
        if !(self.electronic_floor_db < 0.0) || !(self.cmrr_db >= 0.0) {
            return Err(BenchError::Settings(
                "electronic floor must be below shot noise and CMRR non-negative".into(),
            ));
        }
        Ok(())
    }

    /// Same budget with uncorrelated beams: the polarisation is turned by
    /// 45° so each detector sees half of each beam.
    pub fn shot_reference(&self) -> Self {
        Self {
            diff_spectrum: Arc::new(|_| 1.0),
            ..self.clone()
        }
    }

    pub fn difference_channel_psd(&self, freq: f64) -> f64 {
        if !self.light_on {
            return 0.0;
        }
        self.eta_det * (self.diff_spectrum)(freq) + 1.0 - self.eta_det
    }

    pub fn common_channel_psd(&self, freq: f64) -> f64 {
        if !self.light_on {
            return 0.0;
        }
        from_db(self.excess.db_at(freq))
    }

    /// Electronic noise of the difference channel.
    pub fn electronic_psd(&self) -> f64 {
        from_db(self.electronic_floor_db)
    }

    pub fn leak_amplitude(&self) -> f64 {
        amplitude_from_db(-self.cmrr_db)
    }

    /// Expected PSD of the subtracted photocurrent.
    pub fn analytic_difference_psd(&self, freq: f64, with_leakage: bool) -> f64 {
        let base = self.difference_channel_psd(freq) + self.electronic_psd();
        if with_leakage {
            let g2 = self.leak_amplitude().powi(2);
            base + g2 * (self.common_channel_psd(freq) + self.electronic_psd())
        } else {
            base
        }
    }
}

/// Detector photocurrents in shot-noise units.
#[derive(Debug, Clone, PartialEq)]
pub struct Photocurrents {
    pub i1: Vec<f64>,
    pub i2: Vec<f64>,
}

impl Photocurrents {
    /// `i1 - i2 + g (i1 + i2)` for leak amplitude `g`.
    pub fn difference(&self, leak: f64) -> Vec<f64> {
        self.i1
            .iter()
            .zip(&self.i2)
            .map(|(a, b)| a - b + leak * (a + b))
            .collect()
    }

    pub fn sum(&self) -> Vec<f64> {
        self.i1.iter().zip(&self.i2).map(|(a, b)| a + b).collect()
    }
}

/// Stream families per synthesis; `stream_base` separates independent traces.
const STREAMS_PER_TRACE: u32 = 4;

/// Synthesise both photocurrents, the first `segment_len` samples discarded.
pub fn synthesize_photocurrents(
    model: &TwinBeamNoiseModel,
    settings: &AnalyzerSettings,
    max_frequency: f64,
    stream_base: u32,
) -> Result<Photocurrents, BenchError> {
    model.validate()?;
    settings.validate()?;
    if !(settings.sample_rate > 2.0 * max_frequency) {
        return Err(BenchError::Aliasing {
            sample_rate: settings.sample_rate,
            max_frequency,
        });
    }
    let n = settings.n_samples;
    let discard = settings.segment_len();
    let fs = settings.sample_rate;
    let base = stream_base * STREAMS_PER_TRACE;

    let d = shaped_noise(
        n,
        fs,
        discard,
        |f| model.difference_channel_psd(f),
        model.seed,
        base,
    );
    let c = shaped_noise(
        n,
        fs,
        discard,
        |f| model.common_channel_psd(f),
        model.seed,
        base + 1,
    );
    let sigma_e = (model.electronic_psd() / 2.0).sqrt();
    let e1 = white_noise(n, model.seed, base + 2);
    let e2 = white_noise(n, model.seed, base + 3);

    let i1 = (0..n)
        .map(|k| 0.5 * (c[k] + d[k]) + sigma_e * e1[k])
        .collect();
    let i2 = (0..n)
        .map(|k| 0.5 * (c[k] - d[k]) + sigma_e * e2[k])
        .collect();
    Ok(Photocurrents { i1, i2 })
}

/// PSD of `series` relative to the shot-noise level.
pub fn relative_psd(
    series: &[f64],
    settings: &AnalyzerSettings,
) -> Result<NoiseSpectrum, BenchError> {
    Ok(welch_psd(series, settings)?.scaled(settings.sample_rate))
}

/// Reference trace with the twin-beam correlation removed.
pub fn shot_noise_calibration(
    model: &TwinBeamNoiseModel,
    settings: &AnalyzerSettings,
    max_frequency: f64,
) -> Result<NoiseSpectrum, BenchError> {
    let currents = synthesize_photocurrents(&model.shot_reference(), settings, max_frequency, 1)?;
    relative_psd(&currents.difference(0.0), settings)
}

/// Scale `trace` so that the calibration trace averages to one over its grid.
pub fn normalize_to_shot(trace: &NoiseSpectrum, calibration: &NoiseSpectrum) -> NoiseSpectrum {
    trace.scaled(1.0 / calibration.mean())
}

/// Pointwise `10 log10(b / a)` and its minimum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SqueezingTrace {
    pub frequencies: Vec<f64>,
    pub db: Vec<f64>,
    pub min_db: f64,
    pub freq_at_min: f64,
}

pub fn measure_squeezing(
    trace_b: &NoiseSpectrum,
    trace_a: &NoiseSpectrum,
) -> Result<SqueezingTrace, BenchError> {
    trace_b.same_grid(trace_a)?;
    if trace_b.is_empty() {
        return Err(BenchError::Spectrum(SpectrumError::Invalid(
            "empty trace".into(),
        )));
    }
    let db: Vec<f64> = trace_b
        .values()
        .iter()
        .zip(trace_a.values())
        .map(|(b, a)| to_db(b / a))
        .collect();
    let (idx, min_db) = db
        .iter()
        .copied()
        .enumerate()
        .fold(
            (0, f64::INFINITY),
            |best, (i, v)| if v < best.1 { (i, v) } else { best },
        );
    Ok(SqueezingTrace {
        frequencies: trace_b.frequencies().to_vec(),
        db,
        min_db,
        freq_at_min: trace_b.frequencies()[idx],
    })
}

/// Analysis band and record settings of one bench run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchRun {
    pub settings: AnalyzerSettings,
    pub band: (f64, f64),
    /// Frequency at which the squeezing is quoted.
    pub analysis_frequency: f64,
    /// Half-width of the window around `analysis_frequency` searched for the minimum.
    pub analysis_window: f64,
}

#[derive(Debug, Clone)]
pub struct BenchResult {
    /// Trace (a), relative to the calibrated shot level.
    pub calibration: NoiseSpectrum,
    /// Trace (b), relative to the calibrated shot level.
    pub difference: NoiseSpectrum,
    /// Trace (b) including common-mode leakage.
    pub difference_with_leakage: NoiseSpectrum,
    /// Sum photocurrent PSD.
    pub sum: NoiseSpectrum,
    /// Mean of the raw calibration trace over the band.
    pub shot_level: f64,
    pub squeezing: SqueezingTrace,
    pub averages: usize,
    /// Minimum of trace (b) over the full band (dB, Hz).
    pub band_minimum: (f64, f64),
    /// Minimum of trace (b) within the analysis window (dB, Hz).
    pub analysis_minimum: (f64, f64),
    /// Same, with leakage.
    pub analysis_minimum_with_leakage: (f64, f64),
}

/// Full pipeline: calibration trace, difference traces with and without
/// common-mode leakage, squeezing.
pub fn run_bench(model: &TwinBeamNoiseModel, run: &BenchRun) -> Result<BenchResult, BenchError> {
    let (lo, hi) = run.band;
    let settings = &run.settings;
    let calibration_raw = shot_noise_calibration(model, settings, hi)?.band(lo, hi)?;
    let currents = synthesize_photocurrents(model, settings, hi, 0)?;
    let diff_raw = relative_psd(&currents.difference(0.0), settings)?.band(lo, hi)?;
    let leak_raw =
        relative_psd(&currents.difference(model.leak_amplitude()), settings)?.band(lo, hi)?;
    let sum = relative_psd(&currents.sum(), settings)?.band(lo, hi)?;

    let shot_level = calibration_raw.mean();
    let calibration = normalize_to_shot(&calibration_raw, &calibration_raw);
    let difference = normalize_to_shot(&diff_raw, &calibration_raw);
    let difference_with_leakage = normalize_to_shot(&leak_raw, &calibration_raw);
    let squeezing = measure_squeezing(&difference, &calibration)?;

    let min_db = |s: &NoiseSpectrum| -> Result<(f64, f64), BenchError> {
        let (f, v) = s.minimum().ok_or(SpectrumError::EmptyBand(lo, hi))?;
        Ok((to_db(v), f))
    };
    let window = |s: &NoiseSpectrum| {
        s.band(
            run.analysis_frequency - run.analysis_window,
            run.analysis_frequency + run.analysis_window,
        )
    };
    Ok(BenchResult {
        band_minimum: min_db(&difference)?,
        analysis_minimum: min_db(&window(&difference)?)?,
        analysis_minimum_with_leakage: min_db(&window(&difference_with_leakage)?)?,
        calibration,
        difference,
        difference_with_leakage,
        sum,
        shot_level,
        squeezing,
        averages: settings.averages(),
    })
}
