//! Averaged-periodogram spectrum estimate emulating a swept analyzer:
//! Hann window, 50 % overlap, segment length set by the resolution
//! bandwidth, averages set by the video bandwidth.

use std::f64::consts::PI;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::BenchError;
use crate::spectrum::NoiseSpectrum;

/// Segments summed per parallel work item; fixed so sums are independent of thread count.
const SEGMENTS_PER_BLOCK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzerSettings {
    /// Hz
    pub sample_rate: f64,
    pub n_samples: usize,
    /// Resolution bandwidth, Hz.
    pub rbw: f64,
    /// Video bandwidth, Hz.
    pub vbw: f64,
}

impl AnalyzerSettings {
    /// Settings whose record length yields exactly `averages` segments.
    pub fn with_averages(sample_rate: f64, rbw: f64, vbw: f64, averages: usize) -> Self {
        let mut s = Self {
            sample_rate,
            n_samples: 0,
            rbw,
            vbw,
        };
        let seg = s.segment_len();
        s.n_samples = seg + (averages.max(1) - 1) * s.hop();
        s
    }

    pub fn segment_len(&self) -> usize {
        (self.sample_rate / self.rbw).round() as usize
    }

    pub fn hop(&self) -> usize {
        (self.segment_len() / 2).max(1)
    }

    /// Number of averaged segments for a record of `len` samples.
    pub fn averages_for(&self, len: usize) -> usize {
        let seg = self.segment_len();
        if len < seg {
            0
        } else {
            (len - seg) / self.hop() + 1
        }
    }

    pub fn averages(&self) -> usize {
        self.averages_for(self.n_samples)
    }

    /// Averages needed to emulate the video bandwidth.
    pub fn required_averages(&self) -> usize {
        (self.rbw / self.vbw).ceil() as usize
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        if !(self.sample_rate > 0.0) || !(self.rbw > 0.0) || !(self.vbw > 0.0) {
            return Err(BenchError::Settings(format!(
                "sample_rate, rbw and vbw must be positive: {self:?}"
            )));
        }
        if !(self.rbw > self.vbw) {
            return Err(BenchError::Settings(format!(
                "rbw ({}) must exceed vbw ({})",
                self.rbw, self.vbw
            )));
        }
        if self.segment_len() < 4 {
            return Err(BenchError::Settings(format!(
                "rbw {} Hz too wide for sample rate {} Hz",
                self.rbw, self.sample_rate
            )));
        }
        Ok(())
    }
}

/// Periodic Hann window.
pub fn hann(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| 0.5 * (1.0 - (2.0 * PI * n as f64 / len as f64).cos()))
        .collect()
}

/// One-sided frequency grid, two-sided density: unit-variance white noise
/// sampled at `fs` reads `1 / fs` in every bin.
pub fn welch_psd(series: &[f64], settings: &AnalyzerSettings) -> Result<NoiseSpectrum, BenchError> {
    settings.validate()?;
    let seg = settings.segment_len();
    let hop = settings.hop();
    let averages = settings.averages_for(series.len());
    if averages == 0 {
        return Err(BenchError::InsufficientSamples {
            have: series.len(),
            need: seg,
        });
    }
    if averages < settings.required_averages() {
        return Err(BenchError::InsufficientSamples {
            have: series.len(),
            need: seg + (settings.required_averages() - 1) * hop,
        });
    }

    let window = hann(seg);
    let window_power: f64 = window.iter().map(|w| w * w).sum();
    let bins = seg / 2 + 1;
    let fft = FftPlanner::<f64>::new().plan_fft_forward(seg);

    let n_blocks = averages.div_ceil(SEGMENTS_PER_BLOCK);
    let partial: Vec<Vec<f64>> = (0..n_blocks)
        .into_par_iter()
        .map(|block| {
            let mut acc = vec![0.0; bins];
            let mut buf = vec![Complex64::new(0.0, 0.0); seg];
            let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
            let first = block * SEGMENTS_PER_BLOCK;
            let last = (first + SEGMENTS_PER_BLOCK).min(averages);
            for s in first..last {
                let chunk = &series[s * hop..s * hop + seg];
                let mean = chunk.iter().sum::<f64>() / seg as f64;
                for ((b, x), w) in buf.iter_mut().zip(chunk).zip(&window) {
                    *b = Complex64::new((x - mean) * w, 0.0);
                }
                fft.process_with_scratch(&mut buf, &mut scratch);
                for (a, b) in acc.iter_mut().zip(&buf) {
                    *a += b.norm_sqr();
                }
            }
            acc
        })
        .collect();

    let mut total = vec![0.0; bins];
    for block in &partial {
        for (t, v) in total.iter_mut().zip(block) {
            *t += v;
        }
    }
    let scale = 1.0 / (averages as f64 * settings.sample_rate * window_power);
    let frequencies = (0..bins)
        .map(|k| k as f64 * settings.sample_rate / seg as f64)
        .collect();
    let values = total.into_iter().map(|v| v * scale).collect();
    Ok(NoiseSpectrum::new(frequencies, values)?)
}
