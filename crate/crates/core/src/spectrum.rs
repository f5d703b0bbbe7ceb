//! Frequency-indexed power spectral densities.

use std::fmt::Write as _;

use thiserror::Error;

use crate::units::to_db;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectrumError {
    #[error("invalid spectrum: {0}")]
    Invalid(String),

    #[error("frequency grids differ ({0} vs {1} points, or mismatched values)")]
    GridMismatch(usize, usize),

    #[error("no bins in {0} Hz .. {1} Hz")]
    EmptyBand(f64, f64),
}

/// PSD samples on a strictly increasing frequency grid.
///
/// Values are relative to the shot-noise level (1.0) once normalised; raw
/// estimator output carries the estimator's own units.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpectrum {
    frequencies: Vec<f64>,
    values: Vec<f64>,
}

impl NoiseSpectrum {
    pub fn new(frequencies: Vec<f64>, values: Vec<f64>) -> Result<Self, SpectrumError> {
        if frequencies.len() != values.len() {
            return Err(SpectrumError::Invalid(format!(
                "{} frequencies but {} values",
                frequencies.len(),
                values.len()
            )));
        }
        if frequencies.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(SpectrumError::Invalid(
                "frequencies must be strictly increasing".into(),
            ));
        }
        if let Some(v) = values.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
            return Err(SpectrumError::Invalid(format!(
                "PSD values must be finite and non-negative, found {v}"
            )));
        }
        Ok(Self {
            frequencies,
            values,
        })
    }

    /// Evaluate `psd` on a grid.
    pub fn from_fn(frequencies: Vec<f64>, psd: impl Fn(f64) -> f64) -> Result<Self, SpectrumError> {
        let values = frequencies.iter().map(|&f| psd(f)).collect();
        Self::new(frequencies, values)
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.frequencies
            .iter()
            .copied()
            .zip(self.values.iter().copied())
    }

    pub fn db(&self) -> Vec<f64> {
        self.values.iter().map(|&v| to_db(v)).collect()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            frequencies: self.frequencies.clone(),
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    /// Bins with `lo <= f <= hi`.
    pub fn band(&self, lo: f64, hi: f64) -> Result<Self, SpectrumError> {
        let (frequencies, values): (Vec<f64>, Vec<f64>) =
            self.iter().filter(|(f, _)| *f >= lo && *f <= hi).unzip();
        if frequencies.is_empty() {
            return Err(SpectrumError::EmptyBand(lo, hi));
        }
        Ok(Self {
            frequencies,
            values,
        })
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Smallest value and its frequency; ties go to the lower frequency.
    pub fn minimum(&self) -> Option<(f64, f64)> {
        self.iter()
            .fold(None, |best: Option<(f64, f64)>, (f, v)| match best {
                Some((_, bv)) if bv <= v => best,
                _ => Some((f, v)),
            })
    }

    pub fn same_grid(&self, other: &NoiseSpectrum) -> Result<(), SpectrumError> {
        let tol = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0);
        if self.len() != other.len()
            || self
                .frequencies
                .iter()
                .zip(&other.frequencies)
                .any(|(a, b)| !tol(*a, *b))
        {
            return Err(SpectrumError::GridMismatch(self.len(), other.len()));
        }
        Ok(())
    }

    /// CSV with header `freq_hz,psd_rel_shot,psd_db`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("freq_hz,psd_rel_shot,psd_db\n");
        for (f, v) in self.iter() {
            let _ = writeln!(out, "{},{},{}", fmt_num(f), fmt_num(v), fmt_num(to_db(v)));
        }
        out
    }
}

/// Fixed 12-significant-digit scientific notation for CSV output.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.11e}")
}
