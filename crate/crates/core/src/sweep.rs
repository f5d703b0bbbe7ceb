//! One-dimensional design sweeps: an evaluated grid plus an optional
//! golden-section refinement for unimodal objectives.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("invalid sweep range: {message}")]
    InvalidRange { message: String },

    #[error("cannot sweep `{path}`: {message}")]
    Parameter { path: String, message: String },

    #[error("objective evaluation failed: {0}")]
    Objective(Box<crate::Error>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SearchMethod {
    #[default]
    Grid,
    GoldenSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Goal {
    #[default]
    Maximize,
    Minimize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepOutcome {
    pub rows: Vec<(f64, f64)>,
    pub optimum: (f64, f64),
    pub method: SearchMethod,
    /// Set when golden-section was requested on a non-unimodal grid.
    pub fell_back_to_grid: bool,
    pub evaluations: usize,
}

/// `steps` evenly spaced points from `min` to `max` inclusive.
pub fn grid(min: f64, max: f64, steps: usize) -> Result<Vec<f64>, SweepError> {
    if steps < 2 {
        return Err(SweepError::InvalidRange {
            message: format!("need at least 2 steps, got {steps}"),
        });
    }
    if !(min <= max) || !min.is_finite() || !max.is_finite() {
        return Err(SweepError::InvalidRange {
            message: format!("need finite min <= max, got [{min}, {max}]"),
        });
    }
    let h = (max - min) / (steps - 1) as f64;
    Ok((0..steps)
        .map(|i| {
            if i == steps - 1 {
                max
            } else {
                min + h * i as f64
            }
        })
        .collect())
}

/// Index of the best value; ties go to the lowest index.
pub fn argbest(values: &[f64], goal: Goal) -> Option<usize> {
    let better = |a: f64, b: f64| match goal {
        Goal::Maximize => a > b,
        Goal::Minimize => a < b,
    };
    values
        .iter()
        .enumerate()
        .fold(None, |best: Option<usize>, (i, &v)| match best {
            Some(j) if !better(v, values[j]) => Some(j),
            _ => Some(i),
        })
}

/// True if the sequence rises (weakly) to one peak and then falls (weakly).
pub fn is_unimodal(values: &[f64], goal: Goal) -> bool {
    let sign = match goal {
        Goal::Maximize => 1.0,
        Goal::Minimize => -1.0,
    };
    let scale = values
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1e-300);
    let tol = 1e-12 * scale;
    let mut falling = false;
    for w in values.windows(2) {
        let step = sign * (w[1] - w[0]);
        if step > tol {
            if falling {
                return false;
            }
        } else if step < -tol {
            falling = true;
        }
    }
    true
}

/// Golden-section search for the maximum (or minimum) of a unimodal `f`
/// on `[a, b]`. Ties are resolved toward the smaller abscissa.
pub fn golden_section<E>(
    mut f: impl FnMut(f64) -> Result<f64, E>,
    mut a: f64,
    mut b: f64,
    goal: Goal,
    tol: f64,
) -> Result<((f64, f64), usize), E> {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let sign = match goal {
        Goal::Maximize => 1.0,
        Goal::Minimize => -1.0,
    };
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = sign * f(x1)?;
    let mut f2 = sign * f(x2)?;
    let mut evals = 2;
    while (b - a) > tol && evals < 500 {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = sign * f(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = sign * f(x2)?;
        }
        evals += 1;
    }
    let best = if f1 >= f2 {
        (x1, sign * f1)
    } else {
        (x2, sign * f2)
    };
    Ok((best, evals))
}

/// Evaluate `objective` on the grid (in parallel) and, when requested and
/// the grid is unimodal, refine with golden-section search.
pub fn run_sweep<F>(
    min: f64,
    max: f64,
    steps: usize,
    method: SearchMethod,
    goal: Goal,
    objective: F,
) -> Result<SweepOutcome, SweepError>
where
    F: Fn(f64) -> Result<f64, crate::Error> + Sync,
{
    let xs = grid(min, max, steps)?;
    let ys: Vec<f64> = xs
        .par_iter()
        .map(|&x| objective(x))
        .collect::<Result<_, _>>()
        .map_err(|e| SweepError::Objective(Box::new(e)))?;
    let best = argbest(&ys, goal).expect("grid has at least two points");
    let grid_optimum = (xs[best], ys[best]);
    let rows: Vec<(f64, f64)> = xs.into_iter().zip(ys.iter().copied()).collect();

    let mut outcome = SweepOutcome {
        optimum: grid_optimum,
        method: SearchMethod::Grid,
        fell_back_to_grid: false,
        evaluations: rows.len(),
        rows,
    };
    if method == SearchMethod::GoldenSection {
        if !is_unimodal(&ys, goal) || max <= min {
            outcome.fell_back_to_grid = true;
        } else {
            let tol = 1e-10 * (max - min);
            let (opt, evals) = golden_section(&objective, min, max, goal, tol)
                .map_err(|e| SweepError::Objective(Box::new(e)))?;
            let improves = match goal {
                Goal::Maximize => opt.1 > grid_optimum.1,
                Goal::Minimize => opt.1 < grid_optimum.1,
            };
            // keep the grid point when refinement only ties it
            outcome.optimum = if improves { opt } else { grid_optimum };
            outcome.method = SearchMethod::GoldenSection;
            outcome.evaluations += evals;
        }
    }
    Ok(outcome)
}
