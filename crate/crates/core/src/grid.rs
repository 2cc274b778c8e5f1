//! Uniform grids and composite Simpson quadrature.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("grid needs at least {min} points, got {count}")]
    TooFewPoints { count: usize, min: usize },
    #[error("grid bounds must be finite with start < end (got [{start}, {end}])")]
    BadBounds { start: f64, end: f64 },
    #[error("Simpson quadrature needs an odd number of samples, got {0}")]
    SimpsonParity(usize),
    #[error("periodic Simpson quadrature needs an even number of samples, got {0}")]
    PeriodicParity(usize),
    #[error("grids must be uniform: {0}")]
    NonUniform(String),
}

/// `count` equispaced points from `start` to `end`, both included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniformGrid {
    pub start: f64,
    pub end: f64,
    pub count: usize,
}

impl UniformGrid {
    pub fn new(start: f64, end: f64, count: usize) -> Result<Self, GridError> {
        let g = Self { start, end, count };
        g.validate()?;
        Ok(g)
    }

    /// Grid over `[start, end]` with the given step, which must divide the
    /// interval into an integer number of cells.
    pub fn with_step(start: f64, end: f64, step: f64) -> Result<Self, GridError> {
        let cells = (end - start) / step;
        let n = cells.round();
        if step.is_nan() || step <= 0.0 || (cells - n).abs() > 1e-9 * n.max(1.0) {
            return Err(GridError::NonUniform(format!(
                "step {step} does not divide [{start}, {end}]"
            )));
        }
        Self::new(start, end, n as usize + 1)
    }

    pub fn validate(&self) -> Result<(), GridError> {
        if !(self.start.is_finite() && self.end.is_finite() && self.start < self.end) {
            return Err(GridError::BadBounds {
                start: self.start,
                end: self.end,
            });
        }
        if self.count < 2 {
            return Err(GridError::TooFewPoints {
                count: self.count,
                min: 2,
            });
        }
        Ok(())
    }

    pub fn step(&self) -> f64 {
        (self.end - self.start) / (self.count - 1) as f64
    }

    pub fn point(&self, i: usize) -> f64 {
        if i + 1 == self.count {
            self.end
        } else {
            self.start + i as f64 * self.step()
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.count).map(|i| self.point(i)).collect()
    }

    /// The grid with every cell split in two.
    pub fn refined(&self) -> Self {
        Self {
            start: self.start,
            end: self.end,
            count: 2 * self.count - 1,
        }
    }
}

/// `n` points `i/n` on the unit circle.
pub fn circle_points(n: usize) -> Vec<f64> {
    (0..n).map(|i| i as f64 / n as f64).collect()
}

/// Composite Simpson rule for samples on a uniform grid with spacing `h`.
pub fn simpson(values: &[f64], h: f64) -> Result<f64, GridError> {
    let n = values.len();
    if n < 3 {
        return Err(GridError::TooFewPoints { count: n, min: 3 });
    }
    if n.is_multiple_of(2) {
        return Err(GridError::SimpsonParity(n));
    }
    let mut acc = values[0] + values[n - 1];
    for (i, v) in values.iter().enumerate().take(n - 1).skip(1) {
        acc += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    Ok(acc * h / 3.0)
}

/// Simpson rule over one period `[0, 1)` for samples at `i/n`.
///
/// The closing sample at q = 1 is the first one again.
pub fn simpson_periodic(values: &[f64]) -> Result<f64, GridError> {
    let n = values.len();
    if n < 2 {
        return Err(GridError::TooFewPoints { count: n, min: 2 });
    }
    if n % 2 == 1 {
        return Err(GridError::PeriodicParity(n));
    }
    let acc: f64 = values
        .iter()
        .enumerate()
        .map(|(i, v)| if i % 2 == 1 { 4.0 * v } else { 2.0 * v })
        .sum();
    Ok(acc / (3.0 * n as f64))
}
