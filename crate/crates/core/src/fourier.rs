//! Real trigonometric sums on the unit circle.
//!
//! Every q-dependent quantity in this crate (potential modes, foliation
//! shifts, conservation-law components) is a finite sum of
//! `cos(2πkq)` / `sin(2πkq)` terms, so derivatives in q are exact.

use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

/// One harmonic `cos·cos(2πkq) + sin·sin(2πkq)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Harmonic {
    pub k: u32,
    #[serde(default)]
    pub cos: f64,
    #[serde(default)]
    pub sin: f64,
}

impl Harmonic {
    pub fn new(k: u32, cos: f64, sin: f64) -> Self {
        Self { k, cos, sin }
    }

    /// Angular wavenumber `2πk`.
    #[inline]
    pub fn omega(&self) -> f64 {
        TAU * self.k as f64
    }

    /// Value and first two q-derivatives at `q`.
    #[inline]
    pub fn jet(&self, q: f64) -> [f64; 3] {
        let w = self.omega();
        let (s, c) = (w * q).sin_cos();
        let v = self.cos * c + self.sin * s;
        let d1 = w * (self.sin * c - self.cos * s);
        [v, d1, -w * w * v]
    }

    /// Third q-derivative, used by finite-difference consistency checks.
    pub fn d3(&self, q: f64) -> f64 {
        let w = self.omega();
        let (s, c) = (w * q).sin_cos();
        -w * w * w * (self.sin * c - self.cos * s)
    }

    /// Upper bound on `|d^m/dq^m|` of this harmonic.
    pub fn derivative_bound(&self, order: u32) -> f64 {
        self.omega().powi(order as i32) * self.cos.hypot(self.sin)
    }
}

/// `mean + Σ harmonics`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FourierSeries {
    #[serde(default)]
    pub mean: f64,
    #[serde(default)]
    pub modes: Vec<Harmonic>,
}

impl FourierSeries {
    pub fn constant(mean: f64) -> Self {
        Self {
            mean,
            modes: Vec::new(),
        }
    }

    pub fn new(mean: f64, modes: Vec<Harmonic>) -> Self {
        Self { mean, modes }
    }

    pub fn with_mode(mut self, k: u32, cos: f64, sin: f64) -> Self {
        self.modes.push(Harmonic::new(k, cos, sin));
        self
    }

    pub fn is_constant(&self) -> bool {
        self.modes.iter().all(|m| m.cos == 0.0 && m.sin == 0.0)
    }

    /// `[f, f', f'']` at `q`.
    pub fn jet(&self, q: f64) -> [f64; 3] {
        let mut out = [self.mean, 0.0, 0.0];
        for m in &self.modes {
            let j = m.jet(q);
            out[0] += j[0];
            out[1] += j[1];
            out[2] += j[2];
        }
        out
    }

    pub fn eval(&self, q: f64) -> f64 {
        self.jet(q)[0]
    }

    pub fn d1(&self, q: f64) -> f64 {
        self.jet(q)[1]
    }

    pub fn d2(&self, q: f64) -> f64 {
        self.jet(q)[2]
    }

    pub fn d3(&self, q: f64) -> f64 {
        self.modes.iter().map(|m| m.d3(q)).sum()
    }

    /// `sup |f - mean|` bound from the amplitudes.
    pub fn oscillation_bound(&self) -> f64 {
        self.modes.iter().map(|m| m.derivative_bound(0)).sum()
    }

    pub fn derivative_bound(&self, order: u32) -> f64 {
        self.modes.iter().map(|m| m.derivative_bound(order)).sum()
    }

    pub fn validate(&self) -> Result<(), String> {
        if !self.mean.is_finite() {
            return Err("mean is not finite".into());
        }
        for (i, m) in self.modes.iter().enumerate() {
            if m.k == 0 {
                return Err(format!("modes[{i}].k must be a positive integer"));
            }
            if !(m.cos.is_finite() && m.sin.is_finite()) {
                return Err(format!("modes[{i}] has a non-finite amplitude"));
            }
        }
        Ok(())
    }
}
