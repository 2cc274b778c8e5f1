//! Time-modulated periodic potentials `u(q,t)`.
//!
//! A potential is a finite sum of harmonics in q, each multiplied by an
//! analytic time envelope. Values, the force `F = u_q`, the curvature
//! `u_qq` and the force energy `∫₀¹ u_q² dq` are all closed-form.

use crate::fourier::Harmonic;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::TAU;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PotentialError {
    #[error("modes[{index}] references unknown envelope `{name}`")]
    UnknownEnvelope { index: usize, name: String },
    #[error("envelope `constant` is built in and cannot be redefined")]
    ReservedEnvelope,
    #[error("envelope `{name}`: {reason}")]
    InvalidEnvelope { name: String, reason: String },
    #[error("modes[{index}]: {reason}")]
    InvalidMode { index: usize, reason: String },
}

/// Anything that can drive the characteristic system `q̇ = p, ṗ = −u_q`.
pub trait Forcing: Sync {
    fn potential(&self, q: f64, t: f64) -> f64;

    /// `F = u_q`.
    fn force(&self, q: f64, t: f64) -> f64;

    /// `u_qq`.
    fn curvature(&self, q: f64, t: f64) -> f64;

    fn force_and_curvature(&self, q: f64, t: f64) -> (f64, f64) {
        (self.force(q, t), self.curvature(q, t))
    }
}

/// Time modulation applied to a harmonic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Envelope {
    Constant,
    /// `exp(−(t−center)²/(2 width²))`.
    Gaussian {
        center: f64,
        width: f64,
    },
    /// Supported on `[0, cutoff]`: quintic smoothstep ramps of length
    /// `taper` at both ends, 1 in between. C² everywhere.
    CompactBump {
        cutoff: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        taper: Option<f64>,
    },
    /// `cos(2πt/period)`.
    Periodic {
        period: f64,
    },
}

/// `6x⁵ − 15x⁴ + 10x³`: 0 at 0, 1 at 1, first and second derivative
/// vanishing at both ends.
fn smoothstep5(x: f64) -> f64 {
    x * x * x * (x * (6.0 * x - 15.0) + 10.0)
}

impl Envelope {
    pub fn bump(cutoff: f64) -> Self {
        Envelope::CompactBump {
            cutoff,
            taper: None,
        }
    }

    fn taper_len(cutoff: f64, taper: Option<f64>) -> f64 {
        taper.unwrap_or(cutoff / 4.0)
    }

    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            Envelope::Constant => 1.0,
            Envelope::Gaussian { center, width } => {
                let z = (t - center) / width;
                (-0.5 * z * z).exp()
            }
            Envelope::CompactBump { cutoff, taper } => {
                if t <= 0.0 || t >= cutoff {
                    return 0.0;
                }
                let d = Self::taper_len(cutoff, taper);
                if t < d {
                    smoothstep5(t / d)
                } else if t > cutoff - d {
                    smoothstep5((cutoff - t) / d)
                } else {
                    1.0
                }
            }
            Envelope::Periodic { period } => (TAU * t / period).cos(),
        }
    }

    /// Time after which the envelope is identically zero, if any.
    pub fn vanishing_time(&self) -> Option<f64> {
        match *self {
            Envelope::CompactBump { cutoff, .. } => Some(cutoff),
            _ => None,
        }
    }

    /// `sup |envelope|` over `[t0, t1]`.
    pub fn sup_abs(&self, t0: f64, t1: f64) -> f64 {
        let (a, b) = if t0 <= t1 { (t0, t1) } else { (t1, t0) };
        let ends = self.eval(a).abs().max(self.eval(b).abs());
        match *self {
            Envelope::Constant => 1.0,
            Envelope::Gaussian { center, .. } => {
                if (a..=b).contains(&center) {
                    1.0
                } else {
                    ends
                }
            }
            Envelope::CompactBump { cutoff, taper } => {
                let d = Self::taper_len(cutoff, taper);
                if b < d || a > cutoff - d {
                    // Only one ramp intersects, where the envelope is monotone.
                    // Both ramps can intersect only through the plateau.
                    ends
                } else {
                    1.0
                }
            }
            Envelope::Periodic { period } => {
                // Extrema of |cos| at multiples of period/2.
                let half = period / 2.0;
                if (a / half).ceil() <= (b / half).floor() {
                    1.0
                } else {
                    ends
                }
            }
        }
    }

    fn validate(&self) -> Result<(), String> {
        let finite = |x: f64, what: &str| {
            if x.is_finite() {
                Ok(())
            } else {
                Err(format!("{what} is not finite"))
            }
        };
        match *self {
            Envelope::Constant => Ok(()),
            Envelope::Gaussian { center, width } => {
                finite(center, "center")?;
                if !(width > 0.0 && width.is_finite()) {
                    return Err("width must be positive".into());
                }
                Ok(())
            }
            Envelope::CompactBump { cutoff, taper } => {
                if !(cutoff > 0.0 && cutoff.is_finite()) {
                    return Err("cutoff must be positive".into());
                }
                let d = Self::taper_len(cutoff, taper);
                if !(d > 0.0 && d <= cutoff / 2.0) {
                    return Err(format!("taper must lie in (0, cutoff/2], got {d}"));
                }
                Ok(())
            }
            Envelope::Periodic { period } => {
                if !(period > 0.0 && period.is_finite()) {
                    return Err("period must be positive".into());
                }
                Ok(())
            }
        }
    }
}

/// A harmonic with its resolved envelope.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialMode {
    pub harmonic: Harmonic,
    pub envelope: Envelope,
    pub envelope_name: String,
}

/// `u(q,t) = Σ envelope_m(t) · (cos_m cos 2πk_m q + sin_m sin 2πk_m q)`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "PotentialJson", into = "PotentialJson")]
pub struct PotentialSpec {
    modes: Vec<PotentialMode>,
    envelopes: BTreeMap<String, Envelope>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModeJson {
    k: u32,
    #[serde(default)]
    cos: f64,
    #[serde(default)]
    sin: f64,
    #[serde(default = "constant_name")]
    envelope: String,
}

fn constant_name() -> String {
    "constant".to_string()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PotentialJson {
    #[serde(default)]
    modes: Vec<ModeJson>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    envelopes: BTreeMap<String, Envelope>,
}

impl TryFrom<PotentialJson> for PotentialSpec {
    type Error = PotentialError;

    fn try_from(raw: PotentialJson) -> Result<Self, Self::Error> {
        if raw.envelopes.contains_key("constant") {
            return Err(PotentialError::ReservedEnvelope);
        }
        for (name, env) in &raw.envelopes {
            env.validate()
                .map_err(|reason| PotentialError::InvalidEnvelope {
                    name: name.clone(),
                    reason,
                })?;
        }
        let mut modes = Vec::with_capacity(raw.modes.len());
        for (index, m) in raw.modes.into_iter().enumerate() {
            let envelope = if m.envelope == "constant" {
                Envelope::Constant
            } else {
                *raw.envelopes
                    .get(&m.envelope)
                    .ok_or_else(|| PotentialError::UnknownEnvelope {
                        index,
                        name: m.envelope.clone(),
                    })?
            };
            if m.k == 0 {
                return Err(PotentialError::InvalidMode {
                    index,
                    reason: "k must be a positive integer".into(),
                });
            }
            if !(m.cos.is_finite() && m.sin.is_finite()) {
                return Err(PotentialError::InvalidMode {
                    index,
                    reason: "amplitudes must be finite".into(),
                });
            }
            modes.push(PotentialMode {
                harmonic: Harmonic::new(m.k, m.cos, m.sin),
                envelope,
                envelope_name: m.envelope,
            });
        }
        Ok(Self {
            modes,
            envelopes: raw.envelopes,
        })
    }
}

impl From<PotentialSpec> for PotentialJson {
    fn from(spec: PotentialSpec) -> Self {
        PotentialJson {
            modes: spec
                .modes
                .into_iter()
                .map(|m| ModeJson {
                    k: m.harmonic.k,
                    cos: m.harmonic.cos,
                    sin: m.harmonic.sin,
                    envelope: m.envelope_name,
                })
                .collect(),
            envelopes: spec.envelopes,
        }
    }
}

impl PotentialSpec {
    pub fn zero() -> Self {
        Self::default()
    }

    /// Adds a harmonic with the given envelope, registering the envelope
    /// under a generated name when it is not constant.
    pub fn with_mode(mut self, k: u32, cos: f64, sin: f64, envelope: Envelope) -> Self {
        let envelope_name = match envelope {
            Envelope::Constant => constant_name(),
            env => {
                let existing = self
                    .envelopes
                    .iter()
                    .find(|(_, e)| **e == env)
                    .map(|(n, _)| n.clone());
                existing.unwrap_or_else(|| {
                    let name = format!("env{}", self.envelopes.len());
                    self.envelopes.insert(name.clone(), env);
                    name
                })
            }
        };
        self.modes.push(PotentialMode {
            harmonic: Harmonic::new(k, cos, sin),
            envelope,
            envelope_name,
        });
        self
    }

    /// `amplitude · cos(2πkq)` with a constant envelope.
    pub fn cosine(k: u32, amplitude: f64) -> Self {
        Self::zero().with_mode(k, amplitude, 0.0, Envelope::Constant)
    }

    pub fn modes(&self) -> &[PotentialMode] {
        &self.modes
    }

    /// True when every mode has zero amplitude.
    pub fn is_zero(&self) -> bool {
        self.modes
            .iter()
            .all(|m| m.harmonic.cos == 0.0 && m.harmonic.sin == 0.0)
    }

    pub fn eval_u(&self, q: f64, t: f64) -> f64 {
        self.modes
            .iter()
            .map(|m| {
                let e = m.envelope.eval(t);
                if e == 0.0 {
                    0.0
                } else {
                    e * m.harmonic.jet(q)[0]
                }
            })
            .sum()
    }

    pub fn eval_force(&self, q: f64, t: f64) -> f64 {
        self.force_and_curvature(q, t).0
    }

    pub fn eval_u_qq(&self, q: f64, t: f64) -> f64 {
        self.force_and_curvature(q, t).1
    }

    /// `∫₀¹ u_q(q,t)² dq` by Parseval. Modes sharing a wavenumber are
    /// combined before squaring.
    pub fn force_energy(&self, t: f64) -> f64 {
        let mut by_k: BTreeMap<u32, (f64, f64)> = BTreeMap::new();
        for m in &self.modes {
            let e = m.envelope.eval(t);
            let entry = by_k.entry(m.harmonic.k).or_default();
            entry.0 += e * m.harmonic.cos;
            entry.1 += e * m.harmonic.sin;
        }
        by_k.iter()
            .map(|(&k, &(a, b))| {
                let w = TAU * k as f64;
                0.5 * w * w * (a * a + b * b)
            })
            .sum()
    }

    /// Time from which the potential vanishes identically, if it does.
    ///
    /// A potential without modes (or with all-zero amplitudes) vanishes
    /// from `−∞`, reported as `Some(f64::NEG_INFINITY)`.
    pub fn vanishing_time(&self) -> Option<f64> {
        let mut latest = f64::NEG_INFINITY;
        for m in &self.modes {
            if m.harmonic.cos == 0.0 && m.harmonic.sin == 0.0 {
                continue;
            }
            latest = latest.max(m.envelope.vanishing_time()?);
        }
        Some(latest)
    }

    /// Upper bound on `|u_qq|` over `[t0, t1] × [0, 1]`. Exact for a single
    /// mode.
    pub fn curvature_bound(&self, t0: f64, t1: f64) -> f64 {
        self.modes
            .iter()
            .map(|m| m.harmonic.derivative_bound(2) * m.envelope.sup_abs(t0, t1))
            .sum()
    }
}

impl Forcing for PotentialSpec {
    fn potential(&self, q: f64, t: f64) -> f64 {
        self.eval_u(q, t)
    }

    fn force(&self, q: f64, t: f64) -> f64 {
        self.eval_force(q, t)
    }

    fn curvature(&self, q: f64, t: f64) -> f64 {
        self.eval_u_qq(q, t)
    }

    #[inline]
    fn force_and_curvature(&self, q: f64, t: f64) -> (f64, f64) {
        let mut f = 0.0;
        let mut c = 0.0;
        for m in &self.modes {
            let e = m.envelope.eval(t);
            if e == 0.0 {
                continue;
            }
            let j = m.harmonic.jet(q);
            f += e * j[1];
            c += e * j[2];
        }
        (f, c)
    }
}

/// `u = c q²/2`, so `u_qq ≡ c`. Not periodic; used only by analytic
/// oracles where the Jacobi equation becomes a harmonic oscillator.
#[cfg(feature = "test-potential")]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantCurvature {
    pub c: f64,
}

#[cfg(feature = "test-potential")]
impl Forcing for ConstantCurvature {
    fn potential(&self, q: f64, _t: f64) -> f64 {
        0.5 * self.c * q * q
    }

    fn force(&self, q: f64, _t: f64) -> f64 {
        self.c * q
    }

    fn curvature(&self, _q: f64, _t: f64) -> f64 {
        self.c
    }
}
