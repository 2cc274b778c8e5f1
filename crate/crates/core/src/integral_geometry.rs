//! Ring fluxes of planar vector fields.
//!
//! For a C¹ field V on the plane, with `φ(r) = ∮_{S_r} ⟨V, n⟩`:
//!
//! * `∮_{S_r} div V = φ'(r)` (divergence theorem, differentiated in r),
//! * `∮_{S_r} |V|² ≥ φ(r)² / (2πr)` (Cauchy–Schwarz against n),
//!
//! so `div V ≥ C|V|²` on an annulus forces `φ' ≥ C φ² / (2πr)` there. The
//! comparison equation `ψ' = C ψ² / (2πr)` blows up at
//! `r* = r₀ exp(2π / (C ψ(r₀)))`, which is why such a field cannot be
//! nonzero on the whole plane.
//!
//! Fields come from a closed-form catalog so divergences are exact.

use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::io::{self, Write};
use thiserror::Error;

use crate::table::CsvWriter;

pub const MIN_ANGULAR_SAMPLES: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("radii must be positive, finite and strictly increasing")]
    InvalidRadii,
    #[error("need at least {MIN_ANGULAR_SAMPLES} angular samples, got {0}")]
    TooFewAngles(usize),
    #[error("the constant C must be positive and finite, got {0}")]
    InvalidConstant(f64),
    #[error("div V ≥ C|V|² fails from r = {radius} (min slack {min_slack})")]
    InequalityNotApplicable { radius: f64, min_slack: f64 },
}

/// `coef · x^px · y^py`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Monomial {
    pub coef: f64,
    #[serde(default)]
    pub px: u32,
    #[serde(default)]
    pub py: u32,
}

fn poly_eval(terms: &[Monomial], x: f64, y: f64) -> f64 {
    terms
        .iter()
        .map(|m| m.coef * x.powi(m.px as i32) * y.powi(m.py as i32))
        .sum()
}

fn poly_dx(terms: &[Monomial], x: f64, y: f64) -> f64 {
    terms
        .iter()
        .filter(|m| m.px > 0)
        .map(|m| m.coef * m.px as f64 * x.powi(m.px as i32 - 1) * y.powi(m.py as i32))
        .sum()
}

fn poly_dy(terms: &[Monomial], x: f64, y: f64) -> f64 {
    terms
        .iter()
        .filter(|m| m.py > 0)
        .map(|m| m.coef * m.py as f64 * x.powi(m.px as i32) * y.powi(m.py as i32 - 1))
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum PlanarField {
    Zero,
    /// `scale · (x, y)`.
    Radial {
        scale: f64,
    },
    /// `scale · (−y, x)`.
    Rotation {
        scale: f64,
    },
    /// `A (x, y) + b`.
    Linear {
        matrix: [[f64; 2]; 2],
        offset: [f64; 2],
    },
    /// `amplitude · (x − c) · exp(−|x − c|² / width²)`.
    Gaussian {
        amplitude: f64,
        width: f64,
        #[serde(default)]
        center: [f64; 2],
    },
    Polynomial {
        vx: Vec<Monomial>,
        vy: Vec<Monomial>,
    },
}

impl PlanarField {
    pub fn eval(&self, x: f64, y: f64) -> [f64; 2] {
        match self {
            PlanarField::Zero => [0.0, 0.0],
            PlanarField::Radial { scale } => [scale * x, scale * y],
            PlanarField::Rotation { scale } => [-scale * y, scale * x],
            PlanarField::Linear { matrix, offset } => [
                matrix[0][0] * x + matrix[0][1] * y + offset[0],
                matrix[1][0] * x + matrix[1][1] * y + offset[1],
            ],
            PlanarField::Gaussian {
                amplitude,
                width,
                center,
            } => {
                let (dx, dy) = (x - center[0], y - center[1]);
                let g = amplitude * (-(dx * dx + dy * dy) / (width * width)).exp();
                [g * dx, g * dy]
            }
            PlanarField::Polynomial { vx, vy } => [poly_eval(vx, x, y), poly_eval(vy, x, y)],
        }
    }

    pub fn divergence(&self, x: f64, y: f64) -> f64 {
        match self {
            PlanarField::Zero | PlanarField::Rotation { .. } => 0.0,
            PlanarField::Radial { scale } => 2.0 * scale,
            PlanarField::Linear { matrix, .. } => matrix[0][0] + matrix[1][1],
            PlanarField::Gaussian {
                amplitude,
                width,
                center,
            } => {
                let (dx, dy) = (x - center[0], y - center[1]);
                let rho2 = (dx * dx + dy * dy) / (width * width);
                amplitude * (-rho2).exp() * (2.0 - 2.0 * rho2)
            }
            PlanarField::Polynomial { vx, vy } => poly_dx(vx, x, y) + poly_dy(vy, x, y),
        }
    }

    /// `div V − C |V|²` at a point.
    pub fn slack(&self, c: f64, x: f64, y: f64) -> f64 {
        let v = self.eval(x, y);
        self.divergence(x, y) - c * (v[0] * v[0] + v[1] * v[1])
    }

    fn min_slack_on_circle(&self, c: f64, r: f64, n_angular: usize) -> f64 {
        (0..n_angular)
            .map(|k| {
                let th = TAU * k as f64 / n_angular as f64;
                self.slack(c, r * th.cos(), r * th.sin())
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// Ring integrals sampled at increasing radii.
#[derive(Debug, Clone, PartialEq)]
pub struct FluxProfile {
    pub radii: Vec<f64>,
    /// `∮ ⟨V, n⟩`.
    pub phi: Vec<f64>,
    /// `∮ div V`.
    pub ring_div: Vec<f64>,
    /// `∮ |V|²`.
    pub ring_norm: Vec<f64>,
}

impl FluxProfile {
    /// `∮|V|² − φ²/(2πr)`, nonnegative by Cauchy–Schwarz.
    pub fn cs_slack(&self) -> Vec<f64> {
        self.radii
            .iter()
            .zip(self.phi.iter().zip(&self.ring_norm))
            .map(|(&r, (&phi, &norm))| norm - phi * phi / (TAU * r))
            .collect()
    }

    /// `φ' − C φ²/(2πr)` with `φ' = ∮ div V`.
    pub fn ode_slack(&self, c: f64) -> Vec<f64> {
        self.radii
            .iter()
            .zip(self.phi.iter().zip(&self.ring_div))
            .map(|(&r, (&phi, &d))| d - c * phi * phi / (TAU * r))
            .collect()
    }

    /// `max |Δφ/Δr − ∮ div V|` over interior radii, using central
    /// differences on a (possibly nonuniform) radius grid.
    pub fn flux_derivative_defect(&self) -> f64 {
        let r = &self.radii;
        (1..r.len().saturating_sub(1))
            .map(|i| {
                let (h1, h2) = (r[i] - r[i - 1], r[i + 1] - r[i]);
                let d = -h2 / (h1 * (h1 + h2)) * self.phi[i - 1]
                    + (h2 - h1) / (h1 * h2) * self.phi[i]
                    + h1 / (h2 * (h1 + h2)) * self.phi[i + 1];
                (d - self.ring_div[i]).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Columns `r,phi,ring_div,ring_norm,cs_slack,ode_slack`.
    pub fn write_csv<W: Write>(&self, c: f64, out: W) -> io::Result<W> {
        let mut w = CsvWriter::new(
            out,
            &["r", "phi", "ring_div", "ring_norm", "cs_slack", "ode_slack"],
        )?;
        let cs = self.cs_slack();
        let ode = self.ode_slack(c);
        for i in 0..self.radii.len() {
            w.nums(&[
                self.radii[i],
                self.phi[i],
                self.ring_div[i],
                self.ring_norm[i],
                cs[i],
                ode[i],
            ])?;
        }
        w.finish()
    }
}

fn check_radii(radii: &[f64]) -> Result<(), GeometryError> {
    if radii.is_empty()
        || radii.iter().any(|r| !(r.is_finite() && *r > 0.0))
        || radii.windows(2).any(|w| w[1] <= w[0])
    {
        return Err(GeometryError::InvalidRadii);
    }
    Ok(())
}

/// Trapezoidal ring integrals (spectrally accurate for smooth periodic
/// integrands).
pub fn flux_profile(
    field: &PlanarField,
    radii: &[f64],
    n_angular: usize,
) -> Result<FluxProfile, GeometryError> {
    check_radii(radii)?;
    if n_angular < MIN_ANGULAR_SAMPLES {
        return Err(GeometryError::TooFewAngles(n_angular));
    }
    let trig: Vec<(f64, f64)> = (0..n_angular)
        .map(|k| (TAU * k as f64 / n_angular as f64).sin_cos())
        .collect();
    let mut out = FluxProfile {
        radii: radii.to_vec(),
        phi: Vec::with_capacity(radii.len()),
        ring_div: Vec::with_capacity(radii.len()),
        ring_norm: Vec::with_capacity(radii.len()),
    };
    for &r in radii {
        let w = TAU * r / n_angular as f64;
        let (mut flux, mut div, mut norm) = (0.0, 0.0, 0.0);
        for &(s, c) in &trig {
            let (x, y) = (r * c, r * s);
            let v = field.eval(x, y);
            flux += v[0] * c + v[1] * s;
            div += field.divergence(x, y);
            norm += v[0] * v[0] + v[1] * v[1];
        }
        out.phi.push(w * flux);
        out.ring_div.push(w * div);
        out.ring_norm.push(w * norm);
    }
    Ok(out)
}

/// Radius at which the comparison equation `ψ' = C ψ²/(2πr)`, `ψ(r₀) = ψ₀`,
/// blows up. None when `ψ₀ ≤ 0` (the solution stays finite for r > r₀).
pub fn comparison_blowup_radius(psi0: f64, c: f64, r0: f64) -> Option<f64> {
    (psi0 > 0.0).then(|| r0 * (TAU / (c * psi0)).exp())
}

/// Numerical blow-up radius: RK4 on the reciprocal `w = 1/ψ`, which solves
/// `w' = −C/(2πr)` and reaches zero exactly where ψ blows up. The zero is
/// located by bisecting the last step. Gives up past `r_max`.
pub fn integrate_comparison(psi0: f64, c: f64, r0: f64, r_max: f64, dr: f64) -> Option<f64> {
    if psi0 <= 0.0 {
        return None;
    }
    let rhs = |r: f64| -c / (TAU * r);
    let step = |r: f64, w: f64, h: f64| {
        let k1 = rhs(r);
        let k2 = rhs(r + 0.5 * h);
        let k4 = rhs(r + h);
        w + h / 6.0 * (k1 + 4.0 * k2 + k4)
    };
    let (mut r, mut w) = (r0, 1.0 / psi0);
    while r < r_max {
        let h = dr.min(r_max - r);
        let next = step(r, w, h);
        if next <= 0.0 {
            let (mut lo, mut hi) = (0.0, h);
            while hi - lo > 1e-14 * r {
                let mid = 0.5 * (lo + hi);
                if step(r, w, mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return Some(r + 0.5 * (lo + hi));
        }
        r += h;
        w = next;
    }
    None
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub c: f64,
    pub r0: f64,
    pub r1: f64,
    /// Smallest sampled `div V − C|V|²` on the annulus (≥ 0 here).
    pub min_pointwise_slack: f64,
    pub profile: FluxProfile,
    /// Smallest `φ' − Cφ²/(2πr)` over the sampled radii.
    pub min_ode_slack: f64,
    /// Smallest `φ(r) − ψ(r)`, ψ the comparison solution from `φ(r₀)`.
    pub min_comparison_gap: f64,
    pub blowup_radius: Option<f64>,
    pub blowup_radius_numeric: Option<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct ComparisonOptions {
    pub n_radii: usize,
    pub n_angular: usize,
}

impl Default for ComparisonOptions {
    fn default() -> Self {
        Self {
            n_radii: 401,
            n_angular: 256,
        }
    }
}

/// Checks `div V ≥ C|V|²` on the annulus `[r0, r1]` by dense sampling. If it
/// holds, verifies the ring inequality `φ' ≥ C φ²/(2πr)` and compares φ with
/// the comparison solution. If it fails, reports the smallest radius from
/// which it fails, refined by bisection.
pub fn comparison_ode_check(
    field: &PlanarField,
    c: f64,
    r0: f64,
    r1: f64,
    opts: ComparisonOptions,
) -> Result<ComparisonReport, GeometryError> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(GeometryError::InvalidConstant(c));
    }
    if !(r0 > 0.0 && r1 > r0 && r1.is_finite()) || opts.n_radii < 3 {
        return Err(GeometryError::InvalidRadii);
    }
    if opts.n_angular < MIN_ANGULAR_SAMPLES {
        return Err(GeometryError::TooFewAngles(opts.n_angular));
    }
    let radii: Vec<f64> = (0..opts.n_radii)
        .map(|i| r0 + (r1 - r0) * i as f64 / (opts.n_radii - 1) as f64)
        .collect();
    let ring_min = |r: f64| field.min_slack_on_circle(c, r, opts.n_angular);
    let mut min_pointwise = f64::INFINITY;
    for (i, &r) in radii.iter().enumerate() {
        let m = ring_min(r);
        if m < 0.0 {
            let radius = if i == 0 {
                r
            } else {
                let (mut lo, mut hi) = (radii[i - 1], r);
                while hi - lo > 1e-13 * hi {
                    let mid = 0.5 * (lo + hi);
                    if ring_min(mid) < 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                0.5 * (lo + hi)
            };
            return Err(GeometryError::InequalityNotApplicable {
                radius,
                min_slack: m,
            });
        }
        min_pointwise = min_pointwise.min(m);
    }

    let profile = flux_profile(field, &radii, opts.n_angular)?;
    let min_ode_slack = profile
        .ode_slack(c)
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    let psi0 = profile.phi[0];
    let blowup = comparison_blowup_radius(psi0, c, r0);
    // ψ(r) = 1 / (1/ψ₀ − C ln(r/r₀)/(2π)) while finite.
    let min_gap = radii
        .iter()
        .zip(&profile.phi)
        .filter(|(r, _)| blowup.is_none_or(|b| **r < b))
        .map(|(&r, &phi)| {
            let psi = if psi0 == 0.0 {
                0.0
            } else {
                1.0 / (1.0 / psi0 - c * (r / r0).ln() / TAU)
            };
            phi - psi
        })
        .fold(f64::INFINITY, f64::min);
    let numeric = blowup.and_then(|b| integrate_comparison(psi0, c, r0, 2.0 * b, (b - r0) / 1e4));
    Ok(ComparisonReport {
        c,
        r0,
        r1,
        min_pointwise_slack: min_pointwise,
        profile,
        min_ode_slack,
        min_comparison_gap: min_gap,
        blowup_radius: blowup,
        blowup_radius_numeric: numeric,
    })
}
