//! Foliated initial data `p = φ(α, q)` and what can be certified about it.
//!
//! The family is restricted to
//!
//! ```text
//! φ(α, q) = α + ψ(q) + ε sin(α) χ(q)
//! ```
//!
//! with ψ, χ trigonometric sums, so periodicity in q holds by construction
//! and `∂φ/∂α = 1 + ε cos(α) χ(q)` can be checked analytically on a grid.
//!
//! Leaves themselves ([`Leaf`]) are just sampled graphs with slopes; they can
//! also come from a CSV file, from the backward construction, or from level
//! sets of a conserved polynomial.

mod flux;
mod omega;
mod scan;

pub use flux::{
    divergence_check, divergence_convergence, pde_residual, pde_residual_convergence,
    ConvergenceReport, DivergenceReport, FluxField, PdeResidualReport,
};
pub use omega::{build_omega_grid, pull_back, OmegaGrid, PulledBack};
pub use scan::{
    shock_scan, shock_scan_spec, witness, write_reports_csv, ShockReport, ShockStatus, Witness,
};

use crate::characteristics::FlowError;
use crate::fourier::FourierSeries;
use crate::grid::{circle_points, GridError, UniformGrid};
use crate::table::{num, CsvWriter};
use serde::{Deserialize, Serialize};
use std::io::{self, BufRead, Write};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FoliationError {
    #[error("invalid foliation: {0}")]
    Invalid(String),
    #[error("∂φ/∂α = {derivative} ≤ 0 at α = {alpha}, q = {q}")]
    MonotonicityViolation { alpha: f64, q: f64, derivative: f64 },
    #[error("p = {p} at q = {q}, t = {t} is not covered by the sampled leaves")]
    CoverageGap { p: f64, q: f64, t: f64 },
    #[error("leaves are no longer ordered in α at t = {t}, q = {q} (near α = {alpha})")]
    FoliationBroken { t: f64, q: f64, alpha: f64 },
    #[error("leaf α = {alpha} shocks at t = {t_shock} (seed q = {q0}) before the requested time")]
    ShockBeforeTime { alpha: f64, q0: f64, t_shock: f64 },
    #[error("horizon must be positive and finite, got {0}")]
    InvalidHorizon(f64),
    #[error("leaf file line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Flow(#[from] FlowError),
}

/// `ε sin(α) χ(q)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlphaCoupling {
    pub epsilon: f64,
    pub profile: FourierSeries,
}

/// Leaf labels, either listed or as an inclusive uniform range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum AlphaGridJson {
    List(Vec<f64>),
    Range(UniformGrid),
}

fn alpha_from_json<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
    Ok(match AlphaGridJson::deserialize(d)? {
        AlphaGridJson::List(v) => v,
        AlphaGridJson::Range(g) => {
            g.validate().map_err(serde::de::Error::custom)?;
            g.points()
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FoliationSpec {
    #[serde(default)]
    pub base_shift: FourierSeries,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_coupling: Option<AlphaCoupling>,
    #[serde(deserialize_with = "alpha_from_json")]
    pub alpha_grid: Vec<f64>,
    pub q_grid_size: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationReport {
    pub min_dphi_dalpha: f64,
    pub argmin: (f64, f64),
    /// `max |φ(α, q+1) − φ(α, q)|` over the grid.
    pub periodicity_defect: f64,
}

impl FoliationSpec {
    /// Leaves `φ(α, q) = α + ψ(q)`.
    pub fn shifted(base_shift: FourierSeries, alpha_grid: Vec<f64>, q_grid_size: usize) -> Self {
        Self {
            base_shift,
            alpha_coupling: None,
            alpha_grid,
            q_grid_size,
        }
    }

    /// Flat leaves `φ(α, q) = α`.
    pub fn flat(alpha_grid: Vec<f64>, q_grid_size: usize) -> Self {
        Self::shifted(FourierSeries::default(), alpha_grid, q_grid_size)
    }

    pub fn with_coupling(mut self, epsilon: f64, profile: FourierSeries) -> Self {
        self.alpha_coupling = Some(AlphaCoupling { epsilon, profile });
        self
    }

    pub fn phi(&self, alpha: f64, q: f64) -> f64 {
        let mut v = alpha + self.base_shift.eval(q);
        if let Some(c) = &self.alpha_coupling {
            v += c.epsilon * alpha.sin() * c.profile.eval(q);
        }
        v
    }

    pub fn phi_q(&self, alpha: f64, q: f64) -> f64 {
        let mut v = self.base_shift.d1(q);
        if let Some(c) = &self.alpha_coupling {
            v += c.epsilon * alpha.sin() * c.profile.d1(q);
        }
        v
    }

    pub fn phi_alpha(&self, alpha: f64, q: f64) -> f64 {
        match &self.alpha_coupling {
            Some(c) => 1.0 + c.epsilon * alpha.cos() * c.profile.eval(q),
            None => 1.0,
        }
    }

    fn seeds(&self) -> Vec<f64> {
        circle_points(self.q_grid_size)
    }

    /// Checks the grids, q-periodicity and `∂φ/∂α > 0` on every grid point.
    pub fn validate(&self) -> Result<ValidationReport, FoliationError> {
        if self.alpha_grid.is_empty() {
            return Err(FoliationError::Invalid("alpha_grid is empty".into()));
        }
        if self.q_grid_size < 2 {
            return Err(FoliationError::Invalid(
                "q_grid_size must be at least 2".into(),
            ));
        }
        if self.alpha_grid.iter().any(|a| !a.is_finite()) {
            return Err(FoliationError::Invalid(
                "alpha_grid has non-finite labels".into(),
            ));
        }
        if self.alpha_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(FoliationError::Invalid(
                "alpha_grid must be strictly increasing".into(),
            ));
        }
        self.base_shift
            .validate()
            .map_err(|e| FoliationError::Invalid(format!("base_shift: {e}")))?;
        if let Some(c) = &self.alpha_coupling {
            c.profile
                .validate()
                .map_err(|e| FoliationError::Invalid(format!("alpha_coupling: {e}")))?;
            if !c.epsilon.is_finite() {
                return Err(FoliationError::Invalid("epsilon is not finite".into()));
            }
        }
        let mut report = ValidationReport {
            min_dphi_dalpha: f64::INFINITY,
            argmin: (f64::NAN, f64::NAN),
            periodicity_defect: 0.0,
        };
        let seeds = self.seeds();
        for &alpha in &self.alpha_grid {
            for &q in &seeds {
                let d = self.phi_alpha(alpha, q);
                if d < report.min_dphi_dalpha {
                    report.min_dphi_dalpha = d;
                    report.argmin = (alpha, q);
                }
                let defect = (self.phi(alpha, q + 1.0) - self.phi(alpha, q)).abs();
                report.periodicity_defect = report.periodicity_defect.max(defect);
            }
        }
        if report.min_dphi_dalpha <= 0.0 {
            return Err(FoliationError::MonotonicityViolation {
                alpha: report.argmin.0,
                q: report.argmin.1,
                derivative: report.min_dphi_dalpha,
            });
        }
        Ok(report)
    }

    /// Sup of `|φ(α, q) − α|`, used to bracket leaf lookups.
    fn shift_bound(&self) -> f64 {
        let coupling = self
            .alpha_coupling
            .as_ref()
            .map(|c| c.epsilon.abs() * (c.profile.mean.abs() + c.profile.oscillation_bound()))
            .unwrap_or(0.0);
        self.base_shift.mean.abs() + self.base_shift.oscillation_bound() + coupling
    }

    /// The label α of the leaf through `(q, p)` at t = 0.
    ///
    /// `α ↦ φ(α, q)` is increasing, so this is a safeguarded Newton solve on
    /// a bracket of half-width [`Self::shift_bound`] around `p`.
    pub fn leaf_label(&self, q: f64, p: f64) -> f64 {
        let g = |a: f64| self.phi(a, q) - p;
        let b = self.shift_bound() + 1e-12;
        let (mut lo, mut hi) = (p - b, p + b);
        let mut a = p - self.base_shift.eval(q);
        if !(lo..=hi).contains(&a) {
            a = 0.5 * (lo + hi);
        }
        for _ in 0..200 {
            let v = g(a);
            if v == 0.0 {
                return a;
            }
            if v < 0.0 {
                lo = a;
            } else {
                hi = a;
            }
            let newton = a - v / self.phi_alpha(a, q);
            let next = if newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if (next - a).abs() <= 1e-15 * (1.0 + a.abs()) {
                return next;
            }
            a = next;
        }
        a
    }

    /// Samples every leaf at the seeds `i / q_grid_size`.
    pub fn leaves(&self) -> Vec<Leaf> {
        let seeds = self.seeds();
        self.alpha_grid
            .iter()
            .map(|&alpha| Leaf {
                alpha,
                points: seeds
                    .iter()
                    .map(|&q| LeafPoint {
                        q,
                        p: self.phi(alpha, q),
                        slope: self.phi_q(alpha, q),
                    })
                    .collect(),
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeafPoint {
    pub q: f64,
    pub p: f64,
    /// `dp/dq` along the leaf.
    pub slope: f64,
}

/// A sampled leaf graph at t = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Leaf {
    pub alpha: f64,
    pub points: Vec<LeafPoint>,
}

/// Columns `alpha,q0,p0,dp_dq`.
pub fn write_leaves_csv<W: Write>(leaves: &[Leaf], out: W) -> io::Result<W> {
    let mut w = CsvWriter::new(out, &["alpha", "q0", "p0", "dp_dq"])?;
    for leaf in leaves {
        for pt in &leaf.points {
            w.row(&[num(leaf.alpha), num(pt.q), num(pt.p), num(pt.slope)])?;
        }
    }
    w.finish()
}

/// Reads `alpha,q0,p0[,dp_dq]` rows. Rows with equal alpha form one leaf.
/// Without a slope column, slopes are second-order periodic finite
/// differences along each leaf.
pub fn read_leaves_csv<R: BufRead>(input: R) -> Result<Vec<Leaf>, FoliationError> {
    let mut lines = input.lines().enumerate();
    let header = match lines.next() {
        Some((_, l)) => l.map_err(|e| parse_err(1, e.to_string()))?,
        None => return Err(parse_err(1, "empty file".into())),
    };
    let cols: Vec<&str> = header.trim().split(',').map(str::trim).collect();
    let has_slope = match cols.as_slice() {
        ["alpha", "q0", "p0"] => false,
        ["alpha", "q0", "p0", "dp_dq"] => true,
        _ => return Err(parse_err(1, format!("unexpected header `{header}`"))),
    };
    let mut leaves: Vec<Leaf> = Vec::new();
    for (i, line) in lines {
        let line = line.map_err(|e| parse_err(i + 1, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let vals: Result<Vec<f64>, _> = line.split(',').map(|c| c.trim().parse::<f64>()).collect();
        let vals = vals.map_err(|e| parse_err(i + 1, e.to_string()))?;
        if vals.len() != cols.len() {
            return Err(parse_err(i + 1, format!("expected {} cells", cols.len())));
        }
        let pt = LeafPoint {
            q: vals[1],
            p: vals[2],
            slope: if has_slope { vals[3] } else { f64::NAN },
        };
        match leaves.last_mut() {
            Some(l) if l.alpha == vals[0] => l.points.push(pt),
            _ => leaves.push(Leaf {
                alpha: vals[0],
                points: vec![pt],
            }),
        }
    }
    if !has_slope {
        for leaf in &mut leaves {
            fill_slopes(leaf).map_err(|r| parse_err(0, r))?;
        }
    }
    Ok(leaves)
}

fn parse_err(line: usize, reason: String) -> FoliationError {
    FoliationError::Parse { line, reason }
}

/// Three-point nonuniform derivative on a periodic leaf.
fn fill_slopes(leaf: &mut Leaf) -> Result<(), String> {
    let n = leaf.points.len();
    if n < 3 {
        return Err(format!("leaf α = {} has fewer than 3 points", leaf.alpha));
    }
    leaf.points
        .sort_by(|a, b| a.q.rem_euclid(1.0).total_cmp(&b.q.rem_euclid(1.0)));
    let qs: Vec<f64> = leaf.points.iter().map(|p| p.q.rem_euclid(1.0)).collect();
    let ps: Vec<f64> = leaf.points.iter().map(|p| p.p).collect();
    for i in 0..n {
        let (im, ip) = ((i + n - 1) % n, (i + 1) % n);
        let mut h1 = qs[i] - qs[im];
        let mut h2 = qs[ip] - qs[i];
        if i == 0 {
            h1 += 1.0;
        }
        if i == n - 1 {
            h2 += 1.0;
        }
        let d = -h2 / (h1 * (h1 + h2)) * ps[im]
            + (h2 - h1) / (h1 * h2) * ps[i]
            + h1 / (h2 * (h1 + h2)) * ps[ip];
        leaf.points[i].slope = d;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{PI, TAU};

    fn alphas() -> Vec<f64> {
        UniformGrid::new(-2.0, 2.0, 41).unwrap().points()
    }

    #[test]
    fn identity_foliation_is_valid() {
        let r = FoliationSpec::flat(alphas(), 64).validate().unwrap();
        assert_eq!(r.min_dphi_dalpha, 1.0);
        assert_eq!(r.periodicity_defect, 0.0);
    }

    #[test]
    fn shifted_foliation_is_valid() {
        let spec = FoliationSpec::shifted(
            FourierSeries::default().with_mode(1, 0.0, 0.1),
            alphas(),
            64,
        );
        let r = spec.validate().unwrap();
        assert_eq!(r.min_dphi_dalpha, 1.0);
        assert!(r.periodicity_defect < 1e-15);
    }

    #[test]
    fn strong_coupling_breaks_monotonicity() {
        let spec = FoliationSpec::flat(alphas(), 64)
            .with_coupling(2.0, FourierSeries::default().with_mode(1, 0.0, 1.0));
        // Dense scan: 1 + 2 cos(α) sin(2πq) on a 401 × 400 grid.
        let mut dense_min = f64::INFINITY;
        for i in 0..=400 {
            let a = -2.0 + 4.0 * i as f64 / 400.0;
            for j in 0..400 {
                let q = j as f64 / 400.0;
                dense_min = dense_min.min(1.0 + 2.0 * a.cos() * (TAU * q).sin());
            }
        }
        assert!(dense_min < 0.0);
        match spec.validate() {
            Err(FoliationError::MonotonicityViolation {
                derivative,
                alpha,
                q,
            }) => {
                assert!((derivative - dense_min).abs() < 1e-12);
                assert_eq!(alpha, 0.0);
                assert_eq!(q, 0.75);
            }
            other => panic!("expected violation, got {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(FoliationSpec::flat(vec![], 8).validate().is_err());
        assert!(FoliationSpec::flat(vec![1.0, 0.0], 8).validate().is_err());
        assert!(FoliationSpec::flat(vec![0.0], 1).validate().is_err());
    }

    #[test]
    fn leaf_label_inverts_phi() {
        let spec = FoliationSpec::shifted(
            FourierSeries::constant(0.1).with_mode(2, 0.2, 0.05),
            alphas(),
            16,
        )
        .with_coupling(0.3, FourierSeries::default().with_mode(1, 1.0, 0.0));
        spec.validate().unwrap();
        for &a in &[-1.7, -0.2, 0.0, 0.9, 3.5] {
            for &q in &[0.0, 0.31, 0.8] {
                let p = spec.phi(a, q);
                assert!((spec.leaf_label(q, p) - a).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn leaves_sample_phi_and_slope() {
        let spec = FoliationSpec::shifted(
            FourierSeries::default().with_mode(1, 0.0, 0.1),
            vec![0.5],
            4,
        );
        let leaves = spec.leaves();
        assert_eq!(leaves.len(), 1);
        let pts = &leaves[0].points;
        assert_eq!(pts.len(), 4);
        assert!((pts[1].p - 0.6).abs() < 1e-15);
        assert!((pts[2].slope + 0.2 * PI).abs() < 1e-14);
    }

    #[test]
    fn leaf_csv_round_trip_and_slope_reconstruction() {
        let spec = FoliationSpec::shifted(
            FourierSeries::default().with_mode(1, 0.0, 0.1),
            vec![-0.5, 0.5],
            256,
        );
        let leaves = spec.leaves();
        let bytes = write_leaves_csv(&leaves, Vec::new()).unwrap();
        let back = read_leaves_csv(bytes.as_slice()).unwrap();
        assert_eq!(back, leaves);

        let text = String::from_utf8(bytes).unwrap();
        let mut three = String::from("alpha,q0,p0\n");
        for line in text.lines().skip(1) {
            let cells: Vec<&str> = line.split(',').collect();
            three.push_str(&cells[..3].join(","));
            three.push('\n');
        }
        let approx = read_leaves_csv(three.as_bytes()).unwrap();
        for (a, b) in approx.iter().zip(&leaves) {
            for (x, y) in a.points.iter().zip(&b.points) {
                assert!((x.slope - y.slope).abs() < 1e-3);
            }
        }
        assert!(read_leaves_csv("a,b\n".as_bytes()).is_err());
        assert!(read_leaves_csv("alpha,q0,p0\n1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn alpha_grid_accepts_list_or_range() {
        let a: FoliationSpec =
            serde_json::from_str(r#"{"alpha_grid":[0.0,1.0],"q_grid_size":8}"#).unwrap();
        assert_eq!(a.alpha_grid, vec![0.0, 1.0]);
        let b: FoliationSpec = serde_json::from_str(
            r#"{"alpha_grid":{"start":-1.0,"end":1.0,"count":3},"q_grid_size":8,
                "base_shift":{"modes":[{"k":1,"sin":0.1}]}}"#,
        )
        .unwrap();
        assert_eq!(b.alpha_grid, vec![-1.0, 0.0, 1.0]);
        assert!(serde_json::from_str::<FoliationSpec>(
            r#"{"alpha_grid":[0.0],"q_grid_size":8,"bogus":1}"#
        )
        .is_err());
    }
}
