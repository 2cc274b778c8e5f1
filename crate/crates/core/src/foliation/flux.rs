//! Integrated identities satisfied by the slope field ω.
//!
//! Integrating the ω transport equation over one period in q gives, at
//! every `(p, t)`,
//!
//! ```text
//! −∂t ∫ω dq + ∂p ∫ω u_q dq = ∫ω² dq
//! ```
//!
//! i.e. `div V = ∫ω² dq` for `V₁ = −∫ω dq` (differentiated in t) and
//! `V₂ = ∫ω u_q dq` (differentiated in p). Both this identity and the
//! pointwise transport equation are checked with central differences.

use super::{build_omega_grid, FoliationError, FoliationSpec, OmegaGrid};
use crate::grid::{circle_points, simpson_periodic, GridError, UniformGrid};
use crate::potential::Forcing;
use crate::table::{num, opt, CsvWriter};
use std::io::{self, Write};

/// `V₁, V₂` and the source `∫ω² dq` on a `(p, t)` grid, row-major in t.
#[derive(Debug, Clone, PartialEq)]
pub struct FluxField {
    pub p_grid: UniformGrid,
    pub t_grid: UniformGrid,
    pub v1: Vec<f64>,
    pub v2: Vec<f64>,
    pub source: Vec<f64>,
    /// Signed residual `∂t V₁ + ∂p V₂ − source` at interior points.
    pub residual: Vec<Option<f64>>,
}

impl FluxField {
    #[inline]
    pub fn index(&self, ip: usize, it: usize) -> usize {
        it * self.p_grid.count + ip
    }

    /// Columns `p,t,V1,V2,source,residual`; boundary residuals are empty.
    pub fn write_csv<W: Write>(&self, out: W) -> io::Result<W> {
        let mut w = CsvWriter::new(out, &["p", "t", "V1", "V2", "source", "residual"])?;
        for it in 0..self.t_grid.count {
            for ip in 0..self.p_grid.count {
                let k = self.index(ip, it);
                w.row(&[
                    num(self.p_grid.point(ip)),
                    num(self.t_grid.point(it)),
                    num(self.v1[k]),
                    num(self.v2[k]),
                    num(self.source[k]),
                    opt(self.residual[k]),
                ])?;
            }
        }
        w.finish()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DivergenceReport {
    pub flux: FluxField,
    pub max_residual: f64,
    /// `(p, t)` of the largest residual.
    pub argmax: (f64, f64),
}

/// Maximum residuals under successive grid halvings.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ConvergenceReport {
    pub steps: Vec<f64>,
    pub max_residuals: Vec<f64>,
    /// `log2(r_h / r_{h/2})` for consecutive levels.
    pub orders: Vec<f64>,
}

impl ConvergenceReport {
    fn new(steps: Vec<f64>, max_residuals: Vec<f64>) -> Self {
        let orders = max_residuals
            .windows(2)
            .map(|w| (w[0] / w[1]).log2())
            .collect();
        Self {
            steps,
            max_residuals,
            orders,
        }
    }

    pub fn min_order(&self) -> f64 {
        self.orders.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn finest_residual(&self) -> f64 {
        *self.max_residuals.last().unwrap_or(&f64::NAN)
    }

    /// Columns `h,max_residual`.
    pub fn write_csv<W: Write>(&self, out: W) -> io::Result<W> {
        let mut w = CsvWriter::new(out, &["h", "max_residual"])?;
        for (h, r) in self.steps.iter().zip(&self.max_residuals) {
            w.nums(&[*h, *r])?;
        }
        w.finish()
    }
}

fn require_stencil(grid: &UniformGrid, what: &str) -> Result<(), FoliationError> {
    grid.validate()?;
    if grid.count < 3 {
        return Err(FoliationError::Invalid(format!(
            "{what} needs at least 3 points for central differences"
        )));
    }
    Ok(())
}

fn require_even(n_q: usize) -> Result<(), FoliationError> {
    if n_q < 2 || n_q % 2 == 1 {
        return Err(GridError::PeriodicParity(n_q).into());
    }
    Ok(())
}

fn full_column(grid: &OmegaGrid, ip: usize) -> Result<&[f64], FoliationError> {
    let row = &grid.omega[grid.index(ip, 0)..grid.index(ip, 0) + grid.n_q];
    let mask = &grid.mask[grid.index(ip, 0)..grid.index(ip, 0) + grid.n_q];
    if let Some(iq) = mask.iter().position(|m| !m) {
        return Err(FoliationError::CoverageGap {
            p: grid.p_grid.point(ip),
            q: iq as f64 / grid.n_q as f64,
            t: grid.t,
        });
    }
    Ok(row)
}

/// Computes `V₁, V₂` and `∫ω² dq` by periodic Simpson quadrature in q on
/// every `(p, t)` of the grids, then the central-difference residual of
/// `∂t V₁ + ∂p V₂ = ∫ω² dq` at interior points.
pub fn divergence_check<F: Forcing>(
    spec: &FoliationSpec,
    forcing: &F,
    p_grid: &UniformGrid,
    t_grid: &UniformGrid,
    n_q: usize,
    dt: f64,
) -> Result<DivergenceReport, FoliationError> {
    require_stencil(p_grid, "p_grid")?;
    require_stencil(t_grid, "t_grid")?;
    require_even(n_q)?;
    let qs = circle_points(n_q);
    let (np, nt) = (p_grid.count, t_grid.count);
    let mut v1 = vec![0.0; np * nt];
    let mut v2 = vec![0.0; np * nt];
    let mut source = vec![0.0; np * nt];
    for it in 0..nt {
        let t = t_grid.point(it);
        let grid = build_omega_grid(spec, forcing, t, p_grid, n_q, dt)?;
        let force: Vec<f64> = qs.iter().map(|&q| forcing.force(q, t)).collect();
        for ip in 0..np {
            let w = full_column(&grid, ip)?;
            let k = it * np + ip;
            v1[k] = -simpson_periodic(w)?;
            let wf: Vec<f64> = w.iter().zip(&force).map(|(a, b)| a * b).collect();
            v2[k] = simpson_periodic(&wf)?;
            let w2: Vec<f64> = w.iter().map(|a| a * a).collect();
            source[k] = simpson_periodic(&w2)?;
        }
    }
    let (hp, ht) = (p_grid.step(), t_grid.step());
    let mut residual = vec![None; np * nt];
    let mut max_residual = 0.0_f64;
    let mut argmax = (f64::NAN, f64::NAN);
    for it in 1..nt - 1 {
        for ip in 1..np - 1 {
            let k = it * np + ip;
            let d_t = (v1[k + np] - v1[k - np]) / (2.0 * ht);
            let d_p = (v2[k + 1] - v2[k - 1]) / (2.0 * hp);
            let r = d_t + d_p - source[k];
            residual[k] = Some(r);
            if r.abs() > max_residual {
                max_residual = r.abs();
                argmax = (p_grid.point(ip), t_grid.point(it));
            }
        }
    }
    Ok(DivergenceReport {
        flux: FluxField {
            p_grid: *p_grid,
            t_grid: *t_grid,
            v1,
            v2,
            source,
            residual,
        },
        max_residual,
        argmax,
    })
}

/// Runs [`divergence_check`] on `levels` successively halved grids and
/// compares the maximum residual over the interior points of the coarsest
/// grid, which every finer grid contains.
pub fn divergence_convergence<F: Forcing>(
    spec: &FoliationSpec,
    forcing: &F,
    p_grid: &UniformGrid,
    t_grid: &UniformGrid,
    n_q: usize,
    levels: usize,
    dt: f64,
) -> Result<(ConvergenceReport, DivergenceReport), FoliationError> {
    if levels < 2 {
        return Err(FoliationError::Invalid(
            "a convergence study needs at least 2 levels".into(),
        ));
    }
    let mut steps = Vec::new();
    let mut maxima = Vec::new();
    let (mut pg, mut tg) = (*p_grid, *t_grid);
    let mut finest = None;
    for level in 0..levels {
        let report = divergence_check(spec, forcing, &pg, &tg, n_q, dt)?;
        let stride = 1usize << level;
        let mut m = 0.0_f64;
        for it in 1..t_grid.count - 1 {
            for ip in 1..p_grid.count - 1 {
                let k = report.flux.index(ip * stride, it * stride);
                m = m.max(report.flux.residual[k].map_or(0.0, f64::abs));
            }
        }
        steps.push(pg.step().max(tg.step()));
        maxima.push(m);
        finest = Some(report);
        pg = pg.refined();
        tg = tg.refined();
    }
    Ok((ConvergenceReport::new(steps, maxima), finest.unwrap()))
}

/// Residual of `ω_t + p ω_q − u_q ω_p + ω² + u_qq = 0` on a `(p, q)` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PdeResidualReport {
    pub t: f64,
    pub p_grid: UniformGrid,
    pub n_q: usize,
    /// Row-major in p; `None` on the p boundary and next to masked points.
    pub residual: Vec<Option<f64>>,
    pub max_residual: f64,
    pub argmax: (f64, f64),
}

impl PdeResidualReport {
    /// Columns `p,q,residual`.
    pub fn write_csv<W: Write>(&self, out: W) -> io::Result<W> {
        let mut w = CsvWriter::new(out, &["p", "q", "residual"])?;
        for ip in 0..self.p_grid.count {
            for iq in 0..self.n_q {
                w.row(&[
                    num(self.p_grid.point(ip)),
                    num(iq as f64 / self.n_q as f64),
                    opt(self.residual[ip * self.n_q + iq]),
                ])?;
            }
        }
        w.finish()
    }
}

/// Central differences with step `h = p_grid.step()` in t and p, and
/// `1/n_q` (periodic) in q.
pub fn pde_residual<F: Forcing>(
    spec: &FoliationSpec,
    forcing: &F,
    t: f64,
    p_grid: &UniformGrid,
    n_q: usize,
    dt: f64,
) -> Result<PdeResidualReport, FoliationError> {
    require_stencil(p_grid, "p_grid")?;
    if n_q < 3 {
        return Err(FoliationError::Invalid("n_q must be at least 3".into()));
    }
    let h = p_grid.step();
    let hq = 1.0 / n_q as f64;
    let before = build_omega_grid(spec, forcing, t - h, p_grid, n_q, dt)?;
    let now = build_omega_grid(spec, forcing, t, p_grid, n_q, dt)?;
    let after = build_omega_grid(spec, forcing, t + h, p_grid, n_q, dt)?;
    let qs = circle_points(n_q);
    let np = p_grid.count;
    let mut residual = vec![None; np * n_q];
    let mut max_residual = 0.0_f64;
    let mut argmax = (f64::NAN, f64::NAN);
    for ip in 1..np - 1 {
        let p = p_grid.point(ip);
        for iq in 0..n_q {
            let (qm, qp) = ((iq + n_q - 1) % n_q, (iq + 1) % n_q);
            let stencil = (
                now.get(ip, iq),
                before.get(ip, iq),
                after.get(ip, iq),
                now.get(ip, qm),
                now.get(ip, qp),
                now.get(ip - 1, iq),
                now.get(ip + 1, iq),
            );
            let (Some(w), Some(wb), Some(wa), Some(wqm), Some(wqp), Some(wpm), Some(wpp)) = stencil
            else {
                continue;
            };
            let (force, curvature) = forcing.force_and_curvature(qs[iq], t);
            let r = (wa - wb) / (2.0 * h) + p * (wqp - wqm) / (2.0 * hq)
                - force * (wpp - wpm) / (2.0 * h)
                + w * w
                + curvature;
            residual[ip * n_q + iq] = Some(r);
            if r.abs() > max_residual {
                max_residual = r.abs();
                argmax = (p, qs[iq]);
            }
        }
    }
    Ok(PdeResidualReport {
        t,
        p_grid: *p_grid,
        n_q,
        residual,
        max_residual,
        argmax,
    })
}

/// [`pde_residual`] under successive halvings of every step, compared on
/// the interior points of the coarsest grid.
pub fn pde_residual_convergence<F: Forcing>(
    spec: &FoliationSpec,
    forcing: &F,
    t: f64,
    p_grid: &UniformGrid,
    n_q: usize,
    levels: usize,
    dt: f64,
) -> Result<(ConvergenceReport, PdeResidualReport), FoliationError> {
    if levels < 2 {
        return Err(FoliationError::Invalid(
            "a convergence study needs at least 2 levels".into(),
        ));
    }
    let mut steps = Vec::new();
    let mut maxima = Vec::new();
    let mut pg = *p_grid;
    let mut finest = None;
    for level in 0..levels {
        let nq = n_q << level;
        let report = pde_residual(spec, forcing, t, &pg, nq, dt)?;
        let stride = 1usize << level;
        let mut m = 0.0_f64;
        for ip in 1..p_grid.count - 1 {
            for iq in 0..n_q {
                let k = (ip * stride) * nq + iq * stride;
                m = m.max(report.residual[k].map_or(0.0, f64::abs));
            }
        }
        steps.push(pg.step().max(1.0 / nq as f64));
        maxima.push(m);
        finest = Some(report);
        pg = pg.refined();
    }
    Ok((ConvergenceReport::new(steps, maxima), finest.unwrap()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::FourierSeries;
    use crate::potential::PotentialSpec;

    fn alphas() -> Vec<f64> {
        UniformGrid::new(-1.0, 1.0, 21).unwrap().points()
    }

    #[test]
    fn flat_unforced_flux_vanishes() {
        let spec = FoliationSpec::flat(alphas(), 16);
        let pg = UniformGrid::new(-0.2, 0.2, 5).unwrap();
        let tg = UniformGrid::new(0.1, 0.5, 5).unwrap();
        let r = divergence_check(&spec, &PotentialSpec::zero(), &pg, &tg, 8, 1e-2).unwrap();
        assert!(r
            .flux
            .v1
            .iter()
            .chain(&r.flux.v2)
            .chain(&r.flux.source)
            .all(|&v| v == 0.0));
        assert_eq!(r.max_residual, 0.0);
        let pde = pde_residual(&spec, &PotentialSpec::zero(), 0.3, &pg, 8, 1e-2).unwrap();
        assert_eq!(pde.max_residual, 0.0);
    }

    /// For free motion `∫ω dq` does not depend on p, so the identity reduces
    /// to `−d/dt ∫ω dq = ∫ω² dq`. With `ω = g/(1+g t)`, `g = 0.2π cos`, the
    /// derivative is exact; compare V₁ against a fine quadrature of the
    /// closed form and check the sign pairing.
    #[test]
    fn sheared_unforced_sign_pairing() {
        use std::f64::consts::{PI, TAU};
        let spec = FoliationSpec::shifted(
            FourierSeries::default().with_mode(1, 0.0, 0.1),
            alphas(),
            64,
        );
        let pg = UniformGrid::new(-0.1, 0.1, 3).unwrap();
        let tg = UniformGrid::new(0.3, 0.5, 3).unwrap();
        let r = divergence_check(&spec, &PotentialSpec::zero(), &pg, &tg, 64, 1e-2).unwrap();
        let closed = |t: f64, power: i32| -> f64 {
            let n = 4096;
            (0..n)
                .map(|i| {
                    let g = 0.2 * PI * (TAU * i as f64 / n as f64).cos();
                    (g / (1.0 + g * t)).powi(power)
                })
                .sum::<f64>()
                / n as f64
        };
        let k = r.flux.index(1, 1);
        assert!((r.flux.v1[k] + closed(0.4, 1)).abs() < 1e-12);
        assert!((r.flux.source[k] - closed(0.4, 2)).abs() < 1e-12);
        assert!(r.flux.v2.iter().all(|&v| v == 0.0));
        // Second-order accurate in h = 0.1.
        assert!(r.max_residual < 1e-3, "{}", r.max_residual);
        // Flipping the sign of the time term would leave a residual of order
        // 2·source.
        let flipped = -(r.flux.v1[k + 3] - r.flux.v1[k - 3]) / 0.2 - r.flux.source[k];
        assert!(flipped.abs() > 0.1);
    }

    #[test]
    fn rejects_degenerate_grids() {
        let spec = FoliationSpec::flat(alphas(), 16);
        let pg = UniformGrid::new(-0.2, 0.2, 2).unwrap();
        let tg = UniformGrid::new(0.1, 0.5, 5).unwrap();
        assert!(divergence_check(&spec, &PotentialSpec::zero(), &pg, &tg, 8, 1e-2).is_err());
        let pg = UniformGrid::new(-0.2, 0.2, 3).unwrap();
        assert!(matches!(
            divergence_check(&spec, &PotentialSpec::zero(), &pg, &tg, 7, 1e-2),
            Err(FoliationError::Grid(GridError::PeriodicParity(7)))
        ));
    }

    #[test]
    fn coverage_gap_propagates() {
        let spec = FoliationSpec::flat(vec![-0.1, 0.0, 0.1], 16);
        let pg = UniformGrid::new(-0.2, 0.2, 5).unwrap();
        let tg = UniformGrid::new(0.1, 0.5, 3).unwrap();
        assert!(matches!(
            divergence_check(&spec, &PotentialSpec::zero(), &pg, &tg, 8, 1e-2),
            Err(FoliationError::CoverageGap { .. })
        ));
    }
}
