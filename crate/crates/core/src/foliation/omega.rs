use super::{FoliationError, FoliationSpec};
use crate::characteristics::{drive, refine_zero, Jet};
use crate::grid::{circle_points, UniformGrid};
use crate::potential::Forcing;
use rayon::prelude::*;
use std::ops::ControlFlow;

/// Slack in p when deciding whether a grid point lies between two leaves.
const COVERAGE_TOLERANCE: f64 = 1e-9;

/// Slope field `ω(p, q, t) = ∂f_α/∂q` of the leaf through `(p, q)` at time
/// `t`, sampled on `p_grid × {i/n_q}`. Row-major in p.
#[derive(Debug, Clone, PartialEq)]
pub struct OmegaGrid {
    pub t: f64,
    pub p_grid: UniformGrid,
    pub n_q: usize,
    pub omega: Vec<f64>,
    /// Label of the leaf through each point.
    pub alpha: Vec<f64>,
    /// False where `p` lies outside the span of the sampled leaves.
    pub mask: Vec<bool>,
}

impl OmegaGrid {
    #[inline]
    pub fn index(&self, ip: usize, iq: usize) -> usize {
        ip * self.n_q + iq
    }

    pub fn get(&self, ip: usize, iq: usize) -> Option<f64> {
        let k = self.index(ip, iq);
        self.mask[k].then_some(self.omega[k])
    }

    pub fn q_points(&self) -> Vec<f64> {
        circle_points(self.n_q)
    }

    pub fn coverage_gaps(&self) -> usize {
        self.mask.iter().filter(|m| !**m).count()
    }
}

/// A point traced back to the initial leaf it lies on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulledBack {
    pub alpha: f64,
    pub q0: f64,
    pub p0: f64,
    pub omega: f64,
    /// Jacobi field of the leaf at `(q, t)`, normalised to 1 at t = 0.
    pub xi: f64,
}

/// Flows `(q, p)` from time `t` back to t = 0 together with the full 2×2
/// variational matrix, finds the initial leaf through the foot point, and
/// pushes its slope forward: `(ξ, η)(t) = Φ(t←0) (1, φ_q)`.
pub fn pull_back<F: Forcing + ?Sized>(
    spec: &FoliationSpec,
    forcing: &F,
    p: f64,
    q: f64,
    t: f64,
    dt: f64,
) -> Result<PulledBack, FoliationError> {
    let start = Jet {
        q,
        p,
        xi: [1.0, 0.0],
        eta: [0.0, 1.0],
    };
    let foot = if t == 0.0 {
        start
    } else {
        drive(forcing, start, t, 0.0, dt, |_| ControlFlow::Continue(()))?.1
    };
    let alpha = spec.leaf_label(foot.q, foot.p);
    let slope0 = spec.phi_q(alpha, foot.q);
    // Columns of Φ(0←t); its inverse has the same (unit) determinant.
    let (xa, xb, ea, eb) = (foot.xi[0], foot.xi[1], foot.eta[0], foot.eta[1]);
    let det = xa * eb - xb * ea;
    let xi = (eb - xb * slope0) / det;
    let eta = (xa * slope0 - ea) / det;
    if xi.is_nan() || xi <= 0.0 {
        return Err(FoliationError::FoliationBroken { t, q, alpha });
    }
    Ok(PulledBack {
        alpha,
        q0: foot.q,
        p0: foot.p,
        omega: eta / xi,
        xi,
    })
}

/// One leaf evolved to time t: unwrapped positions, heights and slopes.
struct EvolvedLeaf {
    q: Vec<f64>,
    p: Vec<f64>,
    slope: Vec<f64>,
}

impl EvolvedLeaf {
    /// Height of the leaf above `q`, by cubic Hermite interpolation between
    /// neighbouring seeds.
    fn height(&self, q: f64) -> f64 {
        let n = self.q.len();
        let x = self.q[0] + (q - self.q[0]).rem_euclid(1.0);
        let i = self.q.partition_point(|&s| s <= x).saturating_sub(1);
        let (q0, p0, m0) = (self.q[i], self.p[i], self.slope[i]);
        let (q1, p1, m1) = if i + 1 < n {
            (self.q[i + 1], self.p[i + 1], self.slope[i + 1])
        } else {
            (self.q[0] + 1.0, self.p[0], self.slope[0])
        };
        let h = q1 - q0;
        let s = (x - q0) / h;
        let (s2, s3) = (s * s, s * s * s);
        (2.0 * s3 - 3.0 * s2 + 1.0) * p0
            + (s3 - 2.0 * s2 + s) * h * m0
            + (-2.0 * s3 + 3.0 * s2) * p1
            + (s3 - s2) * h * m1
    }
}

fn evolve_leaves<F: Forcing>(
    spec: &FoliationSpec,
    forcing: &F,
    t: f64,
    dt: f64,
) -> Result<Vec<EvolvedLeaf>, FoliationError> {
    spec.leaves()
        .par_iter()
        .map(|leaf| {
            let mut out = EvolvedLeaf {
                q: Vec::with_capacity(leaf.points.len()),
                p: Vec::with_capacity(leaf.points.len()),
                slope: Vec::with_capacity(leaf.points.len()),
            };
            for pt in &leaf.points {
                let jet = Jet {
                    q: pt.q,
                    p: pt.p,
                    xi: [1.0],
                    eta: [pt.slope],
                };
                let mut shock = None;
                let end = if t == 0.0 {
                    jet
                } else {
                    drive(forcing, jet, 0.0, t, dt, |step| {
                        if step.s1.xi[0] <= 0.0 {
                            shock = Some(refine_zero(forcing, step, 0));
                            ControlFlow::Break(())
                        } else {
                            ControlFlow::Continue(())
                        }
                    })?
                    .1
                };
                if let Some(t_shock) = shock {
                    return Err(FoliationError::ShockBeforeTime {
                        alpha: leaf.alpha,
                        q0: pt.q,
                        t_shock,
                    });
                }
                out.q.push(end.q);
                out.p.push(end.p);
                out.slope.push(end.eta[0] / end.xi[0]);
            }
            Ok(out)
        })
        .collect()
}

/// Samples ω on `p_grid × {i/n_q}` at time `t`.
///
/// Every leaf of `spec` is first evolved to `t` (failing if any of them
/// shocks on the way). At each q the evolved heights must still increase
/// with α; grid points outside the span of the leaves are masked. ω at the
/// remaining points comes from [`pull_back`], so it does not depend on how
/// densely the leaves were sampled.
pub fn build_omega_grid<F: Forcing>(
    spec: &FoliationSpec,
    forcing: &F,
    t: f64,
    p_grid: &UniformGrid,
    n_q: usize,
    dt: f64,
) -> Result<OmegaGrid, FoliationError> {
    spec.validate()?;
    p_grid.validate()?;
    if n_q < 2 {
        return Err(FoliationError::Invalid("n_q must be at least 2".into()));
    }
    let leaves = evolve_leaves(spec, forcing, t, dt)?;
    let qs = circle_points(n_q);
    let ps = p_grid.points();

    // Coverage per q column.
    let mut span = Vec::with_capacity(n_q);
    for &q in &qs {
        let heights: Vec<f64> = leaves.iter().map(|l| l.height(q)).collect();
        if let Some(j) = heights.windows(2).position(|w| w[1] <= w[0]) {
            return Err(FoliationError::FoliationBroken {
                t,
                q,
                alpha: spec.alpha_grid[j],
            });
        }
        span.push((heights[0], heights[heights.len() - 1]));
    }

    let cells: Vec<(usize, usize)> = (0..ps.len())
        .flat_map(|ip| (0..n_q).map(move |iq| (ip, iq)))
        .collect();
    let values: Vec<Option<PulledBack>> = cells
        .par_iter()
        .map(|&(ip, iq)| {
            let (lo, hi) = span[iq];
            let p = ps[ip];
            if p < lo - COVERAGE_TOLERANCE || p > hi + COVERAGE_TOLERANCE {
                return Ok(None);
            }
            pull_back(spec, forcing, p, qs[iq], t, dt).map(Some)
        })
        .collect::<Result<_, FoliationError>>()?;

    Ok(OmegaGrid {
        t,
        p_grid: *p_grid,
        n_q,
        omega: values
            .iter()
            .map(|v| v.map_or(f64::NAN, |x| x.omega))
            .collect(),
        alpha: values
            .iter()
            .map(|v| v.map_or(f64::NAN, |x| x.alpha))
            .collect(),
        mask: values.iter().map(Option::is_some).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::FourierSeries;
    use crate::potential::PotentialSpec;
    use std::f64::consts::{PI, TAU};

    fn sheared(alphas: Vec<f64>) -> FoliationSpec {
        FoliationSpec::shifted(FourierSeries::default().with_mode(1, 0.0, 0.1), alphas, 64)
    }

    #[test]
    fn flat_unforced_omega_vanishes() {
        let spec = FoliationSpec::flat(UniformGrid::new(-1.0, 1.0, 9).unwrap().points(), 16);
        let g = UniformGrid::new(-0.5, 0.5, 5).unwrap();
        let grid = build_omega_grid(&spec, &PotentialSpec::zero(), 0.7, &g, 8, 1e-2).unwrap();
        assert!(grid.mask.iter().all(|&m| m));
        assert!(grid.omega.iter().all(|&w| w == 0.0));
    }

    #[test]
    fn sheared_unforced_matches_closed_form() {
        let spec = sheared(UniformGrid::new(-1.0, 1.0, 21).unwrap().points());
        let g = UniformGrid::new(-0.3, 0.3, 7).unwrap();
        let t = 0.8;
        let grid = build_omega_grid(&spec, &PotentialSpec::zero(), t, &g, 16, 1e-2).unwrap();
        for (ip, &p) in g.points().iter().enumerate() {
            for (iq, &q) in grid.q_points().iter().enumerate() {
                // Free motion: the foot point is q − p t.
                let w0 = 0.2 * PI * (TAU * (q - p * t)).cos();
                let exact = w0 / (1.0 + w0 * t);
                assert!((grid.get(ip, iq).unwrap() - exact).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn masks_points_outside_leaf_span() {
        let spec = FoliationSpec::flat(vec![-0.1, 0.0, 0.1], 8);
        let g = UniformGrid::new(-0.2, 0.2, 5).unwrap();
        let grid = build_omega_grid(&spec, &PotentialSpec::zero(), 0.1, &g, 4, 1e-2).unwrap();
        assert_eq!(grid.coverage_gaps(), 2 * 4);
        assert!(grid.get(0, 0).is_none());
        assert!(grid.get(2, 1).is_some());
    }

    #[test]
    fn refuses_times_past_a_shock() {
        let spec = sheared(vec![0.0, 0.5]);
        let g = UniformGrid::new(0.0, 0.2, 3).unwrap();
        let err = build_omega_grid(&spec, &PotentialSpec::zero(), 2.0, &g, 8, 1e-2).unwrap_err();
        match err {
            FoliationError::ShockBeforeTime { t_shock, .. } => {
                assert!((1.0 / (0.2 * PI) - 1e-9..2.0).contains(&t_shock))
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn omega_is_independent_of_leaf_sampling() {
        let pot = PotentialSpec::cosine(1, 0.02);
        let g = UniformGrid::new(-0.1, 0.1, 3).unwrap();
        let coarse = sheared(UniformGrid::new(-0.6, 0.6, 7).unwrap().points());
        // Denser, non-uniform sampling of the same family: ω is a property of
        // the family, not of which leaves were sampled.
        let fine = sheared(
            UniformGrid::new(-0.6, 0.6, 25)
                .unwrap()
                .points()
                .iter()
                .map(|a| a + 0.1 * a * a * a)
                .collect(),
        );
        let a = build_omega_grid(&coarse, &pot, 0.4, &g, 8, 1e-2).unwrap();
        let b = build_omega_grid(&fine, &pot, 0.4, &g, 8, 1e-2).unwrap();
        assert_eq!(a.omega, b.omega);
    }
}
