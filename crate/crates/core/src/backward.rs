//! Foliated initial data that never shocks forward.
//!
//! If the force vanishes for `t ≥ T`, take for each α the characteristics
//! that are straight lines `q = α(t − T) + β` after T, and run them back to
//! t = 0. Their Jacobi fields start from `(ξ, η)(T) = (1, 0)`; as long as ξ
//! stays positive on `[0, T]` the curve `β ↦ (q, p)(0; β)` is a graph, and
//! the graphs for different α fill the cylinder. Forward in time the leaves
//! reassemble into the parallel lines and never fold, so any shock the force
//! produces must lie in negative time.
//!
//! Positivity of ξ follows by comparison with `cos(√c (T − t))` when
//! `|u_qq| ≤ c < (π/(2T))²`; that is the default gate here.

use crate::characteristics::{drive, refine_zero, scan_first_zero, FlowError, Jet};
use crate::foliation::{Leaf, LeafPoint, ShockReport, ShockStatus, Witness};
use crate::grid::circle_points;
use crate::potential::PotentialSpec;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;
use std::ops::ControlFlow;
use thiserror::Error;

/// Tolerance for the straight-line check after the force switches off.
pub const LINE_TOLERANCE: f64 = 1e-7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackwardError {
    #[error("invalid construction input: {0}")]
    Invalid(String),
    #[error("potential does not vanish after T = {cutoff} (vanishing time {vanishing:?})")]
    NotCompactlySupported { cutoff: f64, vanishing: Option<f64> },
    #[error("max |u_qq| = {max_curvature} is not below the admissibility threshold {threshold}")]
    BoundViolated { max_curvature: f64, threshold: f64 },
    #[error("ξ vanishes at t = {t} for α = {alpha}, β = {beta}: construction invalid")]
    FoliationFailed { alpha: f64, beta: f64, t: f64 },
    #[error("forward shock at t = {t} for α = {alpha}, β = {beta}")]
    ForwardShockFound { alpha: f64, beta: f64, t: f64 },
    #[error("characteristic α = {alpha}, β = {beta} leaves its line by {deviation} after T")]
    LineCheckFailed {
        alpha: f64,
        beta: f64,
        deviation: f64,
    },
    #[error("no backward shock within horizon {horizon} for |α| ≤ {alpha_span}")]
    NoBackwardShockWithinHorizon { horizon: f64, alpha_span: f64 },
    #[error(transparent)]
    Flow(#[from] FlowError),
}

/// Which curvature threshold gates the construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AdmissibilityBound {
    /// `(π/(2T))²`, under which the comparison argument applies.
    #[default]
    Strict,
    /// `(π/T)²`; positivity of ξ is then only checked, not guaranteed.
    Paper,
}

impl AdmissibilityBound {
    pub fn threshold(self, cutoff: f64) -> f64 {
        match self {
            AdmissibilityBound::Strict => (PI / (2.0 * cutoff)).powi(2),
            AdmissibilityBound::Paper => (PI / cutoff).powi(2),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundCheck {
    pub bound: AdmissibilityBound,
    /// Upper bound on `|u_qq|` over `[0, T] × [0, 1]`.
    pub max_curvature: f64,
    pub threshold: f64,
}

/// One characteristic of the family, at t = 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstructedPoint {
    pub beta: f64,
    /// Unwrapped position; increasing in β.
    pub q0: f64,
    pub p0: f64,
    /// `∂q/∂β` and `∂p/∂β` at t = 0.
    pub xi0: f64,
    pub eta0: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstructedLeaf {
    pub alpha: f64,
    pub points: Vec<ConstructedPoint>,
    /// `min ξ_β(t)` over β and `t ∈ [0, T]`.
    pub jacobi_min: f64,
    /// `min ξ_β(t) − cos(√c (T − t))`, c the curvature bound. Only defined
    /// when `c T² < (π/2)²`.
    pub sturm_margin: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstructedFoliation {
    pub cutoff: f64,
    pub alpha_grid: Vec<f64>,
    pub beta_grid: Vec<f64>,
    pub leaves: Vec<ConstructedLeaf>,
    pub bound_check: BoundCheck,
}

impl ConstructedFoliation {
    pub fn jacobi_min(&self) -> f64 {
        self.leaves
            .iter()
            .map(|l| l.jacobi_min)
            .fold(f64::INFINITY, f64::min)
    }

    /// Leaves as initial data, positions reduced to `[0, 1)` and sorted.
    pub fn initial_leaves(&self) -> Vec<Leaf> {
        self.leaves
            .iter()
            .map(|leaf| {
                let mut points: Vec<LeafPoint> = leaf
                    .points
                    .iter()
                    .map(|c| LeafPoint {
                        q: c.q0.rem_euclid(1.0),
                        p: c.p0,
                        slope: c.eta0 / c.xi0,
                    })
                    .collect();
                points.sort_by(|a, b| a.q.total_cmp(&b.q));
                Leaf {
                    alpha: leaf.alpha,
                    points,
                }
            })
            .collect()
    }
}

/// Checks support and curvature of `pot` against the chosen threshold.
pub fn check_admissible(
    pot: &PotentialSpec,
    cutoff: f64,
    bound: AdmissibilityBound,
) -> Result<BoundCheck, BackwardError> {
    if !(cutoff > 0.0 && cutoff.is_finite()) {
        return Err(BackwardError::Invalid(format!(
            "cutoff must be positive, got {cutoff}"
        )));
    }
    let vanishing = pot.vanishing_time();
    if vanishing.is_none_or(|v| v > cutoff) {
        return Err(BackwardError::NotCompactlySupported { cutoff, vanishing });
    }
    let check = BoundCheck {
        bound,
        max_curvature: pot.curvature_bound(0.0, cutoff),
        threshold: bound.threshold(cutoff),
    };
    if check.max_curvature >= check.threshold {
        return Err(BackwardError::BoundViolated {
            max_curvature: check.max_curvature,
            threshold: check.threshold,
        });
    }
    Ok(check)
}

/// Builds the family `M_α` for each α, with `n_beta` seeds `β = i/n_beta`.
pub fn construct(
    pot: &PotentialSpec,
    cutoff: f64,
    alpha_grid: &[f64],
    n_beta: usize,
    dt: f64,
    bound: AdmissibilityBound,
) -> Result<ConstructedFoliation, BackwardError> {
    let bound_check = check_admissible(pot, cutoff, bound)?;
    if alpha_grid.is_empty() || alpha_grid.iter().any(|a| !a.is_finite()) {
        return Err(BackwardError::Invalid(
            "alpha grid must be nonempty and finite".into(),
        ));
    }
    if n_beta < 3 {
        return Err(BackwardError::Invalid("need at least 3 β seeds".into()));
    }
    let beta_grid = circle_points(n_beta);
    let c = bound_check.max_curvature;
    let sturm = c.sqrt() * cutoff < 0.5 * PI;

    let leaves = alpha_grid
        .par_iter()
        .map(|&alpha| {
            let mut points = Vec::with_capacity(n_beta);
            let mut jacobi_min = f64::INFINITY;
            let mut sturm_margin = f64::INFINITY;
            for &beta in &beta_grid {
                let start = Jet {
                    q: beta,
                    p: alpha,
                    xi: [1.0],
                    eta: [0.0],
                };
                let mut failed = None;
                let (_, end) = drive(pot, start, cutoff, 0.0, dt, |step| {
                    let xi = step.s1.xi[0];
                    jacobi_min = jacobi_min.min(xi);
                    if sturm {
                        let cmp = (c.sqrt() * (cutoff - step.t1)).cos();
                        sturm_margin = sturm_margin.min(xi - cmp);
                    }
                    if xi <= 0.0 {
                        failed = Some(refine_zero(pot, step, 0));
                        ControlFlow::Break(())
                    } else {
                        ControlFlow::Continue(())
                    }
                })?;
                if let Some(t) = failed {
                    return Err(BackwardError::FoliationFailed { alpha, beta, t });
                }
                points.push(ConstructedPoint {
                    beta,
                    q0: end.q,
                    p0: end.p,
                    xi0: end.xi[0],
                    eta0: end.eta[0],
                });
            }
            Ok(ConstructedLeaf {
                alpha,
                points,
                jacobi_min: jacobi_min.min(1.0),
                sturm_margin: sturm.then_some(sturm_margin.min(0.0)),
            })
        })
        .collect::<Result<Vec<_>, BackwardError>>()?;

    Ok(ConstructedFoliation {
        cutoff,
        alpha_grid: alpha_grid.to_vec(),
        beta_grid,
        leaves,
        bound_check,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ForwardReport {
    pub horizon: f64,
    /// Largest `|(q, p)(T) − (β, α)|` after re-integrating from t = 0.
    pub round_trip_error: f64,
    /// Largest distance from the line `α(t − T) + β` on `[T, horizon]`.
    pub max_line_deviation: f64,
    /// Smallest forward Jacobi field, normalised to 1 at t = 0.
    pub min_xi: f64,
    /// Positions at the horizon stay ordered in β within each leaf.
    pub order_preserved: bool,
}

/// Re-integrates every characteristic forward from t = 0 and confirms that
/// none shocks up to `horizon`, that they return to their seeds at T and
/// follow straight lines afterwards.
pub fn verify_no_forward_shock(
    cf: &ConstructedFoliation,
    pot: &PotentialSpec,
    horizon: f64,
    dt: f64,
) -> Result<ForwardReport, BackwardError> {
    let cutoff = cf.cutoff;
    if !(horizon >= cutoff && horizon.is_finite()) {
        return Err(BackwardError::Invalid(format!(
            "horizon {horizon} is shorter than T = {cutoff}"
        )));
    }
    let per_leaf = cf
        .leaves
        .par_iter()
        .map(|leaf| {
            let alpha = leaf.alpha;
            let mut rt: f64 = 0.0;
            let mut line: f64 = 0.0;
            let mut min_xi = f64::INFINITY;
            let mut finals = Vec::with_capacity(leaf.points.len());
            for pt in &leaf.points {
                let beta = pt.beta;
                let start = Jet {
                    q: pt.q0,
                    p: pt.p0,
                    xi: [1.0],
                    eta: [pt.eta0 / pt.xi0],
                };
                let shock = std::cell::Cell::new(None);
                let mut deviation: f64 = 0.0;
                let mut watch = |step: &crate::characteristics::Step<'_, 1>| {
                    let xi = step.s1.xi[0];
                    min_xi = min_xi.min(xi);
                    if xi <= 0.0 {
                        shock.set(Some(refine_zero(pot, step, 0)));
                        return ControlFlow::Break(());
                    }
                    if step.t1 >= cutoff {
                        let exact = alpha * (step.t1 - cutoff) + beta;
                        deviation = deviation.max((step.s1.q - exact).abs());
                    }
                    ControlFlow::Continue(())
                };
                let (_, at_cutoff) = drive(pot, start, 0.0, cutoff, dt, &mut watch)?;
                let end = if shock.get().is_none() && horizon > cutoff {
                    drive(pot, at_cutoff, cutoff, horizon, dt, &mut watch)?.1
                } else {
                    at_cutoff
                };
                if let Some(t) = shock.get() {
                    return Err(BackwardError::ForwardShockFound { alpha, beta, t });
                }
                rt = rt
                    .max((at_cutoff.q - beta).abs())
                    .max((at_cutoff.p - alpha).abs());
                if deviation >= LINE_TOLERANCE {
                    return Err(BackwardError::LineCheckFailed {
                        alpha,
                        beta,
                        deviation,
                    });
                }
                line = line.max(deviation);
                finals.push(end.q);
            }
            let ordered = finals.windows(2).all(|w| w[1] > w[0]);
            Ok((rt, line, min_xi, ordered))
        })
        .collect::<Result<Vec<_>, BackwardError>>()?;

    Ok(per_leaf.into_iter().fold(
        ForwardReport {
            horizon,
            round_trip_error: 0.0,
            max_line_deviation: 0.0,
            min_xi: 1.0,
            order_preserved: true,
        },
        |acc, (rt, line, xi, ordered)| ForwardReport {
            round_trip_error: acc.round_trip_error.max(rt),
            max_line_deviation: acc.max_line_deviation.max(line),
            min_xi: acc.min_xi.min(xi),
            order_preserved: acc.order_preserved && ordered,
            ..acc
        },
    ))
}

/// Backward shock scan of the constructed leaves from t = 0 down to
/// `−horizon`. Fails with `NoBackwardShockWithinHorizon` if no leaf shocks.
pub fn find_backward_shocks(
    cf: &ConstructedFoliation,
    pot: &PotentialSpec,
    horizon: f64,
    dt: f64,
) -> Result<(Vec<ShockReport>, Witness), BackwardError> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(BackwardError::Invalid(format!(
            "horizon must be positive, got {horizon}"
        )));
    }
    let reports = cf
        .leaves
        .par_iter()
        .map(|leaf| {
            let mut best: Option<(f64, f64)> = None;
            for pt in &leaf.points {
                let start = Jet {
                    q: pt.q0,
                    p: pt.p0,
                    xi: [1.0],
                    eta: [pt.eta0 / pt.xi0],
                };
                let end = best.map_or(-horizon, |b| b.0);
                if let Some(t) = scan_first_zero(pot, start, 0.0, end, dt, 0)? {
                    if best.is_none_or(|b| t > b.0) {
                        best = Some((t, pt.q0.rem_euclid(1.0)));
                    }
                }
            }
            Ok(ShockReport {
                alpha: leaf.alpha,
                forward_shock_time: None,
                backward_shock_time: best.map(|b| b.0),
                shock_seed_q: best.map(|b| b.1),
                status: if best.is_some() {
                    ShockStatus::Backward
                } else {
                    ShockStatus::NoShockWithinHorizon
                },
            })
        })
        .collect::<Result<Vec<_>, BackwardError>>()?;
    match crate::foliation::witness(&reports) {
        Some(w) => Ok((reports, w)),
        None => Err(BackwardError::NoBackwardShockWithinHorizon {
            horizon,
            alpha_span: cf.alpha_grid.iter().fold(0.0, |m: f64, a| m.max(a.abs())),
        }),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackwardSearch {
    pub foliation: ConstructedFoliation,
    pub reports: Vec<ShockReport>,
    pub witness: Witness,
    /// Number of times the α-grid was widened before a shock turned up.
    pub widenings: usize,
}

/// Constructs and scans, doubling the α-grid until a backward shock is found
/// or the grid would exceed `alpha_cap` in absolute value.
#[allow(clippy::too_many_arguments)]
pub fn backward_shock_search(
    pot: &PotentialSpec,
    cutoff: f64,
    alpha_grid: &[f64],
    n_beta: usize,
    horizon: f64,
    dt: f64,
    bound: AdmissibilityBound,
    alpha_cap: f64,
) -> Result<BackwardSearch, BackwardError> {
    let mut grid = alpha_grid.to_vec();
    let mut widenings = 0;
    loop {
        let cf = construct(pot, cutoff, &grid, n_beta, dt, bound)?;
        match find_backward_shocks(&cf, pot, horizon, dt) {
            Ok((reports, witness)) => {
                return Ok(BackwardSearch {
                    foliation: cf,
                    reports,
                    witness,
                    widenings,
                })
            }
            Err(BackwardError::NoBackwardShockWithinHorizon { alpha_span, .. }) => {
                if 2.0 * alpha_span > alpha_cap || alpha_span == 0.0 {
                    return Err(BackwardError::NoBackwardShockWithinHorizon {
                        horizon,
                        alpha_span,
                    });
                }
                grid.iter_mut().for_each(|a| *a *= 2.0);
                widenings += 1;
            }
            Err(e) => return Err(e),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::Envelope;

    fn bump_pot(amp: f64, cutoff: f64) -> PotentialSpec {
        PotentialSpec::zero().with_mode(1, amp, 0.0, Envelope::bump(cutoff))
    }

    #[test]
    fn zero_potential_gives_flat_leaves() {
        let cf = construct(
            &PotentialSpec::zero(),
            1.0,
            &[-1.0, 0.5, 2.0],
            16,
            1e-2,
            Default::default(),
        )
        .unwrap();
        for leaf in &cf.leaves {
            assert_eq!(leaf.jacobi_min, 1.0);
            for pt in &leaf.points {
                assert_eq!(pt.p0, leaf.alpha);
                assert!((pt.q0 - (pt.beta - leaf.alpha)).abs() < 1e-14);
            }
        }
        let err = find_backward_shocks(&cf, &PotentialSpec::zero(), 10.0, 1e-2).unwrap_err();
        assert!(matches!(
            err,
            BackwardError::NoBackwardShockWithinHorizon { .. }
        ));
    }

    #[test]
    fn gates() {
        let steady = PotentialSpec::cosine(1, 0.01);
        assert!(matches!(
            construct(&steady, 1.0, &[0.0], 8, 1e-2, Default::default()),
            Err(BackwardError::NotCompactlySupported { .. })
        ));
        assert!(matches!(
            construct(
                &bump_pot(0.01, 2.0),
                1.0,
                &[0.0],
                8,
                1e-2,
                Default::default()
            ),
            Err(BackwardError::NotCompactlySupported { .. })
        ));
        // 4 (π/T)² curvature from a single mode: amp (2π)² = 4π².
        assert!(matches!(
            construct(
                &bump_pot(1.0, 1.0),
                1.0,
                &[0.0],
                8,
                1e-2,
                Default::default()
            ),
            Err(BackwardError::BoundViolated { .. })
        ));
        // (π/2)² < 0.5 π² < π²: rejected by the strict gate, accepted by the paper's.
        let mid = bump_pot(0.5 * PI * PI / (4.0 * PI * PI), 1.0);
        assert!(check_admissible(&mid, 1.0, AdmissibilityBound::Strict).is_err());
        assert!(check_admissible(&mid, 1.0, AdmissibilityBound::Paper).is_ok());
    }

    #[test]
    fn admissible_bump_constructs_and_stays_smooth_forward() {
        // max |u_qq| = amp (2π)² = 0.5 (π/2)².
        let amp = 0.5 * (PI / 2.0).powi(2) / (4.0 * PI * PI);
        let pot = bump_pot(amp, 1.0);
        let alphas: Vec<f64> = (-4..=4).map(|i| 0.25 * i as f64).collect();
        let cf = construct(&pot, 1.0, &alphas, 32, 1e-3, Default::default()).unwrap();
        assert!(cf.jacobi_min() > 0.0);
        for leaf in &cf.leaves {
            assert!(leaf.sturm_margin.unwrap() >= -1e-9);
            assert!(leaf.points.windows(2).all(|w| w[1].q0 > w[0].q0));
        }
        let fwd = verify_no_forward_shock(&cf, &pot, 3.0, 1e-3).unwrap();
        assert!(fwd.round_trip_error < 1e-8, "{}", fwd.round_trip_error);
        assert!(fwd.max_line_deviation < LINE_TOLERANCE);
        assert!(fwd.order_preserved);
        assert!(fwd.min_xi > 0.0);
    }

    #[test]
    fn initial_leaves_are_sorted_periodic_graphs() {
        let pot = bump_pot(0.01, 1.0);
        let cf = construct(&pot, 1.0, &[0.3], 16, 1e-2, Default::default()).unwrap();
        let leaves = cf.initial_leaves();
        let q: Vec<f64> = leaves[0].points.iter().map(|p| p.q).collect();
        assert!(q.windows(2).all(|w| w[1] > w[0]));
        assert!(q[0] >= 0.0 && q[q.len() - 1] < 1.0);
    }
}
