use super::{FoliationError, FoliationSpec, Leaf};
use crate::characteristics::{scan_first_zero, Jet};
use crate::potential::Forcing;
use crate::table::{num, opt, CsvWriter};
use rayon::prelude::*;
use serde::Serialize;
use std::io::{self, Write};

/// Leaves whose shock times differ by less than this are treated as tied
/// when picking a witness, so mirror-symmetric leaves resolve by index.
const WITNESS_TIE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ShockStatus {
    NoShockWithinHorizon,
    Forward,
    Backward,
    Both,
}

impl ShockStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            ShockStatus::NoShockWithinHorizon => "no_shock_within_horizon",
            ShockStatus::Forward => "forward",
            ShockStatus::Backward => "backward",
            ShockStatus::Both => "both",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShockReport {
    pub alpha: f64,
    /// Earliest positive time at which some seed's Jacobi field vanishes.
    pub forward_shock_time: Option<f64>,
    /// Latest negative such time.
    pub backward_shock_time: Option<f64>,
    /// Seed of whichever shock is closer to t = 0.
    pub shock_seed_q: Option<f64>,
    pub status: ShockStatus,
}

impl ShockReport {
    fn from_times(alpha: f64, fwd: Option<(f64, f64)>, bwd: Option<(f64, f64)>) -> Self {
        let status = match (fwd, bwd) {
            (None, None) => ShockStatus::NoShockWithinHorizon,
            (Some(_), None) => ShockStatus::Forward,
            (None, Some(_)) => ShockStatus::Backward,
            (Some(_), Some(_)) => ShockStatus::Both,
        };
        let seed = match (fwd, bwd) {
            (Some((tf, qf)), Some((tb, qb))) => Some(if tf <= -tb { qf } else { qb }),
            (Some((_, q)), None) | (None, Some((_, q))) => Some(q),
            (None, None) => None,
        };
        Self {
            alpha,
            forward_shock_time: fwd.map(|x| x.0),
            backward_shock_time: bwd.map(|x| x.0),
            shock_seed_q: seed,
            status,
        }
    }
}

/// Integrates every seed of every leaf forward to `+horizon` and backward to
/// `−horizon` with Jacobi data `(ξ, η) = (1, dp/dq)`, and reports the first
/// vanishing of ξ in each direction.
///
/// Leaves are processed in parallel; the output order follows `leaves`.
pub fn shock_scan<F: Forcing>(
    leaves: &[Leaf],
    forcing: &F,
    horizon: f64,
    dt: f64,
) -> Result<Vec<ShockReport>, FoliationError> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(FoliationError::InvalidHorizon(horizon));
    }
    leaves
        .par_iter()
        .map(|leaf| scan_leaf(leaf, forcing, horizon, dt))
        .collect()
}

/// Validates the foliation, samples its leaves and scans them.
pub fn shock_scan_spec<F: Forcing>(
    spec: &FoliationSpec,
    forcing: &F,
    horizon: f64,
    dt: f64,
) -> Result<Vec<ShockReport>, FoliationError> {
    spec.validate()?;
    shock_scan(&spec.leaves(), forcing, horizon, dt)
}

fn scan_leaf<F: Forcing>(
    leaf: &Leaf,
    forcing: &F,
    horizon: f64,
    dt: f64,
) -> Result<ShockReport, FoliationError> {
    let mut fwd: Option<(f64, f64)> = None;
    let mut bwd: Option<(f64, f64)> = None;
    for pt in &leaf.points {
        let jet = Jet {
            q: pt.q,
            p: pt.p,
            xi: [1.0],
            eta: [pt.slope],
        };
        // Seeds only need to be followed until they beat the current best.
        let fwd_end = fwd.map_or(horizon, |(t, _)| t);
        if let Some(t) = scan_first_zero(forcing, jet, 0.0, fwd_end, dt, 0)? {
            if fwd.is_none_or(|(best, _)| t < best) {
                fwd = Some((t, pt.q));
            }
        }
        let bwd_end = bwd.map_or(-horizon, |(t, _)| t);
        if let Some(t) = scan_first_zero(forcing, jet, 0.0, bwd_end, dt, 0)? {
            if bwd.is_none_or(|(best, _)| t > best) {
                bwd = Some((t, pt.q));
            }
        }
    }
    Ok(ShockReport::from_times(leaf.alpha, fwd, bwd))
}

/// The leaf that demonstrates shock formation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Witness {
    pub index: usize,
    pub alpha: f64,
    /// Signed shock time.
    pub t: f64,
}

/// Earliest forward shock if any leaf has one, otherwise the backward shock
/// closest to t = 0. Near-ties go to the lower index.
pub fn witness(reports: &[ShockReport]) -> Option<Witness> {
    let pick = |times: Vec<(usize, f64)>| -> Option<Witness> {
        let best = times
            .iter()
            .map(|x| x.1.abs())
            .fold(f64::INFINITY, f64::min);
        times
            .into_iter()
            .find(|x| x.1.abs() <= best + WITNESS_TIE)
            .map(|(index, t)| Witness {
                index,
                alpha: reports[index].alpha,
                t,
            })
    };
    let fwd: Vec<(usize, f64)> = reports
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.forward_shock_time.map(|t| (i, t)))
        .collect();
    if !fwd.is_empty() {
        return pick(fwd);
    }
    pick(
        reports
            .iter()
            .enumerate()
            .filter_map(|(i, r)| r.backward_shock_time.map(|t| (i, t)))
            .collect(),
    )
}

/// Columns `alpha,status,t_forward,t_backward,q_seed`; absent times are empty.
pub fn write_reports_csv<W: Write>(reports: &[ShockReport], out: W) -> io::Result<W> {
    let mut w = CsvWriter::new(
        out,
        &["alpha", "status", "t_forward", "t_backward", "q_seed"],
    )?;
    for r in reports {
        w.row(&[
            num(r.alpha),
            r.status.as_str().to_string(),
            opt(r.forward_shock_time),
            opt(r.backward_shock_time),
            opt(r.shock_seed_q),
        ])?;
    }
    w.finish()
}
