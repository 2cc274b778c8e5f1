use super::{csv, invalid};
use crate::report::{Check, Outcome};
use crate::scenario::{ConfigError, Scenario};
use serde_json::json;
use shocklab::foliation::{
    shock_scan as scan, witness, write_reports_csv, Leaf, ShockReport, ShockStatus,
};
use shocklab::table::{num, opt, CsvWriter};
use shocklab::{flow, CharPoint, Forcing};

/// Seeds drawn in the characteristic fan.
const FAN_SEEDS: usize = 16;
/// Rows kept per fan polyline.
const FAN_SAMPLES: usize = 200;

pub fn shock_scan(sc: &Scenario) -> Result<Outcome, ConfigError> {
    let spec = sc.foliation()?;
    let v = spec.validate().map_err(|e| invalid("foliation", e))?;
    let mut out = Outcome::new();
    out.check(
        Check::positive("foliation_monotone", v.min_dphi_dalpha).with_detail(format!(
            "min ∂φ/∂α at (α, q) = ({}, {})",
            v.argmin.0, v.argmin.1
        )),
    );
    scan_into(
        &mut out,
        &spec.leaves(),
        &sc.potential,
        sc.numerics.horizon,
        sc.numerics.dt,
    )?;
    Ok(out)
}

/// Scans `leaves`, records per-status counts and the witness, and emits
/// `results.csv`, `shock_times.csv` and `fan.csv`.
pub(crate) fn scan_into<F: Forcing>(
    out: &mut Outcome,
    leaves: &[Leaf],
    forcing: &F,
    horizon: f64,
    dt: f64,
) -> Result<Vec<ShockReport>, ConfigError> {
    let reports = scan(leaves, forcing, horizon, dt).map_err(|e| invalid("numerics", e))?;
    let count = |s: ShockStatus| reports.iter().filter(|r| r.status == s).count();
    out.result("leaves", reports.len());
    out.result("horizon", horizon);
    out.result("dt", dt);
    out.result(
        "status_counts",
        json!({
            "no_shock_within_horizon": count(ShockStatus::NoShockWithinHorizon),
            "forward": count(ShockStatus::Forward),
            "backward": count(ShockStatus::Backward),
            "both": count(ShockStatus::Both),
        }),
    );
    out.result("reports", &reports);
    let w = witness(&reports);
    match w {
        Some(w) => {
            out.result("witness_alpha", w.alpha);
            out.result("witness_time", w.t);
            out.result("witness_index", w.index);
        }
        None => out.result("witness", "none"),
    }
    out.file("results.csv", csv(|b| write_reports_csv(&reports, b)));
    out.file("shock_times.csv", shock_times(&reports));

    let (leaf_idx, t_end) = match w {
        Some(w) => (w.index, (1.25 * w.t).clamp(-horizon, horizon)),
        None => (0, horizon),
    };
    if let Some(leaf) = leaves.get(leaf_idx) {
        out.file("fan.csv", fan(leaf, forcing, t_end, dt)?);
    }
    Ok(reports)
}

fn shock_times(reports: &[ShockReport]) -> Vec<u8> {
    csv(|b| {
        let mut w = CsvWriter::new(b, &["alpha", "t_forward", "t_backward"])?;
        for r in reports {
            w.row(&[
                num(r.alpha),
                opt(r.forward_shock_time),
                opt(r.backward_shock_time),
            ])?;
        }
        w.finish()
    })
}

/// `(t, q)` polylines of up to [`FAN_SEEDS`] characteristics of one leaf.
fn fan<F: Forcing>(leaf: &Leaf, forcing: &F, t_end: f64, dt: f64) -> Result<Vec<u8>, ConfigError> {
    let stride = leaf.points.len().div_ceil(FAN_SEEDS).max(1);
    let mut rows = Vec::new();
    for pt in leaf.points.iter().step_by(stride) {
        let traj = flow(
            forcing,
            CharPoint::new(pt.q, pt.p, 1.0, pt.slope, 0.0),
            t_end,
            dt,
        )
        .map_err(|e| invalid("numerics.dt", e))?;
        let every = traj.samples.len().div_ceil(FAN_SAMPLES).max(1);
        let last = traj.samples.len() - 1;
        for (i, s) in traj.samples.iter().enumerate() {
            if i % every == 0 || i == last {
                rows.push([pt.q, s.t, s.q, s.p]);
            }
        }
    }
    Ok(csv(|b| {
        let mut w = CsvWriter::new(b, &["seed_q", "t", "q", "p"])?;
        for r in &rows {
            w.nums(r)?;
        }
        w.finish()
    }))
}
