use super::{csv, invalid};
use crate::report::{Check, Outcome};
use crate::scenario::{ConfigError, Scenario};
use crate::RunOptions;
use shocklab::backward::{
    backward_shock_search, construct, verify_no_forward_shock, AdmissibilityBound, BackwardError,
    ConstructedFoliation, LINE_TOLERANCE,
};
use shocklab::foliation::{write_leaves_csv, write_reports_csv, ShockReport};
use shocklab::table::{num, opt, CsvWriter};

/// Tolerance on `sup |φ_α − α|` for the zero-potential control.
const FLAT_TOLERANCE: f64 = 1e-9;

fn construction_csv(cf: &ConstructedFoliation, reports: &[ShockReport]) -> Vec<u8> {
    csv(|b| {
        let mut w = CsvWriter::new(
            b,
            &[
                "alpha",
                "jacobi_min",
                "sturm_margin",
                "t_backward",
                "q_seed",
            ],
        )?;
        for leaf in &cf.leaves {
            let r = reports.iter().find(|r| r.alpha == leaf.alpha);
            w.row(&[
                num(leaf.alpha),
                num(leaf.jacobi_min),
                opt(leaf.sturm_margin),
                opt(r.and_then(|r| r.backward_shock_time)),
                opt(r.and_then(|r| r.shock_seed_q)),
            ])?;
        }
        w.finish()
    })
}

pub fn theorem2(sc: &Scenario, opts: RunOptions) -> Result<Outcome, ConfigError> {
    let s = sc.section(&sc.theorem2, "theorem2")?;
    let pot = &sc.potential;
    let dt = sc.numerics.dt;
    let bound = if opts.paper_bound {
        AdmissibilityBound::Paper
    } else {
        AdmissibilityBound::Strict
    };
    let mut out = Outcome::new();
    out.result("bound", bound);
    out.result("cutoff", s.cutoff);

    let cf = match construct(pot, s.cutoff, &s.alpha_grid, s.n_beta, dt, bound) {
        Ok(cf) => cf,
        Err(e @ BackwardError::FoliationFailed { .. }) => {
            out.check(Check::flag("construction", false).with_detail(e.to_string()));
            return Ok(out);
        }
        Err(e) => return Err(invalid("theorem2", e)),
    };
    let bc = cf.bound_check;
    out.result("max_curvature", bc.max_curvature);
    out.result("threshold", bc.threshold);
    out.result("jacobi_min", cf.jacobi_min());
    let sturm: Vec<f64> = cf.leaves.iter().filter_map(|l| l.sturm_margin).collect();
    if sturm.len() == cf.leaves.len() {
        let m = sturm.into_iter().fold(f64::INFINITY, f64::min);
        out.check(Check::at_least("sturm_comparison_margin", m, -1e-9));
    }
    out.check(Check::positive("jacobi_min", cf.jacobi_min()));
    out.file(
        "initial_data.csv",
        csv(|b| write_leaves_csv(&cf.initial_leaves(), b)),
    );

    let fwd_horizon = s.forward_horizon.unwrap_or(3.0 * s.cutoff);
    match verify_no_forward_shock(&cf, pot, fwd_horizon, dt) {
        Ok(r) => {
            out.result("forward_horizon", fwd_horizon);
            out.result("forward_min_xi", r.min_xi);
            out.check(Check::flag("no_forward_shock", true));
            out.check(Check::below(
                "round_trip_error",
                r.round_trip_error,
                sc.numerics.tolerances.round_trip,
            ));
            out.check(Check::below(
                "line_deviation",
                r.max_line_deviation,
                LINE_TOLERANCE,
            ));
            out.check(Check::flag("order_preserved", r.order_preserved));
        }
        Err(
            e @ (BackwardError::ForwardShockFound { .. } | BackwardError::LineCheckFailed { .. }),
        ) => {
            out.check(Check::flag("no_forward_shock", false).with_detail(e.to_string()));
        }
        Err(e) => return Err(invalid("theorem2", e)),
    }

    if pot.is_zero() {
        let err = cf
            .leaves
            .iter()
            .flat_map(|l| l.points.iter().map(move |p| (p.p0 - l.alpha).abs()))
            .fold(0.0, f64::max);
        out.check(Check::below("zero_force_leaves_flat", err, FLAT_TOLERANCE));
        out.result("backward_scan", "vacuous (zero force)");
        out.file("results.csv", construction_csv(&cf, &[]));
        return Ok(out);
    }

    let b_horizon = s.backward_horizon.unwrap_or(sc.numerics.horizon);
    let b_dt = s.backward_dt.unwrap_or(dt);
    out.result("backward_horizon", b_horizon);
    match backward_shock_search(
        pot,
        s.cutoff,
        &s.alpha_grid,
        s.n_beta,
        b_horizon,
        b_dt,
        bound,
        s.alpha_cap,
    ) {
        Ok(search) => {
            out.result("backward_scan", "shock found");
            out.result("widenings", search.widenings);
            out.result("witness_alpha", search.witness.alpha);
            out.result("witness_time", search.witness.t);
            out.file(
                "results.csv",
                construction_csv(&search.foliation, &search.reports),
            );
            out.file(
                "shock_times.csv",
                csv(|b| write_reports_csv(&search.reports, b)),
            );
        }
        Err(BackwardError::NoBackwardShockWithinHorizon { alpha_span, .. }) => {
            out.result("backward_scan", "inconclusive: no shock within horizon");
            out.result("alpha_span_reached", alpha_span);
            out.inconclusive = true;
            out.file("results.csv", construction_csv(&cf, &[]));
        }
        Err(e @ BackwardError::FoliationFailed { .. }) => {
            out.check(Check::flag("widened_construction", false).with_detail(e.to_string()));
        }
        Err(e) => return Err(invalid("theorem2", e)),
    }
    Ok(out)
}
