use super::{csv, invalid};
use crate::report::{Check, Outcome};
use crate::scenario::{ConfigError, Scenario};
use shocklab::foliation::{
    divergence_convergence, pde_residual_convergence, ConvergenceReport, FoliationError,
};

/// Numerical breakdowns (shock before t, broken ordering, coverage gaps) are
/// findings; anything else is a configuration problem.
fn classify(out: &mut Outcome, e: FoliationError) -> Result<(), ConfigError> {
    match e {
        FoliationError::CoverageGap { .. }
        | FoliationError::FoliationBroken { .. }
        | FoliationError::ShockBeforeTime { .. } => {
            out.check(Check::flag("omega_grid", false).with_detail(e.to_string()));
            Ok(())
        }
        other => Err(invalid("foliation", other)),
    }
}

fn record(out: &mut Outcome, conv: &ConvergenceReport, min_order: f64) {
    out.result("steps", &conv.steps);
    out.result("max_residuals", &conv.max_residuals);
    out.result("orders", &conv.orders);
    out.result("finest_residual", conv.finest_residual());
    out.check(Check::at_least(
        "convergence_order",
        conv.min_order(),
        min_order,
    ));
    out.file("residual_convergence.csv", csv(|b| conv.write_csv(b)));
}

pub fn divergence_check(sc: &Scenario) -> Result<Outcome, ConfigError> {
    let spec = sc.foliation()?;
    let (pg, tg) = (sc.grid("p")?, sc.grid("t")?);
    let g = &sc.numerics.grids;
    let tol = &sc.numerics.tolerances;
    let mut out = Outcome::new();
    match divergence_convergence(
        spec,
        &sc.potential,
        &pg,
        &tg,
        g.n_q,
        g.levels,
        sc.numerics.dt,
    ) {
        Ok((conv, finest)) => {
            record(&mut out, &conv, tol.min_order);
            out.check(Check::below(
                "finest_max_residual",
                conv.finest_residual(),
                tol.divergence,
            ));
            out.result("finest_argmax_p", finest.argmax.0);
            out.result("finest_argmax_t", finest.argmax.1);
            out.file("results.csv", csv(|b| finest.flux.write_csv(b)));
        }
        Err(e) => classify(&mut out, e)?,
    }
    Ok(out)
}

pub fn pde_residual(sc: &Scenario) -> Result<Outcome, ConfigError> {
    let spec = sc.foliation()?;
    let section = sc.section(&sc.pde_residual, "pde_residual")?;
    let pg = sc.grid("p")?;
    let g = &sc.numerics.grids;
    let mut out = Outcome::new();
    out.result("t", section.t);
    match pde_residual_convergence(
        spec,
        &sc.potential,
        section.t,
        &pg,
        g.n_q,
        g.levels,
        sc.numerics.dt,
    ) {
        Ok((conv, finest)) => {
            record(&mut out, &conv, sc.numerics.tolerances.min_order);
            out.result("finest_argmax_p", finest.argmax.0);
            out.result("finest_argmax_q", finest.argmax.1);
            out.file("results.csv", csv(|b| finest.write_csv(b)));
        }
        Err(e) => classify(&mut out, e)?,
    }
    Ok(out)
}
