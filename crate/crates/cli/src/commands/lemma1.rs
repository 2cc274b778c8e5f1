use super::{csv, invalid};
use crate::report::{Check, Outcome};
use crate::scenario::{ConfigError, Scenario};
use shocklab::integral_geometry::{
    comparison_ode_check, flux_profile, ComparisonOptions, GeometryError,
};

pub fn lemma1(sc: &Scenario) -> Result<Outcome, ConfigError> {
    let s = sc.section(&sc.lemma1, "lemma1")?;
    let tol = &sc.numerics.tolerances;
    let mut out = Outcome::new();
    if s.n_radii < 5 {
        return Err(invalid("lemma1.n_radii", "must be at least 5"));
    }
    let radii: Vec<f64> = (0..s.n_radii)
        .map(|i| s.r0 + (s.r1 - s.r0) * i as f64 / (s.n_radii - 1) as f64)
        .collect();
    let profile = flux_profile(&s.field, &radii, s.n_angular).map_err(|e| invalid("lemma1", e))?;
    let coarse_radii: Vec<f64> = radii.iter().step_by(2).copied().collect();
    let coarse =
        flux_profile(&s.field, &coarse_radii, s.n_angular).map_err(|e| invalid("lemma1", e))?;

    let min_cs = profile.cs_slack().into_iter().fold(f64::INFINITY, f64::min);
    out.check(Check::at_least(
        "cauchy_schwarz_slack",
        min_cs,
        -tol.cs_slack,
    ));

    let (e_fine, e_coarse) = (
        profile.flux_derivative_defect(),
        coarse.flux_derivative_defect(),
    );
    out.result("flux_identity_defect", e_fine);
    out.result("flux_identity_defect_coarse", e_coarse);
    if e_fine < 1e-9 {
        // φ' is reproduced to rounding: nothing to measure an order on.
        out.check(Check::below("flux_identity_defect", e_fine, 1e-9));
    } else {
        out.check(Check::at_least(
            "flux_identity_order",
            (e_coarse / e_fine).log2(),
            tol.min_order,
        ));
    }

    let opts = ComparisonOptions {
        n_radii: s.n_radii,
        n_angular: s.n_angular,
    };
    match comparison_ode_check(&s.field, s.c, s.r0, s.r1, opts) {
        Ok(rep) => {
            out.result("inequality_holds_on_annulus", true);
            out.result("min_pointwise_slack", rep.min_pointwise_slack);
            out.result("min_comparison_gap", rep.min_comparison_gap);
            let scale = rep
                .profile
                .ring_div
                .iter()
                .fold(1.0_f64, |m, x| m.max(x.abs()));
            out.check(Check::at_least(
                "ring_inequality_slack",
                rep.min_ode_slack,
                -tol.cs_slack * scale,
            ));
            match (rep.blowup_radius, rep.blowup_radius_numeric) {
                (Some(a), Some(n)) => {
                    out.result("blowup_radius", a);
                    out.result("blowup_radius_numeric", n);
                    out.check(Check::below(
                        "blowup_radius_agreement",
                        (a - n).abs() / a,
                        1e-6,
                    ));
                }
                (Some(a), None) => {
                    out.result("blowup_radius", a);
                    out.check(Check::flag("blowup_radius_numeric", false));
                }
                _ => out.result("blowup_radius", "none (φ(r0) ≤ 0)"),
            }
        }
        Err(GeometryError::InequalityNotApplicable { radius, min_slack }) => {
            out.result("inequality_holds_on_annulus", false);
            out.result("inequality_fails_from_radius", radius);
            out.result("min_slack_at_failure", min_slack);
        }
        Err(e) => return Err(invalid("lemma1", e)),
    }
    out.file("results.csv", csv(|b| profile.write_csv(s.c, b)));
    Ok(out)
}
