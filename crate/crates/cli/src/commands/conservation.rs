use super::{csv, invalid};
use crate::report::{Check, Outcome};
use crate::scenario::{ConfigError, Scenario};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use shocklab::conservation::{
    charpoly_identity, e_concavity_n2, ellipticity, extract_leaves, level_defect,
    transport_residual, ConservationError, StateU,
};
use shocklab::foliation::write_leaves_csv;
use shocklab::fourier::FourierSeries;
use shocklab::grid::circle_points;
use shocklab::table::{num, CsvWriter};

/// Points per random state for the identity checks.
const RANDOM_POINTS: usize = 16;

/// `u0 ∈ [−1, 1)`, each component a mean in `[−1, 1)` plus harmonics 1–3
/// with amplitudes in `[−1/2, 1/2)`.
pub fn random_state(n: usize, rng: &mut impl Rng) -> StateU {
    let components = (0..n)
        .map(|_| {
            (1..=3).fold(
                FourierSeries::constant(rng.random_range(-1.0..1.0)),
                |f, k| f.with_mode(k, rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)),
            )
        })
        .collect();
    StateU {
        n,
        u0: rng.random_range(-1.0..1.0),
        components,
    }
}

pub fn conservation_check(sc: &Scenario) -> Result<Outcome, ConfigError> {
    let default = Default::default();
    let s = sc.conservation.as_ref().unwrap_or(&default);
    let tol = &sc.numerics.tolerances;
    let mut out = Outcome::new();
    let mut rng = ChaCha8Rng::seed_from_u64(sc.seed);

    let p_small: Vec<f64> = (0..RANDOM_POINTS)
        .map(|i| -2.0 + 4.0 * i as f64 / (RANDOM_POINTS - 1) as f64)
        .collect();
    let q_small = circle_points(RANDOM_POINTS);
    let mut rows = Vec::new();
    let (mut worst_cp, mut worst_tr) = (0.0_f64, 0.0_f64);
    for &n in &s.ns {
        for i in 0..s.random_states {
            let state = random_state(n, &mut rng);
            let cp = (0..RANDOM_POINTS)
                .map(|_| charpoly_identity(&state, rng.random_range(0.0..1.0)))
                .fold(0.0, f64::max);
            let tr = transport_residual(&state, &p_small, &q_small).relative;
            worst_cp = worst_cp.max(cp);
            worst_tr = worst_tr.max(tr);
            rows.push([n as f64, i as f64, cp, tr]);
        }
    }
    out.result("random_states_per_n", s.random_states);
    out.result("ns", &s.ns);
    out.check(Check::below(
        "charpoly_identity_random",
        worst_cp,
        tol.charpoly,
    ));
    out.check(Check::below(
        "transport_residual_random",
        worst_tr,
        tol.transport,
    ));
    out.file(
        "results.csv",
        csv(|b| {
            let mut w = CsvWriter::new(
                b,
                &["n", "state", "charpoly_deviation", "transport_relative"],
            )?;
            for r in &rows {
                w.row(&[
                    format!("{}", r[0]),
                    format!("{}", r[1]),
                    num(r[2]),
                    num(r[3]),
                ])?;
            }
            w.finish()
        }),
    );

    // The configured state.
    let state = &s.state;
    let qs = circle_points(s.n_q);
    let cp = qs
        .iter()
        .map(|&q| charpoly_identity(state, q))
        .fold(0.0, f64::max);
    out.check(Check::below("charpoly_identity_state", cp, tol.charpoly));
    let tr = transport_residual(state, &s.p_range.points(), &qs);
    out.result("transport_max_residual", tr.max_residual);
    out.check(Check::below(
        "transport_residual_state",
        tr.relative,
        tol.transport,
    ));

    // Offset grid: no sample lands exactly on a double eigenvalue.
    let offset: Vec<f64> = (0..s.n_q)
        .map(|i| (i as f64 + 0.5) / s.n_q as f64)
        .collect();
    let ell = ellipticity(state, &offset);
    out.result("elliptic", ell.elliptic);
    out.result("min_abs_imag", ell.min_abs_imag);
    out.result("min_abs_imag_q", ell.argmin_q);
    out.result("non_elliptic_points", ell.failing_q().len());
    out.check(Check::flag("ellipticity_routes_agree", ell.routes_agree));
    if state.n == 2 {
        let threshold = state.u0 * state.u0;
        let agree = ell
            .points
            .iter()
            .all(|p| p.elliptic == (state.components[0].eval(p.q) > threshold));
        out.check(Check::flag("ellipticity_matches_u1_gt_u0_squared", agree));
    }
    out.file(
        "ellipticity.csv",
        csv(|b| {
            let mut w = CsvWriter::new(b, &["q", "min_abs_imag", "elliptic", "real_roots"])?;
            for p in &ell.points {
                w.row(&[
                    num(p.q),
                    num(p.min_abs_imag),
                    p.elliptic.to_string(),
                    p.real_roots.to_string(),
                ])?;
            }
            w.finish()
        }),
    );

    if state.n == 2 {
        match e_concavity_n2(state, s.gamma, s.n_q) {
            Ok(r) => {
                // Reported, not asserted: the displayed formula and the
                // direct computation are compared side by side.
                out.result(
                    "concavity",
                    json!({
                        "gamma": r.gamma,
                        "E": r.e,
                        "E_dot": r.e_dot,
                        "E_ddot_formula": r.e_ddot_formula,
                        "E_ddot_direct": r.e_ddot_oracle,
                        "E_ddot_alternative": r.e_ddot_alternative,
                        "formula_discrepancy": r.discrepancy,
                        "alternative_discrepancy": r.alternative_discrepancy,
                        "formula_nonpositive": r.e_ddot_formula <= 0.0,
                        "direct_nonpositive": r.e_ddot_oracle <= 0.0,
                    }),
                );
            }
            Err(e @ ConservationError::EllipticityViolated { .. }) => {
                out.result("concavity", format!("not evaluated: {e}"));
            }
            Err(e) => return Err(invalid("conservation", e)),
        }
    }
    Ok(out)
}

pub fn extract_and_scan(sc: &Scenario) -> Result<Outcome, ConfigError> {
    let s = sc.section(&sc.extract, "extract")?;
    let mut out = Outcome::new();
    let leaves = match extract_leaves(&s.state, &s.levels, s.n_q) {
        Ok(l) => l,
        Err(e @ ConservationError::Invalid(_)) => return Err(invalid("extract", e)),
        Err(e) => {
            out.check(Check::flag("extract_leaves", false).with_detail(e.to_string()));
            return Ok(out);
        }
    };
    out.check(Check::below(
        "level_defect",
        level_defect(&s.state, &leaves),
        sc.numerics.tolerances.level,
    ));
    out.file("initial_data.csv", csv(|b| write_leaves_csv(&leaves, b)));
    super::scan::scan_into(
        &mut out,
        &leaves,
        &s.state.potential(),
        sc.numerics.horizon,
        sc.numerics.dt,
    )?;
    Ok(out)
}
