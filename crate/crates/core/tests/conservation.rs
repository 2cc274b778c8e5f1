use nalgebra::DVector;
use proptest::prelude::*;
use shocklab::conservation::{
    build_a, charpoly, charpoly_identity, count_real_roots, e_concavity_n2, ellipticity,
    extract_leaves, level_defect, transport_residual, StateU,
};
use shocklab::fourier::FourierSeries;
use shocklab::grid::circle_points;

fn series(mean: f64, modes: &[(u32, f64, f64)]) -> FourierSeries {
    modes
        .iter()
        .fold(FourierSeries::constant(mean), |f, &(k, c, s)| {
            f.with_mode(k, c, s)
        })
}

fn offset_grid(n: usize) -> Vec<f64> {
    (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect()
}

#[test]
fn quasilinear_form_reproduces_the_equations() {
    let state = StateU::new(
        0.4,
        vec![
            series(1.2, &[(1, 0.3, -0.1), (2, 0.05, 0.0)]),
            series(-0.2, &[(1, 0.0, 0.4)]),
            series(0.7, &[(3, 0.1, 0.2)]),
            series(0.1, &[(1, -0.3, 0.3), (2, 0.0, 0.1)]),
        ],
    )
    .unwrap();
    for q in circle_points(37) {
        let uq = DVector::from_iterator(4, state.components.iter().map(|c| c.d1(q)));
        let rhs = build_a(&state, q) * uq;
        for (a, b) in rhs.iter().zip(state.time_derivative(q)) {
            assert!((a - b).abs() < 1e-12, "q={q}: {a} vs {b}");
        }
    }
}

#[test]
fn small_characteristic_polynomials() {
    let s = StateU::new(
        0.0,
        vec![FourierSeries::constant(1.0), FourierSeries::constant(0.0)],
    )
    .unwrap();
    assert_eq!(charpoly(&build_a(&s, 0.3)), vec![1.0, 0.0, 1.0]);
    let s = StateU::new(
        0.5,
        vec![FourierSeries::constant(1.0), FourierSeries::constant(0.0)],
    )
    .unwrap();
    let e = ellipticity(&s, &[0.1, 0.6]);
    assert!(e.elliptic && e.routes_agree);
    assert!((e.min_abs_imag - 0.75_f64.sqrt()).abs() < 1e-12);
    let s = StateU::new(
        0.0,
        vec![FourierSeries::constant(-1.0), FourierSeries::constant(0.0)],
    )
    .unwrap();
    let e = ellipticity(&s, &[0.2]);
    assert!(!e.elliptic && e.routes_agree);
    assert_eq!(e.points[0].real_roots, 2);
    // (λ − 1)(λ − 2)(λ² + 1)
    assert_eq!(count_real_roots(&[2.0, -3.0, 3.0, -3.0, 1.0], 1e-12), 2);
}

#[test]
fn ellipticity_tracks_u1_against_u0_squared_across_the_threshold() {
    for &u0 in &[0.0, 0.5, -0.8] {
        let u1 = series(u0 * u0, &[(1, 0.0, 0.1)]);
        let s = StateU::new(u0, vec![u1.clone(), series(0.0, &[(2, 0.05, 0.0)])]).unwrap();
        let rep = ellipticity(&s, &offset_grid(64));
        assert!(rep.routes_agree);
        assert!(!rep.elliptic);
        for p in &rep.points {
            assert_eq!(p.elliptic, u1.eval(p.q) > u0 * u0, "u0={u0} q={}", p.q);
        }
        assert_eq!(rep.failing_q().len(), 32);
    }
}

#[test]
fn transport_identity_on_structured_state() {
    let s = StateU::new(
        0.3,
        vec![series(1.5, &[(1, 0.1, 0.0)]), series(0.0, &[(1, 0.0, 0.1)])],
    )
    .unwrap();
    let p: Vec<f64> = (0..64).map(|i| -2.0 + 4.0 * i as f64 / 63.0).collect();
    let rep = transport_residual(&s, &p, &circle_points(64));
    assert!(rep.max_residual < 1e-11, "{rep:?}");
}

#[test]
fn extracted_leaves_sit_on_their_levels_and_are_ordered() {
    let s = StateU::new(
        0.0,
        vec![series(1.0, &[(1, 0.2, 0.0)]), FourierSeries::constant(0.0)],
    )
    .unwrap();
    let levels = [-2.0, -1.0, 0.0, 1.0, 2.0];
    let leaves = extract_leaves(&s, &levels, 64).unwrap();
    assert!(level_defect(&s, &leaves) < 1e-10);
    for w in leaves.windows(2) {
        for (a, b) in w[0].points.iter().zip(&w[1].points) {
            assert!(a.p < b.p);
        }
    }
    // Slope of a level set: F_q + F_p p' = 0, checked by differencing F.
    let f = |p: f64, q: f64| p * p * p / 3.0 + s.components[0].eval(q) * p;
    for leaf in &leaves {
        for pt in &leaf.points {
            let d = 1e-6;
            let fq = (f(pt.p, pt.q + d) - f(pt.p, pt.q - d)) / (2.0 * d);
            let fp = (f(pt.p + d, pt.q) - f(pt.p - d, pt.q)) / (2.0 * d);
            assert!((pt.slope + fq / fp).abs() < 1e-6);
        }
    }
}

#[test]
fn concavity_routes_for_constant_state_vanish() {
    let s = StateU::new(
        0.5,
        vec![FourierSeries::constant(1.0), FourierSeries::constant(0.3)],
    )
    .unwrap();
    let r = e_concavity_n2(&s, 0.5, 32).unwrap();
    assert_eq!(r.e, 1.0);
    assert_eq!(r.e_dot, 0.0);
    assert_eq!(r.e_ddot_formula, 0.0);
    assert_eq!(r.e_ddot_oracle, 0.0);
}

#[test]
fn concavity_near_the_threshold_reports_both_routes() {
    // Elliptic: u1 ≥ 0.815 > u0² = 0.81.
    let s = StateU::new(
        0.9,
        vec![
            series(0.82, &[(1, 0.005, 0.0)]),
            series(0.0, &[(1, 0.0, 0.002)]),
        ],
    )
    .unwrap();
    let r = e_concavity_n2(&s, 0.5, 128).unwrap();
    assert!(r.e_ddot_formula.is_finite() && r.e_ddot_oracle.is_finite());
    assert_eq!(r.discrepancy, (r.e_ddot_formula - r.e_ddot_oracle).abs());
    // The direct computation matches the integrand with u1·(u1)_q².
    assert!(
        r.alternative_discrepancy < 1e-12 * (1.0 + r.e_ddot_oracle.abs()),
        "{r:?}"
    );
}

fn arb_state(n: usize) -> impl Strategy<Value = StateU> {
    let comp = (
        -1.0..1.0f64,
        prop::collection::vec((-0.5..0.5f64, -0.5..0.5f64), 3),
    );
    (-1.0..1.0f64, prop::collection::vec(comp, n)).prop_map(|(u0, comps)| StateU {
        n: comps.len(),
        u0,
        components: comps
            .into_iter()
            .map(|(m, modes)| {
                modes
                    .into_iter()
                    .enumerate()
                    .fold(FourierSeries::constant(m), |f, (k, (c, s))| {
                        f.with_mode(k as u32 + 1, c, s)
                    })
            })
            .collect(),
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn charpoly_identity_n2(s in arb_state(2), q in 0.0..1.0f64) {
        prop_assert!(charpoly_identity(&s, q) < 1e-9);
    }

    #[test]
    fn charpoly_identity_n4(s in arb_state(4), q in 0.0..1.0f64) {
        prop_assert!(charpoly_identity(&s, q) < 1e-9);
    }

    #[test]
    fn charpoly_identity_n6(s in arb_state(6), q in 0.0..1.0f64) {
        prop_assert!(charpoly_identity(&s, q) < 1e-9);
    }

    #[test]
    fn transport_residual_is_rounding_level(s in arb_state(4)) {
        let p: Vec<f64> = (0..9).map(|i| -2.0 + 0.5 * i as f64).collect();
        let rep = transport_residual(&s, &p, &circle_points(9));
        prop_assert!(rep.relative < 1e-10, "{:?}", rep);
    }

    #[test]
    fn ellipticity_routes_agree_on_random_states(s in arb_state(2)) {
        prop_assert!(ellipticity(&s, &offset_grid(16)).routes_agree);
    }
}
