use shocklab::backward::{
    backward_shock_search, construct, find_backward_shocks, verify_no_forward_shock,
    AdmissibilityBound, BackwardError,
};
use shocklab::characteristics::{propagate, Jet};
use shocklab::{first_xi_zero, flow, CharPoint, Envelope, PotentialSpec};
use std::f64::consts::PI;

fn bump(amplitude: f64) -> PotentialSpec {
    PotentialSpec::zero().with_mode(1, amplitude, 0.0, Envelope::bump(1.0))
}

/// Half the strict threshold `(π/2)²` at T = 1.
fn admissible() -> PotentialSpec {
    bump(0.5 * (PI / 2.0).powi(2) / (4.0 * PI * PI))
}

fn alphas(n: usize, half: f64) -> Vec<f64> {
    (0..n)
        .map(|i| -half + 2.0 * half * i as f64 / (n - 1) as f64)
        .collect()
}

#[test]
fn jacobi_fields_dominate_the_sturm_comparison() {
    let pot = admissible();
    let cf = construct(
        &pot,
        1.0,
        &alphas(9, 1.0),
        32,
        1e-3,
        AdmissibilityBound::Strict,
    )
    .unwrap();
    let c = cf.bound_check.max_curvature;
    assert!(cf.jacobi_min() > 0.0);
    for leaf in &cf.leaves {
        assert!(leaf.sturm_margin.unwrap() >= -1e-9);
        for pt in leaf.points.iter().step_by(4) {
            // Independent forward pass from the constructed data.
            let mut s = Jet {
                q: pt.q0,
                p: pt.p0,
                xi: [pt.xi0],
                eta: [pt.eta0],
            };
            let mut t = 0.0;
            for k in 1..=10 {
                let t1 = k as f64 / 10.0;
                s = propagate(&pot, s, t, t1, 1e-3).unwrap();
                t = t1;
                let floor = ((c.sqrt()) * (1.0 - t)).cos();
                assert!(
                    s.xi[0] >= floor - 1e-9,
                    "α={} β={} t={t}",
                    leaf.alpha,
                    pt.beta
                );
            }
            assert!((s.xi[0] - 1.0).abs() < 1e-9);
            assert!(s.eta[0].abs() < 1e-9);
            assert!((s.p - leaf.alpha).abs() < 1e-9);
            assert!((s.q - pt.beta).abs() < 1e-9);
        }
    }
}

#[test]
fn forward_pass_is_shock_free_and_straight_after_cutoff() {
    let pot = admissible();
    let cf = construct(
        &pot,
        1.0,
        &alphas(21, 1.0),
        64,
        1e-3,
        AdmissibilityBound::Strict,
    )
    .unwrap();
    let r = verify_no_forward_shock(&cf, &pot, 3.0, 1e-3).unwrap();
    assert!(r.round_trip_error < 1e-8, "{r:?}");
    assert!(r.max_line_deviation < 1e-7);
    assert!(r.min_xi > 0.0);
    assert!(r.order_preserved);
}

#[test]
fn zero_potential_control_is_flat() {
    let cf = construct(
        &PotentialSpec::zero(),
        1.0,
        &alphas(11, 2.0),
        16,
        1e-3,
        AdmissibilityBound::Strict,
    )
    .unwrap();
    for leaf in &cf.leaves {
        for pt in &leaf.points {
            assert!((pt.p0 - leaf.alpha).abs() < 1e-9);
            assert!((pt.eta0 / pt.xi0).abs() < 1e-12);
        }
    }
}

#[test]
fn small_bump_shocks_backward_but_not_immediately() {
    let pot = bump(0.01);
    let cf = construct(
        &pot,
        1.0,
        &alphas(11, 1.0),
        32,
        1e-3,
        AdmissibilityBound::Strict,
    )
    .unwrap();
    assert!(matches!(
        find_backward_shocks(&cf, &pot, 0.1, 1e-3),
        Err(BackwardError::NoBackwardShockWithinHorizon { .. })
    ));
    let (reports, w) = find_backward_shocks(&cf, &pot, 200.0, 1e-2).unwrap();
    assert!(w.t < -0.1);
    // Re-derive the witness time from the seed characteristic.
    let r = &reports[w.index];
    let leaf = &cf.initial_leaves()[w.index];
    let seed = leaf
        .points
        .iter()
        .find(|p| Some(p.q) == r.shock_seed_q)
        .expect("seed is a leaf point");
    let traj = flow(
        &pot,
        CharPoint::new(seed.q, seed.p, 1.0, seed.slope, 0.0),
        1.5 * w.t,
        1e-2,
    )
    .unwrap();
    let t = first_xi_zero(&traj).unwrap();
    assert!((t - w.t).abs() < 1e-9, "{t} vs {}", w.t);
}

#[test]
fn admissible_pipeline_finds_a_backward_shock_before_the_cap() {
    let pot = admissible();
    let s = backward_shock_search(
        &pot,
        1.0,
        &alphas(21, 1.0),
        64,
        200.0,
        1e-2,
        AdmissibilityBound::Strict,
        64.0,
    )
    .unwrap();
    assert!(s.witness.t < 0.0);
    assert!(s.witness.alpha.abs() <= 64.0);
}

#[test]
fn gates_reject_inadmissible_potentials() {
    let over = bump(0.3 * (PI / 2.0).powi(2) / (PI * PI));
    assert!(matches!(
        construct(&over, 1.0, &[0.0], 8, 1e-3, AdmissibilityBound::Strict),
        Err(BackwardError::BoundViolated { .. })
    ));
    let eternal = PotentialSpec::cosine(1, 0.001);
    assert!(matches!(
        construct(&eternal, 1.0, &[0.0], 8, 1e-3, AdmissibilityBound::Strict),
        Err(BackwardError::NotCompactlySupported { .. })
    ));
}

#[test]
fn paper_bound_admits_potentials_whose_leaves_fold() {
    // Curvature 0.9π² at T = 1: above (π/2)², below π².
    let pot = bump(0.9 * PI * PI / (4.0 * PI * PI));
    assert!(matches!(
        construct(
            &pot,
            1.0,
            &alphas(5, 1.0),
            16,
            1e-3,
            AdmissibilityBound::Strict
        ),
        Err(BackwardError::BoundViolated { .. })
    ));
    assert!(matches!(
        construct(
            &pot,
            1.0,
            &alphas(5, 1.0),
            16,
            1e-3,
            AdmissibilityBound::Paper
        ),
        Err(BackwardError::FoliationFailed { .. })
    ));
}
