//! Characteristic flow of the forced Burgers equation.
//!
//! Characteristics solve Newton's equations `q̇ = p, ṗ = −u_q(q,t)`. Along
//! each one we also carry Jacobi fields `(ξ, η)` solving the linearisation
//! `ξ̇ = η, η̇ = −u_qq ξ`. A leaf's slope is `ω = η/ξ`, which blows up
//! exactly where ξ vanishes, so shock formation is detected as a sign change
//! of ξ rather than by following ω to infinity.
//!
//! Integration is classical fixed-step RK4. Positions are unwrapped (not
//! reduced mod 1) while integrating.

use crate::potential::Forcing;
use crate::table::{num, CsvWriter};
use std::io::{self, Write};
use std::ops::ControlFlow;
use thiserror::Error;

/// Event bisection stops once the bracket is narrower than this.
pub const EVENT_TOLERANCE: f64 = 1e-12;

/// Samples with `|ξ|` at or below this are skipped when forming `ω = η/ξ`.
pub const OMEGA_XI_FLOOR: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("step size must be positive and finite, got {0}")]
    InvalidStep(f64),
    #[error("start state or end time is not finite")]
    NonFinite,
    #[error("end time equals start time ({0})")]
    EmptySpan(f64),
}

/// Phase point with `N` Jacobi fields attached.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet<const N: usize> {
    pub q: f64,
    pub p: f64,
    pub xi: [f64; N],
    pub eta: [f64; N],
}

impl<const N: usize> Jet<N> {
    fn is_finite(&self) -> bool {
        self.q.is_finite()
            && self.p.is_finite()
            && self.xi.iter().chain(&self.eta).all(|x| x.is_finite())
    }

    #[inline]
    fn axpy(&self, h: f64, k: &Jet<N>) -> Jet<N> {
        let mut out = *self;
        out.q += h * k.q;
        out.p += h * k.p;
        for i in 0..N {
            out.xi[i] += h * k.xi[i];
            out.eta[i] += h * k.eta[i];
        }
        out
    }
}

#[inline]
fn vector_field<F: Forcing + ?Sized, const N: usize>(f: &F, t: f64, s: &Jet<N>) -> Jet<N> {
    let (force, curvature) = f.force_and_curvature(s.q, t);
    Jet {
        q: s.p,
        p: -force,
        xi: s.eta,
        eta: s.xi.map(|x| -curvature * x),
    }
}

/// One classical RK4 step of length `h` (may be negative).
#[inline]
pub fn rk4_step<F: Forcing + ?Sized, const N: usize>(f: &F, t: f64, s: &Jet<N>, h: f64) -> Jet<N> {
    let k1 = vector_field(f, t, s);
    let k2 = vector_field(f, t + 0.5 * h, &s.axpy(0.5 * h, &k1));
    let k3 = vector_field(f, t + 0.5 * h, &s.axpy(0.5 * h, &k2));
    let k4 = vector_field(f, t + h, &s.axpy(h, &k3));
    let mut out = *s;
    let w = h / 6.0;
    out.q += w * (k1.q + 2.0 * k2.q + 2.0 * k3.q + k4.q);
    out.p += w * (k1.p + 2.0 * k2.p + 2.0 * k3.p + k4.p);
    for i in 0..N {
        out.xi[i] += w * (k1.xi[i] + 2.0 * k2.xi[i] + 2.0 * k3.xi[i] + k4.xi[i]);
        out.eta[i] += w * (k1.eta[i] + 2.0 * k2.eta[i] + 2.0 * k3.eta[i] + k4.eta[i]);
    }
    out
}

/// One accepted step, as seen by a [`drive`] visitor.
pub(crate) struct Step<'a, const N: usize> {
    pub t0: f64,
    pub s0: &'a Jet<N>,
    pub t1: f64,
    pub s1: &'a Jet<N>,
}

/// Steps from `t0` to `t1` with nominal step `dt`, shortening the last step
/// to land on `t1` exactly. The visitor may stop early; the returned pair is
/// the last state reached.
pub(crate) fn drive<F, const N: usize>(
    f: &F,
    start: Jet<N>,
    t0: f64,
    t1: f64,
    dt: f64,
    mut visit: impl FnMut(&Step<'_, N>) -> ControlFlow<()>,
) -> Result<(f64, Jet<N>), FlowError>
where
    F: Forcing + ?Sized,
{
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(FlowError::InvalidStep(dt));
    }
    if !(start.is_finite() && t0.is_finite() && t1.is_finite()) {
        return Err(FlowError::NonFinite);
    }
    let span = t1 - t0;
    let dir = span.signum();
    let steps = (span.abs() / dt - 1e-9).ceil().max(0.0) as u64;
    let mut s = start;
    let mut t = t0;
    for i in 1..=steps {
        let t_next = if i == steps {
            t1
        } else {
            t0 + dir * dt * i as f64
        };
        let next = rk4_step(f, t, &s, t_next - t);
        let flow = visit(&Step {
            t0: t,
            s0: &s,
            t1: t_next,
            s1: &next,
        });
        s = next;
        t = t_next;
        if flow.is_break() {
            break;
        }
    }
    Ok((t, s))
}

/// Final state after flowing `start` from `t0` to `t1`.
pub fn propagate<F, const N: usize>(
    f: &F,
    start: Jet<N>,
    t0: f64,
    t1: f64,
    dt: f64,
) -> Result<Jet<N>, FlowError>
where
    F: Forcing + ?Sized,
{
    drive(f, start, t0, t1, dt, |_| ControlFlow::Continue(())).map(|(_, s)| s)
}

/// True when `ξ` changes sign (or reaches zero) across a step.
#[inline]
fn crosses(a: f64, b: f64) -> bool {
    (a > 0.0 && b <= 0.0) || (a < 0.0 && b >= 0.0)
}

/// Locates the zero of `ξ[idx]` inside a step by bisecting the step length
/// of a single RK4 step from the step's left end.
pub(crate) fn refine_zero<F, const N: usize>(f: &F, step: &Step<'_, N>, idx: usize) -> f64
where
    F: Forcing + ?Sized,
{
    let xi0 = step.s0.xi[idx];
    if step.s1.xi[idx] == 0.0 {
        return step.t1;
    }
    let h = step.t1 - step.t0;
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    while (hi - lo) * h.abs() > EVENT_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        let x = rk4_step(f, step.t0, step.s0, mid * h).xi[idx];
        if x == 0.0 {
            return step.t0 + mid * h;
        }
        if crosses(xi0, x) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    step.t0 + 0.5 * (lo + hi) * h
}

/// First time in `(t0, t1]` at which `ξ[idx]` crosses zero, without storing
/// the trajectory.
pub fn scan_first_zero<F, const N: usize>(
    f: &F,
    start: Jet<N>,
    t0: f64,
    t1: f64,
    dt: f64,
    idx: usize,
) -> Result<Option<f64>, FlowError>
where
    F: Forcing + ?Sized,
{
    let mut found = None;
    drive(f, start, t0, t1, dt, |step| {
        if crosses(step.s0.xi[idx], step.s1.xi[idx]) {
            found = Some(refine_zero(f, step, idx));
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    })?;
    Ok(found)
}

/// Characteristic state with one Jacobi field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharPoint {
    pub q: f64,
    pub p: f64,
    pub xi: f64,
    pub eta: f64,
    pub t: f64,
}

impl CharPoint {
    pub fn new(q: f64, p: f64, xi: f64, eta: f64, t: f64) -> Self {
        Self { q, p, xi, eta, t }
    }

    pub fn jet(&self) -> Jet<1> {
        Jet {
            q: self.q,
            p: self.p,
            xi: [self.xi],
            eta: [self.eta],
        }
    }

    fn from_jet(j: &Jet<1>, t: f64) -> Self {
        Self::new(j.q, j.p, j.xi[0], j.eta[0], t)
    }

    /// Position reduced to `[0, 1)`.
    pub fn q_mod1(&self) -> f64 {
        self.q.rem_euclid(1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    XiZero,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub t: f64,
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<CharPoint>,
    pub dt: f64,
    pub events: Vec<Event>,
}

/// Integrates a characteristic and its Jacobi field from `start.t` to
/// `t_end` (backwards when `t_end < start.t`), recording every sample and
/// every sign change of ξ.
pub fn flow<F: Forcing + ?Sized>(
    f: &F,
    start: CharPoint,
    t_end: f64,
    dt: f64,
) -> Result<Trajectory, FlowError> {
    if t_end == start.t {
        return Err(FlowError::EmptySpan(t_end));
    }
    let mut samples = vec![start];
    let mut events = Vec::new();
    drive(f, start.jet(), start.t, t_end, dt, |step| {
        if crosses(step.s0.xi[0], step.s1.xi[0]) {
            events.push(Event {
                t: refine_zero(f, step, 0),
                kind: EventKind::XiZero,
            });
        }
        samples.push(CharPoint::from_jet(step.s1, step.t1));
        ControlFlow::Continue(())
    })?;
    Ok(Trajectory {
        samples,
        dt,
        events,
    })
}

/// Earliest sign change of ξ along the trajectory, in the direction of
/// integration.
pub fn first_xi_zero(traj: &Trajectory) -> Option<f64> {
    traj.events
        .iter()
        .find(|e| e.kind == EventKind::XiZero)
        .map(|e| e.t)
}

/// `ω = η/ξ` along a trajectory.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OmegaSeries {
    pub points: Vec<(f64, f64)>,
    /// Sample times skipped because `|ξ| ≤ OMEGA_XI_FLOOR`.
    pub omitted: Vec<f64>,
}

pub fn omega_along(traj: &Trajectory) -> OmegaSeries {
    let mut out = OmegaSeries::default();
    for s in &traj.samples {
        if s.xi.abs() > OMEGA_XI_FLOOR {
            out.points.push((s.t, s.eta / s.xi));
        } else {
            out.omitted.push(s.t);
        }
    }
    out
}

impl Trajectory {
    pub fn last(&self) -> &CharPoint {
        self.samples
            .last()
            .expect("trajectory always holds its start")
    }

    /// Columns `t,q,p,xi,eta`.
    pub fn write_csv<W: Write>(&self, out: W) -> io::Result<W> {
        let mut w = CsvWriter::new(out, &["t", "q", "p", "xi", "eta"])?;
        for s in &self.samples {
            w.row(&[num(s.t), num(s.q), num(s.p), num(s.xi), num(s.eta)])?;
        }
        w.finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{ConstantCurvature, PotentialSpec};
    use std::f64::consts::PI;

    #[test]
    fn free_motion() {
        let traj = flow(
            &PotentialSpec::zero(),
            CharPoint::new(0.0, 1.0, 1.0, 0.0, 0.0),
            1.0,
            1e-2,
        )
        .unwrap();
        let end = traj.last();
        assert_eq!(end.t, 1.0);
        assert!((end.q - 1.0).abs() < 1e-14);
        assert_eq!(end.p, 1.0);
        assert_eq!(end.xi, 1.0);
        assert_eq!(end.eta, 0.0);
        assert!(first_xi_zero(&traj).is_none());
    }

    #[test]
    fn harmonic_jacobi_field() {
        let c = 2.0;
        let pot = ConstantCurvature { c };
        let traj = flow(&pot, CharPoint::new(0.1, 0.0, 1.0, 0.0, 0.0), 3.0, 1e-3).unwrap();
        for s in &traj.samples {
            assert!((s.xi - (c.sqrt() * s.t).cos()).abs() < 1e-8);
        }
    }

    #[test]
    fn linear_decay_event() {
        let traj = flow(
            &PotentialSpec::zero(),
            CharPoint::new(0.3, -0.2, 1.0, -1.0, 0.0),
            2.0,
            1e-2,
        )
        .unwrap();
        let t = first_xi_zero(&traj).unwrap();
        assert!((t - 1.0).abs() < 1e-9, "{t}");
        assert_eq!(traj.events.len(), 1);
    }

    #[test]
    fn cosine_zero_at_half() {
        let pot = ConstantCurvature { c: PI * PI };
        let traj = flow(&pot, CharPoint::new(0.0, 0.0, 1.0, 0.0, 0.0), 0.8, 1e-3).unwrap();
        assert!((first_xi_zero(&traj).unwrap() - 0.5).abs() < 1e-10);
    }

    #[test]
    fn no_event_when_xi_grows() {
        let traj = flow(
            &PotentialSpec::zero(),
            CharPoint::new(0.0, 0.0, 1.0, 1.0, 0.0),
            5.0,
            1e-2,
        )
        .unwrap();
        assert!(first_xi_zero(&traj).is_none());
    }

    #[test]
    fn last_step_is_shortened() {
        let traj = flow(
            &PotentialSpec::zero(),
            CharPoint::new(0.0, 1.0, 1.0, 0.0, 0.0),
            0.25,
            0.1,
        )
        .unwrap();
        let ts: Vec<f64> = traj.samples.iter().map(|s| s.t).collect();
        assert_eq!(ts.len(), 4);
        assert_eq!(*ts.last().unwrap(), 0.25);
        assert!((ts[3] - ts[2] - 0.05).abs() < 1e-15);
    }

    #[test]
    fn backward_samples_decrease() {
        let pot = PotentialSpec::cosine(1, 0.1);
        let traj = flow(&pot, CharPoint::new(0.2, 0.3, 1.0, 0.0, 1.0), -1.0, 1e-2).unwrap();
        assert!(traj.samples.windows(2).all(|w| w[1].t < w[0].t));
        assert_eq!(traj.last().t, -1.0);
    }

    #[test]
    fn rejects_bad_input() {
        let pot = PotentialSpec::zero();
        let start = CharPoint::new(0.0, 0.0, 1.0, 0.0, 0.0);
        assert_eq!(
            flow(&pot, start, 1.0, 0.0),
            Err(FlowError::InvalidStep(0.0))
        );
        assert_eq!(
            flow(&pot, start, 1.0, -1e-3),
            Err(FlowError::InvalidStep(-1e-3))
        );
        assert_eq!(flow(&pot, start, 0.0, 1e-3), Err(FlowError::EmptySpan(0.0)));
        let bad = CharPoint::new(f64::NAN, 0.0, 1.0, 0.0, 0.0);
        assert_eq!(flow(&pot, bad, 1.0, 1e-3), Err(FlowError::NonFinite));
    }

    #[test]
    fn omega_skips_vanishing_xi() {
        let traj = flow(
            &PotentialSpec::zero(),
            CharPoint::new(0.0, 0.0, 1.0, -1.0, 0.0),
            2.0,
            0.25,
        )
        .unwrap();
        let om = omega_along(&traj);
        assert_eq!(om.omitted.len(), 1);
        assert!((om.omitted[0] - 1.0).abs() < 1e-15);
        for &(t, w) in &om.points {
            assert!((w + 1.0 / (1.0 - t)).abs() < 1e-12);
        }
    }

    #[test]
    fn csv_export_header_and_precision() {
        let traj = flow(
            &PotentialSpec::zero(),
            CharPoint::new(0.0, 0.5, 1.0, 0.0, 0.0),
            0.2,
            0.1,
        )
        .unwrap();
        let text = String::from_utf8(traj.write_csv(Vec::new()).unwrap()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,q,p,xi,eta");
        assert_eq!(lines.len(), 4);
        assert_eq!(
            lines[3],
            "2.0000000000000001e-1,1.0000000000000001e-1,5.0000000000000000e-1,1.0000000000000000e0,0.0000000000000000e0"
        );
    }
}
