//! The quasi-linear system
//!
//! ```text
//! (u_k)_t = (n − k + 1) u_{k−1} (u_1)_q − (u_{k+1})_q,   k = 1..n,
//! ```
//!
//! with `u_0` a constant and `u_{n+1} ≡ 0`, written as `U_t = A(U) U_q`, and
//! its conserved polynomial `F = p^{n+1}/(n+1) + u_0 p^n + … + u_n`, which is
//! transported by the Burgers characteristics of the potential `u_1`.
//!
//! Nothing here steps the system in time: in the elliptic regime the
//! initial-value problem is ill-posed. Time derivatives are always
//! eliminated through the equations themselves.

use crate::foliation::{Leaf, LeafPoint};
use crate::fourier::FourierSeries;
use crate::grid::circle_points;
use crate::potential::{Envelope, PotentialSpec};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// `|Im λ|` at or below this counts as a real eigenvalue.
pub const ELLIPTIC_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConservationError {
    #[error("invalid state: {0}")]
    Invalid(String),
    #[error("u1 = {u1} ≤ u0² = {threshold} at q = {q}")]
    EllipticityViolated { q: f64, u1: f64, threshold: f64 },
    #[error("A(U) has a real eigenvalue at q = {q}")]
    NotElliptic { q: f64 },
    #[error("level {level} has no real solution at q = {q}")]
    LevelOutOfRange { level: f64, q: f64 },
    #[error("leaves for levels {lower} and {upper} are not ordered at q = {q}")]
    OrderingViolated { lower: f64, upper: f64, q: f64 },
}

/// `(u_0; u_1(q), …, u_n(q))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateU {
    pub n: usize,
    pub u0: f64,
    pub components: Vec<FourierSeries>,
}

impl StateU {
    pub fn new(u0: f64, components: Vec<FourierSeries>) -> Result<Self, ConservationError> {
        let s = Self {
            n: components.len(),
            u0,
            components,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), ConservationError> {
        let invalid = |m: String| Err(ConservationError::Invalid(m));
        if self.n < 2 || !self.n.is_multiple_of(2) {
            return invalid(format!("n must be even and at least 2, got {}", self.n));
        }
        if self.components.len() != self.n {
            return invalid(format!(
                "expected {} components, got {}",
                self.n,
                self.components.len()
            ));
        }
        if !self.u0.is_finite() {
            return invalid("u0 is not finite".into());
        }
        for (i, c) in self.components.iter().enumerate() {
            c.validate()
                .map_err(|e| ConservationError::Invalid(format!("components[{i}]: {e}")))?;
        }
        Ok(())
    }

    /// `[u_k, (u_k)_q, (u_k)_qq]` for `k = 0..=n+1`, with the constant `u_0`
    /// and `u_{n+1} = 0` at the ends.
    fn jets(&self, q: f64) -> Vec<[f64; 3]> {
        let mut out = Vec::with_capacity(self.n + 2);
        out.push([self.u0, 0.0, 0.0]);
        out.extend(self.components.iter().map(|c| c.jet(q)));
        out.push([0.0; 3]);
        out
    }

    /// `(u_k)_t` for `k = 1..=n`, straight from the equations.
    pub fn time_derivative(&self, q: f64) -> Vec<f64> {
        let j = self.jets(q);
        let n = self.n;
        (1..=n)
            .map(|k| (n - k + 1) as f64 * j[k - 1][0] * j[1][1] - j[k + 1][1])
            .collect()
    }

    /// `u_1` as a steady potential.
    pub fn potential(&self) -> PotentialSpec {
        self.components[0]
            .modes
            .iter()
            .fold(PotentialSpec::zero(), |pot, m| {
                pot.with_mode(m.k, m.cos, m.sin, Envelope::Constant)
            })
    }

    /// Coefficients of `F(·, q)` in ascending powers of p.
    pub fn poly_f(&self, q: f64) -> Vec<f64> {
        let j = self.jets(q);
        let n = self.n;
        let mut c = vec![0.0; n + 2];
        c[n + 1] = 1.0 / (n + 1) as f64;
        for k in 0..=n {
            c[n - k] = j[k][0];
        }
        c
    }
}

/// `A(U)` at `q`: row k has `(n−k+1) u_{k−1}` in column 1 and −1 in column
/// k+1.
pub fn build_a(state: &StateU, q: f64) -> DMatrix<f64> {
    let n = state.n;
    let j = state.jets(q);
    let mut a = DMatrix::zeros(n, n);
    for k in 1..=n {
        a[(k - 1, 0)] += (n - k + 1) as f64 * j[k - 1][0];
        if k < n {
            a[(k - 1, k)] = -1.0;
        }
    }
    a
}

/// Coefficients of `det(λI − A)` in ascending powers of λ
/// (Faddeev–LeVerrier).
pub fn charpoly(a: &DMatrix<f64>) -> Vec<f64> {
    let n = a.nrows();
    let mut c = vec![0.0; n + 1];
    c[n] = 1.0;
    let id = DMatrix::<f64>::identity(n, n);
    let mut m = DMatrix::<f64>::zeros(n, n);
    for k in 1..=n {
        m = a * &m + &id * c[n - k + 1];
        c[n - k] = -(a * &m).trace() / k as f64;
    }
    c
}

/// Coefficients of `λ ↦ F_p(−λ)` in ascending powers of λ.
pub fn fp_reflected(state: &StateU, q: f64) -> Vec<f64> {
    let f = state.poly_f(q);
    (0..=state.n)
        .map(|m| {
            let d = (m + 1) as f64 * f[m + 1];
            if m % 2 == 0 {
                d
            } else {
                -d
            }
        })
        .collect()
}

/// Largest coefficient difference between `det(A − λI)` and `F_p(−λ)`.
pub fn charpoly_identity(state: &StateU, q: f64) -> f64 {
    // n is even, so det(A − λI) = det(λI − A).
    let lhs = charpoly(&build_a(state, q));
    let rhs = fp_reflected(state, q);
    lhs.iter()
        .zip(&rhs)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

/// Number of distinct real roots, by a Sturm sequence. Remainders whose
/// coefficients are all below `tol` times the input's largest coefficient
/// end the sequence.
pub fn count_real_roots(coeffs: &[f64], tol: f64) -> usize {
    let trim = |mut v: Vec<f64>, eps: f64| {
        while v.len() > 1 && v.last().is_some_and(|x| x.abs() <= eps) {
            v.pop();
        }
        v
    };
    let scale = coeffs.iter().fold(0.0_f64, |m, c| m.max(c.abs()));
    if scale == 0.0 {
        return 0;
    }
    let eps = tol * scale;
    let p0 = trim(coeffs.to_vec(), 0.0);
    if p0.len() < 2 {
        return 0;
    }
    let p1: Vec<f64> = (1..p0.len()).map(|i| i as f64 * p0[i]).collect();
    let mut seq = vec![p0, p1];
    loop {
        let (a, b) = (&seq[seq.len() - 2], &seq[seq.len() - 1]);
        if b.len() < 2 {
            break;
        }
        let mut r = a.clone();
        let lead = b[b.len() - 1];
        while r.len() >= b.len() {
            let f = r[r.len() - 1] / lead;
            let shift = r.len() - b.len();
            for (i, bi) in b.iter().enumerate() {
                r[shift + i] -= f * bi;
            }
            r.pop();
        }
        let r: Vec<f64> = trim(r, eps).into_iter().map(|x| -x).collect();
        if r.iter().all(|x| x.abs() <= eps) {
            break;
        }
        seq.push(r);
    }
    let changes = |signs: Vec<f64>| signs.windows(2).filter(|w| w[0] * w[1] < 0.0).count();
    let at_pos: Vec<f64> = seq.iter().map(|p| p[p.len() - 1].signum()).collect();
    let at_neg: Vec<f64> = seq
        .iter()
        .map(|p| {
            let s = p[p.len() - 1].signum();
            if (p.len() - 1) % 2 == 0 {
                s
            } else {
                -s
            }
        })
        .collect();
    changes(at_neg).saturating_sub(changes(at_pos))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EllipticityPoint {
    pub q: f64,
    /// `min |Im λ|` over the eigenvalues of `A(U(q))`.
    pub min_abs_imag: f64,
    pub elliptic: bool,
    /// Distinct real roots of `F_p(−λ)` by Sturm count.
    pub real_roots: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EllipticityReport {
    pub points: Vec<EllipticityPoint>,
    pub min_abs_imag: f64,
    pub argmin_q: f64,
    pub elliptic: bool,
    /// Eigenvalue and root-count routes agree at every q.
    pub routes_agree: bool,
}

impl EllipticityReport {
    pub fn failing_q(&self) -> Vec<f64> {
        self.points
            .iter()
            .filter(|p| !p.elliptic)
            .map(|p| p.q)
            .collect()
    }
}

pub fn ellipticity(state: &StateU, q_grid: &[f64]) -> EllipticityReport {
    let points: Vec<EllipticityPoint> = q_grid
        .iter()
        .map(|&q| {
            let ev = build_a(state, q).complex_eigenvalues();
            let min_abs_imag = ev.iter().map(|z| z.im.abs()).fold(f64::INFINITY, f64::min);
            EllipticityPoint {
                q,
                min_abs_imag,
                elliptic: min_abs_imag > ELLIPTIC_TOLERANCE,
                real_roots: count_real_roots(&fp_reflected(state, q), 1e-12),
            }
        })
        .collect();
    let (argmin_q, min_abs_imag) =
        points
            .iter()
            .map(|p| (p.q, p.min_abs_imag))
            .fold(
                (f64::NAN, f64::INFINITY),
                |a, b| if b.1 < a.1 { b } else { a },
            );
    EllipticityReport {
        elliptic: points.iter().all(|p| p.elliptic),
        routes_agree: points.iter().all(|p| p.elliptic == (p.real_roots == 0)),
        points,
        min_abs_imag,
        argmin_q,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransportReport {
    pub max_residual: f64,
    /// `max_residual` divided by the largest term magnitude (at least 1).
    pub relative: f64,
    pub argmax: (f64, f64),
}

/// `F_t + p F_q − (u_1)_q F_p` on `p_grid × q_grid`, with `F_t` assembled
/// from the equations.
pub fn transport_residual(state: &StateU, p_grid: &[f64], q_grid: &[f64]) -> TransportReport {
    let n = state.n;
    let mut out = TransportReport {
        max_residual: 0.0,
        relative: 0.0,
        argmax: (f64::NAN, f64::NAN),
    };
    let mut scale: f64 = 1.0;
    for &q in q_grid {
        let j = state.jets(q);
        let ut = state.time_derivative(q);
        for &p in p_grid {
            let (mut ft, mut fq) = (0.0, 0.0);
            let mut fp = p.powi(n as i32);
            for k in 1..=n {
                let pw = p.powi((n - k) as i32);
                ft += ut[k - 1] * pw;
                fq += j[k][1] * pw;
            }
            for (k, jk) in j.iter().enumerate().take(n) {
                fp += (n - k) as f64 * jk[0] * p.powi((n - k - 1) as i32);
            }
            let terms = [ft, p * fq, -j[1][1] * fp];
            let r = terms.iter().sum::<f64>().abs();
            scale = scale.max(terms.iter().fold(0.0, |m: f64, t| m.max(t.abs())));
            if r > out.max_residual {
                out.max_residual = r;
                out.argmax = (p, q);
            }
        }
    }
    out.relative = out.max_residual / scale;
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConcavityReport {
    pub gamma: f64,
    pub e: f64,
    pub e_dot: f64,
    /// γ(γ−1)∫u1^{γ−2}((u1)_t² − 2u0 (u1)_t (u1)_q + (u1)_q²).
    pub e_ddot_formula: f64,
    /// Second time derivative of E with every time derivative eliminated
    /// through the equations; no integration by parts.
    pub e_ddot_oracle: f64,
    /// The formula with its last term replaced by `u1 (u1)_q²`.
    pub e_ddot_alternative: f64,
    pub discrepancy: f64,
    pub alternative_discrepancy: f64,
}

/// `E(t) = ∫ u1^γ dq` and its first two time derivatives for n = 2, by
/// periodic trapezoid quadrature on `n_q` points.
pub fn e_concavity_n2(
    state: &StateU,
    gamma: f64,
    n_q: usize,
) -> Result<ConcavityReport, ConservationError> {
    state.validate()?;
    if state.n != 2 {
        return Err(ConservationError::Invalid(format!(
            "needs n = 2, got {}",
            state.n
        )));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(ConservationError::Invalid(format!(
            "γ must lie in (0, 1), got {gamma}"
        )));
    }
    if n_q < 4 {
        return Err(ConservationError::Invalid(
            "need at least 4 quadrature points".into(),
        ));
    }
    let u0 = state.u0;
    let threshold = u0 * u0;
    let (mut e, mut e1, mut formula, mut oracle, mut alt) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for q in circle_points(n_q) {
        let [u1, u1q, u1qq] = state.components[0].jet(q);
        let [_, _, u2qq] = state.components[1].jet(q);
        let u2q = state.components[1].d1(q);
        if u1 <= threshold {
            return Err(ConservationError::EllipticityViolated { q, u1, threshold });
        }
        let u1t = 2.0 * u0 * u1q - u2q;
        // ∂q of (u1)_t and of (u2)_t = u1 (u1)_q.
        let u1tq = 2.0 * u0 * u1qq - u2qq;
        let u2tq = u1q * u1q + u1 * u1qq;
        let u1tt = 2.0 * u0 * u1tq - u2tq;
        let pw = u1.powf(gamma - 2.0);
        e += u1.powf(gamma);
        e1 += gamma * u1 * pw * u1t;
        let cross = u1t * u1t - 2.0 * u0 * u1t * u1q;
        formula += gamma * (gamma - 1.0) * pw * (cross + u1q * u1q);
        alt += gamma * (gamma - 1.0) * pw * (cross + u1 * u1q * u1q);
        oracle += gamma * (gamma - 1.0) * pw * u1t * u1t + gamma * u1 * pw * u1tt;
    }
    let w = 1.0 / n_q as f64;
    let (e, e_dot, formula, oracle, alt) = (e * w, e1 * w, formula * w, oracle * w, alt * w);
    Ok(ConcavityReport {
        gamma,
        e,
        e_dot,
        e_ddot_formula: formula,
        e_ddot_oracle: oracle,
        e_ddot_alternative: alt,
        discrepancy: (formula - oracle).abs(),
        alternative_discrepancy: (alt - oracle).abs(),
    })
}

fn horner(c: &[f64], p: f64) -> (f64, f64) {
    let mut v = 0.0;
    let mut d = 0.0;
    for &a in c.iter().rev() {
        d = d * p + v;
        v = v * p + a;
    }
    (v, d)
}

/// The real root of the increasing polynomial `c` at level `level`:
/// bracket by doubling, then Newton safeguarded by bisection.
fn solve_increasing(c: &[f64], level: f64) -> Option<f64> {
    let g = |p: f64| horner(c, p).0 - level;
    let mut width = 1.0;
    let (mut lo, mut hi) = (-width, width);
    while g(lo) > 0.0 || g(hi) < 0.0 {
        width *= 2.0;
        if width > 1e150 {
            return None;
        }
        (lo, hi) = (-width, width);
    }
    let mut p = 0.5 * (lo + hi);
    for _ in 0..400 {
        let (v, d) = horner(c, p);
        let v = v - level;
        if v == 0.0 {
            return Some(p);
        }
        if v < 0.0 {
            lo = p;
        } else {
            hi = p;
        }
        let newton = p - v / d;
        let next = if d > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - p).abs() <= 4.0 * f64::EPSILON * p.abs().max(1.0) {
            return Some(next);
        }
        p = next;
    }
    Some(p)
}

/// Level sets `F(p, q) = c` as leaves `p = f_c(q)` sampled at `i/n_q`, with
/// slopes `−F_q/F_p`. Each leaf is labelled by its level.
pub fn extract_leaves(
    state: &StateU,
    levels: &[f64],
    n_q: usize,
) -> Result<Vec<Leaf>, ConservationError> {
    state.validate()?;
    if n_q < 3 {
        return Err(ConservationError::Invalid(
            "need at least 3 q points".into(),
        ));
    }
    let qs = circle_points(n_q);
    let report = ellipticity(state, &qs);
    if let Some(bad) = report.points.iter().find(|p| !p.elliptic) {
        return Err(ConservationError::NotElliptic { q: bad.q });
    }
    let mut leaves: Vec<Leaf> = levels
        .iter()
        .map(|&alpha| Leaf {
            alpha,
            points: Vec::with_capacity(n_q),
        })
        .collect();
    for &q in &qs {
        let f = state.poly_f(q);
        let j = state.jets(q);
        for leaf in &mut leaves {
            let level = leaf.alpha;
            let p = level
                .is_finite()
                .then(|| solve_increasing(&f, level))
                .flatten()
                .ok_or(ConservationError::LevelOutOfRange { level, q })?;
            let fp = horner(&f, p).1;
            let fq: f64 = (1..=state.n)
                .map(|k| j[k][1] * p.powi((state.n - k) as i32))
                .sum();
            leaf.points.push(LeafPoint {
                q,
                p,
                slope: -fq / fp,
            });
        }
    }
    let mut order: Vec<usize> = (0..leaves.len()).collect();
    order.sort_by(|&a, &b| leaves[a].alpha.total_cmp(&leaves[b].alpha));
    for w in order.windows(2) {
        let (lo, hi) = (&leaves[w[0]], &leaves[w[1]]);
        for (a, b) in lo.points.iter().zip(&hi.points) {
            if lo.alpha < hi.alpha && b.p <= a.p {
                return Err(ConservationError::OrderingViolated {
                    lower: lo.alpha,
                    upper: hi.alpha,
                    q: a.q,
                });
            }
        }
    }
    Ok(leaves)
}

/// `max |F(leaf) − c|` over every sampled point.
pub fn level_defect(state: &StateU, leaves: &[Leaf]) -> f64 {
    leaves
        .iter()
        .flat_map(|l| {
            l.points
                .iter()
                .map(move |pt| (horner(&state.poly_f(pt.q), pt.p).0 - l.alpha).abs())
        })
        .fold(0.0, f64::max)
}
