//! Numerical certification of metric blow-up under antisymmetric-sign
//! momentum data and of global boundedness under one-signed momentum data.
//!
//! For a datum whose momentum changes sign once at `x0` (nonnegative to the
//! left, nonpositive to the right), the quantities tracked along the
//! characteristic `gamma(t) = q(x0, t)` are
//!
//! `I(t) = (u + u_x)(gamma) = e^{q} integral_q^inf e^{-z} m dz`  (negative, decreasing)
//! `g(t) = (u - u_x)(gamma)`                                     (positive, non-decreasing)
//! `f(t) = g(t)^2`, which obeys `f' >= (-I0) f^2`,
//!
//! so `g22(gamma(t)) = (1 + mu^2) f(t)^2` crosses any threshold before
//! `T0 = -1 / (I0 g0^2)`. One-signed momentum instead gives the global
//! bound `sup |u_x| <= L1 norm of m0` for all time.

use serde::Serialize;

use crate::characteristics::evolve_flow;
use crate::error::{DpError, Result};
use crate::grid::Field;
use crate::solver::{SolverState, TimeSeries};
use crate::spectral;

/// Tolerance for the pointwise sign checks on `m0`.
pub const SIGN_TOL: f64 = 1e-12;
/// One-sided slack absorbing quadrature noise in monotonicity checks.
pub const MONOTONE_SLACK: f64 = 1e-8;
/// Default blow-up threshold for `g22` along the tracked characteristic.
pub const G22_THRESHOLD: f64 = 1e6;

/// Report of the Theorem-style sign conditions on the initial momentum.
#[derive(Debug, Clone, Serialize)]
pub struct SignReport {
    pub x0: f64,
    pub passed: bool,
    /// Worst violation and its location, if any.
    pub violation: Option<(f64, f64)>,
    pub i0: f64,
    pub g0: f64,
    pub t0: f64,
}

/// Verify `m0 <= 0` for `x >= x0` and `m0 >= 0` for `x <= x0`, then build
/// the certificate data `I0`, `g0 = u0(x0) - u0'(x0)` and `T0 = -1/(I0 g0^2)`.
pub fn check_sign_conditions(m0: &Field, x0: f64) -> Result<SignReport> {
    let grid = m0.grid();
    let mut violation: Option<(f64, f64)> = None;
    for (i, &v) in m0.values().iter().enumerate() {
        let x = grid.node(i);
        let bad = if x >= x0 { v > SIGN_TOL } else { v < -SIGN_TOL };
        if bad {
            let mag = v.abs();
            if violation.is_none_or(|(w, _)| mag > w) {
                violation = Some((mag, x));
            }
        }
    }
    if let Some((mag, x)) = violation {
        return Err(DpError::CertificateInvalid {
            reason: format!("sign condition violated: |m0({x:.4})| = {mag:.3e}"),
        });
    }

    let l = grid.half_length();
    let i0 = x0.exp() * spectral::weighted_integral(m0, |z| (-z).exp(), x0, l);
    let u0 = spectral::green_convolution(m0)?;
    let u0x = spectral::deriv(&u0, 1)?;
    let g0 = spectral::interpolate(&u0, x0) - spectral::interpolate(&u0x, x0);
    if !(i0 < 0.0) || !(g0 > 0.0) {
        return Err(DpError::CertificateInvalid {
            reason: format!("degenerate certificate: I0 = {i0:.3e}, g0 = {g0:.3e}"),
        });
    }
    let t0 = -1.0 / (i0 * g0 * g0);
    Ok(SignReport { x0, passed: true, violation: None, i0, g0, t0 })
}

/// One tracked point along the blow-up characteristic.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TrackPoint {
    pub t: f64,
    pub q: f64,
    pub i: f64,
    pub g: f64,
    pub f: f64,
    pub g22: f64,
    pub m_at_gamma: f64,
}

/// Certificate for the blow-up scenario: the sign report plus the trajectory
/// log along `gamma(t)`.
#[derive(Debug, Clone, Serialize)]
pub struct BlowupCertificate {
    pub x0: f64,
    pub i0: f64,
    pub g0: f64,
    pub t0: f64,
    pub mu: f64,
    pub track: Vec<TrackPoint>,
}

/// Track `I`, `g`, `f`, `g22` along `gamma(t) = q(x0, t)`. Logging stops
/// once `g22` exceeds three times the blow-up threshold: past that point the
/// forming gradient singularity is no longer resolved and the certificate
/// is already decided.
pub fn blowup_track(series: &TimeSeries, report: &SignReport, mu: f64) -> Result<BlowupCertificate> {
    let flow = evolve_flow(series, &[report.x0])?;
    let l = series.final_state().u.grid().half_length();
    let one = 1.0 + mu * mu;
    let mut track = Vec::new();
    for (idx, snap) in series.snapshots.iter().enumerate() {
        let q = flow.q[idx][0];
        let i_val = q.exp() * spectral::weighted_integral(&snap.m, |z| (-z).exp(), q, l);
        let ux = spectral::deriv(&snap.u, 1)?;
        let g_val = spectral::interpolate(&snap.u, q) - spectral::interpolate(&ux, q);
        let f_val = g_val * g_val;
        let g22 = one * f_val * f_val;
        let m_at = spectral::interpolate(&snap.m, q);
        track.push(TrackPoint { t: snap.t, q, i: i_val, g: g_val, f: f_val, g22, m_at_gamma: m_at });
        if g22 > 3.0 * G22_THRESHOLD {
            break;
        }
    }
    Ok(BlowupCertificate {
        x0: report.x0,
        i0: report.i0,
        g0: report.g0,
        t0: report.t0,
        mu,
        track,
    })
}

/// Outcome of the differential-inequality chain along the tracked curve.
#[derive(Debug, Clone, Serialize)]
pub struct RiccatiReport {
    pub i_decreasing_negative: bool,
    pub g_non_decreasing: bool,
    pub quotient_bound_ok: bool,
    pub reciprocal_bound_ok: bool,
    pub threshold: f64,
    pub crossing_time: Option<f64>,
    pub t0: f64,
    pub crossed_before_t0: bool,
    pub passed: bool,
    pub violations: Vec<String>,
}

/// Check, with one-sided slack: `I` decreasing and negative, `g`
/// non-decreasing, the difference-quotient bound `df/dt >= (-I0) f^2`, the
/// reciprocal bound `0 < 1/f - I0 t <= 1/f(0)`, and the threshold crossing
/// time of `g22` against `T0`.
pub fn verify_riccati_bound(cert: &BlowupCertificate, threshold: f64) -> Result<RiccatiReport> {
    if cert.track.len() < 3 {
        return Err(DpError::CertificateInvalid {
            reason: format!("trajectory log too short: {} points", cert.track.len()),
        });
    }
    let mut violations = Vec::new();
    let mut i_ok = true;
    let mut g_ok = true;
    let mut quot_ok = true;
    let mut recip_ok = true;

    for w in cert.track.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if !(b.i < 0.0) || b.i > a.i + MONOTONE_SLACK {
            i_ok = false;
            violations.push(format!("I not decreasing/negative at t = {:.5}", b.t));
        }
        if b.g < a.g - MONOTONE_SLACK {
            g_ok = false;
            violations.push(format!("g decreased at t = {:.5}", b.t));
        }
        let quotient = (b.f - a.f) / (b.t - a.t);
        let floor = (-cert.i0) * a.f * a.f;
        if quotient < floor * (1.0 - MONOTONE_SLACK) - MONOTONE_SLACK {
            quot_ok = false;
            violations.push(format!("quotient bound failed at t = {:.5}", b.t));
        }
    }
    let inv_f0 = 1.0 / cert.track[0].f;
    for p in &cert.track {
        let v = 1.0 / p.f - cert.i0 * p.t;
        if !(v > 0.0) || v > inv_f0 + MONOTONE_SLACK {
            recip_ok = false;
            violations.push(format!("reciprocal bound failed at t = {:.5}", p.t));
        }
    }

    let crossing_time = cert.track.iter().find(|p| p.g22 > threshold).map(|p| p.t);
    let crossed = crossing_time.is_some_and(|t| t < cert.t0);
    if !crossed {
        violations.push(match crossing_time {
            Some(t) => format!("threshold crossed at t = {t:.5}, not before T0 = {:.5}", cert.t0),
            None => "threshold never crossed".to_string(),
        });
    }
    let passed = i_ok && g_ok && quot_ok && recip_ok && crossed;
    Ok(RiccatiReport {
        i_decreasing_negative: i_ok,
        g_non_decreasing: g_ok,
        quotient_bound_ok: quot_ok,
        reciprocal_bound_ok: recip_ok,
        threshold,
        crossing_time,
        t0: cert.t0,
        crossed_before_t0: crossed,
        passed,
        violations,
    })
}

/// Both tail inequalities behind the monotonicity of `I`:
///
/// (i)  `e^{-q} integral_{-inf}^{q} e^{z} (u^2 - u_x^2) dz >= (u^2 - u_x^2)(q)`
/// (ii) `integral_q^{inf} e^{-x} (u^2 - u_x^2) dx >= e^{-q} M(t) I(t)`
///
/// where `M = (u - u_x)(q)` is the left-tail moment and `I = (u + u_x)(q)`
/// the right-tail moment. Under the sign hypotheses `M > 0 > I`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TailInequalityReport {
    pub q: f64,
    pub t: f64,
    pub lhs1: f64,
    pub rhs1: f64,
    pub first_holds: bool,
    pub lhs2: f64,
    pub rhs2: f64,
    pub second_holds: bool,
    pub m_value: f64,
    pub i_value: f64,
}

pub fn verify_tail_inequalities(state: &SolverState, q: f64) -> Result<TailInequalityReport> {
    let grid = state.u.grid();
    let l = grid.half_length();
    if q.abs() > 0.9 * l {
        return Err(DpError::FlowEscaped { t: state.t, q });
    }
    let ux = spectral::deriv(&state.u, 1)?;
    let diff_sq = &(&state.u * &state.u) - &(&ux * &ux);

    let lhs1 = (-q).exp() * spectral::weighted_integral(&diff_sq, |z| z.exp(), -l, q);
    let u_q = spectral::interpolate(&state.u, q);
    let ux_q = spectral::interpolate(&ux, q);
    let rhs1 = u_q * u_q - ux_q * ux_q;

    let lhs2 = spectral::weighted_integral(&diff_sq, |z| (-z).exp(), q, l);
    let m_value = (-q).exp() * spectral::weighted_integral(&state.m, |z| z.exp(), -l, q);
    let i_value = q.exp() * spectral::weighted_integral(&state.m, |z| (-z).exp(), q, l);
    let rhs2 = (-q).exp() * m_value * i_value;

    Ok(TailInequalityReport {
        q,
        t: state.t,
        lhs1,
        rhs1,
        first_holds: lhs1 >= rhs1 - MONOTONE_SLACK,
        lhs2,
        rhs2,
        second_holds: lhs2 >= rhs2 - MONOTONE_SLACK,
        m_value,
        i_value,
    })
}

/// Certificate data for the global (one-signed momentum) regime.
#[derive(Debug, Clone, Serialize)]
pub struct GlobalCertificate {
    pub m0_sign: i8,
    pub l1_mass: f64,
}

impl GlobalCertificate {
    /// Requires `m0` one-signed within `SIGN_TOL`.
    pub fn new(m0: &Field) -> Result<GlobalCertificate> {
        let max = m0.values().iter().cloned().fold(f64::MIN, f64::max);
        let min = m0.values().iter().cloned().fold(f64::MAX, f64::min);
        let sign = if min >= -SIGN_TOL && max > SIGN_TOL {
            1
        } else if max <= SIGN_TOL && min < -SIGN_TOL {
            -1
        } else if max.abs() <= SIGN_TOL && min.abs() <= SIGN_TOL {
            0
        } else {
            return Err(DpError::CertificateInvalid {
                reason: format!("m0 changes sign: min = {min:.3e}, max = {max:.3e}"),
            });
        };
        let l1_mass = m0.map(f64::abs).integral();
        Ok(GlobalCertificate { m0_sign: sign, l1_mass })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GlobalBoundReport {
    pub l1_mass: f64,
    pub max_sup_ux: f64,
    pub max_sup_u: f64,
    pub max_l1_drift: f64,
    pub sign_violations: usize,
    pub passed: bool,
    pub failure: Option<String>,
}

/// Assert along the whole series: `sup |u_x| <= L1(m0) + slack`,
/// `sup |u| <= L1(m0) + slack`, conservation of the L1 mass of `m`, and
/// pointwise sign preservation of `m` above a noise floor.
pub fn verify_global_bound(series: &TimeSeries, cert: &GlobalCertificate) -> Result<GlobalBoundReport> {
    let mut max_sup_ux: f64 = 0.0;
    let mut max_sup_u: f64 = 0.0;
    let mut max_l1_drift: f64 = 0.0;
    let mut sign_violations = 0usize;
    let mut failure = None;

    for snap in &series.snapshots {
        let ux = spectral::deriv(&snap.u, 1)?;
        let sup_ux = ux.sup_norm();
        let sup_u = snap.u.sup_norm();
        max_sup_ux = max_sup_ux.max(sup_ux);
        max_sup_u = max_sup_u.max(sup_u);
        if sup_ux > cert.l1_mass + MONOTONE_SLACK && failure.is_none() {
            let (_, at) = ux.min_with_location();
            failure = Some(format!("sup|u_x| = {sup_ux:.6} > {:.6} at t = {}, near x = {at:.3}",
                cert.l1_mass, snap.t));
        }
        let l1 = snap.m.map(f64::abs).integral();
        max_l1_drift = max_l1_drift.max((l1 - cert.l1_mass).abs());
        let s = cert.m0_sign as f64;
        sign_violations += snap
            .m
            .values()
            .iter()
            .filter(|&&v| v.abs() > MONOTONE_SLACK && v.signum() != s)
            .count();
    }
    let passed = failure.is_none()
        && max_l1_drift < 1e-6
        && sign_violations == 0
        && max_sup_u <= cert.l1_mass + MONOTONE_SLACK;
    Ok(GlobalBoundReport {
        l1_mass: cert.l1_mass,
        max_sup_ux,
        max_sup_u,
        max_l1_drift,
        sign_violations,
        passed,
        failure,
    })
}
