//! Second fundamental form of the pseudospherical surface: closed form for
//! `mu = 0`, ODE-defined for `mu != 0`, and verification of the full
//! symmetry / Codazzi / Gauss system together with the coframe.
//!
//! The connection-form coefficients `a, b, c` (with
//! `w13 = a w1 + b w2`, `w23 = b w1 + c w2`) are functions of `x` alone.
//! For `mu = 0` they are
//!
//! `a(x) = +-sqrt(L(x))`,   `L(x) = sigma e^{4x} - b0^2 e^{8x} - 1`
//! `b(x) = -b0 e^{4x}`
//! `c(x) = a(x) - a'(x)/2`
//!
//! valid where `L > 0`, i.e. for `2x` between
//! `ln sqrt((sigma -+ sqrt(sigma^2 - 4 b0^2)) / (2 b0^2))`.
//! The halved derivative in `c` reflects that the closed forms are written
//! in the doubled variable `z = 2x`; the convention is selected empirically
//! against the Codazzi and Gauss residuals (see [`resolve_convention`]).

use serde::Serialize;

use crate::error::{DpError, Result};
use crate::geometry::CoframeField;
use crate::grid::Grid;
use crate::solver::{SolverState, TimeDerivatives};
use crate::spectral;

use std::sync::Arc;

/// Whether the primes in the closed forms are taken in `x` itself or in the
/// doubled variable `z = 2x` (halving every derivative in `x`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ArgConvention {
    /// `c = a - da/dx`, ODE integrated at the printed rate.
    DxFull,
    /// `c = a - (1/2) da/dx`, ODE integrated at twice the printed rate.
    DzHalf,
}

impl ArgConvention {
    fn half_factor(self) -> f64 {
        match self {
            ArgConvention::DxFull => 1.0,
            ArgConvention::DzHalf => 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SecondFormParams {
    pub sigma: f64,
    pub b0: f64,
    /// Branch of `a = +-sqrt(L)` (and of the `mu != 0` formulas).
    pub branch: i8,
    /// Initial value for the `mu != 0` ODE.
    pub b_init: f64,
}

impl SecondFormParams {
    pub fn new(sigma: f64, b0: f64, branch: i8, b_init: f64) -> Result<SecondFormParams> {
        if !(sigma > 0.0) || sigma * sigma <= 4.0 * b0 * b0 {
            return Err(DpError::InvalidParameter(format!(
                "require sigma > 0 and sigma^2 > 4 b0^2, got sigma = {sigma}, b0 = {b0}"
            )));
        }
        if branch != 1 && branch != -1 {
            return Err(DpError::InvalidParameter("branch must be +-1".into()));
        }
        Ok(SecondFormParams { sigma, b0, branch, b_init })
    }
}

/// Closed-form endpoints of `{L > 0}`; the right endpoint is `+inf` when
/// `b0 = 0`.
pub fn validity_endpoints(sigma: f64, b0: f64) -> (f64, f64) {
    if b0 == 0.0 {
        return (-(sigma.ln()) / 4.0, f64::INFINITY);
    }
    let disc = (sigma * sigma - 4.0 * b0 * b0).sqrt();
    let y_lo = (sigma - disc) / (2.0 * b0 * b0);
    let y_hi = (sigma + disc) / (2.0 * b0 * b0);
    (y_lo.ln() / 4.0, y_hi.ln() / 4.0)
}

/// Connection-form coefficients sampled on a contiguous run of grid nodes,
/// together with their analytic x-derivatives (no numerical differentiation).
#[derive(Debug, Clone)]
pub struct SecondFormField {
    pub grid: Arc<Grid>,
    /// First grid index covered.
    pub start: usize,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub a_x: Vec<f64>,
    pub b_x: Vec<f64>,
    pub c_x: Vec<f64>,
    /// Discriminant along the interval (`mu != 0` case only).
    pub delta: Option<Vec<f64>>,
    pub validity: (f64, f64),
    /// Where the `mu != 0` integration met the domain boundary (degenerate
    /// discriminant or coefficient blow-up), if it did.
    pub boundary: Option<f64>,
}

impl SecondFormField {
    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }
}

/// Closed-form second fundamental form for `mu = 0`.
pub fn second_form_mu0(
    params: &SecondFormParams,
    grid: &Arc<Grid>,
    convention: ArgConvention,
) -> Result<SecondFormField> {
    let (lo, hi) = validity_endpoints(params.sigma, params.b0);
    let kappa = convention.half_factor();
    let beta = params.branch as f64;
    let mut start = None;
    let (mut a, mut b, mut c) = (Vec::new(), Vec::new(), Vec::new());
    let (mut a_x, mut b_x, mut c_x) = (Vec::new(), Vec::new(), Vec::new());
    for i in 0..grid.n() {
        let x = grid.node(i);
        let e4 = (4.0 * x).exp();
        let e8 = (8.0 * x).exp();
        let l = params.sigma * e4 - params.b0 * params.b0 * e8 - 1.0;
        if l <= 0.0 {
            if start.is_some() {
                break;
            }
            continue;
        }
        start.get_or_insert(i);
        let lp = 4.0 * params.sigma * e4 - 8.0 * params.b0 * params.b0 * e8;
        let lpp = 16.0 * params.sigma * e4 - 64.0 * params.b0 * params.b0 * e8;
        let root = l.sqrt();
        let av = beta * root;
        let apv = beta * lp / (2.0 * root);
        let appv = beta * (lpp / (2.0 * root) - lp * lp / (4.0 * root * root * root));
        a.push(av);
        a_x.push(apv);
        b.push(-params.b0 * e4);
        b_x.push(-4.0 * params.b0 * e4);
        c.push(av - kappa * apv);
        c_x.push(apv - kappa * appv);
    }
    let Some(start) = start else {
        return Err(DpError::NoImmersionDomain { sigma: params.sigma, b0: params.b0 });
    };
    Ok(SecondFormField {
        grid: grid.clone(),
        start,
        a,
        b,
        c,
        a_x,
        b_x,
        c_x,
        delta: None,
        validity: (lo, hi),
        boundary: None,
    })
}

/// `mu != 0` second fundamental form: integrate the first-order equation for
/// `b` in `x` (fourth-order stepper with step halving near a degenerate
/// discriminant), then evaluate `a` and `c` from the closed expressions.
pub fn second_form_ode(
    params: &SecondFormParams,
    grid: &Arc<Grid>,
    mu: f64,
    x_span: (f64, f64),
    convention: ArgConvention,
) -> Result<SecondFormField> {
    if mu == 0.0 {
        return Err(DpError::InvalidParameter("mu = 0 has the closed form".into()));
    }
    let rate = 1.0 / convention.half_factor();
    let beta = params.branch as f64;
    let b0 = params.b0;
    let musq = mu * mu;

    let discriminant = |x: f64, b: f64| -> f64 {
        let p = (musq - 1.0) * b - b0 * (4.0 * x).exp();
        (p * p - 4.0 * musq * (1.0 - b * b)) / musq
    };
    // db/dx at the printed rate times the convention factor.
    let slope = |x: f64, b: f64| -> Result<f64> {
        let e4 = (4.0 * x).exp();
        let e8 = (8.0 * x).exp();
        let delta = discriminant(x, b);
        if delta <= 0.0 {
            return Err(DpError::ImmersionBoundary { x, delta });
        }
        let sq = delta.sqrt();
        let denom = mu * (1.0 + musq) * sq + beta * (musq + 1.0) * (musq + 1.0) * b
            - beta * (musq - 1.0) * b0 * e4;
        if denom.abs() < 1e-12 {
            return Err(DpError::ImmersionBoundary { x, delta });
        }
        let numer =
            2.0 * mu * (1.0 + musq) * sq * b + 2.0 * beta * b0 * (musq - 1.0) * e4 * b
                - 2.0 * beta * b0 * b0 * e8;
        Ok(rate * numer / denom)
    };

    let start_idx = grid.node_at_or_after(x_span.0);
    let end_idx = grid.node_at_or_before(x_span.1);
    if end_idx <= start_idx {
        return Err(DpError::InvalidParameter("empty ODE span".into()));
    }
    if discriminant(grid.node(start_idx), params.b_init) <= 0.0 {
        return Err(DpError::ImmersionBoundary {
            x: grid.node(start_idx),
            delta: discriminant(grid.node(start_idx), params.b_init),
        });
    }

    // Integrate cell by cell; the patch is local, so a degenerate
    // discriminant, a vanishing denominator or a coefficient blow-up inside
    // the span marks the domain boundary and ends the patch there.
    let h = grid.spacing();
    let substeps = 16usize;
    let b_cap = 1e6;
    let mut b_vals = vec![params.b_init];
    let mut x = grid.node(start_idx);
    let mut b = params.b_init;
    let mut boundary = None;
    'cells: for _ in start_idx..end_idx {
        let mut done = 0.0;
        let mut sub = h / substeps as f64;
        while done < h - 1e-14 {
            sub = sub.min(h - done);
            match rk4_scalar(&slope, x + done, b, sub) {
                Ok(nb) if nb.abs() <= b_cap && discriminant(x + done + sub, nb) > 0.0 => {
                    b = nb;
                    done += sub;
                }
                _ => {
                    sub *= 0.5;
                    if sub < 1e-12 {
                        boundary = Some(x + done);
                        break 'cells;
                    }
                }
            }
        }
        x += h;
        b_vals.push(b);
    }
    if b_vals.len() < 2 {
        return Err(DpError::ImmersionBoundary {
            x: grid.node(start_idx),
            delta: discriminant(grid.node(start_idx), params.b_init),
        });
    }

    // Assemble a, c and analytic derivatives from b and the ODE slope.
    let n_pts = b_vals.len();
    let (mut a, mut c) = (Vec::with_capacity(n_pts), Vec::with_capacity(n_pts));
    let (mut a_x, mut b_x, mut c_x) =
        (Vec::with_capacity(n_pts), Vec::with_capacity(n_pts), Vec::with_capacity(n_pts));
    let mut delta_vals = Vec::with_capacity(n_pts);
    for (j, &bv) in b_vals.iter().enumerate() {
        let xj = grid.node(start_idx + j);
        let e4 = (4.0 * xj).exp();
        let delta = discriminant(xj, bv);
        let sq = delta.sqrt();
        let p = (musq - 1.0) * bv - b0 * e4;
        a.push((beta * mu * sq - p) / (2.0 * mu));
        c.push((beta * mu * sq + p) / (2.0 * mu));
        let bp = slope(xj, bv)?;
        let pp = (musq - 1.0) * bp - 4.0 * b0 * e4;
        let deltap = (2.0 * p * pp + 8.0 * musq * bv * bp) / musq;
        let sqp = deltap / (2.0 * sq);
        a_x.push((beta * mu * sqp - pp) / (2.0 * mu));
        c_x.push((beta * mu * sqp + pp) / (2.0 * mu));
        b_x.push(bp);
        delta_vals.push(delta);
    }
    Ok(SecondFormField {
        grid: grid.clone(),
        start: start_idx,
        a,
        b: b_vals,
        c,
        a_x,
        b_x,
        c_x,
        delta: Some(delta_vals),
        validity: x_span,
        boundary,
    })
}

fn rk4_scalar(f: &impl Fn(f64, f64) -> Result<f64>, x: f64, y: f64, h: f64) -> Result<f64> {
    let k1 = f(x, y)?;
    let k2 = f(x + 0.5 * h, y + 0.5 * h * k1)?;
    let k3 = f(x + 0.5 * h, y + 0.5 * h * k2)?;
    let k4 = f(x + h, y + h * k3)?;
    Ok(y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
}

/// Residuals of the full surface system on the overlap of the grid, the
/// validity interval of the second form, and the non-degenerate region of
/// the coframe.
#[derive(Debug, Clone, Serialize)]
pub struct BonnetReport {
    pub points: usize,
    /// `w1 /\ w13 + w2 /\ w23`, identically zero by the symmetric shape.
    pub max_symmetry: f64,
    /// `a c - b^2 + 1`.
    pub max_gauss: f64,
    /// `d w13 - w3 /\ w23`.
    pub max_codazzi1: f64,
    /// `d w23 + w3 /\ w13`.
    pub max_codazzi2: f64,
}

pub fn bonnet_residuals(
    state: &SolverState,
    cf: &CoframeField,
    sff: &SecondFormField,
    mask_tol: f64,
) -> Result<BonnetReport> {
    let td = state.time_derivatives()?;
    bonnet_residuals_with(cf, &td, sff, mask_tol)
}

pub fn bonnet_residuals_with(
    cf: &CoframeField,
    td: &TimeDerivatives,
    sff: &SecondFormField,
    mask_tol: f64,
) -> Result<BonnetReport> {
    let mu = cf.params.mu;
    let f = &cf.f12;
    let f_x = spectral::deriv(f, 1)?;
    let wedge = crate::geometry::wedge_density(cf);
    let floor = mask_tol * wedge.sup_norm();

    let mut points = 0usize;
    let (mut sym, mut gauss, mut c1m, mut c2m) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for j in 0..sff.len() {
        let i = sff.start + j;
        if wedge.values()[i].abs() <= floor {
            continue;
        }
        points += 1;
        let (a, b, c) = (sff.a[j], sff.b[j], sff.c[j]);
        let (ap, bp, cp) = (sff.a_x[j], sff.b_x[j], sff.c_x[j]);
        let f11 = cf.f11.values()[i];
        let f12 = cf.f12.values()[i];
        let f21 = cf.f21.values()[i];
        let f22 = cf.f22.values()[i];
        let f31 = cf.f31.values()[i];
        let f32 = cf.f32.values()[i];
        let fv = f.values()[i];
        let fxv = f_x.values()[i];
        let mtv = td.m_t.values()[i];

        let w13x = a * f11 + b * f21;
        let w13t = a * f12 + b * f22;
        let w23x = b * f11 + c * f21;
        let w23t = b * f12 + c * f22;

        sym = sym.max(((f11 * w13t - f12 * w13x) + (f21 * w23t - f22 * w23x)).abs());
        gauss = gauss.max((a * c - b * b + 1.0).abs());

        let d_w13t = (ap + mu * bp) * fv + (a + mu * b) * fxv;
        let dt_w13x = (a + mu * b) * mtv;
        let c1 = (d_w13t - dt_w13x) - (f31 * w23t - f32 * w23x);
        c1m = c1m.max(c1.abs());

        let d_w23t = (bp + mu * cp) * fv + (b + mu * c) * fxv;
        let dt_w23x = (b + mu * c) * mtv;
        let c2 = (d_w23t - dt_w23x) + (f31 * w13t - f32 * w13x);
        c2m = c2m.max(c2.abs());
    }
    if points == 0 {
        return Err(DpError::DegenerateEverywhere);
    }
    Ok(BonnetReport { points, max_symmetry: sym, max_gauss: gauss, max_codazzi1: c1m, max_codazzi2: c2m })
}

#[derive(Debug, Clone, Serialize)]
pub struct ConventionReport {
    pub chosen: ArgConvention,
    pub dz_half_residual: f64,
    pub dx_full_residual: f64,
}

/// Run both derivative conventions on a reference solution and keep the one
/// minimizing the combined Gauss and Codazzi residuals.
pub fn resolve_convention(
    state: &SolverState,
    cf: &CoframeField,
    params: &SecondFormParams,
    mask_tol: f64,
) -> Result<ConventionReport> {
    let grid = state.u.grid();
    let total = |conv: ArgConvention| -> Result<f64> {
        let sff = second_form_mu0(params, grid, conv)?;
        let rep = bonnet_residuals(state, cf, &sff, mask_tol)?;
        Ok(rep.max_gauss + rep.max_codazzi1 + rep.max_codazzi2)
    };
    let dz = total(ArgConvention::DzHalf)?;
    let dx = total(ArgConvention::DxFull)?;
    let chosen = if dz <= dx { ArgConvention::DzHalf } else { ArgConvention::DxFull };
    Ok(ConventionReport { chosen, dz_half_residual: dz, dx_full_residual: dx })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{CoframeParams, coframe};
    use crate::grid::Field;

    fn bisect_root(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(lo) * f(mid) <= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn validity_endpoints_match_root_finding_oracle() {
        for (sigma, b0) in [(3.0, 1.0), (5.0, 0.5)] {
            let (lo, hi) = validity_endpoints(sigma, b0);
            let l = |x: f64| sigma * (4.0 * x).exp() - b0 * b0 * (8.0 * x).exp() - 1.0;
            let root_lo = bisect_root(&l, lo - 0.5, lo + 0.5);
            let root_hi = bisect_root(&l, hi + 0.5, hi - 0.5);
            assert!((root_lo - lo).abs() < 1e-10, "lo {root_lo} vs {lo}");
            assert!((root_hi - hi).abs() < 1e-10, "hi {root_hi} vs {hi}");
        }
    }

    #[test]
    fn b0_to_zero_opens_the_right_endpoint() {
        let (_, hi) = validity_endpoints(3.0, 0.0);
        assert!(hi.is_infinite());
        let (_, hi_small) = validity_endpoints(3.0, 1e-6);
        assert!(hi_small > 2.0, "right endpoint should retreat to +inf: {hi_small}");
    }

    #[test]
    fn b_coefficient_is_exact_by_construction() {
        let g = Grid::new(512, 30.0).unwrap();
        let params = SecondFormParams::new(3.0, 1.0, 1, 0.0).unwrap();
        let sff = second_form_mu0(&params, &g, ArgConvention::DzHalf).unwrap();
        for j in 0..sff.len() {
            let x = g.node(sff.start + j);
            assert_eq!(sff.b[j], -(4.0 * x).exp());
        }
    }

    #[test]
    fn gauss_scalar_vanishes_under_dz_half_only() {
        let g = Grid::new(512, 30.0).unwrap();
        let params = SecondFormParams::new(3.0, 1.0, 1, 0.0).unwrap();
        let dz = second_form_mu0(&params, &g, ArgConvention::DzHalf).unwrap();
        let dx = second_form_mu0(&params, &g, ArgConvention::DxFull).unwrap();
        let worst = |sff: &SecondFormField| {
            (0..sff.len()).fold(0.0f64, |m, j| {
                m.max((sff.a[j] * sff.c[j] - sff.b[j] * sff.b[j] + 1.0).abs())
            })
        };
        assert!(worst(&dz) < 1e-10, "dz-half gauss scalar {}", worst(&dz));
        assert!(worst(&dx) > 1e-2, "dx-full should fail: {}", worst(&dx));
    }

    #[test]
    fn convention_resolution_prefers_dz_half() {
        let g = Grid::new(1024, 30.0).unwrap();
        let state = SolverState::new(0.0, Field::from_fn(g, |x| (-x * x).exp())).unwrap();
        let cf = coframe(&state, CoframeParams::new(0.0, 1).unwrap()).unwrap();
        let params = SecondFormParams::new(3.0, 1.0, 1, 0.0).unwrap();
        let rep = resolve_convention(&state, &cf, &params, 1e-3).unwrap();
        assert_eq!(rep.chosen, ArgConvention::DzHalf);
        assert!(rep.dz_half_residual < 1e-6, "resolved residual {}", rep.dz_half_residual);
        assert!(rep.dx_full_residual > 1e-2);
    }

    #[test]
    fn bonnet_residuals_small_on_solution_snapshot() {
        let g = Grid::new(1024, 30.0).unwrap();
        let state = SolverState::new(0.0, Field::from_fn(g.clone(), |x| (-x * x).exp())).unwrap();
        let cf = coframe(&state, CoframeParams::new(0.0, 1).unwrap()).unwrap();
        for (sigma, b0) in [(3.0, 1.0), (5.0, 0.5)] {
            let params = SecondFormParams::new(sigma, b0, 1, 0.0).unwrap();
            let sff = second_form_mu0(&params, &g, ArgConvention::DzHalf).unwrap();
            let rep = bonnet_residuals(&state, &cf, &sff, 1e-3).unwrap();
            assert!(rep.points > 0);
            assert!(rep.max_symmetry < 1e-12, "symmetry {}", rep.max_symmetry);
            assert!(rep.max_gauss < 1e-6, "gauss {}", rep.max_gauss);
            assert!(rep.max_codazzi1 < 1e-6, "codazzi1 {}", rep.max_codazzi1);
            assert!(rep.max_codazzi2 < 1e-6, "codazzi2 {}", rep.max_codazzi2);
        }
    }

    /// Initial value riding the branch that limits onto the closed form as
    /// `mu -> 0` (where `b = -b0 e^{4x}`); generic initial values drive the
    /// equation into a denominator degeneration within a fraction of a unit.
    fn ode_params(b0: f64, x_start: f64) -> SecondFormParams {
        SecondFormParams::new(3.0, b0, -1, -b0 * (4.0 * x_start).exp()).unwrap()
    }

    #[test]
    fn ode_stops_at_the_domain_boundary() {
        // Over a long span the coefficient runs away at finite x; the patch
        // must end there with the boundary recorded rather than erroring.
        let g = Grid::new(1024, 30.0).unwrap();
        let params = ode_params(1.0, 0.5);
        let sff = second_form_ode(&params, &g, 0.5, (0.5, 3.0), ArgConvention::DzHalf).unwrap();
        assert!(sff.boundary.is_some());
        assert!(!sff.is_empty());
        assert!(sff.delta.as_ref().unwrap().iter().all(|&d| d > 0.0));
    }

    #[test]
    fn ode_path_keeps_discriminant_positive() {
        let g = Grid::new(1024, 30.0).unwrap();
        let params = ode_params(1.0, 0.5);
        let sff = second_form_ode(&params, &g, 0.5, (0.5, 0.8), ArgConvention::DzHalf).unwrap();
        assert!(!sff.is_empty());
        assert!(sff.boundary.is_none(), "patch should cover the short span");
        let delta = sff.delta.as_ref().unwrap();
        assert!(delta.iter().all(|&d| d > 0.0));
        // a + c = -sqrt(Delta) on this branch, a - c = (b0 e^{4x} - (mu^2-1) b) / mu.
        let mu = 0.5;
        for j in 0..sff.len() {
            let x = g.node(sff.start + j);
            let sum = sff.a[j] + sff.c[j];
            assert!((sum + delta[j].sqrt()).abs() < 1e-10 * (1.0 + sum.abs()));
            let diff = sff.a[j] - sff.c[j];
            let expect = ((4.0 * x).exp() - (mu * mu - 1.0) * sff.b[j]) / mu;
            assert!((diff - expect).abs() < 1e-10 * (1.0 + diff.abs()));
        }
    }

    #[test]
    fn ode_codazzi_residuals_vanish_under_dz_half() {
        // The b-equation encodes Codazzi; initial values on the viable
        // branch give a valid immersion patch with vanishing residuals.
        let g = Grid::new(1024, 30.0).unwrap();
        let state = SolverState::new(0.0, Field::from_fn(g.clone(), |x| (-x * x).exp())).unwrap();
        let mu = 0.5;
        let cf = coframe(&state, CoframeParams::new(mu, 1).unwrap()).unwrap();
        let params = ode_params(1.0, 0.5);
        let sff = second_form_ode(&params, &g, mu, (0.5, 0.8), ArgConvention::DzHalf).unwrap();
        let rep = bonnet_residuals(&state, &cf, &sff, 1e-3).unwrap();
        assert!(rep.max_gauss < 1e-8, "gauss {}", rep.max_gauss);
        assert!(rep.max_codazzi1 < 1e-6, "codazzi1 {}", rep.max_codazzi1);
        assert!(rep.max_codazzi2 < 1e-6, "codazzi2 {}", rep.max_codazzi2);
    }

    #[test]
    fn empty_validity_interval_is_an_error() {
        assert!(SecondFormParams::new(3.0, 2.0, 1, 0.0).is_err());
        // Valid parameters whose interval lies entirely right of a tiny box.
        let g = Grid::new(64, 0.05).unwrap();
        let params = SecondFormParams::new(1.5, 0.749, 1, 0.0).unwrap();
        let (lo, _) = validity_endpoints(1.5, 0.749);
        assert!(lo > 0.05, "interval must miss the grid (lo = {lo})");
        let r = second_form_mu0(&params, &g, ArgConvention::DzHalf);
        assert!(matches!(r, Err(DpError::NoImmersionDomain { .. })));
    }
}
