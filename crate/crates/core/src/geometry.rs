//! Pseudospherical coframe and first fundamental form carried by a solution
//! snapshot.
//!
//! The one-form family, parametrized by `mu` and a branch sign, is
//!
//! `w1 = m dx + F dt`
//! `w2 = (mu m + 2 s r) dx + mu F dt`
//! `w3 = (s r m + 2 mu) dx + s r F dt`
//!
//! with `m = u - u_xx`, `F = u_x^2 - 2 u u_x + u u_xx`, `r = sqrt(1 + mu^2)`
//! and `s` the branch sign. On solutions the triad satisfies the structure
//! equations of a surface of Gaussian curvature -1; the zero set of `F` is
//! where the coframe degenerates.

use serde::{Deserialize, Serialize};

use crate::error::{DpError, Result};
use crate::grid::Field;
use crate::solver::{SolverState, TimeDerivatives};
use crate::spectral;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CoframeParams {
    pub mu: f64,
    pub sign: i8,
}

impl Default for CoframeParams {
    fn default() -> Self {
        CoframeParams { mu: 0.0, sign: 1 }
    }
}

impl CoframeParams {
    pub fn new(mu: f64, sign: i8) -> Result<CoframeParams> {
        if sign != 1 && sign != -1 {
            return Err(DpError::InvalidParameter(format!("branch sign must be +-1, got {sign}")));
        }
        if !mu.is_finite() {
            return Err(DpError::InvalidParameter("mu must be finite".into()));
        }
        Ok(CoframeParams { mu, sign })
    }

    /// `s * sqrt(1 + mu^2)`.
    pub fn root(&self) -> f64 {
        self.sign as f64 * (1.0 + self.mu * self.mu).sqrt()
    }
}

/// Coefficients `f_ij` of `w_i = f_i1 dx + f_i2 dt`.
#[derive(Debug, Clone)]
pub struct CoframeField {
    pub f11: Field,
    pub f12: Field,
    pub f21: Field,
    pub f22: Field,
    pub f31: Field,
    pub f32: Field,
    pub params: CoframeParams,
}

/// `F = u_x^2 - 2 u u_x + u u_xx` with dealiased products.
pub fn wedge_factor(state: &SolverState) -> Result<Field> {
    let u = &state.u;
    let ux = spectral::deriv(u, 1)?;
    let uxx = spectral::deriv(u, 2)?;
    let uxux = spectral::dealiased_mul(&ux, &ux);
    let uux = spectral::dealiased_mul(u, &ux);
    let uuxx = spectral::dealiased_mul(u, &uxx);
    Ok(&(&uxux - &uux.scale(2.0)) + &uuxx)
}

pub fn coframe(state: &SolverState, params: CoframeParams) -> Result<CoframeField> {
    let f = wedge_factor(state)?;
    Ok(coframe_from_parts(state.m.clone(), f, params))
}

/// Assemble the coefficient fields from given `(m, F)` arrays; used when the
/// pair comes from a closed form rather than a solver state.
pub fn coframe_from_parts(m: Field, f: Field, params: CoframeParams) -> CoframeField {
    let c = params.root();
    CoframeField {
        f21: m.affine(params.mu, 2.0 * c),
        f22: f.scale(params.mu),
        f31: m.affine(c, 2.0 * params.mu),
        f32: f.scale(c),
        f11: m,
        f12: f,
        params,
    }
}

/// Coefficient of `w1 /\ w2`, i.e. `f11 f22 - f12 f21`. Algebraically equal
/// to `-s * 2 sqrt(1 + mu^2) * F` for every field, solution or not.
pub fn wedge_density(cf: &CoframeField) -> Field {
    &(&cf.f11 * &cf.f22) - &(&cf.f12 * &cf.f21)
}

/// Pointwise residual of the wedge identity; machine-size for any input.
pub fn wedge_identity_residual(cf: &CoframeField) -> f64 {
    let r = 2.0 * cf.params.root();
    (&wedge_density(cf) + &cf.f12.scale(r)).sup_norm()
}

/// First fundamental form `g = w1^2 + w2^2` in coordinates.
#[derive(Debug, Clone)]
pub struct MetricField {
    pub g11: Field,
    pub g12: Field,
    pub g22: Field,
}

impl MetricField {
    /// Per-node flag: `g11 > 0` and `g11 g22 - g12^2 > 0`.
    pub fn positive_definite_mask(&self) -> Vec<bool> {
        let det = &(&self.g11 * &self.g22) - &(&self.g12 * &self.g12);
        self.g11
            .values()
            .iter()
            .zip(det.values())
            .map(|(&a, &d)| a > 0.0 && d > 0.0)
            .collect()
    }
}

pub fn metric(cf: &CoframeField) -> MetricField {
    MetricField {
        g11: &(&cf.f11 * &cf.f11) + &(&cf.f21 * &cf.f21),
        g12: &(&cf.f11 * &cf.f12) + &(&cf.f21 * &cf.f22),
        g22: &(&cf.f12 * &cf.f12) + &(&cf.f22 * &cf.f22),
    }
}

/// Residuals of the three structure equations,
///
/// `R1 = dx f12 - dt f11 - (f31 f22 - f32 f21)`
/// `R2 = dx f22 - dt f21 - (f11 f32 - f12 f31)`
/// `R3 = dx f32 - dt f31 - (f11 f22 - f12 f21)`
///
/// with the coefficient time derivatives taken through the chain rule from
/// the supplied `u_t` slot (never by differencing snapshots). All three are
/// proportional to the local-form residual: `R1 = -E`, `R2 = mu R1`,
/// `R3 = s sqrt(1+mu^2) R1`, so they vanish on solutions.
pub fn structure_residuals_with(
    cf: &CoframeField,
    td: &TimeDerivatives,
) -> Result<(Field, Field, Field)> {
    let mu = cf.params.mu;
    let c = cf.params.root();
    let m_t = &td.m_t;

    let r1 = &(&spectral::deriv(&cf.f12, 1)? - m_t)
        - &(&(&cf.f31 * &cf.f22) - &(&cf.f32 * &cf.f21));
    let r2 = &(&spectral::deriv(&cf.f22, 1)? - &m_t.scale(mu))
        - &(&(&cf.f11 * &cf.f32) - &(&cf.f12 * &cf.f31));
    let r3 = &(&spectral::deriv(&cf.f32, 1)? - &m_t.scale(c))
        - &(&(&cf.f11 * &cf.f22) - &(&cf.f12 * &cf.f21));
    Ok((r1, r2, r3))
}

/// Structure residuals on the evolution slot `u_t = dp_rhs(u)`.
pub fn structure_residuals(state: &SolverState, cf: &CoframeField) -> Result<(Field, Field, Field)> {
    structure_residuals_with(cf, &state.time_derivatives()?)
}

/// Gaussian curvature on the region where the coframe is non-degenerate.
#[derive(Debug, Clone)]
pub struct Curvature {
    /// `K` where unmasked, NaN elsewhere.
    pub k: Field,
    pub mask: Vec<bool>,
    pub max_abs_k_plus_one: f64,
}

/// `K = -(dx f32 - dt f31) / (f11 f22 - f12 f21)`, evaluated where the wedge
/// density exceeds `mask_tol` times its sup-norm. The contract on solutions
/// is `K = -1` there.
pub fn gauss_curvature(state: &SolverState, cf: &CoframeField, mask_tol: f64) -> Result<Curvature> {
    let td = state.time_derivatives()?;
    gauss_curvature_with(cf, &td, mask_tol)
}

pub fn gauss_curvature_with(
    cf: &CoframeField,
    td: &TimeDerivatives,
    mask_tol: f64,
) -> Result<Curvature> {
    let c = cf.params.root();
    let numer = &spectral::deriv(&cf.f32, 1)? - &td.m_t.scale(c);
    let denom = wedge_density(cf);
    let floor = mask_tol * denom.sup_norm();
    let mut any = false;
    let mut max_dev: f64 = 0.0;
    let k = denom.zip_with(&numer, |d, n| {
        if d.abs() > floor {
            any = true;
            let k = -n / d;
            max_dev = max_dev.max((k + 1.0).abs());
            k
        } else {
            f64::NAN
        }
    });
    if !any {
        return Err(DpError::DegenerateEverywhere);
    }
    let grid = cf.f11.grid().clone();
    let mask = k.values().iter().map(|v| v.is_finite()).collect();
    Ok(Curvature { k: Field::from_raw(grid, k.values().to_vec()), mask, max_abs_k_plus_one: max_dev })
}

/// Maximal grid intervals on which `|F| > rel_tol * max |F|`: the connected
/// components of the complement of the degeneracy set at this time slice.
pub fn pss_region(cf: &CoframeField, rel_tol: f64) -> Vec<(f64, f64)> {
    let f = &cf.f12;
    let floor = rel_tol * f.sup_norm();
    let grid = f.grid();
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    for (i, &v) in f.values().iter().enumerate() {
        if v.abs() > floor {
            start.get_or_insert(i);
        } else if let Some(s) = start.take() {
            out.push((grid.node(s), grid.node(i - 1)));
        }
    }
    if let Some(s) = start {
        out.push((grid.node(s), grid.node(grid.n() - 1)));
    }
    out
}
