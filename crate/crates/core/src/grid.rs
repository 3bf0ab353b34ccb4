//! Uniform periodic grid on `[-l, l)` and real scalar fields sampled on it.

use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use crate::error::{DpError, Result};

/// Truncation of the real line to a periodic box `[-l, l)` with `n` equispaced
/// nodes `x_i = -l + i*h`, `h = 2l/n`.
///
/// Wavenumbers follow the transform ordering: bin `j` carries
/// `k_j = pi * s / l` with `s = j` for `j < n/2` and `s = j - n` otherwise,
/// so `s` ranges over `{-n/2, ..., n/2 - 1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    n: usize,
    l: f64,
    h: f64,
}

impl Grid {
    pub fn new(n: usize, l: f64) -> Result<Arc<Grid>> {
        if n == 0 || n % 2 != 0 {
            return Err(DpError::InvalidParameter(format!(
                "grid size must be even and positive, got {n}"
            )));
        }
        if !(l > 0.0) || !l.is_finite() {
            return Err(DpError::InvalidParameter(format!(
                "grid half-length must be positive, got {l}"
            )));
        }
        Ok(Arc::new(Grid { n, l, h: 2.0 * l / n as f64 }))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn half_length(&self) -> f64 {
        self.l
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn node(&self, i: usize) -> f64 {
        -self.l + i as f64 * self.h
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.node(i)).collect()
    }

    /// Signed mode index of bin `j` in transform ordering.
    pub fn signed_index(&self, j: usize) -> i64 {
        if j < self.n / 2 { j as i64 } else { j as i64 - self.n as i64 }
    }

    /// Wavenumber of bin `j`.
    pub fn wavenumber(&self, j: usize) -> f64 {
        std::f64::consts::PI * self.signed_index(j) as f64 / self.l
    }

    /// Reduce `x` into `[-l, l)`.
    pub fn wrap(&self, x: f64) -> f64 {
        let period = 2.0 * self.l;
        let mut y = (x + self.l).rem_euclid(period) - self.l;
        if y >= self.l {
            y -= period;
        }
        y
    }

    /// Index of the first node with coordinate >= `x` (clamped to the grid).
    pub fn node_at_or_after(&self, x: f64) -> usize {
        let i = ((x + self.l) / self.h).ceil();
        (i.max(0.0) as usize).min(self.n - 1)
    }

    /// Index of the last node with coordinate <= `x` (clamped to the grid).
    pub fn node_at_or_before(&self, x: f64) -> usize {
        let i = ((x + self.l) / self.h).floor();
        (i.max(0.0) as usize).min(self.n - 1)
    }
}

/// Real scalar field: one sample per grid node. Immutable value type.
#[derive(Debug, Clone)]
pub struct Field {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Field> {
        if values.len() != grid.n() {
            return Err(DpError::InvalidParameter(format!(
                "field length {} does not match grid size {}",
                values.len(),
                grid.n()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(DpError::InvalidParameter(format!("non-finite field value {v}")));
        }
        Ok(Field { grid, values })
    }

    /// Construct without the finiteness scan; used by the stepper, which
    /// performs its own blow-up check.
    pub(crate) fn from_raw(grid: Arc<Grid>, values: Vec<f64>) -> Field {
        debug_assert_eq!(values.len(), grid.n());
        Field { grid, values }
    }

    pub fn zeros(grid: Arc<Grid>) -> Field {
        let n = grid.n();
        Field { grid, values: vec![0.0; n] }
    }

    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(f64) -> f64) -> Field {
        let values = (0..grid.n()).map(|i| f(grid.node(i))).collect();
        Field { grid, values }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Minimum value together with the node where it is attained.
    pub fn min_with_location(&self) -> (f64, f64) {
        let mut min = f64::INFINITY;
        let mut at = 0;
        for (i, &v) in self.values.iter().enumerate() {
            if v < min {
                min = v;
                at = i;
            }
        }
        (min, self.grid.node(at))
    }

    /// Uniform-weight quadrature `h * sum(values)`; spectrally accurate for
    /// smooth periodic integrands.
    pub fn integral(&self) -> f64 {
        self.grid.spacing() * self.values.iter().sum::<f64>()
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Field {
        Field {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_with(&self, other: &Field, mut f: impl FnMut(f64, f64) -> f64) -> Field {
        debug_assert_eq!(self.grid, other.grid);
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Field { grid: self.grid.clone(), values }
    }

    pub fn scale(&self, c: f64) -> Field {
        self.map(|v| c * v)
    }

    /// Pointwise affine combination `c * self + d`.
    pub fn affine(&self, c: f64, d: f64) -> Field {
        self.map(|v| c * v + d)
    }

    /// Rotate samples by whole cells (periodic shift by `cells * h`).
    pub fn shift_cells(&self, cells: i64) -> Field {
        let n = self.grid.n() as i64;
        let values = (0..n)
            .map(|i| self.values[(i - cells).rem_euclid(n) as usize])
            .collect();
        Field { grid: self.grid.clone(), values }
    }
}

impl Add for &Field {
    type Output = Field;
    fn add(self, rhs: &Field) -> Field {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for &Field {
    type Output = Field;
    fn sub(self, rhs: &Field) -> Field {
        self.zip_with(rhs, |a, b| a - b)
    }
}

/// Pointwise product without dealiasing; see `spectral::dealiased_mul` for
/// the filtered version used inside quadratic nonlinearities.
impl Mul for &Field {
    type Output = Field;
    fn mul(self, rhs: &Field) -> Field {
        self.zip_with(rhs, |a, b| a * b)
    }
}

impl Neg for &Field {
    type Output = Field;
    fn neg(self) -> Field {
        self.map(|v| -v)
    }
}
