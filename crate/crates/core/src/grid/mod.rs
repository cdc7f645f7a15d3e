//! Cell-centred periodic grids on `(0, ell)^2`.
//!
//! A [`ScalarField`] stores `n * n` values in row-major order: row `i` is the
//! `x2` (y) index and column `j` the `x1` (x) index, and the value sits at the
//! cell centre `((j + 1/2) h, (i + 1/2) h)` with `h = ell / n`.

mod csv;
mod spectral;

pub use self::csv::{read_field_csv, write_field_csv};
pub use self::spectral::{helmholtz_solve, laplacian, rayleigh_quotient, Spectral};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    n: usize,
    ell: f64,
}

impl GridSpec {
    pub fn new(n: usize, ell: f64) -> Result<Self> {
        if n < 4 || n % 2 != 0 {
            return Err(Error::InvalidInput(format!(
                "grid size n must be even and >= 4, got {n}"
            )));
        }
        if !(ell.is_finite() && ell > 0.0) {
            return Err(Error::InvalidInput(format!(
                "domain length ell must be positive, got {ell}"
            )));
        }
        Ok(Self { n, ell })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn ell(&self) -> f64 {
        self.ell
    }

    /// Grid spacing `ell / n`.
    #[inline]
    pub fn h(&self) -> f64 {
        self.ell / self.n as f64
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n * self.n
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.n + j
    }

    /// Cell-centre coordinates `(x1, x2)` of row `i`, column `j`.
    #[inline]
    pub fn center(&self, i: usize, j: usize) -> (f64, f64) {
        let h = self.h();
        ((j as f64 + 0.5) * h, (i as f64 + 0.5) * h)
    }

    pub fn cell_area(&self) -> f64 {
        self.h() * self.h()
    }
}

/// Discretisation of the Laplacian.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LaplacianMode {
    /// Exact Fourier multiplier `-(2π/ell)^2 (m1^2 + m2^2)`.
    #[default]
    Spectral,
    /// Periodic five-point stencil, kept for cross-validation.
    Stencil5,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    spec: GridSpec,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn from_values(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(Error::InvalidInput(format!(
                "field has {} values, grid needs {}",
                values.len(),
                spec.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("scalar field"));
        }
        Ok(Self { spec, values })
    }

    /// Internal constructor for values already known to be finite.
    pub(crate) fn from_raw(spec: GridSpec, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), spec.len());
        Self { spec, values }
    }

    pub fn constant(spec: GridSpec, c: f64) -> Self {
        Self {
            spec,
            values: vec![c; spec.len()],
        }
    }

    pub fn zeros(spec: GridSpec) -> Self {
        Self::constant(spec, 0.0)
    }

    /// Samples `f(x1, x2)` at every cell centre.
    pub fn from_fn(spec: GridSpec, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let n = spec.n();
        let mut values = Vec::with_capacity(spec.len());
        for i in 0..n {
            for j in 0..n {
                let (x1, x2) = spec.center(i, j);
                values.push(f(x1, x2));
            }
        }
        Self { spec, values }
    }

    /// Builds a field from a function of the integer cell index `(i, j)`.
    pub fn from_index_fn(spec: GridSpec, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let n = spec.n();
        let mut values = Vec::with_capacity(spec.len());
        for i in 0..n {
            for j in 0..n {
                values.push(f(i, j));
            }
        }
        Self { spec, values }
    }

    #[inline]
    pub fn spec(&self) -> GridSpec {
        self.spec
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.spec.index(i, j)]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_raw(self.spec, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.spec, other.spec, "fields live on different grids");
        Self::from_raw(
            self.spec,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Cell-area weighted L2 norm `h * sqrt(sum f^2)`.
    pub fn l2_norm(&self) -> f64 {
        self.spec.h() * self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `sup |self - other|`.
    pub fn sup_distance(&self, other: &ScalarField) -> f64 {
        assert_eq!(self.spec, other.spec, "fields live on different grids");
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Euclidean inner product weighted by the cell area.
    pub fn dot(&self, other: &ScalarField) -> f64 {
        assert_eq!(self.spec, other.spec, "fields live on different grids");
        self.spec.cell_area()
            * self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a * b)
                .sum::<f64>()
    }

    /// True if `max - min < 1e-12 (1 + sup|f|)`.
    pub fn is_constant(&self) -> bool {
        self.max() - self.min() < 1e-12 * (1.0 + self.sup_norm())
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
}
