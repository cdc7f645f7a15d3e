use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{GridSpec, LaplacianMode, ScalarField};
use crate::error::{Error, Result};

/// FFT plans and wavenumber table for one grid.
///
/// Every constant-coefficient operator used by the crate is a Fourier
/// multiplier `g(|k|^2)` with `|k|^2 = (2π/ell)^2 (m1^2 + m2^2)`, signed
/// integer frequencies `m` in `-n/2+1 ..= n/2`.
#[derive(Clone)]
pub struct Spectral {
    spec: GridSpec,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    k_sq: Vec<f64>,
}

impl fmt::Debug for Spectral {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Spectral").field("spec", &self.spec).finish()
    }
}

fn signed_frequency(idx: usize, n: usize) -> f64 {
    if idx <= n / 2 {
        idx as f64
    } else {
        idx as f64 - n as f64
    }
}

fn transpose(data: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            data.swap(i * n + j, j * n + i);
        }
    }
}

impl Spectral {
    pub fn new(spec: GridSpec) -> Self {
        let n = spec.n();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let base = (2.0 * PI / spec.ell()).powi(2);
        let mut k_sq = Vec::with_capacity(spec.len());
        for i in 0..n {
            let m2 = signed_frequency(i, n);
            for j in 0..n {
                let m1 = signed_frequency(j, n);
                k_sq.push(base * (m1 * m1 + m2 * m2));
            }
        }
        Self {
            spec,
            forward,
            inverse,
            k_sq,
        }
    }

    pub fn spec(&self) -> GridSpec {
        self.spec
    }

    /// `|k|^2` for every Fourier coefficient, in the same layout as the field.
    pub fn wavenumber_sq(&self) -> &[f64] {
        &self.k_sq
    }

    fn fft2(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.spec.n();
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        plan.process_with_scratch(data, &mut scratch);
        transpose(data, n);
        plan.process_with_scratch(data, &mut scratch);
        transpose(data, n);
    }

    /// Unnormalised forward transform.
    pub fn forward(&self, f: &[f64]) -> Vec<Complex64> {
        assert_eq!(f.len(), self.spec.len());
        let mut data: Vec<Complex64> = f.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fft2(&mut data, &self.forward);
        data
    }

    /// Inverse transform including the `1/n^2` normalisation; returns the real part.
    pub fn inverse_real(&self, mut coeffs: Vec<Complex64>) -> Vec<f64> {
        self.fft2(&mut coeffs, &self.inverse);
        let scale = 1.0 / self.spec.len() as f64;
        coeffs.into_iter().map(|c| c.re * scale).collect()
    }

    /// Applies the multiplier `symbol(|k|^2)` to `f`.
    pub fn filter(&self, f: &ScalarField, symbol: impl Fn(f64) -> f64) -> ScalarField {
        assert_eq!(f.spec(), self.spec, "field and plan live on different grids");
        let mut coeffs = self.forward(f.values());
        for (c, &k2) in coeffs.iter_mut().zip(&self.k_sq) {
            *c *= symbol(k2);
        }
        ScalarField::from_raw(self.spec, self.inverse_real(coeffs))
    }

    /// Applies a multiplier tabulated in the layout of [`Self::wavenumber_sq`].
    pub fn filter_table(&self, f: &ScalarField, table: &[f64]) -> ScalarField {
        assert_eq!(f.spec(), self.spec, "field and plan live on different grids");
        assert_eq!(table.len(), self.k_sq.len());
        let mut coeffs = self.forward(f.values());
        for (c, &m) in coeffs.iter_mut().zip(table) {
            *c *= m;
        }
        ScalarField::from_raw(self.spec, self.inverse_real(coeffs))
    }

    pub fn laplacian(&self, f: &ScalarField) -> ScalarField {
        self.filter(f, |k2| -k2)
    }

    /// Solves `(mu - d Δ) u = rhs`.
    pub fn helmholtz_solve(&self, rhs: &ScalarField, d: f64, mu: f64) -> Result<ScalarField> {
        check_helmholtz(d, mu)?;
        Ok(self.filter(rhs, |k2| 1.0 / (mu + d * k2)))
    }

    /// `(mu - d Δ) u`.
    pub fn helmholtz_apply(&self, u: &ScalarField, d: f64, mu: f64) -> ScalarField {
        self.filter(u, |k2| mu + d * k2)
    }

    /// Exact heat propagator `exp(t d Δ) f`.
    pub fn heat(&self, f: &ScalarField, d: f64, t: f64) -> ScalarField {
        self.filter(f, |k2| (-d * t * k2).exp())
    }

    /// `∫ |∇ψ|^2`, evaluated as `-∫ ψ Δψ` so that it is the exact quadratic
    /// form of the spectral Laplacian.
    pub fn dirichlet_energy(&self, psi: &ScalarField) -> f64 {
        let coeffs = self.forward(psi.values());
        let n2 = self.spec.len() as f64;
        let sum: f64 = coeffs
            .iter()
            .zip(&self.k_sq)
            .map(|(c, &k2)| k2 * c.norm_sqr())
            .sum();
        // Parseval: sum |f|^2 = (1/n^2) sum |f_hat|^2
        self.spec.cell_area() * sum / n2
    }

    pub fn rayleigh_quotient(&self, psi: &ScalarField, d: f64, mu_field: &ScalarField) -> Result<f64> {
        let norm_sq = psi.dot(psi);
        if norm_sq == 0.0 {
            return Err(Error::InvalidInput(
                "Rayleigh quotient of the zero function".into(),
            ));
        }
        let potential = psi.spec().cell_area()
            * psi
                .values()
                .iter()
                .zip(mu_field.values())
                .map(|(p, m)| m * p * p)
                .sum::<f64>();
        Ok((d * self.dirichlet_energy(psi) + potential) / norm_sq)
    }
}

fn check_helmholtz(d: f64, mu: f64) -> Result<()> {
    if !(d.is_finite() && d > 0.0) {
        return Err(Error::InvalidInput(format!("diffusivity must be positive, got {d}")));
    }
    if !(mu.is_finite() && mu > 0.0) {
        return Err(Error::InvalidInput(format!(
            "Helmholtz shift mu must be positive, got {mu}"
        )));
    }
    Ok(())
}

fn stencil5(f: &ScalarField) -> ScalarField {
    let spec = f.spec();
    let n = spec.n();
    let inv_h2 = 1.0 / (spec.h() * spec.h());
    ScalarField::from_index_fn(spec, |i, j| {
        let up = f.get((i + 1) % n, j);
        let down = f.get((i + n - 1) % n, j);
        let right = f.get(i, (j + 1) % n);
        let left = f.get(i, (j + n - 1) % n);
        (up + down + right + left - 4.0 * f.get(i, j)) * inv_h2
    })
}

pub fn laplacian(f: &ScalarField, mode: LaplacianMode) -> Result<ScalarField> {
    if !f.is_finite() {
        return Err(Error::NonFinite("laplacian input"));
    }
    Ok(match mode {
        LaplacianMode::Spectral => Spectral::new(f.spec()).laplacian(f),
        LaplacianMode::Stencil5 => stencil5(f),
    })
}

pub fn helmholtz_solve(rhs: &ScalarField, d: f64, mu: f64) -> Result<ScalarField> {
    check_helmholtz(d, mu)?;
    if !rhs.is_finite() {
        return Err(Error::NonFinite("Helmholtz right-hand side"));
    }
    Spectral::new(rhs.spec()).helmholtz_solve(rhs, d, mu)
}

/// `(d ∫|∇ψ|^2 + ∫ mu ψ^2) / ∫ ψ^2`.
pub fn rayleigh_quotient(psi: &ScalarField, d: f64, mu_field: &ScalarField) -> Result<f64> {
    Spectral::new(psi.spec()).rayleigh_quotient(psi, d, mu_field)
}
