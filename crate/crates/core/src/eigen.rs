//! Principal eigenpair of `A = d Δ - mu(x)` with periodic boundary
//! conditions.
//!
//! The largest eigenvalue is computed by inverse iteration on the shifted
//! operator `B = (mu + sigma) - d Δ`, `sigma = 1 - inf mu`, which is
//! symmetric positive definite with smallest eigenvalue `sigma - lambda_max`.
//! Each application of `B⁻¹` is a conjugate-gradient solve preconditioned by
//! the constant-coefficient Helmholtz inverse `(mean(mu) + sigma - d Δ)⁻¹`.
//! The eigenvalue estimate is the Rayleigh quotient of the current iterate.

use crate::error::{Error, Result};
use crate::grid::{ScalarField, Spectral};
use crate::model::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenOptions {
    /// Bound on both the eigenvalue increment and the sup-norm residual.
    pub tol: f64,
    pub max_iter: usize,
    pub max_inner_iter: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 500,
            max_inner_iter: 2000,
        }
    }
}

impl EigenOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenResult {
    pub lambda_max: f64,
    /// Positive eigenfunction with `sup phi = 1`.
    pub phi: ScalarField,
    pub iterations: usize,
    /// `sup |A phi - lambda_max phi|`.
    pub residual: f64,
    /// Estimated distance to the next eigenvalue, from the observed
    /// contraction rate of the iteration. `None` when the iteration converged
    /// too quickly to estimate it.
    pub gap_estimate: Option<f64>,
    /// Set when the estimated spectral gap is below `tol`.
    pub near_degenerate: bool,
}

struct ShiftedOperator<'a> {
    spectral: &'a Spectral,
    d: f64,
    /// `mu + sigma`, pointwise.
    potential: Vec<f64>,
    precond_shift: f64,
}

impl ShiftedOperator<'_> {
    fn apply(&self, x: &ScalarField) -> ScalarField {
        let lap = self.spectral.laplacian(x);
        let vals = x
            .values()
            .iter()
            .zip(lap.values())
            .zip(&self.potential)
            .map(|((xv, lv), p)| p * xv - self.d * lv)
            .collect();
        ScalarField::from_raw(x.spec(), vals)
    }

    fn precondition(&self, r: &ScalarField) -> ScalarField {
        let (d, s) = (self.d, self.precond_shift);
        self.spectral.filter(r, |k2| 1.0 / (s + d * k2))
    }

    /// Preconditioned CG for `B y = b` from the initial guess `y`, stopped on
    /// the sup-norm residual `|b - B y|_inf <= rtol |b|_inf`.
    fn solve(&self, b: &ScalarField, mut y: ScalarField, rtol: f64, max_iter: usize) -> Result<ScalarField> {
        let b_norm = b.sup_norm();
        if b_norm == 0.0 {
            return Ok(ScalarField::zeros(b.spec()));
        }
        let by = self.apply(&y);
        let mut r = b.zip_map(&by, |bv, v| bv - v);
        let mut z = self.precondition(&r);
        let mut p = z.clone();
        let mut rz = r.dot(&z);
        for _ in 0..max_iter {
            if r.sup_norm() <= rtol * b_norm {
                return Ok(y);
            }
            let bp = self.apply(&p);
            let step = rz / p.dot(&bp);
            axpy(&mut y, step, &p);
            axpy(&mut r, -step, &bp);
            z = self.precondition(&r);
            let rz_next = r.dot(&z);
            let beta = rz_next / rz;
            rz = rz_next;
            p = z.zip_map(&p, |zv, pv| zv + beta * pv);
        }
        let res = r.sup_norm() / b_norm;
        if res <= rtol {
            Ok(y)
        } else {
            Err(Error::NotConverged {
                what: "inner conjugate-gradient solve",
                iterations: max_iter,
                residual: res,
            })
        }
    }
}

fn axpy(y: &mut ScalarField, a: f64, x: &ScalarField) {
    for (yv, xv) in y.values_mut().iter_mut().zip(x.values()) {
        *yv += a * xv;
    }
}

/// `A x = d Δx - mu x`.
fn apply_operator(spectral: &Spectral, d: f64, mu: &ScalarField, x: &ScalarField) -> ScalarField {
    let lap = spectral.laplacian(x);
    let vals = lap
        .values()
        .iter()
        .zip(x.values())
        .zip(mu.values())
        .map(|((l, v), m)| d * l - m * v)
        .collect();
    ScalarField::from_raw(x.spec(), vals)
}

/// Scales so that the entry of largest magnitude is `+1`.
fn sup_normalize(x: &ScalarField) -> ScalarField {
    let pivot = x
        .values()
        .iter()
        .copied()
        .fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
    x.scale(1.0 / pivot)
}

pub fn principal_eigen(d: f64, mu_field: &ScalarField, opts: &EigenOptions) -> Result<EigenResult> {
    principal_eigen_with(&Spectral::new(mu_field.spec()), d, mu_field, opts)
}

/// As [`principal_eigen`] with a caller-supplied FFT plan.
pub fn principal_eigen_with(
    spectral: &Spectral,
    d: f64,
    mu_field: &ScalarField,
    opts: &EigenOptions,
) -> Result<EigenResult> {
    if !(d.is_finite() && d > 0.0) {
        return Err(Error::InvalidInput(format!("diffusivity must be positive, got {d}")));
    }
    if !mu_field.is_finite() {
        return Err(Error::NonFinite("eigenvalue potential"));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidInput("eigen tolerance must be positive".into()));
    }
    let sigma = 1.0 - mu_field.min();
    let op = ShiftedOperator {
        spectral,
        d,
        potential: mu_field.values().iter().map(|m| m + sigma).collect(),
        precond_shift: mu_field.mean() + sigma,
    };

    let rayleigh = |x: &ScalarField| -> (f64, f64) {
        let ax = apply_operator(spectral, d, mu_field, x);
        let rho = x.dot(&ax) / x.dot(x);
        let res = ax.zip_map(x, |a, v| a - rho * v).sup_norm();
        (rho, res)
    };

    let mut x = ScalarField::constant(mu_field.spec(), 1.0);
    let (mut rho, mut residual) = rayleigh(&x);
    let mut ratios: Vec<f64> = Vec::new();
    for iteration in 1..=opts.max_iter {
        // warm start: B⁻¹x ≈ x / (sigma - rho)
        let gap = (sigma - rho).max(1e-12);
        let guess = x.scale(1.0 / gap);
        // An inner defect e in B y = x leaves an eigen residual of about
        // gap |e|, so the inner tolerance shrinks with the gap.
        let rtol = 0.1 * opts.tol / gap.max(1.0);
        let y = op.solve(&x, guess, rtol, opts.max_inner_iter)?;
        x = sup_normalize(&y);
        let (rho_next, res_next) = rayleigh(&x);
        if residual > 0.0 && res_next > 0.0 {
            ratios.push(res_next / residual);
        }
        let increment = (rho_next - rho).abs();
        rho = rho_next;
        residual = res_next;
        if increment < opts.tol && residual < opts.tol {
            return finish(rho, x, iteration, residual, sigma, &ratios, opts);
        }
    }
    Err(Error::NotConverged {
        what: "principal eigenvalue inverse iteration",
        iterations: opts.max_iter,
        residual,
    })
}

fn finish(
    lambda: f64,
    phi: ScalarField,
    iterations: usize,
    residual: f64,
    sigma: f64,
    ratios: &[f64],
    opts: &EigenOptions,
) -> Result<EigenResult> {
    let min = phi.min();
    if min <= 0.0 {
        return Err(Error::EigenfunctionNotPositive { min });
    }
    // Residual contraction q = (sigma - l1) / (sigma - l2).
    let tail: Vec<f64> = ratios.iter().rev().take(5).copied().filter(|q| *q > 0.0 && *q < 1.0).collect();
    let gap_estimate = if ratios.len() >= 3 && !tail.is_empty() {
        let q = tail.iter().sum::<f64>() / tail.len() as f64;
        Some((sigma - lambda) * (1.0 / q - 1.0))
    } else {
        None
    };
    Ok(EigenResult {
        lambda_max: lambda,
        phi,
        iterations,
        residual,
        near_degenerate: gap_estimate.is_some_and(|g| g < opts.tol),
        gap_estimate,
    })
}

/// Potential `mu_V (1 - R0(x))`, so that `d_V Δ - mu` is the linearisation
/// of the steady virus equation at `V = 0`.
pub fn lambda0_potential(p: &ModelParams) -> ScalarField {
    let mu_v = p.rates().mu_v;
    p.reproductive_ratio().map(|r| mu_v * (1.0 - r))
}

/// Principal eigenvalue `lambda0` of `d_V Δ + mu_V (R0 - 1)`.
///
/// `lambda0 <= 0`: the uninfected state is the only non-negative
/// equilibrium. `lambda0 > 0`: a unique positive infected equilibrium exists.
pub fn lambda0(p: &ModelParams, opts: &EigenOptions) -> Result<EigenResult> {
    principal_eigen(p.rates().d_v, &lambda0_potential(p), opts)
}

/// Potential of the operator `d_V Δ + mu_V (mu_I R0 / (s + mu_I) - 1)`.
pub fn lambda_curve_potential(p: &ModelParams, s: f64) -> ScalarField {
    let r = p.rates();
    let (mu_v, mu_i) = (r.mu_v, r.mu_i);
    p.reproductive_ratio()
        .map(|r0| mu_v * (1.0 - mu_i * r0 / (s + mu_i)))
}

/// `lambda(s)`: decreasing in `s`, equal to `lambda0` at `s = 0` and tending
/// to `-mu_V` as `s -> ∞`.
pub fn lambda_curve(p: &ModelParams, s: f64, opts: &EigenOptions) -> Result<f64> {
    if !(s.is_finite() && s >= 0.0) {
        return Err(Error::InvalidInput(format!("s must be non-negative, got {s}")));
    }
    Ok(principal_eigen(p.rates().d_v, &lambda_curve_potential(p, s), opts)?.lambda_max)
}

/// Positive root `s*` of `s = lambda(s)`, a positive eigenvalue of the
/// linearisation at the uninfected state.
///
/// `s - lambda(s)` is increasing, negative at `0` and positive at `lambda0`,
/// so bisection on `[0, lambda0]` brackets the root. Stops once
/// `|s - lambda(s)| <= tol` or after 200 halvings.
pub fn instability_eigenvalue(p: &ModelParams, opts: &EigenOptions) -> Result<f64> {
    let l0 = lambda0(p, opts)?.lambda_max;
    if l0 <= 0.0 {
        return Err(Error::NoPositiveEigenvalue { lambda0: l0 });
    }
    let spectral = Spectral::new(p.spec());
    let d = p.rates().d_v;
    let g = |s: f64| -> Result<f64> {
        let mu = lambda_curve_potential(p, s);
        Ok(s - principal_eigen_with(&spectral, d, &mu, opts)?.lambda_max)
    };
    let (mut lo, mut hi) = (0.0, l0);
    let mut mid = 0.5 * (lo + hi);
    let mut last = f64::INFINITY;
    for _ in 0..200 {
        mid = 0.5 * (lo + hi);
        let gm = g(mid)?;
        last = gm;
        if gm.abs() <= opts.tol {
            return Ok(mid);
        }
        if gm < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * l0 {
            break;
        }
    }
    Err(Error::NotConverged {
        what: "instability fixed-point bisection",
        iterations: 200,
        residual: last.abs().min((mid - lo).abs().max(hi - mid)),
    })
}
