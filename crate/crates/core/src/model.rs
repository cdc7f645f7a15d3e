//! Model constants, the local reproductive ratio and the closed-form
//! equilibria.
//!
//! ```text
//! T_t = alpha(x) - gamma V T - mu_T T
//! I_t = gamma V T - mu_I I
//! V_t = N mu_I I - mu_V V + d_V ΔV
//! ```
//!
//! Only `alpha` varies in space; the other constants are positive scalars.
//! Rates carry no units (the usual convention is day⁻¹).

use crate::error::{Error, Result};
use crate::grid::{GridSpec, ScalarField};

/// The six spatially constant model rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rates {
    /// Infection rate `gamma`.
    pub gamma: f64,
    /// Burst size `N` (virions per infected cell lifetime).
    pub burst_size: f64,
    pub mu_t: f64,
    pub mu_i: f64,
    pub mu_v: f64,
    /// Virus diffusivity `d_V`.
    pub d_v: f64,
}

impl Rates {
    /// `gamma = 0.001, N = 1000, mu_T = 0.1, mu_I = 0.5, mu_V = 10, d_V = 1`.
    pub fn reference() -> Self {
        Self {
            gamma: 0.001,
            burst_size: 1000.0,
            mu_t: 0.1,
            mu_i: 0.5,
            mu_v: 10.0,
            d_v: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let named = [
            ("gamma", self.gamma),
            ("N", self.burst_size),
            ("mu_T", self.mu_t),
            ("mu_I", self.mu_i),
            ("mu_V", self.mu_v),
            ("d_V", self.d_v),
        ];
        for (name, v) in named {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "{name} must be a positive finite number, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// `gamma N / (mu_T mu_V)`: the factor turning `alpha` into `R0`.
    pub fn r0_per_alpha(&self) -> f64 {
        self.gamma * self.burst_size / (self.mu_t * self.mu_v)
    }

    /// Production rate `alpha` giving a prescribed reproductive ratio.
    pub fn alpha_for_r0(&self, r0: f64) -> f64 {
        r0 * self.mu_t * self.mu_v / (self.gamma * self.burst_size)
    }
}

/// Rates plus the production field `alpha(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    alpha: ScalarField,
    rates: Rates,
}

impl ModelParams {
    pub fn new(alpha: ScalarField, rates: Rates) -> Result<Self> {
        rates.validate()?;
        if !alpha.is_finite() {
            return Err(Error::NonFinite("alpha"));
        }
        if alpha.min() < 0.0 {
            return Err(Error::InvalidInput(format!(
                "alpha must be non-negative (min {})",
                alpha.min()
            )));
        }
        if alpha.max() <= 0.0 {
            return Err(Error::InvalidInput("alpha is identically zero".into()));
        }
        Ok(Self { alpha, rates })
    }

    pub fn constant(spec: GridSpec, alpha: f64, rates: Rates) -> Result<Self> {
        Self::new(ScalarField::constant(spec, alpha), rates)
    }

    /// Parameters whose reproductive ratio is the given field.
    pub fn from_r0(r0: &ScalarField, rates: Rates) -> Result<Self> {
        rates.validate()?;
        Self::new(r0.scale(rates.alpha_for_r0(1.0)), rates)
    }

    pub fn alpha(&self) -> &ScalarField {
        &self.alpha
    }

    pub fn rates(&self) -> &Rates {
        &self.rates
    }

    pub fn spec(&self) -> GridSpec {
        self.alpha.spec()
    }

    pub fn is_homogeneous(&self) -> bool {
        self.alpha.is_constant()
    }

    pub fn reproductive_ratio(&self) -> ScalarField {
        reproductive_ratio(self)
    }

    /// `sup R0`, written `ℛ` in the steady-state construction.
    pub fn sup_r0(&self) -> f64 {
        self.alpha.max() * self.rates.r0_per_alpha()
    }

    /// Constant `R0` of a homogeneous environment.
    pub fn constant_r0(&self) -> Result<f64> {
        if !self.is_homogeneous() {
            return Err(Error::Heterogeneous(
                "constant-R0 formula needs spatially constant alpha",
            ));
        }
        Ok(self.alpha.mean() * self.rates.r0_per_alpha())
    }
}

/// `R0(x) = gamma N alpha(x) / (mu_T mu_V)`.
pub fn reproductive_ratio(p: &ModelParams) -> ScalarField {
    p.alpha.scale(p.rates.r0_per_alpha())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SiteKind {
    /// `R0 < 1`
    Sink,
    /// `R0 == 1`
    Neutral,
    /// `R0 > 1`
    Source,
}

pub fn classify_sites(r0: &ScalarField) -> Vec<SiteKind> {
    r0.values()
        .iter()
        .map(|&r| {
            if r < 1.0 {
                SiteKind::Sink
            } else if r > 1.0 {
                SiteKind::Source
            } else {
                SiteKind::Neutral
            }
        })
        .collect()
}

/// Fraction of grid sites that are sources.
pub fn source_fraction(r0: &ScalarField) -> f64 {
    let sources = classify_sites(r0)
        .into_iter()
        .filter(|k| *k == SiteKind::Source)
        .count();
    sources as f64 / r0.values().len() as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumTriple {
    pub target: ScalarField,
    pub infected: ScalarField,
    pub virus: ScalarField,
}

/// `(alpha / mu_T, 0, 0)`.
pub fn uninfected_equilibrium(p: &ModelParams) -> EquilibriumTriple {
    let spec = p.spec();
    EquilibriumTriple {
        target: p.alpha.scale(1.0 / p.rates.mu_t),
        infected: ScalarField::zeros(spec),
        virus: ScalarField::zeros(spec),
    }
}

/// Closed-form infected equilibrium of a homogeneous environment:
/// `T = mu_V / (gamma N)`, `I = (alpha gamma N - mu_T mu_V) / (gamma N mu_I)`,
/// `V = (alpha gamma N - mu_T mu_V) / (gamma mu_V)`.
///
/// At `R0 == 1` (to rounding) the triple coincides with the uninfected one.
pub fn infected_equilibrium_constant(p: &ModelParams) -> Result<EquilibriumTriple> {
    let r0 = p.constant_r0()?;
    if r0 < 1.0 - 1e-12 {
        return Err(Error::NoInfectedEquilibrium(format!(
            "R0 = {r0} < 1 gives negative I and V"
        )));
    }
    let r = p.rates;
    let alpha = p.alpha.mean();
    let gn = r.gamma * r.burst_size;
    let excess = (alpha * gn - r.mu_t * r.mu_v).max(0.0);
    let spec = p.spec();
    Ok(EquilibriumTriple {
        target: ScalarField::constant(spec, r.mu_v / gn),
        infected: ScalarField::constant(spec, excess / (gn * r.mu_i)),
        virus: ScalarField::constant(spec, excess / (r.gamma * r.mu_v)),
    })
}

/// Reconstructs `T = alpha / (gamma V + mu_T)` and
/// `I = gamma alpha V / (mu_I (gamma V + mu_T))` from a steady virus density.
pub fn infected_from_v(p: &ModelParams, v: &ScalarField) -> Result<EquilibriumTriple> {
    if v.spec() != p.spec() {
        return Err(Error::InvalidInput("virus field on a different grid".into()));
    }
    if v.min() < 0.0 {
        return Err(Error::InvalidInput(format!(
            "virus density must be non-negative (min {})",
            v.min()
        )));
    }
    let r = p.rates;
    let target = p.alpha.zip_map(v, |a, vv| a / (r.gamma * vv + r.mu_t));
    let infected = p
        .alpha
        .zip_map(v, |a, vv| r.gamma * a * vv / (r.mu_i * (r.gamma * vv + r.mu_t)));
    Ok(EquilibriumTriple {
        target,
        infected,
        virus: v.clone(),
    })
}
