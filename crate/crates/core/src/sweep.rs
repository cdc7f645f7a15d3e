//! Bifurcation sweeps over a constant production rate.

use std::io::Write;

use rayon::prelude::*;

use crate::eigen::principal_eigen;
use crate::error::{Error, Result};
use crate::grid::{GridSpec, ScalarField};
use crate::model::{ModelParams, Rates};
use crate::steady::{monotone_iterate, Branch, SteadyOptions};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub alpha: f64,
    pub r0: f64,
    pub lambda0: f64,
    pub branch: Branch,
    /// `|lambda0|` below the bifurcation threshold.
    pub critical: bool,
    pub mean_t: f64,
    pub mean_i: f64,
    pub mean_v: f64,
    pub iterations: usize,
}

/// `count` equally spaced `alpha` values with `R0` running from 0 to `r0_max`.
pub fn alpha_grid(rates: &Rates, r0_max: f64, count: usize) -> Result<Vec<f64>> {
    if count < 2 {
        return Err(Error::InvalidInput("a sweep needs at least two points".into()));
    }
    if !(r0_max.is_finite() && r0_max > 0.0) {
        return Err(Error::InvalidInput(format!("r0_max must be positive, got {r0_max}")));
    }
    let top = rates.alpha_for_r0(r0_max);
    Ok((0..count)
        .map(|k| top * k as f64 / (count - 1) as f64)
        .collect())
}

fn sweep_point(spec: GridSpec, rates: &Rates, alpha: f64, opts: &SteadyOptions) -> Result<SweepPoint> {
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(Error::InvalidInput(format!("alpha must be non-negative, got {alpha}")));
    }
    if alpha == 0.0 {
        // no production: R0 = 0, everything vanishes
        let mu = ScalarField::constant(spec, rates.mu_v);
        let e = principal_eigen(rates.d_v, &mu, &opts.eigen)?;
        return Ok(SweepPoint {
            alpha,
            r0: 0.0,
            lambda0: e.lambda_max,
            branch: Branch::Uninfected,
            critical: false,
            mean_t: 0.0,
            mean_i: 0.0,
            mean_v: 0.0,
            iterations: 0,
        });
    }
    let p = ModelParams::constant(spec, alpha, *rates)?;
    let s = monotone_iterate(&p, opts)?;
    Ok(SweepPoint {
        alpha,
        r0: p.reproductive_ratio().mean(),
        lambda0: s.lambda0,
        branch: s.branch,
        critical: s.critical,
        mean_t: s.triple.target.mean(),
        mean_i: s.triple.infected.mean(),
        mean_v: s.triple.virus.mean(),
        iterations: s.iterations,
    })
}

/// Steady states for each constant `alpha`, solved in parallel; results
/// keep the input order.
pub fn bifurcation_sweep(
    spec: GridSpec,
    rates: &Rates,
    alphas: &[f64],
    opts: &SteadyOptions,
) -> Result<Vec<SweepPoint>> {
    rates.validate()?;
    alphas
        .par_iter()
        .map(|&a| sweep_point(spec, rates, a, opts))
        .collect()
}

/// `alpha,r0,lambda0,branch,mean_T,mean_I,mean_V`.
pub fn write_sweep_csv<W: Write>(points: &[SweepPoint], mut out: W) -> Result<()> {
    writeln!(out, "alpha,r0,lambda0,branch,mean_T,mean_I,mean_V")?;
    for p in points {
        writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{},{:.16e},{:.16e},{:.16e}",
            p.alpha,
            p.r0,
            p.lambda0,
            p.branch.as_str(),
            p.mean_t,
            p.mean_i,
            p.mean_v
        )?;
    }
    Ok(())
}
