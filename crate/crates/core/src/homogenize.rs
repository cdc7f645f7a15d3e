//! Rapidly alternating sink/source media.
//!
//! A unit cell of `R0` values on `[0, 1)^2` is repeated at period `epsilon`
//! over the square, `R0_eps(x) = R0(x / epsilon)`. As `epsilon -> 0` the
//! principal eigenvalue tends to `mu_V (M - 1)` and the infected steady
//! state to the constant `V0 = mu_T (M - 1) / gamma`, where `M` is the
//! arithmetic cell mean.

use std::io::{BufRead, Write};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{GridSpec, ScalarField};
use crate::model::{ModelParams, Rates};
use crate::steady::{monotone_iterate, Branch, SteadyOptions};

/// Piecewise-constant `R0` on the unit square: `m x m` equal sub-squares,
/// row-major with row index along `x2`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitCell {
    m: usize,
    values: Vec<f64>,
}

impl UnitCell {
    pub fn new(m: usize, values: Vec<f64>) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidInput("cell resolution must be at least 1".into()));
        }
        if values.len() != m * m {
            return Err(Error::InvalidInput(format!(
                "cell of resolution {m} needs {} values, got {}",
                m * m,
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidInput(format!(
                "cell values must be finite and non-negative, got {v}"
            )));
        }
        Ok(Self { m, values })
    }

    pub fn constant(c: f64) -> Result<Self> {
        Self::new(1, vec![c])
    }

    /// The 4x4 sink/source pattern used as the reference example: eight
    /// sources, eight sinks, `sup R0 = 2.8`.
    pub fn reference() -> Self {
        Self {
            m: 4,
            values: vec![
                1.60, 1.41, 1.55, 0.819, //
                0.800, 0.165, 2.59, 0.872, //
                1.20, 0.489, 1.37, 0.453, //
                2.09, 4.25e-4, 0.270, 2.80,
            ],
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.m + col]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Arithmetic mean over the equal-area sub-squares.
pub fn cell_mean(cell: &UnitCell) -> f64 {
    cell.values.iter().sum::<f64>() / cell.values.len() as f64
}

/// Number of cell copies per side, `ell / epsilon`, if it is a positive
/// integer.
pub fn copies_per_side(ell: f64, epsilon: f64) -> Result<usize> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::InvalidInput(format!("epsilon must be positive, got {epsilon}")));
    }
    let k = (ell / epsilon).round();
    if k < 1.0 || (k * epsilon - ell).abs() > 1e-9 * ell {
        return Err(Error::InvalidInput(format!(
            "ell / epsilon = {} is not a positive integer",
            ell / epsilon
        )));
    }
    Ok(k as usize)
}

/// `R0_eps` sampled at the cell centres of `spec`.
///
/// Every sub-square must contain a whole number of grid cells, i.e. `n`
/// must be a multiple of `k m` with `k = ell / epsilon`.
pub fn tile(cell: &UnitCell, epsilon: f64, spec: GridSpec) -> Result<ScalarField> {
    let k = copies_per_side(spec.ell(), epsilon)?;
    let period = k * cell.m;
    let n = spec.n();
    if n % period != 0 {
        // smallest even multiple of k m not below n
        let step = if period % 2 == 0 { period } else { 2 * period };
        let suggested = n.div_ceil(step) * step;
        return Err(Error::InvalidInput(format!(
            "n = {n} does not resolve {k}x{k} copies of a {0}x{0} cell; use n = {suggested}",
            cell.m
        )));
    }
    let per = n / period;
    Ok(ScalarField::from_index_fn(spec, |i, j| {
        cell.get((i / per) % cell.m, (j / per) % cell.m)
    }))
}

/// Limits of the homogenized medium.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomogenizedLimit {
    /// Cell mean `M`.
    pub mean: f64,
    /// `mu_V (M - 1)`, the limit of `lambda0`.
    pub lambda_limit: f64,
    /// `mu_T (M - 1) / gamma` when `M > 1`, otherwise `0`.
    pub v0: f64,
    pub infected: bool,
}

pub fn homogenized_limit(rates: &Rates, cell: &UnitCell) -> HomogenizedLimit {
    let mean = cell_mean(cell);
    let infected = mean > 1.0;
    HomogenizedLimit {
        mean,
        lambda_limit: rates.mu_v * (mean - 1.0),
        v0: if infected {
            rates.mu_t * (mean - 1.0) / rates.gamma
        } else {
            0.0
        },
        infected,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonRecord {
    pub epsilon: f64,
    /// Grid points per side used for this scale.
    pub n: usize,
    pub lambda0: f64,
    /// `sup |V_eps - V0|`.
    pub sup_dist: f64,
    pub iterations: usize,
    pub branch: Branch,
    pub virus: ScalarField,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HomogStudy {
    pub limit: HomogenizedLimit,
    /// In the order of the requested epsilons.
    pub records: Vec<EpsilonRecord>,
    /// Indices `i` (into records sorted by decreasing epsilon) at which
    /// `sup_dist` grew by more than 10% when epsilon was reduced.
    pub non_monotone: Vec<usize>,
}

/// Solves the tiled problem at every `epsilon`, in parallel.
///
/// The grid is `n = (ell / epsilon) m r` with `r = resolution` points per
/// sub-square side, so discretisation error does not change with epsilon.
pub fn convergence_study(
    rates: &Rates,
    cell: &UnitCell,
    ell: f64,
    epsilons: &[f64],
    resolution: usize,
    opts: &SteadyOptions,
) -> Result<HomogStudy> {
    rates.validate()?;
    let limit = homogenized_limit(rates, cell);
    if !limit.infected {
        return Err(Error::NoInfectedEquilibrium(format!(
            "cell mean {} <= 1: the homogenized medium is uninfected",
            limit.mean
        )));
    }
    if epsilons.is_empty() {
        return Err(Error::InvalidInput("no epsilon values given".into()));
    }
    if resolution == 0 {
        return Err(Error::InvalidInput("resolution must be at least 1".into()));
    }
    let specs = epsilons
        .iter()
        .map(|&eps| {
            let k = copies_per_side(ell, eps)?;
            let n = k * cell.m * resolution;
            if n % 2 != 0 || n < 4 {
                return Err(Error::InvalidInput(format!(
                    "epsilon = {eps} gives an odd or tiny grid n = {n}; use an even resolution"
                )));
            }
            GridSpec::new(n, ell)
        })
        .collect::<Result<Vec<_>>>()?;

    let records = epsilons
        .par_iter()
        .zip(specs.par_iter())
        .map(|(&epsilon, &spec)| {
            let r0 = tile(cell, epsilon, spec)?;
            let p = ModelParams::from_r0(&r0, *rates)?;
            let s = monotone_iterate(&p, opts)?;
            let v = s.triple.virus;
            Ok(EpsilonRecord {
                epsilon,
                n: spec.n(),
                lambda0: s.lambda0,
                sup_dist: v.values().iter().map(|x| (x - limit.v0).abs()).fold(0.0, f64::max),
                iterations: s.iterations,
                branch: s.branch,
                virus: v,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut order: Vec<usize> = (0..records.len()).collect();
    order.sort_by(|&a, &b| records[b].epsilon.total_cmp(&records[a].epsilon));
    let non_monotone = order
        .windows(2)
        .enumerate()
        .filter(|(_, w)| records[w[1]].sup_dist > 1.1 * records[w[0]].sup_dist)
        .map(|(i, _)| i + 1)
        .collect();
    Ok(HomogStudy {
        limit,
        records,
        non_monotone,
    })
}

/// `# M=<mean> V0=<v0> lambda_limit=<mu_V (M - 1)>` followed by
/// `epsilon,lambda0_eps,sup_dist,iterations`.
pub fn write_study_csv<W: Write>(study: &HomogStudy, mut out: W) -> Result<()> {
    let l = &study.limit;
    writeln!(
        out,
        "# M={:.16e} V0={:.16e} lambda_limit={:.16e}",
        l.mean, l.v0, l.lambda_limit
    )?;
    writeln!(out, "epsilon,lambda0_eps,sup_dist,iterations")?;
    for r in &study.records {
        writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{}",
            r.epsilon, r.lambda0, r.sup_dist, r.iterations
        )?;
    }
    Ok(())
}

/// `m` lines of `m` comma-separated values; blank lines and lines starting
/// with `#` are skipped.
pub fn read_cell_csv<R: BufRead>(input: R) -> Result<UnitCell> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for line in input.lines() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let row = t
            .split(',')
            .map(|c| {
                c.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("cell row {}: {e} in {c:?}", rows.len() + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    let m = rows.len();
    if m == 0 {
        return Err(Error::Parse("empty cell file".into()));
    }
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != m) {
        return Err(Error::Parse(format!(
            "cell row {} has {} values, expected {m}",
            i + 1,
            r.len()
        )));
    }
    UnitCell::new(m, rows.into_iter().flatten().collect())
}

pub fn write_cell_csv<W: Write>(cell: &UnitCell, mut out: W) -> Result<()> {
    for row in cell.values.chunks(cell.m) {
        let line: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}
