//! Non-negative steady states.
//!
//! Eliminating `T` and `I` from the stationary system leaves the scalar
//! semilinear problem
//!
//! ```text
//! d_V ΔV - mu_V V + mu_T mu_V R0(x) V / (gamma V + mu_T) = 0
//! ```
//!
//! When `lambda0 <= 0` its only non-negative solution is `V = 0`. When
//! `lambda0 > 0` the positive solution is reached by the decreasing sequence
//! `(mu_V - d_V Δ) v_n = mu_T mu_V R0 h(v_{n-1})`, `h(t) = t / (gamma t + mu_T)`,
//! started at the constant upper solution and bounded below by a multiple
//! of the principal eigenfunction.

use crate::eigen::{lambda0, EigenOptions, EigenResult};
use crate::error::{Error, Result};
use crate::grid::{ScalarField, Spectral};
use crate::model::{infected_from_v, uninfected_equilibrium, EquilibriumTriple, ModelParams};

/// `|lambda0|` below this is treated as the bifurcation point.
pub const CRITICAL_LAMBDA: f64 = 1e-8;

/// Negative values of magnitude below this are roundoff and reset to zero.
pub const OVERSHOOT_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyOptions {
    /// Stop once `sup |v_n - v_{n-1}| < tol`.
    pub tol: f64,
    pub max_iter: usize,
    pub eigen: EigenOptions,
}

impl Default for SteadyOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 20_000,
            eigen: EigenOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Uninfected,
    Infected,
}

impl Branch {
    pub fn as_str(&self) -> &'static str {
        match self {
            Branch::Uninfected => "uninfected",
            Branch::Infected => "infected",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyResult {
    pub branch: Branch,
    pub triple: EquilibriumTriple,
    pub lambda0: f64,
    pub iterations: usize,
    /// Sup-norm defect of the steady virus equation.
    pub residual: f64,
    /// `max_n sup (v_n - v_{n-1})^+`; zero for an exactly monotone sequence.
    pub monotone_violation: f64,
    /// `|lambda0| < CRITICAL_LAMBDA`: reported as uninfected.
    pub critical: bool,
}

/// Reaction term `mu_T mu_V R0 V / (gamma V + mu_T)`.
fn source(p: &ModelParams, r0: &ScalarField, v: &ScalarField) -> ScalarField {
    let r = p.rates();
    let (gamma, mu_t, mu_v) = (r.gamma, r.mu_t, r.mu_v);
    r0.zip_map(v, |r0, v| mu_t * mu_v * r0 * v / (gamma * v + mu_t))
}

/// Constant upper solution `mu_T (sup R0 - 1) / gamma`.
pub fn upper_solution(p: &ModelParams) -> Result<ScalarField> {
    let sup = p.sup_r0();
    if sup <= 1.0 {
        return Err(Error::NoInfectedEquilibrium(format!(
            "sup R0 = {sup} <= 1, no positive upper solution"
        )));
    }
    let r = p.rates();
    Ok(ScalarField::constant(p.spec(), r.mu_t * (sup - 1.0) / r.gamma))
}

/// Lower solution `c phi0`.
///
/// Substituting `c phi0` in the steady equation leaves
/// `c phi0 (lambda0 - mu_V R0 gamma c phi0 / (gamma c phi0 + mu_T))`, which is
/// non-negative wherever `gamma c phi0 (mu_V R0 - lambda0) <= lambda0 mu_T`.
/// `c` is the largest constant satisfying this at every grid point, capped by
/// the upper solution so that `c phi0 <= upper`.
pub fn lower_solution(p: &ModelParams, eig: &EigenResult) -> Result<ScalarField> {
    let l0 = eig.lambda_max;
    if l0 <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "lower solution needs lambda0 > 0, got {l0}"
        )));
    }
    let r = p.rates();
    let upper = r.mu_t * (p.sup_r0() - 1.0) / r.gamma;
    let r0 = p.reproductive_ratio();
    let pointwise = eig
        .phi
        .values()
        .iter()
        .zip(r0.values())
        .filter_map(|(&phi, &r0)| {
            let excess = r.mu_v * r0 - l0;
            (excess > 0.0).then(|| l0 * r.mu_t / (r.gamma * phi * excess))
        })
        .fold(f64::INFINITY, f64::min);
    let c = pointwise.min(upper);
    Ok(eig.phi.scale(c))
}

pub fn steady_residual(p: &ModelParams, v: &ScalarField) -> f64 {
    steady_residual_with(&Spectral::new(p.spec()), p, v)
}

fn steady_residual_with(sp: &Spectral, p: &ModelParams, v: &ScalarField) -> f64 {
    let r = p.rates();
    let lap = sp.laplacian(v);
    let f = source(p, &p.reproductive_ratio(), v);
    let mut worst: f64 = 0.0;
    for ((l, vv), fv) in lap.values().iter().zip(v.values()).zip(f.values()) {
        worst = worst.max((r.d_v * l - r.mu_v * vv + fv).abs());
    }
    worst
}

fn clamp_overshoot(v: &mut ScalarField) {
    for x in v.values_mut() {
        if *x < 0.0 && *x > -OVERSHOOT_CLAMP {
            *x = 0.0;
        }
    }
}

/// Steady state with the branch decided by `lambda0`.
pub fn monotone_iterate(p: &ModelParams, opts: &SteadyOptions) -> Result<SteadyResult> {
    let eig = lambda0(p, &opts.eigen)?;
    monotone_iterate_with(p, &eig, opts)
}

/// As [`monotone_iterate`] with a precomputed principal eigenpair.
pub fn monotone_iterate_with(p: &ModelParams, eig: &EigenResult, opts: &SteadyOptions) -> Result<SteadyResult> {
    let l0 = eig.lambda_max;
    if l0 < CRITICAL_LAMBDA {
        return Ok(SteadyResult {
            branch: Branch::Uninfected,
            triple: uninfected_equilibrium(p),
            lambda0: l0,
            iterations: 0,
            residual: 0.0,
            monotone_violation: 0.0,
            critical: l0.abs() < CRITICAL_LAMBDA,
        });
    }
    let sp = Spectral::new(p.spec());
    let r = *p.rates();
    let r0 = p.reproductive_ratio();
    let upper = upper_solution(p)?;
    let upper_value = upper.max();
    let lower = lower_solution(p, eig)?;
    let slack = 10.0 * opts.tol;

    let mut v = upper;
    let mut violation: f64 = 0.0;
    let mut increment = f64::INFINITY;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        let mut next = sp.helmholtz_solve(&source(p, &r0, &v), r.d_v, r.mu_v)?;
        clamp_overshoot(&mut next);
        if !next.is_finite() {
            return Err(Error::NonFinite("monotone iterate"));
        }

        let mut rise: f64 = 0.0;
        let mut below: f64 = 0.0;
        increment = 0.0;
        for ((n, o), lo) in next.values().iter().zip(v.values()).zip(lower.values()) {
            rise = rise.max(n - o);
            increment = increment.max((n - o).abs());
            below = below.max(lo - n);
        }
        let above = next.max() - upper_value;
        violation = violation.max(rise);
        if below > slack || above > slack {
            return Err(Error::SandwichViolation {
                iteration: iterations,
                excess: below.max(above),
            });
        }
        v = next;
        if increment < opts.tol {
            break;
        }
    }
    if increment >= opts.tol {
        return Err(Error::NotConverged {
            what: "monotone steady-state iteration",
            iterations,
            residual: increment,
        });
    }
    let residual = steady_residual_with(&sp, p, &v);
    Ok(SteadyResult {
        branch: Branch::Infected,
        triple: infected_from_v(p, &v)?,
        lambda0: l0,
        iterations,
        residual,
        monotone_violation: violation,
        critical: false,
    })
}

/// Plain fixed-point iteration of the steady map from an arbitrary
/// non-negative start, with no monotonicity or sandwich checks. Used to
/// probe uniqueness of the positive solution.
pub fn picard_iterate(p: &ModelParams, start: &ScalarField, opts: &SteadyOptions) -> Result<(ScalarField, usize)> {
    let sp = Spectral::new(p.spec());
    let r = *p.rates();
    let r0 = p.reproductive_ratio();
    let mut v = start.clone();
    let mut increment = f64::INFINITY;
    for it in 1..=opts.max_iter {
        let mut next = sp.helmholtz_solve(&source(p, &r0, &v), r.d_v, r.mu_v)?;
        clamp_overshoot(&mut next);
        increment = next.sup_distance(&v);
        v = next;
        if increment < opts.tol {
            return Ok((v, it));
        }
    }
    Err(Error::NotConverged {
        what: "steady fixed-point iteration",
        iterations: opts.max_iter,
        residual: increment,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::model::{infected_equilibrium_constant, Rates};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn constant(n: usize, r0: f64) -> ModelParams {
        let r = Rates::reference();
        ModelParams::constant(GridSpec::new(n, 1.0).unwrap(), r.alpha_for_r0(r0), r).unwrap()
    }

    fn blocky_r0(spec: GridSpec, blocks: usize, lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> ScalarField {
        let vals: Vec<f64> = (0..blocks * blocks).map(|_| rng.gen_range(lo..hi)).collect();
        let per = spec.n() / blocks;
        ScalarField::from_index_fn(spec, |i, j| vals[(i / per) * blocks + j / per])
    }

    #[test]
    fn upper_solution_examples() {
        let u = upper_solution(&constant(8, 1.5)).unwrap();
        assert!((u.mean() - 50.0).abs() < 1e-10);
        let u = upper_solution(&constant(8, 1.0 + 1e-9)).unwrap();
        assert!(u.min() > 0.0 && (u.mean() - 1e-7).abs() < 1e-12);
        assert!(upper_solution(&constant(8, 1.0)).is_err());

        let spec = GridSpec::new(8, 1.0).unwrap();
        let r0 = ScalarField::from_index_fn(spec, |i, j| if i == 2 && j == 5 { 2.8 } else { 0.5 });
        let p = ModelParams::from_r0(&r0, Rates::reference()).unwrap();
        assert!((upper_solution(&p).unwrap().mean() - 180.0).abs() < 1e-9);
    }

    #[test]
    fn lower_solution_constant_case_is_exact() {
        let p = constant(8, 1.5);
        let eig = lambda0(&p, &EigenOptions::default()).unwrap();
        let lower = lower_solution(&p, &eig).unwrap();
        assert!((lower.mean() - 50.0).abs() < 1e-8);
        assert!(lower.max() - lower.min() < 1e-9);
    }

    #[test]
    fn lower_solution_small_lambda() {
        // lambda0 = 1e-3 with sup R0 = 2 requires a non-constant field; use
        // the formula on a synthetic eigenpair instead.
        let spec = GridSpec::new(8, 1.0).unwrap();
        let r = Rates::reference();
        let r0 = ScalarField::from_index_fn(spec, |i, _| if i < 4 { 2.0 } else { 0.2 });
        let p = ModelParams::from_r0(&r0, r).unwrap();
        let eig = EigenResult {
            lambda_max: 1e-3,
            phi: ScalarField::constant(spec, 1.0),
            iterations: 0,
            residual: 0.0,
            gap_estimate: None,
            near_degenerate: false,
        };
        let c = lower_solution(&p, &eig).unwrap().mean();
        let expected = 1e-3 * r.mu_t / (r.gamma * (r.mu_v * 2.0 - 1e-3));
        assert!((c - expected).abs() < 1e-12 * expected);
        assert!(c > 0.0);

        let bad = EigenResult { lambda_max: -0.5, ..eig };
        assert!(lower_solution(&p, &bad).is_err());
    }

    #[test]
    fn lower_below_upper_for_random_scenarios() {
        let spec = GridSpec::new(16, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut checked = 0;
        while checked < 50 {
            let r0 = blocky_r0(spec, 4, 0.1, 3.0, &mut rng);
            let p = ModelParams::from_r0(&r0, Rates::reference()).unwrap();
            let eig = lambda0(&p, &EigenOptions::default()).unwrap();
            if eig.lambda_max <= 0.0 {
                continue;
            }
            let lower = lower_solution(&p, &eig).unwrap();
            let upper = upper_solution(&p).unwrap();
            assert!(lower.values().iter().zip(upper.values()).all(|(l, u)| l <= u));
            assert!(lower.min() > 0.0);
            checked += 1;
        }
    }

    #[test]
    fn constant_infected_case() {
        let p = constant(16, 1.5);
        let s = monotone_iterate(&p, &SteadyOptions::default()).unwrap();
        assert_eq!(s.branch, Branch::Infected);
        let exact = infected_equilibrium_constant(&p).unwrap();
        assert!(s.triple.virus.sup_distance(&exact.virus) < 1e-6 * 50.0);
        assert!(s.triple.target.sup_distance(&exact.target) < 1e-6 * 10.0);
        assert!(s.residual < 1e-8);
        assert!(s.monotone_violation <= 1e-12);
    }

    #[test]
    fn sub_threshold_gives_uninfected() {
        let s = monotone_iterate(&constant(8, 0.8), &SteadyOptions::default()).unwrap();
        assert_eq!(s.branch, Branch::Uninfected);
        assert_eq!(s.triple.virus.sup_norm(), 0.0);
        assert!(!s.critical);

        let s = monotone_iterate(&constant(8, 1.0), &SteadyOptions::default()).unwrap();
        assert_eq!(s.branch, Branch::Uninfected);
        assert!(s.critical);
    }

    #[test]
    fn residual_examples() {
        let p = constant(8, 1.5);
        let spec = p.spec();
        assert_eq!(steady_residual(&p, &ScalarField::zeros(spec)), 0.0);
        assert!(steady_residual(&p, &ScalarField::constant(spec, 50.0)) < 1e-10);
        // d/dV of (-mu_V V + F(V)) at V = 50 is -mu_V + mu_T^2 mu_V R0 / (gamma V + mu_T)^2
        let r = Rates::reference();
        let slope = -r.mu_v + r.mu_t * r.mu_t * r.mu_v * 1.5 / (r.gamma * 50.0 + r.mu_t).powi(2);
        let res = steady_residual(&p, &ScalarField::constant(spec, 50.01));
        assert!((res - slope.abs() * 0.01).abs() < 1e-2 * slope.abs() * 0.01, "{res}");
    }

    #[test]
    fn heterogeneous_iteration_is_monotone_and_unique() {
        let spec = GridSpec::new(16, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let opts = SteadyOptions::default();
        let mut checked = 0;
        while checked < 20 {
            let r0 = blocky_r0(spec, 4, 0.1, 3.0, &mut rng);
            let p = ModelParams::from_r0(&r0, Rates::reference()).unwrap();
            let eig = lambda0(&p, &opts.eigen).unwrap();
            if eig.lambda_max <= 0.01 {
                continue;
            }
            let s = monotone_iterate_with(&p, &eig, &opts).unwrap();
            assert_eq!(s.branch, Branch::Infected);
            assert!(s.monotone_violation <= 1e-12, "violation {}", s.monotone_violation);
            assert!(s.triple.virus.min() > 0.0);
            assert!(s.residual < 1e-8);

            let high = upper_solution(&p).unwrap().scale(2.0);
            let tight = SteadyOptions { tol: opts.tol * 0.1, ..opts };
            let (v_high, _) = picard_iterate(&p, &high, &tight).unwrap();
            let low = lower_solution(&p, &eig).unwrap().scale(1.01);
            let (v_low, _) = picard_iterate(&p, &low, &tight).unwrap();
            let bound = 10.0 * opts.tol;
            assert!(v_high.sup_distance(&s.triple.virus) < bound);
            assert!(v_low.sup_distance(&s.triple.virus) < bound);
            checked += 1;
        }
    }
}
