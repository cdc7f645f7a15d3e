//! Time integration of the full `(T, I, V)` system and of the quasi-steady
//! scalar equation for `V`.
//!
//! Each step splits the right-hand side into the pointwise reaction
//!
//! ```text
//! T' = alpha - gamma V T - mu_T T
//! I' = gamma V T - mu_I I
//! V' = N mu_I I - mu_V V
//! ```
//!
//! and the virus diffusion `V' = d_V ΔV`. Reactions are advanced with Heun's
//! method (a convex combination of two forward Euler steps, so it keeps the
//! invariant box below `dt_max`), diffusion with the exact Fourier heat
//! propagator. Lie splitting is first order, Strang second order.
//!
//! The box `0 <= T + I <= M1`, `0 <= V <= M2` with `M1 = |alpha|_inf /
//! min(mu_T, mu_I)` and `M2 = M1 N mu_I / mu_V` is invariant for the exact
//! flow; every step is checked against it.

use std::io::Write;

use crate::error::{Error, Result};
use crate::grid::{GridSpec, ScalarField, Spectral};
use crate::model::{infected_from_v, uninfected_equilibrium, ModelParams, Rates};

/// Negative values down to this size are reset to zero and their mass
/// recorded; anything lower aborts the run.
pub const NEGATIVITY_ABORT: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub t: f64,
    pub target: ScalarField,
    pub infected: ScalarField,
    pub virus: ScalarField,
}

impl State {
    pub fn spec(&self) -> GridSpec {
        self.target.spec()
    }

    pub fn is_finite(&self) -> bool {
        self.target.is_finite() && self.infected.is_finite() && self.virus.is_finite()
    }

    /// `sup (T + I)`.
    pub fn sup_cells(&self) -> f64 {
        self.target
            .values()
            .iter()
            .zip(self.infected.values())
            .map(|(t, i)| t + i)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest componentwise difference to another state.
    pub fn sup_distance(&self, other: &State) -> f64 {
        self.target
            .sup_distance(&other.target)
            .max(self.infected.sup_distance(&other.infected))
            .max(self.virus.sup_distance(&other.virus))
    }

    pub fn sup_norm(&self) -> f64 {
        self.target
            .sup_norm()
            .max(self.infected.sup_norm())
            .max(self.virus.sup_norm())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    Lie,
    #[default]
    Strang,
}

impl Scheme {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scheme::Lie => "lie",
            Scheme::Strang => "strang",
        }
    }
}

/// Diffusion substep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Diffusion {
    /// `V <- exp(dt d_V Δ) V`, exact for the spectral Laplacian.
    #[default]
    Exact,
    /// `(1 - dt d_V Δ) V_new = V`. First order in time, so it caps Strang
    /// at first order as well.
    BackwardEuler,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvariantRegion {
    /// Bound on `T + I`.
    pub m1: f64,
    /// Bound on `V`, `M1 N mu_I / mu_V`.
    pub m2: f64,
    /// `M1 N mu_I |alpha|_inf / mu_V`, an alternative form of the `V` bound
    /// that is not a supersolution in general. Reported only.
    pub m2_alt: f64,
}

pub fn invariant_region(p: &ModelParams) -> InvariantRegion {
    let r = p.rates();
    let alpha_sup = p.alpha().sup_norm();
    let m1 = alpha_sup / r.mu_t.min(r.mu_i);
    let m2 = m1 * r.burst_size * r.mu_i / r.mu_v;
    InvariantRegion {
        m1,
        m2,
        m2_alt: m2 * alpha_sup,
    }
}

/// Largest admissible step, `0.1 / max(mu_T, mu_I, mu_V, gamma M2, gamma M1 N)`.
pub fn dt_max(p: &ModelParams) -> f64 {
    let r = p.rates();
    let d = invariant_region(p);
    let stiff = [r.mu_t, r.mu_i, r.mu_v, r.gamma * d.m2, r.gamma * d.m1 * r.burst_size]
        .into_iter()
        .fold(0.0, f64::max);
    0.1 / stiff
}

/// Step bound for the scalar equation, `0.1 / (mu_V (1 + sup R0))`, from
/// the Lipschitz constant of its reaction term.
pub fn scalar_dt_max(p: &ModelParams) -> f64 {
    0.1 / (p.rates().mu_v * (1.0 + p.sup_r0()))
}

/// A grid point `(i, j)`, row `i`, column `j`.
pub type Site = (usize, usize);

#[derive(Debug, Clone, PartialEq)]
pub struct EvolveConfig {
    pub dt: f64,
    pub t_end: f64,
    pub scheme: Scheme,
    pub diffusion: Diffusion,
    /// Steps between snapshots and probe samples. The initial and final
    /// states are always recorded.
    pub record_every: usize,
    pub probes: Vec<Site>,
    /// Keep full fields at every snapshot (probes and norms are always kept).
    pub keep_fields: bool,
}

impl EvolveConfig {
    pub fn new(dt: f64, t_end: f64) -> Self {
        Self {
            dt,
            t_end,
            scheme: Scheme::default(),
            diffusion: Diffusion::default(),
            record_every: 1000,
            probes: Vec::new(),
            keep_fields: false,
        }
    }

    fn validate(&self, spec: GridSpec, dt_limit: f64) -> Result<usize> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidInput(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return Err(Error::InvalidInput(format!(
                "t_end must be positive, got {}",
                self.t_end
            )));
        }
        if self.dt > dt_limit * (1.0 + 1e-12) {
            return Err(Error::InvalidInput(format!(
                "dt = {} exceeds the reaction stability bound {dt_limit}",
                self.dt
            )));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidInput("record_every must be at least 1".into()));
        }
        for &(i, j) in &self.probes {
            if i >= spec.n() || j >= spec.n() {
                return Err(Error::InvalidInput(format!(
                    "probe ({i}, {j}) outside the {0}x{0} grid",
                    spec.n()
                )));
            }
        }
        let steps = (self.t_end / self.dt).round();
        if (steps * self.dt - self.t_end).abs() > 1e-9 * self.t_end {
            return Err(Error::InvalidInput(format!(
                "t_end = {} is not a whole number of steps of {}",
                self.t_end, self.dt
            )));
        }
        Ok(steps as usize)
    }
}

/// Where a probe sample was taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Probe {
    Site(Site),
    /// Spatial means.
    Mean,
}

impl Probe {
    /// `i:j` or `mean`.
    pub fn label(&self) -> String {
        match self {
            Probe::Site((i, j)) => format!("{i}:{j}"),
            Probe::Mean => "mean".to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeSample {
    pub t: f64,
    pub probe: Probe,
    pub target: f64,
    pub infected: f64,
    pub virus: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormSample {
    pub t: f64,
    pub sup_cells: f64,
    pub sup_virus: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bound {
    /// `T + I <= M1`.
    Cells,
    /// `V <= M2`.
    Virus,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Violation {
    pub step: usize,
    pub t: f64,
    pub bound: Bound,
    pub excess: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub region: InvariantRegion,
    /// The initial state was outside the invariant box.
    pub started_outside: bool,
    pub snapshots: Vec<State>,
    pub norms: Vec<NormSample>,
    pub probes: Vec<ProbeSample>,
    /// Largest excess over `M1` seen at any step (0 if none).
    pub max_excess_cells: f64,
    /// Largest excess over `M2` seen at any step (0 if none).
    pub max_excess_virus: f64,
    /// First step at which either bound was exceeded, ignoring any excess
    /// already present at the start.
    pub first_violation: Option<Violation>,
    /// Area-weighted mass of the negative round-off reset to zero.
    pub clamped_mass: f64,
    /// Largest single value reset to zero.
    pub max_clamp: f64,
    pub steps: usize,
    pub final_state: State,
}

/// Running bookkeeping of the negativity clamp.
#[derive(Debug, Default, Clone, Copy)]
struct ClampLog {
    mass: f64,
    max: f64,
}

impl ClampLog {
    fn apply(&mut self, f: &mut ScalarField, step: usize) -> Result<()> {
        let area = f.spec().cell_area();
        for v in f.values_mut() {
            if !v.is_finite() {
                return Err(Error::Blowup { step });
            }
            if *v < 0.0 {
                if *v < -NEGATIVITY_ABORT {
                    return Err(Error::Negativity { step, value: *v });
                }
                self.mass += -*v * area;
                self.max = self.max.max(-*v);
                *v = 0.0;
            }
        }
        Ok(())
    }
}

/// Owns the FFT plan and the tabulated diffusion multiplier for one step size.
struct Propagator {
    spectral: Spectral,
    kernel: Vec<f64>,
    half_kernel: Vec<f64>,
}

impl Propagator {
    fn new(spec: GridSpec, d: f64, dt: f64, diffusion: Diffusion) -> Self {
        let spectral = Spectral::new(spec);
        let symbol = |k2: f64, tau: f64| match diffusion {
            Diffusion::Exact => (-d * tau * k2).exp(),
            Diffusion::BackwardEuler => 1.0 / (1.0 + d * tau * k2),
        };
        let kernel = spectral.wavenumber_sq().iter().map(|&k2| symbol(k2, dt)).collect();
        let half_kernel = spectral
            .wavenumber_sq()
            .iter()
            .map(|&k2| symbol(k2, 0.5 * dt))
            .collect();
        Self {
            spectral,
            kernel,
            half_kernel,
        }
    }

    fn diffuse(&self, v: &ScalarField, half: bool) -> ScalarField {
        let table = if half { &self.half_kernel } else { &self.kernel };
        self.spectral.filter_table(v, table)
    }
}

fn reaction_rhs(r: &Rates, alpha: f64, t: f64, i: f64, v: f64) -> (f64, f64, f64) {
    let infection = r.gamma * v * t;
    (
        alpha - infection - r.mu_t * t,
        infection - r.mu_i * i,
        r.burst_size * r.mu_i * i - r.mu_v * v,
    )
}

/// One Heun step of the pointwise reaction over `tau`.
fn react(r: &Rates, alpha: &ScalarField, s: &mut State, tau: f64) {
    let a = alpha.values().iter();
    let tt = s.target.values_mut().iter_mut();
    let ii = s.infected.values_mut().iter_mut();
    let vv = s.virus.values_mut().iter_mut();
    for (((&a, t), i), v) in a.zip(tt).zip(ii).zip(vv) {
        let (f1, f2, f3) = reaction_rhs(r, a, *t, *i, *v);
        let (pt, pi, pv) = (*t + tau * f1, *i + tau * f2, *v + tau * f3);
        let (g1, g2, g3) = reaction_rhs(r, a, pt, pi, pv);
        *t += 0.5 * tau * (f1 + g1);
        *i += 0.5 * tau * (f2 + g2);
        *v += 0.5 * tau * (f3 + g3);
    }
}

/// Full-system stepper bound to one parameter set and step size.
pub struct Integrator<'a> {
    p: &'a ModelParams,
    dt: f64,
    scheme: Scheme,
    prop: Propagator,
    clamp: ClampLog,
    steps: usize,
}

impl<'a> Integrator<'a> {
    pub fn new(p: &'a ModelParams, dt: f64, scheme: Scheme, diffusion: Diffusion) -> Result<Self> {
        let limit = dt_max(p);
        if !(dt.is_finite() && dt > 0.0) || dt > limit * (1.0 + 1e-12) {
            return Err(Error::InvalidInput(format!(
                "dt = {dt} must lie in (0, {limit}]"
            )));
        }
        Ok(Self {
            p,
            dt,
            scheme,
            prop: Propagator::new(p.spec(), p.rates().d_v, dt, diffusion),
            clamp: ClampLog::default(),
            steps: 0,
        })
    }

    fn clamp_all(&mut self, s: &mut State) -> Result<()> {
        let step = self.steps;
        self.clamp.apply(&mut s.target, step)?;
        self.clamp.apply(&mut s.infected, step)?;
        self.clamp.apply(&mut s.virus, step)
    }

    fn react_clamped(&mut self, s: &mut State, tau: f64) -> Result<()> {
        react(self.p.rates(), self.p.alpha(), s, tau);
        self.clamp_all(s)
    }

    fn diffuse_clamped(&mut self, s: &mut State) -> Result<()> {
        s.virus = self.prop.diffuse(&s.virus, false);
        self.clamp.apply(&mut s.virus, self.steps)
    }

    /// Advances `s` by one step in place.
    pub fn step(&mut self, s: &mut State) -> Result<()> {
        self.steps += 1;
        match self.scheme {
            Scheme::Lie => {
                self.react_clamped(s, self.dt)?;
                self.diffuse_clamped(s)?;
            }
            Scheme::Strang => {
                self.react_clamped(s, 0.5 * self.dt)?;
                self.diffuse_clamped(s)?;
                self.react_clamped(s, 0.5 * self.dt)?;
            }
        }
        s.t += self.dt;
        Ok(())
    }

    pub fn clamped_mass(&self) -> f64 {
        self.clamp.mass
    }

    pub fn max_clamp(&self) -> f64 {
        self.clamp.max
    }
}

fn check_state(p: &ModelParams, s: &State) -> Result<()> {
    let spec = p.spec();
    if s.target.spec() != spec || s.infected.spec() != spec || s.virus.spec() != spec {
        return Err(Error::InvalidInput("state and parameters live on different grids".into()));
    }
    if !s.is_finite() {
        return Err(Error::NonFinite("initial state"));
    }
    let min = s.target.min().min(s.infected.min()).min(s.virus.min());
    if min < 0.0 {
        return Err(Error::InvalidInput(format!(
            "initial state must be non-negative (min {min})"
        )));
    }
    Ok(())
}

/// One step from `s` with the exact diffusion substep.
pub fn step(s: &State, p: &ModelParams, dt: f64, scheme: Scheme) -> Result<State> {
    check_state(p, s)?;
    let mut next = s.clone();
    Integrator::new(p, dt, scheme, Diffusion::Exact)?.step(&mut next)?;
    Ok(next)
}

/// Uninfected `T` and `I` with `amount` virions at one grid point.
pub fn inoculum_state(p: &ModelParams, site: Site, amount: f64) -> Result<State> {
    let spec = p.spec();
    let (i, j) = site;
    if i >= spec.n() || j >= spec.n() {
        return Err(Error::InvalidInput(format!(
            "inoculum site ({i}, {j}) outside the {0}x{0} grid",
            spec.n()
        )));
    }
    if !(amount.is_finite() && amount >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "inoculum amount must be non-negative, got {amount}"
        )));
    }
    let u = uninfected_equilibrium(p);
    let mut virus = ScalarField::zeros(spec);
    virus.values_mut()[spec.index(i, j)] = amount;
    Ok(State {
        t: 0.0,
        target: u.target,
        infected: u.infected,
        virus,
    })
}

/// The grid point closest to the centre of the square, `(n/2, n/2)`.
pub fn center_site(spec: GridSpec) -> Site {
    (spec.n() / 2, spec.n() / 2)
}

/// Records probes, norms, snapshots and bound checks along a run.
struct Recorder<'c> {
    cfg: &'c EvolveConfig,
    region: InvariantRegion,
    start_excess_cells: f64,
    start_excess_virus: f64,
    traj_snapshots: Vec<State>,
    norms: Vec<NormSample>,
    probes: Vec<ProbeSample>,
    max_excess_cells: f64,
    max_excess_virus: f64,
    first_violation: Option<Violation>,
}

impl<'c> Recorder<'c> {
    fn new(cfg: &'c EvolveConfig, region: InvariantRegion, s0: &State) -> Self {
        Self {
            cfg,
            region,
            start_excess_cells: (s0.sup_cells() - region.m1).max(0.0),
            start_excess_virus: (s0.virus.max() - region.m2).max(0.0),
            traj_snapshots: Vec::new(),
            norms: Vec::new(),
            probes: Vec::new(),
            max_excess_cells: 0.0,
            max_excess_virus: 0.0,
            first_violation: None,
        }
    }

    fn check_bounds(&mut self, s: &State, step: usize) {
        let cells = s.sup_cells() - self.region.m1;
        let virus = s.virus.max() - self.region.m2;
        self.max_excess_cells = self.max_excess_cells.max(cells);
        self.max_excess_virus = self.max_excess_virus.max(virus);
        if self.first_violation.is_none() {
            let found = if cells > self.start_excess_cells {
                Some((Bound::Cells, cells))
            } else if virus > self.start_excess_virus {
                Some((Bound::Virus, virus))
            } else {
                None
            };
            if let Some((bound, excess)) = found {
                self.first_violation = Some(Violation {
                    step,
                    t: s.t,
                    bound,
                    excess,
                });
            }
        }
    }

    fn record(&mut self, s: &State) {
        self.norms.push(NormSample {
            t: s.t,
            sup_cells: s.sup_cells(),
            sup_virus: s.virus.max(),
        });
        let spec = s.spec();
        for &site in &self.cfg.probes {
            let k = spec.index(site.0, site.1);
            self.probes.push(ProbeSample {
                t: s.t,
                probe: Probe::Site(site),
                target: s.target.values()[k],
                infected: s.infected.values()[k],
                virus: s.virus.values()[k],
            });
        }
        self.probes.push(ProbeSample {
            t: s.t,
            probe: Probe::Mean,
            target: s.target.mean(),
            infected: s.infected.mean(),
            virus: s.virus.mean(),
        });
        if self.cfg.keep_fields {
            self.traj_snapshots.push(s.clone());
        }
    }

    fn finish(self, s0_outside: bool, steps: usize, clamp: ClampLog, final_state: State) -> Trajectory {
        Trajectory {
            region: self.region,
            started_outside: s0_outside,
            snapshots: self.traj_snapshots,
            norms: self.norms,
            probes: self.probes,
            max_excess_cells: self.max_excess_cells.max(0.0),
            max_excess_virus: self.max_excess_virus.max(0.0),
            first_violation: self.first_violation,
            clamped_mass: clamp.mass,
            max_clamp: clamp.max,
            steps,
            final_state,
        }
    }
}

/// Integrates the full system from `s0` to `s0.t + cfg.t_end`.
///
/// A start outside the invariant box is accepted and flagged.
pub fn evolve(s0: &State, p: &ModelParams, cfg: &EvolveConfig) -> Result<Trajectory> {
    check_state(p, s0)?;
    let steps = cfg.validate(p.spec(), dt_max(p))?;
    let region = invariant_region(p);
    let outside = s0.sup_cells() > region.m1 || s0.virus.max() > region.m2;
    let mut integ = Integrator::new(p, cfg.dt, cfg.scheme, cfg.diffusion)?;
    let mut rec = Recorder::new(cfg, region, s0);
    let mut s = s0.clone();
    rec.check_bounds(&s, 0);
    rec.record(&s);
    for k in 1..=steps {
        integ.step(&mut s)?;
        rec.check_bounds(&s, k);
        if k % cfg.record_every == 0 || k == steps {
            rec.record(&s);
        }
    }
    Ok(rec.finish(outside, steps, integ.clamp, s))
}

/// Integrates the quasi-steady scalar equation
/// `V_t = d_V ΔV - mu_V V + mu_T mu_V R0 V / (gamma V + mu_T)` from `v0`.
///
/// `T` and `I` in the returned trajectory are the quasi-steady values
/// `alpha / (gamma V + mu_T)` and `gamma alpha V / (mu_I (gamma V + mu_T))`.
/// The step bound is [`scalar_dt_max`].
pub fn evolve_scalar(v0: &ScalarField, p: &ModelParams, cfg: &EvolveConfig) -> Result<Trajectory> {
    if v0.spec() != p.spec() {
        return Err(Error::InvalidInput("initial field on a different grid".into()));
    }
    if !v0.is_finite() {
        return Err(Error::NonFinite("initial virus density"));
    }
    if v0.min() < 0.0 {
        return Err(Error::InvalidInput(format!(
            "initial virus density must be non-negative (min {})",
            v0.min()
        )));
    }
    let steps = cfg.validate(p.spec(), scalar_dt_max(p))?;
    let r = *p.rates();
    let r0 = p.reproductive_ratio();
    let prop = Propagator::new(p.spec(), r.d_v, cfg.dt, cfg.diffusion);
    let lift = |v: &ScalarField, t: f64| -> Result<State> {
        let e = infected_from_v(p, v)?;
        Ok(State {
            t,
            target: e.target,
            infected: e.infected,
            virus: e.virus,
        })
    };
    let g = |r0: f64, v: f64| -r.mu_v * v + r.mu_t * r.mu_v * r0 * v / (r.gamma * v + r.mu_t);
    let react = |v: &mut ScalarField, tau: f64| {
        for (x, &q) in v.values_mut().iter_mut().zip(r0.values()) {
            let k1 = g(q, *x);
            let k2 = g(q, *x + tau * k1);
            *x += 0.5 * tau * (k1 + k2);
        }
    };

    let region = invariant_region(p);
    let s0 = lift(v0, 0.0)?;
    let outside = s0.sup_cells() > region.m1 || s0.virus.max() > region.m2;
    let mut rec = Recorder::new(cfg, region, &s0);
    rec.check_bounds(&s0, 0);
    rec.record(&s0);
    let mut clamp = ClampLog::default();
    let mut v = v0.clone();
    let mut t = 0.0;
    for k in 1..=steps {
        match cfg.scheme {
            Scheme::Lie => {
                react(&mut v, cfg.dt);
                clamp.apply(&mut v, k)?;
                v = prop.diffuse(&v, false);
            }
            Scheme::Strang => {
                react(&mut v, 0.5 * cfg.dt);
                clamp.apply(&mut v, k)?;
                v = prop.diffuse(&v, false);
                clamp.apply(&mut v, k)?;
                react(&mut v, 0.5 * cfg.dt);
            }
        }
        clamp.apply(&mut v, k)?;
        t = k as f64 * cfg.dt;
        let recording = k % cfg.record_every == 0 || k == steps;
        if recording {
            let s = lift(&v, t)?;
            rec.check_bounds(&s, k);
            rec.record(&s);
        } else if v.max() > region.m2 {
            rec.check_bounds(&lift(&v, t)?, k);
        }
    }
    let final_state = lift(&v, t)?;
    Ok(rec.finish(outside, steps, clamp, final_state))
}

/// One row of a phase-plane series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePoint {
    pub t: f64,
    pub probe: Probe,
    pub target: f64,
    pub virus: f64,
}

/// `(T, V)` series for every probe and for the spatial means, in
/// recording order.
pub fn phase_portrait(traj: &Trajectory) -> Vec<PhasePoint> {
    traj.probes
        .iter()
        .map(|s| PhasePoint {
            t: s.t,
            probe: s.probe,
            target: s.target,
            virus: s.virus,
        })
        .collect()
}

/// `t,site,T,I,V` with `site` either `i:j` or `mean`.
pub fn write_probes_csv<W: Write>(traj: &Trajectory, mut out: W) -> Result<()> {
    writeln!(out, "t,site,T,I,V")?;
    for s in &traj.probes {
        writeln!(
            out,
            "{:.16e},{},{:.16e},{:.16e},{:.16e}",
            s.t,
            s.probe.label(),
            s.target,
            s.infected,
            s.virus
        )?;
    }
    Ok(())
}

/// `t,site,T,V`.
pub fn write_phase_csv<W: Write>(points: &[PhasePoint], mut out: W) -> Result<()> {
    writeln!(out, "t,site,T,V")?;
    for p in points {
        writeln!(out, "{:.16e},{},{:.16e},{:.16e}", p.t, p.probe.label(), p.target, p.virus)?;
    }
    Ok(())
}
