//! Scenario-driven runs of the virodyn solvers.
//!
//! Each subcommand reads a [`Scenario`], writes its CSV outputs into an
//! output directory and returns the lines it wants printed. Errors carry
//! the process exit code: 2 for bad input, 1 for solver failures.

pub mod scenario;

use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use clap::ValueEnum;
use virodyn::dynamics::{
    center_site, evolve, evolve_scalar, inoculum_state, phase_portrait, write_phase_csv, write_probes_csv,
    Diffusion, EvolveConfig, Scheme, State, Trajectory,
};
use virodyn::eigen::{lambda0, EigenOptions};
use virodyn::grid::write_field_csv;
use virodyn::homogenize::{convergence_study, copies_per_side, tile, write_study_csv};
use virodyn::model::source_fraction;
use virodyn::stability::{stability_report, write_stability_csv, Spectrum};
use virodyn::steady::{monotone_iterate, SteadyOptions};
use virodyn::sweep::{alpha_grid, bifurcation_sweep, write_sweep_csv};
use virodyn::{Error, LaplacianMode, ModelParams, ScalarField};

pub use scenario::Scenario;

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Input(String),
    Solver(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Solver(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "input error: {m}"),
            CliError::Solver(m) => write!(f, "solver failure: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidInput(_) | Error::Parse(_) | Error::Heterogeneous(_) => CliError::Input(e.to_string()),
            _ => CliError::Solver(e.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    /// Principal eigenvalue and eigenfunction.
    Eigen,
    /// Steady state by monotone iteration.
    Steady,
    /// Full three-component time integration.
    Evolve,
    /// Quasi-steady scalar virus equation.
    EvolveScalar,
    /// Fourier-mode stability of the constant infected state.
    Stability,
    /// Convergence towards the homogenized limit.
    Homogenize,
    /// Bifurcation sweep over constant production rates.
    Sweep,
    /// Seeded random reproductive-ratio map.
    RandomField,
}

/// Runs `cmd` on the scenario at `scenario_path`, writing into `out_dir`.
pub fn run(cmd: Command, scenario_path: &Path, out_dir: &Path) -> Result<Vec<String>, CliError> {
    let sc = Scenario::from_file(scenario_path)?;
    fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Input(format!("cannot create {}: {e}", out_dir.display())))?;
    match cmd {
        Command::Eigen => run_eigen(&sc, out_dir),
        Command::Steady => run_steady(&sc, out_dir),
        Command::Evolve => run_evolve(&sc, out_dir, false),
        Command::EvolveScalar => run_evolve(&sc, out_dir, true),
        Command::Stability => run_stability(&sc, out_dir),
        Command::Homogenize => run_homogenize(&sc, out_dir),
        Command::Sweep => run_sweep(&sc, out_dir),
        Command::RandomField => run_random_field(&sc, out_dir),
    }
}

/// Rounds to 12 significant digits and prints the shortest form, so
/// `10.000000000000002` shows as `10`.
pub fn short(x: f64) -> String {
    let rounded: f64 = format!("{x:.11e}").parse().unwrap_or(x);
    format!("{rounded}")
}

fn write_with(dir: &Path, name: &str, f: impl FnOnce(&mut BufWriter<File>) -> virodyn::Result<()>) -> Result<(), CliError> {
    let path = dir.join(name);
    let io = |e: std::io::Error| CliError::Solver(format!("cannot write {}: {e}", path.display()));
    let mut w = BufWriter::new(File::create(&path).map_err(io)?);
    f(&mut w).map_err(|e| CliError::Solver(format!("cannot write {}: {e}", path.display())))?;
    w.flush().map_err(io)
}

fn write_field(dir: &Path, name: &str, field: &ScalarField) -> Result<(), CliError> {
    write_with(dir, name, |w| write_field_csv(field, w))
}

fn eigen_options(sc: &Scenario) -> Result<EigenOptions, CliError> {
    let d = EigenOptions::default();
    Ok(EigenOptions {
        tol: sc.f64_or("eigen.tol", d.tol)?,
        max_iter: sc.usize_or("eigen.max_iter", d.max_iter)?,
        ..d
    })
}

fn steady_options(sc: &Scenario) -> Result<SteadyOptions, CliError> {
    let d = SteadyOptions::default();
    Ok(SteadyOptions {
        tol: sc.f64_or("steady.tol", d.tol)?,
        max_iter: sc.usize_or("steady.max_iter", d.max_iter)?,
        eigen: eigen_options(sc)?,
    })
}

fn run_eigen(sc: &Scenario, out: &Path) -> Result<Vec<String>, CliError> {
    let p = sc.params()?;
    let e = lambda0(&p, &eigen_options(sc)?)?;
    write_with(out, "eigen.csv", |w| {
        writeln!(w, "lambda0,iterations,residual")?;
        writeln!(w, "{:.16e},{},{:.16e}", e.lambda_max, e.iterations, e.residual)?;
        Ok(())
    })?;
    write_field(out, "phi.csv", &e.phi)?;
    write_field(out, "R0.csv", &p.reproductive_ratio())?;
    Ok(vec![format!("lambda0={}", short(e.lambda_max))])
}

fn run_steady(sc: &Scenario, out: &Path) -> Result<Vec<String>, CliError> {
    let p = sc.params()?;
    let s = monotone_iterate(&p, &steady_options(sc)?)?;
    write_with(out, "steady.csv", |w| {
        writeln!(w, "branch,lambda0,iterations,residual")?;
        writeln!(w, "{},{:.16e},{},{:.16e}", s.branch.as_str(), s.lambda0, s.iterations, s.residual)?;
        Ok(())
    })?;
    write_field(out, "V.csv", &s.triple.virus)?;
    write_field(out, "T.csv", &s.triple.target)?;
    write_field(out, "I.csv", &s.triple.infected)?;
    write_field(out, "R0.csv", &p.reproductive_ratio())?;
    let mut lines = vec![format!(
        "branch={} lambda0={} iterations={} residual={:.3e} mean_V={}",
        s.branch.as_str(),
        short(s.lambda0),
        s.iterations,
        s.residual,
        short(s.triple.virus.mean())
    )];
    if s.critical {
        lines.push("warning: lambda0 is within solver tolerance of zero".into());
    }
    Ok(lines)
}

/// Point inoculum, or a periodic Gaussian bump of the given width.
fn initial_virus(sc: &Scenario, p: &ModelParams) -> Result<State, CliError> {
    let spec = p.spec();
    let site = sc.site("evolve.inoculum.site")?.unwrap_or_else(|| center_site(spec));
    let amount = sc.f64_or("evolve.inoculum.amount", 1.0)?;
    let mut s = inoculum_state(p, site, amount)?;
    if let Some(width) = sc.f64_opt("evolve.inoculum.width")? {
        if width <= 0.0 {
            return Err(CliError::Input(format!("evolve.inoculum.width must be positive, got {width}")));
        }
        let n = spec.n();
        let wrap = |a: usize, b: usize| {
            let d = a.abs_diff(b);
            d.min(n - d) as f64 * spec.h()
        };
        s.virus = ScalarField::from_index_fn(spec, |i, j| {
            let r2 = wrap(i, site.0).powi(2) + wrap(j, site.1).powi(2);
            amount * (-r2 / (width * width)).exp()
        });
    }
    Ok(s)
}

fn evolve_config(sc: &Scenario) -> Result<EvolveConfig, CliError> {
    let mut cfg = EvolveConfig::new(sc.f64_or("evolve.dt", 1e-3)?, sc.f64_req("evolve.t_end")?);
    cfg.scheme = match sc.get("evolve.scheme").unwrap_or("strang") {
        "strang" => Scheme::Strang,
        "lie" => Scheme::Lie,
        s => return Err(CliError::Input(format!("evolve.scheme must be strang or lie, got {s:?}"))),
    };
    cfg.diffusion = match sc.get("evolve.diffusion").unwrap_or("exact") {
        "exact" => Diffusion::Exact,
        "implicit" => Diffusion::BackwardEuler,
        s => {
            return Err(CliError::Input(format!(
                "evolve.diffusion must be exact or implicit, got {s:?}"
            )))
        }
    };
    cfg.record_every = sc.usize_or("evolve.record_every", cfg.record_every)?;
    cfg.probes = sc.probes()?;
    cfg.keep_fields = sc.bool_or("evolve.snapshots", false)?;
    Ok(cfg)
}

fn run_evolve(sc: &Scenario, out: &Path, scalar: bool) -> Result<Vec<String>, CliError> {
    let p = sc.params()?;
    let cfg = evolve_config(sc)?;
    let s0 = initial_virus(sc, &p)?;
    let traj = if scalar {
        evolve_scalar(&s0.virus, &p, &cfg)?
    } else {
        evolve(&s0, &p, &cfg)?
    };
    write_with(out, "probes.csv", |w| write_probes_csv(&traj, w))?;
    write_with(out, "phase.csv", |w| write_phase_csv(&phase_portrait(&traj), w))?;
    write_with(out, "norms.csv", |w| {
        writeln!(w, "t,sup_cells,sup_V")?;
        for s in &traj.norms {
            writeln!(w, "{:.16e},{:.16e},{:.16e}", s.t, s.sup_cells, s.sup_virus)?;
        }
        Ok(())
    })?;
    for (k, snap) in traj.snapshots.iter().enumerate() {
        write_field(out, &format!("snapshot_{k:04}_T.csv"), &snap.target)?;
        write_field(out, &format!("snapshot_{k:04}_I.csv"), &snap.infected)?;
        write_field(out, &format!("snapshot_{k:04}_V.csv"), &snap.virus)?;
    }
    let f = &traj.final_state;
    write_field(out, "final_T.csv", &f.target)?;
    write_field(out, "final_I.csv", &f.infected)?;
    write_field(out, "final_V.csv", &f.virus)?;
    let summary = summary_lines(&cfg, &traj, scalar);
    write_with(out, "summary.txt", |w| {
        for l in &summary {
            writeln!(w, "{l}")?;
        }
        Ok(())
    })?;
    let mut lines = vec![format!(
        "t={} sup_V={} mean_T={} mean_V={} in_region={}",
        short(f.t),
        short(f.virus.max()),
        short(f.target.mean()),
        short(f.virus.mean()),
        traj.first_violation.is_none()
    )];
    if let Some(v) = traj.first_violation {
        lines.push(format!(
            "warning: invariant region left at t = {} ({:?} bound, excess {:.3e})",
            short(v.t),
            v.bound,
            v.excess
        ));
    }
    Ok(lines)
}

fn summary_lines(cfg: &EvolveConfig, traj: &Trajectory, scalar: bool) -> Vec<String> {
    let f = &traj.final_state;
    let r = &traj.region;
    let mut l = vec![
        format!("model={}", if scalar { "scalar" } else { "full" }),
        format!("scheme={}", cfg.scheme.as_str()),
        format!("dt={:e}", cfg.dt),
        format!("t_end={}", f.t),
        format!("steps={}", traj.steps),
        format!("m1={:.16e}", r.m1),
        format!("m2={:.16e}", r.m2),
        format!("m2_alt={:.16e}", r.m2_alt),
        format!("started_outside={}", traj.started_outside),
        format!("sup_T={:.16e}", f.target.max()),
        format!("sup_I={:.16e}", f.infected.max()),
        format!("sup_V={:.16e}", f.virus.max()),
        format!("mean_T={:.16e}", f.target.mean()),
        format!("mean_I={:.16e}", f.infected.mean()),
        format!("mean_V={:.16e}", f.virus.mean()),
        format!("max_excess_cells={:.16e}", traj.max_excess_cells),
        format!("max_excess_virus={:.16e}", traj.max_excess_virus),
        format!("region_violated={}", traj.first_violation.is_some()),
    ];
    if let Some(v) = traj.first_violation {
        l.push(format!("first_violation_t={:.16e}", v.t));
    }
    l.push(format!("clamped_mass={:.16e}", traj.clamped_mass));
    l.push(format!("max_clamp={:.16e}", traj.max_clamp));
    l
}

fn run_stability(sc: &Scenario, out: &Path) -> Result<Vec<String>, CliError> {
    let p = sc.params()?;
    let spectrum = match sc.get("stability.spectrum").unwrap_or("continuous") {
        "continuous" => Spectrum::Continuous,
        "grid" => Spectrum::Grid {
            n: p.spec().n(),
            mode: LaplacianMode::Spectral,
        },
        "stencil" => Spectrum::Grid {
            n: p.spec().n(),
            mode: LaplacianMode::Stencil5,
        },
        s => {
            return Err(CliError::Input(format!(
                "stability.spectrum must be continuous, grid or stencil, got {s:?}"
            )))
        }
    };
    let rep = stability_report(&p, sc.usize_or("stability.max_index", 32)?, spectrum)?;
    write_with(out, "stability.csv", |w| write_stability_csv(&rep, w))?;
    let mut lines = vec![format!(
        "r0={} modes={} k0_stable={} all_evaluated_stable={} tail_threshold={} tail_covered={} verdict={}",
        short(rep.r0),
        rep.modes.len(),
        rep.k0_stable,
        rep.all_evaluated_stable,
        short(rep.tail.threshold),
        rep.tail.covered,
        if rep.verdict { "stable" } else { "unstable" }
    )];
    if let Some((m1, m2)) = rep.first_unstable {
        lines.push(format!("first unstable mode ({m1}, {m2})"));
    }
    if !rep.consistent {
        lines.push("warning: Routh-Hurwitz and root signs disagree on some mode".into());
    }
    Ok(lines)
}

fn run_homogenize(sc: &Scenario, out: &Path) -> Result<Vec<String>, CliError> {
    let rates = sc.rates()?;
    let cell = sc.cell()?;
    let ell = sc.f64_or("ell", 1.0)?;
    let eps = sc
        .f64_list("homogenize.epsilons")?
        .unwrap_or_else(|| vec![0.5, 0.25, 0.125]);
    let resolution = sc.usize_or("homogenize.resolution", 4)?;
    let study = convergence_study(&rates, &cell, ell, &eps, resolution, &steady_options(sc)?)?;
    write_with(out, "homogenize.csv", |w| write_study_csv(&study, w))?;
    for r in &study.records {
        let k = copies_per_side(ell, r.epsilon)?;
        write_field(out, &format!("V_k{k}.csv"), &r.virus)?;
        write_field(out, &format!("R0_k{k}.csv"), &tile(&cell, r.epsilon, r.virus.spec())?)?;
    }
    let l = &study.limit;
    let mut lines = vec![format!(
        "M={} V0={} lambda_limit={}",
        short(l.mean),
        short(l.v0),
        short(l.lambda_limit)
    )];
    for r in &study.records {
        lines.push(format!(
            "epsilon={} n={} lambda0={} sup_dist={}",
            short(r.epsilon),
            r.n,
            short(r.lambda0),
            short(r.sup_dist)
        ));
    }
    if !study.non_monotone.is_empty() {
        lines.push("warning: sup distance grows as epsilon shrinks; refine homogenize.resolution".into());
    }
    Ok(lines)
}

fn run_sweep(sc: &Scenario, out: &Path) -> Result<Vec<String>, CliError> {
    let rates = sc.rates()?;
    let alphas = alpha_grid(&rates, sc.f64_or("sweep.r0_max", 3.0)?, sc.usize_or("sweep.count", 31)?)?;
    let pts = bifurcation_sweep(sc.grid()?, &rates, &alphas, &steady_options(sc)?)?;
    write_with(out, "sweep.csv", |w| write_sweep_csv(&pts, w))?;
    let infected = pts.iter().filter(|q| q.branch == virodyn::steady::Branch::Infected).count();
    Ok(vec![format!("points={} infected={}", pts.len(), infected)])
}

fn run_random_field(sc: &Scenario, out: &Path) -> Result<Vec<String>, CliError> {
    let r0 = sc.random_r0()?;
    write_field(out, "R0.csv", &r0)?;
    Ok(vec![format!(
        "sources={} min={} max={}",
        short(source_fraction(&r0)),
        short(r0.min()),
        short(r0.max())
    )])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn short_form() {
        assert_eq!(short(10.000000000000002), "10");
        assert_eq!(short(-5.0), "-5");
        assert_eq!(short(0.23292805), "0.23292805");
        assert_eq!(short(1.5e-20), "0.000000000000000000015");
    }

    #[test]
    fn error_classes() {
        assert_eq!(CliError::from(Error::InvalidInput("x".into())).exit_code(), 2);
        assert_eq!(CliError::from(Error::Blowup { step: 3 }).exit_code(), 1);
        assert_eq!(
            CliError::from(Error::NotConverged {
                what: "x",
                iterations: 1,
                residual: 1.0
            })
            .exit_code(),
            1
        );
    }
}
