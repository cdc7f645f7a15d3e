//! Linear stability of the infected equilibrium in a homogeneous
//! environment.
//!
//! With constant `R0 > 1` the linearisation about `(T_i, I_i, V_i)` splits
//! over the Fourier modes of the Laplacian. On the mode with eigenvalue
//! `-lambda_k` it is the 3x3 matrix
//!
//! ```text
//!       | -mu_T R0         0      -mu_V / N           |
//! M_k = | mu_T (R0 - 1)  -mu_I     mu_V / N           |
//!       |   0            N mu_I   -d_V lambda_k - mu_V |
//! ```
//!
//! whose characteristic polynomial is `x^3 + b x^2 + c x + d` with
//!
//! ```text
//! b = mu_T R0 + mu_I + mu_V + d_V lambda_k
//! c = mu_T R0 (mu_I + mu_V) + d_V lambda_k (mu_T R0 + mu_I)
//! d = mu_I mu_V mu_T (R0 - 1) + d_V lambda_k mu_I mu_T R0
//! ```
//!
//! All roots lie in the open left half-plane iff `b > 0`, `d > 0` and
//! `bc - d > 0` (Routh–Hurwitz). The rest of the spectrum consists of the
//! two points `-mu_I` and `-mu_T R0`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::Write;

use nalgebra::Matrix3;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::LaplacianMode;
use crate::model::{ModelParams, Rates};

/// Which Laplacian eigenvalues label the modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Spectrum {
    /// `(2π/ell)^2 (m1^2 + m2^2)` for all integer pairs.
    #[default]
    Continuous,
    /// The eigenvalues resolved by an `n x n` grid with the given
    /// discrete Laplacian; indices are limited to `|m| <= n/2`.
    Grid { n: usize, mode: LaplacianMode },
}

impl Spectrum {
    fn max_index(&self, requested: usize) -> usize {
        match self {
            Spectrum::Continuous => requested,
            Spectrum::Grid { n, .. } => requested.min(n / 2),
        }
    }

    /// `lambda_k` of the mode `(m1, m2)` on a square of side `ell`.
    pub fn eigenvalue(&self, ell: f64, m1: i64, m2: i64) -> f64 {
        match self {
            Spectrum::Continuous
            | Spectrum::Grid {
                mode: LaplacianMode::Spectral,
                ..
            } => (2.0 * PI / ell).powi(2) * (m1 * m1 + m2 * m2) as f64,
            Spectrum::Grid {
                n,
                mode: LaplacianMode::Stencil5,
            } => {
                let h = ell / *n as f64;
                let s = |m: i64| (PI * m as f64 / *n as f64).sin().powi(2);
                4.0 / (h * h) * (s(m1) + s(m2))
            }
        }
    }
}

/// A distinct Laplacian eigenvalue and how many lattice modes share it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeEigenvalue {
    pub lambda_k: f64,
    pub multiplicity: usize,
}

/// Distinct `(2π/ell)^2 (m1^2 + m2^2)` over `|m1|, |m2| <= max_index`,
/// ascending, with multiplicities. The first entry is `0` with
/// multiplicity 1.
pub fn mode_eigenvalues(ell: f64, max_index: usize) -> Result<Vec<ModeEigenvalue>> {
    if !(ell.is_finite() && ell > 0.0) {
        return Err(Error::InvalidInput(format!("ell must be positive, got {ell}")));
    }
    let m = max_index as i64;
    let mut counts: BTreeMap<i64, usize> = BTreeMap::new();
    for m1 in -m..=m {
        for m2 in -m..=m {
            *counts.entry(m1 * m1 + m2 * m2).or_default() += 1;
        }
    }
    let base = (2.0 * PI / ell).powi(2);
    Ok(counts
        .into_iter()
        .map(|(s, multiplicity)| ModeEigenvalue {
            lambda_k: base * s as f64,
            multiplicity,
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cubic {
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Cubic {
    pub fn eval(&self, x: Complex64) -> Complex64 {
        ((x + self.b) * x + self.c) * x + self.d
    }

    fn derivative(&self, x: Complex64) -> Complex64 {
        (3.0 * x + 2.0 * self.b) * x + self.c
    }

    pub fn hurwitz(&self) -> f64 {
        self.b * self.c - self.d
    }
}

/// Coefficients for explicit rates; no validation.
pub fn cubic_for(r: &Rates, r0: f64, lambda_k: f64) -> Cubic {
    let a = r.mu_t * r0;
    let diff = r.d_v * lambda_k;
    Cubic {
        b: a + r.mu_i + r.mu_v + diff,
        c: a * (r.mu_i + r.mu_v) + diff * (a + r.mu_i),
        d: r.mu_i * r.mu_v * r.mu_t * (r0 - 1.0) + diff * r.mu_i * a,
    }
}

fn homogeneous_r0(p: &ModelParams) -> Result<f64> {
    p.constant_r0().map_err(|_| {
        Error::Heterogeneous(
            "mode analysis needs a constant R0; use the principal eigenvalue for heterogeneous media",
        )
    })
}

pub fn characteristic_cubic(p: &ModelParams, lambda_k: f64) -> Result<Cubic> {
    let r0 = homogeneous_r0(p)?;
    if !(r0 > 0.0) {
        return Err(Error::InvalidInput(format!("R0 must be positive, got {r0}")));
    }
    if !(lambda_k.is_finite() && lambda_k >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "lambda_k must be non-negative, got {lambda_k}"
        )));
    }
    Ok(cubic_for(p.rates(), r0, lambda_k))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Hurwitz {
    /// `b > 0`, `d > 0` and `bc - d > 0`.
    pub pass: bool,
    /// `d` or `bc - d` vanishes to rounding: a root on the imaginary axis.
    pub marginal: bool,
}

/// Routh–Hurwitz test with the boundary cases `d = 0` and `bc = d`
/// reported as marginal and not stable.
pub fn routh_hurwitz_verdict(b: f64, c: f64, d: f64) -> Hurwitz {
    let bc = b * c;
    let h = bc - d;
    let eps = 4.0 * f64::EPSILON;
    let marginal = d.abs() <= eps * (b.abs() * c.abs()).max(f64::MIN_POSITIVE)
        || h.abs() <= eps * (bc.abs() + d.abs());
    Hurwitz {
        pass: !marginal && b > 0.0 && d > 0.0 && h > 0.0,
        marginal,
    }
}

pub fn routh_hurwitz(b: f64, c: f64, d: f64) -> bool {
    routh_hurwitz_verdict(b, c, d).pass
}

fn sort_roots(mut roots: [Complex64; 3]) -> [Complex64; 3] {
    roots.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    roots
}

/// Roots of `x^3 + b x^2 + c x + d` from the companion matrix, polished by
/// two Newton steps on the cubic, sorted by real part.
pub fn cubic_roots(cubic: &Cubic) -> [Complex64; 3] {
    let companion = Matrix3::new(
        0.0, 0.0, -cubic.d, //
        1.0, 0.0, -cubic.c, //
        0.0, 1.0, -cubic.b,
    );
    let eig = companion.complex_eigenvalues();
    let mut roots = [eig[0], eig[1], eig[2]];
    for r in roots.iter_mut() {
        for _ in 0..2 {
            let dp = cubic.derivative(*r);
            if dp.norm() == 0.0 {
                break;
            }
            let next = *r - cubic.eval(*r) / dp;
            if next.is_finite() {
                *r = next;
            }
        }
    }
    sort_roots(roots)
}

/// The linearisation on mode `lambda_k`, assembled from the equilibrium
/// values `T_i = mu_V / (gamma N)` and `V_i = mu_T (R0 - 1) / gamma`.
pub fn mode_matrix(r: &Rates, r0: f64, lambda_k: f64) -> Matrix3<f64> {
    let t_i = r.mu_v / (r.gamma * r.burst_size);
    let v_i = r.mu_t * (r0 - 1.0) / r.gamma;
    Matrix3::new(
        -r.gamma * v_i - r.mu_t, 0.0, -r.gamma * t_i, //
        r.gamma * v_i, -r.mu_i, r.gamma * t_i, //
        0.0, r.burst_size * r.mu_i, -r.d_v * lambda_k - r.mu_v,
    )
}

pub fn mode_matrix_eigenvalues(r: &Rates, r0: f64, lambda_k: f64) -> [Complex64; 3] {
    let eig = mode_matrix(r, r0, lambda_k).complex_eigenvalues();
    sort_roots([eig[0], eig[1], eig[2]])
}

/// Largest distance between two root sets under the best pairing.
pub fn root_mismatch(a: &[Complex64; 3], b: &[Complex64; 3]) -> f64 {
    const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    PERMS
        .iter()
        .map(|p| (0..3).map(|i| (a[i] - b[p[i]]).norm()).fold(0.0, f64::max))
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeRoots {
    /// Companion-matrix roots of the cubic.
    pub roots: [Complex64; 3],
    /// Eigenvalues of the assembled `M_k`.
    pub matrix_eigenvalues: [Complex64; 3],
    pub mismatch: f64,
}

pub fn mode_matrix_roots(p: &ModelParams, lambda_k: f64) -> Result<ModeRoots> {
    let cubic = characteristic_cubic(p, lambda_k)?;
    let r0 = homogeneous_r0(p)?;
    let roots = cubic_roots(&cubic);
    let matrix_eigenvalues = mode_matrix_eigenvalues(p.rates(), r0, lambda_k);
    Ok(ModeRoots {
        roots,
        matrix_eigenvalues,
        mismatch: root_mismatch(&roots, &matrix_eigenvalues),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeStability {
    /// Representative `(m1, m2)` with `0 <= m2 <= m1`.
    pub mode: (i64, i64),
    /// Number of lattice modes `(±m1, ±m2)`, `(±m2, ±m1)` in the orbit.
    pub multiplicity: usize,
    pub lambda_k: f64,
    pub cubic: Cubic,
    pub roots: [Complex64; 3],
    /// Every root has negative real part.
    pub stable: bool,
    pub rh_pass: bool,
    pub marginal: bool,
}

/// Beyond `threshold` the coefficients `b`, `d` and `bc - d` are positive
/// and increasing in `lambda_k`, so every higher mode is stable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailCertificate {
    pub threshold: f64,
    /// All modes up to the threshold were evaluated.
    pub covered: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub r0: f64,
    pub modes: Vec<ModeStability>,
    /// `-mu_I` and `-mu_T R0`.
    pub essential: [f64; 2],
    /// Verdict of the spatially constant mode, i.e. of the ODE system.
    pub k0_stable: bool,
    pub all_evaluated_stable: bool,
    pub first_unstable: Option<(i64, i64)>,
    /// Every evaluated mode agrees between the Routh–Hurwitz test and the
    /// signs of the computed roots.
    pub consistent: bool,
    pub tail: TailCertificate,
    /// All modes stable (evaluated ones plus the certified tail) and both
    /// essential points negative.
    pub verdict: bool,
}

fn orbit_size(m1: i64, m2: i64) -> usize {
    match (m1, m2) {
        (0, 0) => 1,
        (_, 0) => 4,
        _ if m1 == m2 => 4,
        _ => 8,
    }
}

/// Threshold past which `b`, `d` and `bc - d` are positive and increasing
/// in `lambda_k`. `bc - d` is a quadratic in `lambda_k` with positive
/// leading coefficient when `R0 > 0`.
fn tail_threshold(r: &Rates, r0: f64) -> f64 {
    let c0 = cubic_for(r, r0, 0.0);
    let c1 = cubic_for(r, r0, 1.0);
    // slopes in lambda_k
    let (sb, sc, sd) = (c1.b - c0.b, c1.c - c0.c, c1.d - c0.d);
    // bc - d = q0 + q1 x + q2 x^2
    let q0 = c0.b * c0.c - c0.d;
    let q1 = c0.b * sc + sb * c0.c - sd;
    let q2 = sb * sc;
    let vertex = if q2 > 0.0 { -q1 / (2.0 * q2) } else { 0.0 };
    let disc = q1 * q1 - 4.0 * q2 * q0;
    let quad_root = if q2 > 0.0 && disc >= 0.0 {
        (-q1 + disc.sqrt()) / (2.0 * q2)
    } else {
        0.0
    };
    let lin_root = |c0: f64, s: f64| if s > 0.0 { -c0 / s } else { f64::INFINITY };
    [vertex, quad_root, lin_root(c0.b, sb), lin_root(c0.d, sd), 0.0]
        .into_iter()
        .fold(0.0, f64::max)
}

/// Per-mode stability over `0 <= m2 <= m1 <= max_index`.
pub fn stability_report(p: &ModelParams, max_index: usize, spectrum: Spectrum) -> Result<StabilityReport> {
    let r0 = homogeneous_r0(p)?;
    if r0 <= 1.0 {
        return Err(Error::NoInfectedEquilibrium(format!(
            "R0 = {r0} <= 1: no biological infected equilibrium to analyse"
        )));
    }
    let r = *p.rates();
    let ell = p.spec().ell();
    let top = spectrum.max_index(max_index) as i64;
    let pairs: Vec<(i64, i64)> = (0..=top).flat_map(|m1| (0..=m1).map(move |m2| (m1, m2))).collect();
    let modes: Vec<ModeStability> = pairs
        .par_iter()
        .map(|&(m1, m2)| {
            let lambda_k = spectrum.eigenvalue(ell, m1, m2);
            let cubic = cubic_for(&r, r0, lambda_k);
            let roots = cubic_roots(&cubic);
            let rh = routh_hurwitz_verdict(cubic.b, cubic.c, cubic.d);
            ModeStability {
                mode: (m1, m2),
                multiplicity: orbit_size(m1, m2),
                lambda_k,
                cubic,
                roots,
                stable: roots.iter().all(|z| z.re < 0.0),
                rh_pass: rh.pass,
                marginal: rh.marginal,
            }
        })
        .collect();

    let all_evaluated_stable = modes.iter().all(|m| m.rh_pass);
    let first_unstable = modes
        .iter()
        .filter(|m| !m.rh_pass)
        .min_by(|a, b| a.lambda_k.total_cmp(&b.lambda_k))
        .map(|m| m.mode);
    let consistent = modes.iter().all(|m| m.marginal || m.rh_pass == m.stable);
    let threshold = tail_threshold(&r, r0);
    // the smallest eigenvalue not evaluated is that of (top + 1, 0)
    let next = spectrum.eigenvalue(ell, top + 1, 0);
    let covered = match spectrum {
        Spectrum::Continuous => threshold < next,
        Spectrum::Grid { .. } => true,
    };
    let essential = [-r.mu_i, -r.mu_t * r0];
    Ok(StabilityReport {
        r0,
        k0_stable: modes[0].rh_pass,
        verdict: all_evaluated_stable && covered && essential.iter().all(|&e| e < 0.0),
        modes,
        essential,
        all_evaluated_stable,
        first_unstable,
        consistent,
        tail: TailCertificate { threshold, covered },
    })
}

/// `m1,m2,lambda_k,b,c,d,re_root1,re_root2,re_root3,stable` with `stable`
/// written as `1` or `0` and roots ordered by real part.
pub fn write_stability_csv<W: Write>(report: &StabilityReport, mut out: W) -> Result<()> {
    writeln!(out, "m1,m2,lambda_k,b,c,d,re_root1,re_root2,re_root3,stable")?;
    for m in &report.modes {
        writeln!(
            out,
            "{},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
            m.mode.0,
            m.mode.1,
            m.lambda_k,
            m.cubic.b,
            m.cubic.c,
            m.cubic.d,
            m.roots[0].re,
            m.roots[1].re,
            m.roots[2].re,
            u8::from(m.rh_pass)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{GridSpec, ScalarField};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params(r0: f64, ell: f64) -> ModelParams {
        let spec = GridSpec::new(8, ell).unwrap();
        let r = Rates::reference();
        ModelParams::constant(spec, r.alpha_for_r0(r0), r).unwrap()
    }

    #[test]
    fn mode_eigenvalue_examples() {
        let ev = mode_eigenvalues(1.0, 3).unwrap();
        let q = 4.0 * PI * PI;
        let want = [0.0, 1.0, 2.0, 4.0, 5.0];
        for (e, w) in ev.iter().zip(want) {
            assert!((e.lambda_k - q * w).abs() < 1e-9);
        }
        assert_eq!(ev[0].multiplicity, 1);
        assert_eq!(ev[1].multiplicity, 4);
        assert_eq!(ev[2].multiplicity, 4);
        let total: usize = ev.iter().map(|e| e.multiplicity).sum();
        assert_eq!(total, 49);

        let ev2 = mode_eigenvalues(2.0, 3).unwrap();
        for (a, b) in ev.iter().zip(&ev2) {
            assert!((a.lambda_k / 4.0 - b.lambda_k).abs() < 1e-9);
        }
        assert!((ev2[1].lambda_k - PI * PI).abs() < 1e-12);
        assert!(ev.windows(2).all(|w| w[0].lambda_k < w[1].lambda_k));
    }

    #[test]
    fn cubic_reference_values() {
        let p = params(1.5, 1.0);
        let c = characteristic_cubic(&p, 0.0).unwrap();
        assert!((c.b - 10.65).abs() < 1e-12);
        assert!((c.c - 1.575).abs() < 1e-12);
        assert!((c.d - 0.25).abs() < 1e-12);
        assert!((c.hurwitz() - 16.52375).abs() < 1e-10);
        assert!(routh_hurwitz(c.b, c.c, c.d));

        let p1 = params(1.0, 1.0);
        assert_eq!(characteristic_cubic(&p1, 0.0).unwrap().d, 0.0);
    }

    #[test]
    fn coefficients_grow_with_lambda() {
        let p = params(1.5, 1.0);
        let lo = characteristic_cubic(&p, 10.0).unwrap();
        let hi = characteristic_cubic(&p, 1e4).unwrap();
        assert!(hi.b > lo.b && hi.c > lo.c && hi.d > lo.d);
        // linear growth: second differences vanish
        let mid = characteristic_cubic(&p, 0.5 * (10.0 + 1e4)).unwrap();
        assert!((2.0 * mid.c - lo.c - hi.c).abs() < 1e-9 * hi.c);
    }

    #[test]
    fn rejects_heterogeneous_and_bad_input() {
        let spec = GridSpec::new(8, 1.0).unwrap();
        let r0 = ScalarField::from_index_fn(spec, |i, _| 1.0 + i as f64 * 0.1);
        let p = ModelParams::from_r0(&r0, Rates::reference()).unwrap();
        assert!(matches!(characteristic_cubic(&p, 0.0), Err(Error::Heterogeneous(_))));
        assert!(stability_report(&p, 4, Spectrum::Continuous).is_err());
        assert!(characteristic_cubic(&params(1.5, 1.0), -1.0).is_err());
        assert!(stability_report(&params(0.9, 1.0), 4, Spectrum::Continuous).is_err());
        assert!(stability_report(&params(1.0, 1.0), 4, Spectrum::Continuous).is_err());
    }

    #[test]
    fn routh_hurwitz_examples() {
        assert!(routh_hurwitz(10.65, 1.575, 0.25));
        let v = routh_hurwitz_verdict(1.0, 1.0, 1.0);
        assert!(!v.pass && v.marginal);
        // R0 < 1 at lambda_k = 0 gives d < 0
        let c = cubic_for(&Rates::reference(), 0.8, 0.0);
        assert!(c.d < 0.0);
        assert!(!routh_hurwitz(c.b, c.c, c.d));
        let v = routh_hurwitz_verdict(2.0, 3.0, 0.0);
        assert!(!v.pass && v.marginal);
    }

    #[test]
    fn vieta_and_matrix_roots() {
        let p = params(1.5, 1.0);
        let m = mode_matrix_roots(&p, 0.0).unwrap();
        let sum: Complex64 = m.roots.iter().sum();
        let prod: Complex64 = m.roots.iter().product();
        assert!((sum.re + 10.65).abs() < 1e-12 && sum.im.abs() < 1e-12);
        assert!((prod.re + 0.25).abs() < 1e-12 && prod.im.abs() < 1e-12);
        assert!(m.mismatch < 1e-8);

        let p1 = params(1.0, 1.0);
        let m = mode_matrix_roots(&p1, 0.0).unwrap();
        assert!(m.roots.iter().any(|z| z.norm() < 1e-12));
    }

    #[test]
    fn large_mode_root_follows_diffusion() {
        let p = params(1.5, 1.0);
        let r = Rates::reference();
        let lk = 1e6;
        let m = mode_matrix_roots(&p, lk).unwrap();
        let target = -(r.mu_v + r.d_v * lk);
        let nearest = m.roots.iter().map(|z| (z.re - target).abs() / lk).fold(f64::INFINITY, f64::min);
        assert!(nearest < 1e-6);
        assert!(m.mismatch < 1e-8, "{}", m.mismatch);
    }

    #[test]
    fn companion_matches_mode_matrix_on_random_draws() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let base = Rates::reference();
        for _ in 0..100 {
            let mut f = || rng.gen_range(0.5..1.5);
            let r = Rates {
                gamma: base.gamma * f(),
                burst_size: base.burst_size * f(),
                mu_t: base.mu_t * f(),
                mu_i: base.mu_i * f(),
                mu_v: base.mu_v * f(),
                d_v: base.d_v * f(),
            };
            let r0 = rng.gen_range(1.01..10.0);
            let lk = rng.gen_range(0.0..1e4);
            let a = cubic_roots(&cubic_for(&r, r0, lk));
            let b = mode_matrix_eigenvalues(&r, r0, lk);
            assert!(root_mismatch(&a, &b) < 1e-8);
        }
    }

    #[test]
    fn reference_report_is_stable() {
        let p = params(1.5, 1.0);
        let rep = stability_report(&p, 100, Spectrum::Continuous).unwrap();
        assert!(rep.verdict && rep.all_evaluated_stable && rep.consistent);
        assert!(rep.k0_stable);
        assert!(rep.first_unstable.is_none());
        assert!(rep.tail.covered);
        assert_eq!(rep.essential, [-0.5, -0.1 * 1.5]);
        assert_eq!(rep.modes.len(), 101 * 102 / 2);
        assert_eq!(rep.modes[0].mode, (0, 0));
        let c0 = cubic_for(&Rates::reference(), p.constant_r0().unwrap(), 0.0);
        assert_eq!(rep.modes[0].cubic, c0);
        let total: usize = rep.modes.iter().map(|m| m.multiplicity).sum();
        assert_eq!(total, (2 * 100 + 1) * (2 * 100 + 1));
    }

    #[test]
    fn k0_verdict_ignores_diffusivity() {
        let spec = GridSpec::new(8, 1.0).unwrap();
        let mut r = Rates::reference();
        let a = stability_report(&ModelParams::constant(spec, r.alpha_for_r0(1.5), r).unwrap(), 2, Spectrum::Continuous)
            .unwrap();
        r.d_v = 1e-6;
        let b = stability_report(&ModelParams::constant(spec, r.alpha_for_r0(1.5), r).unwrap(), 2, Spectrum::Continuous)
            .unwrap();
        assert_eq!(a.modes[0].cubic, b.modes[0].cubic);
        assert_eq!(a.k0_stable, b.k0_stable);
    }

    #[test]
    fn grid_spectra() {
        let p = params(2.0, 1.0);
        let spectral = stability_report(&p, 100, Spectrum::Grid { n: 16, mode: LaplacianMode::Spectral }).unwrap();
        assert_eq!(spectral.modes.len(), 9 * 10 / 2);
        let stencil = stability_report(&p, 100, Spectrum::Grid { n: 16, mode: LaplacianMode::Stencil5 }).unwrap();
        let (a, b) = (spectral.modes[1].lambda_k, stencil.modes[1].lambda_k);
        assert!(b < a && (a - b) / a < 0.02);
        assert!(spectral.verdict && stencil.verdict);
    }

    #[test]
    fn csv_layout() {
        let p = params(1.5, 1.0);
        let rep = stability_report(&p, 3, Spectrum::Continuous).unwrap();
        let mut buf = Vec::new();
        write_stability_csv(&rep, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "m1,m2,lambda_k,b,c,d,re_root1,re_root2,re_root3,stable");
        assert_eq!(lines.len(), 1 + 10);
        assert!(lines[1].starts_with("0,0,"));
        assert!(lines[1].ends_with(",1"));
        for l in &lines[1..] {
            let cols: Vec<&str> = l.split(',').collect();
            assert_eq!(cols.len(), 10);
            for c in &cols[2..9] {
                c.parse::<f64>().unwrap();
            }
        }
    }
}
