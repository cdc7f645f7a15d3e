//! Flat `key = value` scenario files.
//!
//! One assignment per line; `#` starts a comment; blank lines are skipped.
//! Keys outside [`KEYS`] and repeated keys are rejected. Relative paths are
//! resolved against the scenario file's directory.

use std::collections::BTreeMap;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use virodyn::dynamics::Site;
use virodyn::grid::read_field_csv;
use virodyn::homogenize::{read_cell_csv, tile, UnitCell};
use virodyn::random::random_r0_field;
use virodyn::{GridSpec, ModelParams, Rates, ScalarField};

use crate::CliError;

/// Every key a scenario may set.
pub const KEYS: &[&str] = &[
    "gamma",
    "N",
    "mu_T",
    "mu_I",
    "mu_V",
    "d_V",
    "ell",
    "n",
    "seed",
    "alpha.mode",
    "alpha.value",
    "alpha.r0",
    "alpha.path",
    "alpha.quantity",
    "cell.path",
    "cell.epsilon",
    "random.lo",
    "random.hi",
    "random.source_fraction",
    "eigen.tol",
    "eigen.max_iter",
    "steady.tol",
    "steady.max_iter",
    "evolve.dt",
    "evolve.t_end",
    "evolve.scheme",
    "evolve.diffusion",
    "evolve.record_every",
    "evolve.snapshots",
    "evolve.probes",
    "evolve.inoculum.site",
    "evolve.inoculum.amount",
    "evolve.inoculum.width",
    "stability.max_index",
    "stability.spectrum",
    "homogenize.epsilons",
    "homogenize.resolution",
    "sweep.r0_max",
    "sweep.count",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    entries: BTreeMap<String, String>,
    base: PathBuf,
}

fn input(msg: impl Into<String>) -> CliError {
    CliError::Input(msg.into())
}

impl Scenario {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| input(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, base)
    }

    pub fn parse(text: &str, base: PathBuf) -> Result<Self, CliError> {
        let mut entries = BTreeMap::new();
        for (k, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| input(format!("line {}: expected key = value, got {line:?}", k + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                return Err(input(format!("line {}: unknown key {key:?}", k + 1)));
            }
            if value.is_empty() {
                return Err(input(format!("line {}: empty value for {key}", k + 1)));
            }
            if entries.insert(key.to_string(), value.to_string()).is_some() {
                return Err(input(format!("line {}: duplicate key {key}", k + 1)));
            }
        }
        Ok(Self { entries, base })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    fn require(&self, key: &str) -> Result<&str, CliError> {
        self.get(key).ok_or_else(|| input(format!("missing required key {key}")))
    }

    pub fn f64_opt(&self, key: &str) -> Result<Option<f64>, CliError> {
        self.get(key)
            .map(|v| {
                v.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| input(format!("{key}: expected a finite number, got {v:?}")))
            })
            .transpose()
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64, CliError> {
        Ok(self.f64_opt(key)?.unwrap_or(default))
    }

    pub fn f64_req(&self, key: &str) -> Result<f64, CliError> {
        self.require(key)?;
        Ok(self.f64_opt(key)?.expect("present"))
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize, CliError> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse::<usize>()
                .map_err(|_| input(format!("{key}: expected a non-negative integer, got {v:?}"))),
        }
    }

    pub fn bool_or(&self, key: &str, default: bool) -> Result<bool, CliError> {
        match self.get(key) {
            None => Ok(default),
            Some("true") => Ok(true),
            Some("false") => Ok(false),
            Some(v) => Err(input(format!("{key}: expected true or false, got {v:?}"))),
        }
    }

    /// A comma-separated list of numbers.
    pub fn f64_list(&self, key: &str) -> Result<Option<Vec<f64>>, CliError> {
        self.get(key)
            .map(|v| {
                v.split(',')
                    .map(|s| {
                        let s = s.trim();
                        parse_number(s).ok_or_else(|| input(format!("{key}: bad number {s:?}")))
                    })
                    .collect()
            })
            .transpose()
    }

    fn path(&self, key: &str) -> Result<Option<PathBuf>, CliError> {
        Ok(self.get(key).map(|v| self.base.join(v)))
    }

    pub fn seed(&self) -> Result<u64, CliError> {
        match self.get("seed") {
            None => Ok(0),
            Some(v) => v
                .parse::<u64>()
                .map_err(|_| input(format!("seed: expected a non-negative integer, got {v:?}"))),
        }
    }

    pub fn rates(&self) -> Result<Rates, CliError> {
        let r = Rates {
            gamma: self.f64_req("gamma")?,
            burst_size: self.f64_req("N")?,
            mu_t: self.f64_req("mu_T")?,
            mu_i: self.f64_req("mu_I")?,
            mu_v: self.f64_req("mu_V")?,
            d_v: self.f64_req("d_V")?,
        };
        r.validate().map_err(|e| input(e.to_string()))?;
        Ok(r)
    }

    pub fn grid(&self) -> Result<GridSpec, CliError> {
        let n = self.usize_or("n", 64)?;
        let ell = self.f64_or("ell", 1.0)?;
        GridSpec::new(n, ell).map_err(|e| input(e.to_string()))
    }

    fn mode(&self) -> Result<&str, CliError> {
        self.require("alpha.mode")
    }

    /// The unit cell named by `cell.path`, or the built-in reference cell.
    pub fn cell(&self) -> Result<UnitCell, CliError> {
        match self.path("cell.path")? {
            None => Ok(UnitCell::reference()),
            Some(p) => {
                let f = fs::File::open(&p).map_err(|e| input(format!("cannot read {}: {e}", p.display())))?;
                read_cell_csv(BufReader::new(f)).map_err(|e| input(format!("{}: {e}", p.display())))
            }
        }
    }

    /// The random `R0` map described by the `random.*` keys and `seed`.
    pub fn random_r0(&self) -> Result<ScalarField, CliError> {
        let lo = self.f64_or("random.lo", 0.1)?;
        let hi = self.f64_or("random.hi", 5.0)?;
        let frac = self.f64_req("random.source_fraction")?;
        random_r0_field(self.grid()?, self.seed()?, lo, hi, frac).map_err(|e| input(e.to_string()))
    }

    /// Model parameters from `alpha.mode` and the grid and rate keys.
    pub fn params(&self) -> Result<ModelParams, CliError> {
        let rates = self.rates()?;
        let spec = self.grid()?;
        let bad = |e: virodyn::Error| input(e.to_string());
        match self.mode()? {
            "constant" => match (self.f64_opt("alpha.value")?, self.f64_opt("alpha.r0")?) {
                (Some(a), None) => ModelParams::constant(spec, a, rates).map_err(bad),
                (None, Some(r0)) => ModelParams::constant(spec, rates.alpha_for_r0(r0), rates).map_err(bad),
                (None, None) => Err(input("alpha.mode = constant needs alpha.value or alpha.r0")),
                (Some(_), Some(_)) => Err(input("set only one of alpha.value and alpha.r0")),
            },
            "csv" => {
                let p = self.path("alpha.path")?.ok_or_else(|| input("missing required key alpha.path"))?;
                let f = fs::File::open(&p).map_err(|e| input(format!("cannot read {}: {e}", p.display())))?;
                let field = read_field_csv(BufReader::new(f)).map_err(|e| input(format!("{}: {e}", p.display())))?;
                if field.spec() != spec {
                    return Err(input(format!(
                        "{} holds a {}x{} grid with ell = {}, the scenario asks for {}x{} with ell = {}",
                        p.display(),
                        field.spec().n(),
                        field.spec().n(),
                        field.spec().ell(),
                        spec.n(),
                        spec.n(),
                        spec.ell()
                    )));
                }
                match self.get("alpha.quantity").unwrap_or("alpha") {
                    "alpha" => ModelParams::new(field, rates).map_err(bad),
                    "r0" => ModelParams::from_r0(&field, rates).map_err(bad),
                    q => Err(input(format!("alpha.quantity must be alpha or r0, got {q:?}"))),
                }
            }
            "cell" => {
                let eps = self.f64_req("cell.epsilon")?;
                let r0 = tile(&self.cell()?, eps, spec).map_err(bad)?;
                ModelParams::from_r0(&r0, rates).map_err(bad)
            }
            "random" => ModelParams::from_r0(&self.random_r0()?, rates).map_err(bad),
            m => Err(input(format!(
                "alpha.mode must be constant, csv, cell or random, got {m:?}"
            ))),
        }
    }

    /// Probe sites from `evolve.probes`, written `i:j;i:j`.
    pub fn probes(&self) -> Result<Vec<Site>, CliError> {
        match self.get("evolve.probes") {
            None => Ok(Vec::new()),
            Some(v) => v.split(';').map(|s| parse_site("evolve.probes", s.trim())).collect(),
        }
    }

    pub fn site(&self, key: &str) -> Result<Option<Site>, CliError> {
        self.get(key).map(|v| parse_site(key, v)).transpose()
    }
}

/// Decimal or `a/b` fraction.
fn parse_number(s: &str) -> Option<f64> {
    let v = match s.split_once('/') {
        Some((a, b)) => a.trim().parse::<f64>().ok()? / b.trim().parse::<f64>().ok()?,
        None => s.parse::<f64>().ok()?,
    };
    v.is_finite().then_some(v)
}

fn parse_site(key: &str, s: &str) -> Result<Site, CliError> {
    s.split_once(':')
        .and_then(|(i, j)| Some((i.trim().parse().ok()?, j.trim().parse().ok()?)))
        .ok_or_else(|| input(format!("{key}: expected a site i:j, got {s:?}")))
}
