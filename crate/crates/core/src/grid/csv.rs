//! Field CSV format: a `# n=<n> ell=<ell>` header followed by `n` lines of
//! `n` comma-separated values (line `i` holds row `i`). Values are written
//! with 17 significant digits so a write/read cycle is bit-exact.

use std::io::{BufRead, Write};

use super::{GridSpec, ScalarField};
use crate::error::{Error, Result};

pub fn write_field_csv<W: Write>(field: &ScalarField, mut out: W) -> Result<()> {
    let spec = field.spec();
    writeln!(out, "# n={} ell={}", spec.n(), spec.ell())?;
    for row in field.values().chunks(spec.n()) {
        let line: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}

fn parse_header(line: &str) -> Result<GridSpec> {
    let body = line
        .trim()
        .strip_prefix('#')
        .ok_or_else(|| Error::Parse(format!("field header must start with '#': {line:?}")))?;
    let mut n = None;
    let mut ell = None;
    for token in body.split_whitespace() {
        match token.split_once('=') {
            Some(("n", v)) => {
                n = Some(v.parse::<usize>().map_err(|e| Error::Parse(format!("n: {e}")))?)
            }
            Some(("ell", v)) => {
                ell = Some(v.parse::<f64>().map_err(|e| Error::Parse(format!("ell: {e}")))?)
            }
            _ => return Err(Error::Parse(format!("unexpected header token {token:?}"))),
        }
    }
    match (n, ell) {
        (Some(n), Some(ell)) => GridSpec::new(n, ell),
        _ => Err(Error::Parse("field header needs both n= and ell=".into())),
    }
}

pub fn read_field_csv<R: BufRead>(input: R) -> Result<ScalarField> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty field file".into()))??;
    let spec = parse_header(&header)?;
    let mut values = Vec::with_capacity(spec.len());
    let mut rows = 0;
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        rows += 1;
        let before = values.len();
        for cell in line.split(',') {
            let v = cell
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("row {rows}: {e} in {cell:?}")))?;
            values.push(v);
        }
        if values.len() - before != spec.n() {
            return Err(Error::Parse(format!(
                "row {rows} has {} values, expected {}",
                values.len() - before,
                spec.n()
            )));
        }
    }
    if rows != spec.n() {
        return Err(Error::Parse(format!("expected {} rows, found {rows}", spec.n())));
    }
    ScalarField::from_values(spec, values)
}
