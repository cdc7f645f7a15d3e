//! Seeded random reproductive-ratio maps.
//!
//! The generator is ChaCha8 seeded with `seed_from_u64`. Sites are visited in
//! row-major order and each consumes two `f64` draws from `[0, 1)`: the first
//! decides sink or source, the second places the value.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{GridSpec, ScalarField};

/// Independent per-site `R0`: a source with probability `source_fraction`,
/// drawn uniformly from `(1, hi]`, otherwise a sink drawn from `[lo, 1)`.
pub fn random_r0_field(spec: GridSpec, seed: u64, lo: f64, hi: f64, source_fraction: f64) -> Result<ScalarField> {
    if !(0.0..=1.0).contains(&source_fraction) {
        return Err(Error::InvalidInput(format!(
            "source fraction must lie in [0, 1], got {source_fraction}"
        )));
    }
    if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && lo < 1.0 && hi > 1.0) {
        return Err(Error::InvalidInput(format!(
            "need 0 <= lo < 1 < hi, got lo = {lo}, hi = {hi}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..spec.len())
        .map(|_| {
            let source = rng.gen::<f64>() < source_fraction;
            let u = rng.gen::<f64>();
            if source {
                hi - (hi - 1.0) * u
            } else {
                lo + (1.0 - lo) * u
            }
        })
        .collect();
    ScalarField::from_values(spec, values)
}
