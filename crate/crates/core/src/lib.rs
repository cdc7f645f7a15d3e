//! Within-host virus dynamics (target cells `T`, infected cells `I`, free
//! virus `V`) on the periodic square `(0, ell)^2` with a spatially varying
//! target-cell production rate `alpha(x)`.
//!
//! The crate is organised bottom-up:
//!
//! - [`grid`]: cell-centred periodic grids, spectral operators, field CSV I/O.
//! - [`model`]: parameters, the local reproductive ratio `R0(x)` and the
//!   closed-form equilibria.
//! - [`eigen`]: the principal eigenvalue `lambda0` of `d_V Δ + μ_V (R0 − 1)`
//!   which decides whether infection persists.
//! - [`steady`]: non-negative steady states through a monotone
//!   upper-solution iteration.
//! - [`dynamics`]: operator-split time integration of the full system and
//!   of the quasi-steady scalar equation.
//! - [`stability`]: Fourier-mode / Routh–Hurwitz stability of the infected
//!   state in a homogeneous environment.
//! - [`homogenize`]: rapidly alternating source/sink media and their
//!   homogenized limit.
//! - [`sweep`], [`random`]: bifurcation sweeps and seeded random `R0` maps.

pub mod dynamics;
pub mod eigen;
pub mod error;
pub mod grid;
pub mod homogenize;
pub mod model;
pub mod random;
pub mod stability;
pub mod steady;
pub mod sweep;

pub use error::{Error, Result};
pub use grid::{GridSpec, LaplacianMode, ScalarField, Spectral};
pub use model::{EquilibriumTriple, ModelParams, Rates};
