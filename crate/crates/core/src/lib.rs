//! Scattering theory for discrete-time quantum walks and cellular automata.
//!
//! The crate is `no_std` and only needs `alloc`. Everything here is a pure
//! function of its inputs, so callers are free to evaluate sweeps in parallel.
//!
//! * [`spectral`]: Dirac-walk dispersion, Bloch matrices, resolvents, zone quadrature.
//! * [`lippmann_schwinger`]: finite-rank T-matrix, Born series, improper S-matrix elements.
//! * [`trotter`]: discrete versus continuous scattering on a hopping ring.
//! * [`thirring`]: two-particle Thirring automaton in centre-of-mass coordinates.
//! * [`dyson`]: interaction-picture perturbation theory for the Thirring automaton.
#![no_std]
// `!(x < y)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod dyson;
mod error;
pub mod lippmann_schwinger;
pub mod spectral;
pub mod thirring;
pub mod trotter;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;

pub(crate) const I: C64 = C64::new(0.0, 1.0);
