//! Numerical laboratory for quasiperiodic discrete Schrödinger operators.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`] — potentials, torus orbits, continued fractions and operator
//!   descriptions shared by everything else.
//! * [`cocycle`] — transfer-matrix products and Lyapunov exponents.
//! * [`spectra`] — finite sections, eigensolution, rational band spectra,
//!   Hofstadter butterfly data and the Aubry duality check.
//! * [`localization`] — eigenfunction decay fits and participation ratios.
//! * [`dynamics`] — wave-packet propagation and transport moments.
//! * [`kickedrotor`] — Floquet evolution of the quantum kicked rotor.
//! * [`harness`] — parameter sweeps and CSV/JSON emission used by the CLI.

// Links the system OpenBLAS/LAPACK used by `linalg`.
extern crate openblas_src;

pub mod cocycle;
pub mod dynamics;
pub mod error;
pub mod harness;
pub mod kickedrotor;
pub mod linalg;
pub mod localization;
pub mod model;
pub mod spectra;

pub use error::{Error, Result};
