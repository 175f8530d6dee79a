//! Robust mean-square stability certificates for open quantum systems whose
//! Hamiltonian is a known quadratic part plus an unknown, sector-bounded,
//! non-quadratic perturbation.
//!
//! The pipeline is:
//!
//! 1. [`model`] holds the nominal linear system in doubled-up form.
//! 2. [`perturbation`] holds the perturbation Hamiltonian as a polynomial
//!    series and evaluates its sector bounds semiclassically.
//! 3. [`certify`] checks the Hurwitz and small-gain conditions, solves the
//!    Riccati-type matrix inequality for a Lyapunov matrix and assembles the
//!    constants of the mean-square bound.
//! 4. [`opa`] specializes everything to the degenerate optical parametric
//!    amplifier.
//! 5. [`focksim`] is a truncated Fock-space oracle for the operator
//!    identities and for the mean-square bound itself.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certify;
pub mod cli;
pub mod error;
pub mod focksim;
pub mod io;
pub mod linalg;
pub mod model;
pub mod opa;
pub mod perturbation;

pub use certify::{certify, StabilityCertificate, Verdict};
pub use error::{Error, Result};
pub use model::{LinearQuantumSystem, StructureMatrices};
pub use opa::OpaParams;
pub use perturbation::{PerturbationSeries, SectorBounds};
