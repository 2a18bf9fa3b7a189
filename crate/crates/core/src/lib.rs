//! Observational entropy for arbitrary (including non-commuting) coarse-grainings,
//! together with exact-diagonalization tooling for a one-dimensional chain of
//! spinless fermions with nearest- and next-nearest-neighbour hopping and
//! interactions.
//!
//! The crate is organised bottom-up:
//!
//! - [`basis`]: fixed-particle-number Fock bases, box partitions and signatures.
//! - [`operators`]: the chain Hamiltonian, quantum states, expectations and
//!   partial traces.
//! - [`spectra`]: dense eigendecomposition, thermal ensembles, density of states.
//! - [`coarse`]: coarse-grainings as (orthonormal frame, column partition) pairs.
//! - [`entropy`]: observational entropy and the derived functionals.
//! - [`dynamics`]: unitary evolution, quenches and initial-state constructors.
//! - [`experiments`]: scenario runner, CSV output and the property suite.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod basis;
pub mod coarse;
pub mod dynamics;
pub mod entropy;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod operators;
pub mod spectra;

pub use error::{Error, Result};

/// Complex amplitude type used for state vectors and density matrices.
pub type C64 = num_complex::Complex64;
