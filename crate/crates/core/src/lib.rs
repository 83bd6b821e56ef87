//! Certified ground-state bounds for spin-1/2 Heisenberg-type lattice models.
//!
//! The pipeline builds a Hamiltonian as a [`pauli::PauliPolynomial`], picks a
//! sparse monomial basis, assembles a symmetry-reduced moment-matrix
//! relaxation, converts it to a real semidefinite program and solves it with
//! a first-order splitting method. The dual solution is repaired into a
//! rigorous lower bound. Observables are bounded from both sides by
//! constraining the energy to a certified window; exact diagonalization
//! provides ground truth at small sizes.

pub mod basis;
pub mod exact;
pub mod lattice;
pub mod model;
pub mod pauli;
pub mod relaxation;
pub mod sdp;

use thiserror::Error;

pub use basis::{BasisParams, BasisVariant, MonomialBasis, Signature};
pub use lattice::{Lattice, LatticeKind, NeighborRange, Shift, SiteId};
pub use model::{ModelSpec, Observable, TermKind};
pub use pauli::{Axis, AxisPermutation, PauliPolynomial, PauliString, Phase, SignSubstitution};
pub use relaxation::{RelaxationProblem, SymmetryOptions};
pub use sdp::{ConicProblem, SolveOptions, SolveResult, SolveSide, SolveStatus};

#[derive(Debug, Error)]
pub enum Error {
    #[error("site {site} out of range for a lattice with {sites} sites")]
    SiteOutOfRange { site: usize, sites: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("{0}")]
    NotRepresentable(String),
    #[error("structure violation: {0}")]
    Structure(String),
    #[error("solver: {0}")]
    Solver(String),
    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
