//! Finite-rank transfer operators for closed and open interval maps.

mod grid;
mod matrix;
mod spectral;

pub use grid::{UlamGrid, DEFAULT_MARKOV_CAP};
pub use matrix::{assemble_markov_exact, assemble_markov_for_hole, assemble_ulam, MatrixKind, TransferMatrix};
pub use spectral::{
    escape_rate, leading_triple, SpectralSummary, SpectralTriple, DEFAULT_MAX_ITER, DEFAULT_TOL,
};
pub(crate) use spectral::recurrent_components;
