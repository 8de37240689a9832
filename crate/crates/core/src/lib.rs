//! Finite-dimensional Hodge theory for complexes and quasicomplexes of
//! linear maps between Hermitian spaces: Laplacians, harmonic projectors and
//! Green operators, parametrices, reduction of slightly curved sequences to
//! exact complexes, Betti numbers, Euler characteristics, Lefschetz numbers,
//! and pointwise checks of symbol complexes.

pub mod builders;
pub mod cli;
pub mod cohomology;
pub mod error;
pub mod hodge;
pub mod linop;
pub mod quasicomplex;
pub mod reduction;
pub mod symbolcx;

pub use error::{Error, Result};
pub use linop::{CMatrix, InnerProductSpace, LinearOp};
pub use quasicomplex::QuasiComplex;
