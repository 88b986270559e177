//! Numerical laboratory for commutators of Calderón–Zygmund operators on the
//! Heisenberg group.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod besov;
pub mod commutator;
pub mod error;
pub mod experiments;
pub mod group;
pub mod haar;
pub mod kernels;
pub mod quadrature;
pub mod spectra;
pub mod tiling;

pub use error::{Error, Result};
