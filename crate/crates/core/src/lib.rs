//! Fermion-boson lattice models as explicit finite matrices, with the
//! polaron-transform diagonalisation, interaction-picture truncated-Dyson
//! simulation pipeline, block-encoding verification, and closed-form
//! gate-cost evaluation.

extern crate blas_src;

pub mod linalg;
pub mod evolution;
pub mod models;
pub mod polaron;
pub mod operators;
