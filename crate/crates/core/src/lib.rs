//! Pseudo-spectral simulation of the cubic defocusing nonlinear Klein-Gordon
//! equation `u_tt - Δu + u + u³ = 0` on the 3-torus, with the norm machinery
//! and experiment drivers used to probe flow approximation, stability and
//! symplectic non-squeezing numerically.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod flow;
pub mod harness;
pub mod norms;
pub mod random;
pub mod spectral;
pub mod symplectic;

pub use error::{Error, Result};
