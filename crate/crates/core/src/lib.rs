//! Optimal control of radical-pair spin dynamics driven by a filtered
//! magnetic field.
//!
//! The pipeline: build spin operators ([`spin_algebra`]), assemble the
//! Hamiltonian ([`model`]), filter the control and propagate the state and
//! adjoint ensembles ([`dynamics`]), evaluate the singlet yield and its
//! gradient ([`objective`]), and optimize bang-bang controls ([`optimize`]).
//! [`experiments`] scripts the parameter studies and persists results.

// `!(x > 0.0)` is used on purpose so NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod model;
pub mod objective;
pub mod optimize;
pub mod spin_algebra;

pub use error::{Error, Result};
