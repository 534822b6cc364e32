// SPDX-License-Identifier: Apache-2.0

//! Simulation of sub-wavelength lithography with entangled photon-number
//! states: state engine, deposition profiles, exposure planning, loss and
//! lower-order absorption, and stochastic film exposure.

// Negated comparisons below deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod deposition;
pub mod error;
pub mod exec;
pub mod export;
pub mod exposure;
pub mod fock;
pub mod imperfections;
pub mod planner;
pub mod presets;

pub use error::{Error, Result};
pub use exec::Exec;
