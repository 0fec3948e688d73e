//! Normalized solutions of `−Δu − Δ_q u = λu + |u|^{p−2}u`, `‖u‖₂ = c`, on
//! radial profiles.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod energy;
pub mod error;
pub mod experiments;
pub mod exponents;
pub mod groundstate;
pub mod ode;
pub mod radial_grid;
pub mod solver;

pub use error::{Error, Result};
