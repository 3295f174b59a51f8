//! Regime classification, closed-form profiles, Riesz-potential quadrature,
//! radial ODE comparison and numerical certification for singular solutions of
//! `div(|x|^{-alpha} |grad u|^{m-2} grad u) >= (I_beta * u^p) u^q` in the
//! punctured unit ball.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ansatz;
pub mod cli;
pub mod error;
pub mod exponents;
pub mod grid;
pub mod odesolver;
pub mod quadrature;
pub mod riesz;
pub mod verify;

pub use error::{Error, Result};
