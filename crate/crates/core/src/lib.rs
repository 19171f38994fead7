//! Simulation and numerical checks for stationary random iterates
//! `X_n = h(ε_n, W_{n-1})` driven by a Markov chain `W_n = F(ε_n, W_{n-1})`.

// `!(x > y)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod blocks;
pub mod cli;
pub mod coupling;
pub mod diagnostics;
pub mod error;
pub mod models;
pub mod quantile;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
