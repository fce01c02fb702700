//! Explicit Berry–Esseen style bounds for the combinatorial central limit
//! theorem, together with exact and Monte Carlo verification of `Δ_n`.

pub mod bounds;
pub mod cli;
pub mod dist;
pub mod error;
pub mod exact;
pub mod matrix;
pub mod mc;
pub mod numeric;
pub mod proof_lab;
pub mod quadrature;

pub use error::{Error, Result};
