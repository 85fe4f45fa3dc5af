//! Numerical laboratory for second-gradient Sobolev mappings.
//!
//! The crate builds explicit mappings (radial, folding, Ball-type,
//! dense-critical, and a Cantor-type squeeze), evaluates their derivatives
//! and Jacobians in closed form, integrates `|D²f|^q` and `|J_f|^{-a}` with
//! adaptive cubature, estimates box-counting dimensions of near-critical
//! sets, and classifies `(n, q, a, d)` tuples against the known sharp
//! regularity thresholds.

pub mod error;
pub mod numeric;
pub mod regimes;

pub use error::{Error, Result};
pub mod maps;
pub mod cantor;
pub mod calculus;
pub mod quadrature;
pub mod dimension;
pub mod verify;
pub mod mapspec;
