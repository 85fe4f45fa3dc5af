//! Low-level numerical building blocks shared by the rest of the crate.

pub mod bump;
pub mod gauss;
pub mod linalg;
pub mod summation;

pub use summation::NeumaierSum;
