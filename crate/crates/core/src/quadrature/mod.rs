//! Energy integrals, the Cantor per-generation series, the weak
//! Euler–Lagrange residual, and the key-estimate check.

pub mod cubature;
pub mod el;
pub mod energy;
pub mod key_estimate;
pub mod series;

pub use cubature::{integrate, CellKind, CubatureConfig, CubatureOutcome};
pub use el::{el_check, el_residual, support_energy, BumpTest, ElCheck};
pub use energy::{energy, EnergyParams, EnergyReport, GenerationEnergy, Phi, Psi};
pub use key_estimate::{key_estimate_check, JacobianField, KeyEstimateReport, KeyEstimateRow, LinearField, ScalarField};
pub use series::{analytic_terms, cantor_series, series_summary, SeriesSummary};
