//! Thin-film Stokes Cahn-Hilliard model on a periodic interval: pseudo-spectral
//! evolution, a regularized Galerkin oracle, the equilibrium boundary value
//! problem, and the a-priori minimum-height bound.
//!
//! Everything is generic over [`Real`] (`f32` or `f64`); the `*64` aliases
//! below are what most callers want.

pub mod bounds;
pub mod equilibrium;
pub mod error;
pub mod galerkin;
pub mod grid;
pub mod inequalities;
pub mod linalg;
pub mod model;
pub mod ode;
pub mod quad;
pub mod regularization;
pub mod scalar;
pub mod timestepper;

pub use error::{Error, Result};
pub use grid::{DerivBackend, Field, Grid, Norm};
pub use model::{EnergyBreakdown, Params, State};
pub use regularization::RegularizedFamily;
pub use scalar::Real;
pub use timestepper::{evolve, step, Scheme, SolverConfig, TrajectoryRecord};

/// Crate version, recorded in run metadata.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub type Grid64 = Grid<f64>;
pub type Field64 = Field<f64>;
pub type State64 = State<f64>;
pub type Params64 = Params<f64>;
pub type Grid32 = Grid<f32>;
pub type Field32 = Field<f32>;
pub type State32 = State<f32>;
pub type Params32 = Params<f32>;
