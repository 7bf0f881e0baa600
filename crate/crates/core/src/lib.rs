//! Exact dynamics of two quantum walkers coupled to a common dephasing bath,
//! with the correlation measures used to study them.

pub mod bessel;
pub mod discord;
pub mod error;
pub mod lattice;
pub mod measures;
pub mod propagator;
pub mod spectral;
pub mod validate;
pub mod wigner;

pub use error::{Error, Result};
pub use lattice::{
    select_window, select_window_with, DensityMatrix, ReducedDensity, SimParams, Window,
    WindowLimits,
};
pub use propagator::{evolve_analytic, evolve_unitary, EvolutionRequest};
