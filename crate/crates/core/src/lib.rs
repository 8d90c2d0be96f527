//! Pseudospectral simulation of the regularized logarithmic Schrödinger equation on the
//! flat torus, the Madelung (polar) observables of its solutions, and numerical checks of
//! the weak formulation of the isothermal quantum Euler system they induce.

pub mod continuation;
pub mod error;
pub mod grid;
pub mod io;
pub mod log_nls;
pub mod madelung;
pub mod thermo;
pub mod weakform;

pub use continuation::{ContinuationReport, DEFAULT_LADDER};
pub use error::{QhdError, Result};
pub use grid::{ComplexField, ScalarField, TorusGrid, VectorField};
pub use log_nls::{EnergyBreakdown, SolverConfig, WaveState};
pub use madelung::HydroState;
pub use thermo::ThermoParams;
pub use weakform::{MollifierSpec, ResidualReport, TestFunctionSpec};
