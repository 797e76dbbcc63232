//! Finite-volume simulator for the quasilinear Keller–Segel–Navier–Stokes
//! system with porous-medium diffusion and tensor-valued (rotational)
//! chemotactic sensitivity, together with runtime monitors for the
//! functionals that control its boundedness.

mod amg;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod io;
pub mod model;
pub mod ops;
pub mod run;
pub mod scalar;
pub mod scenarios;
pub mod solver;
pub mod stepper;
pub mod sweep;

pub use error::{Error, Result};
pub use grid::{Bc, Grid, MaskKind};
pub use run::{run, RunResult, Termination};
pub use scalar::Real;

pub type Grid64 = grid::Grid<f64>;
pub type ScalarField64 = grid::ScalarField<f64>;
pub type VectorField64 = grid::VectorField<f64>;
pub type ModelParams64 = model::ModelParams<f64>;
pub type SimState64 = stepper::SimState<f64>;

pub type Grid32 = grid::Grid<f32>;
pub type ScalarField32 = grid::ScalarField<f32>;
pub type VectorField32 = grid::VectorField<f32>;
pub type ModelParams32 = model::ModelParams<f32>;
pub type SimState32 = stepper::SimState<f32>;
