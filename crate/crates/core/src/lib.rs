//! Mean-field dynamics, phase reduction, torus conjugacy, spectra and an
//! exact finite-N oracle for a collectively driven-dissipative four-level
//! ensemble with two interfering transition branches.

pub mod dynamics;
pub mod error;
pub mod io;
pub mod lyapunov;
pub mod model;
pub mod ode;
pub mod phase;
pub mod qoracle;
pub mod scalar;
pub mod spectra;
pub mod torus;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type ModelParams64 = model::ModelParams<f64>;
pub type ModelParams32 = model::ModelParams<f32>;
pub type MeanFieldState64 = model::MeanFieldState<f64>;
pub type MeanFieldState32 = model::MeanFieldState<f32>;
pub type BlochVector64 = model::BlochVector<f64>;
pub type BlochVector32 = model::BlochVector<f32>;
pub type PhaseSystem64 = phase::PhaseSystem<f64>;
pub type PhaseSystem32 = phase::PhaseSystem<f32>;
pub type TorusField64 = torus::TorusField<f64>;
pub type TorusField32 = torus::TorusField<f32>;
pub type CollectiveOperators64 = qoracle::CollectiveOperators<f64>;
pub type DensityMatrix64 = qoracle::DensityMatrix<f64>;
pub type QuantumSeries64 = qoracle::QuantumSeries<f64>;
