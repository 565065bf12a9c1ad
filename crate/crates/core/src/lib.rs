//! Nonparametric frequency response function identification.
//!
//! The crate covers the whole chain from excitation design to closed-loop
//! MIMO estimates:
//!
//! * [`signals`]: unitary DFT, random-phase multisines, windows and segmentation.
//! * [`sim`]: state-space plants, zero-order-hold discretisation, open and
//!   closed-loop simulation and exact frequency-domain oracles.
//! * [`estimators`]: ETFE, spectral analysis with variance, and the local
//!   polynomial method which also estimates the transient term.
//! * [`closedloop`]: direct and indirect closed-loop estimates, full plant
//!   versus equivalent plant for decentralised MIMO loops.
//! * [`scenario`]: seeded end-to-end studies with CSV/JSON export.
//!
//! All numeric code is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar to `f64`, which is what the scenario runner uses.

pub mod closedloop;
pub mod error;
pub mod estimators;
pub mod scalar;
pub mod scenario;
pub mod signals;
pub mod sim;

pub use error::{FrfError, Result};
pub use scalar::Real;

pub type TimeSeries64 = signals::TimeSeries<f64>;
pub type SpectrumSet64 = signals::SpectrumSet<f64>;
pub type MultisineSpec64 = signals::MultisineSpec<f64>;
pub type StateSpaceModel64 = sim::StateSpaceModel<f64>;
pub type ControllerConfig64 = sim::ControllerConfig<f64>;
pub type SimulationRecord64 = sim::SimulationRecord<f64>;
pub type FrfEstimate64 = estimators::FrfEstimate<f64>;
pub type PowerSpectra64 = estimators::PowerSpectra<f64>;
pub type LocalModelTheta64 = estimators::LocalModelTheta<f64>;
pub type FrmPair64 = closedloop::FrmPair<f64>;

pub type TimeSeries32 = signals::TimeSeries<f32>;
pub type SpectrumSet32 = signals::SpectrumSet<f32>;
pub type StateSpaceModel32 = sim::StateSpaceModel<f32>;
pub type FrfEstimate32 = estimators::FrfEstimate<f32>;
