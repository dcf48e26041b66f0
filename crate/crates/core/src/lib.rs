//! Robust output regulation of periodic disturbances with an internal model
//! of growing dimension.
//!
//! The regulator combines a high-gain term `-sigma e` with a bank of harmonic
//! oscillators at `0, omega_hat, 2 omega_hat, ...` whose outputs are weighted
//! by a decreasing coefficient sequence.

pub mod analysis;
pub mod error;
pub mod format;
pub mod freqdomain;
pub mod internal_model;
pub mod ode;
pub mod plants;
pub mod simulate;
pub mod verify;

pub use error::{RegulatorError, Result};
pub use internal_model::{CoefficientSequence, OscillatorBank, RegulatorConfig, RegulatorState, TailRule};
pub use plants::{example_plant, ExamplePlant, Plant};
pub use simulate::{run, Controller, NoiseModel, SimConfig, Trajectory};
pub use verify::{certify, CertificationReport};
