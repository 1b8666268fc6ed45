//! Onboard rail-track safety monitoring.
//!
//! Trackside nodes sample track health, pack it into a 12-bit payload and
//! protect it with a (29,12) double-error-correcting block code. The train
//! receives frames over a lossy Doppler-shifted radio link, corrects them,
//! and decides whether to continue, warn the driver, or brake. [`sim`] ties
//! the pieces into a deterministic fixed-step simulation.

pub mod channel;
pub mod cli;
pub mod codec;
pub mod controller;
pub mod rng;
pub mod sensor;
pub mod sim;

pub use codec::{build_code, min_distance, Codeword, LinearCode, Payload12};
pub use controller::{Controller, Decision};
pub use sim::{run, validate, Scenario};
