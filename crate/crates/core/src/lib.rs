//! Simulation laboratory for the minimal Surface-17 error-correction
//! experiment: one standard syndrome round followed by a transversal readout.
//!
//! The crate is organised bottom-up:
//!
//! * [`code_model`]: geometry, stabilizers, logical operators and schedule.
//! * [`noise`]: Pauli and Lindblad-derived noise channels.
//! * [`circuit`]: the experiment as an ordered list of noise locations and gates.
//! * [`frame`]: Pauli-frame Monte Carlo for Pauli-channel noise.
//! * [`trajectory`]: statevector simulation with stochastic Kraus unraveling.
//! * [`decoders`]: lookup-table and Tomita–Svore decoding, fidelities.
//! * [`experiment`]: fidelities, success criteria, threshold searches, sweeps.

pub mod circuit;
pub mod code_model;
pub mod decoders;
pub mod error;
pub mod experiment;
pub mod frame;
pub mod noise;
pub mod parallel;
pub mod pauli;
pub mod rng;
pub mod stats;
pub mod textfmt;
pub mod trajectory;

pub use error::{Error, Result};
