#![no_std]
//! Bohmian trajectories in a 3-d anisotropic harmonic oscillator: wavefunctions,
//! guidance flow, nodal-line geometry and chaos indicators.

extern crate alloc;

pub mod chaos;
pub mod flow;
pub mod linalg;
pub mod math;
pub mod nodal;
pub mod ode;
pub mod oscillator;
pub mod powerlaw;

pub use flow::{BaseModel, FlowError, IntegratorSettings, PhasePoint, Trajectory};
pub use linalg::{Mat3, Vec3};
pub use oscillator::{Mode, OscillatorConfig, Superposition, WavefunctionError};
