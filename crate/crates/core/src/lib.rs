//! Simulation of mechanical cat states generated in a two-cavity
//! optomechanical system with sinusoidally modulated photon hopping.
//!
//! The crate covers the closed single-photon dynamics ([`closed`]), the
//! lossy master-equation dynamics ([`open`]), phase-space tomography and
//! parameter sweeps ([`analysis`]), and a configuration-driven runner
//! ([`config`], [`run`]) used by the `catforge` binary.

pub mod analysis;
pub mod closed;
pub mod config;
pub mod error;
pub mod fock;
pub mod model;
pub mod open;
pub mod run;
pub mod solver;
pub mod trajectory;

pub use closed::{evolve_closed, SinglePhotonState};
pub use error::{SolverError, StateError};
pub use fock::FockCutoff;
pub use model::{CatState, DerivedModulation, MechanicalState, SystemParams};
pub use open::{evolve_open, PhotonSector, SystemDensityMatrix};
pub use solver::SolverConfig;
