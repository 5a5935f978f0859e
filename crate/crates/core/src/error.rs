use thiserror::Error;

use crate::open::PhotonSector;

/// Invalid physical parameters or states.
#[derive(Debug, Error, PartialEq)]
pub enum StateError {
    #[error("Fock cutoff must be at least 1, got {0}")]
    Cutoff(usize),
    #[error("invalid parameter {name} = {value}: {reason}")]
    Param { name: &'static str, value: f64, reason: &'static str },
    #[error("conditional state undefined for sector {sector:?}: probability {probability:e}")]
    UndefinedBranch { sector: PhotonSector, probability: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("invalid grid: {0}")]
    Grid(&'static str),
}

/// Invariant violations that abort a time evolution.
#[derive(Debug, Error, PartialEq)]
pub enum SolverError {
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error("norm drift {drift:e} at t = {t} exceeds 1e-6 (dt = {dt:e}); reduce dt")]
    NormDrift { t: f64, drift: f64, dt: f64 },
    #[error("trace drift {drift:e} at t = {t} exceeds 1e-6 (dt = {dt:e}); reduce dt or raise n_max")]
    TraceDrift { t: f64, drift: f64, dt: f64 },
    #[error("density matrix lost positivity at t = {t}: min eigenvalue {min_eig:e} (dt = {dt:e})")]
    Positivity { t: f64, min_eig: f64, dt: f64 },
    #[error("density matrix lost hermiticity at t = {t}: max |rho - rho^dag| = {error:e}")]
    Hermiticity { t: f64, error: f64 },
    #[error("photon/vacuum coherence {value:e} generated at t = {t}")]
    CoherenceLeak { t: f64, value: f64 },
    #[error("truncation inadequate at t = {t}: tail population {tail:e} with n_max = {n_max}")]
    Truncation { t: f64, tail: f64, n_max: usize },
    #[error(transparent)]
    State(#[from] StateError),
}
