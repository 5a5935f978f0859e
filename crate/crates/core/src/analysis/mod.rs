//! Phase-space tomography of mechanical states and figure-data sweeps.

pub mod quadrature;
pub mod sweep;
pub mod wigner;

pub use quadrature::{
    fringe_visibility, quadrature_analytic, quadrature_numeric, theta0, QuadratureAxis, QuadratureDistribution,
};
pub use sweep::{detection_time_candidates, sweep_beta_max, DetectionTime, SweepRow};
pub use wigner::{wigner_analytic, wigner_numeric, PhaseSpaceGrid, WignerField};
