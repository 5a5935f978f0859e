//! Rotated-quadrature distribution of the left branch at the fringe
//! angle, and how mechanical heating washes the fringes out.

use catforge::analysis::{fringe_visibility, quadrature_numeric, theta0, QuadratureAxis};
use catforge::open::{reduce_mechanical, PhotonSector};
use catforge::{evolve_open, FockCutoff, SolverConfig, SystemDensityMatrix, SystemParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let t_d = 12.6664;
    for n_th in [1.0, 10.0] {
        let p = SystemParams::tuned(20.0, 1.5271, 1, 1.0).with_losses(0.2, 1e-4, n_th);
        let cfg = SolverConfig::default_for(&p, t_d).with_stride(usize::MAX);
        let run = evolve_open(&SystemDensityMatrix::bell(FockCutoff::new(30)?), &p, &cfg)?;
        let left = reduce_mechanical(&run.final_state, PhotonSector::L)?;
        let theta = theta0(catforge::model::beta_of_t(&p.derive(), p.omega_m, t_d));
        let axis = QuadratureAxis::uniform(theta, -5.0, 5.0, 401)?;
        let dist = quadrature_numeric(&left.state.density_matrix(None), &axis);
        println!("n_th = {n_th:>4}: theta = {theta:.4}, visibility {:.4}", fringe_visibility(&dist, 1.0));
    }
    Ok(())
}
