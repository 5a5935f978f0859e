//! Cavity and mechanical losses at the detection time: conditional
//! fidelities and branch probabilities for a few cavity decay rates.

use std::f64::consts::PI;

use catforge::{evolve_open, FockCutoff, SolverConfig, SystemDensityMatrix, SystemParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let t_d = 12.6664;
    println!("{:>8} {:>8} {:>8} {:>9} {:>9}", "gamma_c", "F_L", "F_R", "P_L+P_R", "estimate");
    for gamma_c in [0.05, 0.2] {
        let p = SystemParams::tuned(20.0, 1.5271, 1, 1.0).with_losses(gamma_c, 1e-4, 4.0);
        let cfg = SolverConfig::default_for(&p, t_d).with_stride(usize::MAX);
        let run = evolve_open(&SystemDensityMatrix::bell(FockCutoff::new(30)?), &p, &cfg)?;
        let last = run.records.last().unwrap();
        println!(
            "{gamma_c:8} {:8.5} {:8.5} {:9.5} {:9.5}",
            last.f_l.unwrap(),
            last.f_r.unwrap(),
            last.p_l + last.p_r,
            (-4.0 * PI * gamma_c).exp()
        );
    }
    Ok(())
}
