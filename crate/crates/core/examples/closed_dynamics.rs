//! Lossless evolution from the photon-Bell state: cavity populations,
//! phonon number and cat fidelity up to the first amplitude peak.

use catforge::model::beta_of_t;
use catforge::{evolve_closed, FockCutoff, SinglePhotonState, SolverConfig, SystemParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let p = SystemParams::tuned(20.0, 1.5271, 1, 1.0);
    let d = p.derive();
    let t0 = d.t0().expect("nonzero detuning");
    let cut = FockCutoff::for_amplitude(d.beta_max.unwrap().powi(2));
    let run = evolve_closed(&SinglePhotonState::bell(cut), &p, &SolverConfig::default_for(&p, t0).with_stride(2000))?;

    println!("{:>8} {:>8} {:>8} {:>8} {:>8} {:>8}", "t", "nL", "nR", "nb", "|beta|^2", "F");
    for r in &run.records {
        let b2 = beta_of_t(&d, p.omega_m, r.t).norm_sqr();
        println!("{:8.3} {:8.4} {:8.4} {:8.4} {:8.4} {:8.4}", r.t, r.n_l, r.n_r, r.nb, b2, r.f.unwrap());
    }
    println!("max norm drift {:.1e}", run.summary.max_norm_drift);
    Ok(())
}
