//! Wigner function of the left-branch mechanical state after a lossless
//! run, compared with the ideal cat.

use catforge::analysis::{wigner_analytic, wigner_numeric, PhaseSpaceGrid};
use catforge::closed::conditional_states;
use catforge::model::target_states;
use catforge::{evolve_closed, FockCutoff, SinglePhotonState, SolverConfig, SystemParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (p, t_d) = (SystemParams::tuned(20.0, 1.5271, 1, 1.0), 12.6664);
    let run = evolve_closed(&SinglePhotonState::bell(FockCutoff::new(30)?), &p, &SolverConfig::default_for(&p, t_d))?;
    let (left, _) = conditional_states(&run.final_state)?;
    let (target, _) = target_states(&p, &p.derive(), t_d);

    let grid = PhaseSpaceGrid::square(4.0, 81)?;
    let sim = wigner_numeric(&left.state.density_matrix(None), &grid);
    let ideal = wigner_analytic(&target, &grid);
    println!("target beta = {:.4}", target.beta);
    for (name, w) in [("simulated", &sim), ("ideal", &ideal)] {
        let peaks: Vec<String> = w.peaks(2, 1.0).iter().map(|z| format!("{z:.2}")).collect();
        println!("{name:>9}: integral {:.6}, min {:.4}, peaks {}", w.integral(), w.min(), peaks.join(", "));
    }
    let mut out = std::io::BufWriter::new(std::fs::File::create("wigner_L.csv")?);
    sim.write_csv(&mut out)?;
    println!("grid written to wigner_L.csv");
    Ok(())
}
