//! Candidate detection times around the first amplitude peak, where the
//! two cat weights have equal magnitude.

use catforge::analysis::detection_time_candidates;
use catforge::SystemParams;

fn main() {
    for omega_m in [20.0, 40.0, 100.0] {
        let p = SystemParams::tuned(omega_m, 1.5271, 1, 1.0);
        let d = p.derive();
        let t0 = d.t0().unwrap();
        let best = detection_time_candidates(&p, &d, t0, 0.5)
            .into_iter()
            .max_by(|a, b| a.beta_abs.total_cmp(&b.beta_abs))
            .expect("candidate near t0");
        println!("omega_m = {omega_m:>5}: t0 = {t0:.4}, t_d = {:.4}, |beta| = {:.4}", best.t, best.beta_abs);
    }
}
