//! Peak displacement `|beta|_max` against detuning for two hopping
//! amplitudes.

use catforge::analysis::sweep_beta_max;

fn main() {
    let deltas: Vec<f64> = (0..10).map(|k| 0.05 + 0.05 * k as f64).collect();
    println!("{:>8} {:>6} {:>10}", "xi", "delta", "|beta|max");
    for row in sweep_beta_max(&[1.5271, 4.9847], &deltas, 1, 1.0) {
        println!("{:8.4} {:6.2} {:10.4}", row.xi, row.delta, row.beta_max);
    }
}
