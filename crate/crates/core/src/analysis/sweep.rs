use std::f64::consts::PI;
use std::io::Write;

use serde::Serialize;

use crate::model::{bessel_j, beta_of_t, mu_of_t, DerivedModulation, SystemParams};
use crate::trajectory::{fmt_f64, CsvRow};

#[derive(Copy, Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub xi: f64,
    pub delta: f64,
    pub g: f64,
    pub beta_max: f64,
}

impl CsvRow for SweepRow {
    fn header() -> &'static [&'static str] {
        &["xi", "delta", "g", "beta_max"]
    }

    fn fields(&self) -> Vec<String> {
        vec![fmt_f64(self.xi), fmt_f64(self.delta), fmt_f64(self.g), fmt_f64(self.beta_max)]
    }
}

/// `|beta|_max = g0 J_{2 n0}(2 xi) / delta` over every `(xi, delta)` pair,
/// `xi` outermost.
pub fn sweep_beta_max(xi_list: &[f64], delta_grid: &[f64], n0: u32, g0: f64) -> Vec<SweepRow> {
    xi_list
        .iter()
        .flat_map(|&xi| {
            let g = g0 * bessel_j(2 * n0, 2.0 * xi) / 2.0;
            delta_grid.iter().map(move |&delta| SweepRow { xi, delta, g, beta_max: 2.0 * g.abs() / delta })
        })
        .collect()
}

/// A time at which the two cat weights are equal in magnitude.
#[derive(Copy, Clone, Debug, PartialEq, Serialize)]
pub struct DetectionTime {
    pub t: f64,
    pub mu: f64,
    pub beta_abs: f64,
}

impl CsvRow for DetectionTime {
    fn header() -> &'static [&'static str] {
        &["t", "mu", "beta_abs"]
    }

    fn fields(&self) -> Vec<String> {
        vec![fmt_f64(self.t), fmt_f64(self.mu), fmt_f64(self.beta_abs)]
    }
}

fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
    let mut f_lo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return mid;
        }
        if (f_mid > 0.0) == (f_lo > 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi.abs().max(1.0) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Times in `[center - half_width, center + half_width]` where
/// `mu(t) = (k + 1/2) pi`, i.e. `|tan(mu/2)| = 1`, found by bisection on
/// each monotone branch of `sin(omega_0 t)`. Empty when `2|xi| < pi/2`.
pub fn detection_time_candidates(
    params: &SystemParams,
    d: &DerivedModulation,
    center: f64,
    half_width: f64,
) -> Vec<DetectionTime> {
    let amp = 2.0 * params.xi.abs();
    if amp < 0.5 * PI {
        return Vec::new();
    }
    let w0 = params.omega_0;
    let lo = (center - half_width).max(0.0);
    let hi = center + half_width;
    let k_max = ((amp / PI) - 0.5).floor() as i64;
    let levels: Vec<f64> = (-k_max - 1..=k_max).map(|k| (k as f64 + 0.5) * PI).collect();

    // branch edges: extrema of sin(w0 t) at (j + 1/2) pi / w0
    let first = ((lo * w0 / PI) - 0.5).floor() as i64;
    let mut out = Vec::new();
    let mut j = first;
    loop {
        let a = ((j as f64 + 0.5) * PI / w0).max(lo);
        let b = ((j as f64 + 1.5) * PI / w0).min(hi);
        if a >= hi {
            break;
        }
        if b > a {
            let (ma, mb) = (mu_of_t(params, a), mu_of_t(params, b));
            for &level in &levels {
                if (ma - level) * (mb - level) <= 0.0 && ma != mb {
                    let t = bisect(|t| mu_of_t(params, t) - level, a, b);
                    out.push(DetectionTime {
                        t,
                        mu: mu_of_t(params, t),
                        beta_abs: beta_of_t(d, params.omega_m, t).norm(),
                    });
                }
            }
        }
        j += 1;
    }
    out.sort_by(|x, y| x.t.total_cmp(&y.t));
    out.dedup_by(|x, y| (x.t - y.t).abs() < 1e-12);
    out
}

/// CSV table with a header row.
pub fn write_table<R: CsvRow, W: Write>(out: W, rows: &[R]) -> csv::Result<()> {
    crate::trajectory::write_csv(out, rows)
}
