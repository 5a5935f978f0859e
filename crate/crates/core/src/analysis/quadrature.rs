use std::cmp::Ordering;
use std::f64::consts::{FRAC_PI_2, SQRT_2};
use std::io::Write;

use ndarray::Array2;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::StateError;
use crate::fock::oscillator_eigenfunctions;
use crate::model::CatState;
use crate::trajectory::fmt_f64;

/// Values below this magnitude are written as zero when negative.
pub const CLAMP_LIMIT: f64 = 1e-10;

const PI_QUARTER_INV: f64 = 0.751_125_544_464_942_5;

/// Rotation angle and sample points of the quadrature
/// `X(theta) = (b e^{-i theta} + b^dag e^{i theta}) / sqrt2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureAxis {
    pub theta: f64,
    pub x_values: Vec<f64>,
}

impl QuadratureAxis {
    pub fn new(theta: f64, x_values: Vec<f64>) -> Result<Self, StateError> {
        if x_values.len() < 2 || x_values.windows(2).any(|w| w[1].partial_cmp(&w[0]) != Some(Ordering::Greater)) {
            return Err(StateError::Grid("quadrature grid must be strictly increasing"));
        }
        Ok(Self { theta, x_values })
    }

    pub fn uniform(theta: f64, x_min: f64, x_max: f64, n: usize) -> Result<Self, StateError> {
        if n < 2 {
            return Err(StateError::Grid("quadrature grid needs at least two points"));
        }
        let h = (x_max - x_min) / (n - 1) as f64;
        Self::new(theta, (0..n).map(|k| x_min + k as f64 * h).collect())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureDistribution {
    pub theta: f64,
    pub x: Vec<f64>,
    pub p: Vec<f64>,
}

impl QuadratureDistribution {
    pub fn integral(&self) -> f64 {
        self.x.windows(2).zip(self.p.windows(2)).map(|(x, p)| 0.5 * (x[1] - x[0]) * (p[0] + p[1])).sum()
    }

    /// CSV with columns `x, P`; tiny negative values are written as zero.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "P"])?;
        for (x, p) in self.x.iter().zip(&self.p) {
            let p = if *p < 0.0 && *p > -CLAMP_LIMIT { 0.0 } else { *p };
            w.write_record([fmt_f64(*x), fmt_f64(p)])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Quadrature angle perpendicular to the line joining `beta` and `-beta`.
pub fn theta0(beta: C64) -> f64 {
    beta.arg() - FRAC_PI_2
}

/// `<X(theta)|alpha>`: the coherent-state wavefunction at amplitude
/// `alpha e^{-i theta}`.
fn coherent_wavefunction(alpha: C64, theta: f64, x: f64) -> C64 {
    let a = alpha * C64::from_polar(1.0, -theta);
    let exponent = -0.5 * x * x + SQRT_2 * a * x - 0.5 * a * a - 0.5 * a.norm_sqr();
    PI_QUARTER_INV * exponent.exp()
}

/// Distribution of `X(theta)` for a cat state, from the closed-form
/// coherent-state wavefunctions.
pub fn quadrature_analytic(state: &CatState, axis: &QuadratureAxis) -> QuadratureDistribution {
    let norm = state.norm_sqr();
    let p = axis
        .x_values
        .iter()
        .map(|&x| {
            let psi = state.weight_plus * coherent_wavefunction(state.beta, axis.theta, x)
                + state.weight_minus * coherent_wavefunction(-state.beta, axis.theta, x);
            psi.norm_sqr() / norm
        })
        .collect();
    QuadratureDistribution { theta: axis.theta, x: axis.x_values.clone(), p }
}

/// `P(X) = sum_pq rho_pq psi_p(X) psi_q(X) e^{i theta (q - p)}`.
pub fn quadrature_numeric(rho: &Array2<C64>, axis: &QuadratureAxis) -> QuadratureDistribution {
    let m = rho.nrows();
    let phase: Vec<C64> = (0..m).map(|n| C64::from_polar(1.0, -axis.theta * n as f64)).collect();
    let p = axis
        .x_values
        .iter()
        .map(|&x| {
            let psi = oscillator_eigenfunctions(m - 1, x);
            // <X|n> = psi_n(X) e^{-i theta n}
            let ket: Vec<C64> = (0..m).map(|n| phase[n] * psi[n]).collect();
            let mut acc = C64::from(0.0);
            for p in 0..m {
                for q in 0..m {
                    acc += ket[p] * rho[[p, q]] * ket[q].conj();
                }
            }
            acc.re
        })
        .collect();
    QuadratureDistribution { theta: axis.theta, x: axis.x_values.clone(), p }
}

/// `(max - min) / (max + min)` of the distribution over `|X| <= half_width`.
pub fn fringe_visibility(dist: &QuadratureDistribution, half_width: f64) -> f64 {
    let (lo, hi) = dist
        .x
        .iter()
        .zip(&dist.p)
        .filter(|(x, _)| x.abs() <= half_width)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (_, &p)| (lo.min(p), hi.max(p)));
    if hi + lo <= 0.0 {
        return 0.0;
    }
    (hi - lo) / (hi + lo)
}
