use std::f64::consts::FRAC_2_PI;
use std::io::Write;

use ndarray::Array2;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::StateError;
use crate::fock::displacement_matrix_element;
use crate::model::CatState;
use crate::trajectory::fmt_f64;

/// Rectangular grid of complex phase-space points `eta`.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseSpaceGrid {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
    pub n_re: usize,
    pub n_im: usize,
}

impl PhaseSpaceGrid {
    pub fn new(
        re_min: f64,
        re_max: f64,
        im_min: f64,
        im_max: f64,
        n_re: usize,
        n_im: usize,
    ) -> Result<Self, StateError> {
        let g = Self { re_min, re_max, im_min, im_max, n_re, n_im };
        g.validate()?;
        Ok(g)
    }

    /// Square grid `[-half, half]^2` with `n` points per axis.
    pub fn square(half: f64, n: usize) -> Result<Self, StateError> {
        Self::new(-half, half, -half, half, n, n)
    }

    pub fn validate(&self) -> Result<(), StateError> {
        if self.n_re < 2 || self.n_im < 2 {
            return Err(StateError::Grid("at least two points per axis required"));
        }
        if !(self.re_min < self.re_max && self.im_min < self.im_max) {
            return Err(StateError::Grid("bounds must be ordered"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.n_re * self.n_im
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn step_re(&self) -> f64 {
        (self.re_max - self.re_min) / (self.n_re - 1) as f64
    }

    pub fn step_im(&self) -> f64 {
        (self.im_max - self.im_min) / (self.n_im - 1) as f64
    }

    /// Point `k`; the imaginary part varies fastest.
    pub fn point(&self, k: usize) -> C64 {
        let (i, j) = (k / self.n_im, k % self.n_im);
        C64::new(self.re_min + i as f64 * self.step_re(), self.im_min + j as f64 * self.step_im())
    }

    fn eval<F: Fn(C64) -> f64 + Sync>(&self, f: F) -> WignerField {
        let values = (0..self.len()).into_par_iter().map(|k| f(self.point(k))).collect();
        WignerField { grid: *self, values }
    }
}

/// Wigner function sampled on a [`PhaseSpaceGrid`].
#[derive(Clone, Debug, PartialEq)]
pub struct WignerField {
    pub grid: PhaseSpaceGrid,
    pub values: Vec<f64>,
}

impl WignerField {
    /// Trapezoid-rule integral over the grid.
    pub fn integral(&self) -> f64 {
        let g = &self.grid;
        let w = |k: usize, n: usize| if k == 0 || k == n - 1 { 0.5 } else { 1.0 };
        let sum: f64 =
            self.values.iter().enumerate().map(|(k, v)| w(k / g.n_im, g.n_re) * w(k % g.n_im, g.n_im) * v).sum();
        sum * g.step_re() * g.step_im()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Grid points of the `count` largest strict local maxima with
    /// `|eta| >= min_radius`, highest first. A positive radius skips the
    /// interference fringes around the origin.
    pub fn peaks(&self, count: usize, min_radius: f64) -> Vec<C64> {
        let g = &self.grid;
        let at = |i: usize, j: usize| self.values[i * g.n_im + j];
        let mut found: Vec<(f64, C64)> = Vec::new();
        for i in 0..g.n_re {
            for j in 0..g.n_im {
                let v = at(i, j);
                let mut is_max = true;
                for di in -1i64..=1 {
                    for dj in -1i64..=1 {
                        let (ni, nj) = (i as i64 + di, j as i64 + dj);
                        if (di, dj) == (0, 0) || ni < 0 || nj < 0 || ni >= g.n_re as i64 || nj >= g.n_im as i64 {
                            continue;
                        }
                        if at(ni as usize, nj as usize) >= v {
                            is_max = false;
                        }
                    }
                }
                if is_max && g.point(i * g.n_im + j).norm() >= min_radius {
                    found.push((v, g.point(i * g.n_im + j)));
                }
            }
        }
        found.sort_by(|a, b| b.0.total_cmp(&a.0));
        found.into_iter().take(count).map(|(_, p)| p).collect()
    }

    /// CSV with columns `eta_re, eta_im, W`.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["eta_re", "eta_im", "W"])?;
        for (k, v) in self.values.iter().enumerate() {
            let p = self.grid.point(k);
            w.write_record([fmt_f64(p.re), fmt_f64(p.im), fmt_f64(*v)])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Closed-form Wigner function of `a|beta> + b|-beta>`, divided by the
/// exact norm of the superposition.
pub fn wigner_analytic(state: &CatState, grid: &PhaseSpaceGrid) -> WignerField {
    let (a, b, beta) = (state.weight_plus, state.weight_minus, state.beta);
    let norm = state.norm_sqr();
    grid.eval(|eta| {
        let plus = a.norm_sqr() * (-2.0 * (eta - beta).norm_sqr()).exp();
        let minus = b.norm_sqr() * (-2.0 * (eta + beta).norm_sqr()).exp();
        let phase = C64::from_polar(1.0, -4.0 * (eta * beta.conj()).im);
        let cross = 2.0 * (a * b.conj() * phase).re * (-2.0 * eta.norm_sqr()).exp();
        FRAC_2_PI * (plus + minus + cross) / norm
    })
}

/// Wigner function of a phonon density matrix,
/// `W(eta) = (2/pi) Tr[D^dag(eta) rho D(eta) (-1)^n]`. Since
/// `D(eta) (-1)^n D^dag(eta) = D(2 eta) (-1)^n`, the trace reduces to
/// `sum_jk rho_jk (-1)^j <k|D(2 eta)|j>` and needs no ladder beyond the one
/// `rho` lives on.
pub fn wigner_numeric(rho: &Array2<C64>, grid: &PhaseSpaceGrid) -> WignerField {
    let m = rho.nrows();
    grid.eval(|eta| {
        let two = 2.0 * eta;
        let mut acc = C64::from(0.0);
        for j in 0..m {
            let parity = if j % 2 == 0 { 1.0 } else { -1.0 };
            for k in 0..m {
                acc += rho[[j, k]] * parity * displacement_matrix_element(k, j, two);
            }
        }
        FRAC_2_PI * acc.re
    })
}
