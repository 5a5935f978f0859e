//! Truncated Fock-space primitives for a single bosonic mode.
//!
//! Everything here is dense and evaluated by recurrences (never by explicit
//! factorials), so indices well past 100 stay finite.

use std::sync::OnceLock;

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::StateError;

/// Highest retained Fock index of a truncated ladder.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct FockCutoff(usize);

impl FockCutoff {
    pub fn new(n_max: usize) -> Result<Self, StateError> {
        if n_max < 1 {
            return Err(StateError::Cutoff(n_max));
        }
        Ok(Self(n_max))
    }

    /// Cutoff that keeps the Poisson tail of a coherent state with
    /// `|beta|^2 <= beta_max_sq` below ~1e-8: `ceil(b + 8 sqrt(b + 1))`,
    /// never less than 20.
    pub fn for_amplitude(beta_max_sq: f64) -> Self {
        let b = beta_max_sq.max(0.0);
        let n = (b + 8.0 * (b + 1.0).sqrt()).ceil() as usize;
        Self(n.max(20))
    }

    pub fn n_max(self) -> usize {
        self.0
    }

    /// Ladder dimension, `n_max + 1`.
    pub fn dim(self) -> usize {
        self.0 + 1
    }
}

impl TryFrom<usize> for FockCutoff {
    type Error = StateError;

    fn try_from(n: usize) -> Result<Self, Self::Error> {
        Self::new(n)
    }
}

impl From<FockCutoff> for usize {
    fn from(c: FockCutoff) -> usize {
        c.0
    }
}

/// Population in the top two retained levels, given level populations.
pub fn tail_population(populations: &[f64]) -> f64 {
    populations.iter().rev().take(2).sum()
}

/// Fock coefficients `c_n = e^{-|beta|^2/2} beta^n / sqrt(n!)` of the
/// coherent state `|beta>`.
pub fn coherent_coeffs(beta: C64, cutoff: FockCutoff) -> Array1<C64> {
    let mut c = Array1::zeros(cutoff.dim());
    c[0] = C64::from((-0.5 * beta.norm_sqr()).exp());
    for n in 1..cutoff.dim() {
        c[n] = c[n - 1] * beta / (n as f64).sqrt();
    }
    c
}

/// Mean occupation `sum n |c_n|^2` of a Fock-basis amplitude vector.
pub fn mean_number(coeffs: &Array1<C64>) -> f64 {
    coeffs.iter().enumerate().map(|(n, c)| n as f64 * c.norm_sqr()).sum()
}

const LN_FACTORIAL_TABLE: usize = 1024;

fn ln_factorial_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(LN_FACTORIAL_TABLE);
        t.push(0.0);
        for k in 1..LN_FACTORIAL_TABLE {
            t.push(t[k - 1] + (k as f64).ln());
        }
        t
    })
}

/// `ln(n!)`.
pub fn ln_factorial(n: usize) -> f64 {
    let table = ln_factorial_table();
    if n < table.len() {
        return table[n];
    }
    let mut acc = table[table.len() - 1];
    for k in table.len()..=n {
        acc += (k as f64).ln();
    }
    acc
}

/// Associated Laguerre polynomial `L_n^{(alpha)}(x)` by the three-term
/// recurrence in the degree.
pub fn laguerre(n: usize, alpha: f64, x: f64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let mut prev = 1.0;
    let mut cur = 1.0 + alpha - x;
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 + alpha - x) * cur - (kf + alpha) * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// `<m| D(eta) |n>` with `D(eta) = exp(eta b^dag - eta^* b)`.
pub fn displacement_matrix_element(m: usize, n: usize, eta: C64) -> C64 {
    let r2 = eta.norm_sqr();
    if r2 == 0.0 {
        return if m == n { C64::from(1.0) } else { C64::from(0.0) };
    }
    // Lower index sets the Laguerre degree, the gap sets its order.
    let (lo, hi, base) = if m >= n { (n, m, eta) } else { (m, n, -eta.conj()) };
    let gap = hi - lo;
    let ln_mag = 0.5 * (ln_factorial(lo) - ln_factorial(hi)) + 0.5 * gap as f64 * r2.ln() - 0.5 * r2;
    let phase = C64::from_polar(1.0, gap as f64 * base.arg());
    phase * ln_mag.exp() * laguerre(lo, gap as f64, r2)
}

/// Dense matrix of `<m|D(eta)|n>` on the retained ladder.
pub fn displacement_matrix(eta: C64, cutoff: FockCutoff) -> Array2<C64> {
    let d = cutoff.dim();
    Array2::from_shape_fn((d, d), |(m, n)| displacement_matrix_element(m, n, eta))
}

/// Truncated annihilation operator.
pub fn annihilation(cutoff: FockCutoff) -> Array2<C64> {
    let d = cutoff.dim();
    let mut b = Array2::zeros((d, d));
    for n in 1..d {
        b[[n - 1, n]] = C64::from((n as f64).sqrt());
    }
    b
}

const PI_QUARTER_INV: f64 = 0.751_125_544_464_942_5; // pi^{-1/4}

/// Harmonic-oscillator eigenfunction `psi_n(x)`, real and normalized.
pub fn oscillator_eigenfunction(n: usize, x: f64) -> f64 {
    oscillator_eigenfunctions(n, x)[n]
}

/// `psi_0(x) ..= psi_{n_max}(x)` from the normalized recurrence.
pub fn oscillator_eigenfunctions(n_max: usize, x: f64) -> Vec<f64> {
    let mut psi = Vec::with_capacity(n_max + 1);
    psi.push(PI_QUARTER_INV * (-0.5 * x * x).exp());
    if n_max >= 1 {
        psi.push(std::f64::consts::SQRT_2 * x * psi[0]);
    }
    for n in 1..n_max {
        let nf = n as f64;
        let next = x * (2.0 / (nf + 1.0)).sqrt() * psi[n] - (nf / (nf + 1.0)).sqrt() * psi[n - 1];
        psi.push(next);
    }
    psi
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn cutoff_rejects_zero() {
        assert!(FockCutoff::new(0).is_err());
        assert_eq!(FockCutoff::new(4).unwrap().dim(), 5);
    }

    #[test]
    fn default_cutoff_rule() {
        assert_eq!(FockCutoff::for_amplitude(0.0).n_max(), 20);
        // 16 + 8 sqrt(17) = 48.98
        assert_eq!(FockCutoff::for_amplitude(16.0).n_max(), 49);
    }

    #[test]
    fn vacuum_coeffs() {
        let v = coherent_coeffs(c(0.0, 0.0), FockCutoff::new(4).unwrap());
        assert_eq!(v[0], c(1.0, 0.0));
        assert!(v.iter().skip(1).all(|z| *z == c(0.0, 0.0)));
    }

    #[test]
    fn coherent_normalization_real_beta() {
        let v = coherent_coeffs(c(2.0, 0.0), FockCutoff::new(40).unwrap());
        let s: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        assert_abs_diff_eq!(s, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn coherent_mean_number_at_detection_amplitude() {
        let beta = c(-0.8878, -1.7911);
        let v = coherent_coeffs(beta, FockCutoff::new(40).unwrap());
        assert_abs_diff_eq!(mean_number(&v), beta.norm_sqr(), epsilon = 1e-9);
        assert_abs_diff_eq!(mean_number(&v), 3.996, epsilon = 1e-3);
    }

    #[test]
    fn displacement_vacuum_overlap() {
        let eta = c(0.4, -1.3);
        assert_abs_diff_eq!(
            (displacement_matrix_element(0, 0, eta) - (-0.5 * eta.norm_sqr()).exp()).norm(),
            0.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn displacement_identity_at_zero() {
        for m in 0..6 {
            for n in 0..6 {
                let want = if m == n { 1.0 } else { 0.0 };
                assert_eq!(displacement_matrix_element(m, n, c(0.0, 0.0)), c(want, 0.0));
            }
        }
    }

    #[test]
    fn displacement_first_column_is_coherent_state() {
        let eta = c(0.7, 0.3);
        let cut = FockCutoff::new(25).unwrap();
        let coh = coherent_coeffs(eta, cut);
        for m in 0..cut.dim() {
            assert_abs_diff_eq!((displacement_matrix_element(m, 0, eta) - coh[m]).norm(), 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn laguerre_low_orders() {
        // L_2^{(1)}(x) = (x^2 - 6x + 6)/2
        let x = 1.7;
        assert_abs_diff_eq!(laguerre(2, 1.0, x), (x * x - 6.0 * x + 6.0) / 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(laguerre(1, 3.0, x), 4.0 - x, epsilon = 1e-15);
    }

    #[test]
    fn ground_state_and_parity() {
        assert_abs_diff_eq!(oscillator_eigenfunction(0, 0.0), 0.751_125_5, epsilon = 1e-7);
        assert_eq!(oscillator_eigenfunction(1, 0.0), 0.0);
    }

    #[test]
    fn eigenfunction_normalization_n25() {
        let h = 0.01;
        let n = 25;
        let xs: Vec<f64> = (0..=2400).map(|k| -12.0 + h * k as f64).collect();
        let f: Vec<f64> = xs.iter().map(|&x| oscillator_eigenfunction(n, x).powi(2)).collect();
        let integral = h * (f.iter().sum::<f64>() - 0.5 * (f[0] + f[f.len() - 1]));
        assert_abs_diff_eq!(integral, 1.0, epsilon = 1e-8);
    }

    #[test]
    fn ln_factorial_beyond_table() {
        let direct: f64 = (1..=1100).map(|k| (k as f64).ln()).sum();
        assert_abs_diff_eq!(ln_factorial(1100), direct, epsilon = 1e-8);
    }

    #[test]
    fn tail_population_takes_top_two() {
        assert_eq!(tail_population(&[0.5, 0.25, 0.125, 0.125]), 0.25);
    }
}
