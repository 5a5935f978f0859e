//! Fixed-step fourth-order Runge-Kutta stepping shared by the closed and
//! open solvers.

use std::f64::consts::PI;

use ndarray::{Array, Dimension, Zip};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::SolverError;
use crate::model::SystemParams;

/// Steps per period of the fastest retained oscillation used by
/// [`SolverConfig::default_for`].
pub const DEFAULT_STEPS_PER_PERIOD: f64 = 256.0;
/// Coarsest resolution accepted by [`SolverConfig::validate`].
pub const MIN_STEPS_PER_PERIOD: f64 = 40.0;

const DEFAULT_RECORDS: usize = 500;

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Requested step; the actual step is `t_end / steps()`, never larger.
    pub dt: f64,
    pub t_end: f64,
    /// Record every `record_stride` steps (the final step is always
    /// recorded).
    pub record_stride: usize,
}

/// `max(omega_m, omega_0 (2 n0 + 2))`, the fastest frequency the amplitude
/// equations have to resolve.
pub fn fastest_frequency(params: &SystemParams) -> f64 {
    params.omega_m.max(params.omega_0 * (2.0 * params.n0 as f64 + 2.0))
}

/// Largest step allowed by the resolution invariant.
pub fn max_step(params: &SystemParams) -> f64 {
    2.0 * PI / fastest_frequency(params) / MIN_STEPS_PER_PERIOD
}

impl SolverConfig {
    pub fn default_for(params: &SystemParams, t_end: f64) -> Self {
        let dt = 2.0 * PI / fastest_frequency(params) / DEFAULT_STEPS_PER_PERIOD;
        let mut cfg = Self { dt, t_end, record_stride: 1 };
        let steps = cfg.steps();
        cfg.dt = if steps == 0 { dt } else { t_end / steps as f64 };
        cfg.record_stride = (steps / DEFAULT_RECORDS).max(1);
        cfg
    }

    pub fn with_stride(mut self, record_stride: usize) -> Self {
        self.record_stride = record_stride;
        self
    }

    pub fn validate(&self, params: &SystemParams) -> Result<(), SolverError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(SolverError::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(SolverError::Config(format!("t_end must be non-negative, got {}", self.t_end)));
        }
        if self.record_stride == 0 {
            return Err(SolverError::Config("record_stride must be at least 1".into()));
        }
        let limit = max_step(params);
        if self.dt > limit * (1.0 + 1e-9) {
            return Err(SolverError::Config(format!("dt = {:e} exceeds (2pi/omega_max)/40 = {:e}", self.dt, limit)));
        }
        Ok(())
    }

    /// Number of steps that reach `t_end` exactly with a step no larger
    /// than `dt`.
    pub fn steps(&self) -> usize {
        if self.t_end <= 0.0 {
            return 0;
        }
        (self.t_end / self.dt - 1e-9).ceil().max(1.0) as usize
    }

    pub fn effective_dt(&self) -> f64 {
        match self.steps() {
            0 => self.dt,
            n => self.t_end / n as f64,
        }
    }

    /// Step indices (after the step) at which records are taken, excluding
    /// the initial record at step 0.
    pub fn is_record_step(&self, step: usize) -> bool {
        step.is_multiple_of(self.record_stride) || step == self.steps()
    }
}

/// Picture in which a right-hand side is evaluated. `Rotating` removes the
/// free mechanical rotation `e^{-i m omega_m t}` and the cavity phase
/// `e^{-i omega_c t}`; it is an exact change of variables.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub(crate) enum Frame {
    Lab,
    Rotating,
}

/// Scratch buffers for [`Rk4::step`].
pub struct Rk4<D: Dimension> {
    k: Array<C64, D>,
    acc: Array<C64, D>,
    stage: Array<C64, D>,
}

impl<D: Dimension> Rk4<D> {
    pub fn new(like: &Array<C64, D>) -> Self {
        Self { k: Array::zeros(like.raw_dim()), acc: Array::zeros(like.raw_dim()), stage: Array::zeros(like.raw_dim()) }
    }

    /// Advances `y` from `t` to `t + dt`. `f(t, y, out)` writes `dy/dt` into
    /// `out`.
    pub fn step<F>(&mut self, f: &mut F, t: f64, dt: f64, y: &mut Array<C64, D>)
    where
        F: FnMut(f64, &Array<C64, D>, &mut Array<C64, D>),
    {
        let half = 0.5 * dt;

        f(t, y, &mut self.k);
        self.acc.assign(&self.k);
        Zip::from(&mut self.stage).and(&*y).and(&self.k).for_each(|s, &y, &k| *s = y + k * half);

        f(t + half, &self.stage, &mut self.k);
        Zip::from(&mut self.acc).and(&self.k).for_each(|a, &k| *a += k * 2.0);
        Zip::from(&mut self.stage).and(&*y).and(&self.k).for_each(|s, &y, &k| *s = y + k * half);

        f(t + half, &self.stage, &mut self.k);
        Zip::from(&mut self.acc).and(&self.k).for_each(|a, &k| *a += k * 2.0);
        Zip::from(&mut self.stage).and(&*y).and(&self.k).for_each(|s, &y, &k| *s = y + k * dt);

        f(t + dt, &self.stage, &mut self.k);
        let w = dt / 6.0;
        Zip::from(y).and(&self.acc).and(&self.k).for_each(|y, &a, &k| *y += (a + k) * w);
    }
}
