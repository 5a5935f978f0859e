//! Unitary dynamics in the single-photon subspace.
//!
//! The state is `sum_m [A_m |1,0>|m> + B_m |0,1>|m>]`; the amplitude
//! equations are integrated with RK4 in the frame co-rotating with the free
//! mechanical motion and rotated back to the lab frame at record times.

use ndarray::{s, Array1, Array2, ArrayView1};
use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{SolverError, StateError};
use crate::fock::{tail_population, FockCutoff};
use crate::model::{target_states, theta_of_t, DerivedModulation, MechanicalState, SystemParams};
use crate::solver::{Frame, Rk4, SolverConfig};
use crate::trajectory::{fmt_f64, fmt_opt, CsvRow};

pub const NORM_DRIFT_LIMIT: f64 = 1e-6;
pub const TAIL_LIMIT: f64 = 1e-6;
/// Branch probabilities below this leave the conditional state undefined.
pub const MIN_BRANCH_PROBABILITY: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct SinglePhotonState {
    /// Amplitudes with the photon in the left cavity.
    pub a: Array1<C64>,
    /// Amplitudes with the photon in the right cavity.
    pub b: Array1<C64>,
    pub t: f64,
}

impl SinglePhotonState {
    pub fn from_amplitudes(a: Array1<C64>, b: Array1<C64>, t: f64) -> Result<Self, StateError> {
        if a.len() != b.len() {
            return Err(StateError::Dimension { expected: a.len(), got: b.len() });
        }
        if a.len() < 2 {
            return Err(StateError::Cutoff(a.len().saturating_sub(1)));
        }
        Ok(Self { a, b, t })
    }

    fn vacuum_with(cutoff: FockCutoff, a0: C64, b0: C64) -> Self {
        let mut a = Array1::zeros(cutoff.dim());
        let mut b = Array1::zeros(cutoff.dim());
        a[0] = a0;
        b[0] = b0;
        Self { a, b, t: 0.0 }
    }

    /// `|1,0>|0>`.
    pub fn left(cutoff: FockCutoff) -> Self {
        Self::vacuum_with(cutoff, C64::from(1.0), C64::from(0.0))
    }

    /// `|0,1>|0>`.
    pub fn right(cutoff: FockCutoff) -> Self {
        Self::vacuum_with(cutoff, C64::from(0.0), C64::from(1.0))
    }

    /// `(|1,0> + |0,1>)|0> / sqrt2`.
    pub fn bell(cutoff: FockCutoff) -> Self {
        let h = C64::from(std::f64::consts::FRAC_1_SQRT_2);
        Self::vacuum_with(cutoff, h, h)
    }

    pub fn cutoff(&self) -> FockCutoff {
        FockCutoff::new(self.a.len() - 1).expect("dimension checked at construction")
    }

    /// True for the photon-Bell state with the mechanics in vacuum, the
    /// initial condition for which the analytic targets apply.
    pub fn is_bell_vacuum(&self) -> bool {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let rest: f64 = self.a.iter().chain(self.b.iter()).map(|c| c.norm_sqr()).sum::<f64>()
            - self.a[0].norm_sqr()
            - self.b[0].norm_sqr();
        (self.a[0] - h).norm() < 1e-12 && (self.b[0] - h).norm() < 1e-12 && rest < 1e-24
    }

    pub fn norm_sqr(&self) -> f64 {
        self.n_l() + self.n_r()
    }

    pub fn n_l(&self) -> f64 {
        self.a.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn n_r(&self) -> f64 {
        self.b.iter().map(|c| c.norm_sqr()).sum()
    }

    /// `<b + b^dag>`, the displacement in units of the zero-point amplitude.
    pub fn x_over_x0(&self) -> f64 {
        let half = |v: &Array1<C64>| -> f64 {
            (0..v.len() - 1).map(|n| ((n + 1) as f64).sqrt() * (v[n].conj() * v[n + 1]).re).sum()
        };
        2.0 * (half(&self.a) + half(&self.b))
    }

    /// Mean phonon number.
    pub fn nb(&self) -> f64 {
        self.a.iter().zip(self.b.iter()).enumerate().map(|(m, (a, b))| m as f64 * (a.norm_sqr() + b.norm_sqr())).sum()
    }

    /// Population of the two highest retained phonon levels.
    pub fn tail_population(&self) -> f64 {
        let pops: Vec<f64> = self.a.iter().zip(self.b.iter()).map(|(a, b)| a.norm_sqr() + b.norm_sqr()).collect();
        tail_population(&pops)
    }

    fn pack(&self) -> Array2<C64> {
        let mut y = Array2::zeros((2, self.a.len()));
        y.row_mut(0).assign(&self.a);
        y.row_mut(1).assign(&self.b);
        y
    }
}

/// Lab-frame time derivative of the amplitudes at `state.t`.
pub fn rhs_closed(state: &SinglePhotonState, params: &SystemParams) -> SinglePhotonState {
    let y = state.pack();
    let mut out = Array2::zeros(y.raw_dim());
    closed_kernel(params, Frame::Lab, state.t, &y, &mut out);
    SinglePhotonState { a: out.row(0).to_owned(), b: out.row(1).to_owned(), t: state.t }
}

pub(crate) fn closed_kernel(params: &SystemParams, frame: Frame, t: f64, y: &Array2<C64>, out: &mut Array2<C64>) {
    let dim = y.ncols();
    let i = C64::i();
    let hop = i * params.xi * params.omega_0 * (params.omega_0 * t).cos();
    let (down, up) = match frame {
        Frame::Lab => (C64::from(1.0), C64::from(1.0)),
        Frame::Rotating => (C64::from_polar(1.0, -params.omega_m * t), C64::from_polar(1.0, params.omega_m * t)),
    };
    let ig0 = i * params.g0;
    let a = y.row(0);
    let b = y.row(1);
    for m in 0..dim {
        let mut da = hop * b[m];
        let mut db = hop * a[m];
        let mut x = C64::from(0.0);
        if m + 1 < dim {
            x += ((m + 1) as f64).sqrt() * b[m + 1] * down;
        }
        if m > 0 {
            x += (m as f64).sqrt() * b[m - 1] * up;
        }
        db += ig0 * x;
        if frame == Frame::Lab {
            let rot = -i * (params.omega_c + m as f64 * params.omega_m);
            da += rot * a[m];
            db += rot * b[m];
        }
        out[[0, m]] = da;
        out[[1, m]] = db;
    }
}

/// Lab-frame amplitude phases `e^{-i(omega_c + m omega_m) t}`.
fn lab_phases(params: &SystemParams, dim: usize, t: f64) -> Array1<C64> {
    Array1::from_shape_fn(dim, |m| C64::from_polar(1.0, -(params.omega_c + m as f64 * params.omega_m) * t))
}

fn to_lab(params: &SystemParams, y: &Array2<C64>, t: f64) -> SinglePhotonState {
    let ph = lab_phases(params, y.ncols(), t);
    SinglePhotonState { a: &y.row(0) * &ph, b: &y.row(1) * &ph, t }
}

fn to_rotating(params: &SystemParams, state: &SinglePhotonState) -> Array2<C64> {
    let ph = lab_phases(params, state.a.len(), state.t).mapv(|c| c.conj());
    let mut y = state.pack();
    for mut row in y.rows_mut() {
        row *= &ph;
    }
    y
}

fn overlap(target: ArrayView1<C64>, v: &Array1<C64>) -> C64 {
    target.iter().zip(v.iter()).map(|(p, x)| p.conj() * x).sum()
}

/// `|<Psi(t)|psi(t)>|^2` against the analytic entangled state
/// `e^{i theta}(|L>phi_L + |R>phi_R)/sqrt2`.
pub fn fidelity_total(state: &SinglePhotonState, params: &SystemParams, d: &DerivedModulation, t: f64) -> f64 {
    let cut = state.cutoff();
    let (l, r) = target_states(params, d, t);
    let phase = C64::from_polar(std::f64::consts::FRAC_1_SQRT_2, -theta_of_t(params, d, t));
    let inner = phase * (overlap(l.fock_coeffs(cut).view(), &state.a) + overlap(r.fock_coeffs(cut).view(), &state.b));
    inner.norm_sqr()
}

/// A mechanical state conditioned on a photon detection, with the
/// detection probability.
#[derive(Clone, Debug, PartialEq)]
pub struct Branch {
    pub state: MechanicalState,
    pub probability: f64,
}

fn branch(v: &Array1<C64>, sector: crate::open::PhotonSector) -> Result<Branch, StateError> {
    let p: f64 = v.iter().map(|c| c.norm_sqr()).sum();
    if p < MIN_BRANCH_PROBABILITY {
        return Err(StateError::UndefinedBranch { sector, probability: p });
    }
    Ok(Branch { state: MechanicalState::Pure(v / C64::from(p.sqrt())), probability: p })
}

/// Mechanical states after detecting the photon in the left or right
/// cavity.
pub fn conditional_states(state: &SinglePhotonState) -> Result<(Branch, Branch), StateError> {
    use crate::open::PhotonSector;
    Ok((branch(&state.a, PhotonSector::L)?, branch(&state.b, PhotonSector::R)?))
}

/// Conditional fidelities `(F_L, F_R)` against the analytic cat states.
pub fn fidelity_conditional(
    state: &SinglePhotonState,
    params: &SystemParams,
    d: &DerivedModulation,
    t: f64,
) -> Result<(f64, f64), StateError> {
    let (l, r) = conditional_states(state)?;
    let (pl, pr) = target_states(params, d, t);
    Ok((l.state.fidelity(&pl), r.state.fidelity(&pr)))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClosedRecord {
    pub t: f64,
    pub n_l: f64,
    pub n_r: f64,
    pub x_over_x0: f64,
    pub nb: f64,
    pub p_l: f64,
    pub p_r: f64,
    pub f: Option<f64>,
    pub f_l: Option<f64>,
    pub f_r: Option<f64>,
}

impl CsvRow for ClosedRecord {
    fn header() -> &'static [&'static str] {
        &["t", "nL", "nR", "x_over_x0", "nb", "P_L", "P_R", "F", "F_L", "F_R"]
    }

    fn fields(&self) -> Vec<String> {
        vec![
            fmt_f64(self.t),
            fmt_f64(self.n_l),
            fmt_f64(self.n_r),
            fmt_f64(self.x_over_x0),
            fmt_f64(self.nb),
            fmt_f64(self.p_l),
            fmt_f64(self.p_r),
            fmt_opt(self.f),
            fmt_opt(self.f_l),
            fmt_opt(self.f_r),
        ]
    }
}

impl ClosedRecord {
    fn observe(state: &SinglePhotonState, fidelity: Option<(&SystemParams, &DerivedModulation)>) -> Self {
        let (n_l, n_r) = (state.n_l(), state.n_r());
        let (f, f_l, f_r) = match fidelity {
            Some((p, d)) => {
                let f = fidelity_total(state, p, d, state.t);
                match fidelity_conditional(state, p, d, state.t) {
                    Ok((fl, fr)) => (Some(f), Some(fl), Some(fr)),
                    Err(_) => (Some(f), None, None),
                }
            }
            None => (None, None, None),
        };
        Self { t: state.t, n_l, n_r, x_over_x0: state.x_over_x0(), nb: state.nb(), p_l: n_l, p_r: n_r, f, f_l, f_r }
    }
}

/// Invariant bookkeeping of a finished run.
#[derive(Copy, Clone, Debug, PartialEq, Serialize)]
pub struct ClosedSummary {
    pub steps: usize,
    pub dt: f64,
    pub max_norm_drift: f64,
    pub max_tail: f64,
}

#[derive(Clone, Debug)]
pub struct ClosedRun {
    pub records: Vec<ClosedRecord>,
    pub final_state: SinglePhotonState,
    pub summary: ClosedSummary,
}

/// Integrates from `initial.t` to `initial.t + cfg.t_end`. Fidelities are
/// recorded only when `initial` is the photon-Bell state at `t = 0`.
pub fn evolve_closed(
    initial: &SinglePhotonState,
    params: &SystemParams,
    cfg: &SolverConfig,
) -> Result<ClosedRun, SolverError> {
    params.validate()?;
    cfg.validate(params)?;
    let norm0 = initial.norm_sqr();
    if (norm0 - 1.0).abs() > 1e-10 {
        return Err(SolverError::Config(format!("initial state norm {norm0} is not 1")));
    }
    let d = params.derive();
    let fidelity = (initial.is_bell_vacuum() && initial.t == 0.0).then_some((params, &d));
    let steps = cfg.steps();
    let dt = cfg.effective_dt();
    let n_max = initial.cutoff().n_max();

    let mut y = to_rotating(params, initial);
    let mut rk = Rk4::new(&y);
    let mut rhs = |t: f64, y: &Array2<C64>, out: &mut Array2<C64>| closed_kernel(params, Frame::Rotating, t, y, out);

    let mut records = vec![ClosedRecord::observe(initial, fidelity)];
    let mut summary = ClosedSummary { steps, dt, max_norm_drift: 0.0, max_tail: initial.tail_population() };
    let mut state = initial.clone();
    for k in 0..steps {
        let t = initial.t + k as f64 * dt;
        rk.step(&mut rhs, t, dt, &mut y);
        let t_next = initial.t + (k + 1) as f64 * dt;
        let drift = (y.iter().map(|c| c.norm_sqr()).sum::<f64>() - norm0).abs();
        summary.max_norm_drift = summary.max_norm_drift.max(drift);
        if drift > NORM_DRIFT_LIMIT {
            return Err(SolverError::NormDrift { t: t_next, drift, dt });
        }
        if cfg.is_record_step(k + 1) {
            state = to_lab(params, &y, t_next);
            let tail = state.tail_population();
            summary.max_tail = summary.max_tail.max(tail);
            if tail > TAIL_LIMIT {
                return Err(SolverError::Truncation { t: t_next, tail, n_max });
            }
            records.push(ClosedRecord::observe(&state, fidelity));
        }
    }
    Ok(ClosedRun { records, final_state: state, summary })
}

/// Amplitudes of the state restricted to the phonon levels `0..dim`.
pub fn truncate(state: &SinglePhotonState, cutoff: FockCutoff) -> SinglePhotonState {
    let k = cutoff.dim().min(state.a.len());
    let mut a = Array1::zeros(cutoff.dim());
    let mut b = Array1::zeros(cutoff.dim());
    a.slice_mut(s![..k]).assign(&state.a.slice(s![..k]));
    b.slice_mut(s![..k]).assign(&state.b.slice(s![..k]));
    SinglePhotonState { a, b, t: state.t }
}
