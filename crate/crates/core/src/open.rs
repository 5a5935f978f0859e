//! Master-equation dynamics with photon loss and a thermal mechanical bath.
//!
//! The photon space is restricted to three sectors (one photon left, one
//! photon right, no photon); the density matrix is indexed by
//! `sector * (n_max + 1) + phonon`.

use std::io::{self, Read, Write};

use nalgebra::DMatrix;
use ndarray::{s, Array2};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::closed::{Branch, SinglePhotonState, MIN_BRANCH_PROBABILITY, TAIL_LIMIT};
use crate::error::{SolverError, StateError};
use crate::fock::{tail_population, FockCutoff};
use crate::model::{target_states, DerivedModulation, MechanicalState, SystemParams};
use crate::solver::{Frame, Rk4, SolverConfig};
use crate::trajectory::{fmt_f64, fmt_opt, CsvRow};

pub const TRACE_DRIFT_LIMIT: f64 = 1e-6;
pub const NEGATIVITY_LIMIT: f64 = -1e-6;
pub const HERMITICITY_LIMIT: f64 = 1e-10;
pub const COHERENCE_LIMIT: f64 = 1e-12;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PhotonSector {
    /// One photon in the left cavity.
    L,
    /// One photon in the right cavity.
    R,
    /// No photon.
    V,
}

impl PhotonSector {
    pub const ALL: [PhotonSector; 3] = [Self::L, Self::R, Self::V];

    pub fn index(self) -> usize {
        match self {
            Self::L => 0,
            Self::R => 1,
            Self::V => 2,
        }
    }

    pub fn photons(self) -> usize {
        match self {
            Self::V => 0,
            _ => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SystemDensityMatrix {
    pub rho: Array2<C64>,
    pub cutoff: FockCutoff,
    pub t: f64,
}

impl SystemDensityMatrix {
    pub fn new(rho: Array2<C64>, cutoff: FockCutoff, t: f64) -> Result<Self, StateError> {
        let d = 3 * cutoff.dim();
        if rho.nrows() != d || rho.ncols() != d {
            return Err(StateError::Dimension { expected: d, got: rho.nrows().max(rho.ncols()) });
        }
        Ok(Self { rho: rho.as_standard_layout().into_owned(), cutoff, t })
    }

    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    /// `|Psi><Psi|` for a single-photon pure state.
    pub fn from_single_photon(state: &SinglePhotonState) -> Self {
        let cutoff = state.cutoff();
        let m = cutoff.dim();
        let mut v = vec![C64::from(0.0); 3 * m];
        v[..m].copy_from_slice(state.a.as_slice().expect("contiguous"));
        v[m..2 * m].copy_from_slice(state.b.as_slice().expect("contiguous"));
        let rho = Array2::from_shape_fn((3 * m, 3 * m), |(i, j)| v[i] * v[j].conj());
        Self { rho, cutoff, t: state.t }
    }

    pub fn bell(cutoff: FockCutoff) -> Self {
        Self::from_single_photon(&SinglePhotonState::bell(cutoff))
    }

    /// Product of a photon sector projector and a mechanical density matrix.
    pub fn product(sector: PhotonSector, mechanical: &Array2<C64>, cutoff: FockCutoff) -> Result<Self, StateError> {
        let m = cutoff.dim();
        if mechanical.nrows() != m || mechanical.ncols() != m {
            return Err(StateError::Dimension { expected: m, got: mechanical.nrows() });
        }
        let mut rho = Array2::zeros((3 * m, 3 * m));
        let o = sector.index() * m;
        rho.slice_mut(s![o..o + m, o..o + m]).assign(mechanical);
        Ok(Self { rho, cutoff, t: 0.0 })
    }

    pub fn block(&self, row: PhotonSector, col: PhotonSector) -> Array2<C64> {
        let m = self.cutoff.dim();
        let (r, c) = (row.index() * m, col.index() * m);
        self.rho.slice(s![r..r + m, c..c + m]).to_owned()
    }

    pub fn trace(&self) -> f64 {
        self.rho.diag().iter().map(|c| c.re).sum()
    }

    pub fn probability(&self, sector: PhotonSector) -> f64 {
        let m = self.cutoff.dim();
        let o = sector.index() * m;
        (o..o + m).map(|i| self.rho[[i, i]].re).sum()
    }

    pub fn nb(&self) -> f64 {
        let m = self.cutoff.dim();
        (0..3 * m).map(|i| (i % m) as f64 * self.rho[[i, i]].re).sum()
    }

    /// `max |rho - rho^dag|`.
    pub fn hermiticity_error(&self) -> f64 {
        let d = self.dim();
        let mut e: f64 = 0.0;
        for i in 0..d {
            for j in i..d {
                e = e.max((self.rho[[i, j]] - self.rho[[j, i]].conj()).norm());
            }
        }
        e
    }

    /// Largest one-photon/vacuum coherence.
    pub fn photon_vacuum_coherence(&self) -> f64 {
        [PhotonSector::L, PhotonSector::R]
            .into_iter()
            .map(|s| self.block(s, PhotonSector::V).iter().fold(0.0f64, |a, c| a.max(c.norm())))
            .fold(0.0, f64::max)
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        let d = self.dim();
        let m = DMatrix::from_fn(d, d, |i, j| 0.5 * (self.rho[[i, j]] + self.rho[[j, i]].conj()));
        m.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn tail_population(&self) -> f64 {
        let m = self.cutoff.dim();
        let pops: Vec<f64> = (0..m)
            .map(|p| PhotonSector::ALL.iter().map(|s| self.rho[[s.index() * m + p, s.index() * m + p]].re).sum())
            .collect();
        tail_population(&pops)
    }

    /// JSON snapshot `{"dim": d, "data": [re, im, ...]}`, row-major.
    pub fn to_json(&self) -> serde_json::Value {
        let data: Vec<f64> = self.rho.iter().flat_map(|c| [c.re, c.im]).collect();
        serde_json::json!({ "dim": self.dim(), "data": data })
    }

    /// Binary snapshot: `u64` little-endian dimension, then row-major
    /// `(re, im)` pairs as little-endian `f64`.
    pub fn write_binary<W: Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(&(self.dim() as u64).to_le_bytes())?;
        for c in self.rho.iter() {
            w.write_all(&c.re.to_le_bytes())?;
            w.write_all(&c.im.to_le_bytes())?;
        }
        Ok(())
    }

    /// Reads a matrix written by [`write_binary`](Self::write_binary).
    pub fn read_binary<R: Read>(mut r: R) -> io::Result<Array2<C64>> {
        let mut word = [0u8; 8];
        r.read_exact(&mut word)?;
        let d = u64::from_le_bytes(word) as usize;
        let mut out = Array2::zeros((d, d));
        for c in out.iter_mut() {
            r.read_exact(&mut word)?;
            let re = f64::from_le_bytes(word);
            r.read_exact(&mut word)?;
            *c = C64::new(re, f64::from_le_bytes(word));
        }
        Ok(out)
    }
}

/// Lab-frame time derivative of `rho` at `rho.t`.
pub fn rhs_lindblad(rho: &SystemDensityMatrix, params: &SystemParams) -> Array2<C64> {
    let mut out = Array2::zeros(rho.rho.raw_dim());
    lindblad_kernel(params, Frame::Lab, rho.t, &rho.rho, &mut out);
    out
}

pub(crate) fn lindblad_kernel(params: &SystemParams, frame: Frame, t: f64, rho: &Array2<C64>, out: &mut Array2<C64>) {
    let d = rho.nrows();
    let m = d / 3;
    let r = rho.as_slice().expect("standard layout");
    let o = out.as_slice_mut().expect("standard layout");
    let i = C64::i();
    let sq: Vec<f64> = (0..=m).map(|k| (k as f64).sqrt()).collect();

    let ij = i * params.xi * params.omega_0 * (params.omega_0 * t).cos();
    let (down, up) = match frame {
        Frame::Lab => (C64::from(1.0), C64::from(1.0)),
        Frame::Rotating => (C64::from_polar(1.0, -params.omega_m * t), C64::from_polar(1.0, params.omega_m * t)),
    };
    let (ig_down, ig_up) = (i * params.g0 * down, i * params.g0 * up);
    let gc = params.gamma_c;
    let g_down = params.gamma_m * (params.n_th + 1.0);
    let g_up = params.gamma_m * params.n_th;
    let energy = |s: usize| if s < 2 { params.omega_c } else { 0.0 };
    // row (s, p), columns of sector block tt
    let row = |s: usize, p: usize, tt: usize| &r[(s * m + p) * d + tt * m..(s * m + p) * d + tt * m + m];

    for s in 0..3 {
        for tt in 0..3 {
            let loss = 0.5 * gc * ((s < 2) as u8 + (tt < 2) as u8) as f64;
            let de = energy(s) - energy(tt);
            for p in 0..m {
                let here = row(s, p, tt);
                let base = (s * m + p) * d + tt * m;
                let acc = &mut o[base..base + m];
                let pf = p as f64;

                // diagonal decay and, in the lab frame, free rotation
                for q in 0..m {
                    let qf = q as f64;
                    let re = -loss - 0.5 * (g_down * (pf + qf) + g_up * (pf + qf + 2.0));
                    let im = match frame {
                        Frame::Lab => -(de + params.omega_m * (pf - qf)),
                        Frame::Rotating => 0.0,
                    };
                    acc[q] = C64::new(re, im) * here[q];
                }

                // photon hopping swaps L and R on either side
                if s < 2 {
                    for (a, x) in acc.iter_mut().zip(row(1 - s, p, tt)) {
                        *a += ij * x;
                    }
                }
                if tt < 2 {
                    for (a, x) in acc.iter_mut().zip(row(s, p, 1 - tt)) {
                        *a -= ij * x;
                    }
                }

                // radiation pressure acts in the right-cavity sector
                if s == 1 {
                    if p + 1 < m {
                        let c = ig_down * sq[p + 1];
                        for (a, x) in acc.iter_mut().zip(row(s, p + 1, tt)) {
                            *a += c * x;
                        }
                    }
                    if p > 0 {
                        let c = ig_up * sq[p];
                        for (a, x) in acc.iter_mut().zip(row(s, p - 1, tt)) {
                            *a += c * x;
                        }
                    }
                }
                if tt == 1 {
                    for q in 1..m {
                        acc[q] -= ig_down * sq[q] * here[q - 1];
                    }
                    for q in 0..m - 1 {
                        acc[q] -= ig_up * sq[q + 1] * here[q + 1];
                    }
                }

                // photon loss refills the vacuum sector
                if s == 2 && tt == 2 {
                    for ((a, x), y) in acc.iter_mut().zip(row(0, p, 0)).zip(row(1, p, 1)) {
                        *a += gc * (x + y);
                    }
                }

                // phonon emission and absorption
                if g_down != 0.0 && p + 1 < m {
                    let above = row(s, p + 1, tt);
                    let c = g_down * sq[p + 1];
                    for q in 0..m - 1 {
                        acc[q] += c * sq[q + 1] * above[q + 1];
                    }
                }
                if g_up != 0.0 && p > 0 {
                    let below = row(s, p - 1, tt);
                    let c = g_up * sq[p];
                    for q in 1..m {
                        acc[q] += c * sq[q] * below[q - 1];
                    }
                }
            }
        }
    }
}

/// Phase `e^{-i[(E_s - E_t) + omega_m (p - q)] t}` taking rotating-frame
/// elements to the lab frame.
fn lab_phase_matrix(params: &SystemParams, m: usize, t: f64) -> Array2<C64> {
    let energy = |s: usize| if s < 2 { params.omega_c } else { 0.0 };
    Array2::from_shape_fn((3 * m, 3 * m), |(i, j)| {
        let (s, p) = (i / m, i % m);
        let (tt, q) = (j / m, j % m);
        C64::from_polar(1.0, -((energy(s) - energy(tt)) + params.omega_m * (p as f64 - q as f64)) * t)
    })
}

/// Mechanical state conditioned on the photon sector, with its
/// probability.
pub fn reduce_mechanical(rho: &SystemDensityMatrix, sector: PhotonSector) -> Result<Branch, StateError> {
    let block = rho.block(sector, sector);
    let p: f64 = block.diag().iter().map(|c| c.re).sum();
    if p < MIN_BRANCH_PROBABILITY {
        return Err(StateError::UndefinedBranch { sector, probability: p });
    }
    Ok(Branch { state: MechanicalState::Mixed(block / C64::from(p)), probability: p })
}

/// Conditional fidelities `(F_L, F_R)` against the analytic cat states.
pub fn fidelity_open(
    rho: &SystemDensityMatrix,
    params: &SystemParams,
    d: &DerivedModulation,
    t: f64,
) -> Result<(f64, f64), StateError> {
    let l = reduce_mechanical(rho, PhotonSector::L)?;
    let r = reduce_mechanical(rho, PhotonSector::R)?;
    let (pl, pr) = target_states(params, d, t);
    Ok((l.state.fidelity(&pl), r.state.fidelity(&pr)))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OpenRecord {
    pub t: f64,
    pub p_l: f64,
    pub p_r: f64,
    pub p_v: f64,
    pub nb: f64,
    pub f_l: Option<f64>,
    pub f_r: Option<f64>,
    pub trace_err: f64,
    pub min_eig: f64,
}

impl CsvRow for OpenRecord {
    fn header() -> &'static [&'static str] {
        &["t", "P_L", "P_R", "P_V", "nb", "F_L", "F_R", "trace_err", "min_eig"]
    }

    fn fields(&self) -> Vec<String> {
        vec![
            fmt_f64(self.t),
            fmt_f64(self.p_l),
            fmt_f64(self.p_r),
            fmt_f64(self.p_v),
            fmt_f64(self.nb),
            fmt_opt(self.f_l),
            fmt_opt(self.f_r),
            fmt_f64(self.trace_err),
            fmt_f64(self.min_eig),
        ]
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize)]
pub struct OpenSummary {
    pub steps: usize,
    pub dt: f64,
    pub max_trace_drift: f64,
    pub min_eigenvalue: f64,
    pub max_hermiticity_error: f64,
    pub max_photon_vacuum_coherence: f64,
    pub max_tail: f64,
}

#[derive(Clone, Debug)]
pub struct OpenRun {
    pub records: Vec<OpenRecord>,
    pub final_state: SystemDensityMatrix,
    pub summary: OpenSummary,
}

/// Runs the record-time invariant checks and builds the record.
fn check_and_observe(
    state: &SystemDensityMatrix,
    trace0: f64,
    dt: f64,
    fidelity: Option<(&SystemParams, &DerivedModulation)>,
    summary: &mut OpenSummary,
) -> Result<OpenRecord, SolverError> {
    let t = state.t;
    let herm = state.hermiticity_error();
    summary.max_hermiticity_error = summary.max_hermiticity_error.max(herm);
    if herm > HERMITICITY_LIMIT {
        return Err(SolverError::Hermiticity { t, error: herm });
    }
    let coh = state.photon_vacuum_coherence();
    summary.max_photon_vacuum_coherence = summary.max_photon_vacuum_coherence.max(coh);
    if coh > COHERENCE_LIMIT {
        return Err(SolverError::CoherenceLeak { t, value: coh });
    }
    let min_eig = state.min_eigenvalue();
    summary.min_eigenvalue = summary.min_eigenvalue.min(min_eig);
    if min_eig < NEGATIVITY_LIMIT {
        return Err(SolverError::Positivity { t, min_eig, dt });
    }
    let tail = state.tail_population();
    summary.max_tail = summary.max_tail.max(tail);
    if tail > TAIL_LIMIT {
        return Err(SolverError::Truncation { t, tail, n_max: state.cutoff.n_max() });
    }
    let trace_err = state.trace() - trace0;
    let (f_l, f_r) = match fidelity.map(|(p, d)| fidelity_open(state, p, d, t)) {
        Some(Ok((l, r))) => (Some(l), Some(r)),
        _ => (None, None),
    };
    Ok(OpenRecord {
        t,
        p_l: state.probability(PhotonSector::L),
        p_r: state.probability(PhotonSector::R),
        p_v: state.probability(PhotonSector::V),
        nb: state.nb(),
        f_l,
        f_r,
        trace_err,
        min_eig,
    })
}

fn is_bell_vacuum(rho: &SystemDensityMatrix) -> bool {
    let bell = SystemDensityMatrix::bell(rho.cutoff);
    rho.t == 0.0 && rho.rho.iter().zip(bell.rho.iter()).all(|(a, b)| (a - b).norm() < 1e-12)
}

pub fn evolve_open(
    initial: &SystemDensityMatrix,
    params: &SystemParams,
    cfg: &SolverConfig,
) -> Result<OpenRun, SolverError> {
    evolve_open_with(initial, params, cfg, |_| {})
}

/// As [`evolve_open`], handing every recorded lab-frame density matrix to
/// `on_record`. Fidelities are recorded only when `initial` is the
/// photon-Bell state with the mechanics in vacuum at `t = 0`.
pub fn evolve_open_with<F>(
    initial: &SystemDensityMatrix,
    params: &SystemParams,
    cfg: &SolverConfig,
    mut on_record: F,
) -> Result<OpenRun, SolverError>
where
    F: FnMut(&SystemDensityMatrix),
{
    params.validate()?;
    cfg.validate(params)?;
    let trace0 = initial.trace();
    if (trace0 - 1.0).abs() > 1e-10 {
        return Err(SolverError::Config(format!("initial trace {trace0} is not 1")));
    }
    let d = params.derive();
    let fidelity = is_bell_vacuum(initial).then_some((params, &d));
    let steps = cfg.steps();
    let dt = cfg.effective_dt();
    let m = initial.cutoff.dim();

    let mut summary = OpenSummary {
        steps,
        dt,
        max_trace_drift: 0.0,
        min_eigenvalue: f64::INFINITY,
        max_hermiticity_error: 0.0,
        max_photon_vacuum_coherence: 0.0,
        max_tail: 0.0,
    };
    let mut records = vec![check_and_observe(initial, trace0, dt, fidelity, &mut summary)?];
    on_record(initial);

    let mut y = &initial.rho * &lab_phase_matrix(params, m, initial.t).mapv(|c| c.conj());
    let mut rk = Rk4::new(&y);
    let mut rhs = |t: f64, y: &Array2<C64>, out: &mut Array2<C64>| lindblad_kernel(params, Frame::Rotating, t, y, out);
    let mut state = initial.clone();
    for k in 0..steps {
        let t = initial.t + k as f64 * dt;
        rk.step(&mut rhs, t, dt, &mut y);
        let t_next = initial.t + (k + 1) as f64 * dt;
        let drift = (y.diag().iter().map(|c| c.re).sum::<f64>() - trace0).abs();
        summary.max_trace_drift = summary.max_trace_drift.max(drift);
        if drift > TRACE_DRIFT_LIMIT {
            return Err(SolverError::TraceDrift { t: t_next, drift, dt });
        }
        if cfg.is_record_step(k + 1) {
            state = SystemDensityMatrix {
                rho: &y * &lab_phase_matrix(params, m, t_next),
                cutoff: initial.cutoff,
                t: t_next,
            };
            records.push(check_and_observe(&state, trace0, dt, fidelity, &mut summary)?);
            on_record(&state);
        }
    }
    Ok(OpenRun { records, final_state: state, summary })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed::{evolve_closed, rhs_closed};
    use approx::assert_abs_diff_eq;

    fn cut(n: usize) -> FockCutoff {
        FockCutoff::new(n).unwrap()
    }

    fn lossy() -> SystemParams {
        let mut p = SystemParams::tuned(20.0, 1.5271, 1, 1.0).with_losses(0.2, 0.01, 2.0);
        p.omega_c = 1.7;
        p
    }

    fn random_hermitian(m: usize, seed: u64) -> Array2<C64> {
        let mut x = seed;
        let mut next = move || {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((x >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let a = Array2::from_shape_fn((m, m), |_| C64::new(next(), next()));
        let h = &a + &a.t().mapv(|c| c.conj());
        let tr: f64 = h.diag().iter().map(|c| c.re).sum();
        h / C64::from(tr)
    }

    #[test]
    fn sector_indices() {
        assert_eq!(PhotonSector::ALL.map(|s| s.index()), [0, 1, 2]);
        assert_eq!(PhotonSector::V.photons(), 0);
    }

    #[test]
    fn pure_state_rhs_matches_closed_rhs() {
        // d|Psi><Psi|/dt = |dPsi><Psi| + |Psi><dPsi| without dissipation
        let mut p = SystemParams::tuned(20.0, 1.5271, 1, 1.0);
        p.omega_c = 0.9;
        let dim = 6;
        let a = ndarray::Array1::from_shape_fn(dim, |k| C64::new(0.1 * k as f64, 0.2));
        let b = ndarray::Array1::from_shape_fn(dim, |k| C64::new(0.3, -0.05 * k as f64));
        let psi = SinglePhotonState { a, b, t: 0.37 };
        let dpsi = rhs_closed(&psi, &p);
        let rho = SystemDensityMatrix::from_single_photon(&psi);
        let drho = rhs_lindblad(&rho, &p);
        let v: Vec<C64> =
            psi.a.iter().chain(psi.b.iter()).copied().chain(std::iter::repeat_n(C64::from(0.0), dim)).collect();
        let dv: Vec<C64> =
            dpsi.a.iter().chain(dpsi.b.iter()).copied().chain(std::iter::repeat_n(C64::from(0.0), dim)).collect();
        for i in 0..3 * dim {
            for j in 0..3 * dim {
                let want = dv[i] * v[j].conj() + v[i] * dv[j].conj();
                assert_abs_diff_eq!((drho[[i, j]] - want).norm(), 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn generator_is_trace_free_below_top_level() {
        let p = lossy();
        let m = 8;
        let mut mech = random_hermitian(m, 7);
        // keep the top level empty so nothing leaks through the truncation
        for k in 0..m {
            mech[[m - 1, k]] = C64::from(0.0);
            mech[[k, m - 1]] = C64::from(0.0);
        }
        let mut rho = SystemDensityMatrix::product(PhotonSector::R, &mech, cut(m - 1)).unwrap();
        rho.t = 0.2;
        let dr = rhs_lindblad(&rho, &p);
        let tr: C64 = dr.diag().iter().sum();
        assert_abs_diff_eq!(tr.norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn generator_preserves_hermiticity() {
        let p = lossy();
        let m = 5;
        let mut full = random_hermitian(3 * m, 11);
        // no photon/vacuum coherences
        for i in 0..2 * m {
            for j in 2 * m..3 * m {
                full[[i, j]] = C64::from(0.0);
                full[[j, i]] = C64::from(0.0);
            }
        }
        let rho = SystemDensityMatrix::new(full, cut(m - 1), 0.41).unwrap();
        let dr = rhs_lindblad(&rho, &p);
        let err = (&dr - &dr.t().mapv(|c| c.conj())).iter().fold(0.0f64, |a, c| a.max(c.norm()));
        assert!(err < 1e-12);
    }

    #[test]
    fn lab_and_rotating_kernels_agree() {
        let p = lossy();
        let m = 5;
        let t = 0.77;
        let rho = SystemDensityMatrix::new(random_hermitian(3 * m, 3), cut(m - 1), t).unwrap();
        let dlab = rhs_lindblad(&rho, &p);
        let ph = lab_phase_matrix(&p, m, t);
        let rot = &rho.rho * &ph.mapv(|c| c.conj());
        let mut drot = Array2::zeros(rot.raw_dim());
        lindblad_kernel(&p, Frame::Rotating, t, &rot, &mut drot);
        let energy = |s: usize| if s < 2 { p.omega_c } else { 0.0 };
        for i in 0..3 * m {
            for j in 0..3 * m {
                let w = (energy(i / m) - energy(j / m)) + p.omega_m * ((i % m) as f64 - (j % m) as f64);
                let want = ph[[i, j]].conj() * (dlab[[i, j]] + C64::new(0.0, w) * rho.rho[[i, j]]);
                assert_abs_diff_eq!((drot[[i, j]] - want).norm(), 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn pure_photon_decay() {
        let mut p = SystemParams::tuned(20.0, 1.5271, 1, 1.0).with_losses(0.3, 0.0, 0.0);
        p.g0 = 1e-12;
        p.xi = 0.0;
        let mut vac = Array2::zeros((4, 4));
        vac[[0, 0]] = C64::from(1.0);
        let rho = SystemDensityMatrix::product(PhotonSector::R, &vac, cut(3)).unwrap();
        let run = evolve_open(&rho, &p, &SolverConfig::default_for(&p, 5.0)).unwrap();
        for r in &run.records {
            assert_abs_diff_eq!(r.p_r, (-0.3 * r.t).exp(), epsilon = 1e-9);
            assert_abs_diff_eq!(r.p_r + r.p_v, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn reduce_bell_state() {
        let rho = SystemDensityMatrix::bell(cut(6));
        for s in [PhotonSector::L, PhotonSector::R] {
            let b = reduce_mechanical(&rho, s).unwrap();
            assert_abs_diff_eq!(b.probability, 0.5, epsilon = 1e-15);
            let MechanicalState::Mixed(m) = b.state else { panic!() };
            assert_abs_diff_eq!(m[[0, 0]].re, 1.0, epsilon = 1e-15);
            let tr: f64 = m.diag().iter().map(|c| c.re).sum();
            assert_abs_diff_eq!(tr, 1.0, epsilon = 1e-12);
        }
        assert!(matches!(
            reduce_mechanical(&rho, PhotonSector::V),
            Err(StateError::UndefinedBranch { sector: PhotonSector::V, .. })
        ));
    }

    #[test]
    fn lossless_open_matches_closed_short_run() {
        let p = SystemParams::tuned(20.0, 1.5271, 1, 1.0);
        let c = cut(20);
        let cfg = SolverConfig::default_for(&p, 2.0).with_stride(50);
        let closed = evolve_closed(&SinglePhotonState::bell(c), &p, &cfg).unwrap();
        let open = evolve_open(&SystemDensityMatrix::bell(c), &p, &cfg).unwrap();
        let want = SystemDensityMatrix::from_single_photon(&closed.final_state);
        let err = (&open.final_state.rho - &want.rho).iter().fold(0.0f64, |a, z| a.max(z.norm()));
        assert!(err < 1e-6, "max element error {err}");
        for (o, k) in open.records.iter().zip(closed.records.iter()) {
            assert_abs_diff_eq!(o.f_l.unwrap(), k.f_l.unwrap(), epsilon = 1e-6);
        }
    }

    #[test]
    fn snapshot_binary_round_trip() {
        let rho = SystemDensityMatrix::new(random_hermitian(6, 5), cut(1), 0.0).unwrap();
        let mut buf = Vec::new();
        rho.write_binary(&mut buf).unwrap();
        assert_eq!(buf.len(), 8 + 16 * 36);
        assert_eq!(SystemDensityMatrix::read_binary(buf.as_slice()).unwrap(), rho.rho);
        let js = rho.to_json();
        assert_eq!(js["dim"], 6);
        assert_eq!(js["data"].as_array().unwrap().len(), 72);
        assert_eq!(js["data"][3].as_f64().unwrap(), rho.rho[[0, 1]].im);
    }

    #[test]
    fn dimension_is_checked() {
        assert!(SystemDensityMatrix::new(Array2::zeros((5, 5)), cut(1), 0.0).is_err());
    }
}
