//! System parameters, modulation-derived couplings and the analytic
//! rotating-wave solution: coherent amplitude `beta(t)`, weight angle
//! `mu(t)`, global phase `theta(t)` and the two target cat states.

use std::f64::consts::PI;

use ndarray::{s, Array1, Array2};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::StateError;
use crate::fock::{coherent_coeffs, FockCutoff};

/// Physical rates of the modulated two-cavity optomechanical system, in
/// units where `g0` sets the frequency scale.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Bare cavity frequency (both cavities).
    pub omega_c: f64,
    /// Mechanical frequency.
    pub omega_m: f64,
    /// Single-photon radiation-pressure coupling.
    pub g0: f64,
    /// Dimensionless hopping modulation amplitude.
    pub xi: f64,
    /// Sideband index selecting the near-resonant term.
    pub n0: u32,
    /// Hopping modulation frequency.
    pub omega_0: f64,
    pub gamma_c: f64,
    pub gamma_m: f64,
    /// Mean thermal phonon number of the mechanical bath.
    pub n_th: f64,
}

impl SystemParams {
    /// Lossless parameters with `omega_0` tuned so that the detuning equals
    /// `delta_over_g * g`.
    pub fn tuned(omega_m: f64, xi: f64, n0: u32, delta_over_g: f64) -> Self {
        let mut p =
            Self { omega_c: 0.0, omega_m, g0: 1.0, xi, n0, omega_0: 0.0, gamma_c: 0.0, gamma_m: 0.0, n_th: 0.0 };
        p.set_detuning(delta_over_g * p.coupling());
        p
    }

    /// Sets `omega_0 = (omega_m - delta) / (2 n0)`.
    pub fn set_detuning(&mut self, delta: f64) {
        self.omega_0 = (self.omega_m - delta) / (2.0 * self.n0 as f64);
    }

    pub fn with_detuning(mut self, delta: f64) -> Self {
        self.set_detuning(delta);
        self
    }

    pub fn with_losses(mut self, gamma_c: f64, gamma_m: f64, n_th: f64) -> Self {
        self.gamma_c = gamma_c;
        self.gamma_m = gamma_m;
        self.n_th = n_th;
        self
    }

    /// Effective coupling `g = g0 J_{2 n0}(2 xi) / 2`.
    pub fn coupling(&self) -> f64 {
        self.g0 * bessel_j(2 * self.n0, 2.0 * self.xi) / 2.0
    }

    pub fn detuning(&self) -> f64 {
        self.omega_m - 2.0 * self.n0 as f64 * self.omega_0
    }

    pub fn derive(&self) -> DerivedModulation {
        derive(self)
    }

    pub fn validate(&self) -> Result<(), StateError> {
        fn check(name: &'static str, value: f64, ok: bool, reason: &'static str) -> Result<(), StateError> {
            if ok && value.is_finite() {
                Ok(())
            } else {
                Err(StateError::Param { name, value, reason })
            }
        }
        check("omega_c", self.omega_c, true, "must be finite")?;
        check("omega_m", self.omega_m, self.omega_m > 0.0, "must be positive")?;
        check("g0", self.g0, self.g0 > 0.0, "must be positive")?;
        check("xi", self.xi, true, "must be finite")?;
        check("n0", self.n0 as f64, self.n0 >= 1, "must be at least 1")?;
        check("omega_0", self.omega_0, self.omega_0 > 0.0, "must be positive")?;
        check("gamma_c", self.gamma_c, self.gamma_c >= 0.0, "must be non-negative")?;
        check("gamma_m", self.gamma_m, self.gamma_m >= 0.0, "must be non-negative")?;
        check("n_th", self.n_th, self.n_th >= 0.0, "must be non-negative")?;
        Ok(())
    }

    /// Diagnostic for the rotating-wave regime: `|delta|` and `g0/2` both
    /// below a fifth of `omega_0` and of `omega_m`.
    pub fn rwa_regime(&self) -> RwaDiagnostic {
        let slow = self.detuning().abs().max(self.g0 / 2.0);
        let fast = self.omega_0.min(self.omega_m);
        RwaDiagnostic { slow_scale: slow, fast_scale: fast, valid: slow < fast / 5.0 }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RwaDiagnostic {
    pub slow_scale: f64,
    pub fast_scale: f64,
    pub valid: bool,
}

/// Quantities fixed by the modulation tuning.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivedModulation {
    pub g: f64,
    pub delta: f64,
    /// `2g/|delta|`; `None` on resonance where the amplitude grows without
    /// bound.
    pub beta_max: Option<f64>,
}

impl DerivedModulation {
    /// First maximum of `|beta(t)|`, `pi/|delta|`.
    pub fn t0(&self) -> Option<f64> {
        (self.delta != 0.0).then(|| PI / self.delta.abs())
    }
}

pub fn derive(params: &SystemParams) -> DerivedModulation {
    let g = params.coupling();
    let delta = params.detuning();
    DerivedModulation { g, delta, beta_max: (delta != 0.0).then(|| 2.0 * g / delta.abs()) }
}

const MILLER_RESCALE: f64 = 1e250;

/// Bessel function of the first kind `J_n(z)` for integer order, by Miller's
/// downward recurrence normalized with `J_0 + 2 sum_k J_{2k} = 1`.
pub fn bessel_j(order: u32, z: f64) -> f64 {
    let n = order as usize;
    if z == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    let x = z.abs();
    let sign = if z < 0.0 && n % 2 == 1 { -1.0 } else { 1.0 };

    let top = n.max(x.ceil() as usize);
    let mut start = top + 30 + (8.0 * (top as f64).sqrt()) as usize;
    start += start % 2;

    let mut above = 0.0;
    let mut cur = 1e-300;
    let mut even_sum = 0.0;
    let mut wanted = 0.0;
    for k in (1..=start).rev() {
        // cur = f_k, above = f_{k+1}
        if k == n {
            wanted = cur;
        }
        if k % 2 == 0 {
            even_sum += cur;
        }
        let below = 2.0 * k as f64 / x * cur - above;
        above = cur;
        cur = below;
        if cur.abs() > MILLER_RESCALE {
            cur /= MILLER_RESCALE;
            above /= MILLER_RESCALE;
            even_sum /= MILLER_RESCALE;
            wanted /= MILLER_RESCALE;
        }
    }
    // cur = f_0
    if n == 0 {
        wanted = cur;
    }
    let norm = cur + 2.0 * even_sum;
    sign * wanted / norm
}

/// Coherent amplitude of the rotating-wave solution,
/// `beta(t) = -(2ig/delta) sin(delta t/2) e^{-i(omega_m - delta/2)t}`,
/// with the resonant limit `-i g t e^{-i omega_m t}` at `delta = 0`.
pub fn beta_of_t(d: &DerivedModulation, omega_m: f64, t: f64) -> C64 {
    let i = C64::i();
    if d.delta == 0.0 {
        return -i * d.g * t * C64::from_polar(1.0, -omega_m * t);
    }
    -(2.0 * i * d.g / d.delta) * (0.5 * d.delta * t).sin() * C64::from_polar(1.0, -(omega_m - 0.5 * d.delta) * t)
}

/// Weight angle `mu(t) = 2 xi sin(omega_0 t)`.
pub fn mu_of_t(params: &SystemParams, t: f64) -> f64 {
    2.0 * params.xi * (params.omega_0 * t).sin()
}

/// Global phase of the rotating-wave state. At `delta = 0` only the
/// `-omega_c t` part is returned; the phase has no observable effect.
pub fn theta_of_t(params: &SystemParams, d: &DerivedModulation, t: f64) -> f64 {
    if d.delta == 0.0 {
        return -params.omega_c * t;
    }
    let r = d.g / d.delta;
    -(params.omega_c - d.g * r) * t - r * r * (d.delta * t).sin()
}

/// Superposition `weight_plus |beta> + weight_minus |-beta>` (unnormalized
/// weights).
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CatState {
    pub beta: C64,
    pub weight_plus: C64,
    pub weight_minus: C64,
}

impl CatState {
    pub fn new(beta: C64, weight_plus: C64, weight_minus: C64) -> Self {
        Self { beta, weight_plus, weight_minus }
    }

    /// `<-beta|beta> = e^{-2|beta|^2}` (real).
    pub fn overlap(&self) -> f64 {
        (-2.0 * self.beta.norm_sqr()).exp()
    }

    /// Squared norm of the unnormalized superposition.
    pub fn norm_sqr(&self) -> f64 {
        let (a, b) = (self.weight_plus, self.weight_minus);
        a.norm_sqr() + b.norm_sqr() + 2.0 * self.overlap() * (a.conj() * b).re
    }

    /// Weights rescaled to unit norm.
    pub fn normalized(&self) -> Self {
        let s = self.norm_sqr().sqrt();
        Self::new(self.beta, self.weight_plus / s, self.weight_minus / s)
    }

    /// Normalized Fock amplitudes on the retained ladder.
    pub fn fock_coeffs(&self, cutoff: FockCutoff) -> Array1<C64> {
        let n = self.normalized();
        let plus = coherent_coeffs(self.beta, cutoff);
        Array1::from_iter(plus.iter().enumerate().map(|(k, c)| {
            let parity = if k % 2 == 0 { 1.0 } else { -1.0 };
            *c * (n.weight_plus + parity * n.weight_minus)
        }))
    }

    /// The same superposition with `beta -> -beta`.
    pub fn mirrored(&self) -> Self {
        Self::new(-self.beta, self.weight_plus, self.weight_minus)
    }
}

/// A mechanical-mode state: analytic cat, pure Fock vector or density
/// matrix.
#[derive(Clone, Debug, PartialEq)]
pub enum MechanicalState {
    Cat(CatState),
    Pure(Array1<C64>),
    Mixed(Array2<C64>),
}

impl MechanicalState {
    /// Density matrix on the given ladder. Pure and mixed states keep their
    /// own dimension when `cutoff` is `None`.
    pub fn density_matrix(&self, cutoff: Option<FockCutoff>) -> Array2<C64> {
        let resize = |m: Array2<C64>| match cutoff {
            Some(c) if c.dim() != m.nrows() => {
                let d = c.dim();
                let k = d.min(m.nrows());
                let mut out = Array2::zeros((d, d));
                out.slice_mut(s![..k, ..k]).assign(&m.slice(s![..k, ..k]));
                out
            }
            _ => m,
        };
        match self {
            Self::Cat(cat) => {
                let v = cat.fock_coeffs(cutoff.unwrap_or_else(|| FockCutoff::for_amplitude(cat.beta.norm_sqr())));
                outer(&v)
            }
            Self::Pure(v) => resize(outer(v)),
            Self::Mixed(m) => resize(m.clone()),
        }
    }

    /// `<phi|rho|phi>` against a cat state.
    pub fn fidelity(&self, target: &CatState) -> f64 {
        match self {
            Self::Cat(cat) => {
                let cut = FockCutoff::for_amplitude(cat.beta.norm_sqr().max(target.beta.norm_sqr()));
                let a = cat.fock_coeffs(cut);
                let b = target.fock_coeffs(cut);
                a.iter().zip(b.iter()).map(|(x, y)| y.conj() * x).sum::<C64>().norm_sqr()
            }
            Self::Pure(v) => {
                let phi = target.fock_coeffs(FockCutoff::new(v.len() - 1).expect("non-empty"));
                phi.iter().zip(v.iter()).map(|(p, x)| p.conj() * x).sum::<C64>().norm_sqr()
            }
            Self::Mixed(m) => {
                let phi = target.fock_coeffs(FockCutoff::new(m.nrows() - 1).expect("non-empty"));
                let rho_phi = m.dot(&phi);
                phi.iter().zip(rho_phi.iter()).map(|(p, r)| p.conj() * r).sum::<C64>().re
            }
        }
    }
}

fn outer(v: &Array1<C64>) -> Array2<C64> {
    Array2::from_shape_fn((v.len(), v.len()), |(i, j)| v[i] * v[j].conj())
}

/// Target mechanical states conditioned on the photon being found in the
/// left or right cavity:
/// `phi_L = cos(mu/2)|beta> + i sin(mu/2)|-beta>`, `phi_R` its mirror.
pub fn target_states(params: &SystemParams, d: &DerivedModulation, t: f64) -> (CatState, CatState) {
    let beta = beta_of_t(d, params.omega_m, t);
    let half = 0.5 * mu_of_t(params, t);
    let left = CatState::new(beta, C64::from(half.cos()), C64::new(0.0, half.sin()));
    (left.normalized(), left.mirrored().normalized())
}

/// Heralding probability estimate `exp(-4 pi gamma_c / g0)` at `delta = g`.
pub fn success_probability_estimate(params: &SystemParams) -> f64 {
    (-4.0 * PI * params.gamma_c / params.g0).exp()
}
