use catforge::open::{rhs_lindblad, SystemDensityMatrix};
use catforge::{FockCutoff, SystemParams};
use ndarray::Array2;
use num_complex::Complex64 as C64;

const I: C64 = C64::new(0.0, 1.0);

pub fn lossy() -> SystemParams {
    let mut p = SystemParams::tuned(20.0, 1.5271, 1, 1.0).with_losses(0.3, 0.05, 1.5);
    p.omega_c = 2.3;
    p
}

pub fn random_density(d: usize, seed: u64) -> Array2<C64> {
    let mut x = seed;
    let mut next = move || {
        x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((x >> 11) as f64 / (1u64 << 53) as f64) - 0.5
    };
    let a = Array2::from_shape_fn((d, d), |_| C64::new(next(), next()));
    let rho = a.dot(&a.t().mapv(|c| c.conj()));
    let tr: f64 = rho.diag().iter().map(|c| c.re).sum();
    rho / C64::from(tr)
}

/// Photon labels `(left, right)` of each sector, in storage order.
pub const LABELS: [(i64, i64); 3] = [(1, 0), (0, 1), (0, 0)];

/// The master equation written element by element over
/// `rho_{m,j,p,n,k,q}` with photon numbers `m, n` (left), `j, k` (right)
/// and phonon numbers `p, q`; anything outside the retained space is zero.
pub fn element_rhs(rho: &Array2<C64>, p: &SystemParams, t: f64, n_max: i64) -> Array2<C64> {
    let dim = (n_max + 1) as usize;
    let at = |m: i64, j: i64, pp: i64, n: i64, k: i64, q: i64| -> C64 {
        let row = LABELS.iter().position(|&l| l == (m, j));
        let col = LABELS.iter().position(|&l| l == (n, k));
        match (row, col) {
            (Some(r), Some(c)) if (0..=n_max).contains(&pp) && (0..=n_max).contains(&q) => {
                rho[[r * dim + pp as usize, c * dim + q as usize]]
            }
            _ => C64::from(0.0),
        }
    };
    let sq = |x: i64| (x.max(0) as f64).sqrt();
    let (wc, wm, g0, gc, gm, nth) = (p.omega_c, p.omega_m, p.g0, p.gamma_c, p.gamma_m, p.n_th);
    let hop = p.xi * p.omega_0 * (p.omega_0 * t).cos();
    let mut out = Array2::zeros(rho.raw_dim());
    for (r, &(m, j)) in LABELS.iter().enumerate() {
        for (c, &(n, k)) in LABELS.iter().enumerate() {
            for pp in 0..=n_max {
                for q in 0..=n_max {
                    let here = at(m, j, pp, n, k, q);
                    let diag = I * ((n - m + k - j) as f64 * wc + (q - pp) as f64 * wm)
                        - (gc / 2.0 * (m + n + j + k) as f64
                            + gm / 2.0 * ((2.0 * nth + 1.0) * (pp + q) as f64 + 2.0 * nth));
                    let mut v = diag * here;
                    v += -I
                        * hop
                        * (sq((n + 1) * k) * at(m, j, pp, n + 1, k - 1, q)
                            + sq(n * (k + 1)) * at(m, j, pp, n - 1, k + 1, q));
                    v += I
                        * hop
                        * (sq(m * (j + 1)) * at(m - 1, j + 1, pp, n, k, q)
                            + sq((m + 1) * j) * at(m + 1, j - 1, pp, n, k, q));
                    v += -I
                        * k as f64
                        * g0
                        * (sq(q) * at(m, j, pp, n, k, q - 1) + sq(q + 1) * at(m, j, pp, n, k, q + 1));
                    v += I
                        * j as f64
                        * g0
                        * (sq(pp + 1) * at(m, j, pp + 1, n, k, q) + sq(pp) * at(m, j, pp - 1, n, k, q));
                    v += gc
                        * (sq((m + 1) * (n + 1)) * at(m + 1, j, pp, n + 1, k, q)
                            + sq((j + 1) * (k + 1)) * at(m, j + 1, pp, n, k + 1, q));
                    v += gm
                        * (sq((pp + 1) * (q + 1)) * (nth + 1.0) * at(m, j, pp + 1, n, k, q + 1)
                            + sq(q * pp) * nth * at(m, j, pp - 1, n, k, q - 1));
                    out[[r * dim + pp as usize, c * dim + q as usize]] = v;
                }
            }
        }
    }
    out
}

pub fn rk4_step<F: Fn(&Array2<C64>, f64) -> Array2<C64>>(f: F, y: &Array2<C64>, t: f64, h: f64) -> Array2<C64> {
    let c = |x: f64| C64::from(x);
    let k1 = f(y, t);
    let k2 = f(&(y + &(&k1 * c(h / 2.0))), t + h / 2.0);
    let k3 = f(&(y + &(&k2 * c(h / 2.0))), t + h / 2.0);
    let k4 = f(&(y + &(&k3 * c(h))), t + h);
    y + &((&k1 + &(&k2 * c(2.0)) + &(&k3 * c(2.0)) + &k4) * c(h / 6.0))
}

pub fn max_diff(a: &Array2<C64>, b: &Array2<C64>) -> f64 {
    (a - b).iter().fold(0.0, |e, z| e.max(z.norm()))
}

pub fn block_rhs(rho: &Array2<C64>, p: &SystemParams, t: f64, cut: FockCutoff) -> Array2<C64> {
    rhs_lindblad(&SystemDensityMatrix::new(rho.clone(), cut, t).unwrap(), p)
}
