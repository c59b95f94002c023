//! Neumann eigenbasis of the unit square, discrete Helmholtz projections and
//! acoustic mode diagnostics.
//!
//! Vector fields are expanded in orthonormal discrete trig bases on the cell
//! centres: `v_x` in `s_k(x) c_l(y)` and `v_y` in `c_k(x) s_l(y)`, where
//! `c_k = √2 cos(kπ·)` (`c_0 = 1`) and `s_k = √2 sin(kπ·)` (`s_n = sin(nπ·)`).
//! Every gradient of a Neumann cosine mode lies in one coefficient pair, so the
//! projections are exact in coefficient space.

use crate::error::{Error, Result};
use crate::fluid::FluidState;
use crate::grid::Grid;
use crate::params::ModelParams;
use crate::scalar::{c, Real};

/// One Neumann mode `ζ = c_k(x) c_l(y)` with `Λ = π²(k²+l²)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Mode<T> {
    pub k: usize,
    pub l: usize,
    pub lambda: T,
    /// `ζ` at cell centres.
    pub zeta: Vec<T>,
    /// `∇ζ` at cell centres.
    pub grad: (Vec<T>, Vec<T>),
}

#[derive(Clone, Debug)]
struct Trig<T> {
    /// `cos[k][i]`, `k < n`.
    cos: Vec<Vec<T>>,
    /// `sin[k-1][i]`, `1 ≤ k ≤ n`.
    sin: Vec<Vec<T>>,
}

impl<T: Real> Trig<T> {
    fn new(n: usize) -> Self {
        let sq2 = c::<T>(2.0).sqrt();
        let x = |i: usize| (T::from_usize_lossy(i) + c(0.5)) / T::from_usize_lossy(n);
        let pi = T::PI();
        let cos = (0..n)
            .map(|k| {
                let s = if k == 0 { T::one() } else { sq2 };
                (0..n).map(|i| s * (pi * T::from_usize_lossy(k) * x(i)).cos()).collect()
            })
            .collect();
        let sin = (1..=n)
            .map(|k| {
                let s = if k == n { T::one() } else { sq2 };
                (0..n).map(|i| s * (pi * T::from_usize_lossy(k) * x(i)).sin()).collect()
            })
            .collect();
        Self { cos, sin }
    }
}

/// Spectral coefficients of a vector field. `ax[k-1][l]` multiplies
/// `s_k(x)c_l(y)`; `ay[k][l-1]` multiplies `c_k(x)s_l(y)`.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorSpectrum<T> {
    pub ax: Vec<Vec<T>>,
    pub ay: Vec<Vec<T>>,
}

/// Neumann eigenbasis together with the transforms it needs.
#[derive(Clone, Debug)]
pub struct SpectralBasis<T> {
    pub grid: Grid<T>,
    pub modes: Vec<Mode<T>>,
    tx: Trig<T>,
    ty: Trig<T>,
}

/// Helmholtz split `v = H[v] + H⊥[v]` with `H⊥[v] = ∇Φ`.
#[derive(Clone, Debug, PartialEq)]
pub struct Helmholtz<T> {
    pub solenoidal: (Vec<T>, Vec<T>),
    pub gradient: (Vec<T>, Vec<T>),
    pub potential: Vec<T>,
}

/// Number of nonconstant Neumann modes the grid resolves.
pub fn nyquist_modes<T: Real>(grid: &Grid<T>) -> usize {
    grid.nx * grid.ny - 1
}

/// First `n_modes` Neumann modes sorted by `(Λ, k, l)`, the constant excluded.
pub fn neumann_eigenbasis<T: Real>(grid: &Grid<T>, n_modes: usize) -> Result<SpectralBasis<T>> {
    let available = nyquist_modes(grid);
    if n_modes > available {
        return Err(Error::BeyondNyquist { requested: n_modes, available });
    }
    let mut idx: Vec<(usize, usize)> = (0..grid.nx)
        .flat_map(|k| (0..grid.ny).map(move |l| (k, l)))
        .filter(|&kl| kl != (0, 0))
        .collect();
    idx.sort_by_key(|&(k, l)| (k * k + l * l, k, l));
    idx.truncate(n_modes);
    let tx = Trig::new(grid.nx);
    let ty = Trig::new(grid.ny);
    let pi = T::PI();
    let modes = idx
        .into_iter()
        .map(|(k, l)| {
            let (kf, lf) = (T::from_usize_lossy(k), T::from_usize_lossy(l));
            let mut zeta = Vec::with_capacity(grid.cells());
            let mut gx = Vec::with_capacity(grid.cells());
            let mut gy = Vec::with_capacity(grid.cells());
            for j in 0..grid.ny {
                for i in 0..grid.nx {
                    zeta.push(tx.cos[k][i] * ty.cos[l][j]);
                    gx.push(if k == 0 { T::zero() } else { -pi * kf * tx.sin[k - 1][i] * ty.cos[l][j] });
                    gy.push(if l == 0 { T::zero() } else { -pi * lf * tx.cos[k][i] * ty.sin[l - 1][j] });
                }
            }
            Mode { k, l, lambda: pi * pi * (kf * kf + lf * lf), zeta, grad: (gx, gy) }
        })
        .collect();
    Ok(SpectralBasis { grid: *grid, modes, tx, ty })
}

/// `out[p][q] = (1/(nx·ny)) Σ_ij f[i,j] bx[p][i] by[q][j]`.
fn analyse<T: Real>(f: &[T], nx: usize, ny: usize, bx: &[Vec<T>], by: &[Vec<T>]) -> Vec<Vec<T>> {
    let mut tmp = vec![vec![T::zero(); ny]; bx.len()];
    for (p, row) in bx.iter().enumerate() {
        for j in 0..ny {
            let mut s = T::zero();
            for i in 0..nx {
                s += f[i + nx * j] * row[i];
            }
            tmp[p][j] = s / T::from_usize_lossy(nx);
        }
    }
    tmp.iter()
        .map(|t| by.iter().map(|col| t.iter().zip(col).map(|(&a, &b)| a * b).sum::<T>() / T::from_usize_lossy(ny)).collect())
        .collect()
}

/// Inverse of [`analyse`].
fn synthesise<T: Real>(a: &[Vec<T>], nx: usize, ny: usize, bx: &[Vec<T>], by: &[Vec<T>]) -> Vec<T> {
    // tmp[p][j] = Σ_q a[p][q] by[q][j]
    let tmp: Vec<Vec<T>> = a
        .iter()
        .map(|ap| (0..ny).map(|j| ap.iter().zip(by).map(|(&c, b)| c * b[j]).sum()).collect())
        .collect();
    let mut out = vec![T::zero(); nx * ny];
    for j in 0..ny {
        for i in 0..nx {
            out[i + nx * j] = tmp.iter().zip(bx).map(|(t, b)| t[j] * b[i]).sum();
        }
    }
    out
}

impl<T: Real> SpectralBasis<T> {
    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn spectrum(&self, vx: &[T], vy: &[T]) -> VectorSpectrum<T> {
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        VectorSpectrum {
            ax: analyse(vx, nx, ny, &self.tx.sin, &self.ty.cos),
            ay: analyse(vy, nx, ny, &self.tx.cos, &self.ty.sin),
        }
    }

    pub fn field(&self, s: &VectorSpectrum<T>) -> (Vec<T>, Vec<T>) {
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        (synthesise(&s.ax, nx, ny, &self.tx.sin, &self.ty.cos), synthesise(&s.ay, nx, ny, &self.tx.cos, &self.ty.sin))
    }

    /// Gradient part of the spectrum restricted to the index set `keep`, plus
    /// the cosine coefficients of its potential.
    fn gradient_part(&self, s: &VectorSpectrum<T>, keep: impl Fn(usize, usize) -> bool) -> (VectorSpectrum<T>, Vec<Vec<T>>) {
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        let mut g = VectorSpectrum { ax: vec![vec![T::zero(); ny]; nx], ay: vec![vec![T::zero(); ny]; nx] };
        let mut phi = vec![vec![T::zero(); ny]; nx];
        for k in 0..nx {
            for l in 0..ny {
                if (k, l) == (0, 0) || !keep(k, l) {
                    continue;
                }
                let (kf, lf) = (T::from_usize_lossy(k), T::from_usize_lossy(l));
                let ax = if k > 0 { s.ax[k - 1][l] } else { T::zero() };
                let ay = if l > 0 { s.ay[k][l - 1] } else { T::zero() };
                let k2 = kf * kf + lf * lf;
                let proj = (kf * ax + lf * ay) / k2;
                if k > 0 {
                    g.ax[k - 1][l] = kf * proj;
                }
                if l > 0 {
                    g.ay[k][l - 1] = lf * proj;
                }
                phi[k][l] = -proj / T::PI();
            }
        }
        (g, phi)
    }

    /// Full discrete Helmholtz decomposition.
    pub fn helmholtz_project(&self, vx: &[T], vy: &[T]) -> Helmholtz<T> {
        let s = self.spectrum(vx, vy);
        let (g, phi) = self.gradient_part(&s, |_, _| true);
        let (gx, gy) = self.field(&g);
        let sx = vx.iter().zip(&gx).map(|(&a, &b)| a - b).collect();
        let sy = vy.iter().zip(&gy).map(|(&a, &b)| a - b).collect();
        let potential = synthesise(&phi, self.grid.nx, self.grid.ny, &self.tx.cos, &self.ty.cos);
        Helmholtz { solenoidal: (sx, sy), gradient: (gx, gy), potential }
    }

    /// `H[v]` only.
    pub fn solenoidal(&self, vx: &[T], vy: &[T]) -> (Vec<T>, Vec<T>) {
        self.helmholtz_project(vx, vy).solenoidal
    }

    /// Spectral divergence at cell centres.
    pub fn divergence(&self, vx: &[T], vy: &[T]) -> Vec<T> {
        let s = self.spectrum(vx, vy);
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        let pi = T::PI();
        let d: Vec<Vec<T>> = (0..nx)
            .map(|k| {
                (0..ny)
                    .map(|l| {
                        let ax = if k > 0 { s.ax[k - 1][l] } else { T::zero() };
                        let ay = if l > 0 { s.ay[k][l - 1] } else { T::zero() };
                        pi * (T::from_usize_lossy(k) * ax + T::from_usize_lossy(l) * ay)
                    })
                    .collect()
            })
            .collect();
        synthesise(&d, nx, ny, &self.tx.cos, &self.ty.cos)
    }

    /// Gradient part carried by the first `n` modes of the basis.
    pub fn pn_truncate(&self, vx: &[T], vy: &[T], n: usize) -> Result<(Vec<T>, Vec<T>)> {
        if n > self.len() {
            return Err(Error::BeyondNyquist { requested: n, available: self.len() });
        }
        let keep: std::collections::HashSet<(usize, usize)> = self.modes[..n].iter().map(|m| (m.k, m.l)).collect();
        let s = self.spectrum(vx, vy);
        let (g, _) = self.gradient_part(&s, |k, l| keep.contains(&(k, l)));
        Ok(self.field(&g))
    }

    /// Evaluates the `x`-component series of a spectrum at an arbitrary point.
    pub fn eval_x(&self, s: &VectorSpectrum<T>, x: T, y: T) -> T {
        let sq2 = c::<T>(2.0).sqrt();
        let pi = T::PI();
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        let mut v = T::zero();
        for k in 1..=nx {
            let sk = if k == nx { T::one() } else { sq2 } * (pi * T::from_usize_lossy(k) * x).sin();
            for l in 0..ny {
                let cl = if l == 0 { T::one() } else { sq2 } * (pi * T::from_usize_lossy(l) * y).cos();
                v += s.ax[k - 1][l] * sk * cl;
            }
        }
        v
    }

    /// `(b_n, a_n)` for every mode: `b_n = ∫ r ζ_n`, `a_n = Λ_n^{-1/2} ∫ ρu·∇ζ_n`
    /// with `r = (ρ − ρ̄)/ε`.
    pub fn mode_coefficients(&self, state: &FluidState<T>, params: &ModelParams<T>) -> Vec<(T, T)> {
        let area = self.grid.cell_area();
        self.modes
            .iter()
            .map(|m| {
                let mut b = T::zero();
                let mut a = T::zero();
                for k in 0..self.grid.cells() {
                    b += (state.rho[k] - params.rho_bar) / params.epsilon * m.zeta[k];
                    a += state.mx[k] * m.grad.0[k] + state.my[k] * m.grad.1[k];
                }
                (b * area, a * area / m.lambda.sqrt())
            })
            .collect()
    }
}

/// Time series of mode coefficients sampled at a fixed stride.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AcousticTrace<T> {
    pub modes: Vec<(usize, usize)>,
    pub lambdas: Vec<T>,
    pub times: Vec<T>,
    /// `samples[s][n] = (b_n, a_n)` at `times[s]`.
    pub samples: Vec<Vec<(T, T)>>,
}

impl<T: Real> AcousticTrace<T> {
    pub fn new(basis: &SpectralBasis<T>, tracked: usize) -> Self {
        let m = &basis.modes[..tracked.min(basis.len())];
        Self {
            modes: m.iter().map(|m| (m.k, m.l)).collect(),
            lambdas: m.iter().map(|m| m.lambda).collect(),
            times: Vec::new(),
            samples: Vec::new(),
        }
    }

    pub fn push(&mut self, t: T, coeffs: &[(T, T)]) {
        self.times.push(t);
        self.samples.push(coeffs[..self.modes.len()].to_vec());
    }
}

/// Diagnostics of one tracked mode.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModeResidual<T> {
    pub k: usize,
    pub l: usize,
    /// Max of `|ε ḃ − √Λ a|` over interior samples, normalised by `max |√Λ a|`.
    pub first_equation: T,
    /// Max of `|ε ȧ + p′(ρ̄)√Λ b|`, the empirical `εL` term (unnormalised).
    pub second_equation: T,
    pub fitted_omega: T,
    pub theory_omega: T,
}

/// Checks the oscillator structure of every tracked mode and fits its frequency.
pub fn acoustic_residual<T: Real>(trace: &AcousticTrace<T>, params: &ModelParams<T>) -> Result<Vec<ModeResidual<T>>> {
    let ns = trace.times.len();
    if ns < 3 {
        return Err(Error::InvalidParams(format!("acoustic trace needs at least 3 samples (got {ns})")));
    }
    let dt = (trace.times[ns - 1] - trace.times[0]) / T::from_usize_lossy(ns - 1);
    let eps = params.epsilon;
    let dp = params.c_p * params.gamma * params.rho_bar.powf(params.gamma - T::one());
    let two = c::<T>(2.0);
    trace
        .modes
        .iter()
        .enumerate()
        .map(|(n, &(k, l))| {
            let sl = trace.lambdas[n].sqrt();
            let b: Vec<T> = trace.samples.iter().map(|s| s[n].0).collect();
            let a: Vec<T> = trace.samples.iter().map(|s| s[n].1).collect();
            let amp = a.iter().fold(T::zero(), |m, &v| m.max((sl * v).abs()));
            let (mut r1, mut r2) = (T::zero(), T::zero());
            for s in 1..ns - 1 {
                let db = (b[s + 1] - b[s - 1]) / (two * dt);
                let da = (a[s + 1] - a[s - 1]) / (two * dt);
                r1 = r1.max((eps * db - sl * a[s]).abs());
                r2 = r2.max((eps * da + dp * sl * b[s]).abs());
            }
            let first_equation = if amp > T::zero() { r1 / amp } else { r1 };
            Ok(ModeResidual {
                k,
                l,
                first_equation,
                second_equation: r2,
                fitted_omega: fit_frequency(&b, dt)?,
                theory_omega: (dp * trace.lambdas[n]).sqrt() / eps,
            })
        })
        .collect()
}

/// Angular frequency of the dominant oscillation of a uniformly sampled
/// signal: Hann-windowed, zero-padded DFT with quadratic peak interpolation.
pub fn fit_frequency<T: Real>(signal: &[T], dt: T) -> Result<T> {
    let n = signal.len();
    let mean = signal.iter().copied().sum::<T>() / T::from_usize_lossy(n);
    if signal.iter().all(|&v| (v - mean).abs() <= T::epsilon() * mean.abs().max(T::min_positive_value())) {
        return Err(Error::NoSignal);
    }
    let two_pi = c::<T>(2.0) * T::PI();
    let w: Vec<T> = (0..n)
        .map(|i| {
            let hann = c::<T>(0.5) * (T::one() - (two_pi * T::from_usize_lossy(i) / T::from_usize_lossy(n - 1)).cos());
            (signal[i] - mean) * hann
        })
        .collect();
    let m = (16 * n).next_power_of_two();
    let power = |bin: usize| {
        let f = two_pi * T::from_usize_lossy(bin) / T::from_usize_lossy(m);
        let (mut re, mut im) = (T::zero(), T::zero());
        for (i, &v) in w.iter().enumerate() {
            let ph = f * T::from_usize_lossy(i);
            re += v * ph.cos();
            im -= v * ph.sin();
        }
        re * re + im * im
    };
    // coarse scan every `stride` bins, then the full padded resolution near the peak
    let stride = 4;
    let coarse = (1..=m / 2).step_by(stride).fold((1, T::zero()), |(bi, bv), i| {
        let v = power(i);
        if v > bv {
            (i, v)
        } else {
            (bi, bv)
        }
    });
    let lo = coarse.0.saturating_sub(stride).max(1);
    let hi = (coarse.0 + stride).min(m / 2);
    let (peak, _) = (lo..=hi).fold((lo, T::zero()), |(bi, bv), i| {
        let v = power(i);
        if v > bv {
            (i, v)
        } else {
            (bi, bv)
        }
    });
    let mut pos = T::from_usize_lossy(peak);
    if peak > 1 && peak < m / 2 {
        let (y0, y1, y2) = (power(peak - 1), power(peak), power(peak + 1));
        let denom = y0 - c::<T>(2.0) * y1 + y2;
        if denom != T::zero() {
            pos += c::<T>(0.5) * (y0 - y2) / denom;
        }
    }
    Ok(two_pi * pos / (T::from_usize_lossy(m) * dt))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn basis(n: usize) -> SpectralBasis<f64> {
        let g = Grid::square(n);
        neumann_eigenbasis(&g, nyquist_modes(&g)).unwrap()
    }

    fn dot(g: &Grid<f64>, a: &(Vec<f64>, Vec<f64>), b: &(Vec<f64>, Vec<f64>)) -> f64 {
        (a.0.iter().zip(&b.0).map(|(x, y)| x * y).sum::<f64>() + a.1.iter().zip(&b.1).map(|(x, y)| x * y).sum::<f64>())
            * g.cell_area()
    }

    fn max_abs(v: &[f64]) -> f64 {
        v.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    #[test]
    fn first_mode_and_orthonormality() {
        let b = basis(8);
        let m = &b.modes[0];
        assert_eq!((m.k, m.l), (0, 1));
        let m = &b.modes[1];
        assert_eq!((m.k, m.l), (1, 0));
        assert!((m.lambda - PI * PI).abs() < 1e-12);
        let g = b.grid;
        let expect = g.sample(|x, _| 2f64.sqrt() * (PI * x).cos());
        assert!(m.zeta.iter().zip(&expect).all(|(a, e)| (a - e).abs() < 1e-13));
        assert!(b.modes.iter().all(|m| (m.k, m.l) != (0, 0)));
        for p in &b.modes[..20] {
            for q in &b.modes[..20] {
                let ip = g.integrate(&p.zeta.iter().zip(&q.zeta).map(|(a, b)| a * b).collect::<Vec<_>>());
                let e = if p.k == q.k && p.l == q.l { 1.0 } else { 0.0 };
                assert!((ip - e).abs() < 1e-10);
            }
        }
        assert!(matches!(neumann_eigenbasis(&g, 64), Err(Error::BeyondNyquist { requested: 64, available: 63 })));
    }

    #[test]
    fn discrete_neumann_eigen_residual() {
        // five-point Laplacian with reflective ghosts applied to ζ
        let b = basis(16);
        let g = b.grid;
        for m in &b.modes[..6] {
            let z = &m.zeta;
            let at = |i: isize, j: isize| z[g.idx(i.clamp(0, 15) as usize, j.clamp(0, 15) as usize)];
            let mut worst = 0.0f64;
            for j in 0..16isize {
                for i in 0..16isize {
                    let lap = (at(i + 1, j) + at(i - 1, j) + at(i, j + 1) + at(i, j - 1) - 4.0 * at(i, j)) * 256.0;
                    worst = worst.max((-lap - m.lambda * at(i, j)).abs());
                }
            }
            assert!(worst < 0.05 * m.lambda * 2.0, "mode {:?}: {worst}", (m.k, m.l));
        }
    }

    #[test]
    fn helmholtz_examples() {
        let b = basis(16);
        let g = b.grid;
        // pure gradient of cos(πx)
        let vx = g.sample(|x, _| -PI * (PI * x).sin());
        let vy = vec![0.0; 256];
        let h = b.helmholtz_project(&vx, &vy);
        assert!(max_abs(&h.solenoidal.0) < 1e-12 && max_abs(&h.solenoidal.1) < 1e-12);
        // solenoidal stream-function field
        let vx = g.sample(|x, y| -PI * (PI * x).sin() * (PI * y).cos());
        let vy = g.sample(|x, y| PI * (PI * x).cos() * (PI * y).sin());
        let h = b.helmholtz_project(&vx, &vy);
        assert!(max_abs(&h.gradient.0) < 1e-12 && max_abs(&h.gradient.1) < 1e-12);
        // constant field is all gradient, potential x − 1/2 up to its mean-free discretisation
        let h = b.helmholtz_project(&vec![1.0; 256], &vec![0.0; 256]);
        assert!(max_abs(&h.solenoidal.0) < 1e-12 && max_abs(&h.solenoidal.1) < 1e-12);
        let err16 = potential_error(&b, &h.potential);
        let b32 = basis(32);
        let h32 = b32.helmholtz_project(&vec![1.0; 1024], &vec![0.0; 1024]);
        let err32 = potential_error(&b32, &h32.potential);
        assert!(err16 < 1e-2 && err32 < 0.6 * err16, "{err16} {err32}");
        // leading cosine coefficient of x − 1/2 is −2√2/π²
        let i10 = b32.modes.iter().position(|m| (m.k, m.l) == (1, 0)).unwrap();
        let c1 = b32.grid.integrate(&h32.potential.iter().zip(&b32.modes[i10].zeta).map(|(p, z)| p * z).collect::<Vec<_>>());
        let oracle = -2.0 * 2f64.sqrt() / (PI * PI);
        assert!(((c1 - oracle) / oracle).abs() < 1e-2, "{c1} vs {oracle}");
    }

    fn potential_error(b: &SpectralBasis<f64>, phi: &[f64]) -> f64 {
        max_abs(&phi.iter().zip(b.grid.sample(|x, _| x - 0.5)).map(|(p, e)| p - e).collect::<Vec<_>>())
    }

    #[test]
    fn solenoidal_part_has_no_normal_trace() {
        let b = basis(8);
        let g = b.grid;
        let vx = g.sample(|x, y| 1.0 + x * y);
        let vy = g.sample(|x, y| (3.0 * x).sin() - y);
        let (sx, sy) = b.solenoidal(&vx, &vy);
        let s = b.spectrum(&sx, &sy);
        for y in [0.1, 0.37, 0.9] {
            assert!(b.eval_x(&s, 0.0, y).abs() < 1e-12);
            assert!(b.eval_x(&s, 1.0, y).abs() < 1e-12);
        }
        assert!(max_abs(&b.divergence(&sx, &sy)) < 1e-10);
    }

    #[test]
    fn projection_algebra_on_random_fields() {
        let b = basis(16);
        let g = b.grid;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let mut f = || (0..256).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>();
            let (vx, vy, wx, wy) = (f(), f(), f(), f());
            let hv = b.helmholtz_project(&vx, &vy);
            let hw = b.helmholtz_project(&wx, &wy);
            assert!(dot(&g, &hv.solenoidal, &hw.gradient).abs() < 1e-10);
            let again = b.solenoidal(&hv.solenoidal.0, &hv.solenoidal.1);
            assert!(max_abs(&again.0.iter().zip(&hv.solenoidal.0).map(|(a, c)| a - c).collect::<Vec<_>>()) < 1e-10);
            assert!(max_abs(&again.1.iter().zip(&hv.solenoidal.1).map(|(a, c)| a - c).collect::<Vec<_>>()) < 1e-10);
            assert!(max_abs(&b.divergence(&hv.solenoidal.0, &hv.solenoidal.1)) < 1e-10);
            for k in 0..256 {
                assert!((hv.solenoidal.0[k] + hv.gradient.0[k] - vx[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn truncation_properties() {
        let b = basis(8);
        let g = b.grid;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let vx: Vec<f64> = (0..64).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let vy: Vec<f64> = (0..64).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let full = b.helmholtz_project(&vx, &vy).gradient;
        let all = b.pn_truncate(&vx, &vy, b.len()).unwrap();
        assert!(max_abs(&all.0.iter().zip(&full.0).map(|(a, c)| a - c).collect::<Vec<_>>()) < 1e-10);
        let mut prev = f64::INFINITY;
        for n in [1, 3, 10, 30, 63] {
            let t = b.pn_truncate(&vx, &vy, n).unwrap();
            let tail = (full.0.iter().zip(&t.0).map(|(a, c)| (a - c).powi(2)).sum::<f64>()
                + full.1.iter().zip(&t.1).map(|(a, c)| (a - c).powi(2)).sum::<f64>())
                * g.cell_area();
            assert!(tail <= prev + 1e-14);
            prev = tail;
            let tt = b.pn_truncate(&t.0, &t.1, n).unwrap();
            assert!(max_abs(&tt.0.iter().zip(&t.0).map(|(a, c)| a - c).collect::<Vec<_>>()) < 1e-12);
        }
        let m = &b.modes[1];
        let t = b.pn_truncate(&m.grad.0, &m.grad.1, 2).unwrap();
        assert!(max_abs(&t.0.iter().zip(&m.grad.0).map(|(a, c)| a - c).collect::<Vec<_>>()) < 1e-12);
        assert!(b.pn_truncate(&vx, &vy, 64).is_err());
    }

    #[test]
    fn mode_coefficient_examples() {
        let b = basis(8);
        let g = b.grid;
        let p = ModelParams::default();
        let rho = g.sample(|x, _| 1.0 + 0.1 * 2f64.sqrt() * (PI * x).cos());
        let st = FluidState::from_primitive(rho, &[0.0; 64], &[0.0; 64]);
        let c = b.mode_coefficients(&st, &p);
        let i10 = b.modes.iter().position(|m| (m.k, m.l) == (1, 0)).unwrap();
        assert!((c[i10].0 - 1.0).abs() < 1e-12);
        for (n, &(bn, an)) in c.iter().enumerate() {
            assert_eq!(an, 0.0);
            if n != i10 {
                assert!(bn.abs() < 1e-12);
            }
        }
        // constant momentum: only the boundary term ∮ζ V·n survives, which
        // cancels when both wavenumbers are even
        let st = FluidState::from_primitive(vec![1.0; 64], &[0.3; 64], &[-0.2; 64]);
        let c = b.mode_coefficients(&st, &p);
        for (m, &(bn, an)) in b.modes.iter().zip(&c) {
            assert_eq!(bn, 0.0);
            if m.k % 2 == 0 && m.l % 2 == 0 {
                assert!(an.abs() < 1e-12);
            }
        }
        let oracle = 0.3 * -2.0 * 2f64.sqrt() / PI;
        assert!(((c[i10].1 - oracle) / oracle).abs() < 1e-2);
    }

    #[test]
    fn parseval_for_density_coefficients() {
        let b = basis(8);
        let g = b.grid;
        let p = ModelParams::default();
        let rho = g.sample(|x, y| 1.0 + 0.05 * (x * x - 1.0 / 3.0) * (2.0 + y));
        let st = FluidState::from_primitive(rho.clone(), &[0.0; 64], &[0.0; 64]);
        let c = b.mode_coefficients(&st, &p);
        let r: Vec<f64> = rho.iter().map(|v| (v - 1.0) / 0.1).collect();
        let mean = g.integrate(&r);
        let norm2 = r.iter().map(|v| (v - mean).powi(2)).sum::<f64>() * g.cell_area();
        let mut partial = 0.0;
        for (bn, _) in &c {
            partial += bn * bn;
            assert!(partial <= norm2 + 1e-12);
        }
        assert!((partial - norm2).abs() < 1e-12);
    }

    #[test]
    fn synthetic_oscillator_trace() {
        let p: ModelParams<f64> = ModelParams::default();
        let lambda: f64 = PI * PI;
        let omega = (2.0 * lambda).sqrt() / p.epsilon;
        assert!((omega - 44.429).abs() < 1e-3);
        let mut tr = AcousticTrace { modes: vec![(1, 0)], lambdas: vec![lambda], ..Default::default() };
        let dt = 1e-3;
        for s in 0..2000 {
            let t = s as f64 * dt;
            let b = (omega * t).cos();
            let a = -p.epsilon * omega / lambda.sqrt() * (omega * t).sin();
            tr.push(t, &[(b, a)]);
        }
        let r = acoustic_residual(&tr, &p).unwrap()[0];
        assert!(r.first_equation < 1e-3, "{}", r.first_equation);
        assert!(((r.fitted_omega - omega) / omega).abs() < 1e-3, "{}", r.fitted_omega);
        assert!((r.theory_omega - omega).abs() < 1e-12);
        let zero = AcousticTrace { modes: vec![(1, 0)], lambdas: vec![lambda], times: vec![0.0, 1.0, 2.0], samples: vec![vec![(0.0, 0.0)]; 3] };
        assert!(matches!(acoustic_residual(&zero, &p), Err(Error::NoSignal)));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn residual_scales_with_stride_squared(stride in 1usize..4) {
            let p: ModelParams<f64> = ModelParams::default();
            let lambda: f64 = PI * PI;
            let omega = (2.0 * lambda).sqrt() / p.epsilon;
            let dt = 1e-3 * stride as f64;
            let mut tr = AcousticTrace { modes: vec![(1, 0)], lambdas: vec![lambda], ..Default::default() };
            for s in 0..400 {
                let t = s as f64 * dt;
                tr.push(t, &[((omega * t).cos(), -p.epsilon * omega / lambda.sqrt() * (omega * t).sin())]);
            }
            let r = acoustic_residual(&tr, &p).unwrap()[0];
            prop_assert!(r.first_equation <= (omega * dt).powi(2) / 6.0 * 1.01);
        }
    }
}
