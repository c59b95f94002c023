//! Compressible isentropic Navier–Stokes on the slip-walled unit square with
//! polymer forcing. Finite volumes, MUSCL + Rusanov, SSP-RK2.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{Gradient, Grid, Sym2};
use crate::params::ModelParams;
use crate::scalar::{c, Real};

/// Density, momentum on cell centres.
#[derive(Clone, Debug, PartialEq)]
pub struct FluidState<T> {
    pub rho: Vec<T>,
    pub mx: Vec<T>,
    pub my: Vec<T>,
}

impl<T: Real> FluidState<T> {
    pub fn at_rest(cells: usize, rho_bar: T) -> Self {
        Self { rho: vec![rho_bar; cells], mx: vec![T::zero(); cells], my: vec![T::zero(); cells] }
    }

    /// From density and velocity.
    pub fn from_primitive(rho: Vec<T>, ux: &[T], uy: &[T]) -> Self {
        let mx = rho.iter().zip(ux).map(|(&r, &u)| r * u).collect();
        let my = rho.iter().zip(uy).map(|(&r, &u)| r * u).collect();
        Self { rho, mx, my }
    }

    pub fn velocity(&self) -> (Vec<T>, Vec<T>) {
        let ux = self.mx.iter().zip(&self.rho).map(|(&m, &r)| m / r).collect();
        let uy = self.my.iter().zip(&self.rho).map(|(&m, &r)| m / r).collect();
        (ux, uy)
    }

    pub fn min_density(&self) -> T {
        self.rho.iter().copied().fold(T::infinity(), T::min)
    }

    fn axpy(&mut self, a: T, r: &Self) {
        for (x, y) in self.rho.iter_mut().zip(&r.rho) {
            *x += a * *y;
        }
        for (x, y) in self.mx.iter_mut().zip(&r.mx) {
            *x += a * *y;
        }
        for (x, y) in self.my.iter_mut().zip(&r.my) {
            *x += a * *y;
        }
    }

    fn average(&mut self, other: &Self) {
        let h = c::<T>(0.5);
        for (x, y) in self.rho.iter_mut().zip(&other.rho) {
            *x = h * (*x + *y);
        }
        for (x, y) in self.mx.iter_mut().zip(&other.mx) {
            *x = h * (*x + *y);
        }
        for (x, y) in self.my.iter_mut().zip(&other.my) {
            *x = h * (*x + *y);
        }
    }
}

/// `p = c_p ρ^γ`.
pub fn pressure<T: Real>(params: &ModelParams<T>, rho: &[T]) -> Result<Vec<T>> {
    rho.iter()
        .map(|&r| {
            if r > T::zero() {
                Ok(params.c_p * r.powf(params.gamma))
            } else {
                Err(Error::NonpositiveDensity(r.to_f64_lossy()))
            }
        })
        .collect()
}

/// `P(ρ) − P′(ρ̄)(ρ−ρ̄) − P(ρ̄)` with `P = p/(γ−1)`.
pub fn pressure_potential<T: Real>(params: &ModelParams<T>, rho: &[T]) -> Result<Vec<T>> {
    let g = params.gamma;
    let rb = params.rho_bar;
    let big_p = |r: T| params.c_p * r.powf(g) / (g - T::one());
    let dp_bar = params.c_p * g / (g - T::one()) * rb.powf(g - T::one());
    rho.iter()
        .map(|&r| {
            if r > T::zero() {
                Ok((big_p(r) - dp_bar * (r - rb) - big_p(rb)).max(T::zero()))
            } else {
                Err(Error::NonpositiveDensity(r.to_f64_lossy()))
            }
        })
        .collect()
}

/// `S = μS(Du − (1/d) div u I) + μB div u I` for a `d×d` gradient
/// `g[a][b] = ∂_b u_a` (upper-left block of a 3×3 array).
pub fn stress<T: Real>(mu_s: T, mu_b: T, dim: usize, g: &[[T; 3]; 3]) -> [[T; 3]; 3] {
    let div = (0..dim).fold(T::zero(), |s, a| s + g[a][a]);
    let inv_d = T::one() / T::from_usize_lossy(dim);
    let mut s = [[T::zero(); 3]; 3];
    for a in 0..dim {
        for b in 0..dim {
            s[a][b] = mu_s * c::<T>(0.5) * (g[a][b] + g[b][a]);
        }
        s[a][a] += (mu_b - mu_s * inv_d) * div;
    }
    s
}

fn stress2<T: Real>(mu_s: T, mu_b: T, g: &Gradient<T>) -> Sym2<T> {
    let div = g[0][0] + g[1][1];
    let iso = (mu_b - mu_s * c::<T>(0.5)) * div;
    Sym2 { xx: mu_s * g[0][0] + iso, xy: mu_s * c::<T>(0.5) * (g[0][1] + g[1][0]), yy: mu_s * g[1][1] + iso }
}

/// Cell-centred Newtonian stress.
pub fn stress_field<T: Real>(grid: &Grid<T>, params: &ModelParams<T>, ux: &[T], uy: &[T]) -> Vec<Sym2<T>> {
    grid.velocity_gradient(ux, uy).iter().map(|g| stress2(params.mu_s, params.mu_b, g)).collect()
}

/// Slope limiter for the primitive-variable reconstruction.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Limiter {
    /// Piecewise-constant states.
    FirstOrder,
    Minmod,
    #[default]
    MonotonizedCentral,
}

impl Limiter {
    fn slope<T: Real>(self, a: T, b: T) -> T {
        if a * b <= T::zero() {
            return T::zero();
        }
        let s = a.signum();
        match self {
            Limiter::FirstOrder => T::zero(),
            Limiter::Minmod => s * a.abs().min(b.abs()),
            Limiter::MonotonizedCentral => {
                let two = c::<T>(2.0);
                s * (two * a.abs()).min(two * b.abs()).min(c::<T>(0.5) * (a + b).abs())
            }
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "first-order" | "none" => Some(Limiter::FirstOrder),
            "minmod" => Some(Limiter::Minmod),
            "mc" | "monotonized-central" => Some(Limiter::MonotonizedCentral),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Limiter::FirstOrder => "first-order",
            Limiter::Minmod => "minmod",
            Limiter::MonotonizedCentral => "mc",
        }
    }
}

/// Per-cell source `(ρ, m_x, m_y)` rates as a function of `(t, x, y)`.
pub type Source<'a, T> = &'a (dyn Fn(T, T, T) -> [T; 3] + Sync);

/// Explicit compressible solver bound to a grid and parameters.
#[derive(Clone, Debug)]
pub struct FluidSolver<T> {
    pub grid: Grid<T>,
    pub params: ModelParams<T>,
    pub limiter: Limiter,
    /// Scales reconstructed velocity jumps by the local Mach number so the
    /// momentum dissipation stays `O(|u|)` rather than `O(c/ε)`.
    pub low_mach: bool,
}

/// Primitive state `(ρ, normal velocity, tangential velocity)` at a face.
#[derive(Clone, Copy)]
struct Face<T> {
    rho: T,
    un: T,
    ut: T,
}

impl<T: Real> FluidSolver<T> {
    pub fn new(grid: Grid<T>, params: ModelParams<T>) -> Result<Self> {
        if params.dim != 2 {
            return Err(Error::Unsupported(format!("flow solver in dimension {}", params.dim)));
        }
        Ok(Self { grid, params, limiter: Limiter::default(), low_mach: true })
    }

    fn sound_speed(&self, rho: T) -> T {
        let p = &self.params;
        (p.c_p * p.gamma * rho.powf(p.gamma - T::one())).sqrt() / p.epsilon
    }

    fn floor(&self) -> T {
        c::<T>(1e-8) * self.params.rho_bar
    }

    /// Largest step allowed by the acoustic/advective and viscous limits.
    pub fn stable_dt(&self, state: &FluidState<T>) -> T {
        let g = &self.grid;
        let (mut ax, mut ay) = (T::zero(), T::zero());
        let mut rmin = T::infinity();
        for k in 0..g.cells() {
            let r = state.rho[k];
            let cs = self.sound_speed(r.max(T::min_positive_value()));
            ax = ax.max((state.mx[k] / r).abs() + cs);
            ay = ay.max((state.my[k] / r).abs() + cs);
            rmin = rmin.min(r);
        }
        let adv = T::one() / (ax / g.hx + ay / g.hy);
        let nu = (self.params.mu_s + self.params.mu_b) / rmin;
        let visc = T::one() / (c::<T>(2.0) * nu * (T::one() / (g.hx * g.hx) + T::one() / (g.hy * g.hy)));
        adv.min(visc)
    }

    /// One SSP-RK2 step with polymer stress `tau1` and number density `rho_p`
    /// frozen over the step.
    pub fn fluid_step(&self, state: &mut FluidState<T>, tau1: &[Sym2<T>], rho_p: &[T], dt: T) -> Result<()> {
        self.step_with_source(state, tau1, rho_p, dt, T::zero(), None)
    }

    /// [`FluidSolver::fluid_step`] with an additional volumetric source
    /// evaluated at stage times starting from `t`.
    pub fn step_with_source(
        &self,
        state: &mut FluidState<T>,
        tau1: &[Sym2<T>],
        rho_p: &[T],
        dt: T,
        t: T,
        source: Option<Source<'_, T>>,
    ) -> Result<()> {
        let limit = self.stable_dt(state);
        if dt > limit {
            return Err(Error::Cfl { stage: "fluid", dt: dt.to_f64_lossy(), suggested: limit.to_f64_lossy() });
        }
        let polymer = self.polymer_tensor(tau1, rho_p);
        let r0 = self.residual(state, &polymer, t, source)?;
        let mut s1 = state.clone();
        s1.axpy(dt, &r0);
        self.check_floor(&s1)?;
        let r1 = self.residual(&s1, &polymer, t + dt, source)?;
        s1.axpy(dt, &r1);
        state.average(&s1);
        self.check_floor(state)
    }

    /// `τ1 − ξ̄ϱ² I`.
    pub(crate) fn polymer_tensor(&self, tau1: &[Sym2<T>], rho_p: &[T]) -> Vec<Sym2<T>> {
        let xi = self.params.xi_bar;
        tau1.iter()
            .zip(rho_p)
            .map(|(t, &r)| Sym2 { xx: t.xx - xi * r * r, xy: t.xy, yy: t.yy - xi * r * r })
            .collect()
    }

    fn check_floor(&self, s: &FluidState<T>) -> Result<()> {
        let m = s.min_density();
        if !(m > self.floor()) {
            return Err(Error::DensityFloor { min: m.to_f64_lossy() });
        }
        Ok(())
    }

    /// Semi-discrete right-hand side.
    pub(crate) fn residual(&self, s: &FluidState<T>, polymer: &[Sym2<T>], t: T, source: Option<Source<'_, T>>) -> Result<FluidState<T>> {
        let g = &self.grid;
        let (nx, ny) = (g.nx, g.ny);
        let (ux, uy) = s.velocity();
        pressure(&self.params, &s.rho)?;
        let grads = g.velocity_gradient(&ux, &uy);
        let eps2 = self.params.epsilon * self.params.epsilon;
        let (mu_s, mu_b) = (self.params.mu_s, self.params.mu_b);
        let half = c::<T>(0.5);

        // x-faces: (nx+1) per row, fluxes (mass, m_x, m_y)
        let xflux: Vec<[T; 3]> = (0..ny)
            .into_par_iter()
            .flat_map_iter(|j| {
                let row: Vec<usize> = (0..nx).map(|i| g.idx(i, j)).collect();
                let faces = self.reconstruct(&row, &s.rho, &ux, &uy);
                (0..=nx)
                    .map(|i| {
                        let (l, r) = faces[i];
                        let [f0, fn_, ft] = self.rusanov(l, r, eps2);
                        // viscous and polymer face stresses
                        let (gface, tface) = if i == 0 || i == nx {
                            let k = row[if i == 0 { 0 } else { nx - 1 }];
                            let sign = if i == 0 { T::one() } else { -T::one() };
                            let gf = [
                                [sign * c::<T>(2.0) * ux[k] / g.hx, T::zero()],
                                [T::zero(), grads[k][1][1]],
                            ];
                            (gf, Sym2 { xx: polymer[k].xx, xy: T::zero(), yy: polymer[k].yy })
                        } else {
                            let (a, b) = (row[i - 1], row[i]);
                            let gf = [
                                [(ux[b] - ux[a]) / g.hx, half * (grads[a][0][1] + grads[b][0][1])],
                                [(uy[b] - uy[a]) / g.hx, half * (grads[a][1][1] + grads[b][1][1])],
                            ];
                            let tf = Sym2 {
                                xx: half * (polymer[a].xx + polymer[b].xx),
                                xy: half * (polymer[a].xy + polymer[b].xy),
                                yy: half * (polymer[a].yy + polymer[b].yy),
                            };
                            (gf, tf)
                        };
                        let sv = stress2(mu_s, mu_b, &gface);
                        [f0, fn_ - sv.xx - tface.xx, ft - sv.xy - tface.xy]
                    })
                    .collect::<Vec<_>>()
            })
            .collect();

        // y-faces: (ny+1) per column, stored column-major
        let yflux: Vec<[T; 3]> = (0..nx)
            .into_par_iter()
            .flat_map_iter(|i| {
                let col: Vec<usize> = (0..ny).map(|j| g.idx(i, j)).collect();
                let faces = self.reconstruct(&col, &s.rho, &uy, &ux);
                (0..=ny)
                    .map(|j| {
                        let (l, r) = faces[j];
                        let [f0, fn_, ft] = self.rusanov(l, r, eps2);
                        let (gface, tface) = if j == 0 || j == ny {
                            let k = col[if j == 0 { 0 } else { ny - 1 }];
                            let sign = if j == 0 { T::one() } else { -T::one() };
                            let gf = [
                                [grads[k][0][0], T::zero()],
                                [T::zero(), sign * c::<T>(2.0) * uy[k] / g.hy],
                            ];
                            (gf, Sym2 { xx: polymer[k].xx, xy: T::zero(), yy: polymer[k].yy })
                        } else {
                            let (a, b) = (col[j - 1], col[j]);
                            let gf = [
                                [half * (grads[a][0][0] + grads[b][0][0]), (ux[b] - ux[a]) / g.hy],
                                [half * (grads[a][1][0] + grads[b][1][0]), (uy[b] - uy[a]) / g.hy],
                            ];
                            let tf = Sym2 {
                                xx: half * (polymer[a].xx + polymer[b].xx),
                                xy: half * (polymer[a].xy + polymer[b].xy),
                                yy: half * (polymer[a].yy + polymer[b].yy),
                            };
                            (gf, tf)
                        };
                        let sv = stress2(mu_s, mu_b, &gface);
                        // normal is y: (mass, m_y, m_x)
                        [f0, ft - sv.xy - tface.xy, fn_ - sv.yy - tface.yy]
                    })
                    .collect::<Vec<_>>()
            })
            .collect();

        let mut out = FluidState::at_rest(g.cells(), T::zero());
        for j in 0..ny {
            for i in 0..nx {
                let k = g.idx(i, j);
                let (xl, xr) = (xflux[i + (nx + 1) * j], xflux[i + 1 + (nx + 1) * j]);
                let (yl, yr) = (yflux[j + (ny + 1) * i], yflux[j + 1 + (ny + 1) * i]);
                let mut d = [T::zero(); 3];
                for q in 0..3 {
                    d[q] = -(xr[q] - xl[q]) / g.hx - (yr[q] - yl[q]) / g.hy;
                }
                if let Some(src) = source {
                    let sv = src(t, g.x(i), g.y(j));
                    for q in 0..3 {
                        d[q] += sv[q];
                    }
                }
                out.rho[k] = d[0];
                out.mx[k] = d[1];
                out.my[k] = d[2];
            }
        }
        Ok(out)
    }

    /// Left/right primitive states at the `n+1` faces along a line of cells;
    /// `un`/`ut` are the velocity components normal/tangential to the faces.
    fn reconstruct(&self, line: &[usize], rho: &[T], un: &[T], ut: &[T]) -> Vec<(Face<T>, Face<T>)> {
        let n = line.len();
        let half = c::<T>(0.5);
        let val = |v: &[T], i: isize, odd: bool| -> T {
            if i < 0 {
                let x = v[line[0]];
                if odd {
                    -x
                } else {
                    x
                }
            } else if i as usize >= n {
                let x = v[line[n - 1]];
                if odd {
                    -x
                } else {
                    x
                }
            } else {
                v[line[i as usize]]
            }
        };
        let slopes = |v: &[T], odd: bool| -> Vec<T> {
            (0..n as isize)
                .map(|i| self.limiter.slope(val(v, i, odd) - val(v, i - 1, odd), val(v, i + 1, odd) - val(v, i, odd)))
                .collect()
        };
        let (sr, sn, st) = (slopes(rho, false), slopes(un, true), slopes(ut, false));
        let left_of = |i: usize| Face {
            rho: rho[line[i]] + half * sr[i],
            un: un[line[i]] + half * sn[i],
            ut: ut[line[i]] + half * st[i],
        };
        let right_of = |i: usize| Face {
            rho: rho[line[i]] - half * sr[i],
            un: un[line[i]] - half * sn[i],
            ut: ut[line[i]] - half * st[i],
        };
        let reflect = |f: Face<T>| Face { rho: f.rho, un: -f.un, ut: f.ut };
        (0..=n)
            .map(|i| {
                if i == 0 {
                    let r = right_of(0);
                    (reflect(r), r)
                } else if i == n {
                    let l = left_of(n - 1);
                    (l, reflect(l))
                } else {
                    (left_of(i - 1), right_of(i))
                }
            })
            .collect()
    }

    /// Rusanov flux `(mass, normal momentum, tangential momentum)`.
    fn rusanov(&self, mut l: Face<T>, mut r: Face<T>, eps2: T) -> [T; 3] {
        if self.low_mach {
            let speed = |f: Face<T>| {
                let cs = self.sound_speed(f.rho);
                if cs > T::zero() {
                    (f.un * f.un + f.ut * f.ut).sqrt() / cs
                } else {
                    T::one()
                }
            };
            let z = speed(l).max(speed(r)).min(T::one());
            let half = c::<T>(0.5);
            let (mn, dn) = (half * (l.un + r.un), half * z * (r.un - l.un));
            let (mt, dt) = (half * (l.ut + r.ut), half * z * (r.ut - l.ut));
            l.un = mn - dn;
            r.un = mn + dn;
            l.ut = mt - dt;
            r.ut = mt + dt;
        }
        let pr = |rho: T| self.params.c_p * rho.powf(self.params.gamma) / eps2;
        let flux = |f: Face<T>| [f.rho * f.un, f.rho * f.un * f.un + pr(f.rho), f.rho * f.un * f.ut];
        let cons = |f: Face<T>| [f.rho, f.rho * f.un, f.rho * f.ut];
        let a = (l.un.abs() + self.sound_speed(l.rho)).max(r.un.abs() + self.sound_speed(r.rho));
        let (fl, fr, ul, ur) = (flux(l), flux(r), cons(l), cons(r));
        let half = c::<T>(0.5);
        [
            half * (fl[0] + fr[0]) - half * a * (ur[0] - ul[0]),
            half * (fl[1] + fr[1]) - half * a * (ur[1] - ul[1]),
            half * (fl[2] + fr[2]) - half * a * (ur[2] - ul[2]),
        ]
    }

    /// `∫ (½ρ|u|² + ε⁻² P_rel)`.
    pub fn mechanical_energy(&self, state: &FluidState<T>) -> Result<T> {
        let pot = pressure_potential(&self.params, &state.rho)?;
        let eps2 = self.params.epsilon * self.params.epsilon;
        let e: Vec<T> = (0..self.grid.cells())
            .map(|k| {
                c::<T>(0.5) * (state.mx[k] * state.mx[k] + state.my[k] * state.my[k]) / state.rho[k] + pot[k] / eps2
            })
            .collect();
        Ok(self.grid.integrate(&e))
    }

    /// `∫ μS|Du − ½ div u I|² + μB |div u|²` from cell-centred gradients.
    pub fn viscous_dissipation(&self, ux: &[T], uy: &[T]) -> (T, T) {
        let grads = self.grid.velocity_gradient(ux, uy);
        let (mut shear, mut bulk) = (T::zero(), T::zero());
        let half = c::<T>(0.5);
        for g in &grads {
            let div = g[0][0] + g[1][1];
            let dev = Sym2 { xx: g[0][0] - half * div, xy: half * (g[0][1] + g[1][0]), yy: g[1][1] - half * div };
            shear += self.params.mu_s * dev.frob2();
            bulk += self.params.mu_b * div * div;
        }
        (shear * self.grid.cell_area(), bulk * self.grid.cell_area())
    }
}
