//! Fokker–Planck evolution of `ψ̂ = ψ/M` on the x×q grid, Kramers stress,
//! polymer number density and entropy diagnostics.

mod qop;

pub use qop::QOperator;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fene::{build_maxwellian, FenePotential, Maxwellian, QGrid};
use crate::grid::{Gradient, Grid, Sym2};
use crate::params::ModelParams;
use crate::scalar::{c, Real};

/// Values in `(−CLIP, 0)` after a step are roundoff and reset to zero.
const CLIP: f64 = 1e-12;

/// `ψ̂` on every (cell, q-node) pair, stored `cell * nq + node`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfigDistribution<T> {
    pub values: Vec<T>,
    pub nq: usize,
    pub time: T,
}

impl<T: Real> ConfigDistribution<T> {
    pub fn constant(cells: usize, nq: usize, v: T) -> Self {
        Self { values: vec![v; cells * nq], nq, time: T::zero() }
    }

    pub fn equilibrium(cells: usize, nq: usize) -> Self {
        Self::constant(cells, nq, T::one())
    }

    pub fn cells(&self) -> usize {
        self.values.len() / self.nq
    }

    pub fn cell(&self, k: usize) -> &[T] {
        &self.values[k * self.nq..(k + 1) * self.nq]
    }

    pub fn min(&self) -> T {
        self.values.iter().copied().fold(T::infinity(), T::min)
    }
}

/// Relative entropy and the two Fisher-information dissipation terms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EntropyFisher<T> {
    /// `∫∫ M F(ψ̂)`.
    pub entropy: T,
    /// `4δ ∫∫ M |∇_x √ψ̂|²`.
    pub x_fisher: T,
    /// `Σ A_ij ∫∫ M ∇_{q_i}√ψ̂ · ∇_{q_j}√ψ̂`.
    pub q_fisher: T,
}

/// `F(s) = s(log s − 1)` with `F(0) = 0`.
pub fn entropy_density<T: Real>(s: T) -> T {
    if s < c(1e-14) {
        T::zero()
    } else {
        s * (s.ln() - T::one())
    }
}

/// Fokker–Planck solver bound to an x-grid and a configuration grid.
#[derive(Clone, Debug)]
pub struct FokkerPlanck<T> {
    pub grid: Grid<T>,
    pub qgrid: QGrid<T>,
    pub maxwellian: Maxwellian<T>,
    pub op: QOperator<T>,
    pub delta: T,
    pub polymer_fraction: T,
}

impl<T: Real> FokkerPlanck<T> {
    pub fn new(params: &ModelParams<T>, grid: Grid<T>, n_radial: usize, n_angular: usize) -> Result<Self> {
        let qgrid = QGrid::uniform(&params.b, params.dim, n_radial, n_angular)?;
        let pots: Vec<_> = params.b.iter().map(|&b| FenePotential::new(b)).collect();
        let maxwellian = build_maxwellian(&pots, &qgrid)?;
        let op = QOperator::new(&qgrid, &maxwellian, &params.rouse)?;
        Ok(Self { grid, qgrid, maxwellian, op, delta: params.delta, polymer_fraction: params.polymer_fraction })
    }

    pub fn nq(&self) -> usize {
        self.qgrid.len()
    }

    pub fn equilibrium(&self) -> ConfigDistribution<T> {
        ConfigDistribution::equilibrium(self.grid.cells(), self.nq())
    }

    /// Builds `ψ̂(x, y, node)` from a closure receiving the cell centre and the
    /// spring vectors at the node.
    pub fn distribution(&self, f: impl Fn(T, T, &[[T; 3]]) -> T) -> ConfigDistribution<T> {
        let nq = self.nq();
        let k = self.qgrid.springs();
        let qs: Vec<Vec<[T; 3]>> = (0..nq).map(|a| (0..k).map(|i| self.qgrid.q(a, i)).collect()).collect();
        let mut values = Vec::with_capacity(self.grid.cells() * nq);
        for j in 0..self.grid.ny {
            for i in 0..self.grid.nx {
                let (x, y) = (self.grid.x(i), self.grid.y(j));
                values.extend(qs.iter().map(|q| f(x, y, q)));
            }
        }
        ConfigDistribution { values, nq, time: T::zero() }
    }

    /// `C_i(Mψ̂)` at every cell.
    pub fn kramers_tensor(&self, spring: usize, dist: &ConfigDistribution<T>) -> Vec<[[T; 3]; 3]> {
        dist.values.par_chunks(dist.nq).map(|cell| self.op.kramers(spring, cell)).collect()
    }

    /// Max-norm residual of `C_i(Mφ) = ∫M ∇_{q_i}φ q_iᵀ + (∫Mφ) I` for an
    /// analytic test function returning `(φ, ∇_{q_1}φ, …, ∇_{q_K}φ)`.
    pub fn kramers_identity_check(&self, spring: usize, phi: impl Fn(&[[T; 3]]) -> (T, Vec<[T; 3]>)) -> T {
        let nq = self.nq();
        let k = self.qgrid.springs();
        let d = self.qgrid.dim();
        let mut vals = Vec::with_capacity(nq);
        let mut rhs = [[T::zero(); 3]; 3];
        let mut mass_phi = T::zero();
        for a in 0..nq {
            let qs: Vec<[T; 3]> = (0..k).map(|i| self.qgrid.q(a, i)).collect();
            let (v, grad) = phi(&qs);
            let m = self.maxwellian.mass[a];
            vals.push(v);
            mass_phi += m * v;
            let qi = qs[spring];
            for al in 0..d {
                for be in 0..d {
                    rhs[al][be] += m * grad[spring][al] * qi[be];
                }
            }
        }
        let lhs = self.op.kramers(spring, &vals);
        let mut res = T::zero();
        for al in 0..d {
            for be in 0..d {
                let id = if al == be { mass_phi } else { T::zero() };
                res = res.max((lhs[al][be] - rhs[al][be] - id).abs());
            }
        }
        res
    }

    /// `τ1 = (1−β)(Σ_i C_i − (K+1)ϱ I)` with unit Deborah number.
    pub fn tau1(&self, dist: &ConfigDistribution<T>) -> Vec<Sym2<T>> {
        let k = self.qgrid.springs();
        let kp1 = T::from_usize_lossy(k + 1);
        let f = self.polymer_fraction;
        dist.values
            .par_chunks(dist.nq)
            .map(|cell| {
                let mut s = [[T::zero(); 3]; 3];
                for i in 0..k {
                    let ci = self.op.kramers(i, cell);
                    for al in 0..2 {
                        for be in 0..2 {
                            s[al][be] += ci[al][be];
                        }
                    }
                }
                let rho = self.op.density(cell);
                Sym2 {
                    xx: f * (s[0][0] - kp1 * rho),
                    xy: f * c::<T>(0.5) * (s[0][1] + s[1][0]),
                    yy: f * (s[1][1] - kp1 * rho),
                }
            })
            .collect()
    }

    /// `ϱ = ∫ M ψ̂ dq` per cell.
    pub fn number_density(&self, dist: &ConfigDistribution<T>) -> Vec<T> {
        dist.values.par_chunks(dist.nq).map(|cell| self.op.density(cell)).collect()
    }

    /// `∫∫ M ψ̂`.
    pub fn total_mass(&self, dist: &ConfigDistribution<T>) -> T {
        self.grid.integrate(&self.number_density(dist))
    }

    /// Largest admissible step for the given velocity and gradient fields.
    pub fn stable_dt(&self, ux: &[T], uy: &[T], grads: &[Gradient<T>]) -> T {
        let (fx, fy) = self.grid.face_velocities(ux, uy);
        let dx = transport_dt_limit(&self.grid, &fx, &fy, self.delta);
        let dq = grads.par_iter().map(|g| self.op.drift_dt_limit(g)).reduce(|| T::infinity(), T::min);
        dx.min(dq)
    }

    /// One step: explicit x-transport, explicit q-drift, implicit q-diffusion.
    pub fn fp_step(
        &mut self,
        dist: &mut ConfigDistribution<T>,
        ux: &[T],
        uy: &[T],
        grads: &[Gradient<T>],
        dt: T,
    ) -> Result<()> {
        let (fx, fy) = self.grid.face_velocities(ux, uy);
        let limit = transport_dt_limit(&self.grid, &fx, &fy, self.delta)
            .min(grads.par_iter().map(|g| self.op.drift_dt_limit(g)).reduce(|| T::infinity(), T::min));
        if dt > limit {
            return Err(Error::Cfl { stage: "fokker-planck", dt: dt.to_f64_lossy(), suggested: limit.to_f64_lossy() });
        }
        let nq = dist.nq;
        dist.values = transport(&self.grid, &fx, &fy, self.delta, dt, &dist.values, nq);
        let op = &self.op;
        dist.values.par_chunks_mut(nq).zip(grads.par_iter()).for_each(|(cell, g)| op.drift_step(g, dt, cell));
        self.op.prepare(dt)?;
        let op = &self.op;
        dist.values.par_chunks_mut(64 * nq).try_for_each(|block| op.diffuse_block(block))?;
        let clip = c::<T>(-CLIP);
        let mut worst = T::zero();
        for v in dist.values.iter_mut() {
            if *v < T::zero() {
                if *v > clip {
                    *v = T::zero();
                } else {
                    worst = worst.min(*v);
                }
            }
        }
        if worst < T::zero() {
            return Err(Error::Positivity { min: worst.to_f64_lossy() });
        }
        dist.time += dt;
        Ok(())
    }

    pub fn entropy_fisher(&self, dist: &ConfigDistribution<T>) -> EntropyFisher<T> {
        let g = &self.grid;
        let nq = dist.nq;
        let mass = &self.maxwellian.mass;
        let roots: Vec<T> = dist.values.par_iter().map(|&v| v.max(T::zero()).sqrt()).collect();
        let entropy = dist
            .values
            .par_chunks(nq)
            .map(|cell| cell.iter().zip(mass).map(|(&p, &m)| m * entropy_density(p)).sum::<T>())
            .collect::<Vec<T>>()
            .into_iter()
            .sum::<T>()
            * g.cell_area();
        let face = |a: usize, b: usize| -> T {
            let (ra, rb) = (&roots[a * nq..(a + 1) * nq], &roots[b * nq..(b + 1) * nq]);
            ra.iter().zip(rb).zip(mass).map(|((&x, &y), &m)| m * (x - y) * (x - y)).sum::<T>()
        };
        let mut xf = T::zero();
        for j in 0..g.ny {
            for i in 0..g.nx {
                if i + 1 < g.nx {
                    xf += g.hy / g.hx * face(g.idx(i, j), g.idx(i + 1, j));
                }
                if j + 1 < g.ny {
                    xf += g.hx / g.hy * face(g.idx(i, j), g.idx(i, j + 1));
                }
            }
        }
        let per_cell: Vec<T> = roots.par_chunks(nq).map(|cell| self.op.dirichlet(cell)).collect();
        let q_fisher = per_cell.into_iter().sum::<T>() * c::<T>(4.0) * g.cell_area();
        EntropyFisher { entropy, x_fisher: c::<T>(4.0) * self.delta * xf, q_fisher }
    }
}

/// Largest step keeping the explicit upwind advection–diffusion monotone.
pub fn transport_dt_limit<T: Real>(grid: &Grid<T>, fx: &[T], fy: &[T], delta: T) -> T {
    let (nx, ny) = (grid.nx, grid.ny);
    let diff = c::<T>(2.0) * delta * (T::one() / (grid.hx * grid.hx) + T::one() / (grid.hy * grid.hy));
    let mut worst = T::zero();
    for j in 0..ny {
        for i in 0..nx {
            let out_x = fx[i + 1 + (nx + 1) * j].max(T::zero()) - fx[i + (nx + 1) * j].min(T::zero());
            let out_y = fy[i + nx * (j + 1)].max(T::zero()) - fy[i + nx * j].min(T::zero());
            worst = worst.max(out_x / grid.hx + out_y / grid.hy + diff);
        }
    }
    if worst > T::zero() {
        T::one() / worst
    } else {
        T::infinity()
    }
}

/// Conservative upwind advection plus centred diffusion of `stride` values per
/// cell, with zero total flux through the walls.
fn transport<T: Real>(grid: &Grid<T>, fx: &[T], fy: &[T], delta: T, dt: T, data: &[T], stride: usize) -> Vec<T> {
    let (nx, ny) = (grid.nx, grid.ny);
    let mut out = data.to_vec();
    let mut flux = vec![T::zero(); stride];
    let mut face = |left: usize, right: usize, u: T, h: T, out: &mut [T]| {
        let (a, d) = (dt * u / h, dt * delta / (h * h));
        let l = &data[left * stride..(left + 1) * stride];
        let r = &data[right * stride..(right + 1) * stride];
        let donor = if u > T::zero() { l } else { r };
        for s in 0..stride {
            flux[s] = a * donor[s] - d * (r[s] - l[s]);
        }
        for s in 0..stride {
            out[left * stride + s] -= flux[s];
            out[right * stride + s] += flux[s];
        }
    };
    for j in 0..ny {
        for i in 1..nx {
            face(grid.idx(i - 1, j), grid.idx(i, j), fx[i + (nx + 1) * j], grid.hx, &mut out);
        }
    }
    for j in 1..ny {
        for i in 0..nx {
            face(grid.idx(i, j - 1), grid.idx(i, j), fy[i + nx * j], grid.hy, &mut out);
        }
    }
    out
}

/// One step of `∂_t ϱ + div(ϱu) = δΔϱ` with no-flux walls, using the same
/// discretisation as the x-part of [`FokkerPlanck::fp_step`].
pub fn rho_ad_step<T: Real>(grid: &Grid<T>, rho: &[T], ux: &[T], uy: &[T], delta: T, dt: T) -> Result<Vec<T>> {
    let (fx, fy) = grid.face_velocities(ux, uy);
    rho_ad_step_faces(grid, rho, &fx, &fy, delta, dt)
}

/// [`rho_ad_step`] with prescribed face-normal velocities.
pub fn rho_ad_step_faces<T: Real>(grid: &Grid<T>, rho: &[T], fx: &[T], fy: &[T], delta: T, dt: T) -> Result<Vec<T>> {
    let limit = transport_dt_limit(grid, fx, fy, delta);
    if dt > limit {
        return Err(Error::Cfl { stage: "polymer density", dt: dt.to_f64_lossy(), suggested: limit.to_f64_lossy() });
    }
    Ok(transport(grid, fx, fy, delta, dt, rho, 1))
}
