//! Uniform cell-centred grid on the unit square with slip walls.

use crate::scalar::{c, Real};

/// `nx × ny` cells on `[0,1]²`; cell `(i, j)` is stored at `i + nx·j`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid<T> {
    pub nx: usize,
    pub ny: usize,
    pub hx: T,
    pub hy: T,
}

/// Symmetric 2×2 tensor `[[xx, xy], [xy, yy]]`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Sym2<T> {
    pub xx: T,
    pub xy: T,
    pub yy: T,
}

impl<T: Real> Sym2<T> {
    pub fn zero() -> Self {
        Self { xx: T::zero(), xy: T::zero(), yy: T::zero() }
    }

    pub fn diag(v: T) -> Self {
        Self { xx: v, xy: T::zero(), yy: v }
    }

    pub fn frob2(&self) -> T {
        self.xx * self.xx + c::<T>(2.0) * self.xy * self.xy + self.yy * self.yy
    }

    pub fn trace(&self) -> T {
        self.xx + self.yy
    }
}

/// Velocity gradient `G[a][b] = ∂_b u_a` at a cell centre.
pub type Gradient<T> = [[T; 2]; 2];

impl<T: Real> Grid<T> {
    pub fn square(n: usize) -> Self {
        Self::new(n, n)
    }

    pub fn new(nx: usize, ny: usize) -> Self {
        Self { nx, ny, hx: T::one() / T::from_usize_lossy(nx), hy: T::one() / T::from_usize_lossy(ny) }
    }

    pub fn cells(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        i + self.nx * j
    }

    pub fn cell_area(&self) -> T {
        self.hx * self.hy
    }

    pub fn x(&self, i: usize) -> T {
        (T::from_usize_lossy(i) + c(0.5)) * self.hx
    }

    pub fn y(&self, j: usize) -> T {
        (T::from_usize_lossy(j) + c(0.5)) * self.hy
    }

    /// Samples `f(x, y)` at cell centres.
    pub fn sample(&self, f: impl Fn(T, T) -> T) -> Vec<T> {
        let mut out = Vec::with_capacity(self.cells());
        for j in 0..self.ny {
            for i in 0..self.nx {
                out.push(f(self.x(i), self.y(j)));
            }
        }
        out
    }

    /// Midpoint-rule integral over the unit square.
    pub fn integrate(&self, f: &[T]) -> T {
        f.iter().copied().sum::<T>() * self.cell_area()
    }

    pub fn l2_norm(&self, f: &[T]) -> T {
        (f.iter().map(|&v| v * v).sum::<T>() * self.cell_area()).sqrt()
    }

    pub fn mean(&self, f: &[T]) -> T {
        self.integrate(f)
    }

    /// Face-normal velocities from cell-centred values: `(nx+1)·ny` x-faces and
    /// `nx·(ny+1)` y-faces; wall faces carry zero normal velocity.
    pub fn face_velocities(&self, ux: &[T], uy: &[T]) -> (Vec<T>, Vec<T>) {
        let (nx, ny) = (self.nx, self.ny);
        let half = c::<T>(0.5);
        let mut fx = vec![T::zero(); (nx + 1) * ny];
        let mut fy = vec![T::zero(); nx * (ny + 1)];
        for j in 0..ny {
            for i in 1..nx {
                fx[i + (nx + 1) * j] = half * (ux[self.idx(i - 1, j)] + ux[self.idx(i, j)]);
            }
        }
        for j in 1..ny {
            for i in 0..nx {
                fy[i + nx * j] = half * (uy[self.idx(i, j - 1)] + uy[self.idx(i, j)]);
            }
        }
        (fx, fy)
    }

    /// Face velocities of the discretely divergence-free field with stream
    /// function `s` sampled at cell corners (`u = −∂_y s`, `v = ∂_x s`); `s`
    /// must vanish on the boundary for the walls to be impermeable.
    pub fn stream_face_velocities(&self, s: impl Fn(T, T) -> T) -> (Vec<T>, Vec<T>) {
        let (nx, ny) = (self.nx, self.ny);
        let corner = |i: usize, j: usize| s(T::from_usize_lossy(i) * self.hx, T::from_usize_lossy(j) * self.hy);
        let mut fx = vec![T::zero(); (nx + 1) * ny];
        let mut fy = vec![T::zero(); nx * (ny + 1)];
        for j in 0..ny {
            for i in 0..=nx {
                fx[i + (nx + 1) * j] = -(corner(i, j + 1) - corner(i, j)) / self.hy;
            }
        }
        for j in 0..=ny {
            for i in 0..nx {
                fy[i + nx * j] = (corner(i + 1, j) - corner(i, j)) / self.hx;
            }
        }
        (fx, fy)
    }

    /// Cell-centred velocity gradient by centred differences with slip-wall
    /// ghosts (normal component odd, tangential even).
    pub fn velocity_gradient(&self, ux: &[T], uy: &[T]) -> Vec<Gradient<T>> {
        let (nx, ny) = (self.nx, self.ny);
        let two = c::<T>(2.0);
        let mut g = vec![[[T::zero(); 2]; 2]; self.cells()];
        for j in 0..ny {
            for i in 0..nx {
                let k = self.idx(i, j);
                // neighbours along x: (value, is_ghost)
                let xm = |f: &[T], odd: bool| {
                    if i == 0 {
                        if odd {
                            -f[k]
                        } else {
                            f[k]
                        }
                    } else {
                        f[self.idx(i - 1, j)]
                    }
                };
                let xp = |f: &[T], odd: bool| {
                    if i + 1 == nx {
                        if odd {
                            -f[k]
                        } else {
                            f[k]
                        }
                    } else {
                        f[self.idx(i + 1, j)]
                    }
                };
                let ym = |f: &[T], odd: bool| {
                    if j == 0 {
                        if odd {
                            -f[k]
                        } else {
                            f[k]
                        }
                    } else {
                        f[self.idx(i, j - 1)]
                    }
                };
                let yp = |f: &[T], odd: bool| {
                    if j + 1 == ny {
                        if odd {
                            -f[k]
                        } else {
                            f[k]
                        }
                    } else {
                        f[self.idx(i, j + 1)]
                    }
                };
                g[k][0][0] = (xp(ux, true) - xm(ux, true)) / (two * self.hx);
                g[k][0][1] = (yp(ux, false) - ym(ux, false)) / (two * self.hy);
                g[k][1][0] = (xp(uy, false) - xm(uy, false)) / (two * self.hx);
                g[k][1][1] = (yp(uy, true) - ym(uy, true)) / (two * self.hy);
            }
        }
        g
    }
}
