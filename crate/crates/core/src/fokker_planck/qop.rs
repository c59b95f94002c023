//! Configuration-space operators on one x-cell: M-weighted diffusion, upwind
//! drift and Kramers moments.

use crate::error::{Error, Result};
use crate::fene::{Maxwellian, QGrid};
use crate::grid::Gradient;
use crate::linalg::{Cholesky, DenseMatrix};
use crate::scalar::{c, Real};

/// Above this many q-nodes the implicit diffusion switches from a dense
/// precomputed propagator to preconditioned conjugate gradients.
const DENSE_LIMIT: usize = 1500;

#[derive(Clone, Debug)]
struct DriftEdge<T> {
    a: usize,
    b: usize,
    /// `n_α q_β` at the face, so that the face velocity is `Σ G_αβ geom_αβ`.
    geom: [T; 4],
    /// Face area times the M-weighted donor measure per unit ψ̂.
    ca: T,
    cb: T,
}

#[derive(Clone, Debug)]
struct Csr<T> {
    ptr: Vec<usize>,
    col: Vec<usize>,
    val: Vec<T>,
}

impl<T: Real> Csr<T> {
    fn from_rows(rows: Vec<Vec<(usize, T)>>) -> Self {
        let mut ptr = vec![0];
        let mut col = Vec::new();
        let mut val = Vec::new();
        for mut r in rows {
            r.sort_by_key(|e| e.0);
            let mut last = usize::MAX;
            for (j, v) in r {
                if j == last {
                    *val.last_mut().unwrap() += v;
                } else {
                    col.push(j);
                    val.push(v);
                    last = j;
                }
            }
            ptr.push(col.len());
        }
        Self { ptr, col, val }
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = T::zero();
            for k in self.ptr[i]..self.ptr[i + 1] {
                s += self.val[k] * x[self.col[k]];
            }
            *yi = s;
        }
    }

    fn diag(&self, i: usize) -> T {
        (self.ptr[i]..self.ptr[i + 1])
            .find(|&k| self.col[k] == i)
            .map_or(T::zero(), |k| self.val[k])
    }
}

#[derive(Clone, Debug)]
enum Propagator<T> {
    /// Transposed `(diag(m) − dt·L)⁻¹ diag(m)`, row-major.
    Dense(Vec<T>),
    Iterative,
}

/// Per-cell q-space operator. `L` is the symmetric, nonpositive M-weighted
/// Laplacian `¼ Σ A_ij div_{q_i}(M ∇_{q_j} ·)` acting on ψ̂.
#[derive(Clone, Debug)]
pub struct QOperator<T> {
    pub(crate) nq: usize,
    pub(crate) dim: usize,
    pub(crate) springs: usize,
    pub(crate) mass: Vec<T>,
    /// Finite-volume transmissibilities of the diagonal blocks.
    edges: Vec<(usize, usize, T)>,
    /// Nodal gradient stencils per spring, used only by the cross blocks.
    grads: Vec<Vec<Vec<(usize, [T; 2])>>>,
    cross: Vec<(usize, usize, T)>,
    laplacian: Csr<T>,
    drift: Vec<DriftEdge<T>>,
    /// `m_a U_i′ q_i q_iᵀ` per spring, flattened `[node][3×3]`.
    kramers: Vec<Vec<[[T; 3]; 3]>>,
    propagator: Option<(T, Propagator<T>)>,
}

impl<T: Real> QOperator<T> {
    pub fn new(grid: &QGrid<T>, maxw: &Maxwellian<T>, rouse: &DenseMatrix<T>) -> Result<Self> {
        let nq = grid.len();
        let k = grid.springs();
        let dim = grid.dim();
        if rouse.dim() != k {
            return Err(Error::InvalidParams(format!(
                "Rouse matrix is {}×{} but there are {k} springs",
                rouse.dim(),
                rouse.dim()
            )));
        }
        let mass = maxw.mass.clone();
        let kramers = (0..k)
            .map(|i| {
                (0..nq)
                    .map(|a| {
                        let q = grid.q(a, i);
                        let s = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2]) / c(2.0);
                        let f = mass[a] * maxw.potentials[i].du(s);
                        let mut t = [[T::zero(); 3]; 3];
                        for al in 0..3 {
                            for be in al..3 {
                                t[al][be] = f * q[al] * q[be];
                                t[be][al] = t[al][be];
                            }
                        }
                        t
                    })
                    .collect()
            })
            .collect();
        let mut op = Self {
            nq,
            dim,
            springs: k,
            mass,
            edges: Vec::new(),
            grads: Vec::new(),
            cross: Vec::new(),
            laplacian: Csr { ptr: vec![0; nq + 1], col: vec![], val: vec![] },
            drift: Vec::new(),
            kramers,
            propagator: None,
        };
        if dim == 2 {
            op.assemble_polar(grid, maxw, rouse)?;
        }
        Ok(op)
    }

    fn assemble_polar(&mut self, grid: &QGrid<T>, maxw: &Maxwellian<T>, rouse: &DenseMatrix<T>) -> Result<()> {
        let nq = self.nq;
        let k = self.springs;
        let quarter = c::<T>(0.25);
        for i in 0..k {
            let ball = &grid.balls[i];
            let fv = ball.fv.as_ref().expect("polar ball carries finite-volume data");
            let stride = grid.stride(i);
            let nb = ball.len();
            for face in &fv.faces {
                let rf = (face.centre[0] * face.centre[0] + face.centre[1] * face.centre[1]).sqrt();
                let m_face = maxw.partial_at_radius(i, rf);
                let t_face = quarter * rouse[(i, i)] * m_face * face.area / face.distance;
                let n = face.normal;
                let q = face.centre;
                let geom = [n[0] * q[0], n[0] * q[1], n[1] * q[0], n[1] * q[1]];
                for flat in 0..nq {
                    if grid.component(flat, i) != face.inner {
                        continue;
                    }
                    let a = flat;
                    let b = flat - face.inner * stride + face.outer * stride;
                    // measure of the other springs at this product node
                    let other = self.mass[a] / (maxw.partial[i][face.inner] * ball.weights[face.inner]);
                    self.edges.push((a, b, t_face * other));
                    let ca = face.area * self.mass[a] / ball.weights[face.inner];
                    let cb = face.area * self.mass[b] / ball.weights[face.outer];
                    self.drift.push(DriftEdge { a, b, geom, ca, cb });
                }
            }
            debug_assert!(nb > 0);
        }
        if k > 1 {
            self.grads = (0..k).map(|i| polar_gradient_stencils(grid, i)).collect();
            for i in 0..k {
                for j in 0..k {
                    if i != j && rouse[(i, j)] != T::zero() {
                        self.cross.push((i, j, quarter * rouse[(i, j)]));
                    }
                }
            }
        }
        let mut rows: Vec<Vec<(usize, T)>> = vec![Vec::new(); nq];
        for &(a, b, t) in &self.edges {
            rows[a].push((b, t));
            rows[a].push((a, -t));
            rows[b].push((a, t));
            rows[b].push((b, -t));
        }
        for &(i, j, aij) in &self.cross {
            for a in 0..nq {
                let w = aij * self.mass[a];
                for &(bi, gi) in &self.grads[i][a] {
                    for &(cj, gj) in &self.grads[j][a] {
                        let v = w * (gi[0] * gj[0] + gi[1] * gj[1]);
                        rows[bi].push((cj, -v));
                    }
                }
            }
        }
        self.laplacian = Csr::from_rows(rows);
        Ok(())
    }

    /// `−⟨φ, Lφ⟩_m`-type Dirichlet form `¼ Σ A_ij ∫ M ∇_{q_i}φ·∇_{q_j}φ`.
    pub fn dirichlet(&self, phi: &[T]) -> T {
        let mut s = T::zero();
        for &(a, b, t) in &self.edges {
            let d = phi[b] - phi[a];
            s += t * d * d;
        }
        for &(i, j, aij) in &self.cross {
            for a in 0..self.nq {
                let gi = apply_stencil(&self.grads[i][a], phi);
                let gj = apply_stencil(&self.grads[j][a], phi);
                s += aij * self.mass[a] * (gi[0] * gj[0] + gi[1] * gj[1]);
            }
        }
        s
    }

    /// `L φ` (weighted so that `Σ_a (Lφ)_a = 0`).
    pub fn apply_laplacian(&self, phi: &[T], out: &mut [T]) {
        self.laplacian.apply(phi, out);
    }

    /// Largest stable drift step for the cell gradient `g`.
    pub fn drift_dt_limit(&self, g: &Gradient<T>) -> T {
        let mut rate = vec![T::zero(); self.nq];
        for e in &self.drift {
            let v = face_velocity(g, &e.geom);
            if v > T::zero() {
                rate[e.a] += v * e.ca / self.mass[e.a];
            } else {
                rate[e.b] -= v * e.cb / self.mass[e.b];
            }
        }
        let r = rate.iter().copied().fold(T::zero(), T::max);
        if r > T::zero() {
            T::one() / r
        } else {
            T::infinity()
        }
    }

    /// Explicit upwind drift `−dt Σ div_{q_i}(G q_i M ψ̂)/M` with zero rim flux.
    pub fn drift_step(&self, g: &Gradient<T>, dt: T, psi: &mut [T]) {
        if g.iter().flatten().all(|&v| v == T::zero()) {
            return;
        }
        let mut dm = vec![T::zero(); self.nq];
        for e in &self.drift {
            let v = face_velocity(g, &e.geom);
            let f = if v > T::zero() { v * e.ca * psi[e.a] } else { v * e.cb * psi[e.b] };
            dm[e.a] -= f;
            dm[e.b] += f;
        }
        for ((p, d), &m) in psi.iter_mut().zip(dm).zip(&self.mass) {
            *p += dt * d / m;
        }
    }

    /// Prepares the implicit diffusion for step `dt`.
    pub fn prepare(&mut self, dt: T) -> Result<()> {
        if let Some((d, _)) = &self.propagator {
            if *d == dt {
                return Ok(());
            }
        }
        if self.dim != 2 {
            return Err(Error::Unsupported("q-diffusion on spherical configuration grids".into()));
        }
        let n = self.nq;
        let prop = if n <= DENSE_LIMIT {
            let mut s = DenseMatrix::zeros(n);
            for i in 0..n {
                for k in self.laplacian.ptr[i]..self.laplacian.ptr[i + 1] {
                    s[(i, self.laplacian.col[k])] = -dt * self.laplacian.val[k];
                }
                s[(i, i)] += self.mass[i];
            }
            let ch = Cholesky::factor(&s).ok_or_else(|| {
                Error::InvalidParams("q-diffusion operator is not positive definite".into())
            })?;
            let mut pt = vec![T::zero(); n * n];
            let mut e = vec![T::zero(); n];
            for kk in 0..n {
                e[kk] = T::one();
                let x = ch.solve(&e);
                e[kk] = T::zero();
                for (j, xj) in x.into_iter().enumerate() {
                    pt[kk * n + j] = self.mass[kk] * xj;
                }
            }
            Propagator::Dense(pt)
        } else {
            Propagator::Iterative
        };
        self.propagator = Some((dt, prop));
        Ok(())
    }

    /// Implicit diffusion on a block of cells (`psi.len()` a multiple of `nq`).
    pub fn diffuse_block(&self, psi: &mut [T]) -> Result<()> {
        let n = self.nq;
        let Some((dt, prop)) = &self.propagator else {
            return Err(Error::InvalidParams("q-diffusion used before prepare".into()));
        };
        match prop {
            Propagator::Dense(pt) => {
                const ROWS: usize = 8;
                let mut out = vec![T::zero(); ROWS * n];
                for chunk in psi.chunks_mut(ROWS * n) {
                    let rows = chunk.len() / n;
                    out[..rows * n].iter_mut().for_each(|v| *v = T::zero());
                    for k in 0..n {
                        let prow = &pt[k * n..(k + 1) * n];
                        for r in 0..rows {
                            let s = chunk[r * n + k];
                            if s == T::zero() {
                                continue;
                            }
                            for (o, &p) in out[r * n..(r + 1) * n].iter_mut().zip(prow) {
                                *o += s * p;
                            }
                        }
                    }
                    chunk.copy_from_slice(&out[..rows * n]);
                }
            }
            Propagator::Iterative => {
                for cell in psi.chunks_mut(n) {
                    self.cg_solve(*dt, cell)?;
                }
            }
        }
        Ok(())
    }

    /// Solves `(diag(m) − dt L) x = m ⊙ psi` in place by Jacobi-preconditioned CG.
    fn cg_solve(&self, dt: T, psi: &mut [T]) -> Result<()> {
        let n = self.nq;
        let apply = |x: &[T], y: &mut [T]| {
            self.laplacian.apply(x, y);
            for i in 0..n {
                y[i] = self.mass[i] * x[i] - dt * y[i];
            }
        };
        let pre: Vec<T> = (0..n).map(|i| T::one() / (self.mass[i] - dt * self.laplacian.diag(i))).collect();
        let rhs: Vec<T> = (0..n).map(|i| self.mass[i] * psi[i]).collect();
        let bnorm = rhs.iter().map(|&v| v * v).sum::<T>().sqrt();
        let mut ax = vec![T::zero(); n];
        apply(psi, &mut ax);
        let mut r: Vec<T> = (0..n).map(|i| rhs[i] - ax[i]).collect();
        let mut z: Vec<T> = (0..n).map(|i| pre[i] * r[i]).collect();
        let mut p = z.clone();
        let mut rz: T = r.iter().zip(&z).map(|(&a, &b)| a * b).sum();
        let tol = c::<T>(1e-14) * bnorm;
        for _ in 0..(4 * n) {
            if r.iter().map(|&v| v * v).sum::<T>().sqrt() <= tol {
                return Ok(());
            }
            apply(&p, &mut ax);
            let pap: T = p.iter().zip(&ax).map(|(&a, &b)| a * b).sum();
            if !(pap > T::zero()) {
                return Err(Error::InvalidParams("q-diffusion operator is not positive definite".into()));
            }
            let alpha = rz / pap;
            for i in 0..n {
                psi[i] += alpha * p[i];
                r[i] -= alpha * ax[i];
                z[i] = pre[i] * r[i];
            }
            let rz_new: T = r.iter().zip(&z).map(|(&a, &b)| a * b).sum();
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        Ok(())
    }

    /// `C_i(M ψ̂)` for one cell, as a 3×3 array (upper-left `d×d` block used).
    pub fn kramers(&self, spring: usize, psi: &[T]) -> [[T; 3]; 3] {
        let mut t = [[T::zero(); 3]; 3];
        for (k, &p) in self.kramers[spring].iter().zip(psi) {
            if p == T::zero() {
                continue;
            }
            for al in 0..3 {
                for be in 0..3 {
                    t[al][be] += p * k[al][be];
                }
            }
        }
        t
    }

    pub fn density(&self, psi: &[T]) -> T {
        self.mass.iter().zip(psi).map(|(&m, &p)| m * p).sum()
    }
}

#[inline]
fn face_velocity<T: Real>(g: &Gradient<T>, geom: &[T; 4]) -> T {
    g[0][0] * geom[0] + g[0][1] * geom[1] + g[1][0] * geom[2] + g[1][1] * geom[3]
}

fn apply_stencil<T: Real>(st: &[(usize, [T; 2])], phi: &[T]) -> [T; 2] {
    let mut g = [T::zero(); 2];
    for &(b, w) in st {
        g[0] += w[0] * phi[b];
        g[1] += w[1] * phi[b];
    }
    g
}

/// Cartesian gradient of spring `i` at every product node from polar
/// differences: one-sided radially at the innermost and outermost rings.
fn polar_gradient_stencils<T: Real>(grid: &QGrid<T>, i: usize) -> Vec<Vec<(usize, [T; 2])>> {
    let ball = &grid.balls[i];
    let nth = ball.n_angular.0;
    let nr = ball.n_radial;
    let rn = &ball.radial_nodes;
    let dth = ball.fv.as_ref().expect("polar ball").d_theta;
    let stride = grid.stride(i);
    (0..grid.len())
        .map(|flat| {
            let local = grid.component(flat, i);
            let (k, l) = (local / nth, local % nth);
            let base = flat - local * stride;
            let node = |kk: usize, ll: usize| base + (kk * nth + ll) * stride;
            let th = dth * T::from_usize_lossy(l);
            let er = [th.cos(), th.sin()];
            let et = [-th.sin(), th.cos()];
            let (km, kp) = (k.saturating_sub(1), (k + 1).min(nr - 1));
            let dr = rn[kp] - rn[km];
            let inv_r = T::one() / (rn[k] * c::<T>(2.0) * dth);
            vec![
                (node(kp, l), [er[0] / dr, er[1] / dr]),
                (node(km, l), [-er[0] / dr, -er[1] / dr]),
                (node(k, (l + 1) % nth), [et[0] * inv_r, et[1] * inv_r]),
                (node(k, (l + nth - 1) % nth), [-et[0] * inv_r, -et[1] * inv_r]),
            ]
        })
        .collect()
}
