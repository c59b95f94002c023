//! FENE spring potentials, Maxwellians, and configuration-space quadrature.
//!
//! Each spring vector `q_i` lives in the open ball `B(0, √b_i)`. The ball is
//! discretized by a polar (d = 2) or spherical (d = 3) tensor grid with
//! Gauss–Legendre radial nodes, so every quadrature weight already carries the
//! Jacobian. In two dimensions the grid also carries finite-volume geometry:
//! radial cell faces sit at the partial sums of the Gauss–Legendre weights,
//! which interlace with the nodes.

use crate::error::{Error, Result};
use crate::linalg::gauss_legendre;
use crate::scalar::{c, Real};

/// `U(s) = -(b/2) ln(1 - 2s/b)` on `s ∈ [0, b/2)`, with `s = |q|²/2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FenePotential<T> {
    pub b: T,
}

impl<T: Real> FenePotential<T> {
    pub fn new(b: T) -> Self {
        Self { b }
    }

    /// Upper end of the admissible range of `s`.
    pub fn s_max(&self) -> T {
        self.b / c(2.0)
    }

    pub fn radius(&self) -> T {
        self.b.sqrt()
    }

    /// Potential and its derivative, `(U(s), U'(s))`.
    pub fn eval(&self, s: T) -> Result<(T, T)> {
        if !(s >= T::zero() && s < self.s_max()) {
            return Err(Error::BeyondExtensibility { s: s.to_f64_lossy(), limit: self.s_max().to_f64_lossy() });
        }
        Ok((self.u(s), self.du(s)))
    }

    #[inline]
    pub(crate) fn u(&self, s: T) -> T {
        -(self.b / c(2.0)) * (T::one() - c::<T>(2.0) * s / self.b).ln()
    }

    #[inline]
    pub(crate) fn du(&self, s: T) -> T {
        T::one() / (T::one() - c::<T>(2.0) * s / self.b)
    }

    /// Maxwellian decay exponent at the rim, `θ = b/2`.
    pub fn theta(&self) -> T {
        self.b / c(2.0)
    }
}

/// Discretization of one configuration ball.
#[derive(Clone, Debug)]
pub struct BallGrid<T> {
    pub b: T,
    pub radius: T,
    pub dim: usize,
    pub n_radial: usize,
    /// Angular nodes: θ count in 2D, (polar, azimuthal) in 3D.
    pub n_angular: (usize, usize),
    /// Cartesian coordinates of each node (unused components are zero in 2D).
    pub points: Vec<[T; 3]>,
    /// Quadrature weights including the Jacobian.
    pub weights: Vec<T>,
    /// Radial Gauss–Legendre nodes.
    pub radial_nodes: Vec<T>,
    /// Radial cell faces `f_0 = 0 < … < f_nr = √b`.
    pub radial_faces: Vec<T>,
    pub fv: Option<BallFv<T>>,
}

/// Finite-volume connectivity of a 2D polar ball grid.
#[derive(Clone, Debug)]
pub struct BallFv<T> {
    pub faces: Vec<QFace<T>>,
    pub d_theta: T,
}

/// A face between two nodes of one ball; `normal` points from `inner` to `outer`.
#[derive(Clone, Copy, Debug)]
pub struct QFace<T> {
    pub inner: usize,
    pub outer: usize,
    /// Point on the face where the drift velocity is sampled.
    pub centre: [T; 2],
    pub normal: [T; 2],
    pub area: T,
    pub distance: T,
}

impl<T: Real> BallGrid<T> {
    /// Polar (2D) or spherical (3D) grid with `n_radial` Gauss–Legendre radial nodes
    /// and `n_angular` angular nodes (azimuthal count in 3D; polar count is half of it).
    pub fn new(b: T, dim: usize, n_radial: usize, n_angular: usize) -> Result<Self> {
        if n_radial < 2 || n_angular < 4 {
            return Err(Error::InvalidParams(format!(
                "q-grid needs at least 2 radial and 4 angular nodes (got {n_radial}×{n_angular})"
            )));
        }
        let radius = b.sqrt();
        let (rn, rw) = gauss_legendre(n_radial, T::zero(), radius);
        let mut radial_faces = Vec::with_capacity(n_radial + 1);
        let mut acc = T::zero();
        radial_faces.push(acc);
        for &w in &rw {
            acc += w;
            radial_faces.push(acc);
        }
        radial_faces[n_radial] = radius;
        let two_pi = c::<T>(2.0) * T::PI();
        let mut points = Vec::new();
        let mut weights = Vec::new();
        match dim {
            2 => {
                let dth = two_pi / T::from_usize_lossy(n_angular);
                for k in 0..n_radial {
                    for l in 0..n_angular {
                        let th = dth * T::from_usize_lossy(l);
                        points.push([rn[k] * th.cos(), rn[k] * th.sin(), T::zero()]);
                        weights.push(rw[k] * rn[k] * dth);
                    }
                }
                let fv = Self::polar_fv(&rn, &radial_faces, n_angular, dth);
                Ok(Self {
                    b,
                    radius,
                    dim,
                    n_radial,
                    n_angular: (n_angular, 1),
                    points,
                    weights,
                    radial_nodes: rn,
                    radial_faces,
                    fv: Some(fv),
                })
            }
            3 => {
                let n_polar = (n_angular / 2).max(2);
                let (mu, mw) = gauss_legendre(n_polar, -T::one(), T::one());
                let dph = two_pi / T::from_usize_lossy(n_angular);
                for k in 0..n_radial {
                    for (&m, &wm) in mu.iter().zip(&mw) {
                        let st = (T::one() - m * m).sqrt();
                        for l in 0..n_angular {
                            let ph = dph * T::from_usize_lossy(l);
                            let r = rn[k];
                            points.push([r * st * ph.cos(), r * st * ph.sin(), r * m]);
                            weights.push(rw[k] * r * r * wm * dph);
                        }
                    }
                }
                Ok(Self {
                    b,
                    radius,
                    dim,
                    n_radial,
                    n_angular: (n_polar, n_angular),
                    points,
                    weights,
                    radial_nodes: rn,
                    radial_faces,
                    fv: None,
                })
            }
            _ => Err(Error::Unsupported(format!("configuration dimension {dim}"))),
        }
    }

    fn polar_fv(rn: &[T], rf: &[T], nth: usize, dth: T) -> BallFv<T> {
        let nr = rn.len();
        let idx = |k: usize, l: usize| k * nth + l;
        let mut faces = Vec::new();
        for k in 0..nr {
            for l in 0..nth {
                let th = dth * T::from_usize_lossy(l);
                if k + 1 < nr {
                    let f = rf[k + 1];
                    faces.push(QFace {
                        inner: idx(k, l),
                        outer: idx(k + 1, l),
                        centre: [f * th.cos(), f * th.sin()],
                        normal: [th.cos(), th.sin()],
                        area: f * dth,
                        distance: rn[k + 1] - rn[k],
                    });
                }
                let thf = th + dth / c(2.0);
                let r = rn[k];
                faces.push(QFace {
                    inner: idx(k, l),
                    outer: idx(k, (l + 1) % nth),
                    centre: [r * thf.cos(), r * thf.sin()],
                    normal: [-thf.sin(), thf.cos()],
                    area: rf[k + 1] - rf[k],
                    distance: r * dth,
                });
            }
        }
        BallFv { faces, d_theta: dth }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `|q|` of node `n`.
    pub fn node_radius(&self, n: usize) -> T {
        let p = self.points[n];
        (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt()
    }

    /// Node indices of the outermost radial ring.
    pub fn rim_nodes(&self) -> std::ops::Range<usize> {
        let per_ring = self.len() / self.n_radial;
        (self.len() - per_ring)..self.len()
    }
}

/// Product grid over the K configuration balls; the last ball varies fastest.
#[derive(Clone, Debug)]
pub struct QGrid<T> {
    pub balls: Vec<BallGrid<T>>,
    strides: Vec<usize>,
    len: usize,
}

impl<T: Real> QGrid<T> {
    pub fn new(balls: Vec<BallGrid<T>>) -> Self {
        let k = balls.len();
        let mut strides = vec![1; k];
        for i in (0..k.saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * balls[i + 1].len();
        }
        let len = balls.iter().map(|b| b.len()).product();
        Self { balls, strides, len }
    }

    /// Uniform resolution on every spring's ball.
    pub fn uniform(b: &[T], dim: usize, n_radial: usize, n_angular: usize) -> Result<Self> {
        let balls = b
            .iter()
            .map(|&bi| BallGrid::new(bi, dim, n_radial, n_angular))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::new(balls))
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn springs(&self) -> usize {
        self.balls.len()
    }

    pub fn dim(&self) -> usize {
        self.balls[0].dim
    }

    pub fn stride(&self, spring: usize) -> usize {
        self.strides[spring]
    }

    /// Index of spring `i`'s node within the product node `flat`.
    #[inline]
    pub fn component(&self, flat: usize, spring: usize) -> usize {
        (flat / self.strides[spring]) % self.balls[spring].len()
    }

    /// Product quadrature weights.
    pub fn weights(&self) -> Vec<T> {
        (0..self.len)
            .map(|n| {
                self.balls
                    .iter()
                    .enumerate()
                    .map(|(i, b)| b.weights[self.component(n, i)])
                    .fold(T::one(), |a, w| a * w)
            })
            .collect()
    }

    /// Spring vector `q_i` at product node `flat`.
    pub fn q(&self, flat: usize, spring: usize) -> [T; 3] {
        self.balls[spring].points[self.component(flat, spring)]
    }
}

/// Partial and total Maxwellians sampled on a [`QGrid`].
#[derive(Clone, Debug)]
pub struct Maxwellian<T> {
    pub potentials: Vec<FenePotential<T>>,
    /// Partition constants `Z_i`.
    pub partition: Vec<T>,
    /// `M_i` on the nodes of ball `i`.
    pub partial: Vec<Vec<T>>,
    /// `M` on product nodes.
    pub values: Vec<T>,
    /// `M · w` on product nodes: the discrete measure of every q-integral.
    pub mass: Vec<T>,
}

impl<T: Real> Maxwellian<T> {
    /// `M_i` at radius `r` of ball `i`; zero on and beyond the rim.
    pub fn partial_at_radius(&self, spring: usize, r: T) -> T {
        let pot = &self.potentials[spring];
        let s = r * r / c(2.0);
        if s >= pot.s_max() {
            return T::zero();
        }
        (-pot.u(s)).exp() / self.partition[spring]
    }

    /// `∫_D M φ dq` for nodal values `phi`.
    pub fn integrate(&self, phi: &[T]) -> T {
        self.mass.iter().zip(phi).map(|(&m, &p)| m * p).sum()
    }
}

/// Computes `Z_i` by quadrature and samples the Maxwellians; fails when a refined
/// radial quadrature disagrees with the grid's by more than `1e-6` relative.
pub fn build_maxwellian<T: Real>(potentials: &[FenePotential<T>], grid: &QGrid<T>) -> Result<Maxwellian<T>> {
    if potentials.len() != grid.springs() {
        return Err(Error::InvalidParams(format!(
            "{} potentials for {} configuration balls",
            potentials.len(),
            grid.springs()
        )));
    }
    let mut partition = Vec::new();
    let mut partial = Vec::new();
    for (pot, ball) in potentials.iter().zip(&grid.balls) {
        let boltz: Vec<T> = (0..ball.len())
            .map(|n| {
                let r = ball.node_radius(n);
                (-pot.u(r * r / c(2.0))).exp()
            })
            .collect();
        let z: T = boltz.iter().zip(&ball.weights).map(|(&e, &w)| e * w).sum();
        let z_ref = radial_partition_reference(pot, ball.dim, 4 * ball.n_radial);
        let mismatch = ((z - z_ref) / z_ref).abs();
        if !(mismatch <= c(1e-6)) {
            return Err(Error::InsufficientResolution { mismatch: mismatch.to_f64_lossy() });
        }
        partial.push(boltz.into_iter().map(|e| e / z).collect::<Vec<_>>());
        partition.push(z);
    }
    let mut values = vec![T::one(); grid.len()];
    for (n, v) in values.iter_mut().enumerate() {
        for (i, mi) in partial.iter().enumerate() {
            *v *= mi[grid.component(n, i)];
        }
    }
    let mass = values.iter().zip(grid.weights()).map(|(&m, w)| m * w).collect();
    Ok(Maxwellian { potentials: potentials.to_vec(), partition, partial, values, mass })
}

/// `Z` from a one-dimensional radial Gauss–Legendre rule (angular integral exact).
fn radial_partition_reference<T: Real>(pot: &FenePotential<T>, dim: usize, n: usize) -> T {
    let (r, w) = gauss_legendre(n, T::zero(), pot.radius());
    let sphere = if dim == 2 { c::<T>(2.0) * T::PI() } else { c::<T>(4.0) * T::PI() };
    let radial: T = r
        .iter()
        .zip(&w)
        .map(|(&r, &w)| w * r.powi(dim as i32 - 1) * (-pot.u(r * r / c(2.0))).exp())
        .sum();
    sphere * radial
}

/// Fitted constants of the structural assumptions for one spring.
#[derive(Clone, Debug, PartialEq)]
pub struct SpringAssumptions<T> {
    /// Fitted rim exponent θ with `M_i ~ dist^θ`.
    pub theta: T,
    /// Bounds `c1 dist^θ ≤ M_i ≤ c2 dist^θ`.
    pub c1: T,
    pub c2: T,
    /// Bounds `c3 ≤ dist · U'(|q|²/2) ≤ c4`.
    pub c3: T,
    pub c4: T,
    /// `∫ (1 + U² + U'²) M_i dq_i` by quadrature.
    pub moment_integral: T,
    pub rim_decay_ok: bool,
    pub force_bound_ok: bool,
    pub moments_finite: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AssumptionReport<T> {
    pub springs: Vec<SpringAssumptions<T>>,
}

impl<T: Real> AssumptionReport<T> {
    pub fn all_pass(&self) -> bool {
        self.springs.iter().all(|s| s.rim_decay_ok && s.force_bound_ok && s.moments_finite)
    }
}

impl<T: Real> std::fmt::Display for AssumptionReport<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (i, s) in self.springs.iter().enumerate() {
            writeln!(f, "spring {}:", i + 1)?;
            writeln!(
                f,
                "  rim decay     θ = {:.4}, c1 = {:.4e}, c2 = {:.4e}  [{}]",
                s.theta,
                s.c1,
                s.c2,
                pass(s.rim_decay_ok)
            )?;
            writeln!(f, "  force bound   c3 = {:.4e}, c4 = {:.4e}  [{}]", s.c3, s.c4, pass(s.force_bound_ok))?;
            writeln!(f, "  moments       ∫(1+U²+U'²)M = {:.6e}  [{}]", s.moment_integral, pass(s.moments_finite))?;
        }
        Ok(())
    }
}

fn pass(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "FAIL"
    }
}

/// Fits the rim exponent and the bounding constants by sampling the radial profile,
/// and evaluates the moment integral by the grid quadrature.
pub fn verify_assumptions<T: Real>(maxw: &Maxwellian<T>, grid: &QGrid<T>) -> AssumptionReport<T> {
    let mut springs = Vec::new();
    for (i, pot) in maxw.potentials.iter().enumerate() {
        let rad = pot.radius();
        // Least-squares slope of ln M against ln dist close to the rim.
        let n_fit = 24;
        let (mut sx, mut sy, mut sxx, mut sxy) = (T::zero(), T::zero(), T::zero(), T::zero());
        for j in 0..n_fit {
            let e = c::<T>(-6.0) + c::<T>(3.0) * T::from_usize_lossy(j) / T::from_usize_lossy(n_fit - 1);
            let dist = c::<T>(10.0).powf(e) * rad;
            let m = maxw.partial_at_radius(i, rad - dist);
            let (x, y) = (dist.ln(), m.ln());
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
        }
        let nf = T::from_usize_lossy(n_fit);
        let theta = (nf * sxy - sx * sy) / (nf * sxx - sx * sx);

        let mut c1 = T::infinity();
        let mut c2 = T::zero();
        let mut c3 = T::infinity();
        let mut c4 = T::zero();
        let samples = 4000;
        for j in 0..samples {
            // Geometric clustering towards the rim.
            let t = T::from_usize_lossy(j) / T::from_usize_lossy(samples);
            let dist = rad * c::<T>(10.0).powf(c::<T>(-7.0) * (T::one() - t));
            let r = rad - dist;
            if r < T::zero() {
                continue;
            }
            let m = maxw.partial_at_radius(i, r);
            let ratio = m / dist.powf(theta);
            c1 = c1.min(ratio);
            c2 = c2.max(ratio);
            let f = dist * pot.du(r * r / c(2.0));
            c3 = c3.min(f);
            c4 = c4.max(f);
        }
        let ball = &grid.balls[i];
        let moment_integral: T = (0..ball.len())
            .map(|n| {
                let r = ball.node_radius(n);
                let s = r * r / c(2.0);
                let (u, du) = (pot.u(s), pot.du(s));
                (T::one() + u * u + du * du) * maxw.partial[i][n] * ball.weights[n]
            })
            .sum();
        springs.push(SpringAssumptions {
            theta,
            c1,
            c2,
            c3,
            c4,
            moment_integral,
            rim_decay_ok: theta > T::one() && c1 > T::zero() && c2.is_finite(),
            force_bound_ok: c3 > T::zero() && c4.is_finite(),
            moments_finite: moment_integral.is_finite(),
        });
    }
    AssumptionReport { springs }
}

/// Maximum over grid nodes with `|q_i| ≤ (1 - rim_fraction)√b_i` of
/// `|−∇_{q_i} ln M − U'(|q_i|²/2) q_i|`, with the gradient of `ln M` taken by
/// centred differences of step `step` along each Cartesian axis.
pub fn maxwellian_gradient_identity_check<T: Real>(
    maxw: &Maxwellian<T>,
    grid: &QGrid<T>,
    step: T,
    rim_fraction: T,
) -> T {
    let mut worst = T::zero();
    for (i, (pot, ball)) in maxw.potentials.iter().zip(&grid.balls).enumerate() {
        let r_max = (T::one() - rim_fraction) * pot.radius();
        let ln_m = |p: [T; 3]| {
            let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
            maxw.partial_at_radius(i, r).ln()
        };
        for n in 0..ball.len() {
            if ball.node_radius(n) > r_max {
                continue;
            }
            let q = ball.points[n];
            let du = pot.du(ball.node_radius(n).powi(2) / c(2.0));
            let mut err = T::zero();
            for a in 0..ball.dim {
                let mut qp = q;
                let mut qm = q;
                qp[a] += step;
                qm[a] -= step;
                let grad = (ln_m(qp) - ln_m(qm)) / (c::<T>(2.0) * step);
                let diff = -grad - du * q[a];
                err += diff * diff;
            }
            worst = worst.max(err.sqrt());
        }
    }
    worst
}
