//! Small dense linear algebra: symmetric eigenvalues, Cholesky, Gauss–Legendre.

use crate::scalar::{c, Real};

/// Row-major dense square matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Real> DenseMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![T::zero(); n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    /// Builds from nested rows; panics on ragged input.
    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for r in rows {
            assert_eq!(r.len(), n, "matrix must be square");
            data.extend_from_slice(r);
        }
        Self { n, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn is_symmetric(&self, tol: T) -> bool {
        let n = self.n;
        for i in 0..n {
            for j in 0..i {
                let a = self[(i, j)];
                let b = self[(j, i)];
                let scale = T::one().max(a.abs()).max(b.abs());
                if (a - b).abs() > tol * scale {
                    return false;
                }
            }
        }
        true
    }

    pub fn transpose(&self) -> Self {
        let n = self.n;
        let mut t = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        (0..self.n)
            .map(|i| self.row(i).iter().zip(x).map(|(&a, &b)| a * b).sum())
            .collect()
    }

    /// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
    pub fn symmetric_eigenvalues(&self) -> Vec<T> {
        let n = self.n;
        let mut a = self.clone();
        let eps = T::epsilon();
        for _sweep in 0..100 {
            let mut off = T::zero();
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        off += a[(i, j)] * a[(i, j)];
                    }
                }
            }
            let diag: T = (0..n).map(|i| a[(i, i)] * a[(i, i)]).sum();
            if off <= eps * eps * diag.max(T::min_positive_value()) {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[(p, q)];
                    if apq == T::zero() {
                        continue;
                    }
                    let theta = (a[(q, q)] - a[(p, p)]) / (c::<T>(2.0) * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                    let cs = T::one() / (t * t + T::one()).sqrt();
                    let sn = t * cs;
                    for k in 0..n {
                        let akp = a[(k, p)];
                        let akq = a[(k, q)];
                        a[(k, p)] = cs * akp - sn * akq;
                        a[(k, q)] = sn * akp + cs * akq;
                    }
                    for k in 0..n {
                        let apk = a[(p, k)];
                        let aqk = a[(q, k)];
                        a[(p, k)] = cs * apk - sn * aqk;
                        a[(q, k)] = sn * apk + cs * aqk;
                    }
                }
            }
        }
        let mut ev: Vec<T> = (0..n).map(|i| a[(i, i)]).collect();
        ev.sort_by(|x, y| x.partial_cmp(y).expect("finite eigenvalues"));
        ev
    }
}

impl<T> std::ops::Index<(usize, usize)> for DenseMatrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.n + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for DenseMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.n + j]
    }
}

/// Lower-triangular Cholesky factor of an SPD matrix.
#[derive(Clone, Debug)]
pub struct Cholesky<T> {
    l: DenseMatrix<T>,
}

impl<T: Real> Cholesky<T> {
    /// Returns `None` when the matrix is not numerically positive definite.
    pub fn factor(a: &DenseMatrix<T>) -> Option<Self> {
        let n = a.dim();
        let mut l = DenseMatrix::zeros(n);
        for j in 0..n {
            let mut d = a[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !(d > T::zero()) {
                return None;
            }
            let djj = d.sqrt();
            l[(j, j)] = djj;
            for i in (j + 1)..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / djj;
            }
        }
        Some(Self { l })
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.l.dim();
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= self.l[(i, k)] * y[k];
            }
            y[i] = s / self.l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= self.l[(k, i)] * y[k];
            }
            y[i] = s / self.l[(i, i)];
        }
        y
    }
}

/// Gauss–Legendre nodes and weights on `[a, b]`, nodes ascending.
pub fn gauss_legendre<T: Real>(n: usize, a: T, b: T) -> (Vec<T>, Vec<T>) {
    assert!(n > 0, "at least one node");
    let mut x = vec![T::zero(); n];
    let mut w = vec![T::zero(); n];
    let nf = T::from_usize_lossy(n);
    let two = c::<T>(2.0);
    for i in 0..n.div_ceil(2) {
        // Chebyshev-like initial guess, refined by Newton on P_n.
        let mut z = (T::PI() * (T::from_usize_lossy(i) + c(0.75)) / (nf + c(0.5))).cos();
        let mut dp = T::one();
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() <= T::epsilon() * c(4.0) {
                let (_, d) = legendre_with_derivative(n, z);
                dp = d;
                break;
            }
        }
        let wi = two / ((T::one() - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    let half = (b - a) / two;
    let mid = (a + b) / two;
    for (xi, wi) in x.iter_mut().zip(w.iter_mut()) {
        *xi = mid + half * *xi;
        *wi *= half;
    }
    (x, w)
}

fn legendre_with_derivative<T: Real>(n: usize, z: T) -> (T, T) {
    let mut p0 = T::one();
    let mut p1 = z;
    for k in 2..=n {
        let kf = T::from_usize_lossy(k);
        let p2 = ((c::<T>(2.0) * kf - T::one()) * z * p1 - (kf - T::one()) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = T::from_usize_lossy(n);
    let dp = nf * (z * p1 - p0) / (z * z - T::one());
    (p1, dp)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre::<f64>(24, 0.0, 2.0);
        for deg in 0..48 {
            let q: f64 = x.iter().zip(&w).map(|(&x, &w)| w * x.powi(deg)).sum();
            let exact = 2f64.powi(deg + 1) / (deg as f64 + 1.0);
            assert!((q - exact).abs() < 1e-12 * exact.max(1.0), "deg {deg}: {q} vs {exact}");
        }
        assert!(x.windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn gl_nodes_interlace_with_partial_weight_sums() {
        let (x, w) = gauss_legendre::<f64>(24, 0.0, 2.0);
        let mut face = 0.0;
        for (xi, wi) in x.iter().zip(&w) {
            assert!(face < *xi && *xi < face + wi);
            face += wi;
        }
        assert!((face - 2.0).abs() < 1e-13);
    }

    #[test]
    fn jacobi_matches_closed_form_2x2() {
        let a: DenseMatrix<f64> = DenseMatrix::from_rows(&[vec![2.0, -1.0], vec![-1.0, 2.0]]);
        let ev = a.symmetric_eigenvalues();
        assert!((ev[0] - 1.0).abs() < 1e-14 && (ev[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn cholesky_solves_spd_system() {
        let a: DenseMatrix<f64> = DenseMatrix::from_rows(&[
            vec![4.0, 1.0, 0.0],
            vec![1.0, 3.0, -1.0],
            vec![0.0, -1.0, 2.0],
        ]);
        let ch = Cholesky::factor(&a).unwrap();
        let x = ch.solve(&[1.0, 2.0, 3.0]);
        let r = a.matvec(&x);
        for (ri, bi) in r.iter().zip([1.0, 2.0, 3.0]) {
            assert!((ri - bi).abs() < 1e-13);
        }
        let neg = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]);
        assert!(Cholesky::factor(&neg).is_none());
    }
}
