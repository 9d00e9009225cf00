//! Small dense kernels behind the tensor-product elliptic solver.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat<T> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<T>,
}

impl<T: Real> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = T::one();
        }
        m
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: T) {
        self.data[r * self.cols + c] = v;
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        t
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|r| {
                let row = &self.data[r * self.cols..(r + 1) * self.cols];
                row.iter().zip(x).fold(T::zero(), |acc, (&a, &b)| acc + a * b)
            })
            .collect()
    }
}

/// `C = A B` for row-major `A` (`p x q`) and `B` (`q x r`) given as slices.
pub fn matmul<T: Real>(a: &[T], b: &[T], p: usize, q: usize, r: usize) -> Vec<T> {
    debug_assert_eq!(a.len(), p * q);
    debug_assert_eq!(b.len(), q * r);
    let mut c = vec![T::zero(); p * r];
    for i in 0..p {
        let crow = &mut c[i * r..(i + 1) * r];
        let arow = &a[i * q..(i + 1) * q];
        for (k, &aik) in arow.iter().enumerate() {
            if aik == T::zero() {
                continue;
            }
            let brow = &b[k * r..(k + 1) * r];
            for (cj, &bkj) in crow.iter_mut().zip(brow) {
                *cj += aik * bkj;
            }
        }
    }
    c
}

/// Eigen-decomposition of a symmetric tridiagonal matrix by the implicit QL
/// method. `diag` has length `n`, `offdiag[i]` couples rows `i` and `i+1`.
///
/// Returns eigenvalues in ascending order and the orthonormal eigenvectors as
/// the columns of the returned matrix.
pub fn symmetric_tridiagonal_eigen<T: Real>(diag: &[T], offdiag: &[T]) -> Result<(Vec<T>, Mat<T>)> {
    let n = diag.len();
    if n == 0 || offdiag.len() + 1 != n {
        return Err(Error::InvalidGrid(format!(
            "tridiagonal eigenproblem needs n >= 1 and n-1 off-diagonals (n = {n}, got {})",
            offdiag.len()
        )));
    }
    let mut d = diag.to_vec();
    let mut e = vec![T::zero(); n];
    e[..n - 1].copy_from_slice(offdiag);
    let mut v = Mat::identity(n);

    let eps = T::epsilon();
    let two = T::lit(2.0);
    let mut f = T::zero();
    let mut tst1 = T::zero();
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > 60 {
                    return Err(Error::StepFailure("tridiagonal QL iteration did not converge".into()));
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (two * e[l]);
                let mut r = p.hypot(T::one());
                if p < T::zero() {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = T::one();
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = T::zero();
                let mut s2 = T::zero();
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for k in 0..n {
                        let vk1 = v.get(k, i + 1);
                        let vk = v.get(k, i);
                        v.set(k, i + 1, s * vk + c * vk1);
                        v.set(k, i, c * vk - s * vk1);
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = T::zero();
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].partial_cmp(&d[b]).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|&k| d[k]).collect();
    let mut vectors = Mat::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        for r in 0..n {
            vectors.set(r, col, v.get(r, k));
        }
    }
    Ok((values, vectors))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_small() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]; // 2x3
        let b = [1.0, 0.0, 0.0, 1.0, 2.0, -1.0]; // 3x2
        assert_eq!(matmul(&a, &b, 2, 3, 2), vec![7.0, -1.0, 16.0, -1.0]);
    }

    #[test]
    fn dirichlet_second_difference_spectrum() {
        // -2 on the diagonal, 1 off it: eigenvalues -4 sin^2(k pi / (2(n+1)))
        let n = 31;
        let (vals, vecs) =
            symmetric_tridiagonal_eigen(&vec![-2.0f64; n], &vec![1.0; n - 1]).unwrap();
        let mut exact: Vec<f64> = (1..=n)
            .map(|k| {
                let s = (k as f64 * std::f64::consts::PI / (2.0 * (n as f64 + 1.0))).sin();
                -4.0 * s * s
            })
            .collect();
        exact.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (a, b) in vals.iter().zip(&exact) {
            assert!((a - b).abs() < 1e-13, "{a} vs {b}");
        }
        // orthonormal columns
        let qtq = matmul(&vecs.transpose().data, &vecs.data, n, n, n);
        for r in 0..n {
            for c in 0..n {
                let want = if r == c { 1.0 } else { 0.0 };
                assert!((qtq[r * n + c] - want).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn eigenpairs_reconstruct_matrix() {
        let diag = [3.0f64, -1.0, 0.5, 2.0, 7.0];
        let off = [1.0, 0.25, -2.0, 0.75];
        let (vals, q) = symmetric_tridiagonal_eigen(&diag, &off).unwrap();
        let n = diag.len();
        for r in 0..n {
            for c in 0..n {
                let a: f64 = (0..n).map(|k| q.get(r, k) * vals[k] * q.get(c, k)).sum();
                let want = if r == c {
                    diag[r]
                } else if r + 1 == c {
                    off[r]
                } else if c + 1 == r {
                    off[c]
                } else {
                    0.0
                };
                assert!((a - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn one_by_one() {
        let (vals, q) = symmetric_tridiagonal_eigen(&[-2.0f64], &[]).unwrap();
        assert_eq!(vals, vec![-2.0]);
        assert_eq!(q.data, vec![1.0]);
    }
}
