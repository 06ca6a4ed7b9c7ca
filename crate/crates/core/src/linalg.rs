//! Envelope (skyline) storage with an in-place Cholesky factorization, and a
//! small dense Jacobi eigensolver for Rayleigh–Ritz projections.

use crate::error::{Error, Result};
use crate::scalar::{dot, Real};

/// Symmetric matrix stored by rows of its lower envelope.
///
/// Row `i` holds columns `start[i]..=i` contiguously. Cholesky fill-in stays
/// inside the envelope, so the factor reuses the same layout.
#[derive(Clone, Debug)]
pub struct EnvelopeMatrix<T> {
    start: Vec<usize>,
    offset: Vec<usize>,
    data: Vec<T>,
}

impl<T: Real> EnvelopeMatrix<T> {
    /// Zero matrix with the given first column per row (`start[i] <= i`).
    pub fn zeros(start: Vec<usize>) -> Self {
        let mut offset = Vec::with_capacity(start.len() + 1);
        let mut total = 0;
        for (i, &s) in start.iter().enumerate() {
            debug_assert!(s <= i);
            offset.push(total);
            total += i - s + 1;
        }
        offset.push(total);
        EnvelopeMatrix {
            start,
            offset,
            data: vec![T::zero(); total],
        }
    }

    pub fn dim(&self) -> usize {
        self.start.len()
    }

    pub fn stored(&self) -> usize {
        self.data.len()
    }

    #[inline]
    fn row(&self, i: usize) -> &[T] {
        &self.data[self.offset[i]..self.offset[i + 1]]
    }

    /// Adds `v` at `(i, j)`, `j <= i`, which must lie in the envelope.
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: T) {
        debug_assert!(j <= i && j >= self.start[i]);
        self.data[self.offset[i] + j - self.start[i]] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let (i, j) = if j > i { (j, i) } else { (i, j) };
        if j < self.start[i] {
            T::zero()
        } else {
            self.data[self.offset[i] + j - self.start[i]]
        }
    }

    /// `y = A x` using both triangles.
    pub fn matvec(&self, x: &[T], y: &mut [T]) {
        y.iter_mut().for_each(|v| *v = T::zero());
        for i in 0..self.dim() {
            let s = self.start[i];
            let row = self.row(i);
            let (off, diag) = row.split_at(row.len() - 1);
            y[i] += dot(off, &x[s..i]) + diag[0] * x[i];
            for (k, &a) in off.iter().enumerate() {
                y[s + k] += a * x[i];
            }
        }
    }

    /// Row-oriented envelope Cholesky `A = L L^T`.
    pub fn cholesky(mut self) -> Result<EnvelopeCholesky<T>> {
        let n = self.dim();
        for i in 0..n {
            let si = self.start[i];
            let oi = self.offset[i];
            for j in si..i {
                let sj = self.start[j];
                let oj = self.offset[j];
                let lo = si.max(sj);
                let len = j - lo;
                let s = {
                    let (head, tail) = self.data.split_at(oi);
                    let rj = &head[oj + lo - sj..oj + lo - sj + len];
                    let ri = &tail[lo - si..lo - si + len];
                    dot(ri, rj)
                };
                let diag_j = self.data[self.offset[j + 1] - 1];
                let pos = oi + j - si;
                self.data[pos] = (self.data[pos] - s) / diag_j;
            }
            let row = &self.data[oi..self.offset[i + 1]];
            let (off, diag) = row.split_at(row.len() - 1);
            let d = diag[0] - dot(off, off);
            if !(d > T::zero()) {
                return Err(Error::Invariant(format!(
                    "matrix is not positive definite (pivot {i}: {d:e})"
                )));
            }
            let last = self.offset[i + 1] - 1;
            self.data[last] = d.sqrt();
        }
        Ok(EnvelopeCholesky { factor: self })
    }
}

#[derive(Clone, Debug)]
pub struct EnvelopeCholesky<T> {
    factor: EnvelopeMatrix<T>,
}

impl<T: Real> EnvelopeCholesky<T> {
    pub fn dim(&self) -> usize {
        self.factor.dim()
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [T]) {
        let l = &self.factor;
        let n = l.dim();
        for i in 0..n {
            let s = l.start[i];
            let row = l.row(i);
            let (off, diag) = row.split_at(row.len() - 1);
            let acc = dot(off, &b[s..i]);
            b[i] = (b[i] - acc) / diag[0];
        }
        for i in (0..n).rev() {
            let s = l.start[i];
            let row = l.row(i);
            let (off, diag) = row.split_at(row.len() - 1);
            b[i] /= diag[0];
            let xi = b[i];
            for (k, &a) in off.iter().enumerate() {
                b[s + k] -= a * xi;
            }
        }
    }
}

/// Eigen-decomposition of a small symmetric matrix (row-major `p x p`) by
/// cyclic Jacobi rotations. Returns eigenvalues ascending and the matching
/// eigenvectors as columns of a row-major matrix.
pub fn symmetric_eigen<T: Real>(a: &[T], p: usize) -> (Vec<T>, Vec<T>) {
    let mut m = a.to_vec();
    let mut v = vec![T::zero(); p * p];
    for i in 0..p {
        v[i * p + i] = T::one();
    }
    for _sweep in 0..100 {
        let off: T = (0..p)
            .flat_map(|i| (0..p).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i * p + j] * m[i * p + j])
            .sum();
        let scale: T = (0..p).map(|i| m[i * p + i] * m[i * p + i]).sum();
        if off <= T::epsilon() * T::epsilon() * scale || off == T::zero() {
            break;
        }
        for q in 1..p {
            for r in 0..q {
                let apq = m[r * p + q];
                if apq == T::zero() {
                    continue;
                }
                let app = m[r * p + r];
                let aqq = m[q * p + q];
                let theta = (aqq - app) / (T::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = (t * t + T::one()).sqrt().recip();
                let s = t * c;
                for k in 0..p {
                    let mkr = m[k * p + r];
                    let mkq = m[k * p + q];
                    m[k * p + r] = c * mkr - s * mkq;
                    m[k * p + q] = s * mkr + c * mkq;
                }
                for k in 0..p {
                    let mrk = m[r * p + k];
                    let mqk = m[q * p + k];
                    m[r * p + k] = c * mrk - s * mqk;
                    m[q * p + k] = s * mrk + c * mqk;
                }
                for k in 0..p {
                    let vkr = v[k * p + r];
                    let vkq = v[k * p + q];
                    v[k * p + r] = c * vkr - s * vkq;
                    v[k * p + q] = s * vkr + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&i, &j| m[i * p + i].partial_cmp(&m[j * p + j]).unwrap());
    let vals = order.iter().map(|&i| m[i * p + i]).collect();
    let mut vecs = vec![T::zero(); p * p];
    for (new, &old) in order.iter().enumerate() {
        for k in 0..p {
            vecs[k * p + new] = v[k * p + old];
        }
    }
    (vals, vecs)
}
