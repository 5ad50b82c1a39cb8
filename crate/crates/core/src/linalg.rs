//! Small dense symmetric positive-definite solves for the normal equations.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Dense row-major square matrix of dimension `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Scalar> SymMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![T::zero(); n * n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.n + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: T) {
        self.data[r * self.n + c] = v;
    }

    /// Adds `w * x x^T` to the upper triangle only; call [`Self::symmetrize`] afterwards.
    #[inline]
    pub fn rank_one_upper(&mut self, w: T, x: &[T]) {
        let n = self.n;
        for r in 0..n {
            let wx = w * x[r];
            let row = &mut self.data[r * n..(r + 1) * n];
            for c in r..n {
                row[c] += wx * x[c];
            }
        }
    }

    pub fn symmetrize(&mut self) {
        for r in 0..self.n {
            for c in 0..r {
                let v = self.get(c, r);
                self.set(r, c, v);
            }
        }
    }

    pub fn add_diagonal(&mut self, v: T) {
        for i in 0..self.n {
            self.data[i * self.n + i] += v;
        }
    }

    pub fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += *b;
        }
    }
}

/// Lower-triangular Cholesky factor `L` with `A = L L^T`.
#[derive(Debug, Clone)]
pub struct Cholesky<T> {
    n: usize,
    l: Vec<T>,
}

impl<T: Scalar> Cholesky<T> {
    pub fn factor(a: &SymMatrix<T>) -> Result<Self> {
        let n = a.dim();
        let mut l = vec![T::zero(); n * n];
        for j in 0..n {
            let mut d = a.get(j, j);
            for k in 0..j {
                d -= l[j * n + k] * l[j * n + k];
            }
            if !(d > T::zero()) || !d.is_finite() {
                return Err(Error::SingularSystem);
            }
            let djj = d.sqrt();
            l[j * n + j] = djj;
            for i in (j + 1)..n {
                let mut s = a.get(i, j);
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s / djj;
            }
        }
        Ok(Self { n, l })
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.n;
        debug_assert_eq!(b.len(), n);
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= self.l[i * n + k] * y[k];
            }
            y[i] = s / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= self.l[k * n + i] * y[k];
            }
            y[i] = s / self.l[i * n + i];
        }
        y
    }
}
