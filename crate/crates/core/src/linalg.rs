//! Fixed-size dense matrices for the Kalman filter.
//!
//! The state is 6-dimensional and the measurement 4-dimensional, so
//! everything fits in stack arrays; no heap or BLAS needed.

use std::ops::{Add, Index, IndexMut, Mul, Sub};

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Matrix<T, const R: usize, const C: usize>(pub [[T; C]; R]);

pub type Vector<T, const N: usize> = Matrix<T, N, 1>;

impl<T: Scalar, const R: usize, const C: usize> Matrix<T, R, C> {
    pub fn zeros() -> Self {
        Matrix([[T::zero(); C]; R])
    }

    pub fn from_fn(mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut m = Self::zeros();
        for r in 0..R {
            for c in 0..C {
                m.0[r][c] = f(r, c);
            }
        }
        m
    }

    pub fn transpose(&self) -> Matrix<T, C, R> {
        Matrix::from_fn(|r, c| self.0[c][r])
    }

    pub fn scale(&self, k: T) -> Self {
        Self::from_fn(|r, c| self.0[r][c] * k)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|v| v.is_finite())
    }

    /// Copies the sub-block starting at `(r0, c0)`.
    pub fn block<const BR: usize, const BC: usize>(&self, r0: usize, c0: usize) -> Matrix<T, BR, BC> {
        Matrix::from_fn(|r, c| self.0[r0 + r][c0 + c])
    }
}

impl<T: Scalar, const N: usize> Matrix<T, N, N> {
    pub fn identity() -> Self {
        Self::from_fn(|r, c| if r == c { T::one() } else { T::zero() })
    }

    pub fn from_diagonal(d: [T; N]) -> Self {
        Self::from_fn(|r, c| if r == c { d[r] } else { T::zero() })
    }

    pub fn diagonal(&self) -> [T; N] {
        std::array::from_fn(|i| self.0[i][i])
    }

    pub fn trace(&self) -> T {
        self.diagonal().into_iter().sum()
    }

    /// Largest absolute difference between mirrored entries.
    pub fn asymmetry(&self) -> T {
        let mut worst = T::zero();
        for r in 0..N {
            for c in (r + 1)..N {
                worst = worst.max((self.0[r][c] - self.0[c][r]).abs());
            }
        }
        worst
    }

    /// Averages the matrix with its transpose.
    pub fn symmetrize(&self) -> Self {
        let half = T::lit(0.5);
        Self::from_fn(|r, c| (self.0[r][c] + self.0[c][r]) * half)
    }

    /// Lower-triangular Cholesky factor, or `None` if the matrix is not
    /// numerically positive-definite.
    pub fn cholesky(&self) -> Option<Cholesky<T, N>> {
        let mut l = Self::zeros();
        for j in 0..N {
            let mut d = self.0[j][j];
            for k in 0..j {
                d -= l.0[j][k] * l.0[j][k];
            }
            if !(d > T::zero()) || !d.is_finite() {
                return None;
            }
            let djj = d.sqrt();
            l.0[j][j] = djj;
            for i in (j + 1)..N {
                let mut s = self.0[i][j];
                for k in 0..j {
                    s -= l.0[i][k] * l.0[j][k];
                }
                l.0[i][j] = s / djj;
            }
        }
        Some(Cholesky { lower: l })
    }
}

/// Cholesky factorization `A = L Lᵀ` of a symmetric positive-definite matrix.
#[derive(Debug, Clone, Copy)]
pub struct Cholesky<T, const N: usize> {
    lower: Matrix<T, N, N>,
}

impl<T: Scalar, const N: usize> Cholesky<T, N> {
    pub fn lower(&self) -> &Matrix<T, N, N> {
        &self.lower
    }

    pub fn log_det(&self) -> T {
        let two = T::lit(2.0);
        self.lower.diagonal().into_iter().map(|d| two * d.ln()).sum()
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &Vector<T, N>) -> Vector<T, N> {
        let l = &self.lower.0;
        let mut y = [T::zero(); N];
        for i in 0..N {
            let mut s = b.0[i][0];
            for k in 0..i {
                s -= l[i][k] * y[k];
            }
            y[i] = s / l[i][i];
        }
        let mut x = [T::zero(); N];
        for i in (0..N).rev() {
            let mut s = y[i];
            for k in (i + 1)..N {
                s -= l[k][i] * x[k];
            }
            x[i] = s / l[i][i];
        }
        Matrix(x.map(|v| [v]))
    }

    /// `bᵀ A⁻¹ b`, the squared Mahalanobis norm.
    pub fn mahalanobis_sq(&self, b: &Vector<T, N>) -> T {
        let x = self.solve(b);
        (0..N).map(|i| b.0[i][0] * x.0[i][0]).sum()
    }

    pub fn inverse(&self) -> Matrix<T, N, N> {
        let mut inv = Matrix::zeros();
        for c in 0..N {
            let mut e = Vector::<T, N>::zeros();
            e.0[c][0] = T::one();
            let col = self.solve(&e);
            for r in 0..N {
                inv.0[r][c] = col.0[r][0];
            }
        }
        inv.symmetrize()
    }
}

impl<T: Scalar, const N: usize> Vector<T, N> {
    pub fn from_array(v: [T; N]) -> Self {
        Matrix(v.map(|x| [x]))
    }

    pub fn to_array(&self) -> [T; N] {
        std::array::from_fn(|i| self.0[i][0])
    }
}

impl<T: Scalar, const R: usize, const C: usize> Add for Matrix<T, R, C> {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        Self::from_fn(|r, c| self.0[r][c] + rhs.0[r][c])
    }
}

impl<T: Scalar, const R: usize, const C: usize> Sub for Matrix<T, R, C> {
    type Output = Self;

    fn sub(self, rhs: Self) -> Self {
        Self::from_fn(|r, c| self.0[r][c] - rhs.0[r][c])
    }
}

impl<T: Scalar, const R: usize, const K: usize, const C: usize> Mul<Matrix<T, K, C>> for Matrix<T, R, K> {
    type Output = Matrix<T, R, C>;

    fn mul(self, rhs: Matrix<T, K, C>) -> Matrix<T, R, C> {
        Matrix::from_fn(|r, c| (0..K).map(|k| self.0[r][k] * rhs.0[k][c]).sum())
    }
}

impl<T, const R: usize, const C: usize> Index<(usize, usize)> for Matrix<T, R, C> {
    type Output = T;

    fn index(&self, (r, c): (usize, usize)) -> &T {
        &self.0[r][c]
    }
}

impl<T, const R: usize, const C: usize> IndexMut<(usize, usize)> for Matrix<T, R, C> {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut T {
        &mut self.0[r][c]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_reconstructs_and_solves() {
        let a = Matrix([[4.0_f64, 2.0, 0.6], [2.0, 5.0, 1.0], [0.6, 1.0, 3.0]]);
        let ch = a.cholesky().unwrap();
        let l = *ch.lower();
        let back = l * l.transpose();
        assert!((back - a).0.iter().flatten().all(|v| v.abs() < 1e-12));

        let b = Vector::from_array([1.0, -2.0, 0.5]);
        let x = ch.solve(&b);
        let r = a * x - b;
        assert!(r.0.iter().flatten().all(|v| v.abs() < 1e-12));

        let inv = ch.inverse();
        let id = a * inv;
        assert!((id - Matrix::identity()).0.iter().flatten().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn log_det_of_diagonal() {
        let a = Matrix::from_diagonal([2.0_f64, 3.0, 0.5]);
        let ld = a.cholesky().unwrap().log_det();
        assert!((ld - 3.0_f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = Matrix([[1.0_f64, 2.0], [2.0, 1.0]]);
        assert!(a.cholesky().is_none());
        assert!(Matrix::<f64, 2, 2>::zeros().cholesky().is_none());
    }

    #[test]
    fn block_and_transpose() {
        let a = Matrix::<f64, 3, 3>::from_fn(|r, c| (r * 3 + c) as f64);
        let b: Matrix<f64, 2, 2> = a.block(1, 1);
        assert_eq!(b.0, [[4.0, 5.0], [7.0, 8.0]]);
        assert_eq!(a.transpose()[(0, 2)], 6.0);
    }
}
