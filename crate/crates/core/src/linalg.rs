//! Small dense linear algebra over `f64` and `Complex64`.
//!
//! Everything here operates on matrices of a few hundred rows at most
//! (basis dimension `r`, or `p * r` for block checks), so the algorithms
//! favour robustness over asymptotic speed: cyclic Jacobi for Hermitian
//! eigenproblems, partial-pivot LU for solves.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Debug;
use core::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex64;
use num_traits::{Float, One, Zero};

use crate::{Error, Result};

/// Field operations shared by real and complex entries.
pub trait Scalar:
    Copy
    + Debug
    + PartialEq
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + Send
    + Sync
    + 'static
{
    fn conj(self) -> Self;
    fn abs_sqr(self) -> f64;
    fn from_real(x: f64) -> Self;
    fn real(self) -> f64;
    fn scale(self, x: f64) -> Self;
    fn inv(self) -> Self;
    fn abs(self) -> f64 {
        self.abs_sqr().sqrt()
    }
}

impl Scalar for f64 {
    fn conj(self) -> Self {
        self
    }
    fn abs_sqr(self) -> f64 {
        self * self
    }
    fn from_real(x: f64) -> Self {
        x
    }
    fn real(self) -> f64 {
        self
    }
    fn scale(self, x: f64) -> Self {
        self * x
    }
    fn inv(self) -> Self {
        1.0 / self
    }
    fn abs(self) -> f64 {
        Float::abs(self)
    }
}

impl Scalar for Complex64 {
    fn conj(self) -> Self {
        Complex64::conj(&self)
    }
    fn abs_sqr(self) -> f64 {
        self.norm_sqr()
    }
    fn from_real(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn real(self) -> f64 {
        self.re
    }
    fn scale(self, x: f64) -> Self {
        self * x
    }
    fn inv(self) -> Self {
        Complex64::new(1.0, 0.0) / self
    }
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

pub type RMatrix = Matrix<f64>;
pub type CMatrix = Matrix<Complex64>;

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(alloc::format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn diag(values: &[T]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn conj(&self) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|x| x.conj()).collect() }
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> Matrix<U> {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| f(x)).collect() }
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.rows, "matmul dimension mismatch");
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == T::zero() {
                    continue;
                }
                let rhs_row = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                for (o, &b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.cols, v.len(), "matvec dimension mismatch");
        (0..self.rows)
            .map(|i| {
                let mut acc = T::zero();
                for (&a, &b) in self.row(i).iter().zip(v) {
                    acc += a * b;
                }
                acc
            })
            .collect()
    }

    pub fn scaled(&self, x: f64) -> Self {
        self.map(|v| v.scale(x))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x.abs_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|x| x.abs()).fold(0.0, f64::max)
    }

    pub fn trace(&self) -> T {
        let mut acc = T::zero();
        for i in 0..self.rows.min(self.cols) {
            acc += self[(i, i)];
        }
        acc
    }

    /// Largest entrywise modulus of `self - self^H`.
    pub fn hermitian_deviation(&self) -> f64 {
        let mut dev: f64 = 0.0;
        for i in 0..self.rows {
            for j in i..self.cols {
                dev = dev.max((self[(i, j)] - self[(j, i)].conj()).abs());
            }
        }
        dev
    }

    /// Kronecker product `self ⊗ rhs`.
    pub fn kron(&self, rhs: &Self) -> Self {
        Self::from_fn(self.rows * rhs.rows, self.cols * rhs.cols, |i, j| {
            self[(i / rhs.rows, j / rhs.cols)] * rhs[(i % rhs.rows, j % rhs.cols)]
        })
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

impl<T: Scalar> Add for &Matrix<T> {
    type Output = Matrix<T>;
    fn add(self, rhs: Self) -> Matrix<T> {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        let data = self.data.iter().zip(&rhs.data).map(|(&a, &b)| a + b).collect();
        Matrix { rows: self.rows, cols: self.cols, data }
    }
}

impl<T: Scalar> Sub for &Matrix<T> {
    type Output = Matrix<T>;
    fn sub(self, rhs: Self) -> Matrix<T> {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        let data = self.data.iter().zip(&rhs.data).map(|(&a, &b)| a - b).collect();
        Matrix { rows: self.rows, cols: self.cols, data }
    }
}

impl<T: Scalar> Mul for &Matrix<T> {
    type Output = Matrix<T>;
    fn mul(self, rhs: Self) -> Matrix<T> {
        self.matmul(rhs)
    }
}

impl RMatrix {
    pub fn to_complex(&self) -> CMatrix {
        self.map(|x| Complex64::new(x, 0.0))
    }
}

impl CMatrix {
    pub fn real_part(&self) -> RMatrix {
        self.map(|z| z.re)
    }

    pub fn imag_part(&self) -> RMatrix {
        self.map(|z| z.im)
    }
}

/// Eigenpairs of a Hermitian matrix, eigenvalues in descending order and
/// eigenvectors stored as the matching columns of `vectors`.
#[derive(Debug, Clone)]
pub struct HermitianEigen<T> {
    pub values: Vec<f64>,
    pub vectors: Matrix<T>,
}

impl<T: Scalar> HermitianEigen<T> {
    pub fn vector(&self, k: usize) -> Vec<T> {
        self.vectors.column(k)
    }

    pub fn reconstruct(&self) -> Matrix<T> {
        let n = self.values.len();
        let scaled =
            Matrix::from_fn(n, n, |i, k| self.vectors[(i, k)].scale(self.values[k]));
        scaled.matmul(&self.vectors.adjoint())
    }
}

const JACOBI_MAX_SWEEPS: usize = 100;

/// Cyclic Jacobi eigendecomposition of a Hermitian (or real symmetric)
/// matrix. Only the upper triangle is read.
pub fn hermitian_eigen<T: Scalar>(m: &Matrix<T>) -> Result<HermitianEigen<T>> {
    if !m.is_square() {
        return Err(Error::Dimension(alloc::format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            m.rows, m.cols
        )));
    }
    let n = m.rows;
    let mut a = Matrix::from_fn(n, n, |i, j| {
        if i == j {
            T::from_real(m[(i, i)].real())
        } else if i < j {
            m[(i, j)]
        } else {
            m[(j, i)].conj()
        }
    });
    let mut v = Matrix::<T>::identity(n);
    let scale = a.frobenius_norm();
    if scale == 0.0 {
        return Ok(HermitianEigen { values: vec![0.0; n], vectors: v });
    }

    let mut converged = false;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += a[(i, j)].abs_sqr();
            }
        }
        if off.sqrt() <= 1e-15 * scale {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                let g = apq.abs();
                if g <= 1e-300 {
                    continue;
                }
                let phase = apq.scale(1.0 / g);
                let app = a[(p, p)].real();
                let aqq = a[(q, q)].real();
                let theta = (aqq - app) / (2.0 * g);
                let t = if theta.is_infinite() {
                    0.0
                } else {
                    let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
                    sign / (Float::abs(theta) + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                let ph_c = phase.conj();

                // A <- A V
                for i in 0..n {
                    let aip = a[(i, p)];
                    let aiq = a[(i, q)];
                    a[(i, p)] = aip.scale(c) - (ph_c * aiq).scale(s);
                    a[(i, q)] = aip.scale(s) + (ph_c * aiq).scale(c);
                }
                // A <- V^H A
                for j in 0..n {
                    let apj = a[(p, j)];
                    let aqj = a[(q, j)];
                    a[(p, j)] = apj.scale(c) - (phase * aqj).scale(s);
                    a[(q, j)] = apj.scale(s) + (phase * aqj).scale(c);
                }
                a[(p, q)] = T::zero();
                a[(q, p)] = T::zero();
                a[(p, p)] = T::from_real(a[(p, p)].real());
                a[(q, q)] = T::from_real(a[(q, q)].real());
                // V <- V V_pq
                for i in 0..n {
                    let vip = v[(i, p)];
                    let viq = v[(i, q)];
                    v[(i, p)] = vip.scale(c) - (ph_c * viq).scale(s);
                    v[(i, q)] = vip.scale(s) + (ph_c * viq).scale(c);
                }
            }
        }
    }
    if !converged {
        return Err(Error::NonConvergence("Jacobi eigenvalue sweeps".into()));
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| a[(i, i)].real()).collect();
    order.sort_by(|&x, &y| diag[y].total_cmp(&diag[x]));
    let values = order.iter().map(|&k| diag[k]).collect();
    let vectors = Matrix::from_fn(n, n, |i, k| v[(i, order[k])]);
    Ok(HermitianEigen { values, vectors })
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue<T: Scalar>(m: &Matrix<T>) -> Result<f64> {
    Ok(hermitian_eigen(m)?.values.last().copied().unwrap_or(0.0))
}

/// LU factorisation with partial pivoting, `P A = L U` packed in one matrix.
#[derive(Debug, Clone)]
pub struct Lu<T> {
    lu: Matrix<T>,
    perm: Vec<usize>,
}

impl<T: Scalar> Lu<T> {
    pub fn new(m: &Matrix<T>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Dimension("LU needs a square matrix".into()));
        }
        let n = m.rows;
        let mut lu = m.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = m.max_abs().max(f64::MIN_POSITIVE);
        for k in 0..n {
            let (piv, piv_abs) = (k..n)
                .map(|i| (i, lu[(i, k)].abs()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if piv_abs <= 1e-14 * scale {
                return Err(Error::Singular);
            }
            if piv != k {
                for j in 0..n {
                    lu.data.swap(k * n + j, piv * n + j);
                }
                perm.swap(k, piv);
            }
            let inv = lu[(k, k)].inv();
            for i in (k + 1)..n {
                let factor = lu[(i, k)] * inv;
                lu[(i, k)] = factor;
                if factor == T::zero() {
                    continue;
                }
                for j in (k + 1)..n {
                    let u = lu[(k, j)];
                    lu[(i, j)] = lu[(i, j)] - factor * u;
                }
            }
        }
        Ok(Self { lu, perm })
    }

    pub fn solve_vec(&self, b: &[T]) -> Vec<T> {
        let n = self.perm.len();
        let mut x: Vec<T> = self.perm.iter().map(|&i| b[i]).collect();
        for i in 0..n {
            let mut acc = x[i];
            for j in 0..i {
                acc = acc - self.lu[(i, j)] * x[j];
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in (i + 1)..n {
                acc = acc - self.lu[(i, j)] * x[j];
            }
            x[i] = acc * self.lu[(i, i)].inv();
        }
        x
    }

    pub fn inverse(&self) -> Matrix<T> {
        let n = self.perm.len();
        let mut out = Matrix::zeros(n, n);
        let mut e = vec![T::zero(); n];
        for j in 0..n {
            e.iter_mut().for_each(|x| *x = T::zero());
            e[j] = T::one();
            let col = self.solve_vec(&e);
            for i in 0..n {
                out[(i, j)] = col[i];
            }
        }
        out
    }
}

pub fn inverse<T: Scalar>(m: &Matrix<T>) -> Result<Matrix<T>> {
    Ok(Lu::new(m)?.inverse())
}

/// Operator 2-norm (largest singular value) of a real matrix.
pub fn spectral_norm(m: &RMatrix) -> Result<f64> {
    let gram = m.transpose().matmul(m);
    let eig = hermitian_eigen(&gram)?;
    Ok(eig.values.first().copied().unwrap_or(0.0).max(0.0).sqrt())
}

/// Spectral radius via Gelfand's formula on repeated squares,
/// `rho(M) = lim ||M^(2^k)||_F^(2^-k)`, tracked in log space.
pub fn spectral_radius(m: &RMatrix) -> f64 {
    let mut power = m.clone();
    let mut log_scale = 0.0_f64;
    let mut exponent = 1.0_f64;
    let mut estimate = power.frobenius_norm();
    for _ in 0..40 {
        let norm = power.frobenius_norm();
        if norm == 0.0 {
            return 0.0;
        }
        log_scale += norm.ln();
        power = power.scaled(1.0 / norm);
        estimate = (log_scale / exponent).exp();
        power = power.matmul(&power);
        log_scale *= 2.0;
        exponent *= 2.0;
    }
    estimate
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(n: usize, rng: &mut ChaCha8Rng) -> CMatrix {
        let g = CMatrix::from_fn(n, n, |_, _| {
            Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        (&g + &g.adjoint()).scaled(0.5)
    }

    #[test]
    fn hermitian_eigen_reconstructs_and_is_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in 1..9 {
            let h = random_hermitian(n, &mut rng);
            let eig = hermitian_eigen(&h).unwrap();
            assert!((&eig.reconstruct() - &h).max_abs() < 1e-12);
            let gram = eig.vectors.adjoint().matmul(&eig.vectors);
            assert!((&gram - &CMatrix::identity(n)).max_abs() < 1e-12);
            assert!(eig.values.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn real_symmetric_eigen() {
        let m = RMatrix::from_vec(2, 2, vec![2.0, 1.0, 1.0, 2.0]).unwrap();
        let eig = hermitian_eigen(&m).unwrap();
        assert_abs_diff_eq!(eig.values[0], 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(eig.values[1], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn diagonal_input_keeps_unit_vectors() {
        let m = RMatrix::diag(&[1.0, 3.0]);
        let eig = hermitian_eigen(&m).unwrap();
        assert_eq!(eig.values, vec![3.0, 1.0]);
        assert_eq!(eig.vector(0), vec![0.0, 1.0]);
    }

    #[test]
    fn lu_inverse_complex() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = CMatrix::from_fn(6, 6, |i, j| {
            Complex64::new(rng.random::<f64>(), rng.random::<f64>())
                + if i == j { Complex64::new(3.0, 0.0) } else { Complex64::new(0.0, 0.0) }
        });
        let inv = inverse(&m).unwrap();
        assert!((&m.matmul(&inv) - &CMatrix::identity(6)).max_abs() < 1e-12);
    }

    #[test]
    fn singular_matrix_detected() {
        let m = RMatrix::from_vec(2, 2, vec![1.0, 2.0, 2.0, 4.0]).unwrap();
        assert_eq!(inverse(&m).unwrap_err(), Error::Singular);
    }

    #[test]
    fn spectral_radius_matches_eigenvalues() {
        // upper triangular, eigenvalues 0.5 and -0.9
        let m = RMatrix::from_vec(2, 2, vec![0.5, 10.0, 0.0, -0.9]).unwrap();
        assert_abs_diff_eq!(spectral_radius(&m), 0.9, epsilon = 1e-6);
        assert!(spectral_norm(&m).unwrap() > 10.0);
        assert_eq!(spectral_radius(&RMatrix::zeros(3, 3)), 0.0);
    }
}
