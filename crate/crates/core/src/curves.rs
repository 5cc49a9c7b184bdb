//! Panels of curves and matrices of two-argument kernels, all held as
//! coefficients in a shared orthonormal basis.
//!
//! Because the basis is orthonormal, the L² norm of a curve is the
//! Euclidean norm of its coefficients and the Hilbert–Schmidt norm of a
//! kernel is the Frobenius norm of its coefficient matrix.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::basis::BasisSpec;
use crate::linalg::{Matrix, RMatrix, Scalar};
use crate::{Error, Result};

/// `n × p` curves stored as an `n × p × r` coefficient array (row-major,
/// basis index fastest).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FunctionalPanel {
    n: usize,
    p: usize,
    basis: BasisSpec,
    coeffs: Vec<f64>,
}

impl FunctionalPanel {
    pub fn new(n: usize, p: usize, basis: BasisSpec, coeffs: Vec<f64>) -> Result<Self> {
        let r = basis.r();
        if n == 0 || p == 0 {
            return Err(Error::Dimension(format!("panel must be nonempty, got n={n}, p={p}")));
        }
        if coeffs.len() != n * p * r {
            return Err(Error::Dimension(format!(
                "{} coefficients for n={n}, p={p}, r={r}",
                coeffs.len()
            )));
        }
        Ok(Self { n, p, basis, coeffs })
    }

    pub fn zeros(n: usize, p: usize, basis: BasisSpec) -> Self {
        let len = n * p * basis.r();
        Self { n, p, basis, coeffs: vec![0.0; len] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn r(&self) -> usize {
        self.basis.r()
    }

    pub fn basis(&self) -> &BasisSpec {
        &self.basis
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    /// Coefficients of `X_t`, a `p × r` slice.
    pub fn slice(&self, t: usize) -> &[f64] {
        let w = self.p * self.r();
        &self.coeffs[t * w..(t + 1) * w]
    }

    /// Coefficients of curve `X_tj`.
    pub fn curve(&self, t: usize, j: usize) -> &[f64] {
        let r = self.r();
        let start = (t * self.p + j) * r;
        &self.coeffs[start..start + r]
    }

    pub fn curve_mut(&mut self, t: usize, j: usize) -> &mut [f64] {
        let r = self.r();
        let start = (t * self.p + j) * r;
        &mut self.coeffs[start..start + r]
    }

    pub fn eval(&self, t: usize, j: usize, u: f64) -> f64 {
        self.basis.eval_curve(self.curve(t, j), u)
    }

    /// `‖X_tj‖_H`.
    pub fn curve_norm(&self, t: usize, j: usize) -> f64 {
        libm::sqrt(self.curve(t, j).iter().map(|c| c * c).sum::<f64>())
    }

    /// Consecutive time points `[start, end)` as a new panel.
    pub fn window(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.n {
            return Err(Error::Dimension(format!("window [{start}, {end}) of n={}", self.n)));
        }
        let w = self.p * self.r();
        Self::new(end - start, self.p, self.basis.clone(), self.coeffs[start * w..end * w].to_vec())
    }

    /// Panel with the sample mean curve of each variable subtracted.
    pub fn centered(&self) -> Self {
        let w = self.p * self.r();
        let mut mean = vec![0.0; w];
        for t in 0..self.n {
            for (m, x) in mean.iter_mut().zip(self.slice(t)) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= self.n as f64);
        let mut out = self.clone();
        for chunk in out.coeffs.chunks_mut(w) {
            for (x, m) in chunk.iter_mut().zip(&mean) {
                *x -= m;
            }
        }
        out
    }
}

/// `‖x‖_{H,∞} = max_j ‖x_j‖_H` for one time slice given as `p × r` coefficients.
pub fn norm_h_inf(slice: &[f64], r: usize) -> f64 {
    if r == 0 {
        return 0.0;
    }
    slice
        .chunks(r)
        .map(|c| libm::sqrt(c.iter().map(|x| x * x).sum::<f64>()))
        .fold(0.0, f64::max)
}

/// A two-argument kernel `K(u, v) = Σ_ab coeff[a][b] φ_a(u) φ_b(v)`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct KernelFn<T = Complex64> {
    pub coeff: Matrix<T>,
}

impl<T: Scalar> KernelFn<T> {
    pub fn new(coeff: Matrix<T>) -> Self {
        Self { coeff }
    }

    pub fn zeros(r: usize) -> Self {
        Self { coeff: Matrix::zeros(r, r) }
    }

    pub fn hs_norm(&self) -> f64 {
        self.coeff.frobenius_norm()
    }
}

impl KernelFn<f64> {
    /// Evaluate `K(u, v)` in the given basis.
    pub fn eval(&self, basis: &BasisSpec, u: f64, v: f64) -> f64 {
        let bu = basis.eval_all(u);
        let bv = basis.eval_all(v);
        let mut acc = 0.0;
        for (a, x) in bu.iter().enumerate() {
            for (b, y) in bv.iter().enumerate() {
                acc += self.coeff[(a, b)] * x * y;
            }
        }
        acc
    }
}

/// Hilbert–Schmidt norm of a kernel.
pub fn hs_norm<T: Scalar>(k: &KernelFn<T>) -> f64 {
    k.hs_norm()
}

/// A `p × p` matrix of kernels on an `r`-dimensional basis, stored as one
/// `pr × pr` coefficient matrix: entry `(j·r + a, k·r + b)` is coefficient
/// `(a, b)` of kernel `(j, k)`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct KernelMatrix<T = Complex64> {
    p: usize,
    r: usize,
    data: Matrix<T>,
}

pub type RealKernelMatrix = KernelMatrix<f64>;
pub type ComplexKernelMatrix = KernelMatrix<Complex64>;

impl<T: Scalar> KernelMatrix<T> {
    pub fn zeros(p: usize, r: usize) -> Self {
        Self { p, r, data: Matrix::zeros(p * r, p * r) }
    }

    pub fn from_block_matrix(p: usize, r: usize, data: Matrix<T>) -> Result<Self> {
        if data.rows() != p * r || data.cols() != p * r {
            return Err(Error::Dimension(format!(
                "{}x{} block matrix for p={p}, r={r}",
                data.rows(),
                data.cols()
            )));
        }
        Ok(Self { p, r, data })
    }

    pub fn from_blocks(p: usize, r: usize, mut f: impl FnMut(usize, usize) -> Matrix<T>) -> Self {
        let mut out = Self::zeros(p, r);
        for j in 0..p {
            for k in 0..p {
                let blk = f(j, k);
                out.set_block(j, k, &blk);
            }
        }
        out
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn r(&self) -> usize {
        self.r
    }

    /// The full `pr × pr` coefficient matrix.
    pub fn as_matrix(&self) -> &Matrix<T> {
        &self.data
    }

    pub fn into_matrix(self) -> Matrix<T> {
        self.data
    }

    /// Coefficient `(a, b)` of kernel `(j, k)`.
    #[inline]
    pub fn get(&self, j: usize, k: usize, a: usize, b: usize) -> T {
        self.data[(j * self.r + a, k * self.r + b)]
    }

    #[inline]
    pub fn set(&mut self, j: usize, k: usize, a: usize, b: usize, v: T) {
        self.data[(j * self.r + a, k * self.r + b)] = v;
    }

    pub fn block(&self, j: usize, k: usize) -> Matrix<T> {
        Matrix::from_fn(self.r, self.r, |a, b| self.get(j, k, a, b))
    }

    pub fn entry(&self, j: usize, k: usize) -> KernelFn<T> {
        KernelFn::new(self.block(j, k))
    }

    pub fn set_block(&mut self, j: usize, k: usize, blk: &Matrix<T>) {
        assert_eq!((blk.rows(), blk.cols()), (self.r, self.r), "block shape");
        for a in 0..self.r {
            for b in 0..self.r {
                self.set(j, k, a, b, blk[(a, b)]);
            }
        }
    }

    /// Multiply every coefficient of kernel `(j, k)` by `s`.
    pub fn scale_block(&mut self, j: usize, k: usize, s: f64) {
        for a in 0..self.r {
            for b in 0..self.r {
                let v = self.get(j, k, a, b);
                self.set(j, k, a, b, v.scale(s));
            }
        }
    }

    /// Hilbert–Schmidt norm of kernel `(j, k)`.
    pub fn block_norm(&self, j: usize, k: usize) -> f64 {
        let mut acc = 0.0;
        for a in 0..self.r {
            for b in 0..self.r {
                acc += self.get(j, k, a, b).abs_sqr();
            }
        }
        libm::sqrt(acc)
    }

    /// `p × p` matrix of entry norms `‖M_jk‖_S`.
    pub fn entry_norms(&self) -> RMatrix {
        RMatrix::from_fn(self.p, self.p, |j, k| self.block_norm(j, k))
    }

    /// Transpose across both the variable pair and the kernel arguments:
    /// kernel `(j, k)` of the result is `M_kj(v, u)`.
    pub fn transpose(&self) -> Self {
        Self { p: self.p, r: self.r, data: self.data.transpose() }
    }

    /// Conjugate transpose, the kernel-matrix adjoint.
    pub fn adjoint(&self) -> Self {
        Self { p: self.p, r: self.r, data: self.data.adjoint() }
    }

    pub fn conj(&self) -> Self {
        Self { p: self.p, r: self.r, data: self.data.conj() }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { p: self.p, r: self.r, data: self.data.scaled(s) }
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_shape(other)?;
        Ok(Self { p: self.p, r: self.r, data: &self.data - &other.data })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_shape(other)?;
        Ok(Self { p: self.p, r: self.r, data: &self.data + &other.data })
    }

    fn check_shape(&self, other: &Self) -> Result<()> {
        if self.p != other.p || self.r != other.r {
            return Err(Error::Dimension(format!(
                "kernel matrices of shape (p={}, r={}) and (p={}, r={})",
                self.p, self.r, other.p, other.r
            )));
        }
        Ok(())
    }

    pub fn norm_s_max(&self) -> f64 {
        composite_norm_s_max(self)
    }

    pub fn norm_s_1(&self) -> f64 {
        composite_norm_s_1(self)
    }
}

impl RealKernelMatrix {
    pub fn to_complex(&self) -> ComplexKernelMatrix {
        KernelMatrix { p: self.p, r: self.r, data: self.data.to_complex() }
    }
}

/// `max_{j,k} ‖M_jk‖_S`.
pub fn composite_norm_s_max<T: Scalar>(m: &KernelMatrix<T>) -> f64 {
    let mut best: f64 = 0.0;
    for j in 0..m.p {
        for k in 0..m.p {
            best = best.max(m.block_norm(j, k));
        }
    }
    best
}

/// `max_k Σ_j ‖M_jk‖_S`.
pub fn composite_norm_s_1<T: Scalar>(m: &KernelMatrix<T>) -> f64 {
    (0..m.p)
        .map(|k| (0..m.p).map(|j| m.block_norm(j, k)).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Real coefficient matrix of a kernel given by its values on a grid,
/// `coeff[a][b] = Σ_ik w_i w_k K(u_i, u_k) φ_a(u_i) φ_b(u_k)`.
pub fn project_kernel(
    basis: &BasisSpec,
    nodes: &[f64],
    weights: &[f64],
    k: impl Fn(f64, f64) -> f64,
) -> RMatrix {
    let d = basis.design(nodes);
    let r = basis.r();
    let mut out = RMatrix::zeros(r, r);
    for (i, &u) in nodes.iter().enumerate() {
        for (l, &v) in nodes.iter().enumerate() {
            let kv = weights[i] * weights[l] * k(u, v);
            for a in 0..r {
                for b in 0..r {
                    out[(a, b)] += kv * d[(i, a)] * d[(l, b)];
                }
            }
        }
    }
    out
}

/// Hilbert–Schmidt norm by trapezoid quadrature of `∬|K(u,v)|²` on `g × g` nodes.
pub fn hs_norm_quadrature(k: impl Fn(f64, f64) -> f64, g: usize) -> f64 {
    let nodes = crate::basis::uniform_grid(g);
    let w = crate::basis::trapezoid_weights(g);
    let mut acc = 0.0;
    for (i, &u) in nodes.iter().enumerate() {
        for (l, &v) in nodes.iter().enumerate() {
            let kv = k(u, v);
            acc += w[i] * w[l] * kv * kv;
        }
    }
    libm::sqrt(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_kernel(r: usize, rng: &mut ChaCha8Rng) -> KernelFn<f64> {
        KernelFn::new(RMatrix::from_fn(r, r, |_, _| rng.random::<f64>() * 2.0 - 1.0))
    }

    #[test]
    fn hs_norm_trivial_cases() {
        assert_eq!(hs_norm(&KernelFn::<f64>::zeros(3)), 0.0);
        assert_abs_diff_eq!(
            hs_norm(&KernelFn::new(RMatrix::identity(2))),
            2f64.sqrt(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn hs_norm_matches_grid_quadrature() {
        let basis = BasisSpec::fourier(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let k = random_kernel(3, &mut rng);
        let quad = hs_norm_quadrature(|u, v| k.eval(&basis, u, v), 201);
        assert_abs_diff_eq!(k.hs_norm(), quad, epsilon = 1e-6);
    }

    #[test]
    fn composite_norms() {
        let mut m = RealKernelMatrix::zeros(2, 2);
        assert_eq!(m.norm_s_max(), 0.0);
        m.set(1, 0, 0, 1, 3.5);
        assert_eq!(m.norm_s_max(), 3.5);

        let id = RealKernelMatrix::from_blocks(4, 1, |j, k| {
            RMatrix::from_fn(1, 1, |_, _| if j == k { 1.0 } else { 0.0 })
        });
        assert_eq!(id.norm_s_1(), 1.0);

        let col = RealKernelMatrix::from_blocks(3, 1, |_, k| {
            RMatrix::from_fn(1, 1, |_, _| if k == 2 { 2.0 } else { 0.0 })
        });
        assert_eq!(col.norm_s_1(), 6.0);
    }

    #[test]
    fn composite_norms_match_per_entry_loops() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for p in [2, 3] {
            let blocks: Vec<KernelFn<f64>> = (0..p * p).map(|_| random_kernel(3, &mut rng)).collect();
            let m = RealKernelMatrix::from_blocks(p, 3, |j, k| blocks[j * p + k].coeff.clone());
            let mut max = 0.0f64;
            let mut cols = vec![0.0; p];
            for j in 0..p {
                for k in 0..p {
                    let nrm = blocks[j * p + k].hs_norm();
                    max = max.max(nrm);
                    cols[k] += nrm;
                }
            }
            assert_eq!(m.norm_s_max(), max);
            assert_eq!(m.norm_s_1(), cols.iter().cloned().fold(0.0, f64::max));
        }
    }

    #[test]
    fn norm_h_inf_cases() {
        assert_eq!(norm_h_inf(&[0.0; 8], 4), 0.0);
        assert_eq!(norm_h_inf(&[3.0, 4.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0], 4), 5.0);
    }

    #[test]
    fn panel_curve_norm_is_coefficient_norm() {
        let basis = BasisSpec::fourier4();
        let panel = FunctionalPanel::new(1, 1, basis.clone(), vec![1.0, 2.0, -0.5, 0.25]).unwrap();
        let quad = {
            let g = 2001;
            let nodes = crate::basis::uniform_grid(g);
            let w = crate::basis::trapezoid_weights(g);
            nodes.iter().zip(&w).map(|(&u, &w)| w * panel.eval(0, 0, u).powi(2)).sum::<f64>().sqrt()
        };
        assert_abs_diff_eq!(panel.curve_norm(0, 0), quad, epsilon = 1e-10);
    }

    #[test]
    fn transpose_swaps_entries_and_arguments() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let m = RealKernelMatrix::from_blocks(2, 3, |_, _| random_kernel(3, &mut rng).coeff);
        let t = m.transpose();
        assert_eq!(t.block(0, 1), m.block(1, 0).transpose());
    }

    proptest! {
        #[test]
        fn hs_norm_homogeneous_and_subadditive(
            a in proptest::collection::vec(-5.0f64..5.0, 9),
            b in proptest::collection::vec(-5.0f64..5.0, 9),
            s in -3.0f64..3.0,
        ) {
            let ka = KernelFn::new(RMatrix::from_vec(3, 3, a).unwrap());
            let kb = KernelFn::new(RMatrix::from_vec(3, 3, b).unwrap());
            let scaled = KernelFn::new(ka.coeff.scaled(s));
            prop_assert!((scaled.hs_norm() - s.abs() * ka.hs_norm()).abs() <= 1e-12 * (1.0 + ka.hs_norm()));
            let sum = KernelFn::new(&ka.coeff + &kb.coeff);
            prop_assert!(sum.hs_norm() <= ka.hs_norm() + kb.hs_norm() + 1e-12);
        }
    }
}
