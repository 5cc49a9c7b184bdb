use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use super::autocov::{AutocovSet, DiagonalAutocov};
use super::window::LagWindowKernel;
use crate::basis::BasisSpec;
use crate::curves::{ComplexKernelMatrix, RealKernelMatrix};
use crate::linalg::{CMatrix, RMatrix};
use crate::{Error, Result};

/// A spectral density estimate (or truth) on a frequency grid.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SpectralDensity {
    pub theta_grid: Vec<f64>,
    pub values: Vec<ComplexKernelMatrix>,
    /// Truncation lag, absent for population spectra.
    pub m0: Option<usize>,
    pub kernel: LagWindowKernel,
    pub basis: BasisSpec,
}

impl SpectralDensity {
    pub fn new(
        theta_grid: Vec<f64>,
        values: Vec<ComplexKernelMatrix>,
        m0: Option<usize>,
        kernel: LagWindowKernel,
        basis: BasisSpec,
    ) -> Result<Self> {
        if theta_grid.is_empty() || theta_grid.len() != values.len() {
            return Err(Error::Dimension("one spectral matrix per frequency required".into()));
        }
        let (p, r) = (values[0].p(), values[0].r());
        if r != basis.r() || values.iter().any(|v| v.p() != p || v.r() != r) {
            return Err(Error::Dimension("spectral matrices differ in shape".into()));
        }
        Ok(Self { theta_grid, values, m0, kernel, basis })
    }

    pub fn p(&self) -> usize {
        self.values[0].p()
    }

    pub fn r(&self) -> usize {
        self.values[0].r()
    }

    pub fn len(&self) -> usize {
        self.theta_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta_grid.is_empty()
    }

    /// `sup_θ ‖f_{θ,jk}‖_S` for every pair, as a `p × p` matrix.
    pub fn uniform_entry_norms(&self) -> RMatrix {
        let p = self.p();
        let mut out = RMatrix::zeros(p, p);
        for f in &self.values {
            for j in 0..p {
                for k in 0..p {
                    let v = f.block_norm(j, k);
                    if v > out[(j, k)] {
                        out[(j, k)] = v;
                    }
                }
            }
        }
        out
    }

    /// `sup_θ ‖f_θ‖_{S,max}`.
    pub fn sup_norm_s_max(&self) -> f64 {
        self.values.iter().map(|f| f.norm_s_max()).fold(0.0, f64::max)
    }

    pub fn same_grid(&self, other: &Self) -> bool {
        self.theta_grid.len() == other.theta_grid.len()
            && self.theta_grid.iter().zip(&other.theta_grid).all(|(a, b)| (a - b).abs() <= 1e-12)
    }

    /// `sup_θ ‖self_θ − other_θ‖_{S,max}` over a shared grid.
    pub fn max_error(&self, other: &Self) -> Result<f64> {
        if !self.same_grid(other) {
            return Err(Error::GridMismatch);
        }
        let mut worst: f64 = 0.0;
        for (a, b) in self.values.iter().zip(&other.values) {
            worst = worst.max(a.sub(b)?.norm_s_max());
        }
        Ok(worst)
    }
}

/// Default truncation lag `⌈ln n⌉`.
pub fn default_m0(n: usize) -> usize {
    libm::ceil(libm::log(n as f64)) as usize
}

/// Frequencies `πh/(4m₀)` for `h = 0..=8m₀`, covering `[0, 2π]`.
pub fn default_theta_grid(m0: usize) -> Vec<f64> {
    let m0 = m0.max(1);
    (0..=8 * m0).map(|h| PI * h as f64 / (4.0 * m0 as f64)).collect()
}

/// `k` equispaced frequencies `2πi/k` on `[0, 2π)`.
pub fn uniform_theta_grid(k: usize) -> Vec<f64> {
    (0..k).map(|i| 2.0 * PI * i as f64 / k as f64).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SpectralOptions {
    /// Permit `3m₀ ≥ n`.
    pub allow_large_m0: bool,
}

/// Lag-window estimator
/// `f̂_θ = (2π)^{-1} Σ_{|h|≤m₀} K(h/m₀) Σ̂^(h) e^{−ihθ}` on the given grid.
pub fn lag_window_spectral(
    acov: &AutocovSet,
    kernel: LagWindowKernel,
    m0: usize,
    theta_grid: &[f64],
) -> Result<SpectralDensity> {
    lag_window_spectral_with(acov, kernel, m0, theta_grid, &SpectralOptions::default())
}

pub fn lag_window_spectral_with(
    acov: &AutocovSet,
    kernel: LagWindowKernel,
    m0: usize,
    theta_grid: &[f64],
    opts: &SpectralOptions,
) -> Result<SpectralDensity> {
    if let Some(n) = acov.n {
        if !opts.allow_large_m0 && 3 * m0 >= n {
            return Err(Error::LagOutOfRegime { lag: m0, n, rule: "m0 < n/3" });
        }
    }
    spectral_from_autocov(acov, kernel, m0, theta_grid)
}

/// The lag-window sum without regime checks, also used for population
/// autocovariances.
pub fn spectral_from_autocov(
    acov: &AutocovSet,
    kernel: LagWindowKernel,
    m0: usize,
    theta_grid: &[f64],
) -> Result<SpectralDensity> {
    if acov.max_lag() < m0 {
        return Err(Error::MissingLag(m0));
    }
    if theta_grid.is_empty() {
        return Err(Error::EmptyRange("frequency grid".into()));
    }
    let eval = SpectralEvaluator::new(acov, kernel, m0)?;
    let values = theta_grid.iter().map(|&theta| eval.at(theta)).collect();
    SpectralDensity::new(theta_grid.to_vec(), values, Some(m0), kernel, acov.basis.clone())
}

/// The lag-window sum evaluated one frequency at a time, for callers that
/// do not want to hold the whole grid in memory.
pub struct SpectralEvaluator {
    p: usize,
    r: usize,
    terms: Vec<Term>,
}

impl SpectralEvaluator {
    pub fn new(acov: &AutocovSet, kernel: LagWindowKernel, m0: usize) -> Result<Self> {
        if acov.max_lag() < m0 {
            return Err(Error::MissingLag(m0));
        }
        Ok(Self { p: acov.p(), r: acov.r(), terms: weighted_terms(acov.lags(), kernel, m0) })
    }

    pub fn at(&self, theta: f64) -> ComplexKernelMatrix {
        ComplexKernelMatrix::from_block_matrix(self.p, self.r, combine(&self.terms, theta)).expect("shape fixed by autocov")
    }
}

/// Per-lag `(h, w_h (S + Sᵀ), w_h (S − Sᵀ))` with the lag-0 term halved so
/// that `f = (2π)^{-1} Σ_h [cos(hθ) sym_h − i sin(hθ) anti_h]`.
struct Term {
    h: usize,
    sym: RMatrix,
    anti: RMatrix,
}

fn weighted_terms(lags: &[RealKernelMatrix], kernel: LagWindowKernel, m0: usize) -> Vec<Term> {
    (0..=m0)
        .filter_map(|h| {
            let w = kernel.lag_weight(h, m0);
            if w == 0.0 {
                return None;
            }
            let s = lags[h].as_matrix();
            let st = s.transpose();
            if h == 0 {
                return Some(Term { h, sym: s.scaled(w), anti: RMatrix::zeros(s.rows(), s.cols()) });
            }
            Some(Term { h, sym: (s + &st).scaled(w), anti: (s - &st).scaled(w) })
        })
        .collect()
}

fn combine(terms: &[Term], theta: f64) -> CMatrix {
    let dim = terms.first().map_or(0, |t| t.sym.rows());
    let mut out = CMatrix::zeros(dim, dim);
    let norm = 1.0 / (2.0 * PI);
    for term in terms {
        let c = libm::cos(term.h as f64 * theta) * norm;
        let s = -libm::sin(term.h as f64 * theta) * norm;
        for ((o, &a), &b) in out.as_mut_slice().iter_mut().zip(term.sym.as_slice()).zip(term.anti.as_slice()) {
            *o += Complex64::new(c * a, s * b);
        }
    }
    out
}

/// Diagonal spectral kernels `f_{θ,jj}`, `blocks[i][j]` at `theta_grid[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalSpectral {
    pub theta_grid: Vec<f64>,
    pub blocks: Vec<Vec<CMatrix>>,
}

/// Lag-window estimator restricted to the diagonal kernels.
pub fn lag_window_diagonal(
    acov: &DiagonalAutocov,
    kernel: LagWindowKernel,
    m0: usize,
    theta_grid: &[f64],
) -> Result<DiagonalSpectral> {
    if acov.max_lag() < m0 {
        return Err(Error::MissingLag(m0));
    }
    let p = acov.p();
    let per_var: Vec<Vec<Term>> = (0..p)
        .map(|j| {
            let lags: Vec<RealKernelMatrix> = (0..=m0)
                .map(|h| {
                    let r = acov.blocks[h][j].rows();
                    RealKernelMatrix::from_block_matrix(1, r, acov.blocks[h][j].clone()).expect("r x r")
                })
                .collect();
            weighted_terms(&lags, kernel, m0)
        })
        .collect();
    let blocks = theta_grid
        .iter()
        .map(|&theta| per_var.iter().map(|terms| combine(terms, theta)).collect())
        .collect();
    Ok(DiagonalSpectral { theta_grid: theta_grid.to_vec(), blocks })
}

/// Read access to the diagonal kernels of a spectral density.
pub trait DiagonalBlocks {
    fn theta_grid(&self) -> &[f64];
    fn p(&self) -> usize;
    fn diag_block(&self, theta_index: usize, j: usize) -> CMatrix;
}

impl DiagonalBlocks for SpectralDensity {
    fn theta_grid(&self) -> &[f64] {
        &self.theta_grid
    }
    fn p(&self) -> usize {
        SpectralDensity::p(self)
    }
    fn diag_block(&self, theta_index: usize, j: usize) -> CMatrix {
        self.values[theta_index].block(j, j)
    }
}

impl DiagonalBlocks for DiagonalSpectral {
    fn theta_grid(&self) -> &[f64] {
        &self.theta_grid
    }
    fn p(&self) -> usize {
        self.blocks.first().map_or(0, Vec::len)
    }
    fn diag_block(&self, theta_index: usize, j: usize) -> CMatrix {
        self.blocks[theta_index][j].clone()
    }
}

/// Combined truncation and smoothing error of a lag window against a
/// population autocovariance.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TruncationError {
    /// `max_{j,k} [Σ_{m₀<|h|≤H} ‖Σ^(h)_jk‖_S + Σ_{|h|≤m₀} (1−K(h/m₀)) ‖Σ^(h)_jk‖_S]`.
    pub value: f64,
    /// Geometric extrapolation of the omitted lags beyond `H`; infinite when
    /// the last stored norms do not decay.
    pub tail_remainder: f64,
}

pub fn truncation_error_r(
    true_acov: &AutocovSet,
    kernel: LagWindowKernel,
    m0: usize,
    h_tail: usize,
) -> Result<TruncationError> {
    if true_acov.max_lag() < h_tail {
        return Err(Error::MissingLag(h_tail));
    }
    let p = true_acov.p();
    let mut per_entry = RMatrix::zeros(p, p);
    for h in 0..=h_tail {
        let weight = if h <= m0 { 1.0 - kernel.lag_weight(h, m0) } else { 1.0 };
        if weight == 0.0 {
            continue;
        }
        let norms = true_acov.lag(h)?.entry_norms();
        for j in 0..p {
            for k in 0..p {
                // lags h and −h; ‖Σ^(−h)_jk‖ = ‖Σ^(h)_kj‖
                let both = if h == 0 { norms[(j, k)] } else { norms[(j, k)] + norms[(k, j)] };
                per_entry[(j, k)] += weight * both;
            }
        }
    }
    let value = per_entry.max_abs();

    let tail_remainder = if h_tail == 0 {
        0.0
    } else {
        let last = true_acov.lag(h_tail)?.norm_s_max();
        let prev = true_acov.lag(h_tail - 1)?.norm_s_max();
        if last == 0.0 {
            0.0
        } else if prev > 0.0 && last < prev {
            let q = last / prev;
            2.0 * last * q / (1.0 - q)
        } else {
            f64::INFINITY
        }
    };
    Ok(TruncationError { value, tail_remainder })
}
