//! Dynamic functional principal components.
//!
//! For each variable `j` and frequency `θ` the diagonal spectral kernel
//! `f_{θ,jj}` is decomposed into eigenvalues `λ_jm(θ)` and eigenfunctions
//! `φ_jm(·; θ)`. After fixing a phase that varies smoothly in `θ`, the
//! eigenfunctions are expanded in a Fourier series in `θ`; the coefficients
//! are time-domain filters whose convolution with the series gives the
//! dynamic scores `ζ_tjm`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::curves::FunctionalPanel;
use crate::error::config;
use crate::linalg::hermitian_eigen;
use crate::secondorder::{
    default_m0, lag_window_diagonal, sample_autocov_diagonal, uniform_theta_grid, AutocovOptions,
    DiagonalBlocks, LagWindowKernel,
};
use crate::{Error, Result};

/// Largest tolerated deviation from Hermitian symmetry.
pub const HERMITIAN_TOL: f64 = 1e-8;
/// Inner products smaller than this leave the phase untouched during alignment.
pub const PHASE_SKIP_TOL: f64 = 1e-10;
/// Gaps below this are flagged as degenerate.
pub const GAP_FLAG_TOL: f64 = 1e-6;
/// Default number of frequencies for the filter integrals.
pub const DEFAULT_FILTER_GRID: usize = 512;
/// Default number of components per variable.
pub const DEFAULT_COMPONENTS: usize = 4;

/// Default filter truncation `⌈n^{1/4}⌉`.
pub fn default_filter_lag(n: usize) -> usize {
    libm::ceil(libm::pow(n as f64, 0.25)) as usize
}

/// Per-frequency eigendecomposition of the diagonal spectral kernels.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FrequencyEigen {
    pub theta_grid: Vec<f64>,
    /// Number of eigenfunctions kept.
    pub components: usize,
    /// `values[i][j]`: all `r` eigenvalues at `theta_grid[i]` for variable
    /// `j`, descending, negatives clipped to zero.
    pub values: Vec<Vec<Vec<f64>>>,
    /// `vectors[i][j][m]`: unit coefficient vector of `φ_jm(·; θ_i)`.
    pub vectors: Vec<Vec<Vec<Vec<Complex64>>>>,
    /// Most negative eigenvalue seen before clipping (0 if none).
    pub min_raw_eigenvalue: f64,
}

impl FrequencyEigen {
    pub fn p(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    /// Sequence over the grid of eigenvectors `(j, m)`.
    pub fn path(&self, j: usize, m: usize) -> Vec<Vec<Complex64>> {
        self.vectors.iter().map(|at| at[j][m].clone()).collect()
    }

    fn set_path(&mut self, j: usize, m: usize, path: Vec<Vec<Complex64>>) {
        for (at, v) in self.vectors.iter_mut().zip(path) {
            at[j][m] = v;
        }
    }

    /// Fix the phase of every `(j, m)` path: [`align_phase_conjugate`] on
    /// a uniform grid over `[0, 2π)`, [`align_phase`] otherwise.
    pub fn align(&mut self) {
        let periodic = is_uniform_periodic(&self.theta_grid);
        for j in 0..self.p() {
            for m in 0..self.components {
                let mut path = self.path(j, m);
                if periodic {
                    align_phase_conjugate(&mut path);
                } else {
                    align_phase(&mut path);
                }
                self.set_path(j, m, path);
            }
        }
    }
}

/// Eigenpairs of every diagonal kernel on the spectral grid.
pub fn eigendecompose_diagonals(spec: &dyn DiagonalBlocks, components: usize) -> Result<FrequencyEigen> {
    let grid = spec.theta_grid().to_vec();
    let p = spec.p();
    let mut values = Vec::with_capacity(grid.len());
    let mut vectors = Vec::with_capacity(grid.len());
    let mut min_raw: f64 = 0.0;
    for i in 0..grid.len() {
        let mut vals_i = Vec::with_capacity(p);
        let mut vecs_i = Vec::with_capacity(p);
        for j in 0..p {
            let block = spec.diag_block(i, j);
            let r = block.rows();
            if components > r {
                return Err(config(format!("{components} components requested from an {r}-dimensional basis")));
            }
            let dev = block.hermitian_deviation();
            if dev > HERMITIAN_TOL * block.max_abs().max(1.0) {
                return Err(Error::NotHermitian(dev));
            }
            let eig = hermitian_eigen(&block)?;
            min_raw = min_raw.min(*eig.values.last().unwrap_or(&0.0));
            vals_i.push(eig.values.iter().map(|&v| v.max(0.0)).collect());
            vecs_i.push((0..components).map(|m| eig.vector(m)).collect());
        }
        values.push(vals_i);
        vectors.push(vecs_i);
    }
    Ok(FrequencyEigen { theta_grid: grid, components, values, vectors, min_raw_eigenvalue: min_raw })
}

/// `⟨x, y⟩ = Σ x_a conj(y_a)`.
pub fn inner(x: &[Complex64], y: &[Complex64]) -> Complex64 {
    x.iter().zip(y).map(|(a, b)| a * b.conj()).sum()
}

fn rotate(v: &mut [Complex64], phase: Complex64) {
    v.iter_mut().for_each(|z| *z *= phase);
}

/// Canonical phase along a frequency path: the first vector gets its
/// largest-magnitude coefficient real and positive, and each later vector
/// is rotated so that its inner product with the previous one is real and
/// nonnegative. Near-orthogonal neighbours (|⟨·,·⟩| < 1e-10) keep their phase.
pub fn align_phase(path: &mut [Vec<Complex64>]) {
    let Some(first) = path.first_mut() else { return };
    if let Some(big) = first
        .iter()
        .copied()
        .max_by(|a, b| a.norm_sqr().total_cmp(&b.norm_sqr()))
        .filter(|z| z.norm() > 0.0)
    {
        rotate(first, big.conj() / big.norm());
    }
    for k in 1..path.len() {
        let ip = inner(&path[k - 1], &path[k]);
        let mag = ip.norm();
        if mag < PHASE_SKIP_TOL {
            continue;
        }
        // multiply by ip/|ip| so that ⟨prev, new⟩ = conj(ip/|ip|)·ip = |ip|
        rotate(&mut path[k], ip / mag);
    }
}

/// Phase choice for a path on the uniform grid `θ_i = 2πi/K` of a real
/// process, where `f_{2π−θ} = conj(f_θ)`. The half `θ ∈ [0, π]` is aligned
/// with [`align_phase`] and the other half is set to `φ(2π − θ) = conj(φ(θ))`,
/// which makes the filter coefficients real.
pub fn align_phase_conjugate(path: &mut [Vec<Complex64>]) {
    let k = path.len();
    if k < 2 {
        align_phase(path);
        return;
    }
    let half = k / 2;
    align_phase(&mut path[..=half]);
    if k.is_multiple_of(2) {
        // f_π is real: rotate φ(π) to be as real as possible, keeping the
        // sign closest to its neighbour
        let s: Complex64 = path[half].iter().map(|z| z * z).sum();
        if s.norm() > PHASE_SKIP_TOL {
            let mut w = Complex64::from_polar(1.0, -0.5 * s.arg());
            if (inner(&path[half - 1], &path[half]) * w.conj()).re < 0.0 {
                w = -w;
            }
            rotate(&mut path[half], w);
        }
    }
    for i in 1..k - half {
        let mirrored: Vec<Complex64> = path[i].iter().map(|z| z.conj()).collect();
        path[k - i] = mirrored;
    }
}

/// True when `grid[i] = 2πi/K` for `K = grid.len()`.
fn is_uniform_periodic(grid: &[f64]) -> bool {
    let k = grid.len() as f64;
    grid.iter().enumerate().all(|(i, &t)| (t - 2.0 * PI * i as f64 / k).abs() <= 1e-9)
}

/// Fourier coefficients `φ_l = (1/K) Σ_k φ(θ_k) e^{−ilθ_k}` for `|l| ≤ L`,
/// returned in the order `l = −L, …, L`. With `real` set, each coefficient
/// is replaced by its real part, the coefficient of `(φ(θ) + conj φ(−θ))/2`;
/// real filters give real scores.
pub fn filter_coefficients(
    path: &[Vec<Complex64>],
    theta_grid: &[f64],
    filter_lag: usize,
    real: bool,
) -> Result<Vec<Vec<Complex64>>> {
    let k = theta_grid.len();
    if path.len() != k {
        return Err(Error::Dimension("one eigenvector per frequency required".into()));
    }
    if !is_uniform_periodic(theta_grid) {
        return Err(config("filter integrals need the uniform grid 2πi/K on [0, 2π)"));
    }
    if k < 4 * filter_lag || k == 0 {
        return Err(config(format!("{k} frequencies are too coarse for filter lag {filter_lag} (need ≥ 4L)")));
    }
    let r = path[0].len();
    let l_max = filter_lag as isize;
    let mut out: Vec<Vec<Complex64>> = (-l_max..=l_max)
        .map(|l| {
            let mut acc = vec![Complex64::new(0.0, 0.0); r];
            for (v, &theta) in path.iter().zip(theta_grid) {
                let e = Complex64::from_polar(1.0 / k as f64, -(l as f64) * theta);
                for (a, z) in acc.iter_mut().zip(v) {
                    *a += z * e;
                }
            }
            acc
        })
        .collect();
    if real {
        for z in out.iter_mut().flatten() {
            z.im = 0.0;
        }
    }
    Ok(out)
}

/// Filters `[j][m][l + L]` for every variable and component of an aligned
/// eigendecomposition.
pub fn all_filters(eig: &FrequencyEigen, filter_lag: usize) -> Result<Vec<Vec<Vec<Vec<Complex64>>>>> {
    (0..eig.p())
        .map(|j| {
            (0..eig.components)
                .map(|m| filter_coefficients(&eig.path(j, m), &eig.theta_grid, filter_lag, true))
                .collect()
        })
        .collect()
}

/// Estimated dynamic scores for `t = L, …, n − L − 1` (zero-based).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Scores {
    pub filter_lag: usize,
    pub p: usize,
    pub components: usize,
    /// `values[(s·p + j)·M + m]` for `s = t − L`.
    pub values: Vec<f64>,
    /// Largest discarded imaginary part.
    pub max_imag: f64,
}

impl Scores {
    pub fn len(&self) -> usize {
        self.values.len() / (self.p * self.components).max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn get(&self, s: usize, j: usize, m: usize) -> f64 {
        self.values[(s * self.p + j) * self.components + m]
    }
}

/// `ζ_tjm = Σ_{|l|≤L} ⟨X_{t−l,j}, φ_jml⟩`, keeping the real part.
pub fn estimate_scores(
    panel: &FunctionalPanel,
    filters: &[Vec<Vec<Vec<Complex64>>>],
    filter_lag: usize,
) -> Result<Scores> {
    let n = panel.n();
    let p = panel.p();
    if filters.len() != p {
        return Err(Error::Dimension(format!("filters for {} variables, panel has {p}", filters.len())));
    }
    let components = filters.first().map_or(0, Vec::len);
    if n < 2 * filter_lag + 1 {
        return Err(Error::EmptyRange(format!("no score times for n={n}, L={filter_lag}")));
    }
    let len = n - 2 * filter_lag;
    let mut values = Vec::with_capacity(len * p * components);
    let mut max_imag: f64 = 0.0;
    for s in 0..len {
        let t = s + filter_lag;
        for (j, per_var) in filters.iter().enumerate() {
            for taps in per_var {
                let mut acc = Complex64::new(0.0, 0.0);
                for (idx, phi) in taps.iter().enumerate() {
                    // idx = l + L, lagged time t − l
                    let lagged = t + filter_lag - idx;
                    let x = panel.curve(lagged, j);
                    for (a, z) in x.iter().zip(phi) {
                        acc += *a * z.conj();
                    }
                }
                max_imag = max_imag.max(acc.im.abs());
                values.push(acc.re);
            }
        }
    }
    Ok(Scores { filter_lag, p, components, values, max_imag })
}

/// Lag-`h` score autocovariances `σ̂^(h)_jkml`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScoreAutocov {
    pub h: usize,
    pub p: usize,
    pub components: usize,
    /// Index `((j·p + k)·M + m)·M + l`.
    pub values: Vec<f64>,
}

impl ScoreAutocov {
    #[inline]
    pub fn get(&self, j: usize, k: usize, m: usize, l: usize) -> f64 {
        self.values[((j * self.p + k) * self.components + m) * self.components + l]
    }
}

/// `σ̂^(h)_jkml = (N − h)^{-1} Σ_s ζ_{s,j,m} ζ_{s+h,k,l}` over the `N = n − 2L`
/// available scores.
pub fn score_autocov(scores: &Scores, h: usize) -> Result<ScoreAutocov> {
    let big_n = scores.len();
    if big_n <= h {
        return Err(Error::EmptyRange(format!("{big_n} scores leave nothing at lag {h}")));
    }
    let (p, mm) = (scores.p, scores.components);
    let mut values = vec![0.0; p * p * mm * mm];
    for s in 0..big_n - h {
        for j in 0..p {
            for m in 0..mm {
                let a = scores.get(s, j, m);
                for k in 0..p {
                    for l in 0..mm {
                        values[((j * p + k) * mm + m) * mm + l] += a * scores.get(s + h, k, l);
                    }
                }
            }
        }
    }
    let scale = 1.0 / (big_n - h) as f64;
    values.iter_mut().for_each(|v| *v *= scale);
    Ok(ScoreAutocov { h, p, components: mm, values })
}

/// Lower bounds on the eigengaps.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EigengapReport {
    /// `δ_m^{-1} = inf_{θ, j} α_jm(θ)` for `m = 1..=M`.
    pub gap_lower_bound: Vec<f64>,
    /// `δ_m`, infinite for a zero gap.
    pub delta: Vec<f64>,
    /// Gap below 1e-6.
    pub degenerate: Vec<bool>,
}

/// `α_jm(θ)` is the smaller of the distances from `λ_jm` to its neighbours
/// `λ_j(m−1)` and `λ_j(m+1)`, with `λ_j(r+1) = 0` below the last eigenvalue.
pub fn eigengap_report(values: &[Vec<Vec<f64>>], components: usize) -> EigengapReport {
    let mut lower = vec![f64::INFINITY; components];
    for at in values {
        for lams in at {
            for m in 0..components.min(lams.len()) {
                let below = lams.get(m + 1).copied().unwrap_or(0.0);
                let mut gap = (lams[m] - below).abs();
                if m > 0 {
                    gap = gap.min((lams[m - 1] - lams[m]).abs());
                }
                lower[m] = lower[m].min(gap);
            }
        }
    }
    let delta = lower.iter().map(|&g| if g > 0.0 { 1.0 / g } else { f64::INFINITY }).collect();
    let degenerate = lower.iter().map(|&g| g < GAP_FLAG_TOL).collect();
    EigengapReport { gap_lower_bound: lower, delta, degenerate }
}

/// `MaxErr(λ̂)` and `MaxErr(φ̂)` against a reference decomposition on the
/// same grid. Each true eigenvector is rotated towards its estimate before
/// the difference is taken, and eigenvector errors are divided by `δ_m`.
pub fn eigen_errors(est: &FrequencyEigen, truth: &FrequencyEigen, delta: &[f64]) -> Result<(f64, f64)> {
    if est.theta_grid.len() != truth.theta_grid.len()
        || est.theta_grid.iter().zip(&truth.theta_grid).any(|(a, b)| (a - b).abs() > 1e-12)
    {
        return Err(Error::GridMismatch);
    }
    let components = est.components.min(truth.components);
    if delta.len() < components {
        return Err(Error::Dimension("one eigengap per component required".into()));
    }
    let mut lam_err: f64 = 0.0;
    let mut vec_err: f64 = 0.0;
    for i in 0..est.theta_grid.len() {
        for j in 0..est.p() {
            for m in 0..components {
                lam_err = lam_err.max((est.values[i][j][m] - truth.values[i][j][m]).abs());
                let e = &est.vectors[i][j][m];
                let t = &truth.vectors[i][j][m];
                let ip = inner(t, e);
                let phase = if ip.norm() > 0.0 { ip.conj() / ip.norm() } else { Complex64::new(1.0, 0.0) };
                let diff: f64 = e.iter().zip(t).map(|(a, b)| (a - b * phase).norm_sqr()).sum();
                vec_err = vec_err.max(libm::sqrt(diff) / delta[m]);
            }
        }
    }
    Ok((lam_err, vec_err))
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DfpcaOptions {
    pub components: usize,
    /// `L`; `None` picks `⌈n^{1/4}⌉`.
    pub filter_lag: Option<usize>,
    pub filter_grid: usize,
    pub kernel: LagWindowKernel,
    /// `None` picks `⌈ln n⌉`.
    pub m0: Option<usize>,
    pub autocov: AutocovOptions,
    /// Permit `4L ≥ n`.
    pub allow_large_filter_lag: bool,
}

impl Default for DfpcaOptions {
    fn default() -> Self {
        Self {
            components: DEFAULT_COMPONENTS,
            filter_lag: None,
            filter_grid: DEFAULT_FILTER_GRID,
            kernel: LagWindowKernel::Rectangular,
            m0: None,
            autocov: AutocovOptions::default(),
            allow_large_filter_lag: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DfpcaModel {
    pub components: usize,
    pub filter_lag: usize,
    pub m0: usize,
    pub kernel: LagWindowKernel,
    /// Aligned eigendecomposition on the filter grid.
    pub eigen: FrequencyEigen,
    /// `filters[j][m][l + L]`.
    pub filters: Vec<Vec<Vec<Vec<Complex64>>>>,
    pub scores: Scores,
    pub eigengaps: EigengapReport,
}

/// Full pipeline: diagonal lag-window spectra on a uniform grid,
/// eigendecomposition, phase alignment, filters and scores.
pub fn fit_dfpca(panel: &FunctionalPanel, opts: &DfpcaOptions) -> Result<DfpcaModel> {
    let n = panel.n();
    let filter_lag = opts.filter_lag.unwrap_or_else(|| default_filter_lag(n));
    if !opts.allow_large_filter_lag && 4 * filter_lag >= n {
        return Err(Error::LagOutOfRegime { lag: filter_lag, n, rule: "L < n/4" });
    }
    let m0 = opts.m0.unwrap_or_else(|| default_m0(n));
    let acov = sample_autocov_diagonal(panel, m0, &opts.autocov)?;
    let grid = uniform_theta_grid(opts.filter_grid);
    let spec = lag_window_diagonal(&acov, opts.kernel, m0, &grid)?;
    let mut eigen = eigendecompose_diagonals(&spec, opts.components)?;
    eigen.align();
    let filters = all_filters(&eigen, filter_lag)?;
    let scores = estimate_scores(panel, &filters, filter_lag)?;
    let eigengaps = eigengap_report(&eigen.values, opts.components);
    Ok(DfpcaModel { components: opts.components, filter_lag, m0, kernel: opts.kernel, eigen, filters, scores, eigengaps })
}
