//! Curves observed at a few noisy random points: simulation of the sampling
//! scheme, local-linear reconstruction, and second-order estimation from the
//! reconstructed panel.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng as _;

use crate::basis::{trapezoid_weights, uniform_grid, BasisSpec, DEFAULT_GRID_SIZE};
use crate::curves::FunctionalPanel;
use crate::error::config;
use crate::linalg::RMatrix;
use crate::rng::{derive_seed, rng_from_seed, standard_normal};
use crate::secondorder::{
    lag_window_spectral_with, sample_autocov_with, AutocovOptions, AutocovSet, LagWindowKernel,
    SpectralDensity, SpectralOptions,
};
use crate::{Error, Result};

/// Noise standard deviation of the simulation design (variance 4).
pub const DEFAULT_NOISE_SD: f64 = 2.0;
/// Local systems with a larger condition number fall back to a local-constant fit.
pub const DEFAULT_COND_TOL: f64 = 1e10;
/// Multipliers `c` in `b = c (ln p / T)^{1/5}` for the candidate bandwidth grid.
/// Below 0.25 the design's windows at T = 30 are often nearly empty and the
/// local-linear fits extrapolate wildly.
pub const DEFAULT_BANDWIDTH_MULTIPLIERS: [f64; 5] = [0.25, 0.35, 0.5, 0.7, 1.0];

/// Noisy samples of one curve, sorted by `(u, y)`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ObservedCurve {
    pub u: Vec<f64>,
    pub y: Vec<f64>,
}

impl ObservedCurve {
    pub fn new(u: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if u.len() != y.len() {
            return Err(Error::Dimension(format!("{} points but {} values", u.len(), y.len())));
        }
        if u.is_empty() {
            return Err(Error::EmptyRange("curve without observations".into()));
        }
        if let Some(bad) = u.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(config(format!("sampling point {bad} outside [0, 1]")));
        }
        let mut pairs: Vec<(f64, f64)> = u.into_iter().zip(y).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        let (u, y) = pairs.into_iter().unzip();
        Ok(Self { u, y })
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }
}

/// Discrete noisy observations `Y_tji = X_tj(U_tji) + ε_tji` of a panel.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DiscreteObservations {
    pub n: usize,
    pub p: usize,
    /// `curves[t·p + j]`.
    pub curves: Vec<ObservedCurve>,
    /// Noise standard deviation per variable.
    pub noise_sd: Vec<f64>,
    pub seed: Option<u64>,
}

impl DiscreteObservations {
    pub fn new(n: usize, p: usize, curves: Vec<ObservedCurve>, noise_sd: Vec<f64>, seed: Option<u64>) -> Result<Self> {
        if curves.len() != n * p {
            return Err(Error::Dimension(format!("{} curves for an {n} × {p} panel", curves.len())));
        }
        if noise_sd.len() != p {
            return Err(Error::Dimension("one noise level per variable required".into()));
        }
        Ok(Self { n, p, curves, noise_sd, seed })
    }

    pub fn curve(&self, t: usize, j: usize) -> &ObservedCurve {
        &self.curves[t * self.p + j]
    }
}

/// Draw `count` uniform sampling points per curve and add Gaussian noise
/// with standard deviation `noise_sd`. Curve `(t, j)` uses its own stream.
pub fn sample_discrete(panel: &FunctionalPanel, count: usize, noise_sd: f64, seed: u64) -> Result<DiscreteObservations> {
    if count == 0 {
        return Err(config("at least one sampling point per curve required"));
    }
    if !(noise_sd >= 0.0) {
        return Err(config(format!("noise standard deviation must be nonnegative, got {noise_sd}")));
    }
    let (n, p) = (panel.n(), panel.p());
    let basis = panel.basis();
    let mut curves = Vec::with_capacity(n * p);
    for t in 0..n {
        for j in 0..p {
            let mut rng = rng_from_seed(derive_seed(seed, (t * p + j) as u64));
            let coeffs = panel.curve(t, j);
            let mut u = Vec::with_capacity(count);
            let mut y = Vec::with_capacity(count);
            for _ in 0..count {
                let x: f64 = rng.random();
                u.push(x);
                y.push(basis.eval_curve(coeffs, x) + noise_sd * standard_normal(&mut rng));
            }
            curves.push(ObservedCurve::new(u, y)?);
        }
    }
    DiscreteObservations::new(n, p, curves, alloc::vec![noise_sd; p], Some(seed))
}

/// Smoothing kernels: symmetric probability densities on `[−1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SmoothingKernel {
    /// `0.75 (1 − x²)`.
    #[default]
    Epanechnikov,
    /// `(15/16) (1 − x²)²`.
    Biweight,
    /// `1 − |x|`.
    Triangular,
}

impl SmoothingKernel {
    pub fn density(self, x: f64) -> f64 {
        let a = x.abs();
        if a >= 1.0 {
            return 0.0;
        }
        match self {
            Self::Epanechnikov => 0.75 * (1.0 - a * a),
            Self::Biweight => {
                let s = 1.0 - a * a;
                0.9375 * s * s
            }
            Self::Triangular => 1.0 - a,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SmootherConfig {
    pub kernel: SmoothingKernel,
    /// Bandwidth `b_j` per variable.
    pub bandwidths: Vec<f64>,
    /// Evaluation grid size, endpoints included.
    pub grid_size: usize,
    pub cond_tol: f64,
}

impl SmootherConfig {
    /// Same bandwidth for all `p` variables, Epanechnikov kernel, 101 grid points.
    pub fn uniform(p: usize, bandwidth: f64) -> Result<Self> {
        let cfg = Self {
            kernel: SmoothingKernel::Epanechnikov,
            bandwidths: alloc::vec![bandwidth; p],
            grid_size: DEFAULT_GRID_SIZE,
            cond_tol: DEFAULT_COND_TOL,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(b) = self.bandwidths.iter().find(|b| !(**b > 0.0 && **b <= 0.5)) {
            return Err(config(format!("bandwidth {b} outside (0, 1/2]")));
        }
        if self.grid_size < 2 {
            return Err(config("evaluation grid needs at least two points"));
        }
        if !(self.cond_tol > 1.0) {
            return Err(config("condition-number tolerance must exceed 1"));
        }
        Ok(())
    }
}

/// How the estimate at one point was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitKind {
    LocalLinear,
    /// Ill-conditioned local system, slope dropped.
    LocalConstant,
    /// Empty window, nearest observation used.
    Nearest,
}

/// Local-linear estimate `â₀(u0)` from sorted observations.
pub fn local_linear_at(curve: &ObservedCurve, u0: f64, b: f64, kernel: SmoothingKernel, cond_tol: f64) -> (f64, FitKind) {
    let lo = curve.u.partition_point(|&x| x <= u0 - b);
    let hi = curve.u.partition_point(|&x| x < u0 + b);
    let (mut s0, mut s1, mut s2, mut r0, mut r1) = (0.0, 0.0, 0.0, 0.0, 0.0);
    // offsets scaled by b keep the 2×2 system well scaled
    for i in lo..hi {
        let x = (curve.u[i] - u0) / b;
        let w = kernel.density(x);
        if w == 0.0 {
            continue;
        }
        let y = curve.y[i];
        s0 += w;
        s1 += w * x;
        s2 += w * x * x;
        r0 += w * y;
        r1 += w * x * y;
    }
    if s0 == 0.0 {
        return (nearest_value(curve, u0), FitKind::Nearest);
    }
    let det = s0 * s2 - s1 * s1;
    let tr = s0 + s2;
    let disc = libm::sqrt((s0 - s2) * (s0 - s2) + 4.0 * s1 * s1);
    let small = 0.5 * (tr - disc);
    let large = 0.5 * (tr + disc);
    if det <= 0.0 || small <= 0.0 || large / small > cond_tol {
        return (r0 / s0, FitKind::LocalConstant);
    }
    ((s2 * r0 - s1 * r1) / det, FitKind::LocalLinear)
}

/// Average value of the observations closest to `u0`.
fn nearest_value(curve: &ObservedCurve, u0: f64) -> f64 {
    let best = curve.u.iter().map(|&x| (x - u0).abs()).fold(f64::INFINITY, f64::min);
    let (sum, cnt) = curve
        .u
        .iter()
        .zip(&curve.y)
        .filter(|(x, _)| (*x - u0).abs() == best)
        .fold((0.0, 0usize), |(s, c), (_, y)| (s + y, c + 1));
    sum / cnt as f64
}

/// Counts of fallback fits during a reconstruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FallbackCounts {
    pub local_constant: usize,
    pub nearest: usize,
}

impl FallbackCounts {
    pub fn merge(&mut self, other: Self) {
        self.local_constant += other.local_constant;
        self.nearest += other.nearest;
    }
}

/// Local-linear smoother with a fixed evaluation grid and basis.
#[derive(Debug, Clone)]
pub struct LocalLinearSmoother {
    pub cfg: SmootherConfig,
    pub basis: BasisSpec,
    grid: Vec<f64>,
    weights: Vec<f64>,
    design: RMatrix,
}

impl LocalLinearSmoother {
    /// The smoother evaluates on `cfg.grid_size` uniform points; tabulated
    /// bases must use exactly that grid.
    pub fn new(cfg: SmootherConfig, basis: BasisSpec) -> Result<Self> {
        cfg.validate()?;
        let grid = uniform_grid(cfg.grid_size);
        let weights = trapezoid_weights(cfg.grid_size);
        let (nodes, _) = basis.quadrature(cfg.grid_size);
        if nodes.len() != grid.len() || nodes.iter().zip(&grid).any(|(a, b)| (a - b).abs() > 1e-12) {
            return Err(config("basis quadrature nodes differ from the smoothing grid"));
        }
        let design = basis.design(&grid);
        Ok(Self { cfg, basis, grid, weights, design })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    /// Curve values on the grid.
    pub fn smooth_values(&self, curve: &ObservedCurve, b: f64) -> Result<(Vec<f64>, FallbackCounts)> {
        if curve.is_empty() {
            return Err(Error::EmptyRange("curve without observations".into()));
        }
        let mut counts = FallbackCounts::default();
        let values = self
            .grid
            .iter()
            .map(|&u0| {
                let (v, kind) = local_linear_at(curve, u0, b, self.cfg.kernel, self.cfg.cond_tol);
                match kind {
                    FitKind::LocalLinear => {}
                    FitKind::LocalConstant => counts.local_constant += 1,
                    FitKind::Nearest => counts.nearest += 1,
                }
                v
            })
            .collect();
        Ok((values, counts))
    }

    /// Basis coefficients of the reconstructed curve.
    pub fn smooth_coeffs(&self, curve: &ObservedCurve, b: f64) -> Result<(Vec<f64>, FallbackCounts)> {
        let (values, counts) = self.smooth_values(curve, b)?;
        Ok((self.basis.project(&self.design, &self.weights, &values), counts))
    }

    /// Reconstruct every curve, with bandwidth `b_j` for variable `j`.
    pub fn reconstruct(&self, obs: &DiscreteObservations) -> Result<Reconstruction> {
        if self.cfg.bandwidths.len() != obs.p {
            return Err(Error::Dimension(format!("{} bandwidths for {} variables", self.cfg.bandwidths.len(), obs.p)));
        }
        let r = self.basis.r();
        let mut coeffs = Vec::with_capacity(obs.n * obs.p * r);
        let mut fallbacks = FallbackCounts::default();
        for t in 0..obs.n {
            for j in 0..obs.p {
                let (c, counts) = self.smooth_coeffs(obs.curve(t, j), self.cfg.bandwidths[j])?;
                coeffs.extend_from_slice(&c);
                fallbacks.merge(counts);
            }
        }
        let panel = FunctionalPanel::new(obs.n, obs.p, self.basis.clone(), coeffs)?;
        Ok(Reconstruction { panel, bandwidths: self.cfg.bandwidths.clone(), fallbacks })
    }
}

/// Reconstructed panel with smoothing metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub panel: FunctionalPanel,
    pub bandwidths: Vec<f64>,
    pub fallbacks: FallbackCounts,
}

pub fn local_linear_reconstruct(obs: &DiscreteObservations, cfg: &SmootherConfig, basis: &BasisSpec) -> Result<Reconstruction> {
    LocalLinearSmoother::new(cfg.clone(), basis.clone())?.reconstruct(obs)
}

/// `Σ̃^(h)` for `h = 0..=H` from the reconstructed curves.
pub fn reconstructed_autocov(
    obs: &DiscreteObservations,
    cfg: &SmootherConfig,
    basis: &BasisSpec,
    max_lag: usize,
    opts: &AutocovOptions,
) -> Result<(AutocovSet, Reconstruction)> {
    let rec = local_linear_reconstruct(obs, cfg, basis)?;
    Ok((sample_autocov_with(&rec.panel, max_lag, opts)?, rec))
}

/// `f̃_θ` from the reconstructed curves.
#[allow(clippy::too_many_arguments)]
pub fn reconstructed_spectral(
    obs: &DiscreteObservations,
    cfg: &SmootherConfig,
    basis: &BasisSpec,
    kernel: LagWindowKernel,
    m0: usize,
    theta_grid: &[f64],
    acov_opts: &AutocovOptions,
    spec_opts: &SpectralOptions,
) -> Result<(SpectralDensity, Reconstruction)> {
    let rec = local_linear_reconstruct(obs, cfg, basis)?;
    let acov = sample_autocov_with(&rec.panel, m0, acov_opts)?;
    Ok((lag_window_spectral_with(&acov, kernel, m0, theta_grid, spec_opts)?, rec))
}

/// `c (ln p / T)^{1/5}` clipped to at most 1/2.
pub fn bandwidth_for(c: f64, count: usize, log_p: f64) -> f64 {
    (c * libm::pow(log_p / count as f64, 0.2)).min(0.5)
}

/// Candidate bandwidths `{c (ln p / T)^{1/5}}` for the given multipliers.
pub fn bandwidth_grid(count: usize, p: usize, multipliers: &[f64]) -> Result<Vec<f64>> {
    if count < 2 || p < 2 {
        return Err(config(format!("bandwidth grid needs T ≥ 2 and p ≥ 2, got T={count}, p={p}")));
    }
    if let Some(c) = multipliers.iter().find(|c| !(**c > 0.0) || !c.is_finite()) {
        return Err(config(format!("bandwidth multiplier {c} must be positive")));
    }
    let log_p = libm::log(p as f64);
    Ok(multipliers.iter().map(|&c| bandwidth_for(c, count, log_p)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use alloc::vec::Vec;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn integral(k: SmoothingKernel) -> f64 {
        let g = 20_001;
        let h = 2.0 / (g - 1) as f64;
        (0..g).map(|i| {
            let w = if i == 0 || i == g - 1 { 0.5 } else { 1.0 };
            w * h * k.density(-1.0 + i as f64 * h)
        }).sum()
    }

    #[test]
    fn kernels_are_densities() {
        for k in [SmoothingKernel::Epanechnikov, SmoothingKernel::Biweight, SmoothingKernel::Triangular] {
            assert_abs_diff_eq!(integral(k), 1.0, epsilon = 1e-8);
            assert_eq!(k.density(0.3), k.density(-0.3));
        }
    }

    #[test]
    fn affine_truth_is_exact() {
        let u: Vec<f64> = (0..40).map(|i| (i as f64 + 0.5) / 40.0).collect();
        let y = u.iter().map(|x| 1.5 - 2.0 * x).collect();
        let curve = ObservedCurve::new(u, y).unwrap();
        for &u0 in &[0.0, 0.13, 0.5, 0.97, 1.0] {
            let (v, kind) = local_linear_at(&curve, u0, 0.1, SmoothingKernel::Epanechnikov, DEFAULT_COND_TOL);
            assert_eq!(kind, FitKind::LocalLinear);
            assert_abs_diff_eq!(v, 1.5 - 2.0 * u0, epsilon = 1e-10);
        }
    }

    #[test]
    fn single_point_gives_constant() {
        let curve = ObservedCurve::new(vec![0.4], vec![3.0]).unwrap();
        let cfg = SmootherConfig::uniform(1, 0.1).unwrap();
        let sm = LocalLinearSmoother::new(cfg, BasisSpec::fourier(2).unwrap()).unwrap();
        let (vals, counts) = sm.smooth_values(&curve, 0.1).unwrap();
        assert!(vals.iter().all(|&v| (v - 3.0).abs() < 1e-14));
        assert!(counts.nearest > 0 && counts.local_constant > 0);
    }

    #[test]
    fn empty_window_uses_nearest_ties_averaged() {
        let curve = ObservedCurve::new(vec![0.25, 0.75], vec![1.0, 5.0]).unwrap();
        let (v, kind) = local_linear_at(&curve, 0.5, 0.1, SmoothingKernel::Epanechnikov, DEFAULT_COND_TOL);
        assert_eq!(kind, FitKind::Nearest);
        assert_abs_diff_eq!(v, 3.0, epsilon = 1e-15);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(ObservedCurve::new(vec![1.2], vec![0.0]).is_err());
        assert!(ObservedCurve::new(vec![], vec![]).is_err());
        assert!(SmootherConfig::uniform(2, 0.6).is_err());
        assert!(SmootherConfig::uniform(2, 0.0).is_err());
    }

    #[test]
    fn bandwidth_arithmetic() {
        assert_abs_diff_eq!(bandwidth_for(1.0, 32, 1.0), 0.5, epsilon = 1e-15);
        let a = bandwidth_grid(1000, 50, &[1.0]).unwrap()[0];
        let b = bandwidth_grid(2000, 50, &[1.0]).unwrap()[0];
        assert_abs_diff_eq!(b / a, libm::pow(2.0, -0.2), epsilon = 1e-14);
        assert_eq!(bandwidth_grid(2, 50, &[100.0]).unwrap()[0], 0.5);
        assert!(bandwidth_grid(1, 50, &[1.0]).is_err());
    }

    #[test]
    fn noiseless_sampling_hits_the_curve() {
        let basis = BasisSpec::fourier(3).unwrap();
        let panel = FunctionalPanel::new(2, 1, basis.clone(), vec![1.0, -0.5, 0.25, 0.0, 2.0, 1.0]).unwrap();
        let obs = sample_discrete(&panel, 7, 0.0, 3).unwrap();
        for t in 0..2 {
            let c = obs.curve(t, 0);
            assert_eq!(c.len(), 7);
            for (u, y) in c.u.iter().zip(&c.y) {
                assert_eq!(*y, basis.eval_curve(panel.curve(t, 0), *u));
            }
        }
        assert_eq!(sample_discrete(&panel, 7, 0.0, 3).unwrap(), obs);
    }

    proptest! {
        #[test]
        fn permutation_invariant(seed in 0u64..1000, rot in 0usize..20) {
            let mut rng = rng_from_seed(seed);
            let u: Vec<f64> = (0..20).map(|_| rng.random::<f64>()).collect();
            let y: Vec<f64> = (0..20).map(|_| standard_normal(&mut rng)).collect();
            let mut u2 = u.clone();
            let mut y2 = y.clone();
            u2.rotate_left(rot);
            y2.rotate_left(rot);
            let a = ObservedCurve::new(u, y).unwrap();
            let b = ObservedCurve::new(u2, y2).unwrap();
            for i in 0..11 {
                let u0 = i as f64 / 10.0;
                let fa = local_linear_at(&a, u0, 0.2, SmoothingKernel::Epanechnikov, DEFAULT_COND_TOL);
                let fb = local_linear_at(&b, u0, 0.2, SmoothingKernel::Epanechnikov, DEFAULT_COND_TOL);
                prop_assert_eq!(fa, fb);
            }
        }

        #[test]
        fn affine_exact_on_random_designs(seed in 0u64..1000, a in -3.0f64..3.0, s in -3.0f64..3.0) {
            let mut rng = rng_from_seed(seed);
            let u: Vec<f64> = (0..60).map(|_| rng.random::<f64>()).collect();
            let y = u.iter().map(|x| a + s * x).collect();
            let curve = ObservedCurve::new(u, y).unwrap();
            for i in 0..=20 {
                let u0 = i as f64 / 20.0;
                let (v, kind) = local_linear_at(&curve, u0, 0.25, SmoothingKernel::Epanechnikov, DEFAULT_COND_TOL);
                if kind == FitKind::LocalLinear {
                    prop_assert!((v - (a + s * u0)).abs() < 1e-10);
                }
            }
        }
    }
}
