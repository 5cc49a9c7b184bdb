use alloc::vec;
use alloc::vec::Vec;

use crate::basis::BasisSpec;
use crate::curves::{FunctionalPanel, RealKernelMatrix};
use crate::linalg::RMatrix;
use crate::{Error, Result};

/// Denominator of the lag-`h` sample autocovariance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Normalization {
    /// `1 / (n − |h|)`.
    #[default]
    LagAdjusted,
    /// `1 / n`; makes every lag window with a nonnegative Fourier transform
    /// (e.g. Bartlett) produce positive semidefinite spectral estimates.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AutocovOptions {
    /// Subtract the sample mean curve of each variable first.
    pub center: bool,
    pub normalization: Normalization,
    /// Permit `2H ≥ n`.
    pub allow_large_lag: bool,
}

/// Autocovariance kernels for lags `0..=H`; negative lags follow from
/// `Σ^(−h) = (Σ^(h))ᵀ`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AutocovSet {
    /// Sample size, absent for population autocovariances.
    pub n: Option<usize>,
    pub basis: BasisSpec,
    lags: Vec<RealKernelMatrix>,
}

impl AutocovSet {
    pub fn new(n: Option<usize>, basis: BasisSpec, lags: Vec<RealKernelMatrix>) -> Result<Self> {
        let first = lags.first().ok_or_else(|| Error::Dimension("no lags".into()))?;
        let (p, r) = (first.p(), first.r());
        if r != basis.r() || lags.iter().any(|m| m.p() != p || m.r() != r) {
            return Err(Error::Dimension("autocovariance lags differ in shape".into()));
        }
        Ok(Self { n, basis, lags })
    }

    pub fn max_lag(&self) -> usize {
        self.lags.len() - 1
    }

    pub fn p(&self) -> usize {
        self.lags[0].p()
    }

    pub fn r(&self) -> usize {
        self.lags[0].r()
    }

    /// `Σ^(h)` for `h ≥ 0`.
    pub fn lag(&self, h: usize) -> Result<&RealKernelMatrix> {
        self.lags.get(h).ok_or(Error::MissingLag(h))
    }

    /// `Σ^(h)` for any sign of `h`.
    pub fn signed_lag(&self, h: isize) -> Result<RealKernelMatrix> {
        let m = self.lag(h.unsigned_abs())?;
        Ok(if h < 0 { m.transpose() } else { m.clone() })
    }

    pub fn lags(&self) -> &[RealKernelMatrix] {
        &self.lags
    }

    pub fn truncated(&self, max_lag: usize) -> Result<Self> {
        if max_lag > self.max_lag() {
            return Err(Error::MissingLag(max_lag));
        }
        Ok(Self { n: self.n, basis: self.basis.clone(), lags: self.lags[..=max_lag].to_vec() })
    }
}

fn check_lag_regime(n: usize, h: usize, allow: bool) -> Result<()> {
    if !allow && 2 * h >= n {
        return Err(Error::LagOutOfRegime { lag: h, n, rule: "H < n/2" });
    }
    if h >= n {
        return Err(Error::MissingLag(h));
    }
    Ok(())
}

fn prepared(panel: &FunctionalPanel, opts: &AutocovOptions) -> FunctionalPanel {
    if opts.center {
        panel.centered()
    } else {
        panel.clone()
    }
}

fn denominator(n: usize, h: usize, norm: Normalization) -> f64 {
    match norm {
        Normalization::LagAdjusted => (n - h) as f64,
        Normalization::Full => n as f64,
    }
}

/// Sample autocovariances `Σ̂^(h) = (n−h)^{-1} Σ_t X_t ⊗ X_{t+h}` for `0 ≤ h ≤ H`.
pub fn sample_autocov(panel: &FunctionalPanel, max_lag: usize) -> Result<AutocovSet> {
    sample_autocov_with(panel, max_lag, &AutocovOptions::default())
}

pub fn sample_autocov_with(
    panel: &FunctionalPanel,
    max_lag: usize,
    opts: &AutocovOptions,
) -> Result<AutocovSet> {
    let n = panel.n();
    check_lag_regime(n, max_lag, opts.allow_large_lag)?;
    let panel = prepared(panel, opts);
    let (p, r) = (panel.p(), panel.r());
    let w = p * r;
    let lags = (0..=max_lag)
        .map(|h| {
            let mut acc = RMatrix::zeros(w, w);
            let data = acc.as_mut_slice();
            for t in 0..n - h {
                let x = panel.slice(t);
                let y = panel.slice(t + h);
                for (i, &xi) in x.iter().enumerate() {
                    if xi == 0.0 {
                        continue;
                    }
                    let row = &mut data[i * w..(i + 1) * w];
                    for (o, &yk) in row.iter_mut().zip(y) {
                        *o += xi * yk;
                    }
                }
            }
            let m = acc.scaled(1.0 / denominator(n, h, opts.normalization));
            RealKernelMatrix::from_block_matrix(p, r, m).expect("shape fixed by panel")
        })
        .collect();
    AutocovSet::new(Some(n), panel.basis().clone(), lags)
}

/// Only the diagonal kernels `Σ̂^(h)_jj`, which is all that per-variable
/// dynamic FPCA needs. `blocks[h][j]` is `r × r`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalAutocov {
    pub n: usize,
    pub blocks: Vec<Vec<RMatrix>>,
}

impl DiagonalAutocov {
    pub fn max_lag(&self) -> usize {
        self.blocks.len() - 1
    }

    pub fn p(&self) -> usize {
        self.blocks[0].len()
    }
}

pub fn sample_autocov_diagonal(
    panel: &FunctionalPanel,
    max_lag: usize,
    opts: &AutocovOptions,
) -> Result<DiagonalAutocov> {
    let n = panel.n();
    check_lag_regime(n, max_lag, opts.allow_large_lag)?;
    let panel = prepared(panel, opts);
    let (p, r) = (panel.p(), panel.r());
    let blocks = (0..=max_lag)
        .map(|h| {
            let scale = 1.0 / denominator(n, h, opts.normalization);
            (0..p)
                .map(|j| {
                    let mut acc = vec![0.0; r * r];
                    for t in 0..n - h {
                        let x = panel.curve(t, j);
                        let y = panel.curve(t + h, j);
                        for a in 0..r {
                            for b in 0..r {
                                acc[a * r + b] += x[a] * y[b];
                            }
                        }
                    }
                    acc.iter_mut().for_each(|v| *v *= scale);
                    RMatrix::from_vec(r, r, acc).expect("r x r")
                })
                .collect()
        })
        .collect();
    Ok(DiagonalAutocov { n, blocks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn small_panel() -> FunctionalPanel {
        let basis = BasisSpec::fourier(2).unwrap();
        let coeffs: Vec<f64> = (0..5 * 2 * 2).map(|i| ((i * 7 % 11) as f64 - 5.0) / 3.0).collect();
        FunctionalPanel::new(5, 2, basis, coeffs).unwrap()
    }

    #[test]
    fn zero_panel_gives_zero_autocov() {
        let panel = FunctionalPanel::zeros(6, 2, BasisSpec::fourier(3).unwrap());
        let acov = sample_autocov(&panel, 2).unwrap();
        assert!(acov.lags().iter().all(|m| m.norm_s_max() == 0.0));
    }

    #[test]
    fn lag_zero_trace_is_mean_squared_norm() {
        let basis = BasisSpec::fourier(3).unwrap();
        let coeffs: Vec<f64> = (0..12).map(|i| (i as f64).sin()).collect();
        let panel = FunctionalPanel::new(4, 1, basis, coeffs).unwrap();
        let acov = sample_autocov(&panel, 1).unwrap();
        let trace = acov.lag(0).unwrap().as_matrix().trace();
        let mean_sq: f64 = (0..4).map(|t| panel.curve_norm(t, 0).powi(2)).sum::<f64>() / 4.0;
        assert_abs_diff_eq!(trace, mean_sq, epsilon = 1e-15);
    }

    #[test]
    fn regime_check() {
        let panel = small_panel();
        let err = sample_autocov(&panel, 3).unwrap_err();
        assert!(matches!(err, Error::LagOutOfRegime { .. }));
        let opts = AutocovOptions { allow_large_lag: true, ..Default::default() };
        assert!(sample_autocov_with(&panel, 4, &opts).is_ok());
        assert!(sample_autocov_with(&panel, 5, &opts).is_err());
    }

    #[test]
    fn negative_lag_is_transpose() {
        let acov = sample_autocov(&small_panel(), 2).unwrap();
        let neg = acov.signed_lag(-1).unwrap();
        let pos = acov.lag(1).unwrap();
        for j in 0..2 {
            for k in 0..2 {
                assert_eq!(neg.block(j, k), pos.block(k, j).transpose());
            }
        }
    }

    #[test]
    fn diagonal_path_matches_full() {
        let panel = small_panel();
        let opts = AutocovOptions::default();
        let full = sample_autocov_with(&panel, 2, &opts).unwrap();
        let diag = sample_autocov_diagonal(&panel, 2, &opts).unwrap();
        for h in 0..=2 {
            for j in 0..2 {
                assert!((&full.lag(h).unwrap().block(j, j) - &diag.blocks[h][j]).max_abs() < 1e-15);
            }
        }
    }
}
