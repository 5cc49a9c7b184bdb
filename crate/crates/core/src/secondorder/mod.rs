//! Sample autocovariances, lag-window spectral estimation and the
//! population counterparts for the simulated processes.
//!
//! Orientation: `Σ^(h)_jk(u, v) = Cov{X_tj(u), X_{t+h,k}(v)}`, and
//! `f_θ = (2π)^{-1} Σ_h Σ^(h) e^{−ihθ}`. In coefficient space the lag `−h`
//! matrix is the transpose of the lag `h` matrix, `f_θ` is Hermitian and
//! `f_{2π−θ} = conj(f_θ)`.

mod autocov;
mod spectral;
mod truth;
mod window;

pub use autocov::{
    sample_autocov, sample_autocov_diagonal, sample_autocov_with, AutocovOptions, AutocovSet,
    DiagonalAutocov, Normalization,
};
pub use spectral::{
    default_m0, default_theta_grid, lag_window_diagonal, lag_window_spectral, lag_window_spectral_with,
    spectral_from_autocov, truncation_error_r, uniform_theta_grid, DiagonalBlocks, DiagonalSpectral,
    SpectralDensity, SpectralEvaluator, SpectralOptions, TruncationError,
};
pub use truth::{
    design_score_autocov, design_score_spectral, stationary_covariance, true_autocov_design,
    true_autocov_vma, true_secondorder_design, true_spectral_design, true_spectral_vma,
};
pub use window::LagWindowKernel;
