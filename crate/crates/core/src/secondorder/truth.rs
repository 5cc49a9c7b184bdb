//! Population autocovariances and spectral densities of the simulated
//! processes, used as ground truth.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use super::autocov::AutocovSet;
use super::spectral::{spectral_from_autocov, SpectralDensity};
use super::window::LagWindowKernel;
use crate::curves::{ComplexKernelMatrix, RealKernelMatrix};
use crate::linalg::{inverse, CMatrix, RMatrix};
use crate::simulate::{design_score_variances, DesignDgp, VmaProcess, DESIGN_BASIS, T6_VARIANCE};
use crate::{Error, Result};

const LYAPUNOV_TOL: f64 = 1e-12;
const LYAPUNOV_MAX_ITER: usize = 100_000;

/// Stationary covariance `Γ₀ = B Γ₀ Bᵀ + s I` by fixed-point iteration from zero.
pub fn stationary_covariance(b: &RMatrix, innovation_variance: f64) -> Result<RMatrix> {
    let p = b.rows();
    let q = RMatrix::identity(p).scaled(innovation_variance);
    let bt = b.transpose();
    let mut gamma = RMatrix::zeros(p, p);
    for _ in 0..LYAPUNOV_MAX_ITER {
        let next = &b.matmul(&gamma).matmul(&bt) + &q;
        let change = (&next - &gamma).max_abs();
        gamma = next;
        if change <= LYAPUNOV_TOL * gamma.max_abs().max(1.0) {
            return Ok(gamma);
        }
        if !change.is_finite() {
            break;
        }
    }
    Err(Error::NonConvergence(format!(
        "Lyapunov iteration did not reach {LYAPUNOV_TOL:e} in {LYAPUNOV_MAX_ITER} steps"
    )))
}

/// Score autocovariances `Γ_h = E ξ_t ξ_{t+h}ᵀ = Γ₀ (Bᵀ)^h` for `h = 0..=H`.
pub fn design_score_autocov(dgp: &DesignDgp, max_lag: usize) -> Result<Vec<RMatrix>> {
    let b = dgp.transition();
    let gamma0 = stationary_covariance(&b, T6_VARIANCE)?;
    let bt = b.transpose();
    let mut out = Vec::with_capacity(max_lag + 1);
    let mut g = gamma0;
    for _ in 0..=max_lag {
        let next = g.matmul(&bt);
        out.push(g);
        g = next;
    }
    Ok(out)
}

/// Expand a `p × p` score matrix into kernels `diag_l(c_l² m_jk)`.
fn expand_scores<T: crate::linalg::Scalar>(m: &crate::linalg::Matrix<T>) -> crate::curves::KernelMatrix<T> {
    let p = m.rows();
    let c2 = design_score_variances();
    let mut out = crate::curves::KernelMatrix::zeros(p, DESIGN_BASIS);
    for j in 0..p {
        for k in 0..p {
            let v = m[(j, k)];
            if v == T::zero() {
                continue;
            }
            for (l, c) in c2.iter().enumerate() {
                out.set(j, k, l, l, v.scale(*c));
            }
        }
    }
    out
}

/// Score spectral density `(s/2π) Ψ Ψ^H` with `Ψ = (I − B e^{iθ})^{-1}`.
pub fn design_score_spectral(b: &RMatrix, innovation_variance: f64, theta: f64) -> Result<CMatrix> {
    let p = b.rows();
    let z = Complex64::from_polar(1.0, theta);
    let m = CMatrix::from_fn(p, p, |i, j| {
        let id = if i == j { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) };
        id - z * b[(i, j)]
    });
    let psi = inverse(&m)?;
    Ok(psi.matmul(&psi.adjoint()).scaled(innovation_variance / (2.0 * PI)))
}

/// Population autocovariances for lags `0..=H` and spectral density on the
/// given grid for the simulation design.
pub fn true_secondorder_design(
    dgp: &DesignDgp,
    max_lag: usize,
    theta_grid: &[f64],
) -> Result<(AutocovSet, SpectralDensity)> {
    let acov = true_autocov_design(dgp, max_lag)?;
    let spec = true_spectral_design(dgp, theta_grid)?;
    Ok((acov, spec))
}

pub fn true_autocov_design(dgp: &DesignDgp, max_lag: usize) -> Result<AutocovSet> {
    let lags = design_score_autocov(dgp, max_lag)?.iter().map(expand_scores).collect();
    AutocovSet::new(None, dgp.basis(), lags)
}

pub fn true_spectral_design(dgp: &DesignDgp, theta_grid: &[f64]) -> Result<SpectralDensity> {
    let b = dgp.transition();
    let values = theta_grid
        .iter()
        .map(|&theta| Ok(expand_scores(&design_score_spectral(&b, T6_VARIANCE, theta)?)))
        .collect::<Result<Vec<ComplexKernelMatrix>>>()?;
    SpectralDensity::new(theta_grid.to_vec(), values, None, LagWindowKernel::Rectangular, dgp.basis())
}

/// Population autocovariances of a moving average,
/// `Σ^(h) = Σ_m A_m D A_{m+h}ᵀ` with `D` the innovation coefficient covariance.
/// Lags beyond the order are zero and included up to `max_lag`.
pub fn true_autocov_vma(proc: &VmaProcess, max_lag: usize) -> Result<AutocovSet> {
    let first = &proc.coeffs[0];
    let (p, r) = (first.p(), first.r());
    let d: Vec<f64> = (0..p * r).map(|i| proc.innovation.coeff_variance(i % r)).collect();
    let lags = (0..=max_lag)
        .map(|h| {
            let mut acc = RMatrix::zeros(p * r, p * r);
            for m in 0..proc.coeffs.len() {
                let Some(later) = proc.coeffs.get(m + h) else { break };
                let a = proc.coeffs[m].as_matrix();
                let ad = RMatrix::from_fn(p * r, p * r, |i, k| a[(i, k)] * d[k]);
                acc = &acc + &ad.matmul(&later.as_matrix().transpose());
            }
            RealKernelMatrix::from_block_matrix(p, r, acc).expect("shape fixed")
        })
        .collect();
    AutocovSet::new(None, proc.basis.clone(), lags)
}

/// Exact spectral density of a moving average on a grid.
pub fn true_spectral_vma(proc: &VmaProcess, theta_grid: &[f64]) -> Result<SpectralDensity> {
    let order = proc.order();
    let acov = true_autocov_vma(proc, order)?;
    let mut spec = spectral_from_autocov(&acov, LagWindowKernel::Rectangular, order, theta_grid)?;
    spec.m0 = None;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::secondorder::spectral::uniform_theta_grid;
    use alloc::vec;
    use approx::assert_abs_diff_eq;

    #[test]
    fn white_scores_when_rho_is_zero() {
        let dgp = DesignDgp::new(10, 50, 0.0, 0).unwrap();
        let g = design_score_autocov(&dgp, 2).unwrap();
        assert!((&g[0] - &RMatrix::identity(50).scaled(1.5)).max_abs() < 1e-15);
        assert_eq!(g[1].max_abs(), 0.0);
        assert_eq!(g[2].max_abs(), 0.0);
    }

    #[test]
    fn scalar_lyapunov_closed_form() {
        let dgp = DesignDgp::with_matrix(10, 0.6, RMatrix::identity(1), 0).unwrap();
        let g = design_score_autocov(&dgp, 1).unwrap();
        assert_abs_diff_eq!(g[0][(0, 0)], 2.34375, epsilon = 1e-10);
        assert_abs_diff_eq!(g[1][(0, 0)], 0.6 * 2.34375, epsilon = 1e-10);
    }

    #[test]
    fn inverse_transform_recovers_lag_zero() {
        let dgp = DesignDgp::new(10, 50, 0.6, 0).unwrap();
        let grid = uniform_theta_grid(512);
        let (acov, spec) = true_secondorder_design(&dgp, 0, &grid).unwrap();
        // periodic trapezoid rule for ∫_0^{2π} f_θ dθ, which equals Σ^(0)
        let mut integral = spec.values[0].scaled(0.0);
        for v in &spec.values {
            integral = integral.add(v).unwrap();
        }
        let integral = integral.scaled(2.0 * PI / grid.len() as f64);
        let diff = integral.sub(&acov.lag(0).unwrap().to_complex()).unwrap();
        assert!(diff.norm_s_max() < 1e-8, "{}", diff.norm_s_max());
    }

    #[test]
    fn ma1_truth_has_no_lag_two() {
        use crate::basis::BasisSpec;
        use crate::simulate::InnovationLaw;
        let a0 = RealKernelMatrix::from_block_matrix(2, 2, RMatrix::identity(4)).unwrap();
        let a1 = RealKernelMatrix::from_block_matrix(2, 2, RMatrix::from_fn(4, 4, |i, j| (i + 2 * j) as f64 / 10.0)).unwrap();
        let proc = VmaProcess::new(vec![a0, a1], InnovationLaw::gaussian(2, 1.0), BasisSpec::fourier(2).unwrap(), 0).unwrap();
        let acov = true_autocov_vma(&proc, 3).unwrap();
        assert!(acov.lag(1).unwrap().norm_s_max() > 0.0);
        assert_eq!(acov.lag(2).unwrap().norm_s_max(), 0.0);
    }
}
