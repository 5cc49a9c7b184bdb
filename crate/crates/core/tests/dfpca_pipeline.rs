//! End-to-end dynamic FPCA on the simulation design.

use hdfts_core::dfpca::{
    eigen_errors, eigendecompose_diagonals, eigengap_report, fit_dfpca, score_autocov, DfpcaOptions,
};
use hdfts_core::secondorder::{
    default_m0, default_theta_grid, lag_window_diagonal, sample_autocov_diagonal, true_spectral_design,
    AutocovOptions, LagWindowKernel,
};
use hdfts_core::simulate::{simulate_design, DesignDgp};

#[test]
fn design_truth_has_coordinate_eigenfunctions() {
    let dgp = DesignDgp::new(100, 50, 0.6, 0).unwrap();
    let grid = default_theta_grid(5);
    let truth = true_spectral_design(&dgp, &grid).unwrap();
    let eig = eigendecompose_diagonals(&truth, 4).unwrap();
    for at in &eig.vectors {
        for per_var in at {
            for (m, v) in per_var.iter().enumerate() {
                for (a, z) in v.iter().enumerate() {
                    let target = if a == m { 1.0 } else { 0.0 };
                    assert!((z.norm() - target).abs() < 1e-12);
                }
            }
        }
    }
    let gaps = eigengap_report(&eig.values, 4);
    assert!(gaps.gap_lower_bound.iter().all(|&g| g > 0.0));
}

#[test]
fn pipeline_runs_and_errors_shrink_with_n() {
    let mut errs = Vec::new();
    for &n in &[300usize, 1500] {
        let dgp = DesignDgp::new(n, 50, 0.6, 21).unwrap();
        let panel = simulate_design(&dgp).unwrap();
        let model = fit_dfpca(&panel, &DfpcaOptions::default()).unwrap();
        assert!(model.scores.max_imag < 1e-8, "{}", model.scores.max_imag);
        assert_eq!(model.scores.len(), n - 2 * model.filter_lag);
        let s0 = score_autocov(&model.scores, 0).unwrap();
        for j in 0..50 {
            for m in 0..4 {
                assert!(s0.get(j, j, m, m) >= 0.0);
            }
        }

        let m0 = default_m0(n);
        let grid = default_theta_grid(m0);
        let acov = sample_autocov_diagonal(&panel, m0, &AutocovOptions::default()).unwrap();
        let est = eigendecompose_diagonals(
            &lag_window_diagonal(&acov, LagWindowKernel::Rectangular, m0, &grid).unwrap(),
            4,
        )
        .unwrap();
        let truth = eigendecompose_diagonals(&true_spectral_design(&dgp, &grid).unwrap(), 4).unwrap();
        let gaps = eigengap_report(&truth.values, 4);
        errs.push(eigen_errors(&est, &truth, &gaps.delta).unwrap());
    }
    assert!(errs[1].0 < errs[0].0, "{errs:?}");
    assert!(errs[1].1 < errs[0].1, "{errs:?}");
}
