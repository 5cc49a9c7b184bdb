//! Acceptance suite. Runs without the libtest harness so that every
//! criterion prints exactly one PASS/FAIL line; the process fails if any
//! criterion does.

use std::f64::consts::PI;
use std::time::Instant;

use hdfts::config::{ExperimentConfig, Metric, StudyKind};
use hdfts::study::{run_study, StudySummary};
use hdfts_core::basis::BasisSpec;
use hdfts_core::curves::{hs_norm_quadrature, ComplexKernelMatrix, FunctionalPanel, RealKernelMatrix};
use hdfts_core::dependence::{mc_dependence, DependenceConfig};
use hdfts_core::dfpca::{eigendecompose_diagonals, score_autocov, Scores};
use hdfts_core::linalg::{min_eigenvalue, spectral_radius, CMatrix, RMatrix};
use hdfts_core::rng::{rng_from_seed, standard_normal, Rng};
use hdfts_core::secondorder::{
    default_theta_grid, design_score_autocov, design_score_spectral, lag_window_spectral,
    lag_window_spectral_with, sample_autocov_with, true_autocov_design, true_autocov_vma, true_spectral_design,
    true_spectral_vma, uniform_theta_grid, AutocovOptions, LagWindowKernel, Normalization, SpectralDensity,
    SpectralOptions,
};
use hdfts_core::simulate::{DesignDgp, InnovationLaw, SimulatableProcess, VfarProcess, VmaProcess, T6_VARIANCE};
use hdfts_core::smoothing::{local_linear_at, FitKind, ObservedCurve, SmoothingKernel};
use hdfts_core::sparse::{sparse_error_s1, support, threshold_uniform, verify_threshold_axioms, ThresholdRule};
use hdfts_core::Complex64;
use rand::Rng as _;

// Pinned tolerances.
const ORACLE_REL_TOL: f64 = 1e-12;
const QUADRATURE_TOL: f64 = 1e-6;
const INVARIANT_TOL: f64 = 1e-12;
const PSD_TOL: f64 = -1e-10;
const INVARIANT_INSTANCES: usize = 200;
const STUDY_REPLICATES: usize = 100;
const SMOOTHED_RATIO_BOUND: f64 = 1.3;
const SUPPORT_RUNS: usize = 50;
const SUPPORT_SUCCESS_RATE: f64 = 0.95;
const SUPPORT_TRUNCATION_LAG: usize = 3;
const AXIOM_INSTANCES: usize = 1000;
const AFFINE_TOL: f64 = 1e-10;
const BIAS_RATIO_RANGE: (f64, f64) = (3.0, 5.0);
const VFAR_REPLICATES: usize = 100_000;
const VFAR_RATIO_TOL: f64 = 0.10;
const INVERSE_TRANSFORM_FREQS: usize = 512;
const INVERSE_TRANSFORM_TOL: f64 = 1e-8;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

/// Maximum that keeps a NaN instead of discarding it.
fn nmax(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else {
        a.max(b)
    }
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn random_panel(rng: &mut Rng, n: usize, p: usize, r: usize) -> FunctionalPanel {
    let coeffs = (0..n * p * r).map(|_| standard_normal(rng)).collect();
    FunctionalPanel::new(n, p, BasisSpec::fourier(r).unwrap(), coeffs).unwrap()
}

/// `x[t][j][a]` read straight from the coefficient vector.
fn coef(panel: &FunctionalPanel, t: usize, j: usize, a: usize) -> f64 {
    let (p, r) = (panel.p(), panel.r());
    panel.coeffs()[(t * p + j) * r + a]
}

fn brute_autocov(panel: &FunctionalPanel, h: usize, j: usize, k: usize, a: usize, b: usize) -> f64 {
    let n = panel.n();
    let mut s = 0.0;
    for t in 0..n - h {
        s += coef(panel, t, j, a) * coef(panel, t + h, k, b);
    }
    s / (n - h) as f64
}

fn brute_weight(kernel: LagWindowKernel, h: i64, m0: usize) -> f64 {
    if m0 == 0 {
        return f64::from(h == 0);
    }
    let x = (h as f64 / m0 as f64).abs();
    if x > 1.0 {
        return 0.0;
    }
    match kernel {
        LagWindowKernel::Rectangular => 1.0,
        LagWindowKernel::Bartlett => 1.0 - x,
        LagWindowKernel::Parzen if x <= 0.5 => 1.0 - 6.0 * x.powi(2) + 6.0 * x.powi(3),
        LagWindowKernel::Parzen => 2.0 * (1.0 - x).powi(3),
        LagWindowKernel::FlatTop if x <= 0.5 => 1.0,
        LagWindowKernel::FlatTop => 2.0 - 2.0 * x,
    }
}

/// `(2π)^{-1} Σ_{|h|≤m0} K(h/m0) Σ^(h)_{jk,ab} e^{−ihθ}` with
/// `Σ^(−h)_{jk,ab} = Σ^(h)_{kj,ba}`.
#[allow(clippy::too_many_arguments)]
fn brute_spectral(
    panel: &FunctionalPanel,
    kernel: LagWindowKernel,
    m0: usize,
    theta: f64,
    j: usize,
    k: usize,
    a: usize,
    b: usize,
) -> Complex64 {
    let mut s = Complex64::new(0.0, 0.0);
    for h in -(m0 as i64)..=(m0 as i64) {
        let w = brute_weight(kernel, h, m0);
        let g = if h >= 0 {
            brute_autocov(panel, h as usize, j, k, a, b)
        } else {
            brute_autocov(panel, (-h) as usize, k, j, b, a)
        };
        s += Complex64::from_polar(1.0, -(h as f64) * theta) * (w * g);
    }
    s / (2.0 * PI)
}

fn random_spectral(rng: &mut Rng, p: usize, r: usize, grid: &[f64]) -> SpectralDensity {
    let values = grid
        .iter()
        .map(|_| {
            let m = CMatrix::from_fn(p * r, p * r, |_, _| Complex64::new(standard_normal(rng), standard_normal(rng)));
            ComplexKernelMatrix::from_block_matrix(p, r, m).unwrap()
        })
        .collect();
    SpectralDensity::new(grid.to_vec(), values, None, LagWindowKernel::Rectangular, BasisSpec::fourier(r).unwrap())
        .unwrap()
}

fn criterion_1() -> Outcome {
    let mut rng = rng_from_seed(1);
    let mut worst_rel: f64 = 0.0;
    let mut worst_quad: f64 = 0.0;
    let mut instances = 0;
    for _ in 0..100 {
        let n = rng.random_range(3..=10);
        let p = rng.random_range(1..=3);
        let r = rng.random_range(1..=3);
        let panel = random_panel(&mut rng, n, p, r);
        let max_lag = (n - 1) / 2;
        let acov = sample_autocov_with(&panel, max_lag, &AutocovOptions::default()).map_err(|e| e.to_string())?;
        let mut scale: f64 = 0.0;
        let mut diff: f64 = 0.0;
        for h in 0..=max_lag {
            let m = acov.lag(h).unwrap();
            for j in 0..p {
                for k in 0..p {
                    for a in 0..r {
                        for b in 0..r {
                            let want = brute_autocov(&panel, h, j, k, a, b);
                            scale = nmax(scale, want.abs());
                            diff = nmax(diff, (m.get(j, k, a, b) - want).abs());
                        }
                    }
                    // the kernel's HS norm against quadrature of the curves themselves
                    let basis = panel.basis();
                    let kern = |u: f64, v: f64| {
                        (0..n - h)
                            .map(|t| basis.eval_curve(panel.curve(t, j), u) * basis.eval_curve(panel.curve(t + h, k), v))
                            .sum::<f64>()
                            / (n - h) as f64
                    };
                    let quad = hs_norm_quadrature(kern, 129);
                    worst_quad = nmax(worst_quad, (quad - m.block_norm(j, k)).abs() / quad.max(1.0));
                }
            }
        }
        worst_rel = nmax(worst_rel, diff / scale.max(f64::MIN_POSITIVE));

        let m0 = rng.random_range(0..=(n - 1) / 3);
        let grid: Vec<f64> = (0..5).map(|_| rng.random::<f64>() * 2.0 * PI).collect();
        for kernel in LagWindowKernel::ALL {
            let spec = lag_window_spectral(&acov, kernel, m0, &grid).map_err(|e| e.to_string())?;
            let (mut scale, mut diff): (f64, f64) = (0.0, 0.0);
            for (i, &theta) in grid.iter().enumerate() {
                for j in 0..p {
                    for k in 0..p {
                        for a in 0..r {
                            for b in 0..r {
                                let want = brute_spectral(&panel, kernel, m0, theta, j, k, a, b);
                                scale = nmax(scale, want.norm());
                                diff = nmax(diff, (spec.values[i].get(j, k, a, b) - want).norm());
                            }
                        }
                    }
                }
            }
            worst_rel = nmax(worst_rel, diff / scale.max(f64::MIN_POSITIVE));
        }

        // score autocovariances on random scores
        let comps = rng.random_range(1..=3);
        let len = n;
        let values: Vec<f64> = (0..len * p * comps).map(|_| standard_normal(&mut rng)).collect();
        let scores = Scores { filter_lag: 0, p, components: comps, values: values.clone(), max_imag: 0.0 };
        for h in 0..len {
            let got = score_autocov(&scores, h).map_err(|e| e.to_string())?;
            let (mut scale, mut diff): (f64, f64) = (0.0, 0.0);
            for j in 0..p {
                for k in 0..p {
                    for m in 0..comps {
                        for l in 0..comps {
                            let mut s = 0.0;
                            for t in 0..len - h {
                                s += values[(t * p + j) * comps + m] * values[((t + h) * p + k) * comps + l];
                            }
                            let want = s / (len - h) as f64;
                            scale = nmax(scale, want.abs());
                            diff = nmax(diff, (got.get(j, k, m, l) - want).abs());
                        }
                    }
                }
            }
            worst_rel = nmax(worst_rel, diff / scale.max(f64::MIN_POSITIVE));
        }

        // thresholded S1 error
        let grid: Vec<f64> = (0..4).map(|i| i as f64 * 0.7).collect();
        let est = random_spectral(&mut rng, p, r, &grid);
        let truth = random_spectral(&mut rng, p, r, &grid);
        let lambda = rng.random::<f64>() * 6.0;
        for rule in [ThresholdRule::Soft, ThresholdRule::Hard] {
            let thr = threshold_uniform(&est, lambda, rule).map_err(|e| e.to_string())?;
            let got = sparse_error_s1(&thr, &truth).map_err(|e| e.to_string())?;
            let block_norm = |f: &ComplexKernelMatrix, j: usize, k: usize| {
                let mut s = 0.0;
                for a in 0..r {
                    for b in 0..r {
                        s += f.get(j, k, a, b).norm_sqr();
                    }
                }
                s.sqrt()
            };
            let mut want: f64 = 0.0;
            for (i, f) in truth.values.iter().enumerate() {
                for k in 0..p {
                    let mut col = 0.0;
                    for j in 0..p {
                        let sup = est.values.iter().map(|e| block_norm(e, j, k)).fold(0.0, f64::max);
                        let factor = match rule {
                            _ if sup <= lambda => 0.0,
                            ThresholdRule::Soft => 1.0 - lambda / sup,
                            ThresholdRule::Hard => 1.0,
                        };
                        let mut s = 0.0;
                        for a in 0..r {
                            for b in 0..r {
                                s += (est.values[i].get(j, k, a, b) * factor - f.get(j, k, a, b)).norm_sqr();
                            }
                        }
                        col += s.sqrt();
                    }
                    want = nmax(want, col);
                }
            }
            worst_rel = nmax(worst_rel, (got - want).abs() / want.max(f64::MIN_POSITIVE));
        }
        instances += 1;
    }
    check(
        worst_rel <= ORACLE_REL_TOL && worst_quad <= QUADRATURE_TOL,
        format!("{instances} instances, max relative deviation {worst_rel:.2e}, quadrature {worst_quad:.2e}"),
    )
}

fn criterion_2() -> Outcome {
    let mut rng = rng_from_seed(2);
    let mut herm: f64 = 0.0;
    let mut conj_sym: f64 = 0.0;
    let mut transpose: f64 = 0.0;
    let mut order_violations = 0;
    let mut unit: f64 = 0.0;
    let mut min_eig = f64::INFINITY;
    let k_freq = 16;
    let grid = uniform_theta_grid(k_freq);
    for _ in 0..INVARIANT_INSTANCES {
        let n = rng.random_range(20..=60);
        let p = rng.random_range(1..=3);
        let r = rng.random_range(1..=4);
        let m0 = rng.random_range(1..=4);
        let panel = random_panel(&mut rng, n, p, r);
        let opts = AutocovOptions { center: rng.random(), normalization: Normalization::Full, allow_large_lag: false };
        let acov = sample_autocov_with(&panel, m0, &opts).map_err(|e| e.to_string())?;

        // Σ̂^(−h) computed directly equals the transpose of Σ̂^(h)
        let centered = if opts.center { panel.centered() } else { panel.clone() };
        for h in 1..=m0 {
            let neg = acov.signed_lag(-(h as isize)).unwrap();
            for j in 0..p {
                for k in 0..p {
                    for a in 0..r {
                        for b in 0..r {
                            let mut s = 0.0;
                            for t in h..n {
                                s += coef(&centered, t, j, a) * coef(&centered, t - h, k, b);
                            }
                            transpose = nmax(transpose, (neg.get(j, k, a, b) - s / n as f64).abs());
                        }
                    }
                }
            }
        }

        for kernel in LagWindowKernel::ALL {
            let spec = lag_window_spectral_with(&acov, kernel, m0, &grid, &SpectralOptions { allow_large_m0: true })
                .map_err(|e| e.to_string())?;
            for i in 0..k_freq {
                let f = spec.values[i].as_matrix();
                herm = nmax(herm, f.hermitian_deviation());
                let mirror = spec.values[(k_freq - i) % k_freq].as_matrix();
                conj_sym = nmax(conj_sym, (&f.conj() - mirror).max_abs());
                if kernel == LagWindowKernel::Bartlett {
                    min_eig = -nmax(-min_eig, -min_eigenvalue(f).map_err(|e| e.to_string())?);
                }
            }
            let eig = eigendecompose_diagonals(&spec, r).map_err(|e| e.to_string())?;
            for (vals, vecs) in eig.values.iter().zip(&eig.vectors) {
                for (lam, v) in vals.iter().zip(vecs) {
                    if lam.windows(2).any(|w| w[0] < w[1]) {
                        order_violations += 1;
                    }
                    for x in v {
                        let norm: f64 = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                        unit = nmax(unit, (norm - 1.0).abs());
                    }
                }
            }
        }
    }
    let ok = herm <= INVARIANT_TOL
        && conj_sym <= INVARIANT_TOL
        && transpose <= INVARIANT_TOL
        && order_violations == 0
        && unit <= INVARIANT_TOL
        && min_eig >= PSD_TOL;
    check(
        ok,
        format!(
            "{INVARIANT_INSTANCES} instances: hermitian {herm:.1e}, conjugate {conj_sym:.1e}, transpose {transpose:.1e}, \
             order violations {order_violations}, unit norm {unit:.1e}, Bartlett min eigenvalue {min_eig:.2e}"
        ),
    )
}

fn study(kind: StudyKind) -> Result<StudySummary, String> {
    let mut cfg = ExperimentConfig::preset(kind, false).map_err(|e| e.to_string())?;
    cfg.replicates = STUDY_REPLICATES;
    let outcome = run_study(&cfg).map_err(|e| e.to_string())?;
    let failures: usize = outcome.summary.settings.iter().map(|s| s.failures).sum();
    if failures > 0 {
        return Err(format!("{failures} replicates failed"));
    }
    Ok(outcome.summary)
}

fn median(s: &StudySummary, n: usize, rho: f64, t: Option<usize>, m: Metric) -> Result<f64, String> {
    s.median(n, 50, rho, t, m).ok_or_else(|| format!("no median for n={n} rho={rho} t={t:?} {m:?}"))
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

fn fmt(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(" > ")
}

fn criterion_3() -> Outcome {
    let s = study(StudyKind::FullyObserved)?;
    let ns = [50, 100, 150];
    let mut ok = true;
    let mut detail = Vec::new();
    for metric in [Metric::Autocov, Metric::Spectral] {
        let lo: Vec<f64> = ns.iter().map(|&n| median(&s, n, 0.6, None, metric)).collect::<Result<_, _>>()?;
        let hi: Vec<f64> = ns.iter().map(|&n| median(&s, n, 0.8, None, metric)).collect::<Result<_, _>>()?;
        ok &= strictly_decreasing(&lo) && lo.iter().zip(&hi).all(|(a, b)| b > a);
        detail.push(format!("{metric:?} rho=0.6 [{}] rho=0.8 [{}]", fmt(&lo), fmt(&hi)));
    }
    check(ok, format!("medians over {STUDY_REPLICATES} replicates: {}", detail.join("; ")))
}

fn criterion_4() -> Outcome {
    let s = study(StudyKind::DiscretelyObserved)?;
    let ts = [30, 60, 120];
    let smoothed: Vec<f64> =
        ts.iter().map(|&t| median(&s, 50, 0.6, Some(t), Metric::SmoothedSpectral)).collect::<Result<_, _>>()?;
    let full = median(&s, 50, 0.6, Some(120), Metric::Spectral)?;
    let ok = smoothed.windows(2).all(|w| w[1] <= w[0]) && smoothed[2] <= SMOOTHED_RATIO_BOUND * full;
    check(
        ok,
        format!(
            "smoothed medians T=30,60,120: {:.4}, {:.4}, {:.4}; fully observed {full:.4}; ratio {:.3}",
            smoothed[0],
            smoothed[1],
            smoothed[2],
            smoothed[2] / full
        ),
    )
}

fn criterion_5() -> Outcome {
    let s = study(StudyKind::Dfpca)?;
    let ns = [300, 800, 1500];
    let lam: Vec<f64> = ns.iter().map(|&n| median(&s, n, 0.6, None, Metric::Eigenvalues)).collect::<Result<_, _>>()?;
    let phi: Vec<f64> =
        ns.iter().map(|&n| median(&s, n, 0.6, None, Metric::Eigenfunctions)).collect::<Result<_, _>>()?;
    check(
        strictly_decreasing(&lam) && strictly_decreasing(&phi),
        format!("eigenvalues [{}], eigenfunctions [{}]", fmt(&lam), fmt(&phi)),
    )
}

/// VMA(1) with block-diagonal coefficients: blocks of five variables,
/// within-block mixing `I + a J`, lag-one coefficient `b` times lag zero.
fn block_sparse_process(p: usize, block: usize, a: f64, b: f64, seed: u64) -> VmaProcess {
    let r = 4;
    let mix = RMatrix::from_fn(p, p, |j, k| {
        let same = j / block == k / block;
        f64::from(j == k) + if same { a } else { 0.0 }
    });
    let a0 = RealKernelMatrix::from_blocks(p, r, |j, k| RMatrix::identity(r).scaled(mix[(j, k)]));
    let a1 = a0.scaled(b);
    VmaProcess::new(vec![a0, a1], InnovationLaw::gaussian(r, 1.0), BasisSpec::fourier4(), seed).unwrap()
}

fn criterion_6() -> Outcome {
    let (p, n) = (20, 400);
    let proc = block_sparse_process(p, 5, 1.0, 0.5, 0);
    // the truth is a moving average of order one; a short window keeps the
    // off-block noise of the estimate well below the threshold
    let m0 = SUPPORT_TRUNCATION_LAG;
    let grid = default_theta_grid(m0);
    let truth = true_spectral_vma(&proc, &grid).map_err(|e| e.to_string())?;
    let true_support = support(&truth, 1e-12);
    let norms = truth.uniform_entry_norms();
    let signal = true_support.iter().map(|&(j, k)| norms[(j, k)]).fold(f64::INFINITY, f64::min);
    let lambda = signal / 3.0;
    let opts = AutocovOptions { center: false, normalization: Normalization::Full, allow_large_lag: false };
    let mut exact = 0;
    for run in 0..SUPPORT_RUNS {
        let panel = proc.simulate(n, 1000 + run as u64).map_err(|e| e.to_string())?;
        let acov = sample_autocov_with(&panel, m0, &opts).map_err(|e| e.to_string())?;
        let est = lag_window_spectral(&acov, LagWindowKernel::Bartlett, m0, &grid).map_err(|e| e.to_string())?;
        let thr = threshold_uniform(&est, lambda, ThresholdRule::Soft).map_err(|e| e.to_string())?;
        if thr.support() == true_support {
            exact += 1;
        }
    }
    let rate = exact as f64 / SUPPORT_RUNS as f64;
    check(
        rate >= SUPPORT_SUCCESS_RATE && signal >= 3.0 * lambda,
        format!(
            "{exact}/{SUPPORT_RUNS} exact recoveries, |support| {}, signal {signal:.3}, lambda {lambda:.3}",
            true_support.len()
        ),
    )
}

fn criterion_7() -> Outcome {
    let rep = verify_threshold_axioms(ThresholdRule::Soft, 0.5, AXIOM_INSTANCES, 16, 4, 7).map_err(|e| e.to_string())?;
    check(
        rep.passed() && rep.instances == AXIOM_INSTANCES,
        format!("{} instances, violations (i) {} (ii) {} (iii) {}", rep.instances, rep.violations[0], rep.violations[1], rep.violations[2]),
    )
}

fn criterion_8() -> Outcome {
    let mut rng = rng_from_seed(8);
    let mut affine_err: f64 = 0.0;
    let (mut fits, mut fallbacks) = (0, 0);
    for _ in 0..50 {
        let (c0, c1) = (standard_normal(&mut rng), standard_normal(&mut rng));
        let count = rng.random_range(20..=200);
        let u: Vec<f64> = (0..count).map(|_| rng.random::<f64>()).collect();
        let y: Vec<f64> = u.iter().map(|x| c0 + c1 * x).collect();
        let curve = ObservedCurve::new(u, y).unwrap();
        let b = 0.05 + 0.4 * rng.random::<f64>();
        for i in 0..=100 {
            let u0 = i as f64 / 100.0;
            let (v, kind) = local_linear_at(&curve, u0, b, SmoothingKernel::Epanechnikov, 1e10);
            // windows with fewer than two distinct points fall back to a
            // constant fit, which is not exact for a sloped line
            if kind != FitKind::LocalLinear {
                fallbacks += 1;
                continue;
            }
            fits += 1;
            affine_err = nmax(affine_err, (v - (c0 + c1 * u0)).abs());
        }
    }
    // equispaced noise-free design; bias at interior points scales with b²
    let m = 4000;
    let u: Vec<f64> = (0..m).map(|i| (i as f64 + 0.5) / m as f64).collect();
    let truth = |x: f64| (2.0 * PI * x).sin() + 0.5 * (4.0 * PI * x).cos();
    let curve = ObservedCurve::new(u.clone(), u.iter().map(|&x| truth(x)).collect()).unwrap();
    let mut ratios = Vec::new();
    // points where the second derivative of the truth is far from zero
    for &u0 in &[0.1, 0.25, 0.5, 0.75] {
        let b = 0.08;
        let bias = |bw: f64| local_linear_at(&curve, u0, bw, SmoothingKernel::Epanechnikov, 1e10).0 - truth(u0);
        ratios.push(bias(b) / bias(b / 2.0));
    }
    let ok = affine_err <= AFFINE_TOL && fits > 100 * fallbacks && ratios.iter().all(|r| (BIAS_RATIO_RANGE.0..=BIAS_RATIO_RANGE.1).contains(r));
    check(
        ok,
        format!(
            "affine max error {affine_err:.1e} over {fits} local-linear fits ({fallbacks} fallbacks skipped); bias ratios {}",
            ratios.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>().join(", ")
        ),
    )
}

fn criterion_9() -> Outcome {
    let r = 2;
    let basis = BasisSpec::fourier(r).unwrap();
    let mut details = Vec::new();
    let mut ok = true;

    // MA(2): couplings vanish exactly beyond the order
    let ma_coeffs: Vec<RealKernelMatrix> = (0..3)
        .map(|m| {
            RealKernelMatrix::from_block_matrix(
                2,
                r,
                RMatrix::from_fn(4, 4, |i, j| 0.5_f64.powi(m) * (1.0 + 0.1 * (i as f64 - j as f64))),
            )
            .unwrap()
        })
        .collect();
    let ma = VmaProcess::new(ma_coeffs, InnovationLaw::gaussian(r, 1.0), basis.clone(), 0).unwrap();
    let mut cfg = DependenceConfig::new(2.0, 0.5, 9);
    cfg.t_max = 10;
    cfg.replicates = 2000;
    let rep = mc_dependence(&ma, &cfg).map_err(|e| e.to_string())?;
    let ma_zero = rep.omega[3..].iter().all(|&w| w == 0.0) && rep.omega[..3].iter().all(|&w| w > 0.0);
    ok &= ma_zero && rep.phi <= rep.m;
    details.push(format!("MA(2) omega beyond order exactly zero: {ma_zero}"));

    // non-normal autoregression with distinct eigenvalues 0.6, 0.45, 0.3, 0.15
    let a = RMatrix::from_fn(4, 4, |i, j| match (i, j) {
        _ if i == j => 0.6 - 0.15 * i as f64,
        _ if j > i => 0.4,
        _ => 0.0,
    });
    let rho = spectral_radius(&a);
    let kernel = RealKernelMatrix::from_block_matrix(2, r, a).unwrap();
    let vfar = VfarProcess::new(kernel, InnovationLaw::gaussian(r, 1.0), basis, 0).unwrap().with_burn_in(5);
    let mut cfg = DependenceConfig::new(2.0, 0.5, 10);
    cfg.t_max = 20;
    cfg.replicates = VFAR_REPLICATES;
    let rep = mc_dependence(&vfar, &cfg).map_err(|e| e.to_string())?;
    let ratios: Vec<f64> = (15..20).map(|t| rep.omega[t + 1] / rep.omega[t]).collect();
    let worst = ratios.iter().map(|q| (q / rho - 1.0).abs()).fold(0.0, f64::max);
    ok &= worst <= VFAR_RATIO_TOL && rep.phi <= rep.m;
    details.push(format!("VFAR decay ratio vs spectral radius {rho:.3}: worst relative gap {worst:.4}"));

    // Φ ≤ 𝓜 on a further model: MA(1) with a single variable
    let single = VmaProcess::new(
        vec![RealKernelMatrix::from_block_matrix(1, 2, RMatrix::identity(2)).unwrap(); 2],
        InnovationLaw::gaussian(2, 1.0),
        BasisSpec::fourier(2).unwrap(),
        0,
    )
    .unwrap();
    let rep = mc_dependence(&single, &DependenceConfig { t_max: 5, replicates: 500, ..DependenceConfig::new(4.0, 1.0, 3) })
        .map_err(|e| e.to_string())?;
    ok &= rep.phi <= rep.m;
    details.push("Phi <= M on all models".to_string());
    check(ok, details.join("; "))
}

fn criterion_10() -> Outcome {
    let grid = uniform_theta_grid(INVERSE_TRANSFORM_FREQS);
    let w = 2.0 * PI / INVERSE_TRANSFORM_FREQS as f64;
    let mut worst: f64 = 0.0;

    // kernel level, small design
    let a = RMatrix::from_fn(5, 5, |i, j| if i == j { 0.5 } else { 0.1 * ((i + 2 * j) % 3) as f64 });
    let dgp = DesignDgp::with_matrix(10, 0.8, a, 0).map_err(|e| e.to_string())?;
    let spec = true_spectral_design(&dgp, &grid).map_err(|e| e.to_string())?;
    let sigma0 = true_autocov_design(&dgp, 0).map_err(|e| e.to_string())?;
    let mut acc = CMatrix::zeros(20, 20);
    for f in &spec.values {
        acc = &acc + &f.as_matrix().scaled(w);
    }
    worst = nmax(worst, (&acc - &sigma0.lag(0).unwrap().as_matrix().to_complex()).max_abs());

    // score level, full design p = 50
    let dgp = DesignDgp::new(10, 50, 0.8, 0).map_err(|e| e.to_string())?;
    let b = dgp.transition();
    let gamma0 = design_score_autocov(&dgp, 0).map_err(|e| e.to_string())?.remove(0);
    let mut acc = CMatrix::zeros(50, 50);
    for &t in &grid {
        acc = &acc + &design_score_spectral(&b, T6_VARIANCE, t).map_err(|e| e.to_string())?.scaled(w);
    }
    worst = nmax(worst, (&acc - &gamma0.to_complex()).max_abs());

    // moving average
    let ma = block_sparse_process(10, 5, 0.5, 0.7, 0);
    let spec = true_spectral_vma(&ma, &grid).map_err(|e| e.to_string())?;
    let sigma0 = true_autocov_vma(&ma, 0).map_err(|e| e.to_string())?;
    let mut acc = CMatrix::zeros(40, 40);
    for f in &spec.values {
        acc = &acc + &f.as_matrix().scaled(w);
    }
    worst = nmax(worst, (&acc - &sigma0.lag(0).unwrap().as_matrix().to_complex()).max_abs());

    check(worst <= INVERSE_TRANSFORM_TOL, format!("max deviation {worst:.2e} over three models"))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("oracle equivalence", criterion_1),
        ("structural invariants", criterion_2),
        ("fully observed error trend", criterion_3),
        ("discretely observed phase transition", criterion_4),
        ("dynamic FPCA error trend", criterion_5),
        ("sparse support recovery", criterion_6),
        ("threshold axioms", criterion_7),
        ("local-linear exactness and bias order", criterion_8),
        ("dependence measures", criterion_9),
        ("inverse transform of the true spectrum", criterion_10),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|v| v.parse().ok());
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        if only.is_some_and(|o| o != i + 1) {
            continue;
        }
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".to_string()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("criterion {:>2} PASS  {name} ({secs:.1}s): {d}", i + 1),
            Err(d) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name} ({secs:.1}s): {d}", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
