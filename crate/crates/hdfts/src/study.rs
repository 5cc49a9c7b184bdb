//! Monte-Carlo study runner: one CSV row per (setting, replicate) and a
//! JSON summary with medians and quartiles per setting.
//!
//! Ground truth is kept at score level. For the simulation design every
//! kernel `Σ^(h)_jk` and `f_θ,jk` is `diag_l(c_l² m_jk)` for a `p × p` score
//! matrix `m`, so errors are computed block by block against that matrix
//! without expanding it.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use hdfts_core::curves::{FunctionalPanel, KernelMatrix};
use hdfts_core::dfpca::{eigen_errors, eigendecompose_diagonals, eigengap_report, EigengapReport, FrequencyEigen};
use hdfts_core::linalg::{CMatrix, Matrix, RMatrix, Scalar};
use hdfts_core::rng::{derive_seed, replicate_seed};
use hdfts_core::secondorder::{
    default_theta_grid, design_score_autocov, design_score_spectral, lag_window_diagonal, sample_autocov_diagonal,
    sample_autocov_with, true_spectral_design, AutocovOptions, SpectralEvaluator,
};
use hdfts_core::simulate::{design_score_variances, simulate_design, DesignDgp, DESIGN_BASIS, T6_VARIANCE};
use hdfts_core::smoothing::{bandwidth_grid, sample_discrete, LocalLinearSmoother, SmootherConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Metric};
use crate::error::{CliError, CliResult};

pub const RESULTS_FILE: &str = "results.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const SCHEMA_FILE: &str = "schema.json";
pub const CONFIG_FILE: &str = "config.toml";

/// One point of the parameter grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Setting {
    pub index: usize,
    pub n: usize,
    pub p: usize,
    pub rho: f64,
    pub t_count: Option<usize>,
    /// Index of `(n, p, rho)` alone. Replicates share their simulated panel
    /// across `t_count` values through it.
    pub panel_index: usize,
}

/// Settings in grid order: `n`, then `p`, then `rho`, then `t_count`.
pub fn enumerate_settings(cfg: &ExperimentConfig) -> Vec<Setting> {
    let counts: Vec<Option<usize>> = if cfg.metrics().contains(&Metric::SmoothedSpectral) {
        cfg.grid.t_count.iter().copied().map(Some).collect()
    } else {
        vec![None]
    };
    let mut out = Vec::new();
    let mut panel_index = 0;
    for &n in &cfg.grid.n {
        for &p in &cfg.grid.p {
            for &rho in &cfg.grid.rho {
                for &t_count in &counts {
                    out.push(Setting { index: out.len(), n, p, rho, t_count, panel_index });
                }
                panel_index += 1;
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub setting: Setting,
    pub replicate: usize,
    pub seed: u64,
    pub metrics: BTreeMap<Metric, f64>,
    /// Bandwidth achieving the smoothed-spectral minimum.
    pub best_bandwidth: Option<f64>,
    pub status: RowStatus,
    pub message: String,
}

/// Quartiles of one metric within one setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub count: usize,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettingSummary {
    pub setting: Setting,
    pub replicates: usize,
    pub failures: usize,
    pub metrics: BTreeMap<Metric, MetricSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySummary {
    pub study: String,
    pub seed: u64,
    pub replicates: usize,
    pub settings: Vec<SettingSummary>,
}

impl StudySummary {
    pub fn find(&self, n: usize, p: usize, rho: f64, t_count: Option<usize>) -> Option<&SettingSummary> {
        self.settings.iter().find(|s| {
            s.setting.n == n && s.setting.p == p && s.setting.rho == rho && s.setting.t_count == t_count
        })
    }

    pub fn median(&self, n: usize, p: usize, rho: f64, t_count: Option<usize>, metric: Metric) -> Option<f64> {
        self.find(n, p, rho, t_count)?.metrics.get(&metric).map(|m| m.median)
    }
}

#[derive(Debug, Clone)]
pub struct StudyOutcome {
    pub rows: Vec<Row>,
    pub summary: StudySummary,
}

/// Population quantities of one `(n, p, rho)` setting.
struct Truth {
    m0: usize,
    theta_grid: Vec<f64>,
    /// `Γ₁ = E ξ_t ξ_{t+1}ᵀ` on unscaled scores.
    lag_one: RMatrix,
    /// Score spectral density on `theta_grid`.
    spectra: Vec<CMatrix>,
    eigen: Option<(FrequencyEigen, EigengapReport)>,
}

fn build_truth(cfg: &ExperimentConfig, s: &Setting, metrics: &[Metric]) -> CliResult<Truth> {
    let dgp = DesignDgp::new(s.n, s.p, s.rho, 0)?;
    let m0 = cfg.estimator.m0_for(s.n);
    let theta_grid = default_theta_grid(m0);
    let lag_one = design_score_autocov(&dgp, 1)?.pop().expect("two lags");
    let b = dgp.transition();
    let spectra = theta_grid
        .iter()
        .map(|&t| design_score_spectral(&b, T6_VARIANCE, t))
        .collect::<hdfts_core::Result<Vec<_>>>()?;
    let eigen = if metrics.iter().any(|m| matches!(m, Metric::Eigenvalues | Metric::Eigenfunctions)) {
        let full = true_spectral_design(&dgp, &theta_grid)?;
        let eig = eigendecompose_diagonals(&full, cfg.estimator.components)?;
        let gaps = eigengap_report(&eig.values, cfg.estimator.components);
        if let Some(m) = gaps.degenerate.iter().position(|&d| d) {
            return Err(CliError::Config(format!("true eigengap of component {} is degenerate", m + 1)));
        }
        Some((eig, gaps))
    } else {
        None
    };
    Ok(Truth { m0, theta_grid, lag_one, spectra, eigen })
}

/// `max_{j,k} ‖K_jk − diag_l(c_l² m_jk)‖_S`.
pub fn design_block_error<T: Scalar>(est: &KernelMatrix<T>, scores: &Matrix<T>) -> f64 {
    let c2 = design_score_variances();
    let (p, r) = (est.p(), est.r());
    debug_assert_eq!(r, DESIGN_BASIS);
    let mut worst: f64 = 0.0;
    for j in 0..p {
        for k in 0..p {
            let mut ss = 0.0;
            for a in 0..r {
                for b in 0..r {
                    let mut d = est.get(j, k, a, b);
                    if a == b {
                        d = d - scores[(j, k)].scale(c2[a]);
                    }
                    ss += d.abs_sqr();
                }
            }
            worst = worst.max(ss.sqrt());
        }
    }
    worst
}

fn acov_options(cfg: &ExperimentConfig) -> AutocovOptions {
    AutocovOptions { center: false, normalization: cfg.estimator.normalization, allow_large_lag: false }
}

/// `sup_θ ‖f̂_θ − f_θ‖_{S,max}` over the truth grid, one frequency at a time.
fn spectral_error(panel: &FunctionalPanel, cfg: &ExperimentConfig, truth: &Truth) -> CliResult<f64> {
    let acov = sample_autocov_with(panel, truth.m0, &acov_options(cfg))?;
    let eval = SpectralEvaluator::new(&acov, cfg.estimator.kernel, truth.m0)?;
    Ok(truth
        .theta_grid
        .iter()
        .zip(&truth.spectra)
        .map(|(&t, f)| design_block_error(&eval.at(t), f))
        .fold(0.0, f64::max))
}

struct Evaluated {
    metrics: BTreeMap<Metric, f64>,
    best_bandwidth: Option<f64>,
}

fn evaluate(cfg: &ExperimentConfig, s: &Setting, seed: u64, truth: &Truth, metrics: &[Metric]) -> CliResult<Evaluated> {
    let dgp = DesignDgp::new(s.n, s.p, s.rho, seed)?;
    let panel = simulate_design(&dgp)?;
    let mut out = BTreeMap::new();
    let mut best_bandwidth = None;
    for &metric in metrics {
        match metric {
            Metric::Autocov => {
                let acov = sample_autocov_with(&panel, 1, &acov_options(cfg))?;
                out.insert(metric, design_block_error(acov.lag(1)?, &truth.lag_one));
            }
            Metric::Spectral => {
                out.insert(metric, spectral_error(&panel, cfg, truth)?);
            }
            Metric::SmoothedSpectral => {
                let count = s.t_count.ok_or_else(|| CliError::Config("t_count missing".into()))?;
                let obs = sample_discrete(&panel, count, cfg.estimator.noise_sd, derive_seed(seed, 1))?;
                let mut best: Option<(f64, f64)> = None;
                for b in bandwidth_grid(count, s.p, &cfg.estimator.bandwidth_multipliers)? {
                    let mut sc = SmootherConfig::uniform(s.p, b)?;
                    sc.kernel = cfg.estimator.smoothing_kernel;
                    let rec = LocalLinearSmoother::new(sc, panel.basis().clone())?.reconstruct(&obs)?;
                    let err = spectral_error(&rec.panel, cfg, truth)?;
                    if best.is_none_or(|(e, _)| err < e) {
                        best = Some((err, b));
                    }
                }
                let (err, b) = best.expect("nonempty bandwidth grid");
                out.insert(metric, err);
                best_bandwidth = Some(b);
            }
            Metric::Eigenvalues | Metric::Eigenfunctions => {
                if out.contains_key(&metric) {
                    continue;
                }
                let (true_eig, gaps) = truth.eigen.as_ref().expect("eigen truth built for eigen metrics");
                let diag = sample_autocov_diagonal(&panel, truth.m0, &acov_options(cfg))?;
                let spec = lag_window_diagonal(&diag, cfg.estimator.kernel, truth.m0, &truth.theta_grid)?;
                let est = eigendecompose_diagonals(&spec, cfg.estimator.components)?;
                let (lam, vec) = eigen_errors(&est, true_eig, &gaps.delta)?;
                if metrics.contains(&Metric::Eigenvalues) {
                    out.insert(Metric::Eigenvalues, lam);
                }
                if metrics.contains(&Metric::Eigenfunctions) {
                    out.insert(Metric::Eigenfunctions, vec);
                }
            }
        }
    }
    if let Some((m, v)) = out.iter().find(|(_, v)| !v.is_finite()) {
        return Err(CliError::Core(hdfts_core::Error::NonConvergence(format!("{m:?} is {v}"))));
    }
    Ok(Evaluated { metrics: out, best_bandwidth })
}

/// Run every replicate of every setting. Replicates run on the rayon pool;
/// rows come back in (setting, replicate) order regardless of scheduling.
/// A failing replicate yields a `failed` row and the run continues.
pub fn run_study(cfg: &ExperimentConfig) -> CliResult<StudyOutcome> {
    cfg.validate()?;
    let metrics = cfg.metrics();
    let settings = enumerate_settings(cfg);
    let truths = settings
        .par_iter()
        .map(|s| build_truth(cfg, s, &metrics))
        .collect::<CliResult<Vec<Truth>>>()?;
    let jobs: Vec<(usize, usize)> =
        (0..settings.len()).flat_map(|i| (0..cfg.replicates).map(move |r| (i, r))).collect();
    let rows: Vec<Row> = jobs
        .par_iter()
        .map(|&(i, rep)| {
            let s = settings[i];
            let seed = replicate_seed(cfg.seed, s.panel_index as u64, rep as u64);
            match evaluate(cfg, &s, seed, &truths[i], &metrics) {
                Ok(ev) => Row {
                    setting: s,
                    replicate: rep,
                    seed,
                    metrics: ev.metrics,
                    best_bandwidth: ev.best_bandwidth,
                    status: RowStatus::Ok,
                    message: String::new(),
                },
                Err(e) => Row {
                    setting: s,
                    replicate: rep,
                    seed,
                    metrics: BTreeMap::new(),
                    best_bandwidth: None,
                    status: RowStatus::Failed,
                    message: e.to_string(),
                },
            }
        })
        .collect();
    let summary = summarize(cfg, &settings, &metrics, &rows);
    Ok(StudyOutcome { rows, summary })
}

/// Linear-interpolation quantile of sorted data (`q ∈ [0, 1]`).
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn metric_summary(values: &[f64]) -> Option<MetricSummary> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Some(MetricSummary {
        count: v.len(),
        median: quantile(&v, 0.5),
        q1: quantile(&v, 0.25),
        q3: quantile(&v, 0.75),
        min: v[0],
        max: v[v.len() - 1],
    })
}

pub fn summarize(cfg: &ExperimentConfig, settings: &[Setting], metrics: &[Metric], rows: &[Row]) -> StudySummary {
    let per_setting = settings
        .iter()
        .map(|s| {
            let mine: Vec<&Row> = rows.iter().filter(|r| r.setting.index == s.index).collect();
            let failures = mine.iter().filter(|r| r.status == RowStatus::Failed).count();
            let summaries = metrics
                .iter()
                .filter_map(|&m| {
                    let vals: Vec<f64> = mine.iter().filter_map(|r| r.metrics.get(&m).copied()).collect();
                    metric_summary(&vals).map(|sum| (m, sum))
                })
                .collect();
            SettingSummary { setting: *s, replicates: mine.len(), failures, metrics: summaries }
        })
        .collect();
    StudySummary { study: cfg.study.name().to_string(), seed: cfg.seed, replicates: cfg.replicates, settings: per_setting }
}

/// Fixed leading columns of the results CSV; metric columns follow, then
/// `best_bandwidth`, `status` and `message`.
pub const LEADING_COLUMNS: [&str; 7] = ["setting", "replicate", "n", "p", "rho", "t_count", "seed"];

pub fn metric_column(m: Metric) -> &'static str {
    match m {
        Metric::Autocov => "max_err_autocov",
        Metric::Spectral => "max_err_spectral",
        Metric::SmoothedSpectral => "max_err_smoothed_spectral",
        Metric::Eigenvalues => "max_err_eigenvalues",
        Metric::Eigenfunctions => "max_err_eigenfunctions",
    }
}

pub fn metric_from_column(name: &str) -> Option<Metric> {
    [Metric::Autocov, Metric::Spectral, Metric::SmoothedSpectral, Metric::Eigenvalues, Metric::Eigenfunctions]
        .into_iter()
        .find(|&m| metric_column(m) == name)
}

fn metric_description(m: Metric) -> &'static str {
    match m {
        Metric::Autocov => "max over (j,k) of the Hilbert-Schmidt norm of the lag-1 autocovariance error",
        Metric::Spectral => "sup over the frequency grid of the max-entry Hilbert-Schmidt spectral density error",
        Metric::SmoothedSpectral => {
            "spectral density error from local-linear reconstructed curves, minimized over the bandwidth grid"
        }
        Metric::Eigenvalues => "max over variables, components and frequencies of the eigenvalue error",
        Metric::Eigenfunctions => "max eigenfunction error after phase alignment, divided by the eigengap constant",
    }
}

pub fn header(metrics: &[Metric]) -> Vec<String> {
    let mut h: Vec<String> = LEADING_COLUMNS.iter().map(|s| s.to_string()).collect();
    h.extend(metrics.iter().map(|&m| metric_column(m).to_string()));
    h.extend(["best_bandwidth", "status", "message"].map(String::from));
    h
}

fn fmt_opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

pub fn write_results_csv<W: std::io::Write>(w: W, metrics: &[Metric], rows: &[Row]) -> CliResult<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(header(metrics))?;
    for r in rows {
        let s = &r.setting;
        let mut rec = vec![
            s.index.to_string(),
            r.replicate.to_string(),
            s.n.to_string(),
            s.p.to_string(),
            s.rho.to_string(),
            fmt_opt(s.t_count),
            r.seed.to_string(),
        ];
        rec.extend(metrics.iter().map(|m| fmt_opt(r.metrics.get(m))));
        rec.push(fmt_opt(r.best_bandwidth));
        rec.push(match r.status {
            RowStatus::Ok => "ok".into(),
            RowStatus::Failed => "failed".into(),
        });
        rec.push(r.message.clone());
        out.write_record(&rec)?;
    }
    out.flush().map_err(|e| CliError::io("results csv", e))?;
    Ok(())
}

/// Parse a results CSV back into rows.
pub fn read_results_csv<R: std::io::Read>(r: R) -> CliResult<(Vec<Metric>, Vec<Row>)> {
    let mut rdr = csv::Reader::from_reader(r);
    let head = rdr.headers()?.clone();
    let names: Vec<&str> = head.iter().collect();
    let fixed = LEADING_COLUMNS.len();
    if names.len() < fixed + 3 || names[..fixed] != LEADING_COLUMNS {
        return Err(CliError::format("results csv", "unexpected header"));
    }
    let metrics = names[fixed..names.len() - 3]
        .iter()
        .map(|n| metric_from_column(n).ok_or_else(|| CliError::format("results csv", format!("unknown column {n}"))))
        .collect::<CliResult<Vec<_>>>()?;
    let bad = |m: String| CliError::format("results csv", m);
    let num = |s: &str| -> CliResult<f64> { s.parse().map_err(|_| bad(format!("bad number '{s}'"))) };
    let int = |s: &str| -> CliResult<usize> { s.parse().map_err(|_| bad(format!("bad integer '{s}'"))) };
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let f: Vec<&str> = rec.iter().collect();
        if f.len() != names.len() {
            return Err(bad("ragged row".into()));
        }
        let t_count = if f[5].is_empty() { None } else { Some(int(f[5])?) };
        let setting = Setting { index: int(f[0])?, n: int(f[2])?, p: int(f[3])?, rho: num(f[4])?, t_count, panel_index: 0 };
        let mut values = BTreeMap::new();
        for (k, &m) in metrics.iter().enumerate() {
            let cell = f[fixed + k];
            if !cell.is_empty() {
                values.insert(m, num(cell)?);
            }
        }
        let tail = &f[names.len() - 3..];
        let status = match tail[1] {
            "ok" => RowStatus::Ok,
            "failed" => RowStatus::Failed,
            other => return Err(bad(format!("bad status '{other}'"))),
        };
        rows.push(Row {
            setting,
            replicate: int(f[1])?,
            seed: f[6].parse().map_err(|_| bad(format!("bad seed '{}'", f[6])))?,
            metrics: values,
            best_bandwidth: if tail[0].is_empty() { None } else { Some(num(tail[0])?) },
            status,
            message: tail[2].to_string(),
        });
    }
    Ok((metrics, rows))
}

/// Column documentation for the results CSV.
pub fn schema(metrics: &[Metric]) -> serde_json::Value {
    let mut cols = vec![
        ("setting", "integer", "index of the parameter combination in grid order"),
        ("replicate", "integer", "replicate index within the setting"),
        ("n", "integer", "sample size"),
        ("p", "integer", "number of functional variables"),
        ("rho", "float", "scale of the score transition matrix"),
        ("t_count", "integer or empty", "observation points per curve; empty when curves are fully observed"),
        ("seed", "integer", "seed of the simulated panel"),
    ];
    for &m in metrics {
        cols.push((metric_column(m), "float or empty", metric_description(m)));
    }
    cols.push(("best_bandwidth", "float or empty", "bandwidth attaining the smoothed-spectral minimum"));
    cols.push(("status", "ok | failed", "whether the replicate completed"));
    cols.push(("message", "string", "error message for failed replicates"));
    serde_json::json!({
        "file": RESULTS_FILE,
        "columns": cols
            .into_iter()
            .map(|(name, ty, desc)| serde_json::json!({"name": name, "type": ty, "description": desc}))
            .collect::<Vec<_>>(),
    })
}

/// Write results, summary, schema and the resolved config to `dir`.
pub fn write_outputs(dir: &Path, cfg: &ExperimentConfig, outcome: &StudyOutcome) -> CliResult<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let metrics = cfg.metrics();
    let results = dir.join(RESULTS_FILE);
    let file = fs::File::create(&results).map_err(|e| CliError::io(&results, e))?;
    write_results_csv(std::io::BufWriter::new(file), &metrics, &outcome.rows)?;
    let summary = dir.join(SUMMARY_FILE);
    crate::formats::write_json(&summary, &outcome.summary)?;
    let schema_path = dir.join(SCHEMA_FILE);
    crate::formats::write_json(&schema_path, &schema(&metrics))?;
    let cfg_path = dir.join(CONFIG_FILE);
    fs::write(&cfg_path, cfg.to_toml_string()?).map_err(|e| CliError::io(&cfg_path, e))?;
    Ok(vec![results, summary, schema_path, cfg_path])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::StudyKind;

    #[test]
    fn quantiles_interpolate() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.5), 2.5);
        assert_eq!(quantile(&v, 0.25), 1.75);
        assert_eq!(quantile(&[7.0], 0.75), 7.0);
    }

    #[test]
    fn settings_share_panels_across_counts() {
        let cfg = ExperimentConfig::preset(StudyKind::DiscretelyObserved, false).unwrap();
        let s = enumerate_settings(&cfg);
        assert_eq!(s.len(), 3);
        assert!(s.iter().all(|x| x.panel_index == 0));
        let cfg = ExperimentConfig::preset(StudyKind::FullyObserved, false).unwrap();
        let s = enumerate_settings(&cfg);
        assert_eq!(s.len(), 6);
        assert_eq!(s.iter().map(|x| x.panel_index).collect::<Vec<_>>(), vec![0, 1, 2, 3, 4, 5]);
    }

    #[test]
    fn block_error_matches_expanded_truth() {
        let dgp = DesignDgp::with_matrix(10, 0.5, RMatrix::from_fn(3, 3, |i, j| 0.2 + 0.1 * (i + 2 * j) as f64), 0)
            .unwrap();
        let truth = hdfts_core::secondorder::true_autocov_design(&dgp, 1).unwrap();
        let scores = design_score_autocov(&dgp, 1).unwrap();
        assert!(design_block_error(truth.lag(1).unwrap(), &scores[1]) < 1e-14);
        let mut est = truth.lag(1).unwrap().clone();
        est.set(2, 1, 0, 3, 0.5);
        assert!((design_block_error(&est, &scores[1]) - 0.5).abs() < 1e-14);
    }
}
