//! `hdfts` command line: one subcommand per estimator plus the study runner.
//! Every successful run prints a JSON manifest on stdout; failures print a
//! single JSON line on stderr and exit with 2 (input) or 3 (numerical).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use hdfts::config::{ExperimentConfig, LagRule, StudyKind};
use hdfts::formats::{
    load_observations, load_panel, load_spectral, read_json, save_observations, save_panel, save_spectral,
    write_json, write_support_csv,
};
use hdfts::study::{run_study, write_outputs};
use hdfts::{CliError, CliResult};
use hdfts_core::curves::FunctionalPanel;
use hdfts_core::dependence::{mc_dependence, DependenceConfig};
use hdfts_core::dfpca::{fit_dfpca, DfpcaOptions};
use hdfts_core::secondorder::{
    default_m0, default_theta_grid, lag_window_spectral, sample_autocov_with, uniform_theta_grid, AutocovOptions,
    LagWindowKernel, Normalization,
};
use hdfts_core::simulate::{simulate_design, DesignDgp, VfarProcess, VmaProcess};
use hdfts_core::smoothing::{bandwidth_for, sample_discrete, LocalLinearSmoother, SmootherConfig, SmoothingKernel};
use hdfts_core::sparse::{median_lambda, threshold_fixed, threshold_uniform, ThresholdRule};
use serde::Deserialize;
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "hdfts", version, about = "Second-order analysis of high-dimensional functional time series")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelArg {
    Rectangular,
    Bartlett,
    Parzen,
    FlatTop,
}

impl From<KernelArg> for LagWindowKernel {
    fn from(k: KernelArg) -> Self {
        match k {
            KernelArg::Rectangular => Self::Rectangular,
            KernelArg::Bartlett => Self::Bartlett,
            KernelArg::Parzen => Self::Parzen,
            KernelArg::FlatTop => Self::FlatTop,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum NormArg {
    LagAdjusted,
    Full,
}

impl From<NormArg> for Normalization {
    fn from(n: NormArg) -> Self {
        match n {
            NormArg::LagAdjusted => Self::LagAdjusted,
            NormArg::Full => Self::Full,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum RuleArg {
    Soft,
    Hard,
}

#[derive(Clone, Copy, ValueEnum)]
enum SmoothKernelArg {
    Epanechnikov,
    Biweight,
    Triangular,
}

impl From<SmoothKernelArg> for SmoothingKernel {
    fn from(k: SmoothKernelArg) -> Self {
        match k {
            SmoothKernelArg::Epanechnikov => Self::Epanechnikov,
            SmoothKernelArg::Biweight => Self::Biweight,
            SmoothKernelArg::Triangular => Self::Triangular,
        }
    }
}

#[derive(clap::Args)]
struct AutocovArgs {
    /// Subtract each variable's mean curve first.
    #[arg(long)]
    center: bool,
    #[arg(long, value_enum, default_value = "lag-adjusted")]
    normalization: NormArg,
}

impl AutocovArgs {
    fn options(&self) -> AutocovOptions {
        AutocovOptions { center: self.center, normalization: self.normalization.into(), allow_large_lag: false }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the score-VAR design and save the panel (.csv, .json or binary).
    Simulate {
        #[arg(long)]
        n: usize,
        /// Number of variables, a multiple of 50.
        #[arg(long)]
        p: usize,
        #[arg(long, default_value_t = 0.6)]
        rho: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Also sample this many noisy points per curve.
        #[arg(long, requires = "observations")]
        points: Option<usize>,
        #[arg(long, default_value_t = hdfts_core::smoothing::DEFAULT_NOISE_SD)]
        noise_sd: f64,
        /// Output file for the sampled observations.
        #[arg(long)]
        observations: Option<PathBuf>,
    },
    /// Sample autocovariances for lags 0..=H, written as JSON.
    Cov {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        lags: usize,
        #[command(flatten)]
        autocov: AutocovArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Lag-window spectral density estimate.
    Spec {
        #[arg(long)]
        input: PathBuf,
        /// Truncation lag or `auto` for ⌈ln n⌉.
        #[arg(long, default_value = "auto")]
        m0: String,
        #[arg(long, value_enum, default_value = "rectangular")]
        kernel: KernelArg,
        /// Number of uniform frequencies in [0, 2π); default is the grid πh/(4m₀).
        #[arg(long)]
        frequencies: Option<usize>,
        #[command(flatten)]
        autocov: AutocovArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Dynamic functional principal components.
    Dfpca {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = hdfts_core::dfpca::DEFAULT_COMPONENTS)]
        components: usize,
        /// Filter lag or `auto` for ⌈n^{1/4}⌉.
        #[arg(long, default_value = "auto")]
        filter_lag: String,
        #[arg(long, default_value = "auto")]
        m0: String,
        #[arg(long, value_enum, default_value = "rectangular")]
        kernel: KernelArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Threshold a spectral density estimate entrywise.
    Threshold {
        #[arg(long)]
        input: PathBuf,
        /// Threshold level; 0 returns the input.
        #[arg(long, conflicts_with = "lambda_c")]
        lambda: Option<f64>,
        /// Level as a multiple of the median uniform entry norm.
        #[arg(long)]
        lambda_c: Option<f64>,
        #[arg(long, value_enum, default_value = "soft")]
        rule: RuleArg,
        /// Threshold at this grid frequency only instead of uniformly over θ.
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long)]
        out: PathBuf,
        /// CSV of retained (j, k) pairs.
        #[arg(long)]
        support: Option<PathBuf>,
    },
    /// Local-linear reconstruction of discretely observed curves.
    Smooth {
        #[arg(long)]
        input: PathBuf,
        /// Bandwidth; default is c (ln p / T)^{1/5} with T the smallest point count.
        #[arg(long, conflicts_with = "multiplier")]
        bandwidth: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        multiplier: f64,
        #[arg(long, value_enum, default_value = "epanechnikov")]
        kernel: SmoothKernelArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Monte-Carlo dependence measures of a process given as JSON
    /// (`{"vma": {...}}` or `{"vfar": {...}}`).
    Depend {
        #[arg(long)]
        process: PathBuf,
        #[arg(long, default_value_t = 2.0)]
        q: f64,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        #[arg(long, default_value_t = 20)]
        t_max: usize,
        #[arg(long, default_value_t = 1000)]
        replicates: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a simulation study from a TOML config or a built-in preset.
    Study {
        /// fully-observed | discretely-observed | dfpca
        #[arg(long, conflicts_with = "config")]
        preset: Option<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Use the full-size grids instead of the desk-scale ones.
        #[arg(long)]
        full_scale: bool,
        #[arg(long)]
        replicates: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print the resolved config as TOML and exit.
        #[arg(long)]
        dump_config: bool,
    },
}

#[derive(Deserialize)]
#[serde(rename_all = "snake_case")]
enum ProcessFile {
    Vma(VmaProcess),
    Vfar(VfarProcess),
}

fn lag_rule(s: &str, n: usize, auto: fn(usize) -> usize) -> CliResult<usize> {
    Ok(LagRule::parse(s)?.resolve(|| auto(n)))
}

fn panel_info(panel: &FunctionalPanel) -> Value {
    json!({"n": panel.n(), "p": panel.p(), "r": panel.r()})
}

fn manifest(command: &str, seed: Option<u64>, parameters: Value, outputs: &[&Path]) -> Value {
    json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "core_version": hdfts_core::VERSION,
        "seed": seed,
        "parameters": parameters,
        "outputs": outputs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
    })
}

fn run(cmd: Command) -> CliResult<Value> {
    match cmd {
        Command::Simulate { n, p, rho, seed, out, points, noise_sd, observations } => {
            let dgp = DesignDgp::new(n, p, rho, seed)?;
            let panel = simulate_design(&dgp)?;
            save_panel(&out, &panel)?;
            let mut outputs = vec![out.as_path()];
            if let (Some(count), Some(path)) = (points, observations.as_deref()) {
                let obs = sample_discrete(&panel, count, noise_sd, hdfts_core::rng::derive_seed(seed, 1))?;
                save_observations(path, &obs)?;
                outputs.push(path);
            }
            let params = json!({"n": n, "p": p, "rho": rho, "burn_in": dgp.burn_in, "points": points, "noise_sd": noise_sd});
            Ok(manifest("simulate", Some(seed), params, &outputs))
        }
        Command::Cov { input, lags, autocov, out } => {
            let panel = load_panel(&input)?;
            let acov = sample_autocov_with(&panel, lags, &autocov.options())?;
            write_json(&out, &acov)?;
            let params = json!({"input": input, "lags": lags, "center": autocov.center, "panel": panel_info(&panel)});
            Ok(manifest("cov", None, params, &[&out]))
        }
        Command::Spec { input, m0, kernel, frequencies, autocov, out } => {
            let panel = load_panel(&input)?;
            let m0 = lag_rule(&m0, panel.n(), default_m0)?;
            let grid = match frequencies {
                Some(k) => uniform_theta_grid(k),
                None => default_theta_grid(m0),
            };
            let acov = sample_autocov_with(&panel, m0, &autocov.options())?;
            let kernel: LagWindowKernel = kernel.into();
            let spec = lag_window_spectral(&acov, kernel, m0, &grid)?;
            save_spectral(&out, &spec)?;
            let params = json!({
                "input": input, "m0": m0, "kernel": kernel.name(), "frequencies": grid.len(),
                "panel": panel_info(&panel),
            });
            Ok(manifest("spec", None, params, &[&out]))
        }
        Command::Dfpca { input, components, filter_lag, m0, kernel, out } => {
            let panel = load_panel(&input)?;
            let n = panel.n();
            let opts = DfpcaOptions {
                components,
                filter_lag: Some(lag_rule(&filter_lag, n, hdfts_core::dfpca::default_filter_lag)?),
                m0: Some(lag_rule(&m0, n, default_m0)?),
                kernel: kernel.into(),
                ..DfpcaOptions::default()
            };
            let model = fit_dfpca(&panel, &opts)?;
            write_json(&out, &model)?;
            let params = json!({
                "input": input, "components": model.components, "filter_lag": model.filter_lag, "m0": model.m0,
                "kernel": model.kernel.name(), "delta": model.eigengaps.delta,
                "degenerate_gaps": model.eigengaps.degenerate, "max_imag_score": model.scores.max_imag,
                "panel": panel_info(&panel),
            });
            Ok(manifest("dfpca", None, params, &[&out]))
        }
        Command::Threshold { input, lambda, lambda_c, rule, theta, out, support } => {
            let spec = load_spectral(&input)?;
            let lambda = match (lambda, lambda_c) {
                (Some(l), _) => l,
                (None, Some(c)) => median_lambda(&spec, c, None)?,
                (None, None) => return Err(CliError::Config("one of --lambda or --lambda-c is required".into())),
            };
            let rule = match rule {
                RuleArg::Soft => ThresholdRule::Soft,
                RuleArg::Hard => ThresholdRule::Hard,
            };
            let thr = match theta {
                Some(t) => threshold_fixed(&spec, t, lambda, rule)?,
                None => threshold_uniform(&spec, lambda, rule)?,
            };
            // level 0 keeps every entry untouched, so write the input back exactly
            let est = if lambda == 0.0 && theta.is_none() { spec.clone() } else { thr.estimate() };
            save_spectral(&out, &est)?;
            let mut outputs = vec![out.as_path()];
            if let Some(path) = support.as_deref() {
                write_support_csv(path, &thr.support())?;
                outputs.push(path);
            }
            let params = json!({
                "input": input, "lambda": lambda, "rule": format!("{rule:?}").to_lowercase(), "theta": theta,
                "kept": thr.kept_count(), "p": thr.p(),
            });
            Ok(manifest("threshold", None, params, &outputs))
        }
        Command::Smooth { input, bandwidth, multiplier, kernel, out } => {
            let obs = load_observations(&input)?;
            let min_count = obs.curves.iter().map(|c| c.len()).min().unwrap_or(0);
            let b = match bandwidth {
                Some(b) => b,
                None if obs.p >= 2 && min_count >= 2 => bandwidth_for(multiplier, min_count, (obs.p as f64).ln()),
                None => return Err(CliError::Config("automatic bandwidth needs p ≥ 2 and T ≥ 2; pass --bandwidth".into())),
            };
            let mut cfg = SmootherConfig::uniform(obs.p, b)?;
            cfg.kernel = kernel.into();
            let rec = LocalLinearSmoother::new(cfg, hdfts_core::basis::BasisSpec::fourier4())?.reconstruct(&obs)?;
            save_panel(&out, &rec.panel)?;
            let params = json!({
                "input": input, "bandwidth": b, "n": obs.n, "p": obs.p, "min_points": min_count,
                "local_constant_fallbacks": rec.fallbacks.local_constant, "nearest_fallbacks": rec.fallbacks.nearest,
            });
            Ok(manifest("smooth", obs.seed, params, &[&out]))
        }
        Command::Depend { process, q, alpha, t_max, replicates, seed, out } => {
            let proc: ProcessFile = read_json(&process)?;
            let mut cfg = DependenceConfig::new(q, alpha, seed);
            cfg.t_max = t_max;
            cfg.replicates = replicates;
            let report = match &proc {
                ProcessFile::Vma(p) => mc_dependence(p, &cfg)?,
                ProcessFile::Vfar(p) => {
                    p.check_stable()?;
                    mc_dependence(p, &cfg)?
                }
            };
            write_json(&out, &report)?;
            let params = json!({
                "process": process, "q": q, "alpha": alpha, "t_max": t_max, "replicates": replicates,
                "phi": report.phi, "m": report.m, "tail_flag": report.tail_flag,
            });
            Ok(manifest("depend", Some(seed), params, &[&out]))
        }
        Command::Study { preset, config, full_scale, replicates, seed, out, dump_config } => {
            let mut cfg = match (preset, config) {
                (_, Some(path)) => ExperimentConfig::load(&path)?,
                (Some(name), None) => ExperimentConfig::preset(StudyKind::parse(&name)?, full_scale)?,
                (None, None) => return Err(CliError::Config("one of --preset or --config is required".into())),
            };
            if let Some(r) = replicates {
                cfg.replicates = r;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(o) = out {
                cfg.output_dir = o;
            }
            cfg.validate()?;
            if dump_config {
                print!("{}", cfg.to_toml_string()?);
                return Ok(Value::Null);
            }
            let outcome = run_study(&cfg)?;
            let files = write_outputs(&cfg.output_dir, &cfg, &outcome)?;
            let failures: usize = outcome.summary.settings.iter().map(|s| s.failures).sum();
            let params = json!({
                "study": cfg.study.name(), "replicates": cfg.replicates, "settings": outcome.summary.settings.len(),
                "failed_replicates": failures,
            });
            let refs: Vec<&Path> = files.iter().map(PathBuf::as_path).collect();
            Ok(manifest("study", Some(cfg.seed), params, &refs))
        }
    }
}

fn fail(kind: &str, message: &str, code: u8) -> ExitCode {
    eprintln!("{}", json!({"error": kind, "message": message}));
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            let msg = e.kind().to_string();
            let detail = e.to_string();
            let line = detail.lines().next().unwrap_or(&msg).trim_start_matches("error: ");
            return fail("usage", line, 2);
        }
    };
    match run(cli.command) {
        Ok(Value::Null) => ExitCode::SUCCESS,
        Ok(m) => {
            println!("{m}");
            ExitCode::SUCCESS
        }
        Err(e) => fail(e.kind(), &e.to_string().replace('\n', " "), e.exit_code() as u8),
    }
}
