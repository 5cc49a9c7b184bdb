//! Experiment configuration, read from TOML.

use std::fmt;
use std::path::{Path, PathBuf};

use hdfts_core::dfpca::{default_filter_lag, DEFAULT_COMPONENTS};
use hdfts_core::secondorder::{default_m0, LagWindowKernel, Normalization};
use hdfts_core::smoothing::{SmoothingKernel, DEFAULT_BANDWIDTH_MULTIPLIERS, DEFAULT_NOISE_SD};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyKind {
    FullyObserved,
    DiscretelyObserved,
    Dfpca,
    Custom,
}

impl StudyKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::FullyObserved => "fully_observed",
            Self::DiscretelyObserved => "discretely_observed",
            Self::Dfpca => "dfpca",
            Self::Custom => "custom",
        }
    }

    pub fn parse(s: &str) -> CliResult<Self> {
        match s.replace('-', "_").as_str() {
            "fully_observed" => Ok(Self::FullyObserved),
            "discretely_observed" => Ok(Self::DiscretelyObserved),
            "dfpca" => Ok(Self::Dfpca),
            "custom" => Ok(Self::Custom),
            other => Err(CliError::Config(format!("unknown study '{other}'"))),
        }
    }

    /// Metrics computed by the study; `Custom` uses the configured list.
    pub fn default_metrics(self) -> Vec<Metric> {
        match self {
            Self::FullyObserved => vec![Metric::Autocov, Metric::Spectral],
            Self::DiscretelyObserved => vec![Metric::Spectral, Metric::SmoothedSpectral],
            Self::Dfpca => vec![Metric::Eigenvalues, Metric::Eigenfunctions],
            Self::Custom => Vec::new(),
        }
    }
}

impl fmt::Display for StudyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Error metrics reported per replicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// `‖Σ̂^(1) − Σ^(1)‖_{S,max}`.
    Autocov,
    /// `sup_θ ‖f̂_θ − f_θ‖_{S,max}`.
    Spectral,
    /// `min_b sup_θ ‖f̃_θ − f_θ‖_{S,max}` over the bandwidth grid.
    SmoothedSpectral,
    /// `max_{j,m} sup_θ |λ̂_jm − λ_jm|`.
    Eigenvalues,
    /// `max_{j,m} sup_θ ‖φ̂_jm − φ_jm‖ / δ_m`.
    Eigenfunctions,
}

/// A lag parameter: `"auto"` or a fixed value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LagRule {
    #[default]
    Auto,
    Fixed(usize),
}

impl LagRule {
    pub fn resolve(self, auto: impl FnOnce() -> usize) -> usize {
        match self {
            Self::Auto => auto(),
            Self::Fixed(v) => v,
        }
    }

    pub fn parse(s: &str) -> CliResult<Self> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Self::Auto);
        }
        s.parse().map(Self::Fixed).map_err(|_| CliError::Config(format!("expected 'auto' or an integer, got '{s}'")))
    }
}

impl Serialize for LagRule {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Self::Auto => s.serialize_str("auto"),
            Self::Fixed(v) => s.serialize_u64(*v as u64),
        }
    }
}

impl<'de> Deserialize<'de> for LagRule {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(u64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(v) => Ok(Self::Fixed(v as usize)),
            Raw::Str(s) => Self::parse(&s).map_err(serde::de::Error::custom),
        }
    }
}

/// Parameter grid; settings are the Cartesian product in the order
/// `n`, `p`, `rho`, `t_count` (outermost first).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n: Vec<usize>,
    pub p: Vec<usize>,
    pub rho: Vec<f64>,
    /// Points per curve; used only by the smoothed-spectral metric.
    #[serde(default)]
    pub t_count: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatorConfig {
    pub kernel: LagWindowKernel,
    /// Truncation lag; `auto` is `⌈ln n⌉`.
    pub m0: LagRule,
    pub normalization: Normalization,
    /// Components per variable for dynamic FPCA.
    pub components: usize,
    /// Filter lag; `auto` is `⌈n^{1/4}⌉`.
    pub filter_lag: LagRule,
    pub smoothing_kernel: SmoothingKernel,
    pub bandwidth_multipliers: Vec<f64>,
    pub noise_sd: f64,
    /// Threshold level as a multiple of the median uniform entry norm.
    pub lambda_c: f64,
}


impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            kernel: LagWindowKernel::Rectangular,
            m0: LagRule::Auto,
            normalization: Normalization::LagAdjusted,
            components: DEFAULT_COMPONENTS,
            filter_lag: LagRule::Auto,
            smoothing_kernel: SmoothingKernel::Epanechnikov,
            bandwidth_multipliers: DEFAULT_BANDWIDTH_MULTIPLIERS.to_vec(),
            noise_sd: DEFAULT_NOISE_SD,
            lambda_c: 2.0,
        }
    }
}

impl EstimatorConfig {
    pub fn m0_for(&self, n: usize) -> usize {
        self.m0.resolve(|| default_m0(n))
    }

    pub fn filter_lag_for(&self, n: usize) -> usize {
        self.filter_lag.resolve(|| default_filter_lag(n))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub study: StudyKind,
    pub replicates: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub grid: GridConfig,
    #[serde(default)]
    pub estimator: EstimatorConfig,
    /// Metrics for the custom study; ignored otherwise.
    #[serde(default)]
    pub metrics: Vec<Metric>,
}

impl ExperimentConfig {
    /// Built-in grid of a study. Desk scale trims the full-size grids;
    /// `full_scale` restores them.
    pub fn preset(study: StudyKind, full_scale: bool) -> CliResult<Self> {
        let (grid, replicates) = match (study, full_scale) {
            (StudyKind::FullyObserved, false) => (grid(&[50, 100, 150], &[50], &[0.6, 0.8], &[]), 50),
            (StudyKind::FullyObserved, true) => (grid(&[50, 100, 150], &[50, 100, 150], &[0.6, 0.8], &[]), 100),
            (StudyKind::DiscretelyObserved, false) => (grid(&[50], &[50], &[0.6], &[30, 60, 120]), 50),
            (StudyKind::DiscretelyObserved, true) => {
                let t: Vec<usize> = (30..=135).step_by(15).collect();
                (grid(&[50, 100], &[50, 100], &[0.6], &t), 100)
            }
            (StudyKind::Dfpca, false) => (grid(&[300, 800, 1500], &[50], &[0.6], &[]), 50),
            (StudyKind::Dfpca, true) => (grid(&[300, 800, 1500], &[50, 100, 150], &[0.6, 0.8], &[]), 100),
            (StudyKind::Custom, _) => {
                return Err(CliError::Config("the custom study has no preset; supply a config file".into()))
            }
        };
        Ok(Self {
            study,
            replicates,
            seed: 20_240_601,
            output_dir: PathBuf::from(format!("out/{}", study.name())),
            grid,
            estimator: EstimatorConfig::default(),
            metrics: Vec::new(),
        })
    }

    pub fn metrics(&self) -> Vec<Metric> {
        match self.study {
            StudyKind::Custom => {
                let mut m = self.metrics.clone();
                m.sort();
                m.dedup();
                m
            }
            s => s.default_metrics(),
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if self.replicates == 0 {
            return bad("replicates must be at least 1".into());
        }
        if self.grid.n.is_empty() || self.grid.p.is_empty() || self.grid.rho.is_empty() {
            return bad("grid needs at least one n, p and rho".into());
        }
        if let Some(p) = self.grid.p.iter().find(|&&p| p == 0 || p % 50 != 0) {
            return bad(format!("p = {p} must be a positive multiple of 50 for the simulation design"));
        }
        if let Some(r) = self.grid.rho.iter().find(|r| !(0.0..1.0).contains(*r)) {
            return bad(format!("rho = {r} outside [0, 1)"));
        }
        let metrics = self.metrics();
        if metrics.is_empty() {
            return bad("the custom study needs a nonempty metrics list".into());
        }
        if metrics.contains(&Metric::SmoothedSpectral) {
            if self.grid.t_count.is_empty() || self.grid.t_count.contains(&0) {
                return bad("smoothed-spectral metric needs positive t_count values".into());
            }
            if self.estimator.bandwidth_multipliers.is_empty() {
                return bad("bandwidth_multipliers must not be empty".into());
            }
        }
        if !(self.estimator.noise_sd >= 0.0) {
            return bad("noise_sd must be nonnegative".into());
        }
        if self.estimator.components == 0 || self.estimator.components > hdfts_core::simulate::DESIGN_BASIS {
            return bad(format!("components must lie in 1..={}", hdfts_core::simulate::DESIGN_BASIS));
        }
        Ok(())
    }

    pub fn from_toml_str(s: &str) -> CliResult<Self> {
        let cfg: Self = toml::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> CliResult<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml_str(&text)
    }
}

fn grid(n: &[usize], p: &[usize], rho: &[f64], t: &[usize]) -> GridConfig {
    GridConfig { n: n.to_vec(), p: p.to_vec(), rho: rho.to_vec(), t_count: t.to_vec() }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_round_trip() {
        for study in [StudyKind::FullyObserved, StudyKind::DiscretelyObserved, StudyKind::Dfpca] {
            for full in [false, true] {
                let cfg = ExperimentConfig::preset(study, full).unwrap();
                cfg.validate().unwrap();
                let text = cfg.to_toml_string().unwrap();
                assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), cfg);
            }
        }
    }

    #[test]
    fn lag_rule_forms() {
        let cfg: EstimatorConfig = toml::from_str("m0 = 3\nfilter_lag = \"auto\"").unwrap();
        assert_eq!(cfg.m0, LagRule::Fixed(3));
        assert_eq!(cfg.filter_lag, LagRule::Auto);
        assert_eq!(cfg.m0_for(100), 3);
        assert_eq!(EstimatorConfig::default().m0_for(100), 5);
        assert!(toml::from_str::<EstimatorConfig>("m0 = \"often\"").is_err());
    }

    #[test]
    fn invalid_configs() {
        let mut cfg = ExperimentConfig::preset(StudyKind::FullyObserved, false).unwrap();
        cfg.replicates = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::preset(StudyKind::FullyObserved, false).unwrap();
        cfg.study = StudyKind::Custom;
        assert!(cfg.validate().is_err());
        assert!(StudyKind::parse("bogus").is_err());
        assert!(ExperimentConfig::from_toml_str("study = \"nope\"").is_err());
    }
}
