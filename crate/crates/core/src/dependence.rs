//! Functional dependence measures.
//!
//! The physical dependence measure compares `X_t = G(…, ε_{−1}, ε_0, …, ε_t)`
//! with the coupled `X_{t,{0}}` in which `ε_0` is replaced by an independent
//! copy. We estimate `ω_{t,q} = ‖ ‖X_t − X_{t,{0}}‖_{H,∞} ‖_q` and the
//! per-variable `δ_{t,q,j}` by Monte Carlo over coupled pairs, together with
//! the tail sums and dependence adjusted norms built from them. The module
//! also evaluates closed-form bounds for moving averages with power-law
//! decay and for functional autoregressions.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::curves::norm_h_inf;
use crate::error::config;
use crate::linalg::spectral_norm;
use crate::rng::{derive_seed, rng_from_seed};
use crate::simulate::{contraction_power, InnovationModel, SimulatableProcess, VfarProcess, VmaProcess};
use crate::{Error, Result};

/// Default largest coupling lag.
pub const DEFAULT_T_MAX: usize = 50;
/// Default Monte-Carlo replicates.
pub const DEFAULT_REPLICATES: usize = 10_000;
/// Relative size of `ω_{T_max}` above which the truncated tail is flagged.
pub const TAIL_FLAG_RATIO: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DependenceConfig {
    pub q: f64,
    pub alpha: f64,
    pub t_max: usize,
    pub replicates: usize,
    pub seed: u64,
}

impl DependenceConfig {
    pub fn new(q: f64, alpha: f64, seed: u64) -> Self {
        Self { q, alpha, t_max: DEFAULT_T_MAX, replicates: DEFAULT_REPLICATES, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.q > 1.0) || !self.q.is_finite() {
            return Err(config(format!("q = {} must exceed 1", self.q)));
        }
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(config(format!("alpha = {} must be positive", self.alpha)));
        }
        if self.replicates == 0 {
            return Err(config("at least one replicate is required"));
        }
        Ok(())
    }

    /// Seed of replicate `i`.
    pub fn replicate_seed(&self, i: usize) -> u64 {
        derive_seed(self.seed, i as u64)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DependenceReport {
    pub q: f64,
    pub alpha: f64,
    pub t_max: usize,
    /// `ω̂_{t,q}`, `t = 0..=T_max`.
    pub omega: Vec<f64>,
    /// `Ω̂_{m,q} = Σ_{t=m}^{T_max} ω̂_{t,q}`.
    pub omega_tail: Vec<f64>,
    /// `delta_per_j[j][t] = δ̂_{t,q,j}`.
    pub delta_per_j: Vec<Vec<f64>>,
    /// `sup_m (m+1)^α Ω̂_{m,q}`.
    pub adjusted_norm_joint: f64,
    /// `max_j sup_m (m+1)^α Δ̂_{m,q,j}`.
    pub adjusted_norm_uniform: f64,
    /// Square of the uniform adjusted norm.
    pub phi: f64,
    /// Square of the joint adjusted norm.
    pub m: f64,
    pub mc_replicates: usize,
    /// `ω̂_{T_max} > 10⁻³ ω̂_0`: the truncated tail may matter.
    pub tail_flag: bool,
}

/// Coupling distances from one replicate: `joint[t] = ‖X_t − X_{t,{0}}‖_{H,∞}`
/// and `per_var[t][j] = ‖X_tj − X_{t,{0},j}‖_H`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledDistances {
    pub joint: Vec<f64>,
    pub per_var: Vec<Vec<f64>>,
}

/// Simulate one coupled pair up to `t_max`. The innovations
/// `ε_{−memory} … ε_{t_max}` are drawn first, then the replacement `ε_0′`.
pub fn coupled_distances(model: &dyn InnovationModel, t_max: usize, seed: u64) -> CoupledDistances {
    let mut rng = rng_from_seed(seed);
    let mem = model.memory();
    let len = t_max + 1;
    let eps: Vec<Vec<f64>> = (0..mem + len).map(|_| model.draw_innovation(&mut rng)).collect();
    let mut coupled = eps.clone();
    coupled[mem] = model.draw_innovation(&mut rng);
    let x = model.respond(&eps, len);
    let y = model.respond(&coupled, len);
    let r = model.r();
    let mut joint = Vec::with_capacity(len);
    let mut per_var = Vec::with_capacity(len);
    for (a, b) in x.iter().zip(&y) {
        let d: Vec<f64> = a.iter().zip(b).map(|(u, v)| u - v).collect();
        joint.push(norm_h_inf(&d, r));
        per_var.push(d.chunks(r).map(|c| libm::sqrt(c.iter().map(|z| z * z).sum::<f64>())).collect());
    }
    CoupledDistances { joint, per_var }
}

/// Running sums of `d^q`; feed replicates in a fixed order for reproducible output.
#[derive(Debug, Clone)]
pub struct DependenceAccumulator {
    cfg: DependenceConfig,
    p: usize,
    joint: Vec<f64>,
    per_var: Vec<Vec<f64>>,
    count: usize,
}

impl DependenceAccumulator {
    pub fn new(cfg: DependenceConfig, p: usize) -> Self {
        let len = cfg.t_max + 1;
        Self { cfg, p, joint: vec![0.0; len], per_var: vec![vec![0.0; len]; p], count: 0 }
    }

    pub fn push(&mut self, d: &CoupledDistances) {
        let q = self.cfg.q;
        for (t, v) in d.joint.iter().enumerate() {
            self.joint[t] += libm::pow(*v, q);
        }
        for (t, row) in d.per_var.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                self.per_var[j][t] += libm::pow(*v, q);
            }
        }
        self.count += 1;
    }

    pub fn finish(self) -> Result<DependenceReport> {
        if self.count == 0 {
            return Err(Error::EmptyRange("no coupling replicates".into()));
        }
        let DependenceConfig { q, alpha, t_max, .. } = self.cfg;
        let n = self.count as f64;
        let qnorm = |s: f64| libm::pow(s / n, 1.0 / q);
        let omega: Vec<f64> = self.joint.iter().map(|&s| qnorm(s)).collect();
        let delta: Vec<Vec<f64>> =
            self.per_var.iter().map(|row| row.iter().map(|&s| qnorm(s)).collect()).collect();
        let omega_tail = tail_sums(&omega);
        let joint = adjusted_norm(&omega_tail, alpha);
        let uniform = delta
            .iter()
            .map(|row| adjusted_norm(&tail_sums(row), alpha))
            .fold(0.0, f64::max);
        let tail_flag = omega[t_max] > TAIL_FLAG_RATIO * omega[0];
        debug_assert_eq!(delta.len(), self.p);
        Ok(DependenceReport {
            q,
            alpha,
            t_max,
            omega,
            omega_tail,
            delta_per_j: delta,
            adjusted_norm_joint: joint,
            adjusted_norm_uniform: uniform,
            phi: uniform * uniform,
            m: joint * joint,
            mc_replicates: self.count,
            tail_flag,
        })
    }
}

fn tail_sums(v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    let mut acc = 0.0;
    for i in (0..v.len()).rev() {
        acc += v[i];
        out[i] = acc;
    }
    out
}

fn adjusted_norm(tail: &[f64], alpha: f64) -> f64 {
    tail.iter()
        .enumerate()
        .map(|(m, &s)| libm::pow((m + 1) as f64, alpha) * s)
        .fold(0.0, f64::max)
}

/// Monte-Carlo dependence measures of a process with innovation access.
pub fn mc_dependence(process: &dyn SimulatableProcess, cfg: &DependenceConfig) -> Result<DependenceReport> {
    cfg.validate()?;
    let model = process.innovations().ok_or(Error::UnsupportedModel)?;
    let mut acc = DependenceAccumulator::new(*cfg, model.p());
    for i in 0..cfg.replicates {
        acc.push(&coupled_distances(model, cfg.t_max, cfg.replicate_seed(i)));
    }
    acc.finish()
}

/// Hurwitz zeta `ζ(s, a) = Σ_{k≥0} (k + a)^{−s}` for `s > 1`, `a > 0`, by
/// Euler–Maclaurin summation.
pub fn hurwitz_zeta(s: f64, a: f64) -> f64 {
    const N: usize = 20;
    let mut sum = 0.0;
    for k in 0..N {
        sum += libm::pow(a + k as f64, -s);
    }
    let x = a + N as f64;
    sum += libm::pow(x, 1.0 - s) / (s - 1.0) + 0.5 * libm::pow(x, -s);
    // Bernoulli corrections B_{2k}/(2k)! · s(s+1)…(s+2k−2) · x^{−s−2k+1}
    const B: [f64; 4] = [1.0 / 6.0, -1.0 / 30.0, 1.0 / 42.0, -1.0 / 30.0];
    let mut rising = s;
    let mut fact = 2.0;
    for (k, b) in B.iter().enumerate() {
        let order = 2 * k + 2;
        sum += b / fact * rising * libm::pow(x, -s - order as f64 + 1.0);
        rising *= (s + order as f64 - 1.0) * (s + order as f64);
        fact *= ((order + 1) * (order + 2)) as f64;
    }
    sum
}

/// `C_{α,γ} = sup_{m≥0} (m+1)^α Σ_{t≥m} (t+1)^{−γ}`, finite for `γ > 1` and
/// `α ≤ γ − 1`.
pub fn vma_constant(alpha: f64, gamma: f64) -> Result<f64> {
    if !(gamma > 1.0) {
        return Err(Error::DivergentBound(format!("decay exponent gamma = {gamma} must exceed 1")));
    }
    let excess = alpha - (gamma - 1.0);
    if excess > 1e-12 {
        return Err(Error::DivergentBound(format!(
            "alpha = {alpha} exceeds gamma - 1 = {}; the adjusted norm is infinite",
            gamma - 1.0
        )));
    }
    let term = |m: f64| libm::pow(m + 1.0, alpha) * hurwitz_zeta(gamma, m + 1.0);
    let mut best: f64 = 0.0;
    for m in 0..10_000 {
        best = best.max(term(m as f64));
    }
    let mut m = 1e4;
    while m < 1e15 {
        best = best.max(term(m));
        m *= 1.5;
    }
    if excess.abs() <= 1e-12 {
        best = best.max(1.0 / (gamma - 1.0));
    }
    Ok(best)
}

/// Bound `C_{α,γ} K_p p^{1/q} μ_q^{1/q}` on the dependence adjusted norm of
/// a moving average with `‖A_t‖_{S,∞} ≤ K_p (t+1)^{−γ}`.
pub fn vma_bound(proc: &VmaProcess, q: f64, alpha: f64, gamma: f64, k_p: f64, mu_q: f64) -> Result<f64> {
    let c = vma_constant(alpha, gamma)?;
    if k_p == 0.0 {
        return Ok(0.0);
    }
    let p = proc.coeffs[0].p() as f64;
    Ok(c * k_p * libm::pow(p, 1.0 / q) * libm::pow(mu_q, 1.0 / q))
}

/// Pieces of the autoregressive bound.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct VfarBound {
    /// Power with `‖Ã^j‖₂ < 1`.
    pub j: usize,
    /// `‖Ã^j‖₂`.
    pub c: f64,
    /// `max_{k≤j} ‖Ã^k‖₂`.
    pub c_prime: f64,
    /// `sup_m (m+1)^α c^{m/j−1} / (1 − c^{1/j})`.
    pub f_alpha: f64,
    /// `c′ f(α) √p μ_q^{1/q}`, with the moment constant taken as 1.
    pub bound: f64,
}

/// `sup_m (m+1)^α c^{m/j−1} / (1 − c^{1/j})`, scanning `m` until the terms
/// decrease and fall below `10⁻¹²` of the running maximum.
pub fn vfar_f_alpha(c: f64, j: usize, alpha: f64) -> Result<f64> {
    if !(c > 0.0 && c < 1.0) {
        return Err(config(format!("contraction factor c = {c} must lie in (0, 1)")));
    }
    let jf = j as f64;
    let denom_log = libm::log(1.0 - libm::pow(c, 1.0 / jf));
    let ln_c = libm::log(c);
    let log_term = |m: usize| alpha * libm::log((m + 1) as f64) + (m as f64 / jf - 1.0) * ln_c - denom_log;
    let mut best = f64::NEG_INFINITY;
    let mut prev = f64::NEG_INFINITY;
    for m in 0..100_000_000usize {
        let t = log_term(m);
        best = best.max(t);
        if t < prev && t < best + libm::log(1e-12) {
            return Ok(libm::exp(best));
        }
        prev = t;
    }
    Err(Error::NonConvergence("f(alpha) scan did not terminate".into()))
}

pub fn vfar_bound(proc: &VfarProcess, q: f64, alpha: f64, mu_q: f64) -> Result<VfarBound> {
    if !(q > 1.0) {
        return Err(config(format!("q = {q} must exceed 1")));
    }
    let a = proc.a_tilde();
    let (j, c) = contraction_power(&a)?.ok_or_else(|| {
        Error::Unstable("no contractive power of the norm matrix up to j = 20".into())
    })?;
    let mut c_prime: f64 = 0.0;
    let mut power = a.clone();
    for _ in 1..=j {
        c_prime = c_prime.max(spectral_norm(&power)?);
        power = power.matmul(&a);
    }
    let p = a.rows() as f64;
    if c_prime == 0.0 {
        return Ok(VfarBound { j, c, c_prime, f_alpha: 0.0, bound: 0.0 });
    }
    if c == 0.0 {
        return Err(Error::DivergentBound(
            "nilpotent norm matrix: c = 0 makes c^(m/j - 1) unbounded for m < j".into(),
        ));
    }
    let f_alpha = vfar_f_alpha(c, j, alpha)?;
    let bound = c_prime * f_alpha * libm::sqrt(p) * libm::pow(mu_q, 1.0 / q);
    Ok(VfarBound { j, c, c_prime, f_alpha, bound })
}
