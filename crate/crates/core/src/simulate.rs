//! Seeded generators for the functional processes used in experiments:
//! the vector autoregression on Fourier scores of the simulation design,
//! functional moving averages and functional autoregressions with kernel
//! coefficients.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::basis::BasisSpec;
use crate::curves::{FunctionalPanel, RealKernelMatrix};
use crate::error::config;
use crate::linalg::{spectral_norm, spectral_radius, RMatrix};
use crate::rng::{self, Rng};
use crate::{Error, Result};

/// Default number of discarded warm-up steps.
pub const DEFAULT_BURN_IN: usize = 500;

/// Size of the repeated block in the design's transition matrix.
pub const DESIGN_BLOCK: usize = 50;

/// Number of Fourier functions in the design.
pub const DESIGN_BASIS: usize = 4;

/// Variance of the t(6) score innovations.
pub const T6_VARIANCE: f64 = 1.5;

/// Squared score scales `c_l² = (3l/2)^{-1}`, `l = 1..4`.
pub fn design_score_variances() -> [f64; DESIGN_BASIS] {
    core::array::from_fn(|i| 2.0 / (3.0 * (i + 1) as f64))
}

/// The 50×50 block `v₁v₁ᵀ/|v₁|² + v₂v₂ᵀ/|v₂|²` with `v₁ = 1`, `v₂ⱼ = cos(2j)`.
pub fn design_block() -> RMatrix {
    let v1 = [1.0; DESIGN_BLOCK];
    let v2: [f64; DESIGN_BLOCK] = core::array::from_fn(|i| libm::cos(2.0 * (i + 1) as f64));
    let n1: f64 = v1.iter().map(|x| x * x).sum();
    let n2: f64 = v2.iter().map(|x| x * x).sum();
    RMatrix::from_fn(DESIGN_BLOCK, DESIGN_BLOCK, |i, j| v1[i] * v1[j] / n1 + v2[i] * v2[j] / n2)
}

/// Block-diagonal `I_{p/50} ⊗ A₀`.
pub fn build_design_transition(p: usize) -> Result<RMatrix> {
    if p == 0 || !p.is_multiple_of(DESIGN_BLOCK) {
        return Err(config(format!("p = {p} is not a positive multiple of {DESIGN_BLOCK}")));
    }
    Ok(RMatrix::identity(p / DESIGN_BLOCK).kron(&design_block()))
}

/// Vector autoregression on basis scores:
/// `ξ_{t,l} = ρ A ξ_{t−1,l} + η_{t,l}` with iid t(6) innovations, and curves
/// `X_tj = Σ_l c_l ξ_{tjl} ψ_l` in the four-function Fourier basis.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DesignDgp {
    pub n: usize,
    pub p: usize,
    pub rho: f64,
    pub a: RMatrix,
    pub burn_in: usize,
    pub seed: u64,
}

impl DesignDgp {
    /// Design with the block transition matrix from [`build_design_transition`].
    pub fn new(n: usize, p: usize, rho: f64, seed: u64) -> Result<Self> {
        Self::with_matrix(n, rho, build_design_transition(p)?, seed)
    }

    /// Same recursion with an arbitrary square transition matrix.
    pub fn with_matrix(n: usize, rho: f64, a: RMatrix, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(config("n must be positive"));
        }
        if !a.is_square() || a.rows() == 0 {
            return Err(Error::Dimension("transition matrix must be square and nonempty".into()));
        }
        if !(0.0..1.0).contains(&rho) {
            return Err(config(format!("rho = {rho} outside [0, 1)")));
        }
        let dgp = Self { n, p: a.rows(), rho, a, burn_in: DEFAULT_BURN_IN, seed };
        dgp.check_stable()?;
        Ok(dgp)
    }

    pub fn with_burn_in(mut self, burn_in: usize) -> Self {
        self.burn_in = burn_in;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// `ρA`.
    pub fn transition(&self) -> RMatrix {
        self.a.scaled(self.rho)
    }

    pub fn check_stable(&self) -> Result<()> {
        let radius = spectral_radius(&self.transition());
        if radius >= 1.0 {
            return Err(Error::Unstable(format!("spectral radius of rho*A is {radius}")));
        }
        Ok(())
    }

    pub fn basis(&self) -> BasisSpec {
        BasisSpec::fourier4()
    }

    fn step(&self, b: &RMatrix, state: &[f64], eta: &[f64], out: &mut [f64]) {
        let p = self.p;
        for j in 0..p {
            let mut acc = [0.0; DESIGN_BASIS];
            for k in 0..p {
                let w = b[(j, k)];
                if w != 0.0 {
                    for l in 0..DESIGN_BASIS {
                        acc[l] += w * state[k * DESIGN_BASIS + l];
                    }
                }
            }
            for l in 0..DESIGN_BASIS {
                out[j * DESIGN_BASIS + l] = acc[l] + eta[j * DESIGN_BASIS + l];
            }
        }
    }

    fn scale_scores(&self, scores: &mut [f64]) {
        let c: [f64; DESIGN_BASIS] = design_score_variances().map(libm::sqrt);
        for chunk in scores.chunks_mut(DESIGN_BASIS) {
            for (x, s) in chunk.iter_mut().zip(c) {
                *x *= s;
            }
        }
    }
}

/// Simulate the design; identical seeds give bit-identical panels.
pub fn simulate_design(dgp: &DesignDgp) -> Result<FunctionalPanel> {
    dgp.check_stable()?;
    let mut rng = rng::rng_from_seed(dgp.seed);
    let b = dgp.transition();
    let w = dgp.p * DESIGN_BASIS;
    let mut state = vec![0.0; w];
    let mut next = vec![0.0; w];
    let mut eta = vec![0.0; w];
    let mut coeffs = Vec::with_capacity(dgp.n * w);
    for t in 0..dgp.burn_in + dgp.n {
        eta.iter_mut().for_each(|e| *e = rng::t6(&mut rng));
        dgp.step(&b, &state, &eta, &mut next);
        core::mem::swap(&mut state, &mut next);
        if t >= dgp.burn_in {
            coeffs.extend_from_slice(&state);
        }
    }
    dgp.scale_scores(&mut coeffs);
    FunctionalPanel::new(dgp.n, dgp.p, dgp.basis(), coeffs)
}

/// Marginal law of a single innovation coefficient before scaling.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum InnovationDist {
    Gaussian,
    StudentT { dof: u32 },
}

impl InnovationDist {
    pub fn variance(self) -> f64 {
        match self {
            Self::Gaussian => 1.0,
            Self::StudentT { dof } if dof > 2 => dof as f64 / (dof as f64 - 2.0),
            Self::StudentT { .. } => f64::INFINITY,
        }
    }

    fn draw(self, rng: &mut Rng) -> f64 {
        match self {
            Self::Gaussian => rng::standard_normal(rng),
            Self::StudentT { dof } => rng::student_t(rng, dof),
        }
    }
}

/// Innovation curves `ε_tj = Σ_l scales[l] Z_tjl ψ_l` with iid `Z`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct InnovationLaw {
    pub dist: InnovationDist,
    pub scales: Vec<f64>,
}

impl InnovationLaw {
    pub fn gaussian(r: usize, sd: f64) -> Self {
        Self { dist: InnovationDist::Gaussian, scales: vec![sd; r] }
    }

    pub fn r(&self) -> usize {
        self.scales.len()
    }

    /// Variance of coefficient `l`.
    pub fn coeff_variance(&self, l: usize) -> f64 {
        self.scales[l] * self.scales[l] * self.dist.variance()
    }

    /// One innovation vector for all `p` variables, `p × r` row-major.
    pub fn draw(&self, p: usize, rng: &mut Rng) -> Vec<f64> {
        let r = self.r();
        let mut out = Vec::with_capacity(p * r);
        for _ in 0..p {
            for l in 0..r {
                out.push(self.scales[l] * self.dist.draw(rng));
            }
        }
        out
    }
}

/// Processes that can be simulated from a seed.
pub trait SimulatableProcess: Sync {
    fn p(&self) -> usize;
    fn basis(&self) -> BasisSpec;
    fn simulate(&self, n: usize, seed: u64) -> Result<FunctionalPanel>;

    /// Innovation-level access, needed for coupling-based dependence
    /// measures. Processes that only expose finished paths return `None`.
    fn innovations(&self) -> Option<&dyn InnovationModel> {
        None
    }
}

/// A process written as `X_t = G(…, ε_{t−1}, ε_t)` with explicit iid
/// innovations.
pub trait InnovationModel: Sync {
    fn p(&self) -> usize;
    fn r(&self) -> usize;
    /// Number of innovations before time 0 that are fed to [`respond`](Self::respond).
    fn memory(&self) -> usize;
    /// Draw one innovation vector (`p × r`).
    fn draw_innovation(&self, rng: &mut Rng) -> Vec<f64>;
    /// `X_0 … X_{len−1}` from `innovations[i] = ε_{i − memory}`; the slice
    /// holds `memory + len` vectors.
    fn respond(&self, innovations: &[Vec<f64>], len: usize) -> Vec<Vec<f64>>;
}

/// Functional moving average `X_t = Σ_{m=0}^{M} A_m(ε_{t−m})`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct VmaProcess {
    pub coeffs: Vec<RealKernelMatrix>,
    pub innovation: InnovationLaw,
    pub basis: BasisSpec,
    pub seed: u64,
}

impl VmaProcess {
    pub fn new(coeffs: Vec<RealKernelMatrix>, innovation: InnovationLaw, basis: BasisSpec, seed: u64) -> Result<Self> {
        let first = coeffs.first().ok_or_else(|| config("moving average needs at least A_0"))?;
        let (p, r) = (first.p(), first.r());
        if coeffs.iter().any(|a| a.p() != p || a.r() != r) {
            return Err(Error::Dimension("moving average coefficients differ in shape".into()));
        }
        if innovation.r() != r || basis.r() != r {
            return Err(Error::Dimension(format!(
                "innovation has {} coefficients and basis {} functions, kernels use {r}",
                innovation.r(),
                basis.r()
            )));
        }
        let total: f64 = coeffs.iter().map(norm_s_inf).sum();
        if !total.is_finite() {
            return Err(config("moving average coefficients are not summable"));
        }
        Ok(Self { coeffs, innovation, basis, seed })
    }

    /// Coefficients `A_m = K_p (m+1)^{−γ} B` for `m = 0..=order`, with the
    /// shape `B` rescaled so that `‖B‖_{S,∞} = 1`.
    pub fn decaying(
        shape: &RealKernelMatrix,
        order: usize,
        gamma: f64,
        k_p: f64,
        innovation: InnovationLaw,
        basis: BasisSpec,
        seed: u64,
    ) -> Result<Self> {
        let norm = norm_s_inf(shape);
        if norm == 0.0 {
            return Err(config("decay shape must be nonzero"));
        }
        let coeffs = (0..=order)
            .map(|m| shape.scaled(k_p * libm::pow((m + 1) as f64, -gamma) / norm))
            .collect();
        Self::new(coeffs, innovation, basis, seed)
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn r(&self) -> usize {
        self.coeffs[0].r()
    }
}

/// `‖A‖_{S,∞} = max_j Σ_k ‖A_jk‖_S`.
pub fn norm_s_inf(a: &RealKernelMatrix) -> f64 {
    (0..a.p())
        .map(|j| (0..a.p()).map(|k| a.block_norm(j, k)).sum::<f64>())
        .fold(0.0, f64::max)
}

fn add_matvec(a: &RealKernelMatrix, x: &[f64], out: &mut [f64]) {
    let m = a.as_matrix();
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (&w, &v) in m.row(i).iter().zip(x) {
            acc += w * v;
        }
        *o += acc;
    }
}

impl InnovationModel for VmaProcess {
    fn p(&self) -> usize {
        self.coeffs[0].p()
    }
    fn r(&self) -> usize {
        VmaProcess::r(self)
    }
    fn memory(&self) -> usize {
        self.order()
    }
    fn draw_innovation(&self, rng: &mut Rng) -> Vec<f64> {
        self.innovation.draw(InnovationModel::p(self), rng)
    }
    fn respond(&self, innovations: &[Vec<f64>], len: usize) -> Vec<Vec<f64>> {
        let w = InnovationModel::p(self) * self.r();
        let mem = self.order();
        (0..len)
            .map(|t| {
                let mut x = vec![0.0; w];
                for (m, a) in self.coeffs.iter().enumerate() {
                    add_matvec(a, &innovations[mem + t - m], &mut x);
                }
                x
            })
            .collect()
    }
}

impl SimulatableProcess for VmaProcess {
    fn p(&self) -> usize {
        self.coeffs[0].p()
    }
    fn basis(&self) -> BasisSpec {
        self.basis.clone()
    }
    fn simulate(&self, n: usize, seed: u64) -> Result<FunctionalPanel> {
        let mut proc = self.clone();
        proc.seed = seed;
        simulate_vma(&proc, n)
    }
    fn innovations(&self) -> Option<&dyn InnovationModel> {
        Some(self)
    }
}

/// Simulate `n` steps of a moving average; draws `order` extra innovations
/// for the initial window.
pub fn simulate_vma(proc: &VmaProcess, n: usize) -> Result<FunctionalPanel> {
    if n == 0 {
        return Err(config("n must be positive"));
    }
    let mut rng = rng::rng_from_seed(proc.seed);
    let eps: Vec<Vec<f64>> =
        (0..n + proc.order()).map(|_| proc.draw_innovation(&mut rng)).collect();
    let xs = proc.respond(&eps, n);
    FunctionalPanel::new(n, SimulatableProcess::p(proc), proc.basis.clone(), xs.concat())
}

/// Functional autoregression `X_t = A(X_{t−1}) + ε_t`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct VfarProcess {
    pub a: RealKernelMatrix,
    pub innovation: InnovationLaw,
    pub basis: BasisSpec,
    pub burn_in: usize,
    pub seed: u64,
}

/// Largest power searched for a contraction of `Ã`.
pub const MAX_CONTRACTION_POWER: usize = 20;

/// Smallest `j ≤ 20` with `‖Ã^j‖₂ < 1`, and that norm.
pub fn contraction_power(a_tilde: &RMatrix) -> Result<Option<(usize, f64)>> {
    let mut power = a_tilde.clone();
    for j in 1..=MAX_CONTRACTION_POWER {
        let c = spectral_norm(&power)?;
        if c < 1.0 {
            return Ok(Some((j, c)));
        }
        power = power.matmul(a_tilde);
    }
    Ok(None)
}

impl VfarProcess {
    pub fn new(a: RealKernelMatrix, innovation: InnovationLaw, basis: BasisSpec, seed: u64) -> Result<Self> {
        if innovation.r() != a.r() || basis.r() != a.r() {
            return Err(Error::Dimension("innovation, basis and kernel dimensions differ".into()));
        }
        let proc = Self { a, innovation, basis, burn_in: DEFAULT_BURN_IN, seed };
        proc.check_stable()?;
        Ok(proc)
    }

    pub fn with_burn_in(mut self, burn_in: usize) -> Self {
        self.burn_in = burn_in;
        self
    }

    /// `Ã_jk = ‖A_jk‖_S`.
    pub fn a_tilde(&self) -> RMatrix {
        self.a.entry_norms()
    }

    pub fn check_stable(&self) -> Result<()> {
        match contraction_power(&self.a_tilde())? {
            Some(_) => Ok(()),
            None => Err(Error::Unstable(format!(
                "no power j <= {MAX_CONTRACTION_POWER} with ||A~^j||_2 < 1"
            ))),
        }
    }
}

impl InnovationModel for VfarProcess {
    fn p(&self) -> usize {
        self.a.p()
    }
    fn r(&self) -> usize {
        self.a.r()
    }
    fn memory(&self) -> usize {
        self.burn_in
    }
    fn draw_innovation(&self, rng: &mut Rng) -> Vec<f64> {
        self.innovation.draw(self.a.p(), rng)
    }
    fn respond(&self, innovations: &[Vec<f64>], len: usize) -> Vec<Vec<f64>> {
        let w = self.a.p() * self.a.r();
        let mut x = vec![0.0; w];
        let mut out = Vec::with_capacity(len);
        for (i, eps) in innovations.iter().enumerate().take(self.burn_in + len) {
            let mut next = eps.clone();
            add_matvec(&self.a, &x, &mut next);
            x = next;
            if i >= self.burn_in {
                out.push(x.clone());
            }
        }
        out
    }
}

impl SimulatableProcess for VfarProcess {
    fn p(&self) -> usize {
        self.a.p()
    }
    fn basis(&self) -> BasisSpec {
        self.basis.clone()
    }
    fn simulate(&self, n: usize, seed: u64) -> Result<FunctionalPanel> {
        let mut proc = self.clone();
        proc.seed = seed;
        simulate_vfar(&proc, n)
    }
    fn innovations(&self) -> Option<&dyn InnovationModel> {
        Some(self)
    }
}

/// Simulate `n` steps of the autoregression after `burn_in` warm-up steps.
pub fn simulate_vfar(proc: &VfarProcess, n: usize) -> Result<FunctionalPanel> {
    if n == 0 {
        return Err(config("n must be positive"));
    }
    proc.check_stable()?;
    let mut rng = rng::rng_from_seed(proc.seed);
    let eps: Vec<Vec<f64>> =
        (0..n + proc.burn_in).map(|_| proc.draw_innovation(&mut rng)).collect();
    let xs = proc.respond(&eps, n);
    FunctionalPanel::new(n, proc.a.p(), proc.basis.clone(), xs.concat())
}

impl InnovationModel for DesignDgp {
    fn p(&self) -> usize {
        self.p
    }
    fn r(&self) -> usize {
        DESIGN_BASIS
    }
    fn memory(&self) -> usize {
        self.burn_in
    }
    fn draw_innovation(&self, rng: &mut Rng) -> Vec<f64> {
        (0..self.p * DESIGN_BASIS).map(|_| rng::t6(rng)).collect()
    }
    fn respond(&self, innovations: &[Vec<f64>], len: usize) -> Vec<Vec<f64>> {
        let b = self.transition();
        let w = self.p * DESIGN_BASIS;
        let mut state = vec![0.0; w];
        let mut next = vec![0.0; w];
        let mut out = Vec::with_capacity(len);
        for (i, eta) in innovations.iter().enumerate().take(self.burn_in + len) {
            self.step(&b, &state, eta, &mut next);
            core::mem::swap(&mut state, &mut next);
            if i >= self.burn_in {
                let mut x = state.clone();
                self.scale_scores(&mut x);
                out.push(x);
            }
        }
        out
    }
}

impl SimulatableProcess for DesignDgp {
    fn p(&self) -> usize {
        self.p
    }
    fn basis(&self) -> BasisSpec {
        BasisSpec::fourier4()
    }
    fn simulate(&self, n: usize, seed: u64) -> Result<FunctionalPanel> {
        let mut dgp = self.clone();
        dgp.n = n;
        dgp.seed = seed;
        simulate_design(&dgp)
    }
    fn innovations(&self) -> Option<&dyn InnovationModel> {
        Some(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::hermitian_eigen;
    use approx::assert_abs_diff_eq;

    #[test]
    fn design_block_first_entry() {
        let a = build_design_transition(50).unwrap();
        let s: f64 = (1..=50).map(|j| (2.0 * j as f64).cos().powi(2)).sum();
        assert_abs_diff_eq!(a[(0, 0)], 1.0 / 50.0 + (2.0f64).cos().powi(2) / s, epsilon = 1e-15);
    }

    #[test]
    fn design_matrix_is_block_diagonal() {
        let a = build_design_transition(100).unwrap();
        for i in 0..100 {
            for j in 0..100 {
                if i / 50 != j / 50 {
                    assert_eq!(a[(i, j)], 0.0);
                } else {
                    assert_eq!(a[(i, j)], a[(i % 50, j % 50)]);
                }
            }
        }
        assert!(build_design_transition(60).unwrap_err().is_config());
    }

    #[test]
    fn design_block_is_stable_at_0_8() {
        let a0 = design_block();
        let top = hermitian_eigen(&a0).unwrap().values[0];
        let norm = spectral_norm(&a0).unwrap();
        assert_abs_diff_eq!(top, norm, epsilon = 1e-10);
        assert!(norm <= 2.0 && 0.8 * norm < 1.0);
    }

    #[test]
    fn explosive_transition_rejected() {
        let a = RMatrix::identity(2).scaled(2.0);
        let err = DesignDgp::with_matrix(10, 0.6, a, 1).unwrap_err();
        assert!(matches!(err, Error::Unstable(_)));
    }

    #[test]
    fn design_is_deterministic() {
        let dgp = DesignDgp::new(20, 50, 0.6, 99).unwrap().with_burn_in(50);
        assert_eq!(simulate_design(&dgp).unwrap(), simulate_design(&dgp).unwrap());
        let other = dgp.clone().with_seed(100);
        assert_ne!(simulate_design(&dgp).unwrap(), simulate_design(&other).unwrap());
    }

    #[test]
    fn identity_ma0_returns_innovations() {
        let basis = BasisSpec::fourier(2).unwrap();
        let id = RealKernelMatrix::from_block_matrix(3, 2, RMatrix::identity(6)).unwrap();
        let proc = VmaProcess::new(vec![id], InnovationLaw::gaussian(2, 1.0), basis, 5).unwrap();
        let panel = simulate_vma(&proc, 10).unwrap();
        let mut rng = rng::rng_from_seed(5);
        let eps: Vec<f64> = (0..10).flat_map(|_| proc.innovation.draw(3, &mut rng)).collect();
        assert_eq!(panel.coeffs(), &eps[..]);
    }

    #[test]
    fn zero_ma_gives_zero_panel() {
        let basis = BasisSpec::fourier(2).unwrap();
        let z = RealKernelMatrix::zeros(2, 2);
        let proc = VmaProcess::new(vec![z.clone(), z], InnovationLaw::gaussian(2, 1.0), basis, 5).unwrap();
        assert!(simulate_vma(&proc, 8).unwrap().coeffs().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn zero_far_gives_innovations() {
        let basis = BasisSpec::fourier(2).unwrap();
        let proc = VfarProcess::new(RealKernelMatrix::zeros(2, 2), InnovationLaw::gaussian(2, 1.0), basis, 3)
            .unwrap()
            .with_burn_in(4);
        let panel = simulate_vfar(&proc, 5).unwrap();
        let mut rng = rng::rng_from_seed(3);
        let eps: Vec<f64> = (0..9).flat_map(|_| proc.innovation.draw(2, &mut rng)).collect();
        assert_eq!(panel.coeffs(), &eps[4 * 4..]);
    }

    #[test]
    fn unstable_far_rejected() {
        let basis = BasisSpec::fourier(1).unwrap();
        let a = RealKernelMatrix::from_block_matrix(1, 1, RMatrix::identity(1).scaled(1.2)).unwrap();
        assert!(VfarProcess::new(a, InnovationLaw::gaussian(1, 1.0), basis, 0).is_err());
    }

    #[test]
    fn decaying_coefficients_follow_power_law() {
        let basis = BasisSpec::fourier(1).unwrap();
        let shape = RealKernelMatrix::from_block_matrix(2, 1, RMatrix::identity(2).scaled(3.0)).unwrap();
        let proc =
            VmaProcess::decaying(&shape, 4, 2.0, 0.5, InnovationLaw::gaussian(1, 1.0), basis, 0).unwrap();
        for (m, a) in proc.coeffs.iter().enumerate() {
            assert_abs_diff_eq!(norm_s_inf(a), 0.5 / ((m + 1) as f64).powi(2), epsilon = 1e-15);
        }
    }
}
