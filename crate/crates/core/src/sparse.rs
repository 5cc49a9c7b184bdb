//! Entrywise thresholding of spectral density estimates and support recovery.
//!
//! Each kernel entry `(j, k)` is shrunk by a factor that depends only on its
//! uniform size `sup_θ ‖f̂_{θ,jk}‖_S`, so the same factor applies at every
//! frequency. A fixed-frequency mode applies the same rule at one `θ`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::curves::{composite_norm_s_1, ComplexKernelMatrix};
use crate::linalg::{CMatrix, RMatrix};
use crate::rng::{rng_from_seed, standard_normal, Rng};
use crate::secondorder::SpectralDensity;
use crate::{Error, Result};

use num_complex::Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ThresholdRule {
    /// `(1 − λ/‖Z‖)₊ Z`.
    #[default]
    Soft,
    /// `Z·1{‖Z‖ > λ}`.
    Hard,
}

impl ThresholdRule {
    /// Factor applied to an entry of uniform size `norm`.
    pub fn factor(self, norm: f64, lambda: f64) -> f64 {
        if norm <= lambda || norm == 0.0 {
            return 0.0;
        }
        match self {
            Self::Soft => 1.0 - lambda / norm,
            Self::Hard => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ThresholdMode {
    UniformOverTheta,
    FixedTheta(f64),
}

/// A thresholded spectral density. Entry `(j, k)` equals
/// `factors[(j, k)]` times the base entry at every stored frequency.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ThresholdedSpectral {
    pub base: SpectralDensity,
    pub lambda: f64,
    pub mode: ThresholdMode,
    pub rule: ThresholdRule,
    /// `kept[j·p + k]`.
    pub kept_mask: Vec<bool>,
    pub uniform_entry_norms: RMatrix,
    pub factors: RMatrix,
}

impl ThresholdedSpectral {
    pub fn p(&self) -> usize {
        self.base.p()
    }

    pub fn kept(&self, j: usize, k: usize) -> bool {
        self.kept_mask[j * self.p() + k]
    }

    pub fn kept_count(&self) -> usize {
        self.kept_mask.iter().filter(|&&b| b).count()
    }

    /// Thresholded matrix at grid index `i`.
    pub fn value_at(&self, i: usize) -> ComplexKernelMatrix {
        let mut out = self.base.values[i].clone();
        let p = self.p();
        for j in 0..p {
            for k in 0..p {
                let s = self.factors[(j, k)];
                if s != 1.0 {
                    out.scale_block(j, k, s);
                }
            }
        }
        out
    }

    /// Materialize the thresholded estimate.
    pub fn estimate(&self) -> SpectralDensity {
        let mut out = self.base.clone();
        out.values = (0..self.base.len()).map(|i| self.value_at(i)).collect();
        out
    }

    /// Pairs kept by the threshold.
    pub fn support(&self) -> Vec<(usize, usize)> {
        let p = self.p();
        (0..p * p).filter(|&i| self.kept_mask[i]).map(|i| (i / p, i % p)).collect()
    }
}

fn threshold_with(base: SpectralDensity, lambda: f64, mode: ThresholdMode, rule: ThresholdRule) -> ThresholdedSpectral {
    let norms = base.uniform_entry_norms();
    let p = base.p();
    let factors = RMatrix::from_fn(p, p, |j, k| rule.factor(norms[(j, k)], lambda));
    let kept_mask = factors.as_slice().iter().map(|&f| f > 0.0).collect();
    ThresholdedSpectral { base, lambda, mode, rule, kept_mask, uniform_entry_norms: norms, factors }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::Config(format!("threshold level must be finite and nonnegative, got {lambda}")));
    }
    Ok(())
}

/// Soft thresholding with a common factor over all frequencies.
pub fn soft_threshold_uniform(spec: &SpectralDensity, lambda: f64) -> Result<ThresholdedSpectral> {
    threshold_uniform(spec, lambda, ThresholdRule::Soft)
}

pub fn threshold_uniform(spec: &SpectralDensity, lambda: f64, rule: ThresholdRule) -> Result<ThresholdedSpectral> {
    check_lambda(lambda)?;
    Ok(threshold_with(spec.clone(), lambda, ThresholdMode::UniformOverTheta, rule))
}

/// Threshold at the single stored frequency `theta`; the result holds
/// only that frequency.
pub fn threshold_fixed(spec: &SpectralDensity, theta: f64, lambda: f64, rule: ThresholdRule) -> Result<ThresholdedSpectral> {
    check_lambda(lambda)?;
    let i = spec.theta_grid.iter().position(|&t| (t - theta).abs() <= 1e-12).ok_or(Error::GridMismatch)?;
    let base = SpectralDensity::new(vec![theta], vec![spec.values[i].clone()], spec.m0, spec.kernel, spec.basis.clone())?;
    Ok(threshold_with(base, lambda, ThresholdMode::FixedTheta(theta), rule))
}

/// `c` times the median of the uniform entry norms over the listed pairs,
/// or over all pairs when `pairs` is `None`.
pub fn median_lambda(spec: &SpectralDensity, c: f64, pairs: Option<&[(usize, usize)]>) -> Result<f64> {
    let norms = spec.uniform_entry_norms();
    let p = spec.p();
    let mut vals: Vec<f64> = match pairs {
        Some(list) => list.iter().map(|&(j, k)| norms[(j, k)]).collect(),
        None => (0..p).flat_map(|j| (0..p).map(move |k| (j, k))).map(|(j, k)| norms[(j, k)]).collect(),
    };
    if vals.is_empty() {
        return Err(Error::EmptyRange("no pairs for the median threshold".into()));
    }
    vals.sort_by(f64::total_cmp);
    let m = vals.len();
    let med = if m % 2 == 1 { vals[m / 2] } else { 0.5 * (vals[m / 2 - 1] + vals[m / 2]) };
    Ok(c * med)
}

/// Pairs with `sup_θ ‖f_{θ,jk}‖_S > tol`.
pub fn support(spec: &SpectralDensity, tol: f64) -> Vec<(usize, usize)> {
    let norms = spec.uniform_entry_norms();
    let p = spec.p();
    let mut out = Vec::new();
    for j in 0..p {
        for k in 0..p {
            if norms[(j, k)] > tol {
                out.push((j, k));
            }
        }
    }
    out
}

/// `sup_θ ‖f̂^T_θ − f_θ‖_{S,1}` over the shared grid.
pub fn sparse_error_s1(thr: &ThresholdedSpectral, truth: &SpectralDensity) -> Result<f64> {
    if !thr.base.same_grid(truth) {
        return Err(Error::GridMismatch);
    }
    let mut worst: f64 = 0.0;
    for (i, f) in truth.values.iter().enumerate() {
        worst = worst.max(composite_norm_s_1(&thr.value_at(i).sub(f)?));
    }
    Ok(worst)
}

/// One kernel entry as a function of frequency: an `r × r` coefficient
/// matrix per grid point.
pub type EntryPath = Vec<CMatrix>;

fn sup_norm(z: &[CMatrix]) -> f64 {
    z.iter().map(CMatrix::frobenius_norm).fold(0.0, f64::max)
}

fn sup_diff(a: &[CMatrix], b: &[CMatrix]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).frobenius_norm()).fold(0.0, f64::max)
}

/// Apply the rule to one entry path using its uniform norm.
pub fn threshold_entry(rule: ThresholdRule, z: &[CMatrix], lambda: f64) -> EntryPath {
    let s = rule.factor(sup_norm(z), lambda);
    z.iter().map(|m| m.scaled(s)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AxiomViolation {
    pub instance: usize,
    /// 1, 2 or 3.
    pub axiom: u8,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AxiomReport {
    pub instances: usize,
    pub lambda: f64,
    pub c: f64,
    /// Violation counts for axioms (i), (ii), (iii).
    pub violations: [usize; 3],
    /// First few counterexamples.
    pub counterexamples: Vec<AxiomViolation>,
}

impl AxiomReport {
    pub fn passed(&self) -> bool {
        self.violations.iter().all(|&v| v == 0)
    }
}

const MAX_COUNTEREXAMPLES: usize = 16;
const AXIOM_SLACK: f64 = 1e-12;

fn random_path(rng: &mut Rng, len: usize, r: usize) -> EntryPath {
    (0..len)
        .map(|_| CMatrix::from_fn(r, r, |_, _| Complex64::new(standard_normal(rng), standard_normal(rng))))
        .collect()
}

fn rescale(z: EntryPath, target: f64) -> EntryPath {
    let s = sup_norm(&z);
    if s == 0.0 {
        return z;
    }
    z.iter().map(|m| m.scaled(target / s)).collect()
}

/// Check the three thresholding axioms with constant `c = 1` on random
/// entry paths. Each instance draws `Y` with uniform norm log-uniform in
/// `[λ/10, 10λ]` (or `[0.1, 10]` when `λ = 0`) and `Z = Y + D` with
/// `sup_θ ‖D‖ ≤ λ`; axiom (ii) is tested on `Z` rescaled to norm `≤ λ`.
pub fn verify_threshold_axioms(
    rule: ThresholdRule,
    lambda: f64,
    instances: usize,
    grid_len: usize,
    r: usize,
    seed: u64,
) -> Result<AxiomReport> {
    verify_axioms_with(|z, l| threshold_entry(rule, z, l), lambda, instances, grid_len, r, seed)
}

/// Axiom checker for an arbitrary entrywise operator.
pub fn verify_axioms_with(
    op: impl Fn(&[CMatrix], f64) -> EntryPath,
    lambda: f64,
    instances: usize,
    grid_len: usize,
    r: usize,
    seed: u64,
) -> Result<AxiomReport> {
    check_lambda(lambda)?;
    if grid_len == 0 || r == 0 {
        return Err(Error::Dimension("axiom instances need a nonempty grid and basis".into()));
    }
    let c = 1.0;
    let mut rng = rng_from_seed(seed);
    let scale = if lambda > 0.0 { lambda } else { 1.0 };
    let mut violations = [0usize; 3];
    let mut counterexamples = Vec::new();
    let mut record = |v: AxiomViolation, violations: &mut [usize; 3]| {
        violations[v.axiom as usize - 1] += 1;
        if counterexamples.len() < MAX_COUNTEREXAMPLES {
            counterexamples.push(v);
        }
    };
    for instance in 0..instances {
        let u: f64 = rand::Rng::random(&mut rng);
        let y_norm = scale * libm::pow(10.0, 2.0 * u - 1.0);
        let y = rescale(random_path(&mut rng, grid_len, r), y_norm);
        let d_frac: f64 = rand::Rng::random(&mut rng);
        let d = rescale(random_path(&mut rng, grid_len, r), d_frac * lambda);
        let z: EntryPath = y.iter().zip(&d).map(|(a, b)| a + b).collect();

        let sz = op(&z, lambda);
        let lhs = sup_norm(&sz);
        let rhs = c * sup_norm(&y);
        if lhs > rhs + AXIOM_SLACK * (1.0 + rhs) {
            record(AxiomViolation { instance, axiom: 1, lhs, rhs }, &mut violations);
        }

        let shrink: f64 = rand::Rng::random(&mut rng);
        let small = rescale(z.clone(), shrink * lambda);
        let lhs = sup_norm(&op(&small, lambda));
        if lhs > 0.0 {
            record(AxiomViolation { instance, axiom: 2, lhs, rhs: 0.0 }, &mut violations);
        }

        let lhs = sup_diff(&sz, &z);
        if lhs > lambda + AXIOM_SLACK * (1.0 + lambda) {
            record(AxiomViolation { instance, axiom: 3, lhs, rhs: lambda }, &mut violations);
        }
    }
    Ok(AxiomReport { instances, lambda, c, violations, counterexamples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::BasisSpec;
    use crate::curves::KernelMatrix;
    use crate::secondorder::LagWindowKernel;
    use proptest::prelude::*;

    fn spec_from(values: Vec<ComplexKernelMatrix>) -> SpectralDensity {
        let grid = (0..values.len()).map(|i| i as f64 * 0.1).collect();
        let r = values[0].r();
        SpectralDensity::new(grid, values, None, LagWindowKernel::Rectangular, BasisSpec::fourier(r).unwrap()).unwrap()
    }

    fn random_spec(seed: u64, p: usize, r: usize, len: usize) -> SpectralDensity {
        let mut rng = rng_from_seed(seed);
        let values = (0..len)
            .map(|_| {
                KernelMatrix::from_block_matrix(
                    p,
                    r,
                    CMatrix::from_fn(p * r, p * r, |_, _| Complex64::new(standard_normal(&mut rng), standard_normal(&mut rng))),
                )
                .unwrap()
            })
            .collect();
        spec_from(values)
    }

    #[test]
    fn lambda_zero_is_identity() {
        let s = random_spec(1, 3, 2, 4);
        let t = soft_threshold_uniform(&s, 0.0).unwrap();
        assert_eq!(t.estimate(), s);
        assert_eq!(t.kept_count(), 9);
    }

    #[test]
    fn large_lambda_zeroes_everything() {
        let s = random_spec(2, 3, 2, 4);
        let top = s.uniform_entry_norms().max_abs();
        let t = soft_threshold_uniform(&s, top).unwrap();
        assert_eq!(t.estimate().sup_norm_s_max(), 0.0);
        assert!(t.support().is_empty());
    }

    #[test]
    fn single_entry_factor() {
        let mut f = ComplexKernelMatrix::zeros(1, 1);
        f.set(0, 0, 0, 0, Complex64::new(2.0, 0.0));
        let mut g = ComplexKernelMatrix::zeros(1, 1);
        g.set(0, 0, 0, 0, Complex64::new(0.0, 1.0));
        let t = soft_threshold_uniform(&spec_from(vec![f, g]), 0.5).unwrap();
        assert_eq!(t.factors[(0, 0)], 0.75);
        assert_eq!(t.value_at(0).get(0, 0, 0, 0), Complex64::new(1.5, 0.0));
        assert_eq!(t.value_at(1).get(0, 0, 0, 0), Complex64::new(0.0, 0.75));
    }

    #[test]
    fn negative_lambda_rejected() {
        assert!(soft_threshold_uniform(&random_spec(3, 2, 1, 2), -1.0).is_err());
    }

    #[test]
    fn fixed_theta_uses_one_frequency() {
        let s = random_spec(4, 2, 2, 3);
        let t = threshold_fixed(&s, 0.1, 0.0, ThresholdRule::Soft).unwrap();
        assert_eq!(t.base.values, vec![s.values[1].clone()]);
        assert!(threshold_fixed(&s, 0.15, 0.0, ThresholdRule::Soft).is_err());
    }

    #[test]
    fn support_of_diagonal() {
        let mut f = ComplexKernelMatrix::zeros(3, 1);
        for j in 0..3 {
            f.set(j, j, 0, 0, Complex64::new(1.0, 0.0));
        }
        assert_eq!(support(&spec_from(vec![f]), 0.0), vec![(0, 0), (1, 1), (2, 2)]);
        assert!(support(&spec_from(vec![ComplexKernelMatrix::zeros(3, 1)]), 0.0).is_empty());
    }

    #[test]
    fn s1_error_cases() {
        let s = random_spec(5, 3, 2, 4);
        let t = soft_threshold_uniform(&s, 0.0).unwrap();
        assert_eq!(sparse_error_s1(&t, &s).unwrap(), 0.0);
        let zero = spec_from(s.values.iter().map(|v| v.scaled(0.0)).collect());
        let direct = s.values.iter().map(|v| v.norm_s_1()).fold(0.0, f64::max);
        assert_eq!(sparse_error_s1(&t, &zero).unwrap(), direct);
        let other = random_spec(5, 3, 2, 5);
        assert!(matches!(sparse_error_s1(&t, &other), Err(Error::GridMismatch)));
    }

    #[test]
    fn soft_rule_satisfies_axioms() {
        let rep = verify_threshold_axioms(ThresholdRule::Soft, 0.7, 300, 5, 2, 9).unwrap();
        assert!(rep.passed(), "{:?}", rep.counterexamples);
        let rep = verify_threshold_axioms(ThresholdRule::Soft, 0.0, 50, 5, 2, 9).unwrap();
        assert!(rep.passed());
    }

    #[test]
    fn hard_rule_breaks_only_the_contraction_axiom() {
        let rep = verify_threshold_axioms(ThresholdRule::Hard, 0.7, 300, 5, 2, 9).unwrap();
        assert!(rep.violations[0] > 0);
        assert_eq!(rep.violations[1], 0);
        assert_eq!(rep.violations[2], 0);
    }

    #[test]
    fn median_rule() {
        let mut f = ComplexKernelMatrix::zeros(2, 1);
        for (i, v) in [1.0, 2.0, 3.0, 10.0].iter().enumerate() {
            f.set(i / 2, i % 2, 0, 0, Complex64::new(*v, 0.0));
        }
        let s = spec_from(vec![f]);
        assert_eq!(median_lambda(&s, 2.0, None).unwrap(), 5.0);
        assert_eq!(median_lambda(&s, 1.0, Some(&[(0, 1)])).unwrap(), 2.0);
    }

    proptest! {
        #[test]
        fn shrinkage_and_monotone_support(seed in 0u64..500, l1 in 0.0f64..4.0, dl in 0.0f64..2.0) {
            let s = random_spec(seed, 3, 2, 3);
            let a = soft_threshold_uniform(&s, l1).unwrap();
            let b = soft_threshold_uniform(&s, l1 + dl).unwrap();
            prop_assert!(b.kept_count() <= a.kept_count());
            for i in 0..s.len() {
                let v = a.value_at(i);
                for j in 0..3 {
                    for k in 0..3 {
                        prop_assert!(v.block_norm(j, k) <= s.values[i].block_norm(j, k) + 1e-12);
                        prop_assert_eq!(a.kept(j, k), a.uniform_entry_norms[(j, k)] > l1);
                    }
                }
            }
        }
    }
}
