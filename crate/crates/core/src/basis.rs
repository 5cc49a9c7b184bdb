//! Orthonormal bases of L²[0,1] and the quadrature rules used with them.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{PI, SQRT_2};

use crate::error::config;
use crate::linalg::RMatrix;
use crate::{Error, Result};

/// Orthonormality tolerance on the quadrature Gram matrix.
pub const GRAM_TOL: f64 = 1e-8;

/// Default number of quadrature nodes for grid work.
pub const DEFAULT_GRID_SIZE: usize = 101;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum BasisKind {
    /// `√2 sin(2πku), √2 cos(2πku)` for `k = 1, 2, …`, truncated to `r` functions.
    Fourier,
    /// Basis functions tabulated on quadrature nodes, linearly interpolated
    /// between them.
    UserGrid {
        nodes: Vec<f64>,
        weights: Vec<f64>,
        /// `G × r`, row `i` holds all basis functions at `nodes[i]`.
        values: RMatrix,
    },
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BasisSpec {
    r: usize,
    kind: BasisKind,
}

impl BasisSpec {
    pub fn fourier(r: usize) -> Result<Self> {
        if r == 0 {
            return Err(config("basis needs at least one function"));
        }
        Ok(Self { r, kind: BasisKind::Fourier })
    }

    /// The four-function Fourier basis used by the simulation design.
    pub fn fourier4() -> Self {
        Self { r: 4, kind: BasisKind::Fourier }
    }

    /// Tabulated basis. Weights must be nonnegative and sum to one, and the
    /// Gram matrix under them must be the identity within [`GRAM_TOL`].
    pub fn user_grid(nodes: Vec<f64>, weights: Vec<f64>, values: RMatrix) -> Result<Self> {
        let g = nodes.len();
        if g < 2 || weights.len() != g || values.rows() != g || values.cols() == 0 {
            return Err(Error::Dimension(format!(
                "user grid basis: {} nodes, {} weights, {}x{} values",
                g,
                weights.len(),
                values.rows(),
                values.cols()
            )));
        }
        if nodes.iter().any(|u| !(0.0..=1.0).contains(u)) || nodes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(config("grid nodes must be strictly increasing within [0, 1]"));
        }
        if weights.iter().any(|&w| w < 0.0 || !w.is_finite()) {
            return Err(config("quadrature weights must be nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > GRAM_TOL {
            return Err(config(format!("quadrature weights sum to {total}, expected 1")));
        }
        let spec = Self { r: values.cols(), kind: BasisKind::UserGrid { nodes, weights, values } };
        let dev = spec.gram_deviation();
        if dev > GRAM_TOL {
            return Err(config(format!("basis is not orthonormal (Gram deviation {dev:e})")));
        }
        Ok(spec)
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn kind(&self) -> &BasisKind {
        &self.kind
    }

    /// Value of basis function `l` at `u`.
    pub fn eval(&self, l: usize, u: f64) -> f64 {
        match &self.kind {
            BasisKind::Fourier => fourier_fn(l, u),
            BasisKind::UserGrid { nodes, values, .. } => {
                let (i, w) = bracket(nodes, u);
                values[(i, l)] * (1.0 - w) + values[(i + 1, l)] * w
            }
        }
    }

    /// All basis functions at `u`.
    pub fn eval_all(&self, u: f64) -> Vec<f64> {
        (0..self.r).map(|l| self.eval(l, u)).collect()
    }

    /// Curve value `Σ_l coeffs[l] φ_l(u)`.
    pub fn eval_curve(&self, coeffs: &[f64], u: f64) -> f64 {
        coeffs.iter().enumerate().map(|(l, c)| c * self.eval(l, u)).sum()
    }

    /// Nodes and weights used to project grid values onto this basis.
    /// Fourier bases use the uniform trapezoid rule with `g` nodes; tabulated
    /// bases use their own grid and ignore `g`.
    pub fn quadrature(&self, g: usize) -> (Vec<f64>, Vec<f64>) {
        match &self.kind {
            BasisKind::Fourier => (uniform_grid(g), trapezoid_weights(g)),
            BasisKind::UserGrid { nodes, weights, .. } => (nodes.clone(), weights.clone()),
        }
    }

    /// Basis values on `nodes`, `G × r`.
    pub fn design(&self, nodes: &[f64]) -> RMatrix {
        RMatrix::from_fn(nodes.len(), self.r, |i, l| self.eval(l, nodes[i]))
    }

    /// Coefficients of the function with the given values on the quadrature nodes.
    pub fn project(&self, design: &RMatrix, weights: &[f64], values: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.r];
        for (i, (&w, &y)) in weights.iter().zip(values).enumerate() {
            let wy = w * y;
            for (l, o) in out.iter_mut().enumerate() {
                *o += wy * design[(i, l)];
            }
        }
        out
    }

    /// Gram matrix under the basis' own quadrature (trapezoid, G=1001 for Fourier).
    pub fn gram(&self) -> RMatrix {
        let (nodes, weights) = self.quadrature(1001);
        let d = self.design(&nodes);
        RMatrix::from_fn(self.r, self.r, |a, b| {
            (0..nodes.len()).map(|i| weights[i] * d[(i, a)] * d[(i, b)]).sum()
        })
    }

    pub fn gram_deviation(&self) -> f64 {
        (&self.gram() - &RMatrix::identity(self.r)).max_abs()
    }
}

fn fourier_fn(l: usize, u: f64) -> f64 {
    let k = (l / 2 + 1) as f64;
    let x = 2.0 * PI * k * u;
    if l.is_multiple_of(2) {
        SQRT_2 * libm::sin(x)
    } else {
        SQRT_2 * libm::cos(x)
    }
}

/// Index `i` and weight `w` such that `u` lies between `nodes[i]` and
/// `nodes[i+1]` at fraction `w`; clamps outside the grid.
fn bracket(nodes: &[f64], u: f64) -> (usize, f64) {
    let last = nodes.len() - 1;
    if u <= nodes[0] {
        return (0, 0.0);
    }
    if u >= nodes[last] {
        return (last - 1, 1.0);
    }
    let i = nodes.partition_point(|&x| x <= u) - 1;
    let i = i.min(last - 1);
    (i, (u - nodes[i]) / (nodes[i + 1] - nodes[i]))
}

/// `g` equispaced points on `[0, 1]` including both endpoints.
pub fn uniform_grid(g: usize) -> Vec<f64> {
    match g {
        0 => Vec::new(),
        1 => vec![0.5],
        _ => (0..g).map(|i| i as f64 / (g - 1) as f64).collect(),
    }
}

/// Composite trapezoid weights for [`uniform_grid`], summing to one.
pub fn trapezoid_weights(g: usize) -> Vec<f64> {
    match g {
        0 => Vec::new(),
        1 => vec![1.0],
        _ => {
            let h = 1.0 / (g - 1) as f64;
            let mut w = vec![h; g];
            w[0] = h / 2.0;
            w[g - 1] = h / 2.0;
            w
        }
    }
}
