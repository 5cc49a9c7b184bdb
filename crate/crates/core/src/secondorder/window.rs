use core::fmt;
use core::str::FromStr;

use crate::error::config;
use crate::Error;

/// Symmetric lag-window kernels supported on `[−1, 1]` with `K(0) = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum LagWindowKernel {
    #[default]
    Rectangular,
    Bartlett,
    Parzen,
    /// Trapezoid: flat on `[−½, ½]`, linear down to zero at `±1`.
    FlatTop,
}

impl LagWindowKernel {
    pub const ALL: [Self; 4] = [Self::Rectangular, Self::Bartlett, Self::Parzen, Self::FlatTop];

    pub fn weight(self, x: f64) -> f64 {
        let a = x.abs();
        if a > 1.0 {
            return 0.0;
        }
        match self {
            Self::Rectangular => 1.0,
            Self::Bartlett => 1.0 - a,
            Self::Parzen => {
                if a <= 0.5 {
                    1.0 - 6.0 * a * a + 6.0 * a * a * a
                } else {
                    2.0 * (1.0 - a) * (1.0 - a) * (1.0 - a)
                }
            }
            Self::FlatTop => {
                if a <= 0.5 {
                    1.0
                } else {
                    2.0 * (1.0 - a)
                }
            }
        }
    }

    /// Weight of lag `h` with truncation lag `m0`; `m0 = 0` keeps lag 0 only.
    pub fn lag_weight(self, h: usize, m0: usize) -> f64 {
        if m0 == 0 {
            return if h == 0 { 1.0 } else { 0.0 };
        }
        self.weight(h as f64 / m0 as f64)
    }

    /// Order `τ` of `1 − K(x) = O(|x|^τ)` near zero; `None` means the kernel
    /// is identically one near zero.
    pub fn tau(self) -> Option<f64> {
        match self {
            Self::Rectangular | Self::FlatTop => None,
            Self::Bartlett => Some(1.0),
            Self::Parzen => Some(2.0),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Rectangular => "rectangular",
            Self::Bartlett => "bartlett",
            Self::Parzen => "parzen",
            Self::FlatTop => "flat_top",
        }
    }
}

impl fmt::Display for LagWindowKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LagWindowKernel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "rectangular" | "truncated" => Ok(Self::Rectangular),
            "bartlett" => Ok(Self::Bartlett),
            "parzen" => Ok(Self::Parzen),
            "flat_top" | "flattop" => Ok(Self::FlatTop),
            other => Err(config(alloc::format!("unknown lag-window kernel '{other}'"))),
        }
    }
}
