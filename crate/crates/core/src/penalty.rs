//! Folded-concave penalties (SCAD, MCP) and the adaptive weights they induce.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PenaltyFamily {
    Scad,
    Mcp,
}

impl PenaltyFamily {
    /// Conventional shape parameter: 3.7 for SCAD, 3 for MCP.
    pub fn default_a(self) -> f64 {
        match self {
            PenaltyFamily::Scad => 3.7,
            PenaltyFamily::Mcp => 3.0,
        }
    }

    fn min_a(self) -> f64 {
        match self {
            PenaltyFamily::Scad => 2.0,
            PenaltyFamily::Mcp => 1.0,
        }
    }
}

impl fmt::Display for PenaltyFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PenaltyFamily::Scad => "scad",
            PenaltyFamily::Mcp => "mcp",
        })
    }
}

impl FromStr for PenaltyFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "scad" => Ok(PenaltyFamily::Scad),
            "mcp" => Ok(PenaltyFamily::Mcp),
            other => Err(Error::InvalidInput(format!("unknown penalty family '{other}'"))),
        }
    }
}

/// A penalty family with its shape `a` and level `lambda`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PenaltySpec {
    family: PenaltyFamily,
    a: f64,
    lambda: f64,
}

impl PenaltySpec {
    /// SCAD needs `a > 2`, MCP needs `a > 1`; `lambda` must be nonnegative.
    pub fn new(family: PenaltyFamily, a: f64, lambda: f64) -> Result<Self> {
        if !(a.is_finite() && a > family.min_a()) {
            return Err(Error::InvalidInput(format!(
                "{family} needs a > {}, got {a}",
                family.min_a()
            )));
        }
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::InvalidInput(format!("lambda must be >= 0, got {lambda}")));
        }
        Ok(Self { family, a, lambda })
    }

    pub fn with_default_a(family: PenaltyFamily, lambda: f64) -> Result<Self> {
        Self::new(family, family.default_a(), lambda)
    }

    pub fn family(&self) -> PenaltyFamily {
        self.family
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Same family and shape at another level.
    pub fn at_lambda(&self, lambda: f64) -> Result<Self> {
        Self::new(self.family, self.a, lambda)
    }

    /// `p_λ(t)` for `t >= 0`.
    pub fn value(&self, t: f64) -> f64 {
        let (a, l) = (self.a, self.lambda);
        let t = t.abs();
        match self.family {
            PenaltyFamily::Scad => {
                if t < l {
                    l * t
                } else if t <= a * l {
                    (a * l * t - 0.5 * (t * t + l * l)) / (a - 1.0)
                } else {
                    0.5 * (a + 1.0) * l * l
                }
            }
            PenaltyFamily::Mcp => {
                if t < a * l {
                    l * t - t * t / (2.0 * a)
                } else {
                    0.5 * a * l * l
                }
            }
        }
    }

    /// `p_λ'(t)` for `t > 0`; at `t = 0` this returns the right limit `λ`.
    pub fn deriv(&self, t: f64) -> f64 {
        let (a, l) = (self.a, self.lambda);
        let t = t.abs();
        match self.family {
            PenaltyFamily::Scad => {
                if t <= l {
                    l
                } else {
                    (a * l - t).max(0.0) / (a - 1.0)
                }
            }
            PenaltyFamily::Mcp => {
                if t < a * l {
                    (l - t / a).max(0.0)
                } else {
                    0.0
                }
            }
        }
    }

    /// `w_j = p_λ'(|pilot_j|)`.
    pub fn adaptive_weights(&self, pilot: ArrayView1<f64>) -> Array1<f64> {
        pilot.mapv(|t| self.deriv(t))
    }
}
