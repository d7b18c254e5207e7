//! Per-step scalar QP `min ½·Q·u² + P·u  s.t.  u_min ≤ u ≤ u_max`.

use serde::{Deserialize, Serialize};

use crate::backstepping::{stabilization_term, ErrorCoords, Gains};
use crate::error::{Error, Result};

/// Tracking weight `t` and control-effort weight `r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Weights {
    #[serde(rename = "T")]
    pub t: f64,
    #[serde(rename = "R")]
    pub r: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Self { t: 100.0, r: 0.01 }
    }
}

impl Weights {
    pub fn validate(&self) -> Result<()> {
        if !(self.t.is_finite() && self.t > 0.0) {
            return Err(Error::config(
                "weights.T",
                format!("T > 0 required, got {}", self.t),
            ));
        }
        if !(self.r.is_finite() && self.r > 0.0) {
            return Err(Error::config(
                "weights.R",
                format!("R > 0 required, got {}", self.r),
            ));
        }
        if self.t <= self.r {
            log::warn!(
                "tracking weight T = {} is not larger than effort weight R = {}",
                self.t,
                self.r
            );
        }
        Ok(())
    }
}

/// Actuator box `[min, max]` on the control force.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Bounds {
    pub min: f64,
    pub max: f64,
}

impl Default for Bounds {
    fn default() -> Self {
        Self::symmetric(30.0)
    }
}

impl Bounds {
    pub fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    pub fn symmetric(limit: f64) -> Self {
        Self {
            min: -limit,
            max: limit,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.min.is_nan() || self.max.is_nan() || self.min >= self.max {
            return Err(Error::config(
                "bounds",
                format!("u_min < u_max required, got [{}, {}]", self.min, self.max),
            ));
        }
        Ok(())
    }

    pub fn contains(&self, u: f64) -> bool {
        self.min <= u && u <= self.max
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpCoefficients {
    pub p: f64,
    pub q: f64,
    pub bounds: Bounds,
}

/// `P = T·B·(A − ẍ1d + (c1+c2)·S2 + (1−c1²)·S1)`, `Q = T·B² + R`.
///
/// The control-independent constant `½·T·(…)²` of the full index is not
/// carried; it shifts `cost` but not its minimiser.
pub fn assemble(
    a: f64,
    b: f64,
    e: &ErrorCoords,
    ddx1d: f64,
    gains: &Gains,
    w: &Weights,
    bounds: Bounds,
) -> QpCoefficients {
    let p = w.t * b * stabilization_term(a, e, ddx1d, gains);
    let q = w.t * b * b + w.r;
    QpCoefficients { p, q, bounds }
}

impl QpCoefficients {
    pub fn cost(&self, u: f64) -> f64 {
        0.5 * self.q * u * u + self.p * u
    }

    pub fn gradient(&self, u: f64) -> f64 {
        self.q * u + self.p
    }

    /// Closed-form box minimiser `clamp(−P/Q, u_min, u_max)`.
    pub fn solve_oracle(&self) -> f64 {
        (-self.p / self.q).clamp(self.bounds.min, self.bounds.max)
    }

    /// `R / (T·B² + R) = 1 − T·B²/Q`: zero exactly when the optimal control
    /// coincides with the unconstrained stabilising law.
    pub fn condition_residual(&self, w: &Weights) -> f64 {
        w.r / self.q
    }
}
