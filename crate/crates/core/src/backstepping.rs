//! Backstepping error coordinates, the first virtual control and the
//! composite Lyapunov function used to certify both loops.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plant::PlantState;

/// Positive backstepping gains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Gains {
    pub c1: f64,
    pub c2: f64,
}

impl Default for Gains {
    fn default() -> Self {
        Self { c1: 2.0, c2: 2.0 }
    }
}

impl Gains {
    pub fn validate(&self) -> Result<()> {
        if !(self.c1.is_finite() && self.c1 > 0.0) {
            return Err(Error::config(
                "gains.c1",
                format!("c1 > 0 required, got {}", self.c1),
            ));
        }
        if !(self.c2.is_finite() && self.c2 > 0.0) {
            return Err(Error::config(
                "gains.c2",
                format!("c2 > 0 required, got {}", self.c2),
            ));
        }
        Ok(())
    }
}

/// Desired angle trajectory. Every variant is analytic so the first two
/// derivatives are exact.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ReferenceSignal {
    Constant {
        setpoint: f64,
    },
    Sinusoid {
        amplitude: f64,
        frequency: f64,
        #[serde(default)]
        offset: f64,
    },
    /// Quintic `10s³ − 15s⁴ + 6s⁵` blend from `from` to `to` over `ramp`
    /// seconds; zero velocity and acceleration at both ends.
    Smoothstep {
        from: f64,
        to: f64,
        ramp: f64,
    },
}

impl Default for ReferenceSignal {
    fn default() -> Self {
        ReferenceSignal::Smoothstep {
            from: 0.1,
            to: 0.0,
            ramp: 2.0,
        }
    }
}

/// `(x1d, ẋ1d, ẍ1d)` at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Reference {
    pub x1d: f64,
    pub dx1d: f64,
    pub ddx1d: f64,
}

impl ReferenceSignal {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            ReferenceSignal::Constant { setpoint } => setpoint.is_finite(),
            ReferenceSignal::Sinusoid {
                amplitude,
                frequency,
                offset,
            } => {
                amplitude.is_finite()
                    && offset.is_finite()
                    && frequency.is_finite()
                    && frequency >= 0.0
            }
            ReferenceSignal::Smoothstep { from, to, ramp } => {
                from.is_finite() && to.is_finite() && ramp.is_finite() && ramp > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::config(
                "reference",
                format!("invalid reference {self:?}"),
            ))
        }
    }
}

pub fn reference_at(signal: &ReferenceSignal, t: f64) -> Reference {
    match *signal {
        ReferenceSignal::Constant { setpoint } => Reference {
            x1d: setpoint,
            dx1d: 0.0,
            ddx1d: 0.0,
        },
        ReferenceSignal::Sinusoid {
            amplitude,
            frequency,
            offset,
        } => {
            let w = 2.0 * std::f64::consts::PI * frequency;
            let (s, c) = (w * t).sin_cos();
            Reference {
                x1d: offset + amplitude * s,
                dx1d: amplitude * w * c,
                ddx1d: -amplitude * w * w * s,
            }
        }
        ReferenceSignal::Smoothstep { from, to, ramp } => {
            let tau = (t / ramp).clamp(0.0, 1.0);
            let span = to - from;
            let (t2, t3) = (tau * tau, tau * tau * tau);
            let blend = t3 * (10.0 - 15.0 * tau + 6.0 * t2);
            let dblend = 30.0 * t2 * (1.0 - tau) * (1.0 - tau);
            let ddblend = 60.0 * tau * (1.0 - tau) * (1.0 - 2.0 * tau);
            Reference {
                x1d: from + span * blend,
                dx1d: span * dblend / ramp,
                ddx1d: span * ddblend / (ramp * ramp),
            }
        }
    }
}

/// Tracking error `S1`, velocity-level error `S2` and the first virtual
/// control `γ1 = −c1·S1`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ErrorCoords {
    pub s1: f64,
    pub s2: f64,
    pub gamma1: f64,
}

pub fn error_coords(state: &PlantState, r: &Reference, gains: &Gains) -> ErrorCoords {
    let s1 = state.x1 - r.x1d;
    let gamma1 = -gains.c1 * s1;
    let s2 = state.x2 - r.dx1d - gamma1;
    ErrorCoords { s1, s2, gamma1 }
}

impl ErrorCoords {
    pub fn s1_dot(&self) -> f64 {
        self.s2 + self.gamma1
    }

    /// Closed form `γ̇1 = −c1·S2 + c1²·S1`.
    pub fn gamma1_dot(&self, gains: &Gains) -> f64 {
        -gains.c1 * self.s2 + gains.c1 * gains.c1 * self.s1
    }

    /// `Ṡ2 = A + B·u − ẍ1d + c1·S2 − c1²·S1`.
    pub fn s2_dot(&self, a: f64, b: f64, u: f64, ddx1d: f64, gains: &Gains) -> f64 {
        a + b * u - ddx1d - self.gamma1_dot(gains)
    }
}

/// `A − ẍ1d + (c1 + c2)·S2 + (1 − c1²)·S1`: what `B·u` has to cancel for the
/// second loop to satisfy `V̇2 = −c1·S1² − c2·S2²`.
pub fn stabilization_term(a: f64, e: &ErrorCoords, ddx1d: f64, gains: &Gains) -> f64 {
    a - ddx1d + (gains.c1 + gains.c2) * e.s2 + (1.0 - gains.c1 * gains.c1) * e.s1
}

/// Unconstrained control that makes `V̇2` exactly `−c1·S1² − c2·S2²`.
pub fn stabilizing_control(
    a: f64,
    b: f64,
    e: &ErrorCoords,
    ddx1d: f64,
    gains: &Gains,
) -> Option<f64> {
    if b.abs() < 1e-9 {
        return None;
    }
    Some(-stabilization_term(a, e, ddx1d, gains) / b)
}

pub fn lyapunov_v1(e: &ErrorCoords) -> f64 {
    0.5 * e.s1 * e.s1
}

pub fn lyapunov_v2(e: &ErrorCoords) -> f64 {
    0.5 * e.s1 * e.s1 + 0.5 * e.s2 * e.s2
}

pub fn ideal_v2_dot(e: &ErrorCoords, gains: &Gains) -> f64 {
    -gains.c1 * e.s1 * e.s1 - gains.c2 * e.s2 * e.s2
}
