//! Trace-level Lyapunov checks for the second backstepping loop.
//!
//! With `u = Q⁻¹(φ − P)` and `T·B²/Q ≈ 1`, the composite function
//! `V2 = ½S1² + ½S2²` obeys
//!
//! ```text
//! V̇2 = −c1·S1² − c2·S2² + S2·B·Q⁻¹·φ
//! ```
//!
//! The monitor uses `φ = Q·u + P` recomputed from the applied `u`, which
//! equals the logged network state whenever the output clamp is inactive,
//! and integrates the prediction over each period with the trapezoid rule
//! while holding `u` at the value actually applied.

use serde::Serialize;

use crate::backstepping::Gains;

use super::run::TraceRecord;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonitorConfig {
    pub gains: Gains,
    /// Allowed excess of the observed `V̇2` over the prediction.
    pub tolerance: f64,
    /// Intervals starting before this time are skipped (network transient).
    pub start_time: f64,
}

impl MonitorConfig {
    /// Tolerance `10·Δt + 1e−6`, with `Δt` the sample spacing.
    pub fn new(gains: Gains, control_period: f64) -> Self {
        Self {
            gains,
            tolerance: 10.0 * control_period + 1e-6,
            start_time: 0.0,
        }
    }

    pub fn after(mut self, start_time: f64) -> Self {
        self.start_time = start_time;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Violation {
    pub index: usize,
    pub t: f64,
    pub observed: f64,
    pub predicted: f64,
}

impl Violation {
    pub fn excess(&self) -> f64 {
        self.observed - self.predicted
    }
}

fn predicted_rate(r: &TraceRecord, u_held: f64, gains: &Gains) -> f64 {
    let phi = r.q * u_held + r.p;
    -gains.c1 * r.s1 * r.s1 - gains.c2 * r.s2 * r.s2 + r.s2 * r.b * phi / r.q
}

/// Finite-difference `V̇2` for each interval with its predicted value.
pub fn v2_rates(trace: &[TraceRecord], gains: &Gains) -> Vec<(usize, f64, f64)> {
    trace
        .windows(2)
        .enumerate()
        .map(|(k, w)| {
            let (a, b) = (&w[0], &w[1]);
            let observed = (b.v2 - a.v2) / (b.t - a.t);
            let predicted = 0.5 * (predicted_rate(a, a.u, gains) + predicted_rate(b, a.u, gains));
            (k, observed, predicted)
        })
        .collect()
}

/// Intervals where `V2` rose faster than the correction term allows.
pub fn lyapunov_monitor(trace: &[TraceRecord], cfg: &MonitorConfig) -> Vec<Violation> {
    v2_rates(trace, &cfg.gains)
        .into_iter()
        .filter(|(k, _, _)| trace[*k].t >= cfg.start_time)
        .filter(|(_, observed, predicted)| observed - predicted > cfg.tolerance)
        .map(|(k, observed, predicted)| Violation {
            index: k,
            t: trace[k].t,
            observed,
            predicted,
        })
        .collect()
}

/// Largest `|finite-difference V̇2 − (−c1·S1² − c2·S2²)|` over the trace, the
/// ideal rate averaged over each interval.
pub fn ideal_rate_error(trace: &[TraceRecord]) -> f64 {
    trace
        .windows(2)
        .map(|w| {
            let observed = (w[1].v2 - w[0].v2) / (w[1].t - w[0].t);
            (observed - 0.5 * (w[0].v2_dot_ideal + w[1].v2_dot_ideal)).abs()
        })
        .fold(0.0, f64::max)
}
