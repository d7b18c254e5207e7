use serde::{Deserialize, Serialize};

use crate::backstepping::{Gains, ReferenceSignal};
use crate::error::{Error, Result};
use crate::plant::{DisturbanceSpec, PendulumParams, PlantState};
use crate::prnn::{PrnnConfig, RateConvention};
use crate::qp::{Bounds, Weights};
use crate::rls::RlsOptions;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PrnnSettings {
    pub vartheta: f64,
    /// RK4 sub-steps per control period.
    pub inner_steps: usize,
    /// Residual below which a period's relaxation stops early.
    pub tol: f64,
    pub rate_convention: RateConvention,
    /// Network state at `t = 0`.
    pub phi0: f64,
}

impl Default for PrnnSettings {
    fn default() -> Self {
        Self {
            vartheta: 50.0,
            inner_steps: 20,
            tol: 0.0,
            rate_convention: RateConvention::Multiply,
            phi0: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Timing {
    pub plant_dt: f64,
    pub control_period: f64,
    pub duration: f64,
}

impl Default for Timing {
    fn default() -> Self {
        Self {
            plant_dt: 1e-3,
            control_period: 1e-2,
            duration: 5.0,
        }
    }
}

impl Timing {
    pub fn plant_steps_per_period(&self) -> usize {
        (self.control_period / self.plant_dt).round() as usize
    }

    pub fn control_steps(&self) -> usize {
        (self.duration / self.control_period).round() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricOptions {
    /// Band on `|S1|` used for the settling time.
    pub settle_tolerance: f64,
    /// Band on the network residual used for its convergence time.
    pub residual_tolerance: f64,
}

impl Default for MetricOptions {
    fn default() -> Self {
        Self {
            settle_tolerance: 0.01,
            residual_tolerance: 1e-6,
        }
    }
}

/// Everything needed to reproduce one closed-loop run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Scenario {
    pub seed: u64,
    pub adaptive: bool,
    pub plant: PendulumParams,
    pub initial: PlantState,
    pub reference: ReferenceSignal,
    pub disturbance: DisturbanceSpec,
    pub gains: Gains,
    pub weights: Weights,
    pub bounds: Bounds,
    pub prnn: PrnnSettings,
    pub timing: Timing,
    pub rls: RlsOptions,
    pub metrics: MetricOptions,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            seed: 0,
            adaptive: false,
            plant: PendulumParams::default(),
            initial: PlantState::new(0.1, 0.0),
            reference: ReferenceSignal::default(),
            disturbance: DisturbanceSpec::None,
            gains: Gains::default(),
            weights: Weights::default(),
            bounds: Bounds::default(),
            prnn: PrnnSettings::default(),
            timing: Timing::default(),
            rls: RlsOptions::default(),
            metrics: MetricOptions::default(),
        }
    }
}

impl Scenario {
    pub fn prnn_config(&self) -> PrnnConfig {
        let mut cfg = PrnnConfig::for_period(
            self.prnn.vartheta,
            self.timing.control_period,
            self.prnn.inner_steps,
        );
        cfg.tol = self.prnn.tol;
        cfg.convention = self.prnn.rate_convention;
        cfg
    }

    /// Set the master seed; a random disturbance draws from it too.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        if let DisturbanceSpec::BoundedUniformRandom { seed: s, .. } = &mut self.disturbance {
            *s = seed;
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.plant.validate()?;
        if !self.initial.is_finite() {
            return Err(Error::config("initial", "state must be finite"));
        }
        self.reference.validate()?;
        self.disturbance.validate()?;
        self.gains.validate()?;
        self.weights.validate()?;
        self.bounds.validate()?;
        self.rls.validate()?;

        let t = &self.timing;
        for (key, v) in [
            ("timing.plant_dt", t.plant_dt),
            ("timing.control_period", t.control_period),
            ("timing.duration", t.duration),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(
                    key,
                    format!("must be finite and > 0, got {v}"),
                ));
            }
        }
        let n = t.plant_steps_per_period();
        if n == 0 || (n as f64 * t.plant_dt - t.control_period).abs() > 1e-9 * t.control_period {
            return Err(Error::config(
                "timing.control_period",
                format!("must be an integer multiple of plant_dt = {}", t.plant_dt),
            ));
        }
        if t.control_steps() == 0 {
            return Err(Error::config(
                "timing.duration",
                "shorter than one control period",
            ));
        }
        if !self.prnn.phi0.is_finite() {
            return Err(Error::config("prnn.phi0", "must be finite"));
        }
        self.prnn_config().validate()?;
        let m = &self.metrics;
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !(positive(m.settle_tolerance) && positive(m.residual_tolerance)) {
            return Err(Error::config(
                "metrics",
                "tolerances must be finite and > 0",
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        Scenario::default().validate().unwrap();
    }

    #[test]
    fn rejects_bad_values() {
        let mut s = Scenario::default();
        s.gains.c1 = -1.0;
        let err = s.validate().unwrap_err().to_string();
        assert!(err.contains("c1 > 0 required"), "{err}");

        let mut s = Scenario::default();
        s.timing.control_period = 0.0105;
        assert!(s.validate().is_err());

        let s = Scenario {
            bounds: Bounds::new(3.0, -3.0),
            ..Scenario::default()
        };
        assert!(s.validate().is_err());

        let mut s = Scenario::default();
        s.prnn.vartheta = 0.0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn inner_steps_tile_the_period() {
        let s = Scenario::default();
        let cfg = s.prnn_config();
        assert!((cfg.inner_dt * cfg.inner_steps as f64 - s.timing.control_period).abs() < 1e-15);
        assert!((cfg.inner_dt - 5e-4).abs() < 1e-15);
    }
}
