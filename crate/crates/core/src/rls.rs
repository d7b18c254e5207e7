//! Recursive least squares on the linear-in-parameters form of the angle
//! dynamics,
//!
//! ```text
//! ẋ2 = Π · θ,  θ = [m/(m_c+m), 1/l, 1/(l(m_c+m))]
//! Π  = [¾ẋ2cos²x1 − ¾x2²cos x1 sin x1,  ¾g sin x1,  ¾cos x1·u]
//! ```
//!
//! `ẋ2` appears on both sides, so the regressor needs a measured
//! acceleration.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::backstepping::{ErrorCoords, Gains};
use crate::error::{Error, Result};
use crate::plant::{self, PendulumParams, PlantState};
use crate::qp::{self, Bounds, QpCoefficients, Weights};

/// Smallest `θ̂₂`, `θ̂₃` accepted when inverting to physical parameters.
pub const IDENTIFIABILITY_FLOOR: f64 = 1e-6;

/// True parameter vector for `params`.
pub fn theta_of(params: &PendulumParams) -> Vector3<f64> {
    let ms = params.total_mass();
    Vector3::new(
        params.pole_mass / ms,
        1.0 / params.length,
        1.0 / (params.length * ms),
    )
}

pub fn regressor(state: &PlantState, x2dot: f64, u: f64, g: f64) -> Vector3<f64> {
    let (s, c) = state.x1.sin_cos();
    Vector3::new(
        0.75 * x2dot * c * c - 0.75 * state.x2 * state.x2 * c * s,
        0.75 * g * s,
        0.75 * c * u,
    )
}

/// Estimator knobs, as they appear in scenario files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RlsOptions {
    /// Relative offset of the initial estimate from the truth; applied with
    /// alternating sign `[+, −, +]`.
    pub perturbation: f64,
    /// `M₀ = initial_covariance · I`.
    pub initial_covariance: f64,
    /// Control steps run on the prior model before estimates are used.
    pub warmup: usize,
    /// Updates are skipped when `‖Π‖` is below this.
    pub min_excitation: f64,
}

impl Default for RlsOptions {
    fn default() -> Self {
        Self {
            perturbation: 0.3,
            initial_covariance: 100.0,
            warmup: 50,
            min_excitation: 1e-8,
        }
    }
}

impl RlsOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.perturbation.is_finite() && self.perturbation.abs() < 1.0) {
            return Err(Error::config(
                "rls.perturbation",
                "must satisfy |perturbation| < 1",
            ));
        }
        if !(self.initial_covariance.is_finite() && self.initial_covariance > 0.0) {
            return Err(Error::config("rls.initial_covariance", "must be > 0"));
        }
        if !(self.min_excitation.is_finite() && self.min_excitation >= 0.0) {
            return Err(Error::config("rls.min_excitation", "must be >= 0"));
        }
        Ok(())
    }

    pub fn initial_estimate(&self, truth: &PendulumParams) -> Vector3<f64> {
        let p = self.perturbation;
        theta_of(truth).component_mul(&Vector3::new(1.0 + p, 1.0 - p, 1.0 + p))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RlsState {
    pub theta_hat: Vector3<f64>,
    pub m: Matrix3<f64>,
    pub gain: Vector3<f64>,
    /// Prior error of the latest update.
    pub last_error: f64,
    pub k: usize,
}

impl RlsState {
    pub fn new(theta0: Vector3<f64>, initial_covariance: f64) -> Self {
        Self {
            theta_hat: theta0,
            m: Matrix3::identity() * initial_covariance,
            gain: Vector3::zeros(),
            last_error: 0.0,
            k: 0,
        }
    }
}

/// One forgetting-free RLS step:
/// `G = MΠ/(1 + ΠᵀMΠ)`, `θ̂ += G·(y − Π·θ̂)`, `M = sym((I − GΠᵀ)M)`.
pub fn update(s: &RlsState, pi: &Vector3<f64>, y: f64) -> Result<RlsState> {
    let m_pi = s.m * pi;
    let denom = 1.0 + pi.dot(&m_pi);
    if !(denom.is_finite() && denom > 0.0) {
        return Err(Error::Domain(format!(
            "RLS denominator {denom} is not positive"
        )));
    }
    let gain = m_pi / denom;
    let error = y - pi.dot(&s.theta_hat);
    let theta_hat = s.theta_hat + gain * error;
    let m = (Matrix3::identity() - gain * pi.transpose()) * s.m;
    let m = (m + m.transpose()) * 0.5;
    if !theta_hat.iter().all(|v| v.is_finite()) {
        return Err(Error::Domain("RLS estimate became non-finite".into()));
    }
    Ok(RlsState {
        theta_hat,
        m,
        gain,
        last_error: error,
        k: s.k + 1,
    })
}

/// Physical parameters implied by an estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatedPhysical {
    pub length: f64,
    /// `m̂_c + m̂`.
    pub total_mass: f64,
    pub pole_mass: f64,
}

impl EstimatedPhysical {
    /// Strictly positive masses and length, and a non-vanishing inertia factor.
    pub fn is_physical(&self) -> bool {
        self.length > 0.0
            && self.total_mass > 0.0
            && self.pole_mass > 0.0
            && self.pole_mass / self.total_mass < 4.0 / 3.0
    }

    pub fn to_params(&self, g: f64) -> PendulumParams {
        PendulumParams {
            g,
            cart_mass: self.total_mass - self.pole_mass,
            pole_mass: self.pole_mass,
            length: self.length,
        }
    }
}

pub fn extract_physical(theta_hat: &Vector3<f64>) -> Result<EstimatedPhysical> {
    let (t1, t2, t3) = (theta_hat[0], theta_hat[1], theta_hat[2]);
    let above_floor = |v: f64| v > IDENTIFIABILITY_FLOOR;
    if !above_floor(t2) || !above_floor(t3) || !t1.is_finite() {
        return Err(Error::NotIdentifiable(format!(
            "theta_hat = [{t1}, {t2}, {t3}] has a component at or below {IDENTIFIABILITY_FLOOR}"
        )));
    }
    let total_mass = t2 / t3;
    Ok(EstimatedPhysical {
        length: 1.0 / t2,
        total_mass,
        pole_mass: t1 * total_mass,
    })
}

/// `P̂`, `Q̂`: the QP of `qp::assemble` with drift and gain evaluated on the
/// estimated parameters (gravity is known).
#[allow(clippy::too_many_arguments)]
pub fn adaptive_coefficients(
    est: &EstimatedPhysical,
    g: f64,
    state: &PlantState,
    e: &ErrorCoords,
    ddx1d: f64,
    gains: &Gains,
    w: &Weights,
    bounds: Bounds,
) -> Result<QpCoefficients> {
    if !est.is_physical() {
        return Err(Error::NotIdentifiable(format!(
            "non-physical estimate {est:?}"
        )));
    }
    let model = est.to_params(g);
    let a = plant::drift_term(&model, state)?;
    let b = plant::gain_term(&model, state)?;
    Ok(qp::assemble(a, b, e, ddx1d, gains, w, bounds))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backstepping::{error_coords, Reference};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn theta_for_table_constants() {
        let th = theta_of(&PendulumParams::default());
        assert_relative_eq!(th[0], 0.1 / 1.1, max_relative = 1e-15);
        assert_eq!(th[1], 2.0);
        assert_relative_eq!(th[2], 2.0 / 1.1, max_relative = 1e-15);
    }

    #[test]
    fn regressor_examples() {
        assert_eq!(
            regressor(&PlantState::default(), 0.0, 0.0, 9.8),
            Vector3::zeros()
        );
        assert_eq!(
            regressor(&PlantState::default(), 0.0, 1.0, 9.8),
            Vector3::new(0.0, 0.0, 0.75)
        );
    }

    #[test]
    fn zero_regressor_leaves_state_unchanged() {
        let s = RlsState::new(Vector3::new(0.1, 1.0, 3.0), 100.0);
        let next = update(&s, &Vector3::zeros(), 4.2).unwrap();
        assert_eq!(next.theta_hat, s.theta_hat);
        assert_eq!(next.m, s.m);
    }

    #[test]
    fn exact_estimate_is_a_fixed_point() {
        let p = PendulumParams::default();
        let th = theta_of(&p);
        let state = PlantState::new(0.2, -0.4);
        let (_, xdd) = plant::derivatives(&p, &state, 1.3, 0.0).unwrap();
        let pi = regressor(&state, xdd, 1.3, p.g);
        let next = update(&RlsState::new(th, 100.0), &pi, xdd).unwrap();
        assert!((next.theta_hat - th).norm() < 1e-14);
        assert!(next.last_error.abs() < 1e-14);
    }

    #[test]
    fn extraction_examples() {
        let est = extract_physical(&theta_of(&PendulumParams::default())).unwrap();
        assert_relative_eq!(est.length, 0.5, max_relative = 1e-15);
        assert_relative_eq!(est.total_mass, 1.1, max_relative = 1e-14);
        assert_relative_eq!(est.pole_mass, 0.1, max_relative = 1e-14);
        assert!(est.is_physical());

        let est = extract_physical(&Vector3::new(0.0, 2.0, 2.0)).unwrap();
        assert_eq!((est.length, est.total_mass, est.pole_mass), (0.5, 1.0, 0.0));
        assert!(!est.is_physical());

        assert!(matches!(
            extract_physical(&Vector3::new(0.1, 1e-9, 2.0)),
            Err(Error::NotIdentifiable(_))
        ));
        assert!(extract_physical(&Vector3::new(0.1, 2.0, -1.0)).is_err());
    }

    #[test]
    fn adaptive_coefficients_reduce_to_truth() {
        let p = PendulumParams::default();
        let gains = Gains::default();
        let w = Weights::default();
        let state = PlantState::new(0.07, -0.2);
        let r = Reference {
            x1d: 0.01,
            dx1d: 0.02,
            ddx1d: -0.1,
        };
        let e = error_coords(&state, &r, &gains);
        let est = extract_physical(&theta_of(&p)).unwrap();
        let hat = adaptive_coefficients(
            &est,
            p.g,
            &state,
            &e,
            r.ddx1d,
            &gains,
            &w,
            Bounds::default(),
        )
        .unwrap();
        let a = plant::drift_term(&p, &state).unwrap();
        let b = plant::gain_term(&p, &state).unwrap();
        let truth = qp::assemble(a, b, &e, r.ddx1d, &gains, &w, Bounds::default());
        assert!((hat.p - truth.p).abs() < 1e-12 * (1.0 + truth.p.abs()));
        assert!((hat.q - truth.q).abs() < 1e-12 * truth.q);
    }

    #[test]
    fn doubled_length_estimate() {
        // At upright rest B̂ = (1/1.1) / (1.0 · (4/3 − 0.1/1.1)), half the true gain.
        let p = PendulumParams::default();
        let est = EstimatedPhysical {
            length: 1.0,
            total_mass: 1.1,
            pole_mass: 0.1,
        };
        let w = Weights::default();
        let zero = ErrorCoords::default();
        let hat = adaptive_coefficients(
            &est,
            p.g,
            &PlantState::default(),
            &zero,
            0.0,
            &Gains::default(),
            &w,
            Bounds::default(),
        )
        .unwrap();
        let b_hat = (1.0 / 1.1) / (1.0 * (4.0 / 3.0 - 0.1 / 1.1));
        assert_relative_eq!(hat.q, 100.0 * b_hat * b_hat + 0.01, max_relative = 1e-12);
        assert_eq!(hat.p, 0.0);
        assert!((b_hat - 0.731_707_3).abs() < 1e-6);
    }

    #[test]
    fn non_physical_estimate_is_rejected() {
        let est = EstimatedPhysical {
            length: 0.5,
            total_mass: 1.0,
            pole_mass: 0.0,
        };
        let r = adaptive_coefficients(
            &est,
            9.8,
            &PlantState::default(),
            &ErrorCoords::default(),
            0.0,
            &Gains::default(),
            &Weights::default(),
            Bounds::default(),
        );
        assert!(matches!(r, Err(Error::NotIdentifiable(_))));
    }

    #[test]
    fn covariance_stays_positive_definite() {
        use rand::{Rng, SeedableRng};
        let p = PendulumParams::default();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let mut s = RlsState::new(RlsOptions::default().initial_estimate(&p), 100.0);
        for _ in 0..10_000 {
            let state = PlantState::new(rng.gen_range(-0.5..0.5), rng.gen_range(-2.0..2.0));
            let u = rng.gen_range(-10.0..10.0);
            let (_, xdd) = plant::derivatives(&p, &state, u, 0.0).unwrap();
            s = update(&s, &regressor(&state, xdd, u, p.g), xdd).unwrap();
            assert_eq!(s.m, s.m.transpose());
        }
        let eig = s.m.symmetric_eigen().eigenvalues;
        assert!(eig.iter().all(|v| *v > 0.0), "{eig:?}");
        assert!((s.theta_hat - theta_of(&p)).norm() < 1e-6);
    }

    proptest! {
        #[test]
        fn regressor_reproduces_dynamics(x1 in -1.4f64..1.4, x2 in -4.0f64..4.0, u in -30.0f64..30.0) {
            let p = PendulumParams::default();
            let state = PlantState::new(x1, x2);
            let (_, xdd) = plant::derivatives(&p, &state, u, 0.0).unwrap();
            let pi = regressor(&state, xdd, u, p.g);
            prop_assert!((pi.dot(&theta_of(&p)) - xdd).abs() < 1e-10);
        }
    }
}
