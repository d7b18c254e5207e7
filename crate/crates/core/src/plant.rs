//! Angle subsystem of the cart-pole: ground-truth dynamics, disturbance
//! injection and the fixed-step RK4 integrator used by the simulator.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical constants of the pendulum and cart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PendulumParams {
    /// Gravitational acceleration (m/s²).
    pub g: f64,
    /// Cart mass (kg).
    pub cart_mass: f64,
    /// Pendulum mass (kg).
    pub pole_mass: f64,
    /// Length to the pendulum's centre of mass (m).
    pub length: f64,
}

impl Default for PendulumParams {
    fn default() -> Self {
        Self {
            g: 9.8,
            cart_mass: 1.0,
            pole_mass: 0.1,
            length: 0.5,
        }
    }
}

impl PendulumParams {
    pub fn total_mass(&self) -> f64 {
        self.cart_mass + self.pole_mass
    }

    pub fn validate(&self) -> Result<()> {
        for (key, v) in [
            ("plant.g", self.g),
            ("plant.cart_mass", self.cart_mass),
            ("plant.pole_mass", self.pole_mass),
            ("plant.length", self.length),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(
                    key,
                    format!("must be finite and > 0, got {v}"),
                ));
            }
        }
        Ok(())
    }

    /// `l·(4/3 − m cos²x1 / (m_c + m))`, shared by the drift and gain terms.
    fn inertia_factor(&self, cos_x1: f64) -> f64 {
        self.length * (4.0 / 3.0 - self.pole_mass * cos_x1 * cos_x1 / self.total_mass())
    }
}

/// Pendulum angle `x1` (rad) and angular velocity `x2` (rad/s).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlantState {
    pub x1: f64,
    pub x2: f64,
}

impl PlantState {
    pub fn new(x1: f64, x2: f64) -> Self {
        Self { x1, x2 }
    }

    pub fn is_finite(&self) -> bool {
        self.x1.is_finite() && self.x2.is_finite()
    }

    /// True while the gain term keeps a fixed (positive) sign.
    pub fn in_upright_region(&self) -> bool {
        self.x1.abs() < std::f64::consts::FRAC_PI_2
    }
}

/// Additive disturbance `d(t)` on the angular acceleration.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DisturbanceSpec {
    #[default]
    None,
    Constant {
        amplitude: f64,
    },
    Sinusoid {
        amplitude: f64,
        frequency: f64,
    },
    /// Uniform on `[-amplitude, amplitude]`, redrawn every `hold` seconds.
    /// Each hold interval has its own RNG stream, so the value is a pure
    /// function of `(seed, t)`.
    BoundedUniformRandom {
        amplitude: f64,
        seed: u64,
        #[serde(default = "default_hold")]
        hold: f64,
    },
}

fn default_hold() -> f64 {
    0.01
}

impl DisturbanceSpec {
    pub fn validate(&self) -> Result<()> {
        let amp = match *self {
            DisturbanceSpec::None => return Ok(()),
            DisturbanceSpec::Constant { amplitude } => amplitude,
            DisturbanceSpec::Sinusoid {
                amplitude,
                frequency,
            } => {
                if !(frequency.is_finite() && frequency >= 0.0) {
                    return Err(Error::config(
                        "disturbance.frequency",
                        "must be finite and >= 0",
                    ));
                }
                amplitude
            }
            DisturbanceSpec::BoundedUniformRandom {
                amplitude, hold, ..
            } => {
                if !(hold.is_finite() && hold > 0.0) {
                    return Err(Error::config("disturbance.hold", "must be finite and > 0"));
                }
                amplitude
            }
        };
        if !(amp.is_finite() && amp >= 0.0) {
            return Err(Error::config(
                "disturbance.amplitude",
                "must be finite and >= 0",
            ));
        }
        Ok(())
    }

    pub fn sample(&self, t: f64) -> f64 {
        match *self {
            DisturbanceSpec::None => 0.0,
            DisturbanceSpec::Constant { amplitude } => amplitude,
            DisturbanceSpec::Sinusoid {
                amplitude,
                frequency,
            } => amplitude * (2.0 * std::f64::consts::PI * frequency * t).sin(),
            DisturbanceSpec::BoundedUniformRandom {
                amplitude,
                seed,
                hold,
            } => {
                if amplitude == 0.0 {
                    return 0.0;
                }
                let bin = (t / hold).floor().max(0.0) as u64;
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(bin);
                rng.gen_range(-amplitude..=amplitude)
            }
        }
    }
}

fn check_finite(params: &PendulumParams, state: &PlantState) -> Result<()> {
    if !state.is_finite() {
        return Err(Error::Domain(format!("non-finite state {state:?}")));
    }
    if !(params.g.is_finite()
        && params.cart_mass.is_finite()
        && params.pole_mass.is_finite()
        && params.length.is_finite())
    {
        return Err(Error::Domain(format!("non-finite parameters {params:?}")));
    }
    Ok(())
}

/// Drift term `A(x)` of the angular acceleration.
pub fn drift_term(params: &PendulumParams, state: &PlantState) -> Result<f64> {
    check_finite(params, state)?;
    let (s, c) = state.x1.sin_cos();
    let num = params.g * s
        - params.pole_mass * params.length * state.x2 * state.x2 * c * s / params.total_mass();
    Ok(num / params.inertia_factor(c))
}

/// Input gain `B(x)` of the angular acceleration.
pub fn gain_term(params: &PendulumParams, state: &PlantState) -> Result<f64> {
    check_finite(params, state)?;
    let c = state.x1.cos();
    Ok(c / params.total_mass() / params.inertia_factor(c))
}

/// State derivative `(x2, A + B·u + d)`.
pub fn derivatives(
    params: &PendulumParams,
    state: &PlantState,
    u: f64,
    d: f64,
) -> Result<(f64, f64)> {
    if !(u.is_finite() && d.is_finite()) {
        return Err(Error::Domain(format!("non-finite input u = {u}, d = {d}")));
    }
    let a = drift_term(params, state)?;
    let b = gain_term(params, state)?;
    Ok((state.x2, a + b * u + d))
}

/// One classic RK4 step of length `dt` with `u` held constant. The
/// disturbance is evaluated at each stage time.
pub fn step(
    params: &PendulumParams,
    state: &PlantState,
    u: f64,
    disturbance: &DisturbanceSpec,
    t: f64,
    dt: f64,
) -> Result<PlantState> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::Domain(format!("step size must be > 0, got {dt}")));
    }
    let blowup = |_| Error::IntegrationBlowup {
        t,
        quantity: "plant state",
    };
    let f =
        |s: &PlantState, tt: f64| derivatives(params, s, u, disturbance.sample(tt)).map_err(blowup);

    let h = 0.5 * dt;
    let k1 = f(state, t)?;
    let k2 = f(
        &PlantState::new(state.x1 + h * k1.0, state.x2 + h * k1.1),
        t + h,
    )?;
    let k3 = f(
        &PlantState::new(state.x1 + h * k2.0, state.x2 + h * k2.1),
        t + h,
    )?;
    let k4 = f(
        &PlantState::new(state.x1 + dt * k3.0, state.x2 + dt * k3.1),
        t + dt,
    )?;

    let next = PlantState::new(
        state.x1 + dt / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
        state.x2 + dt / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
    );
    if !next.is_finite() {
        return Err(Error::IntegrationBlowup {
            t,
            quantity: "plant state",
        });
    }
    Ok(next)
}

/// Conserved quantity of the unforced, undisturbed angle dynamics:
/// `½·l·(4/3 − m cos²x1/(m_c+m))·x2² + g cos x1`.
pub fn energy(params: &PendulumParams, state: &PlantState) -> f64 {
    let c = state.x1.cos();
    0.5 * params.inertia_factor(c) * state.x2 * state.x2 + params.g * c
}
