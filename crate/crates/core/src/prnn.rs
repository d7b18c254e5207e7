//! Projection recurrent network for the scalar box QP.
//!
//! The network state `φ` is the combined multiplier of the two box
//! constraints. The control is algebraic in `φ`,
//!
//! ```text
//! u = (φ − P) / Q
//! ```
//!
//! and `φ` follows
//!
//! ```text
//! dφ/dt = ϑ · (PR_Ψ(u − φ) − u)
//! ```
//!
//! whose equilibria satisfy `u = PR_Ψ(u − ∇J(u))`, i.e. `u` is the box
//! minimiser. Inside the box the flow reduces to `dφ/dt = −ϑ·φ`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qp::{Bounds, QpCoefficients};

/// How the rate parameter enters the flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateConvention {
    /// `dφ/dt = ϑ·(PR − u)`: larger `ϑ` converges faster.
    #[default]
    Multiply,
    /// `ϑ·dφ/dt = PR − u`, the literal left-hand-side placement.
    Divide,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrnnConfig {
    pub vartheta: f64,
    /// RK4 sub-step (s).
    pub inner_dt: f64,
    /// Sub-steps per control period.
    pub inner_steps: usize,
    /// Early exit from `relax` once the equilibrium residual drops below this.
    pub tol: f64,
    pub convention: RateConvention,
}

impl PrnnConfig {
    /// Config whose sub-steps exactly tile one control `period`.
    pub fn for_period(vartheta: f64, period: f64, inner_steps: usize) -> Self {
        Self {
            vartheta,
            inner_dt: period / inner_steps.max(1) as f64,
            inner_steps: inner_steps.max(1),
            tol: 0.0,
            convention: RateConvention::Multiply,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.vartheta.is_finite() && self.vartheta > 0.0) {
            return Err(Error::config(
                "prnn.vartheta",
                format!("vartheta > 0 required, got {}", self.vartheta),
            ));
        }
        if !(self.inner_dt.is_finite() && self.inner_dt > 0.0) {
            return Err(Error::config("prnn.inner_dt", "must be > 0"));
        }
        if self.inner_steps == 0 {
            return Err(Error::config(
                "prnn.inner_steps",
                "at least one sub-step required",
            ));
        }
        if !(self.tol.is_finite() && self.tol >= 0.0) {
            return Err(Error::config("prnn.tol", "must be finite and >= 0"));
        }
        Ok(())
    }

    pub fn effective_rate(&self) -> f64 {
        match self.convention {
            RateConvention::Multiply => self.vartheta,
            RateConvention::Divide => 1.0 / self.vartheta,
        }
    }
}

/// Network state and its algebraic output.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PrnnState {
    pub phi: f64,
    pub u: f64,
}

impl PrnnState {
    /// State carrying `phi`, with the output recomputed for `q`.
    pub fn new(phi: f64, q: &QpCoefficients) -> Self {
        Self {
            phi,
            u: output(phi, q),
        }
    }
}

/// Nearest point of `[min, max]` to `u`.
pub fn project(u: f64, bounds: &Bounds) -> f64 {
    if u < bounds.min {
        bounds.min
    } else if u > bounds.max {
        bounds.max
    } else {
        u
    }
}

/// `u = Q⁻¹·(φ − P)`.
pub fn output(phi: f64, q: &QpCoefficients) -> f64 {
    (phi - q.p) / q.q
}

fn flow(phi: f64, q: &QpCoefficients) -> f64 {
    let u = output(phi, q);
    project(u - phi, &q.bounds) - u
}

/// `dφ/dt` at the state's `φ`; the output is recomputed from `φ`.
pub fn phi_derivative(s: &PrnnState, q: &QpCoefficients, cfg: &PrnnConfig) -> f64 {
    cfg.effective_rate() * flow(s.phi, q)
}

/// `|PR_Ψ(u − φ) − u|`, zero exactly at the network equilibrium.
pub fn equilibrium_residual(s: &PrnnState, q: &QpCoefficients) -> f64 {
    (project(s.u - s.phi, &q.bounds) - s.u).abs()
}

/// Dual feasibility `Q·u + P − φ`.
pub fn stationarity_residual(s: &PrnnState, q: &QpCoefficients) -> f64 {
    q.q * s.u + q.p - s.phi
}

/// Equilibrium network state `φ* = Q·u* + P` (zero when the box is inactive).
pub fn equilibrium_phi(q: &QpCoefficients) -> f64 {
    q.q * q.solve_oracle() + q.p
}

/// `v = ½δ(φ − φ*)² + ½δQ⁻¹(φ − φ*)²`.
pub fn network_lyapunov(phi: f64, q: &QpCoefficients, delta: f64) -> f64 {
    let d = phi - equilibrium_phi(q);
    0.5 * delta * d * d * (1.0 + 1.0 / q.q)
}

fn rk4(phi: f64, q: &QpCoefficients, rate: f64, h: f64) -> f64 {
    let k1 = rate * flow(phi, q);
    let k2 = rate * flow(phi + 0.5 * h * k1, q);
    let k3 = rate * flow(phi + 0.5 * h * k2, q);
    let k4 = rate * flow(phi + h * k3, q);
    phi + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Relaxation {
    pub state: PrnnState,
    pub residual: f64,
    /// Network time actually integrated (s).
    pub elapsed: f64,
}

/// Integrate the network over one control period with `P`, `Q` frozen.
pub fn relax(s: &PrnnState, q: &QpCoefficients, cfg: &PrnnConfig) -> Result<Relaxation> {
    let rate = cfg.effective_rate();
    let mut phi = s.phi;
    let mut state = PrnnState::new(phi, q);
    let mut residual = equilibrium_residual(&state, q);
    let mut elapsed = 0.0;
    for _ in 0..cfg.inner_steps {
        if residual < cfg.tol {
            break;
        }
        phi = rk4(phi, q, rate, cfg.inner_dt);
        elapsed += cfg.inner_dt;
        if !phi.is_finite() {
            return Err(Error::NonFinite {
                t: elapsed,
                quantity: "network state phi",
            });
        }
        state = PrnnState::new(phi, q);
        residual = equilibrium_residual(&state, q);
    }
    Ok(Relaxation {
        state,
        residual,
        elapsed,
    })
}

/// Largest stable-and-accurate RK4 step: the flow is piecewise linear with
/// slope `−rate` inside the box and `−rate/Q` on a face.
pub fn stable_step(q: &QpCoefficients, cfg: &PrnnConfig) -> f64 {
    let stiffness = cfg.effective_rate() * 1.0_f64.max(1.0 / q.q);
    cfg.inner_dt.min(0.25 / stiffness)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Convergence {
    pub relaxation: Relaxation,
    pub converged: bool,
    pub steps: usize,
}

/// Run the frozen-coefficient network until the equilibrium residual falls
/// below `tol` or `max_time` of network time elapses.
pub fn relax_to_tolerance(
    s: &PrnnState,
    q: &QpCoefficients,
    cfg: &PrnnConfig,
    tol: f64,
    max_time: f64,
) -> Result<Convergence> {
    let rate = cfg.effective_rate();
    let h = stable_step(q, cfg);
    let mut phi = s.phi;
    let mut state = PrnnState::new(phi, q);
    let mut residual = equilibrium_residual(&state, q);
    let mut elapsed = 0.0;
    let mut steps = 0;
    while residual >= tol && elapsed < max_time {
        phi = rk4(phi, q, rate, h);
        elapsed += h;
        steps += 1;
        if !phi.is_finite() {
            return Err(Error::NonFinite {
                t: elapsed,
                quantity: "network state phi",
            });
        }
        state = PrnnState::new(phi, q);
        residual = equilibrium_residual(&state, q);
    }
    Ok(Convergence {
        relaxation: Relaxation {
            state,
            residual,
            elapsed,
        },
        converged: residual < tol,
        steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn qp(q: f64, p: f64, lo: f64, hi: f64) -> QpCoefficients {
        QpCoefficients {
            p,
            q,
            bounds: Bounds::new(lo, hi),
        }
    }

    fn cfg(vartheta: f64, inner_dt: f64) -> PrnnConfig {
        PrnnConfig {
            vartheta,
            inner_dt,
            inner_steps: 1,
            tol: 0.0,
            convention: RateConvention::Multiply,
        }
    }

    #[test]
    fn projection_examples() {
        let b = Bounds::new(-1.0, 1.0);
        assert_eq!(project(2.0, &b), 1.0);
        assert_eq!(project(0.3, &b), 0.3);
        assert_eq!(project(-5.0, &b), -1.0);
    }

    #[test]
    fn derivative_examples() {
        let c = cfg(10.0, 1e-3);
        let q0 = qp(3.0, 0.0, -1.0, 1.0);
        assert_eq!(phi_derivative(&PrnnState::new(0.0, &q0), &q0, &c), 0.0);

        let wide = qp(2.0, 0.4, -100.0, 100.0);
        let s = PrnnState::new(0.7, &wide);
        assert_relative_eq!(
            phi_derivative(&s, &wide, &c),
            -10.0 * 0.7,
            max_relative = 1e-12
        );

        let sat = qp(2.0, 3.0, -1.0, 1.0);
        let s = PrnnState::new(1.0, &sat);
        assert_eq!(s.u, -1.0);
        assert_eq!(phi_derivative(&s, &sat, &c), 0.0);
        assert_eq!(equilibrium_phi(&sat), 1.0);
    }

    #[test]
    fn divide_convention_slows_with_larger_rate() {
        let wide = qp(2.0, 0.0, -100.0, 100.0);
        let s = PrnnState::new(1.0, &wide);
        let mut c = cfg(4.0, 1e-3);
        c.convention = RateConvention::Divide;
        assert_relative_eq!(phi_derivative(&s, &wide, &c), -0.25, max_relative = 1e-12);
    }

    #[test]
    fn relax_reaches_oracle() {
        let c = cfg(20.0, 1e-2);
        for phi0 in [-30.0, -1.0, 0.0, 2.5, 40.0] {
            for (q, expected) in [
                (qp(2.0, -1.0, -1.0, 1.0), 0.5),
                (qp(2.0, 3.0, -1.0, 1.0), -1.0),
            ] {
                let out = relax_to_tolerance(&PrnnState::new(phi0, &q), &q, &c, 1e-9, 1e3).unwrap();
                assert!(out.converged);
                assert!(
                    (out.relaxation.state.u - expected).abs() < 1e-6,
                    "phi0={phi0}"
                );
                assert_eq!(q.solve_oracle(), expected);
            }
        }
    }

    #[test]
    fn interior_decay_is_exponential() {
        let vartheta = 5.0_f64;
        let inner_dt = 1e-4_f64;
        let t = 3.0 / vartheta;
        let steps = (t / inner_dt).round() as usize;
        let c = PrnnConfig {
            inner_steps: steps,
            ..cfg(vartheta, inner_dt)
        };
        let q = qp(1.5, 0.2, -1e6, 1e6);
        let phi0 = 3.0;
        let out = relax(&PrnnState::new(phi0, &q), &q, &c).unwrap();
        let exact = phi0 * (-vartheta * t).exp();
        assert!((out.state.phi - exact).abs() < 0.01 * exact);
        assert_relative_eq!(out.state.phi, exact, max_relative = 1e-9);
    }

    #[test]
    fn relax_keeps_output_consistent() {
        let c = PrnnConfig::for_period(50.0, 0.01, 20);
        let q = qp(214.0, 900.0, -2.0, 2.0);
        let mut s = PrnnState::new(0.0, &q);
        for _ in 0..50 {
            s = relax(&s, &q, &c).unwrap().state;
            assert!(stationarity_residual(&s, &q).abs() < 1e-12 * (1.0 + s.phi.abs() + q.p.abs()));
        }
    }

    #[test]
    fn stationarity_examples() {
        let q = qp(1.1, 1.6, -1.0, 1.0);
        let s = PrnnState {
            phi: 1.6 + 1.1 * 0.5,
            u: 0.5,
        };
        assert!(stationarity_residual(&s, &q).abs() < 1e-15);
        let bumped = PrnnState { u: s.u + 0.01, ..s };
        assert_relative_eq!(
            stationarity_residual(&bumped, &q),
            1.1 * 0.01,
            max_relative = 1e-9
        );
    }

    #[test]
    fn non_finite_state_is_an_error() {
        let q = qp(1.0, 0.0, -1.0, 1.0);
        let s = PrnnState {
            phi: f64::NAN,
            u: f64::NAN,
        };
        assert!(relax(&s, &q, &cfg(1.0, 1e-3)).is_err());
    }

    #[test]
    fn oracle_equivalence_random() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let c = cfg(10.0, 1.0);
        for _ in 0..1000 {
            let lo = rng.gen_range(-50.0..40.0);
            let hi = lo + rng.gen_range(0.1..50.0);
            let q = qp(
                rng.gen_range(0.01..100.0),
                rng.gen_range(-100.0..100.0),
                lo,
                hi,
            );
            let phi0 = rng.gen_range(-100.0..100.0);
            let out = relax_to_tolerance(&PrnnState::new(phi0, &q), &q, &c, 1e-9, 1e6).unwrap();
            assert!(out.converged);
            assert!((out.relaxation.state.u - q.solve_oracle()).abs() < 1e-6);
        }
    }

    #[test]
    fn network_lyapunov_non_increasing() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let lo = rng.gen_range(-10.0..5.0);
            let hi = lo + rng.gen_range(0.1..10.0);
            let q = qp(
                rng.gen_range(0.05..50.0),
                rng.gen_range(-50.0..50.0),
                lo,
                hi,
            );
            let c = cfg(rng.gen_range(1.0..50.0), 1.0);
            let h = stable_step(&q, &c);
            let c = PrnnConfig {
                inner_dt: h,
                inner_steps: 1,
                ..c
            };
            let mut s = PrnnState::new(rng.gen_range(-60.0..60.0), &q);
            let mut v = network_lyapunov(s.phi, &q, 1.0);
            for _ in 0..400 {
                s = relax(&s, &q, &c).unwrap().state;
                let next = network_lyapunov(s.phi, &q, 1.0);
                assert!(next <= v + 1e-10 * (1.0 + v), "{next} > {v}");
                v = next;
            }
        }
    }

    #[test]
    fn faster_rate_converges_sooner() {
        let q = qp(3.0, -2.0, -0.5, 0.5);
        let time = |vartheta: f64| {
            let c = cfg(vartheta, 1e-3);
            relax_to_tolerance(&PrnnState::new(5.0, &q), &q, &c, 1e-6, 1e3)
                .unwrap()
                .relaxation
                .elapsed
        };
        let (a, b) = (time(5.0), time(10.0));
        assert!(b <= 0.5 * a + 1e-3, "{a} {b}");
    }

    proptest! {
        #[test]
        fn projection_is_non_expansive(a in -1e3f64..1e3, b in -1e3f64..1e3, lo in -10.0f64..10.0, w in 1e-3f64..20.0) {
            let bx = Bounds::new(lo, lo + w);
            prop_assert!((project(a, &bx) - project(b, &bx)).abs() <= (a - b).abs());
        }

        #[test]
        fn projection_inequality(x in -1e3f64..1e3, lo in -10.0f64..10.0, w in 1e-3f64..20.0, frac in 0.0f64..=1.0) {
            let bx = Bounds::new(lo, lo + w);
            let sigma = lo + frac * w;
            let p = project(x, &bx);
            prop_assert!((p - sigma) * (x - p) >= 0.0);
        }
    }
}
