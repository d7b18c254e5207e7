use nalgebra::Vector3;
use serde::Serialize;

use crate::backstepping::{
    self, error_coords, ideal_v2_dot, lyapunov_v2, reference_at, ErrorCoords, Reference,
};
use crate::error::{Error, Result};
use crate::plant::{self, PendulumParams, PlantState};
use crate::prnn::{self, PrnnState};
use crate::qp::{self, QpCoefficients};
use crate::rls::{self, EstimatedPhysical, RlsState};

use super::Scenario;

/// One row per control step, sampled at the start of the period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub t: f64,
    pub x1: f64,
    pub x2: f64,
    pub x1d: f64,
    pub s1: f64,
    pub s2: f64,
    /// Control applied over the period (always inside the box for the
    /// network controller).
    pub u: f64,
    pub phi: f64,
    pub a: f64,
    pub b: f64,
    pub p: f64,
    pub q: f64,
    pub v2: f64,
    pub v2_dot_ideal: f64,
    pub prnn_residual: f64,
    /// NaN when adaptation is off.
    pub theta_hat: [f64; 3],
    pub condition_residual: f64,
}

/// An `(Π, y)` pair fed to the estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RlsSample {
    pub t: f64,
    pub regressor: Vector3<f64>,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub steps: usize,
    /// Start of the final stretch with `|S1|` inside the settle band.
    pub settling_time: Option<f64>,
    pub max_abs_s1: f64,
    pub final_abs_x1: f64,
    pub integral_u2: f64,
    pub integral_s1_sq: f64,
    pub saturation_fraction: f64,
    /// Start of the final stretch with the network residual inside its band.
    pub prnn_settle_time: Option<f64>,
    pub max_condition_residual: f64,
    /// `‖θ̂ − θ‖ / ‖θ‖` at the end of an adaptive run.
    pub final_theta_error: Option<f64>,
    pub nonphysical_estimate: bool,
    pub aborted: Option<String>,
}

#[derive(Debug)]
pub struct RunOutput {
    pub trace: Vec<TraceRecord>,
    pub summary: RunSummary,
    pub rls_samples: Vec<RlsSample>,
    pub final_rls: Option<RlsState>,
    /// Why the run stopped early, if it did.
    pub abort: Option<Error>,
}

impl RunOutput {
    pub fn completed(&self) -> bool {
        self.abort.is_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Law {
    Network,
    Exact,
}

struct Decision {
    u: f64,
    phi: f64,
    residual: f64,
    a: f64,
    b: f64,
    coeffs: QpCoefficients,
}

struct Adaptation {
    rls: RlsState,
    model: EstimatedPhysical,
    nonphysical: bool,
    samples: Vec<RlsSample>,
}

/// Closed loop with the projection-network controller.
pub fn run(scenario: &Scenario) -> Result<RunOutput> {
    simulate(scenario, Law::Network)
}

/// Closed loop with the unconstrained stabilising law `u = −(…)/B` applied
/// directly; the comparison baseline for the network controller.
pub fn run_exact_baseline(scenario: &Scenario) -> Result<RunOutput> {
    let mut s = scenario.clone();
    s.adaptive = false;
    simulate(&s, Law::Exact)
}

fn simulate(scenario: &Scenario, law: Law) -> Result<RunOutput> {
    scenario.validate()?;
    let timing = scenario.timing;
    let period = timing.control_period;
    let substeps = timing.plant_steps_per_period();
    let n = timing.control_steps();
    let cfg = scenario.prnn_config();
    let truth = scenario.plant;

    let mut adaptation = scenario.adaptive.then(|| {
        let theta0 = scenario.rls.initial_estimate(&truth);
        let model = rls::extract_physical(&theta0)
            .ok()
            .filter(EstimatedPhysical::is_physical)
            .unwrap_or(EstimatedPhysical {
                length: truth.length,
                total_mass: truth.total_mass(),
                pole_mass: truth.pole_mass,
            });
        Adaptation {
            rls: RlsState::new(theta0, scenario.rls.initial_covariance),
            model,
            nonphysical: false,
            samples: Vec::new(),
        }
    });

    let mut trace = Vec::with_capacity(n);
    let mut state = scenario.initial;
    let mut phi = scenario.prnn.phi0;
    let mut previous: Option<(PlantState, f64)> = None;
    let mut abort = None;

    for k in 0..n {
        let t = k as f64 * period;
        if let Err(e) = check_state(&state, t) {
            abort = Some(e);
            break;
        }
        let r = reference_at(&scenario.reference, t);
        let e = error_coords(&state, &r, &scenario.gains);

        if let (Some(ad), Some((prev, u_prev))) = (adaptation.as_mut(), previous) {
            if let Err(err) = observe(ad, scenario, &prev, &state, u_prev, t) {
                abort = Some(err);
                break;
            }
        }

        let model = match adaptation.as_mut() {
            Some(ad) => {
                if k >= scenario.rls.warmup {
                    match rls::extract_physical(&ad.rls.theta_hat) {
                        Ok(est) if est.is_physical() => ad.model = est,
                        _ => {
                            if !ad.nonphysical {
                                log::warn!(
                                    "t = {t:.3}: estimate not physical, keeping last valid model"
                                );
                            }
                            ad.nonphysical = true;
                        }
                    }
                }
                ad.model.to_params(truth.g)
            }
            None => truth,
        };

        let decision = match decide(law, scenario, &model, &state, &e, &r, phi, &cfg, t) {
            Ok(d) => d,
            Err(err) => {
                abort = Some(err);
                break;
            }
        };
        phi = decision.phi;

        let theta_hat = adaptation
            .as_ref()
            .map(|ad| {
                [
                    ad.rls.theta_hat[0],
                    ad.rls.theta_hat[1],
                    ad.rls.theta_hat[2],
                ]
            })
            .unwrap_or([f64::NAN; 3]);
        let record = TraceRecord {
            t,
            x1: state.x1,
            x2: state.x2,
            x1d: r.x1d,
            s1: e.s1,
            s2: e.s2,
            u: decision.u,
            phi: decision.phi,
            a: decision.a,
            b: decision.b,
            p: decision.coeffs.p,
            q: decision.coeffs.q,
            v2: lyapunov_v2(&e),
            v2_dot_ideal: ideal_v2_dot(&e, &scenario.gains),
            prnn_residual: decision.residual,
            theta_hat,
            condition_residual: decision.coeffs.condition_residual(&scenario.weights),
        };
        if let Some(q) = non_finite_field(&record) {
            abort = Some(Error::NonFinite { t, quantity: q });
            break;
        }
        trace.push(record);

        previous = Some((state, decision.u));
        for j in 0..substeps {
            let ts = t + j as f64 * timing.plant_dt;
            match plant::step(
                &truth,
                &state,
                decision.u,
                &scenario.disturbance,
                ts,
                timing.plant_dt,
            ) {
                Ok(next) => state = next,
                Err(err) => {
                    abort = Some(err);
                    break;
                }
            }
        }
        if abort.is_some() {
            break;
        }
    }
    if abort.is_none() {
        let t_end = n as f64 * period;
        abort = check_state(&state, t_end).err();
    }

    let summary = summarize(scenario, &trace, adaptation.as_ref(), abort.as_ref());
    let (rls_samples, final_rls) = match adaptation {
        Some(ad) => (ad.samples, Some(ad.rls)),
        None => (Vec::new(), None),
    };
    Ok(RunOutput {
        trace,
        summary,
        rls_samples,
        final_rls,
        abort,
    })
}

fn check_state(state: &PlantState, t: f64) -> Result<()> {
    if !state.is_finite() {
        return Err(Error::IntegrationBlowup {
            t,
            quantity: "plant state",
        });
    }
    if !state.in_upright_region() {
        return Err(Error::AngleLimit { t, x1: state.x1 });
    }
    Ok(())
}

/// RLS update from the period that just ended. The acceleration is the
/// backward difference of `x2`; the regressor is evaluated at the period's
/// midpoint, where that difference is second-order accurate, with the
/// control that was held over the period.
fn observe(
    ad: &mut Adaptation,
    scenario: &Scenario,
    prev: &PlantState,
    now: &PlantState,
    u_prev: f64,
    t: f64,
) -> Result<()> {
    let dt = scenario.timing.control_period;
    let y = (now.x2 - prev.x2) / dt;
    let mid = PlantState::new(0.5 * (prev.x1 + now.x1), 0.5 * (prev.x2 + now.x2));
    let pi = rls::regressor(&mid, y, u_prev, scenario.plant.g);
    if pi.norm() < scenario.rls.min_excitation {
        return Ok(());
    }
    ad.rls = rls::update(&ad.rls, &pi, y).map_err(|_| Error::NonFinite {
        t,
        quantity: "RLS estimate",
    })?;
    ad.samples.push(RlsSample {
        t,
        regressor: pi,
        y,
    });
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn decide(
    law: Law,
    scenario: &Scenario,
    model: &PendulumParams,
    state: &PlantState,
    e: &ErrorCoords,
    r: &Reference,
    phi: f64,
    cfg: &prnn::PrnnConfig,
    t: f64,
) -> Result<Decision> {
    let a = plant::drift_term(model, state).map_err(|_| Error::NonFinite {
        t,
        quantity: "drift term A",
    })?;
    let b = plant::gain_term(model, state).map_err(|_| Error::NonFinite {
        t,
        quantity: "gain term B",
    })?;
    let coeffs = qp::assemble(
        a,
        b,
        e,
        r.ddx1d,
        &scenario.gains,
        &scenario.weights,
        scenario.bounds,
    );
    match law {
        Law::Network => {
            let relaxed = prnn::relax(&PrnnState::new(phi, &coeffs), &coeffs, cfg).map_err(
                |err| match err {
                    Error::NonFinite { quantity, .. } => Error::NonFinite { t, quantity },
                    other => other,
                },
            )?;
            Ok(Decision {
                u: prnn::project(relaxed.state.u, &coeffs.bounds),
                phi: relaxed.state.phi,
                residual: relaxed.residual,
                a,
                b,
                coeffs,
            })
        }
        Law::Exact => {
            let u = backstepping::stabilizing_control(a, b, e, r.ddx1d, &scenario.gains)
                .ok_or(Error::Uncontrollable { t, b })?;
            Ok(Decision {
                u,
                phi: 0.0,
                residual: 0.0,
                a,
                b,
                coeffs,
            })
        }
    }
}

fn non_finite_field(r: &TraceRecord) -> Option<&'static str> {
    [
        ("control u", r.u),
        ("network state phi", r.phi),
        ("coefficient P", r.p),
        ("coefficient Q", r.q),
        ("V2", r.v2),
    ]
    .into_iter()
    .find(|(_, v)| !v.is_finite())
    .map(|(name, _)| name)
}

/// Start time of the trailing run of samples satisfying `inside`.
fn last_entry_time(trace: &[TraceRecord], inside: impl Fn(&TraceRecord) -> bool) -> Option<f64> {
    let last_outside = trace.iter().rposition(|r| !inside(r));
    match last_outside {
        None => trace.first().map(|r| r.t),
        Some(i) => trace.get(i + 1).map(|r| r.t),
    }
}

fn summarize(
    scenario: &Scenario,
    trace: &[TraceRecord],
    adaptation: Option<&Adaptation>,
    abort: Option<&Error>,
) -> RunSummary {
    let dt = scenario.timing.control_period;
    let bounds = scenario.bounds;
    let n = trace.len();
    let saturated = trace
        .iter()
        .filter(|r| r.u <= bounds.min || r.u >= bounds.max)
        .count();
    let settle = scenario.metrics.settle_tolerance;
    let res_tol = scenario.metrics.residual_tolerance;

    RunSummary {
        steps: n,
        settling_time: last_entry_time(trace, |r| r.s1.abs() < settle),
        max_abs_s1: trace.iter().map(|r| r.s1.abs()).fold(0.0, f64::max),
        final_abs_x1: trace.last().map(|r| r.x1.abs()).unwrap_or(f64::NAN),
        integral_u2: trace.iter().map(|r| r.u * r.u * dt).sum(),
        integral_s1_sq: trace.iter().map(|r| r.s1 * r.s1 * dt).sum(),
        saturation_fraction: if n == 0 {
            0.0
        } else {
            saturated as f64 / n as f64
        },
        prnn_settle_time: last_entry_time(trace, |r| r.prnn_residual < res_tol),
        max_condition_residual: trace
            .iter()
            .map(|r| r.condition_residual)
            .fold(0.0, f64::max),
        final_theta_error: adaptation.map(|ad| {
            let truth = rls::theta_of(&scenario.plant);
            (ad.rls.theta_hat - truth).norm() / truth.norm()
        }),
        nonphysical_estimate: adaptation.is_some_and(|ad| ad.nonphysical),
        aborted: abort.map(|e| e.to_string()),
    }
}
