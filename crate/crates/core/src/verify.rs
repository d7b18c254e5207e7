//! Desk-scale verification suites with fixed seeds. Each suite reports the
//! worst residual it saw against the threshold it enforces.

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::backstepping::{Gains, ReferenceSignal};
use crate::error::{Error, Result};
use crate::plant::{self, DisturbanceSpec, PendulumParams, PlantState};
use crate::prnn::{self, PrnnConfig, PrnnState, RateConvention};
use crate::qp::{Bounds, QpCoefficients};
use crate::rls;
use crate::sim::{self, MonitorConfig, RlsSample, Scenario};

pub const SUITES: [&str; 7] = [
    "prnn-oracle",
    "interior-decay",
    "gradient",
    "rk4-order",
    "projection",
    "lyapunov",
    "rls-batch",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub name: &'static str,
    pub passed: bool,
    pub worst: f64,
    pub threshold: f64,
    pub detail: String,
}

impl std::fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{:<15} {}  worst {:.3e} (limit {:.3e})  {}",
            self.name,
            if self.passed { "PASS" } else { "FAIL" },
            self.worst,
            self.threshold,
            self.detail
        )
    }
}

fn report(name: &'static str, worst: f64, threshold: f64, ok: bool, detail: String) -> SuiteReport {
    SuiteReport {
        name,
        passed: ok && worst <= threshold,
        worst,
        threshold,
        detail,
    }
}

fn random_qp(rng: &mut ChaCha8Rng) -> QpCoefficients {
    let lo = rng.gen_range(-50.0..40.0);
    let hi = lo + rng.gen_range(0.1..50.0);
    QpCoefficients {
        p: rng.gen_range(-100.0..100.0),
        q: rng.gen_range(0.01..100.0),
        bounds: Bounds::new(lo, hi),
    }
}

fn unit_config(vartheta: f64, inner_dt: f64) -> PrnnConfig {
    PrnnConfig {
        vartheta,
        inner_dt,
        inner_steps: 1,
        tol: 0.0,
        convention: RateConvention::Multiply,
    }
}

/// Relaxed network output against `clamp(−P/Q)` over `n` random QPs.
pub fn prnn_oracle(seed: u64, n: usize) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = unit_config(10.0, 1.0);
    let mut worst: f64 = 0.0;
    let mut unconverged = 0;
    for _ in 0..n {
        let q = random_qp(&mut rng);
        let phi0 = rng.gen_range(-100.0..100.0);
        let out = prnn::relax_to_tolerance(&PrnnState::new(phi0, &q), &q, &cfg, 1e-9, 1e6)?;
        if !out.converged {
            unconverged += 1;
        }
        worst = worst.max((out.relaxation.state.u - q.solve_oracle()).abs());
    }
    Ok(report(
        "prnn-oracle",
        worst,
        1e-6,
        unconverged == 0,
        format!("{n} problems, {unconverged} unconverged"),
    ))
}

/// Interior trajectory `φ(t)` sampled every network step.
pub fn interior_trajectory(
    vartheta: f64,
    phi0: f64,
    horizon: f64,
    steps: usize,
) -> Result<Vec<(f64, f64)>> {
    let q = QpCoefficients {
        p: 0.2,
        q: 1.5,
        bounds: Bounds::symmetric(1e9),
    };
    let h = horizon / steps as f64;
    let cfg = unit_config(vartheta, h);
    let mut s = PrnnState::new(phi0, &q);
    let mut out = vec![(0.0, phi0)];
    for k in 1..=steps {
        s = prnn::relax(&s, &q, &cfg)?.state;
        out.push((k as f64 * h, s.phi));
    }
    Ok(out)
}

/// Least-squares slope of `−ln|φ|` against time.
pub fn fitted_decay_rate(samples: &[(f64, f64)]) -> f64 {
    let n = samples.len() as f64;
    let (st, sy) = samples
        .iter()
        .fold((0.0, 0.0), |(a, b), (t, p)| (a + t, b + p.abs().ln()));
    let (mt, my) = (st / n, sy / n);
    let (num, den) = samples.iter().fold((0.0, 0.0), |(a, b), (t, p)| {
        let dt = t - mt;
        (a + dt * (p.abs().ln() - my), b + dt * dt)
    });
    -num / den
}

/// Network time for the interior residual to fall below `tol`.
pub fn time_to_residual(vartheta: f64, phi0: f64, tol: f64) -> Result<f64> {
    let q = QpCoefficients {
        p: 0.2,
        q: 1.5,
        bounds: Bounds::symmetric(1e9),
    };
    let cfg = unit_config(vartheta, 1e-3 / vartheta);
    let out = prnn::relax_to_tolerance(&PrnnState::new(phi0, &q), &q, &cfg, tol, 1e3 / vartheta)?;
    if !out.converged {
        return Err(Error::Domain(format!(
            "no convergence for vartheta = {vartheta}"
        )));
    }
    Ok(out.relaxation.elapsed)
}

pub fn interior_decay() -> Result<SuiteReport> {
    let rates = [1.0, 10.0, 100.0];
    let mut worst: f64 = 0.0;
    let mut times = Vec::new();
    for &v in &rates {
        let traj = interior_trajectory(v, 2.0, 8.0 / v, 800)?;
        worst = worst.max((fitted_decay_rate(&traj) - v).abs() / v);
        times.push(time_to_residual(v, 2.0, 1e-6)?);
    }
    let ordered = times.windows(2).all(|w| w[1] < w[0]);
    Ok(report(
        "interior-decay",
        worst,
        1e-3,
        ordered,
        format!(
            "time to 1e-6: {}",
            times
                .iter()
                .map(|t| format!("{t:.3e}"))
                .collect::<Vec<_>>()
                .join(" > ")
        ),
    ))
}

/// `gradient()` against central differences of `cost()`.
pub fn gradient(seed: u64, n: usize) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let q = random_qp(&mut rng);
        let u = rng.gen_range(-50.0..50.0);
        let h = 1e-3 * (1.0 + f64::abs(u));
        let fd = (q.cost(u + h) - q.cost(u - h)) / (2.0 * h);
        let g = q.gradient(u);
        worst = worst.max((fd - g).abs() / (1.0 + g.abs()));
    }
    report("gradient", worst, 1e-8, true, format!("{n} points"))
}

fn plant_endpoint(dt: f64, horizon: f64) -> Result<PlantState> {
    let p = PendulumParams::default();
    let n = (horizon / dt).round() as usize;
    let mut s = PlantState::new(0.1, 0.5);
    for k in 0..n {
        s = plant::step(&p, &s, 0.3, &DisturbanceSpec::None, k as f64 * dt, dt)?;
    }
    Ok(s)
}

/// Observed convergence order of the plant integrator from three halvings.
pub fn rk4_observed_order() -> Result<f64> {
    let [a, b, c] = [0.01, 0.005, 0.0025].map(|dt| plant_endpoint(dt, 1.0));
    let (a, b, c) = (a?, b?, c?);
    let e1 = (a.x1 - b.x1).hypot(a.x2 - b.x2);
    let e2 = (b.x1 - c.x1).hypot(b.x2 - c.x2);
    Ok((e1 / e2).log2())
}

pub fn rk4_order() -> Result<SuiteReport> {
    let order = rk4_observed_order()?;
    Ok(report(
        "rk4-order",
        (order - 4.0).abs(),
        0.2,
        true,
        format!("observed order {order:.3}"),
    ))
}

/// `|PR(a) − PR(b)| ≤ |a − b|` and the projection inequality over `n` pairs.
pub fn projection(seed: u64, n: usize) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::NEG_INFINITY;
    let mut vi_failures = 0;
    for _ in 0..n {
        let lo = rng.gen_range(-10.0..10.0);
        let bx = Bounds::new(lo, lo + rng.gen_range(1e-3..20.0));
        let (a, b) = (rng.gen_range(-1e3..1e3), rng.gen_range(-1e3..1e3));
        let (pa, pb) = (prnn::project(a, &bx), prnn::project(b, &bx));
        worst = worst.max((pa - pb).abs() - (a - b).abs());
        let sigma = rng.gen_range(bx.min..=bx.max);
        if (pa - sigma) * (a - pa) < 0.0 {
            vi_failures += 1;
        }
    }
    report(
        "projection",
        worst.max(0.0),
        0.0,
        vi_failures == 0,
        format!("{n} pairs, {vi_failures} inequality failures"),
    )
}

/// Gain settings and references exercised by the backstepping identity check.
pub fn identity_cases() -> Vec<(Gains, ReferenceSignal)> {
    let gains = [
        Gains { c1: 1.0, c2: 1.0 },
        Gains { c1: 2.0, c2: 2.0 },
        Gains { c1: 5.0, c2: 3.0 },
    ];
    let refs = [
        ReferenceSignal::Constant { setpoint: 0.0 },
        ReferenceSignal::Sinusoid {
            amplitude: 0.1,
            frequency: 0.5,
            offset: 0.0,
        },
    ];
    gains
        .iter()
        .flat_map(|g| refs.iter().map(move |r| (*g, *r)))
        .collect()
}

/// Exact-baseline identity `V̇2 = −c1S1² − c2S2²` with `Δt = 1 ms` sampling,
/// then the network monitor on the default regulation run.
pub fn lyapunov_default() -> Result<SuiteReport> {
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    let mut threshold = 0.0;
    for (gains, reference) in identity_cases() {
        let mut s = Scenario {
            gains,
            reference,
            ..Scenario::default()
        };
        s.timing.control_period = s.timing.plant_dt;
        let out = sim::run_exact_baseline(&s)?;
        let tol = 10.0 * s.timing.control_period + 1e-6;
        let err = sim::ideal_rate_error(&out.trace);
        threshold = tol;
        worst = worst.max(err);
        if err > tol || !out.completed() {
            failures += 1;
        }
    }
    let s = Scenario {
        reference: ReferenceSignal::Constant { setpoint: 0.0 },
        ..Scenario::default()
    };
    let (violations, _) = lyapunov_on(&s)?;
    Ok(report(
        "lyapunov",
        worst,
        threshold,
        failures == 0 && violations == 0,
        format!(
            "{} identity cases, {violations} monitor violations",
            identity_cases().len()
        ),
    ))
}

fn lyapunov_on(s: &Scenario) -> Result<(usize, f64)> {
    let out = sim::run(s)?;
    let cfg = MonitorConfig::new(s.gains, s.timing.control_period)
        .after(5.0 / s.prnn_config().effective_rate());
    let v = sim::lyapunov_monitor(&out.trace, &cfg);
    let worst = v.iter().map(|v| v.excess()).fold(0.0, f64::max);
    let aborted = usize::from(!out.completed());
    Ok((v.len() + aborted, worst))
}

/// Network monitor on a user scenario.
pub fn lyapunov_scenario(s: &Scenario) -> Result<SuiteReport> {
    let (violations, worst) = lyapunov_on(s)?;
    let tol = 10.0 * s.timing.control_period + 1e-6;
    Ok(report(
        "lyapunov",
        worst,
        tol,
        violations == 0,
        format!("{violations} monitor violations"),
    ))
}

/// Prior-regularised batch least squares over the same samples the RLS saw:
/// `(M0⁻¹ + ΣΠΠᵀ)·θ = M0⁻¹·θ0 + ΣΠ·y` with `M0 = m0·I`.
pub fn batch_least_squares(
    theta0: &Vector3<f64>,
    m0: f64,
    samples: &[RlsSample],
) -> Result<Vector3<f64>> {
    let mut lhs = Matrix3::identity() / m0;
    let mut rhs = theta0 / m0;
    for s in samples {
        lhs += s.regressor * s.regressor.transpose();
        rhs += s.regressor * s.y;
    }
    lhs.cholesky()
        .map(|c| c.solve(&rhs))
        .ok_or_else(|| Error::NotIdentifiable("normal equations are not positive definite".into()))
}

/// Noise-free persistently exciting adaptive run.
pub fn rls_scenario() -> Scenario {
    let mut s = Scenario {
        adaptive: true,
        reference: ReferenceSignal::Sinusoid {
            amplitude: 0.3,
            frequency: 0.5,
            offset: 0.0,
        },
        ..Scenario::default()
    };
    s.timing.duration = 20.0;
    s
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RlsCheck {
    pub estimate_error: f64,
    pub batch_mismatch: f64,
}

pub fn rls_check(s: &Scenario) -> Result<RlsCheck> {
    let out = sim::run(s)?;
    if let Some(e) = out.abort {
        return Err(e);
    }
    let final_rls = out
        .final_rls
        .ok_or_else(|| Error::Domain("run was not adaptive".into()))?;
    let truth = rls::theta_of(&s.plant);
    let theta0 = s.rls.initial_estimate(&s.plant);
    let batch = batch_least_squares(&theta0, s.rls.initial_covariance, &out.rls_samples)?;
    Ok(RlsCheck {
        estimate_error: (final_rls.theta_hat - truth).norm() / truth.norm(),
        batch_mismatch: (final_rls.theta_hat - batch).amax(),
    })
}

pub fn rls_batch() -> Result<SuiteReport> {
    let c = rls_check(&rls_scenario())?;
    Ok(report(
        "rls-batch",
        c.batch_mismatch,
        1e-6,
        c.estimate_error < 0.01,
        format!("relative estimate error {:.3e}", c.estimate_error),
    ))
}

/// Run one suite by name. `scenario` only affects `lyapunov`.
pub fn run_suite(name: &str, seed: u64, scenario: Option<&Scenario>) -> Result<SuiteReport> {
    match name {
        "prnn-oracle" => prnn_oracle(seed, 1000),
        "interior-decay" => interior_decay(),
        "gradient" => Ok(gradient(seed, 10_000)),
        "rk4-order" => rk4_order(),
        "projection" => Ok(projection(seed, 100_000)),
        "lyapunov" => match scenario {
            Some(s) => lyapunov_scenario(s),
            None => lyapunov_default(),
        },
        "rls-batch" => rls_batch(),
        other => Err(Error::config(
            "suite",
            format!("unknown suite `{other}`; known: {}", SUITES.join(", ")),
        )),
    }
}
