use prnn_abc::backstepping::ReferenceSignal;
use prnn_abc::config::{parse_scenario, to_toml, DEFAULT_SCENARIO};
use prnn_abc::grid::parse_grid;
use prnn_abc::plant::PlantState;
use prnn_abc::qp::Bounds;
use prnn_abc::sim::{self, Scenario};
use prnn_abc::trace::{read_trace, validate_trace, write_trace, ValidationContext};

#[test]
fn config_to_trace_and_back() {
    let mut s = parse_scenario(DEFAULT_SCENARIO).unwrap();
    s.adaptive = true;
    let s = parse_scenario(&to_toml(&s).unwrap()).unwrap();
    let out = sim::run(&s).unwrap();
    assert!(out.completed());
    assert_eq!(out.trace.len(), s.timing.control_steps());

    let mut buf = Vec::new();
    write_trace(&mut buf, &out.trace).unwrap();
    let back = read_trace(buf.as_slice()).unwrap();
    let ctx = ValidationContext {
        gains: s.gains,
        weights: s.weights,
    };
    let report = validate_trace(&back, Some(&ctx), 1e-12);
    assert!(report.ok(), "{:?}", report.problems);
    assert!(back
        .iter()
        .all(|r| r.theta_hat.iter().all(|v| v.is_finite())));
}

#[test]
fn saturated_cold_start_settles_faster_with_larger_rate() {
    let mut s = Scenario {
        reference: ReferenceSignal::Constant { setpoint: 0.0 },
        ..Scenario::default()
    };
    s.initial = PlantState::new(0.15, 0.0);
    s.bounds = Bounds::symmetric(2.0);
    s.timing.duration = 3.0;
    let rows = sim::sweep(&s, &parse_grid("vartheta=10,20,40").unwrap(), None).unwrap();
    let times: Vec<f64> = rows
        .iter()
        .map(|r| r.summary.as_ref().unwrap().prnn_settle_time.unwrap())
        .collect();
    assert!(times.windows(2).all(|w| w[1] < w[0]), "{times:?}");
}

#[test]
fn network_and_exact_law_agree_when_bounds_are_slack() {
    let s = Scenario {
        reference: ReferenceSignal::Constant { setpoint: 0.0 },
        ..Scenario::default()
    };
    let net = sim::run(&s).unwrap();
    let exact = sim::run_exact_baseline(&s).unwrap();
    let worst = net
        .trace
        .iter()
        .zip(&exact.trace)
        .map(|(a, b)| (a.x1 - b.x1).abs())
        .fold(0.0, f64::max);
    assert!(worst < 1e-4, "{worst}");
    assert!(net.summary.final_abs_x1 < 1e-3);
}
