//! Closed-loop orchestration: the plant runs on its own RK4 step, the
//! controller samples every control period, relaxes the network with the
//! period's QP frozen and applies the (clamped) output with a zero-order hold.

mod monitor;
mod run;
mod scenario;
mod sweep;

pub use monitor::{ideal_rate_error, lyapunov_monitor, v2_rates, MonitorConfig, Violation};
pub use run::{run, run_exact_baseline, RlsSample, RunOutput, RunSummary, TraceRecord};
pub use scenario::{MetricOptions, PrnnSettings, Scenario, Timing};
pub use sweep::{apply, sweep, write_sweep, SweepRow, SUMMARY_COLUMNS};
