use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use prnn_abc::sim::{self, RunSummary, Scenario};
use prnn_abc::{config, grid, trace, verify};

mod plot;

const THREADS_VAR: &str = "PRNN_ABC_THREADS";

#[derive(Parser)]
#[command(
    name = "prnn-abc",
    version,
    about = "Projection-network adaptive backstepping for an inverted pendulum"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Subcommand)]
enum Command {
    /// Run one closed-loop simulation and write its trace and summary.
    Simulate {
        /// Scenario file; the bundled default when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        adaptive: Option<Switch>,
        #[arg(long)]
        seed: Option<u64>,
        /// Also write a gnuplot script for angle, control and V2.
        #[arg(long)]
        gnuplot: bool,
    },
    /// Run the verification suites.
    Verify {
        #[arg(long)]
        suite: Option<String>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Scenario for the lyapunov suite.
        #[arg(long)]
        scenario: Option<PathBuf>,
    },
    /// Run a grid of scenarios and write one summary row per cell.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        /// `key=v1,v2;key2=...` over c1, c2, T, R, vartheta, u_min, u_max, bound.
        #[arg(long)]
        grid: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-read a trace file and recompute its derived columns.
    Validate {
        #[arg(long)]
        trace: PathBuf,
        /// Scenario the trace came from; enables the gain- and weight-dependent checks.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
    },
    /// Print a bundled scenario.
    DefaultConfig {
        /// Print the sinusoidal tracking scenario instead of regulation.
        #[arg(long)]
        tracking: bool,
    },
}

/// Bad input from the user: exits with status 2.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn exit_status(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<Usage>().is_some() {
        return 2;
    }
    match err.downcast_ref::<prnn_abc::Error>() {
        Some(prnn_abc::Error::InvalidConfig { .. } | prnn_abc::Error::Parse { .. }) => 2,
        _ => 1,
    }
}

fn load_scenario(path: Option<&Path>) -> Result<Scenario> {
    match path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Usage(format!("{}: {e}", p.display())))?;
            config::parse_scenario(&text).with_context(|| format!("in {}", p.display()))
        }
        None => Ok(config::parse_scenario(config::DEFAULT_SCENARIO)?),
    }
}

fn summary_text(s: &RunSummary) -> String {
    let opt = |v: Option<f64>| v.map(|v| format!("{v:.6}")).unwrap_or_else(|| "-".into());
    let mut out = String::new();
    let mut line = |k: &str, v: String| out.push_str(&format!("{k:<24}{v}\n"));
    line("steps", s.steps.to_string());
    line("settling_time", opt(s.settling_time));
    line("max_abs_s1", format!("{:.6e}", s.max_abs_s1));
    line("final_abs_x1", format!("{:.6e}", s.final_abs_x1));
    line("integral_u2", format!("{:.6e}", s.integral_u2));
    line("integral_s1_sq", format!("{:.6e}", s.integral_s1_sq));
    line(
        "saturation_fraction",
        format!("{:.4}", s.saturation_fraction),
    );
    line("prnn_settle_time", opt(s.prnn_settle_time));
    line(
        "max_condition_residual",
        format!("{:.6e}", s.max_condition_residual),
    );
    line(
        "final_theta_error",
        s.final_theta_error
            .map(|v| format!("{v:.6e}"))
            .unwrap_or_else(|| "-".into()),
    );
    line("nonphysical_estimate", s.nonphysical_estimate.to_string());
    line("aborted", s.aborted.clone().unwrap_or_else(|| "no".into()));
    out
}

fn simulate(
    config: Option<&Path>,
    out: &Path,
    adaptive: Option<Switch>,
    seed: Option<u64>,
    gnuplot: bool,
) -> Result<u8> {
    let mut scenario = load_scenario(config)?;
    if let Some(a) = adaptive {
        scenario.adaptive = matches!(a, Switch::On);
    }
    if let Some(seed) = seed {
        scenario = scenario.with_seed(seed);
    }
    scenario.validate()?;
    let result = sim::run(&scenario)?;

    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let trace_path = out.join("trace.csv");
    let file = fs::File::create(&trace_path)
        .with_context(|| format!("creating {}", trace_path.display()))?;
    trace::write_trace(std::io::BufWriter::new(file), &result.trace)?;
    let text = summary_text(&result.summary);
    fs::write(out.join("summary.txt"), &text)?;
    fs::write(
        out.join("summary.json"),
        serde_json::to_string_pretty(&result.summary)? + "\n",
    )?;
    fs::write(out.join("scenario.toml"), config::to_toml(&scenario)?)?;
    if gnuplot {
        fs::write(
            out.join("plot.gp"),
            plot::script("trace.csv", scenario.bounds),
        )?;
    }
    print!("{text}");
    match &result.abort {
        Some(e) => {
            eprintln!("run aborted: {e}");
            Ok(1)
        }
        None => Ok(0),
    }
}

fn run_verify(suite: Option<&str>, seed: u64, scenario: Option<&Path>) -> Result<u8> {
    let scenario = scenario.map(|p| load_scenario(Some(p))).transpose()?;
    let names: Vec<&str> = match suite {
        Some(name) if verify::SUITES.contains(&name) => vec![name],
        Some(name) => {
            return Err(Usage(format!(
                "unknown suite `{name}`; known: {}",
                verify::SUITES.join(", ")
            ))
            .into())
        }
        None => verify::SUITES.to_vec(),
    };
    let mut failed = 0;
    for name in names {
        match verify::run_suite(name, seed, scenario.as_ref()) {
            Ok(r) => {
                println!("{r}");
                failed += usize::from(!r.passed);
            }
            Err(e) => {
                println!("{name:<15} FAIL  {e}");
                failed += 1;
            }
        }
    }
    Ok(u8::from(failed > 0))
}

fn thread_cap() -> Result<Option<usize>> {
    match std::env::var(THREADS_VAR) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Usage(format!(
                "{THREADS_VAR} must be a positive integer, got `{v}`"
            ))
            .into()),
        },
    }
}

fn run_sweep(config: Option<&Path>, grid_spec: &str, out: &Path) -> Result<u8> {
    let base = load_scenario(config)?;
    let grid = grid::parse_grid(grid_spec)?;
    let rows = sim::sweep(&base, &grid, thread_cap()?)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let path = out.join("sweep.csv");
    let file = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    sim::write_sweep(std::io::BufWriter::new(file), &grid, &rows)?;
    let bad = rows.iter().filter(|r| r.status != "ok").count();
    println!(
        "{} cells, {bad} not ok, table in {}",
        rows.len(),
        path.display()
    );
    Ok(0)
}

fn run_validate(trace_path: &Path, config: Option<&Path>, tol: f64) -> Result<u8> {
    let file =
        fs::File::open(trace_path).map_err(|e| Usage(format!("{}: {e}", trace_path.display())))?;
    let records = trace::read_trace(std::io::BufReader::new(file))
        .with_context(|| format!("in {}", trace_path.display()))?;
    let ctx = config
        .map(|p| load_scenario(Some(p)))
        .transpose()?
        .map(|s| trace::ValidationContext {
            gains: s.gains,
            weights: s.weights,
        });
    let report = trace::validate_trace(&records, ctx.as_ref(), tol);
    for p in report.problems.iter().take(20) {
        println!("{p}");
    }
    println!(
        "{} rows, worst mismatch {:.3e}, {}",
        report.rows,
        report.worst_mismatch,
        if report.ok() { "ok" } else { "MISMATCH" }
    );
    Ok(u8::from(!report.ok()))
}

fn dispatch(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Simulate {
            config,
            out,
            adaptive,
            seed,
            gnuplot,
        } => simulate(config.as_deref(), &out, adaptive, seed, gnuplot),
        Command::Verify {
            suite,
            seed,
            scenario,
        } => run_verify(suite.as_deref(), seed, scenario.as_deref()),
        Command::Sweep { config, grid, out } => run_sweep(config.as_deref(), &grid, &out),
        Command::Validate { trace, config, tol } => run_validate(&trace, config.as_deref(), tol),
        Command::DefaultConfig { tracking } => {
            let text = if tracking {
                config::TRACKING_SCENARIO
            } else {
                config::DEFAULT_SCENARIO
            };
            print!("{text}");
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_status(&e))
        }
    }
}
