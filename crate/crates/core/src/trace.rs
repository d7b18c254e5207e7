//! Trace CSV files: a header naming every column, one row per control step,
//! values in `{:.16e}` form (17 significant digits, `.` decimal point).

use std::io::{Read, Write};

use crate::backstepping::Gains;
use crate::error::{Error, Result};
use crate::qp::Weights;
use crate::sim::TraceRecord;

pub const COLUMNS: [&str; 19] = [
    "t",
    "x1",
    "x2",
    "x1d",
    "S1",
    "S2",
    "u",
    "phi",
    "A",
    "B",
    "P",
    "Q",
    "V2",
    "V2_dot_ideal",
    "prnn_residual",
    "theta_hat_1",
    "theta_hat_2",
    "theta_hat_3",
    "condition_residual",
];

fn to_row(r: &TraceRecord) -> [f64; 19] {
    [
        r.t,
        r.x1,
        r.x2,
        r.x1d,
        r.s1,
        r.s2,
        r.u,
        r.phi,
        r.a,
        r.b,
        r.p,
        r.q,
        r.v2,
        r.v2_dot_ideal,
        r.prnn_residual,
        r.theta_hat[0],
        r.theta_hat[1],
        r.theta_hat[2],
        r.condition_residual,
    ]
}

fn from_row(v: &[f64; 19]) -> TraceRecord {
    TraceRecord {
        t: v[0],
        x1: v[1],
        x2: v[2],
        x1d: v[3],
        s1: v[4],
        s2: v[5],
        u: v[6],
        phi: v[7],
        a: v[8],
        b: v[9],
        p: v[10],
        q: v[11],
        v2: v[12],
        v2_dot_ideal: v[13],
        prnn_residual: v[14],
        theta_hat: [v[15], v[16], v[17]],
        condition_residual: v[18],
    }
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        kind => Error::Parse {
            line,
            reason: format!("{kind:?}"),
        },
    }
}

pub fn write_trace<W: Write>(out: W, trace: &[TraceRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(COLUMNS).map_err(csv_err)?;
    for r in trace {
        w.write_record(to_row(r).iter().map(|v| format!("{v:.16e}")))
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace<R: Read>(input: R) -> Result<Vec<TraceRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(input);
    let header = rdr.headers().map_err(csv_err)?.clone();
    if header.len() != COLUMNS.len() || header.iter().zip(COLUMNS).any(|(a, b)| a != b) {
        return Err(Error::Parse {
            line: 1,
            reason: format!("expected header `{}`", COLUMNS.join(",")),
        });
    }
    let mut trace = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        if rec.len() != COLUMNS.len() {
            return Err(Error::Parse {
                line,
                reason: format!("expected {} columns, found {}", COLUMNS.len(), rec.len()),
            });
        }
        let mut row = [0.0; 19];
        for (i, field) in rec.iter().enumerate() {
            row[i] = field.trim().parse().map_err(|_| Error::Parse {
                line,
                reason: format!("column `{}`: `{field}` is not a number", COLUMNS[i]),
            })?;
        }
        trace.push(from_row(&row));
    }
    Ok(trace)
}

/// Optional context for checking columns that depend on the scenario.
#[derive(Debug, Clone, Copy)]
pub struct ValidationContext {
    pub gains: Gains,
    pub weights: Weights,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub rows: usize,
    /// Largest absolute mismatch between a stored and recomputed column.
    pub worst_mismatch: f64,
    pub problems: Vec<String>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.problems.is_empty()
    }
}

/// Recompute derived columns and compare with the stored values.
pub fn validate_trace(
    trace: &[TraceRecord],
    ctx: Option<&ValidationContext>,
    tol: f64,
) -> ValidationReport {
    let mut problems = Vec::new();
    let mut worst: f64 = 0.0;
    let mut check = |row: usize, name: &str, stored: f64, recomputed: f64| {
        let diff = (stored - recomputed).abs();
        worst = worst.max(diff);
        if diff.is_nan() || diff > tol * (1.0 + recomputed.abs()) {
            problems.push(format!(
                "row {row}: {name} stored {stored:e}, recomputed {recomputed:e}"
            ));
        }
    };
    for (i, r) in trace.iter().enumerate() {
        check(i, "S1", r.s1, r.x1 - r.x1d);
        check(i, "V2", r.v2, 0.5 * r.s1 * r.s1 + 0.5 * r.s2 * r.s2);
        if let Some(c) = ctx {
            check(
                i,
                "V2_dot_ideal",
                r.v2_dot_ideal,
                -c.gains.c1 * r.s1 * r.s1 - c.gains.c2 * r.s2 * r.s2,
            );
            check(
                i,
                "condition_residual",
                r.condition_residual,
                c.weights.r / r.q,
            );
            check(i, "Q", r.q, c.weights.t * r.b * r.b + c.weights.r);
        }
    }
    for w in trace.windows(2) {
        if w[1].t.partial_cmp(&w[0].t) != Some(std::cmp::Ordering::Greater) {
            problems.push(format!("time not increasing at t = {}", w[1].t));
            break;
        }
    }
    ValidationReport {
        rows: trace.len(),
        worst_mismatch: worst,
        problems,
    }
}
