use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{Grid, GridKey};

use super::run::{run, RunSummary};
use super::Scenario;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub coords: Vec<(GridKey, f64)>,
    pub summary: Option<RunSummary>,
    /// `ok`, `aborted: …` or `error: …`.
    pub status: String,
}

pub fn apply(scenario: &mut Scenario, key: GridKey, value: f64) {
    match key {
        GridKey::C1 => scenario.gains.c1 = value,
        GridKey::C2 => scenario.gains.c2 = value,
        GridKey::T => scenario.weights.t = value,
        GridKey::R => scenario.weights.r = value,
        GridKey::Vartheta => scenario.prnn.vartheta = value,
        GridKey::UMin => scenario.bounds.min = value,
        GridKey::UMax => scenario.bounds.max = value,
        GridKey::Bound => {
            scenario.bounds.min = -value;
            scenario.bounds.max = value;
        }
    }
}

fn run_cell(base: &Scenario, coords: Vec<(GridKey, f64)>) -> SweepRow {
    let mut s = base.clone();
    for &(k, v) in &coords {
        apply(&mut s, k, v);
    }
    match run(&s) {
        Ok(out) => {
            let status = match &out.abort {
                None => "ok".to_string(),
                Some(e) => format!("aborted: {e}"),
            };
            SweepRow {
                coords,
                summary: Some(out.summary),
                status,
            }
        }
        Err(e) => SweepRow {
            coords,
            summary: None,
            status: format!("error: {e}"),
        },
    }
}

/// Run every grid cell. Rows come back in grid order regardless of
/// `threads`; `None` uses rayon's default pool size.
pub fn sweep(base: &Scenario, grid: &Grid, threads: Option<usize>) -> Result<Vec<SweepRow>> {
    let cells = grid.cells();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::Domain(format!("thread pool: {e}")))?;
    Ok(pool.install(|| cells.into_par_iter().map(|c| run_cell(base, c)).collect()))
}

/// Summary columns of the sweep table, after the grid coordinates.
pub const SUMMARY_COLUMNS: [&str; 12] = [
    "steps",
    "settling_time",
    "max_abs_s1",
    "final_abs_x1",
    "integral_u2",
    "integral_s1_sq",
    "saturation_fraction",
    "prnn_settle_time",
    "max_condition_residual",
    "final_theta_error",
    "nonphysical_estimate",
    "status",
];

fn opt(v: Option<f64>) -> String {
    v.map(|v| format!("{v:e}")).unwrap_or_default()
}

fn summary_fields(s: &RunSummary) -> [String; 11] {
    [
        s.steps.to_string(),
        opt(s.settling_time),
        format!("{:e}", s.max_abs_s1),
        format!("{:e}", s.final_abs_x1),
        format!("{:e}", s.integral_u2),
        format!("{:e}", s.integral_s1_sq),
        format!("{:e}", s.saturation_fraction),
        opt(s.prnn_settle_time),
        format!("{:e}", s.max_condition_residual),
        opt(s.final_theta_error),
        s.nonphysical_estimate.to_string(),
    ]
}

/// One CSV row per cell: grid coordinates, summary fields, status. Missing
/// values are empty fields.
pub fn write_sweep<W: Write>(out: W, grid: &Grid, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let header = grid
        .axes
        .iter()
        .map(|(k, _)| k.name())
        .chain(SUMMARY_COLUMNS);
    w.write_record(header)
        .map_err(|e| Error::Domain(e.to_string()))?;
    for row in rows {
        let mut fields: Vec<String> = row.coords.iter().map(|(_, v)| format!("{v}")).collect();
        match &row.summary {
            Some(s) => fields.extend(summary_fields(s)),
            None => fields.extend(std::iter::repeat_n(String::new(), 11)),
        }
        fields.push(row.status.clone());
        w.write_record(&fields)
            .map_err(|e| Error::Domain(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backstepping::ReferenceSignal;
    use crate::grid::parse_grid;

    fn base() -> Scenario {
        let mut s = Scenario {
            reference: ReferenceSignal::Constant { setpoint: 0.0 },
            ..Scenario::default()
        };
        s.timing.duration = 2.0;
        s
    }

    #[test]
    fn single_cell_matches_run() {
        let b = base();
        let rows = sweep(
            &b,
            &parse_grid(&format!("R={}", b.weights.r)).unwrap(),
            Some(1),
        )
        .unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].summary.as_ref(), Some(&run(&b).unwrap().summary));
    }

    #[test]
    fn faster_network_settles_sooner() {
        let mut b = base();
        b.prnn.phi0 = 1.0;
        let rows = sweep(&b, &parse_grid("vartheta=10,20,40").unwrap(), Some(3)).unwrap();
        let times: Vec<f64> = rows
            .iter()
            .map(|r| r.summary.as_ref().unwrap().prnn_settle_time.unwrap())
            .collect();
        assert!(times.windows(2).all(|w| w[1] < w[0]), "{times:?}");
    }

    #[test]
    fn smaller_effort_weight_shrinks_condition_residual() {
        let rows = sweep(&base(), &parse_grid("R=1,0.1,0.01").unwrap(), None).unwrap();
        let sums: Vec<&RunSummary> = rows.iter().map(|r| r.summary.as_ref().unwrap()).collect();
        assert!(sums
            .windows(2)
            .all(|w| w[1].max_condition_residual < w[0].max_condition_residual));
        assert!(sums
            .windows(2)
            .all(|w| w[1].integral_s1_sq <= w[0].integral_s1_sq));
    }

    #[test]
    fn bad_cell_is_recorded_and_sweep_continues() {
        let rows = sweep(&base(), &parse_grid("c1=-1,2").unwrap(), Some(2)).unwrap();
        assert!(rows[0].status.starts_with("error"));
        assert_eq!(rows[1].status, "ok");
    }

    #[test]
    fn table_has_one_row_per_cell() {
        let grid = parse_grid("c1=-1,2;R=0.1").unwrap();
        let rows = sweep(&base(), &grid, Some(2)).unwrap();
        let mut buf = Vec::new();
        write_sweep(&mut buf, &grid, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with("c1,R,steps,settling_time,"));
        let width = lines[0].split(',').count();
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        for rec in rdr.records() {
            assert_eq!(rec.unwrap().len(), width);
        }
        assert!(lines[2].ends_with(",ok"));
    }
}
