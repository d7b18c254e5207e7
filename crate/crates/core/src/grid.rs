//! Sweep grid specs: `key=v1,v2,...` clauses separated by `;`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GridKey {
    C1,
    C2,
    T,
    R,
    Vartheta,
    UMin,
    UMax,
    /// Symmetric box `[-v, v]`.
    Bound,
}

impl GridKey {
    pub const ALL: [GridKey; 8] = [
        GridKey::C1,
        GridKey::C2,
        GridKey::T,
        GridKey::R,
        GridKey::Vartheta,
        GridKey::UMin,
        GridKey::UMax,
        GridKey::Bound,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GridKey::C1 => "c1",
            GridKey::C2 => "c2",
            GridKey::T => "T",
            GridKey::R => "R",
            GridKey::Vartheta => "vartheta",
            GridKey::UMin => "u_min",
            GridKey::UMax => "u_max",
            GridKey::Bound => "bound",
        }
    }
}

impl fmt::Display for GridKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GridKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        GridKey::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = GridKey::ALL.iter().map(|k| k.name()).collect();
                Error::config(
                    s,
                    format!("unknown grid key; expected one of {}", names.join(", ")),
                )
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub axes: Vec<(GridKey, Vec<f64>)>,
}

impl Grid {
    /// Cartesian product, first axis slowest.
    pub fn cells(&self) -> Vec<Vec<(GridKey, f64)>> {
        let mut cells = vec![Vec::new()];
        for (key, values) in &self.axes {
            cells = cells
                .into_iter()
                .flat_map(|prefix| {
                    values.iter().map(move |&v| {
                        let mut c = prefix.clone();
                        c.push((*key, v));
                        c
                    })
                })
                .collect();
        }
        cells
    }
}

pub fn parse_grid(spec: &str) -> Result<Grid> {
    let mut axes: Vec<(GridKey, Vec<f64>)> = Vec::new();
    for clause in spec.split(';').map(str::trim).filter(|c| !c.is_empty()) {
        let (key, values) = clause
            .split_once('=')
            .ok_or_else(|| Error::config(clause, "expected `key=v1,v2,...`"))?;
        let key: GridKey = key.trim().parse()?;
        if axes.iter().any(|(k, _)| *k == key) {
            return Err(Error::config(key.name(), "key given twice"));
        }
        let values = values
            .split(',')
            .map(|v| {
                let v = v.trim();
                v.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| {
                        Error::config(key.name(), format!("`{v}` is not a finite number"))
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        axes.push((key, values));
    }
    if axes.is_empty() {
        return Err(Error::config("grid", "empty grid"));
    }
    Ok(Grid { axes })
}
