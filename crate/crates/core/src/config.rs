//! Scenario files in TOML. Unknown keys are rejected; omitted keys take
//! their defaults.

use crate::error::{Error, Result};
use crate::sim::Scenario;

fn line_of(text: &str, offset: usize) -> usize {
    text.as_bytes()[..offset.min(text.len())]
        .iter()
        .filter(|&&b| b == b'\n')
        .count()
        + 1
}

/// Parse and validate a scenario.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let scenario: Scenario = toml::from_str(text).map_err(|e| Error::Parse {
        line: e.span().map(|s| line_of(text, s.start)).unwrap_or(0),
        reason: e.message().to_string(),
    })?;
    scenario.validate()?;
    Ok(scenario)
}

pub fn to_toml(scenario: &Scenario) -> Result<String> {
    toml::to_string_pretty(scenario)
        .map_err(|e| Error::Domain(format!("cannot serialise scenario: {e}")))
}

pub fn load(path: &std::path::Path) -> Result<Scenario> {
    parse_scenario(&std::fs::read_to_string(path)?)
}

/// The scenario shipped with the CLI.
pub const DEFAULT_SCENARIO: &str = include_str!("../scenarios/default.toml");

/// Sinusoidal tracking with adaptation on.
pub const TRACKING_SCENARIO: &str = include_str!("../scenarios/tracking.toml");
