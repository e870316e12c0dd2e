use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::ScenarioError;
use crate::regimes::{RegimeSolution, SolutionDiagnostics};

pub const TIMESERIES_HEADER: [&str; 16] = [
    "t", "C1", "C2", "B1", "B2", "K1", "K2", "Ra", "Rb", "P", "T", "S", "Temp", "G1", "G2", "G",
];

/// Shortest representation that parses back to the same `f64`.
pub fn fmt_num(x: f64) -> String {
    format!("{x}")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// One row per grid point, in the column order of [`TIMESERIES_HEADER`].
pub fn timeseries_rows(sol: &RegimeSolution) -> Vec<[f64; 16]> {
    (0..sol.grid.n_points())
        .map(|k| {
            let a = &sol.allocations[k];
            let c = &sol.climate[k];
            let e = &sol.emissions[k];
            [
                sol.grid.time(k),
                a.c1,
                a.c2,
                a.b1,
                a.b2,
                a.k1,
                a.k2,
                a.ra,
                a.rb,
                c.p,
                c.t,
                c.s,
                sol.temperature[k],
                e.g1,
                e.g2,
                e.total,
            ]
        })
        .collect()
}

pub(crate) fn write_timeseries(path: &Path, sol: &RegimeSolution) -> Result<(), ScenarioError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(TIMESERIES_HEADER)?;
    for row in timeseries_rows(sol) {
        w.write_record(row.iter().map(|v| fmt_num(*v)))?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn write_table(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<(), ScenarioError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), ScenarioError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| ScenarioError::Io(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub regime: String,
    #[serde(rename = "U1")]
    pub u1: f64,
    #[serde(rename = "U2")]
    pub u2: f64,
    #[serde(rename = "U")]
    pub u: f64,
    pub final_temperature: f64,
    pub cumulative_emissions: f64,
    pub diagnostics: SolutionDiagnostics,
}

impl Summary {
    pub fn of(sol: &RegimeSolution) -> Self {
        Self {
            regime: serde_json::to_value(sol.tag)
                .ok()
                .and_then(|v| v.as_str().map(str::to_string))
                .unwrap_or_default(),
            u1: sol.u1,
            u2: sol.u2,
            u: sol.u,
            final_temperature: sol.final_temperature(),
            cumulative_emissions: sol.cumulative_emissions(),
            diagnostics: sol.diagnostics.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputFile {
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_sha256: String,
    pub tool_version: String,
    pub wall_clock_seconds: f64,
    pub outputs: Vec<OutputFile>,
    pub warnings: Vec<String>,
}

impl RunManifest {
    pub(crate) fn write(
        dir: &Path,
        command: &str,
        config_toml: &str,
        started: std::time::Instant,
        files: &[String],
        warnings: &[String],
    ) -> Result<RunManifest, ScenarioError> {
        let outputs = files
            .iter()
            .map(|f| {
                let bytes = std::fs::read(dir.join(f))?;
                Ok(OutputFile {
                    file: f.clone(),
                    sha256: sha256_hex(&bytes),
                })
            })
            .collect::<Result<Vec<_>, ScenarioError>>()?;
        let m = RunManifest {
            command: command.to_string(),
            config_sha256: sha256_hex(config_toml.as_bytes()),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            wall_clock_seconds: started.elapsed().as_secs_f64(),
            outputs,
            warnings: warnings.to_vec(),
        };
        write_json(&dir.join("manifest.json"), &m)?;
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for x in [0.1, 1.0 / 3.0, 430.5681413007266, 1e-300, -2.5e17, 0.0] {
            assert_eq!(fmt_num(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_num(1.0), "1");
    }

    #[test]
    fn digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
