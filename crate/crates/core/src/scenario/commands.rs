use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use super::config::{check_key, ScenarioConfig};
use super::output::{fmt_num, write_json, write_table, write_timeseries, RunManifest, Summary};
use super::ScenarioError;
use crate::climate::Regime;
use crate::error::Error;
use crate::par;
use crate::regimes::{compare_regimes, solve_regime, ComparisonReport, RegimeSolution};
use crate::robust::{alpha_sweep, randomized_bands, Alpha, Bands};

/// Files written by a command, relative to its output directory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CommandReport {
    pub files: Vec<String>,
    pub manifest: RunManifest,
}

/// Parse `gp`, `rp`, `nash`, a comma-separated list of them, or `all`.
pub fn parse_regimes(text: &str) -> Result<Vec<Regime>, ScenarioError> {
    if text.trim().eq_ignore_ascii_case("all") {
        return Ok(Regime::ALL.to_vec());
    }
    let mut out = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let r = Regime::parse(part)
            .ok_or_else(|| ScenarioError::Config(format!("unknown regime '{part}' (expected gp, rp or nash)")))?;
        if !out.contains(&r) {
            out.push(r);
        }
    }
    if out.is_empty() {
        return Err(ScenarioError::Config("no regime given".into()));
    }
    Ok(out)
}

fn prepare(dir: &Path) -> Result<(), ScenarioError> {
    std::fs::create_dir_all(dir).map_err(|e| ScenarioError::Io(format!("cannot create {}: {e}", dir.display())))
}

fn finish(
    dir: &Path,
    command: &str,
    cfg: &ScenarioConfig,
    started: Instant,
    mut files: Vec<String>,
) -> Result<CommandReport, ScenarioError> {
    let toml = cfg.to_toml();
    std::fs::write(dir.join("config.toml"), &toml)?;
    files.push("config.toml".into());
    let manifest = RunManifest::write(dir, command, &toml, started, &files, &cfg.warnings)?;
    Ok(CommandReport { files, manifest })
}

/// Solve one regime and write `{regime}_timeseries.csv` and
/// `{regime}_summary.json`.
pub fn run_cmd(cfg: &ScenarioConfig, regimes: &[Regime], dir: &Path) -> Result<CommandReport, ScenarioError> {
    let started = Instant::now();
    prepare(dir)?;
    let grid = cfg.grid();
    let solved: Vec<Result<RegimeSolution, Error>> =
        par::map_indexed(regimes.len(), |i| solve_regime(regimes[i], &cfg.econ, &cfg.climate, &grid));
    let mut files = Vec::new();
    for (r, sol) in regimes.iter().zip(solved) {
        let sol = sol?;
        let ts = format!("{}_timeseries.csv", r.tag());
        write_timeseries(&dir.join(&ts), &sol)?;
        let sm = format!("{}_summary.json", r.tag());
        write_json(&dir.join(&sm), &Summary::of(&sol))?;
        files.push(ts);
        files.push(sm);
    }
    finish(dir, "run", cfg, started, files)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub axis: String,
    pub value: f64,
    pub regime: Regime,
    /// `None` when this point failed; see `error`.
    pub summary: Option<Summary>,
    /// Net emission rates at the end of the horizon.
    pub final_emissions: Option<[f64; 3]>,
    pub error: Option<String>,
}

/// One solve per `(value, regime)`, in input order. A value that fails
/// validation or solving becomes a row carrying the error.
pub fn sweep_rows(
    cfg: &ScenarioConfig,
    axis: &str,
    values: &[f64],
    regimes: &[Regime],
) -> Result<Vec<SweepRow>, ScenarioError> {
    check_key(axis)?;
    let grid = cfg.grid();
    let n = values.len() * regimes.len();
    Ok(par::map_indexed(n, |i| {
        let value = values[i / regimes.len()];
        let regime = regimes[i % regimes.len()];
        let solved = cfg
            .with_value(axis, value)
            .and_then(|c| solve_regime(regime, &c.econ, &c.climate, &grid).map_err(ScenarioError::from));
        let (summary, final_emissions, error) = match solved {
            Ok(sol) => {
                let e = sol.emissions.last().expect("grid has points");
                (Some(Summary::of(&sol)), Some([e.g1, e.g2, e.total]), None)
            }
            Err(e) => {
                log::warn!("sweep {axis} = {value}, {}: {e}", regime.tag());
                (None, None, Some(e.to_string()))
            }
        };
        SweepRow {
            axis: axis.to_string(),
            value,
            regime,
            summary,
            final_emissions,
            error,
        }
    }))
}

/// Long-format `sweep.csv`, one row per `(value, regime)`.
pub fn sweep_cmd(
    cfg: &ScenarioConfig,
    axis: &str,
    values: &[f64],
    regimes: &[Regime],
    dir: &Path,
) -> Result<CommandReport, ScenarioError> {
    let started = Instant::now();
    if values.is_empty() {
        return Err(ScenarioError::Config("sweep needs at least one value".into()));
    }
    let rows = sweep_rows(cfg, axis, values, regimes)?;
    prepare(dir)?;
    let header: Vec<String> = [
        "axis",
        "value",
        "regime",
        "final_temperature",
        "cumulative_emissions",
        "G1",
        "G2",
        "G",
        "U1",
        "U2",
        "U",
        "error",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut line = vec![r.axis.clone(), fmt_num(r.value), r.regime.tag().to_string()];
            match (&r.summary, r.final_emissions) {
                (Some(s), Some(g)) => {
                    line.extend(
                        [s.final_temperature, s.cumulative_emissions, g[0], g[1], g[2], s.u1, s.u2, s.u]
                            .map(fmt_num),
                    );
                    line.push(String::new());
                }
                _ => {
                    line.extend(std::iter::repeat_n(String::new(), 8));
                    line.push(r.error.clone().unwrap_or_default());
                }
            }
            line
        })
        .collect();
    write_table(&dir.join("sweep.csv"), &header, &table)?;
    finish(dir, "sweep", cfg, started, vec!["sweep.csv".into()])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct RobustPoint {
    alpha: Alpha,
    gamma1: f64,
    gamma2: f64,
    residual: f64,
    final_temperature: f64,
    #[serde(rename = "U")]
    u: f64,
}

/// Temperature paths over a list of penalty weights: `robust_{regime}.csv`
/// holds `t` and one column per weight.
pub fn robust_cmd(
    cfg: &ScenarioConfig,
    regimes: &[Regime],
    alphas: &[Alpha],
    dir: &Path,
) -> Result<CommandReport, ScenarioError> {
    let started = Instant::now();
    if alphas.is_empty() {
        return Err(ScenarioError::Config("robust needs at least one alpha".into()));
    }
    prepare(dir)?;
    let grid = cfg.grid();
    let hat = (cfg.robust.gamma1_hat, cfg.robust.gamma2_hat);
    let mut files = Vec::new();
    for &regime in regimes {
        let runs = alpha_sweep(regime, hat, alphas, &cfg.econ, &cfg.climate, &grid)
            .into_iter()
            .collect::<Result<Vec<_>, _>>()?;
        let mut header = vec!["t".to_string()];
        header.extend(alphas.iter().map(|a| format!("alpha_{a}")));
        let table: Vec<Vec<String>> = (0..grid.n_points())
            .map(|k| {
                let mut line = vec![fmt_num(grid.time(k))];
                line.extend(runs.iter().map(|r| fmt_num(r.solution.temperature[k])));
                line
            })
            .collect();
        let csv = format!("robust_{}.csv", regime.tag());
        write_table(&dir.join(&csv), &header, &table)?;
        let points: Vec<RobustPoint> = runs
            .iter()
            .map(|r| RobustPoint {
                alpha: r.alpha,
                gamma1: r.robust.gamma1,
                gamma2: r.robust.gamma2,
                residual: r.robust.residual,
                final_temperature: r.solution.final_temperature(),
                u: r.solution.u,
            })
            .collect();
        let json = format!("robust_{}.json", regime.tag());
        write_json(&dir.join(&json), &points)?;
        files.push(csv);
        files.push(json);
    }
    finish(dir, "robust", cfg, started, files)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct BandCounts {
    regime: Regime,
    n_ok: usize,
    n_failed: usize,
}

/// Percentile bands of temperature under random damages: `bands.csv` holds
/// `t` and lower/median/upper columns per regime.
pub fn randomize_cmd(cfg: &ScenarioConfig, regimes: &[Regime], dir: &Path) -> Result<CommandReport, ScenarioError> {
    let started = Instant::now();
    prepare(dir)?;
    let grid = cfg.grid();
    let hat = (cfg.robust.gamma1_hat, cfg.robust.gamma2_hat);
    let bands: Vec<Bands> = regimes
        .iter()
        .map(|&r| randomized_bands(r, &cfg.randomization, cfg.robust.alpha, hat, &cfg.econ, &cfg.climate, &grid))
        .collect::<Result<_, _>>()?;
    let mut header = vec!["t".to_string()];
    for r in regimes {
        for q in ["lower", "median", "upper"] {
            header.push(format!("{}_{q}", r.tag()));
        }
    }
    let table: Vec<Vec<String>> = (0..grid.n_points())
        .map(|k| {
            let mut line = vec![fmt_num(grid.time(k))];
            for b in &bands {
                line.extend([b.lower[k], b.median[k], b.upper[k]].map(fmt_num));
            }
            line
        })
        .collect();
    write_table(&dir.join("bands.csv"), &header, &table)?;
    let counts: Vec<BandCounts> = regimes
        .iter()
        .zip(&bands)
        .map(|(&regime, b)| BandCounts {
            regime,
            n_ok: b.n_ok,
            n_failed: b.n_failed,
        })
        .collect();
    write_json(&dir.join("bands.json"), &counts)?;
    finish(dir, "randomize", cfg, started, vec!["bands.csv".into(), "bands.json".into()])
}

/// Write `comparison.json`. The report is written even when an ordering
/// fails, in which case the error is [`ScenarioError::Ordering`].
pub fn compare_cmd(cfg: &ScenarioConfig, dir: &Path) -> Result<(ComparisonReport, CommandReport), ScenarioError> {
    let started = Instant::now();
    let report = compare_regimes(&cfg.econ, &cfg.climate, &cfg.grid())?;
    prepare(dir)?;
    write_json(&dir.join("comparison.json"), &report)?;
    let written = finish(dir, "compare", cfg, started, vec!["comparison.json".into()])?;
    let failed: Vec<&str> = report.failures().map(|c| c.name.as_str()).collect();
    if !failed.is_empty() {
        return Err(ScenarioError::Ordering(failed.join(", ")));
    }
    Ok((report, written))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ScenarioConfig {
        ScenarioConfig::default().with_value("n_grid", 33.0).unwrap()
    }

    #[test]
    fn regime_lists() {
        assert_eq!(parse_regimes("all").unwrap().len(), 3);
        assert_eq!(parse_regimes("nash, gp,gp").unwrap(), vec![Regime::Nash, Regime::GlobalPlanner]);
        assert!(parse_regimes("xp").is_err());
        assert!(parse_regimes("").is_err());
    }

    #[test]
    fn sweep_failures_become_rows() {
        let rows = sweep_rows(&small(), "sigma", &[1.0, 0.0], &[Regime::GlobalPlanner]).unwrap();
        assert!(rows[0].error.is_none());
        assert!(rows[1].error.as_deref().unwrap().contains("sigma"));
        assert!(sweep_rows(&small(), "nope", &[1.0], &[Regime::Nash]).is_err());
    }

    #[test]
    fn compare_refuses_non_log() {
        let cfg = small().with_value("sigma1", 1.2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let e = compare_cmd(&cfg, dir.path()).unwrap_err();
        assert_eq!(e.exit_code(), 2, "{e}");
    }
}
