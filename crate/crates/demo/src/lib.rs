//! WebAssembly bindings behind `www/index.html`.
//!
//! Each entry point takes a scenario in the same TOML format as the CLI and
//! returns JSON. The plain functions are usable from Rust; the `wasm_*`
//! wrappers turn errors into JavaScript exceptions.

use climate_itm::climate::Regime;
use climate_itm::regimes::{compare_regimes, solve_regime};
use climate_itm::robust::{alpha_sweep, Alpha};
use climate_itm::scenario::{parse_config, ScenarioConfig};
use serde::Serialize;
use wasm_bindgen::prelude::*;

fn scenario(text: &str) -> Result<ScenarioConfig, String> {
    parse_config(text).map_err(|e| e.to_string())
}

fn regime(tag: &str) -> Result<Regime, String> {
    Regime::parse(tag).ok_or_else(|| format!("unknown regime '{tag}'"))
}

fn to_json<T: Serialize>(v: &T) -> Result<String, String> {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct Path {
    regime: &'static str,
    times: Vec<f64>,
    temperature: Vec<f64>,
    c1: Vec<f64>,
    c2: Vec<f64>,
    emissions: Vec<f64>,
    #[serde(rename = "U1")]
    u1: f64,
    #[serde(rename = "U2")]
    u2: f64,
    #[serde(rename = "U")]
    u: f64,
    warnings: Vec<String>,
}

/// Temperature, consumption and emission paths of one regime.
pub fn solve(config: &str, regime_tag: &str) -> Result<String, String> {
    let cfg = scenario(config)?;
    let r = regime(regime_tag)?;
    let sol = solve_regime(r, &cfg.econ, &cfg.climate, &cfg.grid()).map_err(|e| e.to_string())?;
    to_json(&Path {
        regime: r.tag(),
        times: sol.grid.times(),
        temperature: sol.temperature.clone(),
        c1: sol.allocations.iter().map(|a| a.c1).collect(),
        c2: sol.allocations.iter().map(|a| a.c2).collect(),
        emissions: sol.emissions.iter().map(|e| e.total).collect(),
        u1: sol.u1,
        u2: sol.u2,
        u: sol.u,
        warnings: cfg.warnings,
    })
}

/// The regime ordering report.
pub fn compare(config: &str) -> Result<String, String> {
    let cfg = scenario(config)?;
    let report = compare_regimes(&cfg.econ, &cfg.climate, &cfg.grid()).map_err(|e| e.to_string())?;
    to_json(&report)
}

#[derive(Serialize)]
struct AlphaPoint {
    alpha: Alpha,
    gamma1: f64,
    gamma2: f64,
    final_temperature: f64,
}

/// Worst-case damages and final temperature for each comma-separated weight.
pub fn robust_sweep(config: &str, regime_tag: &str, alphas: &str) -> Result<String, String> {
    let cfg = scenario(config)?;
    let r = regime(regime_tag)?;
    let alphas: Vec<Alpha> = alphas
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.parse::<Alpha>().map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    let hat = (cfg.robust.gamma1_hat, cfg.robust.gamma2_hat);
    let points = alpha_sweep(r, hat, &alphas, &cfg.econ, &cfg.climate, &cfg.grid())
        .into_iter()
        .map(|run| {
            run.map(|run| AlphaPoint {
                alpha: run.alpha,
                gamma1: run.robust.gamma1,
                gamma2: run.robust.gamma2,
                final_temperature: run.solution.final_temperature(),
            })
            .map_err(|e| e.to_string())
        })
        .collect::<Result<Vec<_>, _>>()?;
    to_json(&points)
}

#[wasm_bindgen(js_name = solve)]
pub fn wasm_solve(config: &str, regime: &str) -> Result<String, JsValue> {
    solve(config, regime).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = compare)]
pub fn wasm_compare(config: &str) -> Result<String, JsValue> {
    compare(config).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = robustSweep)]
pub fn wasm_robust_sweep(config: &str, regime: &str, alphas: &str) -> Result<String, JsValue> {
    robust_sweep(config, regime, alphas).map_err(|e| JsValue::from_str(&e))
}
