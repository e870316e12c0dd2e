use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::climate::{default_rho, ClimateParams, EconParams, TechCurve};
use crate::itm::TimeGrid;
use crate::robust::{Alpha, DrawResponse, RandomizationSpec, RobustParams};

use super::ScenarioError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EconSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho2: Option<f64>,
    #[serde(rename = "A_bar", skip_serializing_if = "Option::is_none")]
    pub a_bar: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma2: Option<f64>,
    #[serde(rename = "eta_K", skip_serializing_if = "Option::is_none")]
    pub eta_k: Option<f64>,
    #[serde(rename = "eta_B", skip_serializing_if = "Option::is_none")]
    pub eta_b: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g_inf: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h_inf: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClimateSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi: Option<f64>,
    #[serde(rename = "phi_L", skip_serializing_if = "Option::is_none")]
    pub phi_l: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi_0: Option<f64>,
    #[serde(rename = "S_bar", skip_serializing_if = "Option::is_none")]
    pub s_bar: Option<f64>,
    #[serde(rename = "P0", skip_serializing_if = "Option::is_none")]
    pub p0: Option<f64>,
    #[serde(rename = "T0", skip_serializing_if = "Option::is_none")]
    pub t0: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_grid: Option<usize>,
    /// Largest acceptable discount weight `e^{-ρ t_end}` beyond the horizon.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tail_tol: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobustSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Alpha>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma1_hat: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma2_hat: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomizationSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_draws: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lower: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub upper: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub response: Option<DrawResponse>,
}

/// The configuration file as written, before defaults are applied.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    #[serde(default)]
    pub econ: EconSection,
    #[serde(default)]
    pub climate: ClimateSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub robust: RobustSection,
    #[serde(default)]
    pub randomization: RandomizationSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub t_end: f64,
    pub n_grid: usize,
    pub tail_tol: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            t_end: 50.0,
            n_grid: 512,
            tail_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioConfig {
    pub econ: EconParams,
    pub climate: ClimateParams,
    pub solver: SolverSettings,
    pub robust: RobustParams,
    pub randomization: RandomizationSpec,
    /// Messages about defaults that should be reviewed.
    #[serde(skip)]
    pub warnings: Vec<String>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig::from_raw(&RawConfig::default()).expect("defaults are valid")
    }
}

fn invalid(key: &str, msg: impl std::fmt::Display) -> ScenarioError {
    ScenarioError::Config(format!("{key}: {msg}"))
}

impl ScenarioConfig {
    pub fn from_raw(raw: &RawConfig) -> Result<Self, ScenarioError> {
        let d = EconParams::default();
        let r = &raw.econ;
        if r.rho.is_some() && (r.rho1.is_some() || r.rho2.is_some()) {
            return Err(invalid("econ.rho", "give either rho or rho1/rho2, not both"));
        }
        let base_rho = r.rho.unwrap_or_else(default_rho);
        let econ = EconParams {
            a_bar: r.a_bar.unwrap_or(d.a_bar),
            sigma1: r.sigma1.unwrap_or(d.sigma1),
            sigma2: r.sigma2.unwrap_or(d.sigma2),
            gamma1: r.gamma1.unwrap_or(d.gamma1),
            gamma2: r.gamma2.unwrap_or(d.gamma2),
            rho1: r.rho1.unwrap_or(base_rho),
            rho2: r.rho2.unwrap_or(base_rho),
            eta_k: r.eta_k.unwrap_or(d.eta_k),
            eta_b: r.eta_b.unwrap_or(d.eta_b),
            theta1: r.theta1.unwrap_or(d.theta1),
            theta2: r.theta2.unwrap_or(d.theta2),
            g: TechCurve::new(r.g0.unwrap_or(d.g.at_zero), r.g_inf.unwrap_or(d.g.at_infinity)),
            h: TechCurve::new(r.h0.unwrap_or(d.h.at_zero), r.h_inf.unwrap_or(d.h.at_infinity)),
        };
        econ.validate().map_err(|e| invalid("econ", e))?;

        let dc = ClimateParams::default();
        let c = &raw.climate;
        let climate = ClimateParams {
            phi: c.phi.unwrap_or(dc.phi),
            phi_l: c.phi_l.unwrap_or(dc.phi_l),
            phi_0: c.phi_0.unwrap_or(dc.phi_0),
            s_bar: c.s_bar.unwrap_or(dc.s_bar),
            p0: c.p0.unwrap_or(dc.p0),
            t0: c.t0.unwrap_or(dc.t0),
        };
        climate.validate().map_err(|e| invalid("climate", e))?;
        let mut warnings = Vec::new();
        let missing: Vec<&str> = [("P0", c.p0), ("T0", c.t0), ("S_bar", c.s_bar)]
            .iter()
            .filter(|(_, v)| v.is_none())
            .map(|(k, _)| *k)
            .collect();
        if !missing.is_empty() {
            warnings.push(format!(
                "climate.{} not set; using normalized defaults (P0 = T0 = 0.5, S_bar = 1)",
                missing.join(", climate.")
            ));
        }

        let ds = SolverSettings::default();
        let solver = SolverSettings {
            t_end: raw.solver.t_end.unwrap_or(ds.t_end),
            n_grid: raw.solver.n_grid.unwrap_or(ds.n_grid),
            tail_tol: raw.solver.tail_tol.unwrap_or(ds.tail_tol),
        };
        let grid = TimeGrid::new(0.0, solver.t_end, solver.n_grid).map_err(|e| invalid("solver", e))?;
        if !(solver.tail_tol > 0.0) {
            return Err(invalid("solver.tail_tol", "must be > 0"));
        }
        let tail = grid.tail_bound(econ.rho1.min(econ.rho2));
        if tail > solver.tail_tol {
            warnings.push(format!(
                "solver.t_end = {} leaves a discount weight of {tail:e} beyond the horizon (tail_tol = {:e})",
                solver.t_end, solver.tail_tol
            ));
        }

        let rb = &raw.robust;
        let robust = RobustParams::new(
            rb.alpha.unwrap_or(Alpha::Finite(1.0)),
            rb.gamma1_hat.unwrap_or(econ.gamma1),
            rb.gamma2_hat.unwrap_or(econ.gamma2),
        )
        .map_err(|e| invalid("robust", e))?;

        let dr = RandomizationSpec::new(1000, 42);
        let rr = &raw.randomization;
        let randomization = RandomizationSpec {
            n_draws: rr.n_draws.unwrap_or(dr.n_draws),
            seed: rr.seed.unwrap_or(dr.seed),
            percentiles: (rr.lower.unwrap_or(dr.percentiles.0), rr.upper.unwrap_or(dr.percentiles.1)),
            response: rr.response.unwrap_or_default(),
        };
        randomization.validate().map_err(|e| invalid("randomization", e))?;

        Ok(Self {
            econ,
            climate,
            solver,
            robust,
            randomization,
            warnings,
        })
    }

    /// Every setting written out explicitly.
    pub fn to_raw(&self) -> RawConfig {
        let e = &self.econ;
        let (rho, rho1, rho2) = if e.equal_discounting() {
            (Some(e.rho1), None, None)
        } else {
            (None, Some(e.rho1), Some(e.rho2))
        };
        RawConfig {
            econ: EconSection {
                rho,
                rho1,
                rho2,
                a_bar: Some(e.a_bar),
                sigma1: Some(e.sigma1),
                sigma2: Some(e.sigma2),
                gamma1: Some(e.gamma1),
                gamma2: Some(e.gamma2),
                eta_k: Some(e.eta_k),
                eta_b: Some(e.eta_b),
                theta1: Some(e.theta1),
                theta2: Some(e.theta2),
                g0: Some(e.g.at_zero),
                g_inf: Some(e.g.at_infinity),
                h0: Some(e.h.at_zero),
                h_inf: Some(e.h.at_infinity),
            },
            climate: ClimateSection {
                phi: Some(self.climate.phi),
                phi_l: Some(self.climate.phi_l),
                phi_0: Some(self.climate.phi_0),
                s_bar: Some(self.climate.s_bar),
                p0: Some(self.climate.p0),
                t0: Some(self.climate.t0),
            },
            solver: SolverSection {
                t_end: Some(self.solver.t_end),
                n_grid: Some(self.solver.n_grid),
                tail_tol: Some(self.solver.tail_tol),
            },
            robust: RobustSection {
                alpha: Some(self.robust.alpha),
                gamma1_hat: Some(self.robust.gamma1_hat),
                gamma2_hat: Some(self.robust.gamma2_hat),
            },
            randomization: RandomizationSection {
                n_draws: Some(self.randomization.n_draws),
                seed: Some(self.randomization.seed),
                lower: Some(self.randomization.percentiles.0),
                upper: Some(self.randomization.percentiles.1),
                response: Some(self.randomization.response),
            },
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&self.to_raw()).expect("config serializes")
    }

    pub fn grid(&self) -> TimeGrid {
        TimeGrid::new(0.0, self.solver.t_end, self.solver.n_grid).expect("validated at load")
    }

    /// A copy with one numeric key changed, revalidated.
    ///
    /// Keys are `section.key` or a bare key that is unique across sections.
    /// `sigma` sets both curvatures; `gamma_split` sets `gamma1` and moves
    /// `gamma2` so that their sum is unchanged.
    pub fn with_value(&self, key: &str, value: f64) -> Result<Self, ScenarioError> {
        let mut raw = self.to_raw();
        match key {
            "sigma" => {
                raw.econ.sigma1 = Some(value);
                raw.econ.sigma2 = Some(value);
            }
            "gamma_split" => {
                let total = self.econ.gamma1 + self.econ.gamma2;
                raw.econ.gamma1 = Some(value);
                raw.econ.gamma2 = Some(total - value);
            }
            "rho" | "econ.rho" => {
                raw.econ.rho = Some(value);
                raw.econ.rho1 = None;
                raw.econ.rho2 = None;
            }
            "rho1" | "econ.rho1" | "rho2" | "econ.rho2" => {
                raw.econ.rho = None;
                raw.econ.rho1 = Some(self.econ.rho1);
                raw.econ.rho2 = Some(self.econ.rho2);
                if key.ends_with('1') {
                    raw.econ.rho1 = Some(value);
                } else {
                    raw.econ.rho2 = Some(value);
                }
            }
            _ => {
                let mut doc = serde_json::to_value(&raw).expect("config serializes");
                let (section, name) = resolve_key(key)?;
                let slot = &mut doc[section.as_str()][name.as_str()];
                if !(slot.is_number() || slot.is_string()) {
                    return Err(invalid(key, "not a numeric setting"));
                }
                *slot = if name == "n_grid" || name == "n_draws" || name == "seed" {
                    if value.fract() != 0.0 || value < 0.0 {
                        return Err(invalid(key, "must be a non-negative integer"));
                    }
                    serde_json::json!(value as u64)
                } else {
                    serde_json::json!(value)
                };
                raw = serde_json::from_value(doc).map_err(|e| invalid(key, e))?;
            }
        }
        Self::from_raw(&raw)
    }
}

/// Accept the keys that [`ScenarioConfig::with_value`] understands.
pub fn check_key(key: &str) -> Result<(), ScenarioError> {
    match key {
        "sigma" | "gamma_split" | "rho" | "econ.rho" | "rho1" | "econ.rho1" | "rho2" | "econ.rho2" => Ok(()),
        _ => resolve_key(key).map(|_| ()),
    }
}

const SECTIONS: [&str; 5] = ["econ", "climate", "solver", "robust", "randomization"];

fn section_keys(section: &str) -> &'static [&'static str] {
    match section {
        "econ" => &[
            "rho", "rho1", "rho2", "A_bar", "sigma1", "sigma2", "gamma1", "gamma2", "eta_K", "eta_B", "theta1",
            "theta2", "g0", "g_inf", "h0", "h_inf",
        ],
        "climate" => &["phi", "phi_L", "phi_0", "S_bar", "P0", "T0"],
        "solver" => &["t_end", "n_grid", "tail_tol"],
        "robust" => &["alpha", "gamma1_hat", "gamma2_hat"],
        "randomization" => &["n_draws", "seed", "lower", "upper"],
        _ => &[],
    }
}

fn resolve_key(key: &str) -> Result<(String, String), ScenarioError> {
    if let Some((s, k)) = key.split_once('.') {
        if section_keys(s).contains(&k) {
            return Ok((s.to_string(), k.to_string()));
        }
        return Err(invalid(key, "unknown setting"));
    }
    let hits: Vec<&str> = SECTIONS.iter().copied().filter(|s| section_keys(s).contains(&key)).collect();
    match hits.as_slice() {
        [s] => Ok((s.to_string(), key.to_string())),
        [] => Err(invalid(key, "unknown setting")),
        _ => Err(invalid(key, "ambiguous setting; prefix it with its section")),
    }
}

pub fn parse_config(text: &str) -> Result<ScenarioConfig, ScenarioError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| ScenarioError::Config(e.to_string()))?;
    let cfg = ScenarioConfig::from_raw(&raw)?;
    for w in &cfg.warnings {
        log::warn!("{w}");
    }
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig, ScenarioError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ScenarioError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = parse_config("").unwrap();
        assert_eq!(c.econ, EconParams::default());
        assert_eq!(c.climate, ClimateParams::default());
        assert_eq!(c.solver, SolverSettings::default());
        assert_eq!(c.robust.alpha, Alpha::Finite(1.0));
        assert_eq!(c.warnings.len(), 1);
    }

    #[test]
    fn bad_values_name_the_key() {
        let e = parse_config("[econ]\nsigma1 = 0\n").unwrap_err().to_string();
        assert!(e.contains("sigma must be > 0"), "{e}");
        let e = parse_config("[econ]\nh0 = 0.05\n").unwrap_err().to_string();
        assert!(e.contains("A_bar h(0) > 1"), "{e}");
        let e = parse_config("[econ]\nsigma3 = 1\n").unwrap_err().to_string();
        assert!(e.contains("sigma3"), "{e}");
        let e = parse_config("[econ]\nrho = 0.1\nrho1 = 0.2\n").unwrap_err().to_string();
        assert!(e.contains("econ.rho"), "{e}");
    }

    #[test]
    fn infinite_alpha() {
        let c = parse_config("[robust]\nalpha = \"inf\"\n").unwrap();
        assert_eq!(c.robust.alpha, Alpha::Infinite);
        assert!(parse_config("[robust]\nalpha = -2\n").is_err());
    }

    #[test]
    fn round_trip() {
        let c = parse_config("[econ]\nrho1 = 0.4\nrho2 = 0.48\n[climate]\nP0 = 1.5\n").unwrap();
        let again = parse_config(&c.to_toml()).unwrap();
        assert_eq!(c.econ, again.econ);
        assert_eq!(c.climate, again.climate);
        assert_eq!(c.to_toml(), again.to_toml());
        assert!(again.warnings.is_empty(), "{:?}", again.warnings);
    }

    #[test]
    fn single_key_changes() {
        let c = ScenarioConfig::default();
        assert_eq!(c.with_value("sigma", 1.5).unwrap().econ.sigma2, 1.5);
        let s = c.with_value("gamma_split", 0.0075).unwrap();
        assert!((s.econ.gamma2 - 0.0175).abs() < 1e-15);
        assert_eq!(c.with_value("climate.P0", 2.0).unwrap().climate.p0, 2.0);
        assert_eq!(c.with_value("A_bar", 12.0).unwrap().econ.a_bar, 12.0);
        let h = c.with_value("rho2", 0.5).unwrap();
        assert_eq!((h.econ.rho1, h.econ.rho2), (default_rho(), 0.5));
        assert!(c.with_value("nope", 1.0).is_err());
        assert!(check_key("nope").is_err() && check_key("sigma").is_ok() && check_key("phi").is_ok());
        assert!(c.with_value("sigma1", 0.0).is_err());
    }
}
