//! Two-country climate-economy model: carbon stocks, emissions, technologies,
//! welfare and the temperature map.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::itm::{DiscountedLinearObjective, Dynamics, LinearStateSystem, StateWeight, TimeGrid};

/// Carbon-cycle parameters. `P` is the permanent stock, `T` the decaying one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClimateParams {
    pub phi: f64,
    pub phi_l: f64,
    pub phi_0: f64,
    pub s_bar: f64,
    pub p0: f64,
    pub t0: f64,
}

impl Default for ClimateParams {
    fn default() -> Self {
        Self {
            phi: 0.5,
            phi_l: 0.2,
            phi_0: 0.393,
            s_bar: 1.0,
            p0: 0.5,
            t0: 0.5,
        }
    }
}

impl ClimateParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Precondition(m.to_string()));
        if !(self.phi > 0.0) {
            return bad("phi must be > 0");
        }
        if !(0.0..=1.0).contains(&self.phi_l) {
            return bad("phi_L must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.phi_0) {
            return bad("phi_0 must lie in [0, 1]");
        }
        if !(self.s_bar > 0.0) {
            return bad("S_bar must be > 0");
        }
        if !(self.p0 >= 0.0 && self.t0 >= 0.0) {
            return bad("P0 and T0 must be >= 0");
        }
        Ok(())
    }

    /// Emission-to-stock loadings `(φ_L, (1-φ_L) φ₀)`.
    pub fn loadings(&self) -> (f64, f64) {
        (self.phi_l, (1.0 - self.phi_l) * self.phi_0)
    }
}

/// Discounted stock exposure of one unit of emissions:
/// `φ_L/ρ + (1-φ_L) φ₀/(ρ+φ)`.
pub fn phi_constant(rho: f64, climate: &ClimateParams) -> f64 {
    climate.phi_l / rho + (1.0 - climate.phi_l) * climate.phi_0 / (rho + climate.phi)
}

/// Rational technology curve `x ↦ (v∞ x + v₀)/(x + 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TechCurve {
    pub at_zero: f64,
    pub at_infinity: f64,
}

impl TechCurve {
    pub fn new(at_zero: f64, at_infinity: f64) -> Self {
        Self { at_zero, at_infinity }
    }

    pub fn value(&self, x: f64) -> f64 {
        (self.at_infinity * x + self.at_zero) / (x + 1.0)
    }

    pub fn deriv(&self, x: f64) -> f64 {
        (self.at_infinity - self.at_zero) / ((x + 1.0) * (x + 1.0))
    }

    pub fn second_deriv(&self, x: f64) -> f64 {
        -2.0 * (self.at_infinity - self.at_zero) / (x + 1.0).powi(3)
    }

    /// Smallest `x >= 0` with `deriv(x) <= slope` (0 when already below).
    pub fn inverse_deriv(&self, slope: f64) -> f64 {
        let d = self.at_infinity - self.at_zero;
        if slope <= 0.0 {
            return f64::INFINITY;
        }
        ((d / slope).sqrt() - 1.0).max(0.0)
    }

    pub fn validate(&self, name: &str) -> Result<()> {
        let ok = |v: f64| v > 0.0 && v < 1.0;
        if !ok(self.at_zero) || !ok(self.at_infinity) {
            return Err(Error::Precondition(format!("{name} curve values must lie in (0, 1)")));
        }
        if !(self.at_infinity > self.at_zero) {
            return Err(Error::Precondition(format!(
                "{name} curve must be strictly increasing ({name}_inf > {name}0)"
            )));
        }
        Ok(())
    }
}

/// Economic parameters of both countries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EconParams {
    pub a_bar: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub rho1: f64,
    pub rho2: f64,
    pub eta_k: f64,
    pub eta_b: f64,
    pub theta1: f64,
    pub theta2: f64,
    pub g: TechCurve,
    pub h: TechCurve,
}

/// Annual discount factor 0.96 over a ten-year period.
pub fn default_rho() -> f64 {
    -10.0 * 0.96f64.ln()
}

impl Default for EconParams {
    fn default() -> Self {
        Self {
            a_bar: 10.0,
            sigma1: 1.0,
            sigma2: 1.0,
            gamma1: 0.0125,
            gamma2: 0.0125,
            rho1: default_rho(),
            rho2: default_rho(),
            eta_k: 1.0,
            eta_b: 1.0,
            theta1: 0.5,
            theta2: 0.5,
            g: TechCurve::new(0.2, 0.5),
            h: TechCurve::new(0.5, 0.9),
        }
    }
}

impl EconParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Precondition(m));
        if !(self.a_bar > 1.0) {
            return bad("A_bar must be > 1".into());
        }
        for (k, v) in [("sigma1", self.sigma1), ("sigma2", self.sigma2)] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{k}: sigma must be > 0"));
            }
        }
        for (k, v) in [("gamma1", self.gamma1), ("gamma2", self.gamma2)] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{k} must be > 0"));
            }
        }
        for (k, v) in [("rho1", self.rho1), ("rho2", self.rho2)] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{k} must be > 0"));
            }
        }
        for (k, v) in [("eta_K", self.eta_k), ("eta_B", self.eta_b)] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{k} must be > 0"));
            }
        }
        for (k, v) in [("theta1", self.theta1), ("theta2", self.theta2)] {
            if !(v > 0.0 && v < 1.0) {
                return bad(format!("{k} must lie in (0, 1)"));
            }
        }
        self.g.validate("g")?;
        self.h.validate("h")?;
        if !(self.a_bar * self.h.at_zero > 1.0) {
            return bad(format!(
                "A_bar * h(0) = {} violates A_bar h(0) > 1",
                self.a_bar * self.h.at_zero
            ));
        }
        // g^{1/(1-θ2)} concave on [0, ∞); for the rational curve the binding point is x = 0.
        let p = 1.0 / (1.0 - self.theta2);
        if !((p - 1.0) * (self.g.at_infinity - self.g.at_zero) < 2.0 * self.g.at_zero) {
            return bad("g^(1/(1-theta2)) must be strictly concave".into());
        }
        Ok(())
    }

    pub fn sigma(&self, country: Country) -> f64 {
        match country {
            Country::North => self.sigma1,
            Country::South => self.sigma2,
        }
    }

    pub fn gamma(&self, country: Country) -> f64 {
        match country {
            Country::North => self.gamma1,
            Country::South => self.gamma2,
        }
    }

    pub fn rho(&self, country: Country) -> f64 {
        match country {
            Country::North => self.rho1,
            Country::South => self.rho2,
        }
    }

    pub fn is_log(&self) -> bool {
        self.sigma1 == 1.0 && self.sigma2 == 1.0
    }

    pub fn equal_discounting(&self) -> bool {
        self.rho1 == self.rho2
    }

    pub fn with_gammas(mut self, gamma1: f64, gamma2: f64) -> Self {
        self.gamma1 = gamma1;
        self.gamma2 = gamma2;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Country {
    North,
    South,
}

impl Country {
    pub fn index(self) -> usize {
        match self {
            Country::North => 1,
            Country::South => 2,
        }
    }
}

/// CRRA utility; `σ = 1` is exactly `ln C`.
pub fn utility(c: f64, sigma: f64) -> f64 {
    if c <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if sigma == 1.0 {
        c.ln()
    } else {
        c.powf(1.0 - sigma) / (1.0 - sigma)
    }
}

/// Consumption at which marginal utility times `weight` equals `price`.
pub fn consumption_for_price(weight: f64, price: f64, sigma: f64) -> f64 {
    let r = weight / price;
    if sigma == 1.0 {
        r
    } else {
        r.powf(1.0 / sigma)
    }
}

/// Controls at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Allocation {
    pub c1: f64,
    pub c2: f64,
    pub b1: f64,
    pub b2: f64,
    pub k1: f64,
    pub k2: f64,
    pub ra: f64,
    pub rb: f64,
}

impl Allocation {
    pub const LABELS: [&'static str; 8] = ["C1", "C2", "B1", "B2", "K1", "K2", "Ra", "Rb"];

    pub fn to_array(&self) -> [f64; 8] {
        [self.c1, self.c2, self.b1, self.b2, self.k1, self.k2, self.ra, self.rb]
    }

    pub fn from_slice(u: &[f64]) -> Self {
        Self {
            c1: u[0],
            c2: u[1],
            b1: u[2],
            b2: u[3],
            k1: u[4],
            k2: u[5],
            ra: u[6],
            rb: u[7],
        }
    }

    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_row_slice(&self.to_array())
    }

    pub fn is_non_negative(&self) -> bool {
        self.to_array().iter().all(|v| *v >= 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Emissions {
    pub g1: f64,
    pub g2: f64,
    pub total: f64,
    /// Set when net emissions are not positive (net removal).
    pub non_positive: bool,
}

/// Charges a non-negative base to a power, treating tiny negative round-off as zero.
fn pow0(x: f64, e: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x.powf(e)
    }
}

pub fn emissions(alloc: &Allocation, econ: &EconParams) -> Emissions {
    let g1 = econ.eta_k * alloc.k1 - econ.eta_b * pow0(alloc.b1, econ.theta1);
    let g2 = econ.eta_k * alloc.k2 - econ.eta_b * econ.g.value(alloc.rb) * pow0(alloc.b2, econ.theta2);
    let total = g1 + g2;
    Emissions {
        g1,
        g2,
        total,
        non_positive: total <= 0.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClimateState {
    pub p: f64,
    pub t: f64,
    pub s: f64,
}

impl ClimateState {
    pub fn new(p: f64, t: f64) -> Self {
        Self { p, t, s: p + t }
    }
}

/// Carbon stocks on the grid for emissions held constant on each cell.
pub fn climate_integrate(climate: &ClimateParams, emissions_path: &[f64], grid: &TimeGrid) -> Result<Vec<ClimateState>> {
    if emissions_path.len() != grid.n_points() {
        return Err(Error::Precondition(format!(
            "emissions path has {} values for {} grid points",
            emissions_path.len(),
            grid.n_points()
        )));
    }
    let (lp, lt) = climate.loadings();
    let dt = grid.dt();
    let decay = (-climate.phi * dt).exp();
    let gain = -(-climate.phi * dt).exp_m1() / climate.phi;
    let mut p = climate.p0;
    let mut t = climate.t0;
    let mut out = Vec::with_capacity(grid.n_points());
    out.push(ClimateState::new(p, t));
    for g in &emissions_path[..grid.n_cells()] {
        p += lp * g * dt;
        t = t * decay + lt * g * gain;
        if !(p.is_finite() && t.is_finite()) {
            return Err(Error::numeric("carbon stocks overflowed"));
        }
        out.push(ClimateState::new(p, t));
    }
    Ok(out)
}

/// Warming above pre-industrial, 3 degrees per doubling of the stock.
pub fn temperature(s: f64, s_bar: f64) -> Result<f64> {
    if !(s > 0.0 && s_bar > 0.0) {
        return Err(Error::Domain(format!(
            "temperature needs positive stocks, got S = {s}, S_bar = {s_bar}"
        )));
    }
    Ok(3.0 * (s / s_bar).ln() / std::f64::consts::LN_2)
}

/// Welfare of one country along a grid path:
/// `γ[S̄/ρ - P0/ρ - T0/(ρ+φ)] + ∫₀^T e^{-ρt} [u(C) - γ Φ G] dt`, with the integrand
/// constant on each cell. Returns `-∞` if consumption is ever non-positive.
pub fn country_welfare(
    path: &[Allocation],
    grid: &TimeGrid,
    climate: &ClimateParams,
    econ: &EconParams,
    country: Country,
) -> Result<f64> {
    if path.len() != grid.n_points() {
        return Err(Error::Precondition("allocation path length does not match the grid".into()));
    }
    let rho = econ.rho(country);
    let gamma = econ.gamma(country);
    let sigma = econ.sigma(country);
    let phi_c = phi_constant(rho, climate);
    let mut total = gamma * (climate.s_bar / rho - climate.p0 / rho - climate.t0 / (rho + climate.phi));
    for (k, a) in path.iter().take(grid.n_cells()).enumerate() {
        let c = match country {
            Country::North => a.c1,
            Country::South => a.c2,
        };
        if c <= 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        let w = ((-rho * grid.time(k)).exp() - (-rho * grid.time(k + 1)).exp()) / rho;
        total += w * (utility(c, sigma) - gamma * phi_c * emissions(a, econ).total);
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    #[serde(rename = "gp")]
    GlobalPlanner,
    #[serde(rename = "rp")]
    RestrictedPlanner,
    #[serde(rename = "nash")]
    Nash,
}

impl Regime {
    pub const ALL: [Regime; 3] = [Regime::GlobalPlanner, Regime::RestrictedPlanner, Regime::Nash];

    pub fn tag(self) -> &'static str {
        match self {
            Regime::GlobalPlanner => "gp",
            Regime::RestrictedPlanner => "rp",
            Regime::Nash => "nash",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gp" => Some(Regime::GlobalPlanner),
            "rp" => Some(Regime::RestrictedPlanner),
            "nash" => Some(Regime::Nash),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Feasibility {
    pub feasible: bool,
    /// One pooled slack (GP) or the two per-country slacks.
    pub slacks: Vec<f64>,
}

/// Resource constraints: pooled for the global planner, per country otherwise.
pub fn resource_feasibility(alloc: &Allocation, econ: &EconParams, regime: Regime) -> Feasibility {
    let a = alloc;
    let hr = econ.h.value(a.ra);
    let slacks = match regime {
        Regime::GlobalPlanner => {
            let used = a.c1 + a.c2 + a.b1 + a.b2 + a.k1 + a.k2 + a.ra + a.rb;
            vec![econ.a_bar * (a.k1 + hr * a.k2) - used]
        }
        Regime::RestrictedPlanner | Regime::Nash => vec![
            econ.a_bar * a.k1 - (a.c1 + a.b1 + a.k1 + a.ra + a.rb),
            econ.a_bar * hr * a.k2 - (a.c2 + a.b2 + a.k2),
        ],
    };
    let scale = 1.0 + a.to_array().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let feasible = a.is_non_negative() && slacks.iter().all(|s| *s >= -1e-12 * scale);
    Feasibility { feasible, slacks }
}

/// The carbon cycle as a linear-state system over the 8-component allocation.
pub fn climate_system(climate: &ClimateParams, econ: &EconParams) -> Result<LinearStateSystem> {
    climate.validate()?;
    let (lp, lt) = climate.loadings();
    let e = *econ;
    let f = Arc::new(move |_t: f64, u: &[f64]| {
        let g = emissions(&Allocation::from_slice(u), &e).total;
        DVector::from_vec(vec![lp * g, lt * g])
    });
    let bound = (lp + lt) * (econ.eta_k * 2.0 + econ.eta_b * 2.0);
    Ok(LinearStateSystem::new(
        Dynamics::Constant(DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, -climate.phi]))),
        8,
        f,
        DVector::from_vec(vec![climate.p0, climate.t0]),
        bound,
    )?
    .with_time_invariant_forcing())
}

/// Country welfare without the constant `γ S̄ / ρ` as a linear-state objective:
/// state weight `-γ (1, 1)` and control payoff `u(C)`.
pub fn country_objective(econ: &EconParams, country: Country) -> Result<DiscountedLinearObjective> {
    let gamma = econ.gamma(country);
    let sigma = econ.sigma(country);
    let idx = match country {
        Country::North => 0,
        Country::South => 1,
    };
    Ok(DiscountedLinearObjective::new(
        StateWeight::Constant(DVector::from_vec(vec![-gamma, -gamma])),
        Arc::new(move |_t, u: &[f64]| utility(u[idx], sigma)),
        econ.rho(country),
    )?
    .with_time_invariant_payoff())
}
