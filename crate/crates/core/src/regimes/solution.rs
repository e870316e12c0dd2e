use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::closed_form::{nash_allocation, Diagnostics, PlannerProblem, TemporaryWeights};
use crate::climate::{
    climate_integrate, climate_system, country_welfare, emissions, phi_constant, resource_feasibility, temperature,
    utility, Allocation, ClimateParams, ClimateState, Country, EconParams, Emissions, Regime,
};
use crate::error::{Error, Result};
use crate::itm::{
    pointwise_solve, DiscountedLinearObjective, PointwiseOptions, StateWeight, TemporaryProblem, TimeGrid,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolutionTag {
    #[serde(rename = "GP")]
    Gp,
    #[serde(rename = "RP")]
    Rp,
    Nash,
    #[serde(rename = "HeteroGP")]
    HeteroGp,
    #[serde(rename = "HeteroRP")]
    HeteroRp,
}

impl SolutionTag {
    pub fn regime(self) -> Regime {
        match self {
            SolutionTag::Gp | SolutionTag::HeteroGp => Regime::GlobalPlanner,
            SolutionTag::Rp | SolutionTag::HeteroRp => Regime::RestrictedPlanner,
            SolutionTag::Nash => Regime::Nash,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolutionDiagnostics {
    /// Temporary-solver diagnostics at the first grid point.
    pub initial: Diagnostics,
    pub max_foc_residual: f64,
    /// Largest absolute resource-constraint slack along the path.
    pub max_budget_slack: f64,
    /// Grid points at which net emissions are not positive.
    pub non_positive_emissions: usize,
    pub stationary: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeSolution {
    pub tag: SolutionTag,
    pub grid: TimeGrid,
    pub allocations: Vec<Allocation>,
    pub climate: Vec<ClimateState>,
    pub temperature: Vec<f64>,
    pub emissions: Vec<Emissions>,
    pub u1: f64,
    pub u2: f64,
    pub u: f64,
    pub diagnostics: SolutionDiagnostics,
}

impl RegimeSolution {
    pub fn final_temperature(&self) -> f64 {
        *self.temperature.last().expect("grid has at least two points")
    }

    /// `∫₀^T G dt` with emissions constant on each cell.
    pub fn cumulative_emissions(&self) -> f64 {
        let dt = self.grid.dt();
        self.emissions[..self.grid.n_cells()].iter().map(|e| e.total * dt).sum()
    }
}

/// Integrate the climate, evaluate welfare and check feasibility along a path.
pub fn build_solution(
    tag: SolutionTag,
    grid: &TimeGrid,
    allocations: Vec<Allocation>,
    diagnostics: Vec<Diagnostics>,
    econ: &EconParams,
    climate: &ClimateParams,
) -> Result<RegimeSolution> {
    if allocations.len() != grid.n_points() || diagnostics.is_empty() {
        return Err(Error::Precondition("allocation path does not match the grid".into()));
    }
    let em: Vec<Emissions> = allocations.iter().map(|a| emissions(a, econ)).collect();
    let g: Vec<f64> = em.iter().map(|e| e.total).collect();
    let states = climate_integrate(climate, &g, grid)?;
    let temp = states
        .iter()
        .map(|s| temperature(s.s, climate.s_bar))
        .collect::<Result<Vec<_>>>()?;
    let u1 = country_welfare(&allocations, grid, climate, econ, Country::North)?;
    let u2 = country_welfare(&allocations, grid, climate, econ, Country::South)?;
    if !(u1.is_finite() && u2.is_finite()) {
        return Err(Error::numeric(format!("welfare is not finite (U1 = {u1}, U2 = {u2})")));
    }
    let regime = tag.regime();
    let mut max_slack = 0.0f64;
    for (k, a) in allocations.iter().enumerate() {
        let f = resource_feasibility(a, econ, regime);
        if !f.feasible {
            return Err(Error::numeric(format!(
                "allocation infeasible at t = {} (slacks {:?})",
                grid.time(k),
                f.slacks
            )));
        }
        max_slack = f.slacks.iter().fold(max_slack, |m, s| m.max(s.abs()));
    }
    let stationary = allocations.windows(2).all(|w| w[0] == w[1]);
    Ok(RegimeSolution {
        tag,
        grid: *grid,
        temperature: temp,
        climate: states,
        u1,
        u2,
        u: u1 + u2,
        diagnostics: SolutionDiagnostics {
            initial: diagnostics[0],
            max_foc_residual: diagnostics.iter().map(|d| d.foc_residual).fold(0.0, f64::max),
            max_budget_slack: max_slack,
            non_positive_emissions: em.iter().filter(|e| e.non_positive).count(),
            stationary,
        },
        emissions: em,
        allocations,
    })
}

/// Solve a regime on the grid. With equal discounting the allocation is
/// constant; otherwise the planners are solved pointwise in time.
pub fn solve_regime(
    regime: Regime,
    econ: &EconParams,
    climate: &ClimateParams,
    grid: &TimeGrid,
) -> Result<RegimeSolution> {
    econ.validate()?;
    climate.validate()?;
    if !econ.equal_discounting() && regime != Regime::Nash {
        return hetero_discount_path(econ, climate, regime, grid);
    }
    let (tag, solved) = match regime {
        Regime::GlobalPlanner => {
            let w = TemporaryWeights::equal(econ, phi_constant(econ.rho1, climate));
            (SolutionTag::Gp, PlannerProblem::new(*econ, &w)?.gp()?)
        }
        Regime::RestrictedPlanner => {
            let w = TemporaryWeights::equal(econ, phi_constant(econ.rho1, climate));
            (SolutionTag::Rp, PlannerProblem::new(*econ, &w)?.rp()?)
        }
        Regime::Nash => {
            let p1 = econ.gamma1 * phi_constant(econ.rho1, climate);
            let p2 = econ.gamma2 * phi_constant(econ.rho2, climate);
            (SolutionTag::Nash, nash_allocation(econ, p1, p2)?)
        }
    };
    build_solution(
        tag,
        grid,
        vec![solved.allocation; grid.n_points()],
        vec![solved.diagnostics],
        econ,
        climate,
    )
}

/// Planner with country-specific discount rates.
///
/// Discounting at the smaller rate, country `i` gets the weight
/// `e^{-(ρ_i - ρ) t}`; the emission price comes from the shadow weight of the
/// time-varying state weight `-(γ1 w1(t) + γ2 w2(t)) (1, 1)`.
pub fn hetero_discount_path(
    econ: &EconParams,
    climate: &ClimateParams,
    regime: Regime,
    grid: &TimeGrid,
) -> Result<RegimeSolution> {
    econ.validate()?;
    let tag = match regime {
        Regime::GlobalPlanner => SolutionTag::HeteroGp,
        Regime::RestrictedPlanner => SolutionTag::HeteroRp,
        Regime::Nash => {
            return Err(Error::Precondition(
                "country-specific discounting applies to the planners only".into(),
            ))
        }
    };
    if !(econ.rho1 > 0.0 && econ.rho2 > 0.0) {
        return Err(Error::Domain("discount rates must be positive".into()));
    }
    let rho = econ.rho1.min(econ.rho2);
    let (d1, d2) = (econ.rho1 - rho, econ.rho2 - rho);
    let (g1, g2) = (econ.gamma1, econ.gamma2);
    let e = *econ;
    let state_weight = if econ.equal_discounting() {
        StateWeight::Constant(DVector::from_element(2, -(g1 + g2)))
    } else {
        StateWeight::TimeVarying(Arc::new(move |t: f64| {
            DVector::from_element(2, -(g1 * (-d1 * t).exp() + g2 * (-d2 * t).exp()))
        }))
    };
    let payoff = Arc::new(move |t: f64, u: &[f64]| {
        (-d1 * t).exp() * utility(u[0], e.sigma1) + (-d2 * t).exp() * utility(u[1], e.sigma2)
    });
    let mut objective = DiscountedLinearObjective::new(state_weight, payoff, rho)?;
    if econ.equal_discounting() {
        objective = objective.with_time_invariant_payoff();
    }
    let system = climate_system(climate, econ)?;
    let (lp, lt) = climate.loadings();

    let solve_at = |p: &TemporaryProblem| -> Result<(Allocation, Diagnostics)> {
        let price = -(p.b[0] * lp + p.b[1] * lt);
        let w1 = (-d1 * p.t).exp();
        let w2 = (-d2 * p.t).exp();
        let problem = PlannerProblem {
            econ: e,
            w1,
            w2,
            price,
        };
        if !(price > 0.0) {
            return Err(Error::Domain(format!("emission price {price} is not positive")));
        }
        let s = match regime {
            Regime::GlobalPlanner => problem.gp()?,
            _ => problem.rp()?,
        };
        Ok((s.allocation, s.diagnostics))
    };
    let inner = |p: &TemporaryProblem| solve_at(p).map(|(a, _)| a.to_vector());
    let path = pointwise_solve(&system, &objective, grid, &inner, &PointwiseOptions::default())?;
    let allocations: Vec<Allocation> = path.values.iter().map(|v| Allocation::from_slice(v.as_slice())).collect();
    // One more solve at the first point for the reported diagnostics.
    let first = {
        let shadow = crate::itm::shadow_weight(&system, &objective)?;
        let p = TemporaryProblem {
            t: grid.t_start(),
            b: shadow.at(grid.t_start())?,
            system: &system,
            objective: &objective,
        };
        solve_at(&p)?.1
    };
    build_solution(tag, grid, allocations, vec![first], econ, climate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::climate::default_rho;
    use crate::regimes::closed_form::gp_closed_form;

    fn grid() -> TimeGrid {
        TimeGrid::new(0.0, 50.0, 65).unwrap()
    }

    #[test]
    fn equal_discount_paths_are_constant() {
        let e = EconParams::default();
        let c = ClimateParams::default();
        for r in Regime::ALL {
            let s = solve_regime(r, &e, &c, &grid()).unwrap();
            assert!(s.diagnostics.stationary);
            assert!(s.diagnostics.max_budget_slack < 1e-9);
            assert!(s.u.is_finite());
        }
    }

    #[test]
    fn hetero_reduces_to_closed_form() {
        let e = EconParams::default();
        let c = ClimateParams::default();
        let s = hetero_discount_path(&e, &c, Regime::GlobalPlanner, &grid()).unwrap();
        let cf = gp_closed_form(&e, phi_constant(default_rho(), &c)).unwrap();
        for a in &s.allocations {
            for (x, y) in a.to_array().iter().zip(cf.to_array()) {
                assert!((x - y).abs() <= 1e-8 * y.abs().max(1.0));
            }
        }
    }

    #[test]
    fn impatient_south_consumes_less_over_time() {
        let e = EconParams {
            rho2: 1.2 * default_rho(),
            ..EconParams::default()
        };
        let s = hetero_discount_path(&e, &ClimateParams::default(), Regime::GlobalPlanner, &grid()).unwrap();
        assert_eq!(s.tag, SolutionTag::HeteroGp);
        for w in s.allocations.windows(2) {
            assert!(w[1].c1 >= w[0].c1);
            assert!(w[1].c2 <= w[0].c2);
        }
    }
}
