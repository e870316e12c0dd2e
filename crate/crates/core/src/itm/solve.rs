//! Pointwise solution of the temporary problems
//! `max_u ⟨b(t), f(t, u)⟩ + h(t, u)` along a grid.

use nalgebra::DVector;

use super::grid::{ControlPath, TimeGrid};
use super::objective::DiscountedLinearObjective;
use super::shadow::{shadow_weight, ShadowWeight};
use super::system::LinearStateSystem;
use crate::error::{Error, Result};
use crate::optim::{projected_newton_max, NewtonOptions};
use crate::par;

/// The temporary problem at a single time.
pub struct TemporaryProblem<'a> {
    pub t: f64,
    pub b: DVector<f64>,
    pub system: &'a LinearStateSystem,
    pub objective: &'a DiscountedLinearObjective,
}

impl TemporaryProblem<'_> {
    pub fn value(&self, u: &[f64]) -> f64 {
        self.b.dot(&self.system.forcing(self.t, u)) + self.objective.payoff(self.t, u)
    }
}

pub type InnerSolver<'s> = dyn Fn(&TemporaryProblem) -> Result<DVector<f64>> + Sync + 's;

#[derive(Debug, Clone)]
pub struct PointwiseOptions {
    /// Solve once and reuse the maximizer when all data are time-invariant.
    pub reuse_autonomous: bool,
}

impl Default for PointwiseOptions {
    fn default() -> Self {
        Self {
            reuse_autonomous: true,
        }
    }
}

pub fn pointwise_solve(
    system: &LinearStateSystem,
    objective: &DiscountedLinearObjective,
    grid: &TimeGrid,
    inner: &InnerSolver,
    opts: &PointwiseOptions,
) -> Result<ControlPath> {
    let shadow = shadow_weight(system, objective)?;
    pointwise_solve_with(system, objective, &shadow, grid, inner, opts)
}

pub fn pointwise_solve_with(
    system: &LinearStateSystem,
    objective: &DiscountedLinearObjective,
    shadow: &ShadowWeight,
    grid: &TimeGrid,
    inner: &InnerSolver,
    opts: &PointwiseOptions,
) -> Result<ControlPath> {
    let solve_at = |t: f64| -> Result<DVector<f64>> {
        let problem = TemporaryProblem {
            t,
            b: shadow.at(t)?,
            system,
            objective,
        };
        let u = inner(&problem).map_err(|e| e.at_time(t))?;
        if u.len() != system.dim_control() || u.iter().any(|v| !v.is_finite()) {
            return Err(Error::InnerSolver {
                t,
                reason: "inner solver returned an invalid control".into(),
            });
        }
        Ok(u)
    };
    let autonomous = system.is_autonomous() && objective.is_autonomous() && shadow.is_constant();
    if opts.reuse_autonomous && autonomous {
        let u = solve_at(grid.t_start())?;
        return Ok(ControlPath::constant(*grid, u));
    }
    let values: Result<Vec<_>> = par::map_indexed(grid.n_points(), |k| solve_at(grid.time(k)))
        .into_iter()
        .collect();
    ControlPath::new(*grid, values?)
}

/// Generic inner solver: projected Newton over `u >= lower` from each start,
/// keeping the best value (ties go to the lexicographically smaller control).
pub fn box_newton_solver(lower: Vec<f64>, starts: Vec<Vec<f64>>) -> impl Fn(&TemporaryProblem) -> Result<DVector<f64>> + Sync {
    move |p: &TemporaryProblem| {
        let opts = NewtonOptions::default();
        let mut best: Option<(Vec<f64>, f64)> = None;
        for s in &starts {
            let r = projected_newton_max(|u| p.value(u), s, &lower, &opts);
            if !r.value.is_finite() {
                continue;
            }
            let better = match &best {
                None => true,
                Some((bx, bv)) => {
                    r.value > *bv + 1e-12 * (1.0 + bv.abs())
                        || ((r.value - bv).abs() <= 1e-12 * (1.0 + bv.abs()) && lex_less(&r.x, bx))
                }
            };
            if better {
                best = Some((r.x, r.value));
            }
        }
        best.map(|(x, _)| DVector::from_vec(x))
            .ok_or_else(|| Error::numeric("no start produced a finite objective"))
    }
}

pub(crate) fn lex_less(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        if x < y {
            return true;
        }
        if x > y {
            return false;
        }
    }
    false
}
