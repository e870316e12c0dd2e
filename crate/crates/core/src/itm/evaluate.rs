//! State integration and the two equivalent ways of evaluating an objective.
//!
//! Controls are constant on each cell and the forcing on cell `k` is
//! `f(t_k, u_k)`. Integrals use composite Simpson with four subintervals per
//! cell; the state at every Simpson node is propagated exactly within the cell.
//! Beyond `t_end` the control is switched off: no forcing and no control
//! payoff, while the state keeps evolving freely.

use nalgebra::{DMatrix, DVector};

use super::grid::{ControlPath, StatePath};
use super::objective::DiscountedLinearObjective;
use super::shadow::{shadow_weight, ShadowWeight};
use super::system::{Dynamics, LinearStateSystem, MatrixFn};
use crate::error::{Error, Result};

const SUB: usize = 8;
const SIMPSON: [f64; SUB + 1] = [1.0, 4.0, 2.0, 4.0, 2.0, 4.0, 2.0, 4.0, 1.0];

enum Propagator {
    /// `x(t_k + τ_j) = E_j x_k + W_j f_k` for the Simpson offsets `τ_j`.
    Exact { e: Vec<DMatrix<f64>>, w: Vec<DMatrix<f64>> },
    Rk4 { a: MatrixFn, substeps: usize },
}

impl Propagator {
    fn new(system: &LinearStateSystem, dt: f64) -> Self {
        let n = system.dim_state();
        let offsets: Vec<f64> = (0..=SUB).map(|j| j as f64 * dt / SUB as f64).collect();
        if let Some(d) = system.constant_diagonal() {
            let e = offsets
                .iter()
                .map(|&tau| DMatrix::from_diagonal(&d.map(|a| (a * tau).exp())))
                .collect();
            let w = offsets
                .iter()
                .map(|&tau| {
                    DMatrix::from_diagonal(&d.map(|a| if a == 0.0 { tau } else { (a * tau).exp_m1() / a }))
                })
                .collect();
            return Propagator::Exact { e, w };
        }
        match system.dynamics() {
            Dynamics::Constant(a) => {
                let mut e = Vec::new();
                let mut w = Vec::new();
                for &tau in &offsets {
                    // exp([[A, I], [0, 0]] τ) carries ∫₀^τ e^{As} ds in its top-right block.
                    let mut aug = DMatrix::<f64>::zeros(2 * n, 2 * n);
                    aug.view_mut((0, 0), (n, n)).copy_from(a);
                    aug.view_mut((0, n), (n, n)).copy_from(&DMatrix::identity(n, n));
                    let ex = (aug * tau).exp();
                    e.push(ex.view((0, 0), (n, n)).into_owned());
                    w.push(ex.view((0, n), (n, n)).into_owned());
                }
                Propagator::Exact { e, w }
            }
            Dynamics::TimeVarying(a) => Propagator::Rk4 {
                a: a.clone(),
                substeps: ((dt / SUB as f64 / 1e-2).ceil() as usize).max(4),
            },
        }
    }

    /// States at the `SUB + 1` Simpson nodes of the cell starting at `t0`.
    fn cell(&self, t0: f64, dt: f64, x: &DVector<f64>, f: &DVector<f64>) -> Vec<DVector<f64>> {
        match self {
            Propagator::Exact { e, w } => (0..=SUB).map(|j| &e[j] * x + &w[j] * f).collect(),
            Propagator::Rk4 { a, substeps } => {
                let mut out = Vec::with_capacity(SUB + 1);
                out.push(x.clone());
                let mut y = x.clone();
                let h = dt / (SUB * *substeps) as f64;
                let mut t = t0;
                for _ in 0..SUB {
                    for _ in 0..*substeps {
                        let rhs = |s: f64, v: &DVector<f64>| a(s) * v + f;
                        let k1 = rhs(t, &y);
                        let k2 = rhs(t + 0.5 * h, &(&y + &k1 * (0.5 * h)));
                        let k3 = rhs(t + 0.5 * h, &(&y + &k2 * (0.5 * h)));
                        let k4 = rhs(t + h, &(&y + &k3 * h));
                        y += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
                        t += h;
                    }
                    out.push(y.clone());
                }
                out
            }
        }
    }
}

fn check_path(system: &LinearStateSystem, path: &ControlPath) -> Result<()> {
    if path.values.iter().any(|u| u.len() != system.dim_control()) {
        return Err(Error::Precondition("control dimension mismatch".into()));
    }
    Ok(())
}

fn forcings(system: &LinearStateSystem, path: &ControlPath) -> Vec<DVector<f64>> {
    let g = path.grid;
    (0..g.n_cells())
        .map(|k| system.forcing(g.time(k), path.values[k].as_slice()))
        .collect()
}

/// Walk the state through every cell, handing each cell's Simpson-node states
/// to `visit`. Returns the state at every grid point.
fn sweep_cells<V>(system: &LinearStateSystem, path: &ControlPath, mut visit: V) -> Result<Vec<DVector<f64>>>
where
    V: FnMut(usize, f64, &[DVector<f64>]),
{
    check_path(system, path)?;
    let grid = path.grid;
    let dt = grid.dt();
    let prop = Propagator::new(system, dt);
    let fs = forcings(system, path);
    let mut x = system.initial_state().clone();
    let mut states = Vec::with_capacity(grid.n_points());
    states.push(x.clone());
    for (k, f) in fs.iter().enumerate() {
        let t0 = grid.time(k);
        let nodes = prop.cell(t0, dt, &x, f);
        visit(k, t0, &nodes);
        x = nodes[SUB].clone();
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::numeric(format!("state blew up near t = {t0}")));
        }
        states.push(x.clone());
    }
    Ok(states)
}

pub fn integrate_state(system: &LinearStateSystem, path: &ControlPath) -> Result<StatePath> {
    let values = sweep_cells(system, path, |_, _, _| {})?;
    Ok(StatePath {
        grid: path.grid,
        values,
    })
}

/// Original objective: discounted running payoff along the integrated state.
pub fn evaluate_original(
    system: &LinearStateSystem,
    objective: &DiscountedLinearObjective,
    path: &ControlPath,
) -> Result<f64> {
    let shadow = shadow_weight(system, objective)?;
    evaluate_original_with(system, objective, &shadow, path)
}

pub fn evaluate_original_with(
    system: &LinearStateSystem,
    objective: &DiscountedLinearObjective,
    shadow: &ShadowWeight,
    path: &ControlPath,
) -> Result<f64> {
    let rho = objective.discount_rate;
    let grid = path.grid;
    let dt = grid.dt();
    let mut total = 0.0;
    let states = sweep_cells(system, path, |k, t0, nodes| {
        let u = path.values[k].as_slice();
        let mut s = 0.0;
        for (j, x) in nodes.iter().enumerate() {
            let t = t0 + j as f64 * dt / SUB as f64;
            let a = objective.state_weight.at(t);
            s += SIMPSON[j] * (-rho * t).exp() * (a.dot(x) + objective.payoff(t, u));
        }
        total += s * dt / (3.0 * SUB as f64);
    })?;
    // Free evolution after the horizon contributes e^{-ρT} ⟨b(T), x(T)⟩.
    let t_end = grid.t_end();
    let tail = (-rho * t_end).exp() * shadow.at(t_end)?.dot(&states[states.len() - 1]);
    let value = total + tail;
    if !value.is_finite() {
        return Err(Error::numeric("objective evaluated to a non-finite value"));
    }
    Ok(value)
}

/// Transformed objective: `⟨b(0), x0⟩ + ∫ e^{-ρt} [⟨b(t), f(t,u)⟩ + h(t,u)] dt`.
pub fn evaluate_transformed(
    system: &LinearStateSystem,
    objective: &DiscountedLinearObjective,
    path: &ControlPath,
) -> Result<f64> {
    let shadow = shadow_weight(system, objective)?;
    evaluate_transformed_with(system, objective, &shadow, path)
}

pub fn evaluate_transformed_with(
    system: &LinearStateSystem,
    objective: &DiscountedLinearObjective,
    shadow: &ShadowWeight,
    path: &ControlPath,
) -> Result<f64> {
    check_path(system, path)?;
    let rho = objective.discount_rate;
    let grid = path.grid;
    let dt = grid.dt();
    let exact = shadow.is_constant() && objective.is_autonomous();
    let fs = forcings(system, path);
    let mut total = shadow.at(grid.t_start())?.dot(system.initial_state());
    for (k, f) in fs.iter().enumerate() {
        let t0 = grid.time(k);
        let u = path.values[k].as_slice();
        if exact {
            let b = shadow.at(t0)?;
            let t1 = grid.time(k + 1);
            let w = ((-rho * t0).exp() - (-rho * t1).exp()) / rho;
            total += w * (b.dot(f) + objective.payoff(t0, u));
        } else {
            let mut s = 0.0;
            for (j, wj) in SIMPSON.iter().enumerate() {
                let t = t0 + j as f64 * dt / SUB as f64;
                s += wj * (-rho * t).exp() * (shadow.at(t)?.dot(f) + objective.payoff(t, u));
            }
            total += s * dt / (3.0 * SUB as f64);
        }
    }
    if !total.is_finite() {
        return Err(Error::numeric("objective evaluated to a non-finite value"));
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::itm::objective::StateWeight;
    use crate::itm::grid::TimeGrid;
    use std::sync::Arc;

    fn decay_system(x0: Vec<f64>) -> LinearStateSystem {
        LinearStateSystem::new(
            Dynamics::Constant(DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, -0.5]))),
            1,
            Arc::new(|_, u: &[f64]| DVector::from_vec(vec![0.2 * u[0], 0.3 * u[0]])),
            DVector::from_vec(x0),
            1.0,
        )
        .unwrap()
        .with_time_invariant_forcing()
    }

    #[test]
    fn homogeneous_solution() {
        let sys = decay_system(vec![0.5, 0.5]);
        let grid = TimeGrid::new(0.0, 10.0, 101).unwrap();
        let st = integrate_state(&sys, &ControlPath::constant(grid, DVector::zeros(1))).unwrap();
        for (k, x) in st.values.iter().enumerate() {
            assert_eq!(x[0], 0.5);
            assert!((x[1] - 0.5 * (-0.5 * grid.time(k)).exp()).abs() < 1e-14);
        }
    }

    #[test]
    fn constant_payoff_geometric() {
        let sys = decay_system(vec![0.0, 0.0]);
        let rho = 0.4;
        let obj = DiscountedLinearObjective::new(StateWeight::Constant(DVector::zeros(2)), Arc::new(|_, _| 2.0), rho)
            .unwrap();
        let grid = TimeGrid::new(0.0, 30.0, 301).unwrap();
        let v = evaluate_original(&sys, &obj, &ControlPath::constant(grid, DVector::zeros(1))).unwrap();
        let expect = 2.0 / rho * (1.0 - (-rho * 30.0f64).exp());
        assert!((v - expect).abs() < 1e-9 * expect, "{v} vs {expect}");
    }

    #[test]
    fn zero_control_gives_initial_term() {
        let sys = decay_system(vec![0.7, 0.3]);
        let rho = 0.4;
        let a = DVector::from_vec(vec![1.5, -1.0]);
        let obj = DiscountedLinearObjective::new(StateWeight::Constant(a), Arc::new(|_, _| 0.0), rho).unwrap();
        let grid = TimeGrid::new(0.0, 20.0, 201).unwrap();
        let path = ControlPath::constant(grid, DVector::zeros(1));
        let expect = 0.7 * 1.5 / rho - 0.3 / (rho + 0.5);
        let orig = evaluate_original(&sys, &obj, &path).unwrap();
        let tr = evaluate_transformed(&sys, &obj, &path).unwrap();
        assert!((orig - expect).abs() < 1e-9 * expect.abs(), "{orig} vs {expect}");
        assert!((tr - expect).abs() < 1e-15);
    }

    #[test]
    fn general_matrix_identity() {
        let a = DMatrix::from_row_slice(2, 2, &[-0.3, 0.2, 0.1, -0.7]);
        let sys = LinearStateSystem::new(
            Dynamics::Constant(a),
            1,
            Arc::new(|_, u: &[f64]| DVector::from_vec(vec![u[0], -0.5 * u[0]])),
            DVector::from_vec(vec![1.0, 2.0]),
            1.0,
        )
        .unwrap();
        let obj = DiscountedLinearObjective::new(
            StateWeight::Constant(DVector::from_vec(vec![1.0, 0.5])),
            Arc::new(|_, u: &[f64]| -u[0] * u[0]),
            0.2,
        )
        .unwrap();
        let grid = TimeGrid::new(0.0, 40.0, 401).unwrap();
        let vals = (0..401).map(|k| DVector::from_vec(vec![(k as f64 * 0.1).sin()])).collect();
        let path = ControlPath::new(grid, vals).unwrap();
        let o = evaluate_original(&sys, &obj, &path).unwrap();
        let t = evaluate_transformed(&sys, &obj, &path).unwrap();
        assert!((o - t).abs() < 1e-9 * (1.0 + o.abs()), "{o} vs {t}");
    }
}
