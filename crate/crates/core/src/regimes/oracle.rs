//! Brute-force numeric solution of the temporary problems.
//!
//! It shares no formulas with the closed forms: budgets are eliminated,
//! the rest of the allocation is found by multi-start projected Newton on
//! finite differences, and the game is solved by best-response iteration.

use std::sync::Arc;

use nalgebra::DVector;

use super::closed_form::TemporaryWeights;
use crate::climate::{climate_system, emissions, utility, Allocation, ClimateParams, EconParams, Regime};
use crate::error::{Error, Result};
use crate::itm::{nash_at, DiscountedLinearObjective, GamePlayer, NashOptions, StateWeight, TemporaryGame};
use crate::optim::{nelder_mead_max, projected_newton_max, MaxResult, NelderMeadOptions, NewtonOptions};

fn best_of(f: &dyn Fn(&[f64]) -> f64, starts: &[Vec<f64>], lower: &[f64], coarse: bool) -> Result<MaxResult> {
    let nm = NelderMeadOptions {
        max_iter: 400,
        ..NelderMeadOptions::default()
    };
    let opts = NewtonOptions::default();
    let mut best: Option<MaxResult> = None;
    for s in starts {
        if !f(s).is_finite() {
            continue;
        }
        let step: Vec<f64> = s.iter().map(|v| 0.2 * v.abs().max(0.5)).collect();
        let x0 = if coarse {
            nelder_mead_max(f, s, &step, lower, &nm).x
        } else {
            s.clone()
        };
        let r = projected_newton_max(f, &x0, lower, &opts);
        if r.value.is_finite() && best.as_ref().is_none_or(|b| r.value > b.value) {
            best = Some(r);
        }
    }
    best.ok_or_else(|| Error::NotConverged("no feasible start for the numeric search".into()))
}

fn gp(e: &EconParams, w: &TemporaryWeights) -> Result<Allocation> {
    // z = (C1, C2, B1, B2, Ra, Rb, K2); K1 closes the pooled budget.
    let alloc = |z: &[f64]| {
        let used = z[0] + z[1] + z[2] + z[3] + z[4] + z[5] + z[6];
        let k1 = (used - e.a_bar * e.h.value(z[4]) * z[6]) / (e.a_bar - 1.0);
        Allocation {
            c1: z[0],
            c2: z[1],
            b1: z[2],
            b2: z[3],
            k1,
            k2: z[6],
            ra: z[4],
            rb: z[5],
        }
    };
    let f = |z: &[f64]| {
        let a = alloc(z);
        if a.k1 < 0.0 {
            return f64::NEG_INFINITY;
        }
        objective(e, w, &a)
    };
    let starts = vec![
        vec![1.0, 1.0, 1.0, 1.0, 0.0, 0.5, 0.0],
        vec![10.0, 10.0, 5.0, 1.0, 0.1, 1.0, 0.1],
        vec![100.0, 100.0, 20.0, 2.0, 0.0, 2.0, 0.0],
    ];
    let r = best_of(&f, &starts, &[0.0; 7], true)?;
    Ok(alloc(&r.x))
}

fn rp(e: &EconParams, w: &TemporaryWeights) -> Result<Allocation> {
    // z = (C1, C2, B1, B2, Ra, Rb); each capital stock closes its own budget.
    let alloc = |z: &[f64]| Allocation {
        c1: z[0],
        c2: z[1],
        b1: z[2],
        b2: z[3],
        k1: (z[0] + z[2] + z[4] + z[5]) / (e.a_bar - 1.0),
        k2: (z[1] + z[3]) / (e.a_bar * e.h.value(z[4]) - 1.0),
        ra: z[4],
        rb: z[5],
    };
    let f = |z: &[f64]| objective(e, w, &alloc(z));
    let starts = vec![
        vec![1.0, 1.0, 1.0, 1.0, 0.0, 0.5],
        vec![10.0, 10.0, 5.0, 1.0, 1.0, 1.0],
        vec![100.0, 100.0, 20.0, 2.0, 10.0, 2.0],
        vec![300.0, 300.0, 20.0, 3.0, 30.0, 1.0],
    ];
    let r = best_of(&f, &starts, &[0.0; 6], true)?;
    Ok(alloc(&r.x))
}

fn objective(e: &EconParams, w: &TemporaryWeights, a: &Allocation) -> f64 {
    w.w1 * utility(a.c1, e.sigma1) + w.w2 * utility(a.c2, e.sigma2) - w.price() * emissions(a, e).total
}

fn nash(e: &EconParams, w: &TemporaryWeights, climate: &ClimateParams) -> Result<Allocation> {
    let system = climate_system(climate, e)?;
    // Game payoffs only enter through the numeric best responses below, so the
    // objectives are placeholders with the right controls.
    let obj = || DiscountedLinearObjective::new(StateWeight::Constant(DVector::zeros(2)), Arc::new(|_t: f64, _u: &[f64]| 0.0), 1.0);
    let game = TemporaryGame::new(
        system,
        vec![
            GamePlayer {
                controls: vec![0, 2, 4, 6, 7],
                objective: obj()?,
            },
            GamePlayer {
                controls: vec![1, 3, 5],
                objective: obj()?,
            },
        ],
    )?;
    let e = *e;
    let (p1, p2) = (w.p1, w.p2);
    let br = move |_g: &TemporaryGame, player: usize, _t: f64, u: &[f64]| -> Result<Vec<f64>> {
        let other = Allocation::from_slice(u);
        if player == 0 {
            // z = (C1, B1, Ra, Rb); K1 from country 1's budget.
            let build = |z: &[f64]| Allocation {
                c1: z[0],
                b1: z[1],
                ra: z[2],
                rb: z[3],
                k1: (z[0] + z[1] + z[2] + z[3]) / (e.a_bar - 1.0),
                ..other
            };
            let f = |z: &[f64]| utility(z[0], e.sigma1) - p1 * emissions(&build(z), &e).total;
            let starts = vec![vec![other.c1.max(1.0), other.b1.max(1.0), other.ra, other.rb.max(0.1)]];
            let r = best_of(&f, &starts, &[0.0; 4], false)?;
            let a = build(&r.x);
            Ok(vec![a.c1, a.b1, a.k1, a.ra, a.rb])
        } else {
            let y = e.a_bar * e.h.value(other.ra) - 1.0;
            let build = |z: &[f64]| Allocation {
                c2: z[0],
                b2: z[1],
                k2: (z[0] + z[1]) / y,
                ..other
            };
            let f = |z: &[f64]| utility(z[0], e.sigma2) - p2 * emissions(&build(z), &e).total;
            let starts = vec![vec![other.c2.max(1.0), other.b2.max(1.0)]];
            let r = best_of(&f, &starts, &[0.0; 2], false)?;
            let a = build(&r.x);
            Ok(vec![a.c2, a.b2, a.k2])
        }
    };
    let opts = NashOptions {
        // Finite-difference responses are noisy near 1e-9.
        tol: 1e-8,
        max_iter: 300,
        lower: Some(vec![0.0; 8]),
        ..NashOptions::default()
    };
    let u0 = DVector::from_vec(vec![10.0, 10.0, 1.0, 1.0, 1.0, 1.0, 0.0, 0.5]);
    let point = nash_at(&game, 0.0, &u0, &br, &opts)?;
    Ok(Allocation::from_slice(point.u.as_slice()))
}

/// Solve the temporary problem of `regime` numerically.
///
/// For the game only `p1`, `p2` of `weights` are used.
pub fn temporary_oracle(
    regime: Regime,
    econ: &EconParams,
    climate: &ClimateParams,
    weights: &TemporaryWeights,
) -> Result<Allocation> {
    econ.validate()?;
    match regime {
        Regime::GlobalPlanner => gp(econ, weights),
        Regime::RestrictedPlanner => rp(econ, weights),
        Regime::Nash => nash(econ, weights, climate),
    }
}
