//! Semi-closed-form solutions of the temporary problems.
//!
//! Every regime reduces to explicit formulas for consumption and the
//! country-1 abatement, plus at most a two-dimensional search over the
//! transfers `(Ra, Rb)`.

use serde::Serialize;

use crate::climate::{
    consumption_for_price, phi_constant, utility, Allocation, ClimateParams, EconParams,
};
use crate::error::{Error, Result};
use crate::optim::{bisect, safeguarded_newton};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Default)]
pub struct Diagnostics {
    /// Bracket that contained the abatement-transfer maximizer.
    pub rb_bracket: (f64, f64),
    /// Scan interval for the production transfer (restricted planner only).
    pub ra_bracket: Option<(f64, f64)>,
    /// Largest first-order residual at interior transfer components.
    pub foc_residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Solved {
    pub allocation: Allocation,
    pub diagnostics: Diagnostics,
}

/// Utility weights and emission prices of the temporary problem at one time.
///
/// The planners maximize `w1 u1(C1) + w2 u2(C2) - (p1 + p2) G`; in the game
/// player `i` maximizes `u_i(C_i) - p_i G`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TemporaryWeights {
    pub w1: f64,
    pub w2: f64,
    pub p1: f64,
    pub p2: f64,
}

impl TemporaryWeights {
    /// Equal discounting: `w = (1, 1)`, `p_i = γ_i Φ`.
    pub fn equal(econ: &EconParams, phi: f64) -> Self {
        Self {
            w1: 1.0,
            w2: 1.0,
            p1: econ.gamma1 * phi,
            p2: econ.gamma2 * phi,
        }
    }

    /// Weights at time `t` relative to the slower of the two discount rates.
    pub fn at(econ: &EconParams, climate: &ClimateParams, t: f64) -> Self {
        let base = econ.rho1.min(econ.rho2);
        let w1 = (-(econ.rho1 - base) * t).exp();
        let w2 = (-(econ.rho2 - base) * t).exp();
        Self {
            w1,
            w2,
            p1: econ.gamma1 * phi_constant(econ.rho1, climate) * w1,
            p2: econ.gamma2 * phi_constant(econ.rho2, climate) * w2,
        }
    }

    pub fn price(&self) -> f64 {
        self.p1 + self.p2
    }
}

/// Country-1 abatement, the same in every regime.
pub fn b1_level(e: &EconParams) -> f64 {
    (e.eta_b * e.theta1 * (e.a_bar - 1.0) / e.eta_k).powf(1.0 / (1.0 - e.theta1))
}

/// Country-2 abatement when a unit of its effort costs `η_K / y` in emissions.
pub fn b2_level(e: &EconParams, rb: f64, y: f64) -> f64 {
    (e.eta_b * e.g.value(rb) * e.theta2 * y / e.eta_k).powf(1.0 / (1.0 - e.theta2))
}

/// Net value of optimally chosen country-2 abatement:
/// `max_B [η_B g(R) B^θ - η_K B / y]`.
pub fn abatement_value(e: &EconParams, r: f64, y: f64) -> f64 {
    let th = e.theta2;
    let q = th / (1.0 - th);
    (1.0 - th) * th.powf(q) * (e.eta_b * e.g.value(r)).powf(1.0 / (1.0 - th)) * (y / e.eta_k).powf(q)
}

fn dq_dr(e: &EconParams, r: f64, q: f64) -> f64 {
    q * e.g.deriv(r) / ((1.0 - e.theta2) * e.g.value(r))
}

fn d2q_dr2(e: &EconParams, r: f64, q: f64) -> f64 {
    let th = e.theta2;
    let gr = e.g.value(r);
    let ratio = e.g.deriv(r) / gr;
    q / (1.0 - th) * (th / (1.0 - th) * ratio * ratio + e.g.second_deriv(r) / gr)
}

fn dq_dy(e: &EconParams, y: f64, q: f64) -> f64 {
    e.theta2 / (1.0 - e.theta2) * q / y
}

/// `argmax_{R >= 0} Q(R, y) - η_K R / (Ā - 1)`.
///
/// The objective is concave, so `R = 0` whenever its slope at zero is not
/// positive. Otherwise the bracket is doubled until the slope turns negative
/// and the root of the slope is found by safeguarded Newton.
pub fn rb_argmax(e: &EconParams, y: f64) -> Result<(f64, (f64, f64))> {
    let cost = e.eta_k / (e.a_bar - 1.0);
    let slope = |r: f64| dq_dr(e, r, abatement_value(e, r, y)) - cost;
    if !(slope(0.0) > 0.0) {
        return Ok((0.0, (0.0, 0.0)));
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut found = false;
    for _ in 0..200 {
        if slope(hi) < 0.0 {
            found = true;
            break;
        }
        lo = hi;
        hi *= 2.0;
    }
    if !found {
        return Err(Error::NotConverged(format!(
            "abatement-transfer objective still increasing at {hi}"
        )));
    }
    let root = safeguarded_newton(
        |r| {
            let q = abatement_value(e, r, y);
            (dq_dr(e, r, q) - cost, d2q_dr2(e, r, q))
        },
        lo,
        hi,
        0.5 * (lo + hi),
        1e-16,
    )?;
    Ok((root, (lo, hi)))
}

/// True when the global planner's abatement subsidy is zero:
/// `η_K/η_B >= g(0)^θ g'(0)^{1-θ} θ^θ (Ā - 1)`.
pub fn gp_rb_zero_threshold(e: &EconParams) -> bool {
    let th = e.theta2;
    let rhs = e.g.value(0.0).powf(th) * e.g.deriv(0.0).powf(1.0 - th) * th.powf(th) * (e.a_bar - 1.0);
    e.eta_k / e.eta_b >= rhs
}

/// True when country 1 does not subsidize abatement in the game, i.e. when
/// `g'(0) <= η_K / ((Ā-1) η_B B2^θ)` at the `Rb = 0` response of country 2.
pub fn nash_rb_zero_threshold(e: &EconParams) -> bool {
    let y2 = e.a_bar * e.h.value(0.0) - 1.0;
    let b2 = b2_level(e, 0.0, y2);
    e.g.deriv(0.0) <= e.eta_k / ((e.a_bar - 1.0) * e.eta_b * b2.powf(e.theta2))
}

/// Planner's temporary problem `max w1 u1 + w2 u2 - p G`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannerProblem {
    pub econ: EconParams,
    pub w1: f64,
    pub w2: f64,
    pub price: f64,
}

impl PlannerProblem {
    pub fn new(econ: EconParams, weights: &TemporaryWeights) -> Result<Self> {
        let price = weights.price();
        if !(price > 0.0 && price.is_finite()) {
            return Err(Error::Domain(format!("emission price must be positive, got {price}")));
        }
        Ok(Self {
            econ,
            w1: weights.w1,
            w2: weights.w2,
            price,
        })
    }

    fn c1(&self) -> f64 {
        let e = &self.econ;
        consumption_for_price(self.w1 * (e.a_bar - 1.0), self.price * e.eta_k, e.sigma1)
    }

    fn c2_for(&self, y: f64) -> f64 {
        let e = &self.econ;
        consumption_for_price(self.w2 * y, self.price * e.eta_k, e.sigma2)
    }

    pub fn gp(&self) -> Result<Solved> {
        let e = &self.econ;
        let y = e.a_bar - 1.0;
        let c1 = self.c1();
        let c2 = self.c2_for(y);
        let b1 = b1_level(e);
        let (rb, bracket) = rb_argmax(e, y)?;
        let b2 = b2_level(e, rb, y);
        let k1 = (c1 + c2 + b1 + b2 + rb) / y;
        let residual = if rb > 0.0 {
            (dq_dr(e, rb, abatement_value(e, rb, y)) - e.eta_k / y).abs()
        } else {
            0.0
        };
        Ok(Solved {
            allocation: Allocation {
                c1,
                c2,
                b1,
                b2,
                k1,
                k2: 0.0,
                ra: 0.0,
                rb,
            },
            diagnostics: Diagnostics {
                rb_bracket: bracket,
                ra_bracket: None,
                foc_residual: residual,
                iterations: 1,
            },
        })
    }

    fn y_of(&self, ra: f64) -> f64 {
        self.econ.a_bar * self.econ.h.value(ra) - 1.0
    }

    /// Value of country-2 consumption net of its input cost, per unit price.
    fn consumption_value(&self, y: f64) -> f64 {
        let e = &self.econ;
        let c = self.c2_for(y);
        if e.sigma2 == 1.0 {
            self.w2 * ((self.w2 * y / (self.price * e.eta_k)).ln() - 1.0) / self.price
        } else {
            self.w2 * e.sigma2 / (1.0 - e.sigma2) * c.powf(1.0 - e.sigma2) / self.price
        }
    }

    /// Restricted planner's reduced objective in the transfers.
    pub fn rp_value(&self, ra: f64, rb: f64) -> f64 {
        let e = &self.econ;
        let y = self.y_of(ra);
        self.consumption_value(y) + abatement_value(e, rb, y) - e.eta_k * (ra + rb) / (e.a_bar - 1.0)
    }

    /// Gradient of [`rp_value`](Self::rp_value).
    pub fn rp_gradient(&self, ra: f64, rb: f64) -> [f64; 2] {
        let e = &self.econ;
        let y = self.y_of(ra);
        let q = abatement_value(e, rb, y);
        let cost = e.eta_k / (e.a_bar - 1.0);
        let dy = e.a_bar * e.h.deriv(ra) * (e.eta_k * self.c2_for(y) / (y * y) + dq_dy(e, y, q));
        [dy - cost, dq_dr(e, rb, q) - cost]
    }

    /// Beyond this production transfer the reduced objective is decreasing.
    fn ra_upper_bound(&self) -> f64 {
        let e = &self.econ;
        let y_min = e.a_bar * e.h.at_zero - 1.0;
        let y_max = e.a_bar * e.h.at_infinity - 1.0;
        let c_max = self.c2_for(y_max);
        let th = e.theta2;
        let q_max = (1.0 - th)
            * th.powf(th / (1.0 - th))
            * (e.eta_b * e.g.at_infinity).powf(1.0 / (1.0 - th))
            * (y_max / e.eta_k).powf(th / (1.0 - th));
        let bound = e.eta_k * c_max / (y_min * y_min) + th / (1.0 - th) * q_max / y_min;
        let dh = e.h.at_infinity - e.h.at_zero;
        let r = (e.a_bar * dh * bound * (e.a_bar - 1.0) / e.eta_k).sqrt() - 1.0;
        r.max(1.0) * 1.01
    }

    pub fn rp(&self) -> Result<Solved> {
        let e = &self.econ;
        let rb_star = |ra: f64| rb_argmax(e, self.y_of(ra));
        let profile = |ra: f64| -> Result<(f64, f64, f64)> {
            let (rb, _) = rb_star(ra)?;
            Ok((self.rp_value(ra, rb), self.rp_gradient(ra, rb)[0], rb))
        };

        const N: usize = 64;
        let hi = self.ra_upper_bound();
        let xs: Vec<f64> = (0..=N).map(|j| hi * (j as f64 / N as f64).powi(2)).collect();
        let vals = xs.iter().map(|&x| profile(x)).collect::<Result<Vec<_>>>()?;

        // Refine every local maximum of the scan.
        let mut best: Option<(f64, f64, f64)> = None;
        let mut iterations = 0;
        for j in 0..=N {
            let left = if j == 0 { f64::NEG_INFINITY } else { vals[j - 1].0 };
            let right = if j == N { f64::NEG_INFINITY } else { vals[j + 1].0 };
            if !(vals[j].0 >= left && vals[j].0 >= right) {
                continue;
            }
            let lo = if j == 0 { 0.0 } else { xs[j - 1] };
            let up = if j == N { xs[N] } else { xs[j + 1] };
            let ra = if j == 0 && vals[0].1 <= 0.0 {
                0.0
            } else {
                let d = |x: f64| profile(x).map(|p| p.1).unwrap_or(f64::NAN);
                if d(lo) > 0.0 && d(up) < 0.0 {
                    iterations += 1;
                    bisect(d, lo, up, 0.0)?
                } else {
                    xs[j]
                }
            };
            let (v, _, rb) = profile(ra)?;
            let better = match best {
                None => true,
                Some((bv, bra, _)) => {
                    let tol = 1e-14 * (1.0 + bv.abs());
                    v > bv + tol || ((v - bv).abs() <= tol && ra < bra)
                }
            };
            if better {
                best = Some((v, ra, rb));
            }
        }
        let (_, ra, rb) = best.ok_or_else(|| Error::NotConverged("transfer scan found no maximum".into()))?;

        let y = self.y_of(ra);
        let c1 = self.c1();
        let c2 = self.c2_for(y);
        let b1 = b1_level(e);
        let b2 = b2_level(e, rb, y);
        let k1 = (c1 + b1 + ra + rb) / (e.a_bar - 1.0);
        let k2 = (c2 + b2) / y;
        let grad = self.rp_gradient(ra, rb);
        let residual = [(ra, grad[0]), (rb, grad[1])]
            .iter()
            .map(|(x, g)| if *x > 0.0 { g.abs() } else { g.max(0.0) })
            .fold(0.0, f64::max);
        let (_, bracket) = rb_star(ra)?;
        Ok(Solved {
            allocation: Allocation {
                c1,
                c2,
                b1,
                b2,
                k1,
                k2,
                ra,
                rb,
            },
            diagnostics: Diagnostics {
                rb_bracket: bracket,
                ra_bracket: Some((0.0, hi)),
                foc_residual: residual,
                iterations,
            },
        })
    }
}

/// Equilibrium of the temporary game with emission prices `p1`, `p2`.
pub fn nash_allocation(e: &EconParams, p1: f64, p2: f64) -> Result<Solved> {
    if !(p1 > 0.0 && p2 > 0.0) {
        return Err(Error::Domain(format!(
            "emission prices must be positive, got ({p1}, {p2})"
        )));
    }
    let y1 = e.a_bar - 1.0;
    let y2 = e.a_bar * e.h.value(0.0) - 1.0;
    let c1 = consumption_for_price(y1, p1 * e.eta_k, e.sigma1);
    let c2 = consumption_for_price(y2, p2 * e.eta_k, e.sigma2);
    let b1 = b1_level(e);
    let (rb, bracket) = rb_argmax(e, y2)?;
    let b2 = b2_level(e, rb, y2);
    let residual = if rb > 0.0 {
        (dq_dr(e, rb, abatement_value(e, rb, y2)) - e.eta_k / y1).abs()
    } else {
        0.0
    };
    Ok(Solved {
        allocation: Allocation {
            c1,
            c2,
            b1,
            b2,
            k1: (c1 + b1 + rb) / y1,
            k2: (c2 + b2) / y2,
            ra: 0.0,
            rb,
        },
        diagnostics: Diagnostics {
            rb_bracket: bracket,
            ra_bracket: None,
            foc_residual: residual,
            iterations: 1,
        },
    })
}

pub fn gp_closed_form(econ: &EconParams, phi: f64) -> Result<Allocation> {
    Ok(PlannerProblem::new(*econ, &TemporaryWeights::equal(econ, phi))?.gp()?.allocation)
}

pub fn rp_closed_form(econ: &EconParams, phi: f64) -> Result<Allocation> {
    Ok(PlannerProblem::new(*econ, &TemporaryWeights::equal(econ, phi))?.rp()?.allocation)
}

pub fn nash_closed_form(econ: &EconParams, phi: f64) -> Result<Allocation> {
    Ok(nash_allocation(econ, econ.gamma1 * phi, econ.gamma2 * phi)?.allocation)
}

/// Planner's temporary objective at an arbitrary allocation.
pub fn planner_temporary_value(econ: &EconParams, w: &TemporaryWeights, a: &Allocation) -> f64 {
    w.w1 * utility(a.c1, econ.sigma1) + w.w2 * utility(a.c2, econ.sigma2)
        - w.price() * crate::climate::emissions(a, econ).total
}
