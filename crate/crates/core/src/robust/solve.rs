use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::climate::{emissions, phi_constant, utility, Allocation, ClimateParams, EconParams, Regime};
use crate::error::{Error, Result};
use crate::optim::safeguarded_newton;
use crate::regimes::{
    b1_level, gp_closed_form, nash_closed_form, rb_argmax, rp_closed_form, PlannerProblem, TemporaryWeights,
};

/// Weight of the quadratic penalty on damage-parameter deviations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Alpha {
    Finite(f64),
    /// No ambiguity: the benchmark damages are taken at face value.
    Infinite,
}

impl Alpha {
    pub fn new(value: f64) -> Result<Self> {
        if value == f64::INFINITY {
            Ok(Alpha::Infinite)
        } else if value > 0.0 && value.is_finite() {
            Ok(Alpha::Finite(value))
        } else {
            Err(Error::Domain(format!("alpha must be > 0 or inf, got {value}")))
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Alpha::Finite(a) => a,
            Alpha::Infinite => f64::INFINITY,
        }
    }
}

impl fmt::Display for Alpha {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Alpha::Finite(a) => write!(f, "{a}"),
            Alpha::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for Alpha {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("inf") || t.eq_ignore_ascii_case("infinity") {
            return Ok(Alpha::Infinite);
        }
        let v: f64 = t
            .parse()
            .map_err(|_| Error::Domain(format!("alpha must be a positive number or \"inf\", got {s:?}")))?;
        Alpha::new(v)
    }
}

impl Serialize for Alpha {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Alpha::Finite(a) => s.serialize_f64(*a),
            Alpha::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Alpha {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Alpha::new(v),
            Raw::Text(s) => s.parse(),
        }
        .map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobustParams {
    pub alpha: Alpha,
    pub gamma1_hat: f64,
    pub gamma2_hat: f64,
}

impl RobustParams {
    pub fn new(alpha: Alpha, gamma1_hat: f64, gamma2_hat: f64) -> Result<Self> {
        let p = Self {
            alpha,
            gamma1_hat,
            gamma2_hat,
        };
        p.validate()?;
        Ok(p)
    }

    /// Benchmarks taken from the damage parameters of `econ`.
    pub fn from_econ(alpha: Alpha, econ: &EconParams) -> Result<Self> {
        Self::new(alpha, econ.gamma1, econ.gamma2)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma1_hat > 0.0 && self.gamma2_hat > 0.0 && self.gamma1_hat.is_finite() && self.gamma2_hat.is_finite())
        {
            return Err(Error::Domain(format!(
                "benchmark damage parameters must be strictly positive, got ({}, {})",
                self.gamma1_hat, self.gamma2_hat
            )));
        }
        Alpha::new(self.alpha.value()).map(|_| ())
    }

    fn hat_sum(&self) -> f64 {
        self.gamma1_hat + self.gamma2_hat
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RobustSolution {
    pub gamma1: f64,
    pub gamma2: f64,
    pub allocation: Allocation,
    /// Largest absolute first-order residual of the damage parameters.
    pub residual: f64,
    pub iterations: usize,
}

/// Shared setup: log utility, common discounting, valid inputs.
struct Setup {
    econ: EconParams,
    rho: f64,
    phi: f64,
    /// `S̄/ρ - P0/ρ - T0/(ρ+φ)`
    initial: f64,
}

fn setup(robust: &RobustParams, econ: &EconParams, climate: &ClimateParams) -> Result<Setup> {
    robust.validate()?;
    climate.validate()?;
    let e = econ.with_gammas(robust.gamma1_hat, robust.gamma2_hat);
    e.validate()?;
    if !e.is_log() {
        return Err(Error::Precondition(
            "robust regimes are solved for logarithmic utility only (sigma1 = sigma2 = 1)".into(),
        ));
    }
    if !e.equal_discounting() {
        return Err(Error::Precondition("robust regimes assume a common discount rate".into()));
    }
    let rho = e.rho1;
    Ok(Setup {
        econ: e,
        rho,
        phi: phi_constant(rho, climate),
        initial: climate.s_bar / rho - climate.p0 / rho - climate.t0 / (rho + climate.phi),
    })
}

/// Emissions net of the consumption-driven part, at the global planner's
/// abatement choices (which do not depend on the damage parameters).
fn gp_abatement_emissions(e: &EconParams) -> Result<f64> {
    let y = e.a_bar - 1.0;
    let b1 = b1_level(e);
    let (rb, _) = rb_argmax(e, y)?;
    let b2 = crate::regimes::b2_level(e, rb, y);
    Ok(e.eta_k * (rb + b1 + b2) / y - e.eta_b * (b1.powf(e.theta1) + e.g.value(rb) * b2.powf(e.theta2)))
}

/// The aggregate that fixes the planner's worst-case damages:
/// `S̄/ρ - P0/ρ - T0/(ρ+φ) - (Φ/ρ) [η_K (Rb + B1 + B2)/(Ā-1) - η_B (B1^θ1 + g(Rb) B2^θ2)]`.
pub fn gamma1_aggregate(robust: &RobustParams, econ: &EconParams, climate: &ClimateParams) -> Result<f64> {
    let s = setup(robust, econ, climate)?;
    Ok(s.initial - s.phi / s.rho * gp_abatement_emissions(&s.econ)?)
}

/// First-order conditions of the planner's adversary at `(γ1, γ2)`.
pub fn robust_gp_foc(
    robust: &RobustParams,
    econ: &EconParams,
    climate: &ClimateParams,
    gamma1: f64,
    gamma2: f64,
) -> Result<[f64; 2]> {
    let s = setup(robust, econ, climate)?;
    let big = s.initial - s.phi / s.rho * gp_abatement_emissions(&s.econ)?;
    let alpha = robust.alpha.value();
    let common = -2.0 / (s.rho * (gamma1 + gamma2)) + big;
    Ok([
        common + 2.0 * alpha / s.rho * (gamma1 - robust.gamma1_hat),
        common + 2.0 * alpha / s.rho * (gamma2 - robust.gamma2_hat),
    ])
}

fn finish(
    regime: Regime,
    e: &EconParams,
    phi: f64,
    gamma1: f64,
    gamma2: f64,
    residual: f64,
    iterations: usize,
) -> Result<RobustSolution> {
    if !(gamma1 + gamma2 > 0.0) {
        return Err(Error::numeric(format!(
            "worst-case damages sum to {} (must be positive)",
            gamma1 + gamma2
        )));
    }
    let at = e.with_gammas(gamma1, gamma2);
    let allocation = match regime {
        Regime::GlobalPlanner => gp_closed_form(&at, phi)?,
        Regime::RestrictedPlanner => rp_closed_form(&at, phi)?,
        Regime::Nash => nash_closed_form(&at, phi)?,
    };
    Ok(RobustSolution {
        gamma1,
        gamma2,
        allocation,
        residual,
        iterations,
    })
}

/// Global planner facing an adversary that picks constant damages.
pub fn robust_gp(robust: &RobustParams, econ: &EconParams, climate: &ClimateParams) -> Result<RobustSolution> {
    let s = setup(robust, econ, climate)?;
    let (g1h, g2h) = (robust.gamma1_hat, robust.gamma2_hat);
    let Alpha::Finite(alpha) = robust.alpha else {
        return finish(Regime::GlobalPlanner, &s.econ, s.phi, g1h, g2h, 0.0, 0);
    };
    let big = s.initial - s.phi / s.rho * gp_abatement_emissions(&s.econ)?;
    let b = s.rho * big - alpha * robust.hat_sum();
    let root = (b * b + 8.0 * alpha).sqrt();
    let gamma1 = (alpha * (3.0 * g1h - g2h) - s.rho * big + root) / (4.0 * alpha);
    let gamma2 = (alpha * (3.0 * g2h - g1h) - s.rho * big + root) / (4.0 * alpha);
    let foc = robust_gp_foc(robust, econ, climate, gamma1, gamma2)?;
    finish(
        Regime::GlobalPlanner,
        &s.econ,
        s.phi,
        gamma1,
        gamma2,
        foc[0].abs().max(foc[1].abs()),
        1,
    )
}

/// Restricted planner's temporary value `u1 + u2 - sΦ G` and emissions at
/// total damage `s`.
fn rp_inner(e: &EconParams, phi: f64, s: f64) -> Result<(f64, f64, Allocation)> {
    let w = TemporaryWeights {
        w1: 1.0,
        w2: 1.0,
        p1: 0.5 * s * phi,
        p2: 0.5 * s * phi,
    };
    let a = PlannerProblem::new(*e, &w)?.rp()?.allocation;
    let g = emissions(&a, e).total;
    Ok((utility(a.c1, 1.0) + utility(a.c2, 1.0) - s * phi * g, g, a))
}

/// Outer objective of the restricted planner's adversary:
/// `(γ1+γ2) I0 + (α/ρ) Σ (γ_i - γ̂_i)² + max_u [u1 + u2 - (γ1+γ2) Φ G]/ρ`,
/// with `I0 = S̄/ρ - P0/ρ - T0/(ρ+φ)`.
pub fn robust_rp_objective(
    robust: &RobustParams,
    econ: &EconParams,
    climate: &ClimateParams,
    gamma1: f64,
    gamma2: f64,
) -> Result<f64> {
    let st = setup(robust, econ, climate)?;
    let s = gamma1 + gamma2;
    if !(s > 0.0) {
        return Ok(f64::INFINITY);
    }
    let (m, _, _) = rp_inner(&st.econ, st.phi, s)?;
    let penalty = match robust.alpha {
        Alpha::Finite(a) => {
            a / st.rho * ((gamma1 - robust.gamma1_hat).powi(2) + (gamma2 - robust.gamma2_hat).powi(2))
        }
        Alpha::Infinite if gamma1 == robust.gamma1_hat && gamma2 == robust.gamma2_hat => 0.0,
        Alpha::Infinite => f64::INFINITY,
    };
    Ok(s * st.initial + penalty + m / st.rho)
}

/// Restricted planner facing the adversary.
///
/// At a fixed total `s = γ1 + γ2` the penalty is smallest when the deviation
/// is split equally, so the outer problem is one-dimensional and convex in
/// `s`; its derivative `I0 + (α/ρ)(s - ŝ) - Φ G*(s)/ρ` is solved by
/// safeguarded Newton.
pub fn robust_rp(robust: &RobustParams, econ: &EconParams, climate: &ClimateParams) -> Result<RobustSolution> {
    let st = setup(robust, econ, climate)?;
    let (g1h, g2h) = (robust.gamma1_hat, robust.gamma2_hat);
    let Alpha::Finite(alpha) = robust.alpha else {
        return finish(Regime::RestrictedPlanner, &st.econ, st.phi, g1h, g2h, 0.0, 0);
    };
    let hat = robust.hat_sum();
    let slope = |s: f64| -> f64 {
        match rp_inner(&st.econ, st.phi, s) {
            Ok((_, g, _)) => st.initial + alpha / st.rho * (s - hat) - st.phi * g / st.rho,
            Err(_) => f64::NAN,
        }
    };
    let mut lo = hat;
    let mut hi = hat;
    let mut found = false;
    for _ in 0..200 {
        if slope(lo) < 0.0 {
            found = true;
            break;
        }
        hi = lo;
        lo *= 0.5;
    }
    if found && !(slope(hi) > 0.0) {
        found = false;
        for _ in 0..200 {
            hi *= 2.0;
            if slope(hi) > 0.0 {
                found = true;
                break;
            }
        }
    }
    if !found {
        return Err(Error::NotConverged(
            "could not bracket the worst-case damage of the restricted planner".into(),
        ));
    }
    let evaluations = std::cell::Cell::new(0usize);
    let s = safeguarded_newton(
        |s| {
            evaluations.set(evaluations.get() + 1);
            let h = 1e-6 * s;
            (slope(s), (slope(s + h) - slope(s - h)) / (2.0 * h))
        },
        lo,
        hi,
        0.5 * (lo + hi),
        1e-14,
    )?;
    let d = 0.5 * (s - hat);
    finish(
        Regime::RestrictedPlanner,
        &st.econ,
        st.phi,
        g1h + d,
        g2h + d,
        slope(s).abs(),
        evaluations.get(),
    )
}

/// Emissions of the game when country `i` prices damage at `γ_i`.
fn nash_emissions(e: &EconParams, phi: f64, gamma1: f64, gamma2: f64) -> Result<f64> {
    let a = nash_closed_form(&e.with_gammas(gamma1, gamma2), phi)?;
    Ok(emissions(&a, e).total)
}

/// First-order conditions of the two adversaries in the game:
/// `I0 + (2α/ρ)(γ_i - γ̂_i) - Φ G(γ1, γ2)/ρ`.
pub fn robust_nash_foc(
    robust: &RobustParams,
    econ: &EconParams,
    climate: &ClimateParams,
    gamma1: f64,
    gamma2: f64,
) -> Result<[f64; 2]> {
    let st = setup(robust, econ, climate)?;
    nash_foc(&st, robust, gamma1, gamma2)
}

fn nash_foc(st: &Setup, robust: &RobustParams, gamma1: f64, gamma2: f64) -> Result<[f64; 2]> {
    let alpha = robust.alpha.value();
    let base = st.initial - st.phi * nash_emissions(&st.econ, st.phi, gamma1, gamma2)? / st.rho;
    Ok([
        base + 2.0 * alpha / st.rho * (gamma1 - robust.gamma1_hat),
        base + 2.0 * alpha / st.rho * (gamma2 - robust.gamma2_hat),
    ])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NashSolveOptions {
    pub tol: f64,
    pub sweeps: usize,
    pub newton_iter: usize,
    pub damping: f64,
}

impl Default for NashSolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            sweeps: 50,
            newton_iter: 100,
            damping: 0.5,
        }
    }
}

/// Each country faces its own adversary; the adversaries' conditions are
/// coupled through total emissions.
pub fn robust_nash(robust: &RobustParams, econ: &EconParams, climate: &ClimateParams) -> Result<RobustSolution> {
    robust_nash_from(robust, econ, climate, [robust.gamma1_hat, robust.gamma2_hat], &NashSolveOptions::default())
}

/// [`robust_nash`] started from an arbitrary positive guess.
pub fn robust_nash_from(
    robust: &RobustParams,
    econ: &EconParams,
    climate: &ClimateParams,
    start: [f64; 2],
    opts: &NashSolveOptions,
) -> Result<RobustSolution> {
    let st = setup(robust, econ, climate)?;
    let Alpha::Finite(alpha) = robust.alpha else {
        return finish(Regime::Nash, &st.econ, st.phi, robust.gamma1_hat, robust.gamma2_hat, 0.0, 0);
    };
    if !(start[0] > 0.0 && start[1] > 0.0) {
        return Err(Error::Domain("starting damages must be positive".into()));
    }
    let foc = |g: [f64; 2]| nash_foc(&st, robust, g[0], g[1]);
    let norm = |f: [f64; 2]| f[0].abs().max(f[1].abs());
    let mut g = start;
    let mut f = foc(g)?;
    let mut iterations = 0;

    // Gauss-Seidel: each condition is increasing in its own damage parameter
    // (slope 2α/ρ + 1/(ρ γ_i²)), so every scalar solve is bracketed on (0, γ_max].
    let mut prev_step = [0.0; 2];
    for _ in 0..opts.sweeps {
        if norm(f) < opts.tol {
            break;
        }
        iterations += 1;
        for i in 0..2 {
            let scalar = |x: f64| -> f64 {
                let mut h = g;
                h[i] = x;
                foc(h).map(|v| v[i]).unwrap_or(f64::NAN)
            };
            let mut hi = g[i].max(1e-3);
            while scalar(hi) < 0.0 && hi < 1e12 {
                hi *= 2.0;
            }
            let mut lo = g[i].min(hi) * 0.5;
            while scalar(lo) > 0.0 && lo > 1e-300 {
                lo *= 0.5;
            }
            let x = safeguarded_newton(
                |x| {
                    let d = 2.0 * alpha / st.rho + 1.0 / (st.rho * x * x);
                    (scalar(x), d)
                },
                lo,
                hi,
                g[i].clamp(lo, hi),
                1e-15,
            )?;
            let step = x - g[i];
            // Halve the step when it reverses direction.
            let step = if step * prev_step[i] < 0.0 { opts.damping * step } else { step };
            prev_step[i] = step;
            g[i] += step;
        }
        f = foc(g)?;
    }

    // Newton on the coupled system; the sweeps contract slowly when the
    // damages are small.
    for _ in 0..opts.newton_iter {
        if norm(f) < opts.tol {
            break;
        }
        iterations += 1;
        let mut jac = [[0.0; 2]; 2];
        for j in 0..2 {
            let h = 1e-6 * g[j];
            let mut gp = g;
            gp[j] += h;
            let mut gm = g;
            gm[j] -= h;
            let (fp, fm) = (foc(gp)?, foc(gm)?);
            for i in 0..2 {
                jac[i][j] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        if !(det.abs() > 0.0 && det.is_finite()) {
            break;
        }
        let dx = [
            -(jac[1][1] * f[0] - jac[0][1] * f[1]) / det,
            -(-jac[1][0] * f[0] + jac[0][0] * f[1]) / det,
        ];
        let mut t = 1.0;
        let mut improved = false;
        for _ in 0..60 {
            let cand = [g[0] + t * dx[0], g[1] + t * dx[1]];
            if cand[0] > 0.0 && cand[1] > 0.0 {
                let fc = foc(cand)?;
                if norm(fc) < norm(f) {
                    g = cand;
                    f = fc;
                    improved = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !improved {
            break;
        }
    }
    let residual = norm(f);
    if !(residual < 1e-8) {
        return Err(Error::NotConverged(format!(
            "worst-case damages of the game did not converge (residual {residual:e} at {g:?})"
        )));
    }
    finish(Regime::Nash, &st.econ, st.phi, g[0], g[1], residual, iterations)
}

/// Robust solution of any regime.
pub fn robust_solve(
    regime: Regime,
    robust: &RobustParams,
    econ: &EconParams,
    climate: &ClimateParams,
) -> Result<RobustSolution> {
    match regime {
        Regime::GlobalPlanner => robust_gp(robust, econ, climate),
        Regime::RestrictedPlanner => robust_rp(robust, econ, climate),
        Regime::Nash => robust_nash(robust, econ, climate),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base(alpha: f64) -> (RobustParams, EconParams, ClimateParams) {
        let e = EconParams::default();
        (
            RobustParams::from_econ(Alpha::new(alpha).unwrap(), &e).unwrap(),
            e,
            ClimateParams::default(),
        )
    }

    #[test]
    fn alpha_parsing() {
        assert_eq!("inf".parse::<Alpha>().unwrap(), Alpha::Infinite);
        assert_eq!("2".parse::<Alpha>().unwrap(), Alpha::Finite(2.0));
        assert!("0".parse::<Alpha>().is_err());
        assert!("-1".parse::<Alpha>().is_err());
        let a: Alpha = serde_json::from_str("\"inf\"").unwrap();
        assert_eq!(a, Alpha::Infinite);
        assert_eq!(serde_json::to_string(&Alpha::Finite(0.5)).unwrap(), "0.5");
    }

    #[test]
    fn gp_roots_solve_first_order_conditions() {
        let (r, e, c) = base(1.0);
        let s = robust_gp(&r, &e, &c).unwrap();
        assert!(s.residual < 1e-10, "{}", s.residual);
        assert_eq!(s.gamma1, s.gamma2);
        assert!(s.gamma1 + s.gamma2 > 0.0);
    }

    #[test]
    fn infinite_alpha_is_the_plain_model() {
        let (r, e, c) = base(f64::INFINITY);
        let phi = phi_constant(e.rho1, &c);
        for (regime, cf) in [
            (Regime::GlobalPlanner, gp_closed_form(&e, phi).unwrap()),
            (Regime::RestrictedPlanner, rp_closed_form(&e, phi).unwrap()),
            (Regime::Nash, nash_closed_form(&e, phi).unwrap()),
        ] {
            let s = robust_solve(regime, &r, &e, &c).unwrap();
            assert_eq!(s.allocation, cf);
            assert_eq!((s.gamma1, s.gamma2), (e.gamma1, e.gamma2));
        }
    }

    #[test]
    fn rp_minimizer_beats_benchmark() {
        let (r, e, c) = base(1.0);
        let s = robust_rp(&r, &e, &c).unwrap();
        let at_min = robust_rp_objective(&r, &e, &c, s.gamma1, s.gamma2).unwrap();
        let at_hat = robust_rp_objective(&r, &e, &c, e.gamma1, e.gamma2).unwrap();
        assert!(at_min <= at_hat);
        assert!(s.residual < 1e-8, "{}", s.residual);
    }

    #[test]
    fn nash_reduces_to_common_shift() {
        // Emissions separate as 1/(γ1Φ) + 1/(γ2Φ) + const, so both conditions
        // share the shift d = γ_i - γ̂_i, the root of a monotone scalar equation.
        let (r, e, c) = base(1.0);
        let s = robust_nash(&r, &e, &c).unwrap();
        let phi = phi_constant(e.rho1, &c);
        let g_hat = nash_emissions(&e, phi, e.gamma1, e.gamma2).unwrap();
        let rest = g_hat - 1.0 / (e.gamma1 * phi) - 1.0 / (e.gamma2 * phi);
        let rho = e.rho1;
        let i0 = c.s_bar / rho - c.p0 / rho - c.t0 / (rho + c.phi);
        let eq = |d: f64| {
            rho * i0 - phi * rest - 1.0 / (e.gamma1 + d) - 1.0 / (e.gamma2 + d) + 2.0 * d
        };
        let d = crate::optim::bisect(eq, -e.gamma1.min(e.gamma2) * (1.0 - 1e-12), 100.0, 0.0).unwrap();
        assert!((s.gamma1 - (e.gamma1 + d)).abs() < 1e-9, "{} vs {}", s.gamma1, e.gamma1 + d);
        assert!((s.gamma1 - s.gamma2).abs() < 1e-10);
    }
}
