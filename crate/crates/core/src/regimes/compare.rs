use serde::Serialize;

use super::solution::{solve_regime, RegimeSolution};
use crate::climate::{ClimateParams, EconParams, Regime};
use crate::error::{Error, Result};
use crate::itm::TimeGrid;

/// Relative tolerance for the orderings that are equalities.
pub const EQUALITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Relation {
    #[serde(rename = "==")]
    Equal,
    #[serde(rename = "<")]
    Less,
    #[serde(rename = "<=")]
    LessOrEqual,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderingCheck {
    pub name: String,
    pub relation: Relation,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs - lhs` for inequalities, `-|lhs - rhs|` for equalities.
    pub margin: f64,
    pub holds: bool,
    pub conditional: bool,
}

impl OrderingCheck {
    fn new(name: &str, lhs: f64, relation: Relation, rhs: f64, conditional: bool) -> Self {
        let scale = lhs.abs().max(rhs.abs()).max(1.0);
        let (margin, holds) = match relation {
            Relation::Equal => {
                let d = (lhs - rhs).abs();
                (-d, d <= EQUALITY_TOL * scale)
            }
            Relation::Less => (rhs - lhs, lhs < rhs),
            Relation::LessOrEqual => (rhs - lhs, lhs <= rhs + EQUALITY_TOL * scale),
        };
        Self {
            name: name.to_string(),
            relation,
            lhs,
            rhs,
            margin,
            holds,
            conditional,
        }
    }
}

/// The condition under which the South consumes more and the world emits
/// less under the restricted planner than in the game.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Precondition {
    /// `1 - h(0)`
    pub lhs: f64,
    /// `((Ā - 1)/Ā) γ1/(γ1 + γ2)`
    pub rhs: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub orderings: Vec<OrderingCheck>,
    pub precondition: Precondition,
    /// Set when the parameters are outside the domain of the comparison.
    pub domain_violation: Option<String>,
}

impl ComparisonReport {
    pub fn all_unconditional_hold(&self) -> bool {
        self.domain_violation.is_none() && self.orderings.iter().filter(|o| !o.conditional).all(|o| o.holds)
    }

    pub fn failures(&self) -> impl Iterator<Item = &OrderingCheck> {
        self.orderings.iter().filter(|o| !o.holds)
    }
}

fn precondition(e: &EconParams) -> Precondition {
    let lhs = 1.0 - e.h.value(0.0);
    let rhs = (e.a_bar - 1.0) / e.a_bar * e.gamma1 / (e.gamma1 + e.gamma2);
    Precondition {
        lhs,
        rhs,
        holds: lhs < rhs,
    }
}

/// Solve all three regimes and check how their transfers, consumption,
/// abatement, welfare and emissions are ordered.
pub fn compare_regimes(econ: &EconParams, climate: &ClimateParams, grid: &TimeGrid) -> Result<ComparisonReport> {
    if !econ.is_log() {
        return Err(Error::Precondition(
            "regime orderings are established only for logarithmic utility (sigma1 = sigma2 = 1)".into(),
        ));
    }
    if !econ.equal_discounting() {
        return Err(Error::Precondition("regime orderings assume a common discount rate".into()));
    }
    let pre = precondition(econ);
    if !(econ.gamma1 > 0.0 && econ.gamma2 > 0.0) {
        return Ok(ComparisonReport {
            orderings: Vec::new(),
            precondition: pre,
            domain_violation: Some(format!(
                "damage parameters must be positive, got ({}, {})",
                econ.gamma1, econ.gamma2
            )),
        });
    }
    let gp = solve_regime(Regime::GlobalPlanner, econ, climate, grid)?;
    let rp = solve_regime(Regime::RestrictedPlanner, econ, climate, grid)?;
    let nash = solve_regime(Regime::Nash, econ, climate, grid)?;
    Ok(ComparisonReport {
        orderings: orderings(&gp, &rp, &nash, pre.holds),
        precondition: pre,
        domain_violation: None,
    })
}

fn orderings(gp: &RegimeSolution, rp: &RegimeSolution, n: &RegimeSolution, conditional: bool) -> Vec<OrderingCheck> {
    use Relation::*;
    let (g, r, x) = (&gp.allocations[0], &rp.allocations[0], &n.allocations[0]);
    let (gg, gr, gn) = (gp.emissions[0].total, rp.emissions[0].total, n.emissions[0].total);
    let mut out = vec![
        OrderingCheck::new("Ra_GP == 0", g.ra, Equal, 0.0, false),
        OrderingCheck::new("Ra_N == 0", x.ra, Equal, 0.0, false),
        OrderingCheck::new("Ra_N <= Ra_RP", x.ra, LessOrEqual, r.ra, false),
        OrderingCheck::new("Rb_N <= Rb_RP", x.rb, LessOrEqual, r.rb, false),
        OrderingCheck::new("Rb_RP <= Rb_GP", r.rb, LessOrEqual, g.rb, false),
        OrderingCheck::new("C1_GP == C1_RP", g.c1, Equal, r.c1, false),
        OrderingCheck::new("C1_RP < C1_N", r.c1, Less, x.c1, false),
        OrderingCheck::new("B1_GP == B1_RP", g.b1, Equal, r.b1, false),
        OrderingCheck::new("B1_RP == B1_N", r.b1, Equal, x.b1, false),
        OrderingCheck::new("C2_RP < C2_GP", r.c2, Less, g.c2, false),
        OrderingCheck::new("B2_N <= B2_RP", x.b2, LessOrEqual, r.b2, false),
        OrderingCheck::new("B2_RP < B2_GP", r.b2, Less, g.b2, false),
        OrderingCheck::new("U_RP < U_GP", rp.u, Less, gp.u, false),
        OrderingCheck::new("U_N < U_RP", n.u, Less, rp.u, false),
        OrderingCheck::new("U1_RP < U1_GP", rp.u1, Less, gp.u1, false),
        OrderingCheck::new("U2_RP < U2_GP", rp.u2, Less, gp.u2, false),
        OrderingCheck::new("G_GP <= G_RP", gg, LessOrEqual, gr, false),
    ];
    if conditional {
        out.push(OrderingCheck::new("C2_RP < C2_N", r.c2, Less, x.c2, true));
        out.push(OrderingCheck::new("G_RP <= G_N", gr, LessOrEqual, gn, true));
    }
    out
}
