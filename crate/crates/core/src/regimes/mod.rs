//! Global planner, restricted planner and non-cooperative equilibrium of the
//! climate model.

mod closed_form;
mod compare;
mod game;
mod oracle;
mod solution;

pub use closed_form::{
    abatement_value, b1_level, b2_level, gp_closed_form, gp_rb_zero_threshold, nash_allocation, nash_closed_form,
    nash_rb_zero_threshold, planner_temporary_value, rb_argmax, rp_closed_form, Diagnostics, PlannerProblem, Solved,
    TemporaryWeights,
};
pub use compare::{compare_regimes, ComparisonReport, OrderingCheck, Precondition, Relation, EQUALITY_TOL};
pub use game::{analytic_best_response, climate_game, initial_profile, NORTH_CONTROLS, SOUTH_CONTROLS};
pub use oracle::temporary_oracle;
pub use solution::{build_solution, hetero_discount_path, solve_regime, RegimeSolution, SolutionDiagnostics, SolutionTag};
