//! Generic machinery for discounted problems that are linear in the state.
//!
//! Writing the state through the variation-of-constants formula and swapping
//! the order of integration turns the objective into
//! `⟨b(0), x0⟩ + ∫ e^{-ρt} [⟨b(t), f(t,u)⟩ + h(t,u)] dt`, so the control can be
//! optimized pointwise in time.

mod evaluate;
mod fubini;
mod grid;
mod nash;
mod objective;
mod shadow;
mod solve;
mod system;

pub use evaluate::{
    evaluate_original, evaluate_original_with, evaluate_transformed, evaluate_transformed_with, integrate_state,
};
pub use fubini::{fubini_check, relative_gap, ControlSampler, FubiniReport};
pub use grid::{ControlPath, StatePath, TimeGrid};
pub use nash::{
    nash_at, newton_best_response, temporary_nash, BestResponse, ClosedForm, GamePlayer, NashOptions, NashPath,
    NashPoint, TemporaryGame,
};
pub use objective::{DiscountedLinearObjective, PayoffFn, StateWeight, VectorFn};
pub use shadow::{shadow_weight, shadow_weight_with, ShadowOptions, ShadowWeight};
pub use solve::{box_newton_solver, pointwise_solve, pointwise_solve_with, InnerSolver, PointwiseOptions, TemporaryProblem};
pub use system::{evolution_operator, ControlMap, Dynamics, LinearStateSystem, MatrixFn};

