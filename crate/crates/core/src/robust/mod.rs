//! Robust versions of the regimes: an adversary picks constant damage
//! parameters, paying a quadratic penalty for deviating from the benchmarks.

mod bands;
mod solve;

pub use bands::{
    alpha_sweep, percentile, randomized_bands, robust_run, Bands, DrawResponse, RandomizationSpec, RobustRun,
};
pub use solve::{
    gamma1_aggregate, robust_gp, robust_gp_foc, robust_nash, robust_nash_foc, robust_nash_from, robust_rp,
    robust_rp_objective, robust_solve, Alpha, NashSolveOptions, RobustParams, RobustSolution,
};
