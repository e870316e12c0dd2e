use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::evaluate::{evaluate_original_with, evaluate_transformed_with};
use super::grid::{ControlPath, TimeGrid};
use super::objective::DiscountedLinearObjective;
use super::shadow::shadow_weight;
use super::system::LinearStateSystem;
use crate::error::Result;
use crate::par;

/// Draws one admissible control for the cell starting at `t`.
pub type ControlSampler<'s> = dyn Fn(&mut ChaCha8Rng, f64) -> DVector<f64> + Sync + 's;

#[derive(Debug, Clone, Serialize)]
pub struct FubiniReport {
    pub n_samples: usize,
    pub max_relative_error: f64,
    pub mean_relative_error: f64,
    pub max_absolute_error: f64,
}

/// Relative discrepancy used throughout: `|x - y| / max(1, |x|, |y|)`.
pub fn relative_gap(x: f64, y: f64) -> f64 {
    (x - y).abs() / x.abs().max(y.abs()).max(1.0)
}

/// Compare the original and transformed objective on random piecewise-constant
/// paths. Sample `i` uses its own generator seeded from `(seed, i)`, so the
/// report does not depend on scheduling.
pub fn fubini_check(
    system: &LinearStateSystem,
    objective: &DiscountedLinearObjective,
    grid: &TimeGrid,
    sampler: &ControlSampler,
    n_samples: usize,
    seed: u64,
) -> Result<FubiniReport> {
    let shadow = shadow_weight(system, objective)?;
    let gaps = par::map_indexed(n_samples, |i| -> Result<(f64, f64)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let values = grid.times().into_iter().map(|t| sampler(&mut rng, t)).collect();
        let path = ControlPath::new(*grid, values)?;
        let o = evaluate_original_with(system, objective, &shadow, &path)?;
        let t = evaluate_transformed_with(system, objective, &shadow, &path)?;
        Ok((relative_gap(o, t), (o - t).abs()))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let max_rel = gaps.iter().map(|g| g.0).fold(0.0, f64::max);
    let max_abs = gaps.iter().map(|g| g.1).fold(0.0, f64::max);
    let mean = if gaps.is_empty() {
        0.0
    } else {
        gaps.iter().map(|g| g.0).sum::<f64>() / gaps.len() as f64
    };
    Ok(FubiniReport {
        n_samples,
        max_relative_error: max_rel,
        mean_relative_error: mean,
        max_absolute_error: max_abs,
    })
}
