use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use super::solve::{robust_solve, Alpha, RobustParams, RobustSolution};
use crate::climate::{ClimateParams, EconParams, Regime};
use crate::error::{Error, Result};
use crate::itm::TimeGrid;
use crate::par;
use crate::regimes::{build_solution, solve_regime, Diagnostics, RegimeSolution, SolutionTag};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobustRun {
    pub alpha: Alpha,
    pub robust: RobustSolution,
    pub solution: RegimeSolution,
}

fn tag(regime: Regime) -> SolutionTag {
    match regime {
        Regime::GlobalPlanner => SolutionTag::Gp,
        Regime::RestrictedPlanner => SolutionTag::Rp,
        Regime::Nash => SolutionTag::Nash,
    }
}

/// Solve the robust regime and evaluate its path under the worst-case damages.
pub fn robust_run(
    regime: Regime,
    robust: &RobustParams,
    econ: &EconParams,
    climate: &ClimateParams,
    grid: &TimeGrid,
) -> Result<RobustRun> {
    let r = robust_solve(regime, robust, econ, climate)?;
    let solution = if robust.alpha == Alpha::Infinite {
        solve_regime(regime, &econ.with_gammas(r.gamma1, r.gamma2), climate, grid)?
    } else {
        // Welfare is reported under the worst-case damages; a negative worst
        // case for one country is kept out of parameter validation.
        let at = econ.with_gammas(r.gamma1, r.gamma2);
        build_solution(
            tag(regime),
            grid,
            vec![r.allocation; grid.n_points()],
            vec![Diagnostics {
                foc_residual: r.residual,
                iterations: r.iterations,
                ..Diagnostics::default()
            }],
            &at,
            climate,
        )?
    };
    Ok(RobustRun {
        alpha: robust.alpha,
        robust: r,
        solution,
    })
}

/// Solve the robust regime for each penalty weight. Failures are returned
/// per entry.
pub fn alpha_sweep(
    regime: Regime,
    gamma_hat: (f64, f64),
    alphas: &[Alpha],
    econ: &EconParams,
    climate: &ClimateParams,
    grid: &TimeGrid,
) -> Vec<Result<RobustRun>> {
    par::map_indexed(alphas.len(), |i| {
        let r = RobustParams::new(alphas[i], gamma_hat.0, gamma_hat.1)?;
        robust_run(regime, &r, econ, climate, grid)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DrawResponse {
    /// The adversary reacts to each drawn benchmark.
    #[default]
    Robust,
    /// Decisions are taken at the drawn damages themselves.
    Naive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomizationSpec {
    pub n_draws: usize,
    pub seed: u64,
    /// Lower and upper percentiles, in percent.
    pub percentiles: (f64, f64),
    pub response: DrawResponse,
}

impl RandomizationSpec {
    pub fn new(n_draws: usize, seed: u64) -> Self {
        Self {
            n_draws,
            seed,
            percentiles: (2.5, 97.5),
            response: DrawResponse::Robust,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_draws < 2 {
            return Err(Error::Domain(format!("n_draws must be at least 2, got {}", self.n_draws)));
        }
        let (lo, hi) = self.percentiles;
        if !(lo > 0.0 && hi < 100.0 && lo < hi) {
            return Err(Error::Domain(format!(
                "percentiles must satisfy 0 < lower < upper < 100, got ({lo}, {hi})"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Bands {
    pub times: Vec<f64>,
    pub lower: Vec<f64>,
    pub median: Vec<f64>,
    pub upper: Vec<f64>,
    pub n_ok: usize,
    pub n_failed: usize,
    /// Drawn benchmark damages in draw order.
    pub draws: Vec<(f64, f64)>,
}

/// Linear-interpolation percentile of sorted data.
pub fn percentile(sorted: &[f64], pct: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = pct / 100.0 * (n - 1) as f64;
    let k = (pos.floor() as usize).min(n - 2);
    let frac = pos - k as f64;
    sorted[k] + frac * (sorted[k + 1] - sorted[k])
}

/// Draw both benchmark damages from exponential distributions with the given
/// means and record the temperature path of the regime for each draw.
///
/// Draw `i` uses its own stream of a seeded generator, so results do not
/// depend on scheduling. Failed draws are dropped; more than 5% failures is
/// an error.
pub fn randomized_bands(
    regime: Regime,
    spec: &RandomizationSpec,
    alpha: Alpha,
    gamma_hat: (f64, f64),
    econ: &EconParams,
    climate: &ClimateParams,
    grid: &TimeGrid,
) -> Result<Bands> {
    spec.validate()?;
    RobustParams::new(alpha, gamma_hat.0, gamma_hat.1)?;
    let e1 = Exp::new(1.0 / gamma_hat.0).map_err(|e| Error::Domain(e.to_string()))?;
    let e2 = Exp::new(1.0 / gamma_hat.1).map_err(|e| Error::Domain(e.to_string()))?;
    let draws: Vec<(f64, f64)> = (0..spec.n_draws)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(i as u64);
            (e1.sample(&mut rng), e2.sample(&mut rng))
        })
        .collect();
    let paths = par::map_indexed(spec.n_draws, |i| -> Result<Vec<f64>> {
        let (g1, g2) = draws[i];
        let run = match spec.response {
            DrawResponse::Robust => {
                robust_run(regime, &RobustParams::new(alpha, g1, g2)?, econ, climate, grid)?.solution
            }
            DrawResponse::Naive => solve_regime(regime, &econ.with_gammas(g1, g2), climate, grid)?,
        };
        Ok(run.temperature)
    });
    let mut ok: Vec<Vec<f64>> = Vec::with_capacity(paths.len());
    let mut failed = 0;
    for p in paths {
        match p {
            Ok(v) => ok.push(v),
            Err(e) => {
                log::debug!("draw discarded: {e}");
                failed += 1;
            }
        }
    }
    if failed * 20 > spec.n_draws || ok.is_empty() {
        return Err(Error::NotConverged(format!(
            "{failed} of {} draws failed (more than 5%)",
            spec.n_draws
        )));
    }
    let n = grid.n_points();
    let mut lower = Vec::with_capacity(n);
    let mut median = Vec::with_capacity(n);
    let mut upper = Vec::with_capacity(n);
    let mut col = vec![0.0; ok.len()];
    for k in 0..n {
        for (c, p) in col.iter_mut().zip(&ok) {
            *c = p[k];
        }
        col.sort_by(f64::total_cmp);
        lower.push(percentile(&col, spec.percentiles.0));
        median.push(percentile(&col, 50.0));
        upper.push(percentile(&col, spec.percentiles.1));
    }
    Ok(Bands {
        times: grid.times(),
        lower,
        median,
        upper,
        n_ok: ok.len(),
        n_failed: failed,
        draws,
    })
}
