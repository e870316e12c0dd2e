//! Temporary Nash equilibria: at each time, a fixed point of the players'
//! best responses to each other's current controls.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::grid::{ControlPath, TimeGrid};
use super::objective::DiscountedLinearObjective;
use super::shadow::{shadow_weight, ShadowWeight};
use super::system::LinearStateSystem;
use crate::error::{Error, Result};
use crate::optim::{projected_newton_max, NewtonOptions};
use crate::par;

/// One player: the joint-control indices it chooses and its own objective.
#[derive(Clone, Debug)]
pub struct GamePlayer {
    pub controls: Vec<usize>,
    pub objective: DiscountedLinearObjective,
}

/// A game sharing one linear state equation, with per-player shadow weights.
#[derive(Clone, Debug)]
pub struct TemporaryGame {
    pub system: LinearStateSystem,
    pub players: Vec<GamePlayer>,
    shadows: Vec<ShadowWeight>,
}

impl TemporaryGame {
    pub fn new(system: LinearStateSystem, players: Vec<GamePlayer>) -> Result<Self> {
        if players.is_empty() {
            return Err(Error::Precondition("a game needs at least one player".into()));
        }
        let m = system.dim_control();
        let mut owner = vec![false; m];
        for p in &players {
            for &i in &p.controls {
                if i >= m || owner[i] {
                    return Err(Error::Precondition(format!(
                        "control index {i} is out of range or claimed twice"
                    )));
                }
                owner[i] = true;
            }
        }
        let shadows = players
            .iter()
            .map(|p| shadow_weight(&system, &p.objective))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            system,
            players,
            shadows,
        })
    }

    pub fn shadow(&self, player: usize) -> &ShadowWeight {
        &self.shadows[player]
    }

    /// Player `i`'s temporary payoff `⟨b_i(t), f(t,u)⟩ + h_i(t,u)`.
    pub fn temporary_payoff(&self, player: usize, t: f64, u: &[f64]) -> Result<f64> {
        let b = self.shadows[player].at(t)?;
        Ok(b.dot(&self.system.forcing(t, u)) + self.players[player].objective.payoff(t, u))
    }

    fn is_autonomous(&self) -> bool {
        self.system.is_autonomous()
            && self
                .players
                .iter()
                .zip(&self.shadows)
                .all(|(p, s)| p.objective.is_autonomous() && s.is_constant())
    }
}

/// Returns player `i`'s block (in the order of its `controls`).
pub type BestResponse<'s> = dyn Fn(&TemporaryGame, usize, f64, &[f64]) -> Result<Vec<f64>> + Sync + 's;
pub type ClosedForm<'s> = dyn Fn(f64) -> Result<DVector<f64>> + Sync + 's;

#[derive(Debug, Clone)]
pub struct NashOptions {
    /// Converged when the scaled sup-norm change of a sweep is below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Anderson mixing depth; 0 gives plain best-response iteration.
    pub anderson_depth: usize,
    /// Step factor applied after an update changes sign.
    pub damping: f64,
    /// Joint controls are projected onto `u >= lower` after mixing.
    pub lower: Option<Vec<f64>>,
    pub reuse_autonomous: bool,
}

impl Default for NashOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 200,
            anderson_depth: 3,
            damping: 0.5,
            lower: None,
            reuse_autonomous: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NashPoint {
    pub u: DVector<f64>,
    pub iterations: usize,
    pub last_change: f64,
}

#[derive(Debug, Clone)]
pub struct NashPath {
    pub path: ControlPath,
    pub iterations: Vec<usize>,
}

fn sweep(game: &TemporaryGame, br: &BestResponse, t: f64, u: &DVector<f64>) -> Result<DVector<f64>> {
    let mut next = u.clone();
    for (i, p) in game.players.iter().enumerate() {
        let block = br(game, i, t, next.as_slice())?;
        if block.len() != p.controls.len() {
            return Err(Error::numeric("best response has the wrong block size"));
        }
        for (&j, v) in p.controls.iter().zip(block) {
            next[j] = v;
        }
    }
    Ok(next)
}

fn scaled_change(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1.0))
        .fold(0.0, f64::max)
}

/// Best-response iteration at a single time, Gauss-Seidel over players.
pub fn nash_at(
    game: &TemporaryGame,
    t: f64,
    u0: &DVector<f64>,
    br: &BestResponse,
    opts: &NashOptions,
) -> Result<NashPoint> {
    let mut u = u0.clone();
    let mut hist_u: Vec<DVector<f64>> = Vec::new();
    let mut hist_g: Vec<DVector<f64>> = Vec::new();
    let mut prev_r: Option<DVector<f64>> = None;
    let mut last_change = f64::INFINITY;
    for it in 1..=opts.max_iter {
        let g = sweep(game, br, t, &u)?;
        let r = &g - &u;
        last_change = scaled_change(&g, &u);
        if !last_change.is_finite() {
            return Err(Error::numeric(format!("best responses diverged at t = {t}")));
        }
        if last_change < opts.tol {
            return Ok(NashPoint {
                u: g,
                iterations: it,
                last_change,
            });
        }
        hist_u.push(u.clone());
        hist_g.push(g.clone());
        if hist_u.len() > opts.anderson_depth + 1 {
            hist_u.remove(0);
            hist_g.remove(0);
        }

        let mut next = if opts.anderson_depth > 0 && hist_u.len() >= 2 {
            anderson(&hist_u, &hist_g).unwrap_or_else(|| g.clone())
        } else {
            match &prev_r {
                Some(pr) if pr.iter().zip(r.iter()).any(|(a, b)| a * b < 0.0) => &u + &r * opts.damping,
                _ => g.clone(),
            }
        };
        if let Some(lower) = &opts.lower {
            for (x, l) in next.iter_mut().zip(lower) {
                if *x < *l {
                    *x = *l;
                }
            }
        }
        if next.iter().any(|v| !v.is_finite()) {
            next = g;
        }
        prev_r = Some(r);
        u = next;
    }
    Err(Error::EquilibriumNotFound {
        t,
        iterations: opts.max_iter,
        last_change,
        last_iterate: u.iter().copied().collect(),
    })
}

/// Type-II Anderson mixing over the stored iterates.
fn anderson(us: &[DVector<f64>], gs: &[DVector<f64>]) -> Option<DVector<f64>> {
    let m = us.len() - 1;
    let n = us[0].len();
    let res: Vec<DVector<f64>> = us.iter().zip(gs).map(|(u, g)| g - u).collect();
    let rk = &res[m];
    let mut dr = DMatrix::<f64>::zeros(n, m);
    let mut dg = DMatrix::<f64>::zeros(n, m);
    for j in 0..m {
        dr.set_column(j, &(&res[j + 1] - &res[j]));
        dg.set_column(j, &(&gs[j + 1] - &gs[j]));
    }
    // Scale each row so components of very different size weigh equally.
    let scale: Vec<f64> = (0..n).map(|i| 1.0 / gs[m][i].abs().max(1.0)).collect();
    let mut drs = dr.clone();
    let mut rks = rk.clone();
    for i in 0..n {
        for j in 0..m {
            drs[(i, j)] *= scale[i];
        }
        rks[i] *= scale[i];
    }
    let svd = drs.svd(true, true);
    let gamma = svd.solve(&rks, 1e-13).ok()?;
    let out = &gs[m] - dg * gamma;
    out.iter().all(|v| v.is_finite()).then_some(out)
}

/// Solve the temporary game along the grid. A supplied closed form is used
/// directly instead of iterating.
pub fn temporary_nash(
    game: &TemporaryGame,
    grid: &TimeGrid,
    u0: &DVector<f64>,
    br: &BestResponse,
    closed_form: Option<&ClosedForm>,
    opts: &NashOptions,
) -> Result<NashPath> {
    if let Some(cf) = closed_form {
        let values = par::map_indexed(grid.n_points(), |k| cf(grid.time(k)).map_err(|e| e.at_time(grid.time(k))))
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        return Ok(NashPath {
            path: ControlPath::new(*grid, values)?,
            iterations: vec![0; grid.n_points()],
        });
    }
    if opts.reuse_autonomous && game.is_autonomous() {
        let p = nash_at(game, grid.t_start(), u0, br, opts)?;
        return Ok(NashPath {
            path: ControlPath::constant(*grid, p.u),
            iterations: vec![p.iterations; grid.n_points()],
        });
    }
    let points = par::map_indexed(grid.n_points(), |k| nash_at(game, grid.time(k), u0, br, opts))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let iterations = points.iter().map(|p| p.iterations).collect();
    let values = points.into_iter().map(|p| p.u).collect();
    Ok(NashPath {
        path: ControlPath::new(*grid, values)?,
        iterations,
    })
}

/// Numeric best response: projected Newton on the player's block over
/// `block >= lower`, starting from the current profile.
pub fn newton_best_response(lower: Vec<f64>) -> Arc<BestResponse<'static>> {
    Arc::new(move |game: &TemporaryGame, i: usize, t: f64, profile: &[f64]| {
        let idx = &game.players[i].controls;
        let b = game.shadow(i).at(t)?;
        let base = profile.to_vec();
        let lo: Vec<f64> = idx.iter().map(|&j| lower[j]).collect();
        let x0: Vec<f64> = idx.iter().map(|&j| profile[j]).collect();
        let obj = |x: &[f64]| {
            let mut u = base.clone();
            for (&j, v) in idx.iter().zip(x) {
                u[j] = *v;
            }
            b.dot(&game.system.forcing(t, &u)) + game.players[i].objective.payoff(t, &u)
        };
        let r = projected_newton_max(obj, &x0, &lo, &NewtonOptions::default());
        Ok(r.x)
    })
}
