use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform time grid `t_start = t_0 < … < t_{n-1} = t_end`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    t_start: f64,
    t_end: f64,
    n_points: usize,
}

impl TimeGrid {
    pub fn new(t_start: f64, t_end: f64, n_points: usize) -> Result<Self> {
        if !(t_start >= 0.0 && t_end > t_start && t_end.is_finite()) {
            return Err(Error::Precondition(format!(
                "time grid needs 0 <= t_start < t_end, got [{t_start}, {t_end}]"
            )));
        }
        if n_points < 2 {
            return Err(Error::Precondition("time grid needs at least 2 points".into()));
        }
        Ok(Self {
            t_start,
            t_end,
            n_points,
        })
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }
    pub fn t_end(&self) -> f64 {
        self.t_end
    }
    pub fn n_points(&self) -> usize {
        self.n_points
    }
    pub fn n_cells(&self) -> usize {
        self.n_points - 1
    }
    pub fn dt(&self) -> f64 {
        (self.t_end - self.t_start) / self.n_cells() as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        if k + 1 == self.n_points {
            self.t_end
        } else {
            self.t_start + k as f64 * self.dt()
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.n_points).map(|k| self.time(k)).collect()
    }

    /// Index of the cell `[t_k, t_{k+1})` containing `t` (clamped to the grid).
    pub fn cell_of(&self, t: f64) -> usize {
        if t <= self.t_start {
            return 0;
        }
        let k = ((t - self.t_start) / self.dt()).floor() as usize;
        k.min(self.n_points - 1)
    }

    /// `e^{-ρ t_end}`, the relative weight of everything beyond the grid.
    pub fn tail_bound(&self, rho: f64) -> f64 {
        (-rho * self.t_end).exp()
    }
}

/// Controls held constant on each cell `[t_k, t_{k+1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlPath {
    pub grid: TimeGrid,
    pub values: Vec<DVector<f64>>,
}

impl ControlPath {
    pub fn new(grid: TimeGrid, values: Vec<DVector<f64>>) -> Result<Self> {
        if values.len() != grid.n_points() {
            return Err(Error::Precondition(format!(
                "control path has {} values for {} grid points",
                values.len(),
                grid.n_points()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: TimeGrid, u: DVector<f64>) -> Self {
        Self {
            grid,
            values: vec![u; grid.n_points()],
        }
    }

    pub fn value_at(&self, t: f64) -> &DVector<f64> {
        &self.values[self.grid.cell_of(t)]
    }

    /// Largest componentwise deviation from the first grid value.
    pub fn max_variation(&self) -> f64 {
        let first = &self.values[0];
        self.values
            .iter()
            .map(|v| (v - first).amax())
            .fold(0.0, f64::max)
    }
}

/// States at grid points, linearly interpolated in between.
#[derive(Debug, Clone, PartialEq)]
pub struct StatePath {
    pub grid: TimeGrid,
    pub values: Vec<DVector<f64>>,
}

impl StatePath {
    pub fn value_at(&self, t: f64) -> DVector<f64> {
        let k = self.grid.cell_of(t);
        if k + 1 >= self.values.len() {
            return self.values[self.values.len() - 1].clone();
        }
        let (t0, t1) = (self.grid.time(k), self.grid.time(k + 1));
        let s = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
        &self.values[k] * (1.0 - s) + &self.values[k + 1] * s
    }

    pub fn last(&self) -> &DVector<f64> {
        &self.values[self.values.len() - 1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_basics() {
        let g = TimeGrid::new(0.0, 50.0, 512).unwrap();
        assert_eq!(g.time(0), 0.0);
        assert_eq!(g.time(511), 50.0);
        assert_eq!(g.cell_of(50.0), 511);
        assert_eq!(g.cell_of(g.time(3) + 1e-9), 3);
        assert!(TimeGrid::new(1.0, 1.0, 5).is_err());
        assert!(TimeGrid::new(0.0, 1.0, 1).is_err());
    }

    #[test]
    fn state_interpolation() {
        let g = TimeGrid::new(0.0, 2.0, 3).unwrap();
        let p = StatePath {
            grid: g,
            values: vec![DVector::from_vec(vec![0.0]), DVector::from_vec(vec![2.0]), DVector::from_vec(vec![2.0])],
        };
        assert_eq!(p.value_at(0.5)[0], 1.0);
        assert_eq!(p.value_at(1.5)[0], 2.0);
    }
}
