use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type MatrixFn = Arc<dyn Fn(f64) -> DMatrix<f64> + Send + Sync>;
pub type ControlMap = Arc<dyn Fn(f64, &[f64]) -> DVector<f64> + Send + Sync>;

/// The state matrix `A` of `x' = A(t) x + f(t, u)`.
#[derive(Clone)]
pub enum Dynamics {
    Constant(DMatrix<f64>),
    TimeVarying(MatrixFn),
}

impl fmt::Debug for Dynamics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Dynamics::Constant(m) => write!(f, "Constant({m:?})"),
            Dynamics::TimeVarying(_) => write!(f, "TimeVarying(..)"),
        }
    }
}

/// Linear-in-state controlled system `x' = A(t) x + f(t, u)`, `x(0) = x0`.
#[derive(Clone)]
pub struct LinearStateSystem {
    dim_state: usize,
    dim_control: usize,
    dynamics: Dynamics,
    control_map: ControlMap,
    initial_state: DVector<f64>,
    linear_growth_bound: f64,
    forcing_time_invariant: bool,
}

impl fmt::Debug for LinearStateSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LinearStateSystem")
            .field("dim_state", &self.dim_state)
            .field("dim_control", &self.dim_control)
            .field("dynamics", &self.dynamics)
            .field("initial_state", &self.initial_state)
            .finish()
    }
}

impl LinearStateSystem {
    pub fn new(
        dynamics: Dynamics,
        dim_control: usize,
        control_map: ControlMap,
        initial_state: DVector<f64>,
        linear_growth_bound: f64,
    ) -> Result<Self> {
        let n = initial_state.len();
        if n == 0 || dim_control == 0 {
            return Err(Error::Precondition(
                "state and control dimensions must be at least 1".into(),
            ));
        }
        if let Dynamics::Constant(a) = &dynamics {
            if a.nrows() != n || a.ncols() != n {
                return Err(Error::Precondition(format!(
                    "dynamics matrix is {}x{}, state has dimension {n}",
                    a.nrows(),
                    a.ncols()
                )));
            }
            if a.iter().any(|v| !v.is_finite()) {
                return Err(Error::numeric("dynamics matrix has non-finite entries"));
            }
        }
        if !(linear_growth_bound > 0.0) {
            return Err(Error::Precondition("linear growth bound must be > 0".into()));
        }
        Ok(Self {
            dim_state: n,
            dim_control,
            dynamics,
            control_map,
            initial_state,
            linear_growth_bound,
            forcing_time_invariant: false,
        })
    }

    /// Declare that `f(t, u)` does not depend on `t`.
    pub fn with_time_invariant_forcing(mut self) -> Self {
        self.forcing_time_invariant = true;
        self
    }

    pub fn with_initial_state(mut self, x0: DVector<f64>) -> Result<Self> {
        if x0.len() != self.dim_state {
            return Err(Error::Precondition("initial state has wrong dimension".into()));
        }
        self.initial_state = x0;
        Ok(self)
    }

    pub fn dim_state(&self) -> usize {
        self.dim_state
    }
    pub fn dim_control(&self) -> usize {
        self.dim_control
    }
    pub fn dynamics(&self) -> &Dynamics {
        &self.dynamics
    }
    pub fn initial_state(&self) -> &DVector<f64> {
        &self.initial_state
    }
    pub fn linear_growth_bound(&self) -> f64 {
        self.linear_growth_bound
    }

    pub fn forcing(&self, t: f64, u: &[f64]) -> DVector<f64> {
        (self.control_map)(t, u)
    }

    pub fn matrix_at(&self, t: f64) -> DMatrix<f64> {
        match &self.dynamics {
            Dynamics::Constant(a) => a.clone(),
            Dynamics::TimeVarying(f) => f(t),
        }
    }

    /// True when both `A` and `f` are independent of time.
    pub fn is_autonomous(&self) -> bool {
        matches!(self.dynamics, Dynamics::Constant(_)) && self.forcing_time_invariant
    }

    /// Diagonal of `A` when it is constant and diagonal.
    pub fn constant_diagonal(&self) -> Option<DVector<f64>> {
        match &self.dynamics {
            Dynamics::Constant(a) => {
                let n = a.nrows();
                for i in 0..n {
                    for j in 0..n {
                        if i != j && a[(i, j)] != 0.0 {
                            return None;
                        }
                    }
                }
                Some(a.diagonal())
            }
            Dynamics::TimeVarying(_) => None,
        }
    }

    /// Largest real part of the eigenvalues of a constant `A`.
    pub fn spectral_abscissa(&self) -> Option<f64> {
        match &self.dynamics {
            Dynamics::Constant(a) => {
                if let Some(d) = self.constant_diagonal() {
                    return Some(d.max());
                }
                let ev = a.complex_eigenvalues();
                Some(ev.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max))
            }
            Dynamics::TimeVarying(_) => None,
        }
    }
}

const RK4_STEP: f64 = 1e-2;

fn rk4_matrix(a: &MatrixFn, t: f64, s: f64) -> DMatrix<f64> {
    let n = a(s).nrows();
    let steps = (((t - s) / RK4_STEP).ceil() as usize).max(1);
    let h = (t - s) / steps as f64;
    let mut phi = DMatrix::<f64>::identity(n, n);
    let mut tau = s;
    for _ in 0..steps {
        let k1 = a(tau) * &phi;
        let k2 = a(tau + 0.5 * h) * (&phi + &k1 * (0.5 * h));
        let k3 = a(tau + 0.5 * h) * (&phi + &k2 * (0.5 * h));
        let k4 = a(tau + h) * (&phi + &k3 * h);
        phi += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        tau += h;
    }
    phi
}

/// The fundamental matrix `Φ(t, s)` with `∂Φ/∂t = A(t) Φ`, `Φ(s, s) = I`.
pub fn evolution_operator(system: &LinearStateSystem, t: f64, s: f64) -> Result<DMatrix<f64>> {
    if !(t >= s && s >= 0.0) {
        return Err(Error::Precondition(format!(
            "evolution operator needs t >= s >= 0, got t = {t}, s = {s}"
        )));
    }
    let n = system.dim_state();
    let phi = if t == s {
        DMatrix::identity(n, n)
    } else if let Some(d) = system.constant_diagonal() {
        DMatrix::from_diagonal(&d.map(|a| (a * (t - s)).exp()))
    } else {
        match &system.dynamics {
            Dynamics::Constant(a) => (a * (t - s)).exp(),
            Dynamics::TimeVarying(f) => rk4_matrix(f, t, s),
        }
    };
    if phi.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric(format!(
            "evolution operator overflowed on [{s}, {t}]"
        )));
    }
    Ok(phi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag_system(a: &[f64]) -> LinearStateSystem {
        let n = a.len();
        LinearStateSystem::new(
            Dynamics::Constant(DMatrix::from_diagonal(&DVector::from_column_slice(a))),
            1,
            Arc::new(move |_, _| DVector::zeros(n)),
            DVector::zeros(n),
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn identity_at_equal_times() {
        let s = diag_system(&[0.0, -0.5]);
        assert_eq!(evolution_operator(&s, 1.5, 1.5).unwrap(), DMatrix::identity(2, 2));
    }

    #[test]
    fn diagonal_exponential() {
        let s = diag_system(&[0.0, -0.5]);
        let phi = evolution_operator(&s, 2.0, 0.0).unwrap();
        assert_eq!(phi[(0, 0)], 1.0);
        assert!((phi[(1, 1)] - 0.367_879_441_171_442_3).abs() < 1e-15);
    }

    #[test]
    fn general_matrix_matches_series() {
        let a = DMatrix::from_row_slice(2, 2, &[-0.3, 0.2, 0.1, -0.7]);
        let s = LinearStateSystem::new(
            Dynamics::Constant(a.clone()),
            1,
            Arc::new(|_, _| DVector::zeros(2)),
            DVector::zeros(2),
            1.0,
        )
        .unwrap();
        let dt = 0.05;
        let phi = evolution_operator(&s, dt, 0.0).unwrap();
        let mut series = DMatrix::identity(2, 2);
        let mut term = DMatrix::identity(2, 2);
        for k in 1..20 {
            term = &term * &a * (dt / k as f64);
            series += &term;
        }
        assert!((phi - series).amax() < 1e-15);
    }

    #[test]
    fn time_varying_matches_constant() {
        let a = DMatrix::from_row_slice(2, 2, &[-0.3, 0.2, 0.1, -0.7]);
        let ac = a.clone();
        let tv = LinearStateSystem::new(
            Dynamics::TimeVarying(Arc::new(move |_| ac.clone())),
            1,
            Arc::new(|_, _| DVector::zeros(2)),
            DVector::zeros(2),
            1.0,
        )
        .unwrap();
        let phi = evolution_operator(&tv, 2.0, 0.5).unwrap();
        let exact = (a * 1.5).exp();
        assert!((phi - exact).amax() < 1e-10);
        assert!(tv.spectral_abscissa().is_none());
    }

    #[test]
    fn rejects_bad_dimensions() {
        let r = LinearStateSystem::new(
            Dynamics::Constant(DMatrix::identity(3, 3)),
            1,
            Arc::new(|_, _| DVector::zeros(2)),
            DVector::zeros(2),
            1.0,
        );
        assert!(r.is_err());
    }
}
