//! The shadow weight `b(t) = ∫₀^∞ e^{-ρτ} Φ(t+τ, t)ᵀ a(t+τ) dτ`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::objective::{DiscountedLinearObjective, StateWeight};
use super::system::{Dynamics, LinearStateSystem};
use crate::error::{Error, Result};
use crate::quad;

/// Decay lengths (in units of `1 / (ρ - abscissa)`) covered by quadrature.
const DECAY_LENGTHS: f64 = 40.0;

#[derive(Clone)]
enum Repr {
    Constant(DVector<f64>),
    Lazy(Arc<dyn Fn(f64) -> Result<DVector<f64>> + Send + Sync>),
    Tabulated {
        step: f64,
        values: Arc<Vec<DVector<f64>>>,
        slopes: Arc<Vec<DVector<f64>>>,
    },
}

#[derive(Clone)]
pub struct ShadowWeight {
    repr: Repr,
    closed_form: bool,
}

impl fmt::Debug for ShadowWeight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.repr {
            Repr::Constant(b) => write!(f, "ShadowWeight::Constant({b:?}, closed_form = {})", self.closed_form),
            Repr::Lazy(_) => write!(f, "ShadowWeight::Quadrature"),
            Repr::Tabulated { values, .. } => write!(f, "ShadowWeight::Tabulated({} nodes)", values.len()),
        }
    }
}

impl ShadowWeight {
    pub fn constant(b: DVector<f64>) -> Self {
        Self {
            repr: Repr::Constant(b),
            closed_form: false,
        }
    }

    pub fn at(&self, t: f64) -> Result<DVector<f64>> {
        match &self.repr {
            Repr::Constant(b) => Ok(b.clone()),
            Repr::Lazy(f) => f(t),
            Repr::Tabulated { step, values, slopes } => {
                let x = t / step;
                let k = x.floor() as usize;
                if t < 0.0 || k + 1 >= values.len() {
                    return Err(Error::Domain(format!(
                        "shadow weight requested at t = {t}, outside its tabulated range"
                    )));
                }
                // Cubic Hermite between nodes.
                let s = x - k as f64;
                let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
                let h10 = s * (1.0 - s) * (1.0 - s);
                let h01 = s * s * (3.0 - 2.0 * s);
                let h11 = s * s * (s - 1.0);
                Ok(&values[k] * h00
                    + &slopes[k] * (h10 * step)
                    + &values[k + 1] * h01
                    + &slopes[k + 1] * (h11 * step))
            }
        }
    }

    /// True when `b` is constant in time.
    pub fn is_constant(&self) -> bool {
        matches!(self.repr, Repr::Constant(_))
    }

    /// True when the componentwise formula `a_i / (ρ - A_ii)` was used.
    pub fn closed_form_flag(&self) -> bool {
        self.closed_form
    }
}

#[derive(Debug, Clone)]
pub struct ShadowOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Tabulation horizon for time-varying `A`; defaults to `100 / ρ`.
    pub horizon: Option<f64>,
    pub ode_step: f64,
}

impl Default for ShadowOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-14,
            rel_tol: 1e-12,
            horizon: None,
            ode_step: 2e-3,
        }
    }
}

pub fn shadow_weight(system: &LinearStateSystem, objective: &DiscountedLinearObjective) -> Result<ShadowWeight> {
    shadow_weight_with(system, objective, &ShadowOptions::default())
}

pub fn shadow_weight_with(
    system: &LinearStateSystem,
    objective: &DiscountedLinearObjective,
    opts: &ShadowOptions,
) -> Result<ShadowWeight> {
    let rho = objective.discount_rate;
    let n = system.dim_state();
    if let StateWeight::Constant(a) = &objective.state_weight {
        if a.len() != n {
            return Err(Error::Precondition("state weight has wrong dimension".into()));
        }
        if a.iter().all(|v| *v == 0.0) {
            return Ok(ShadowWeight::constant(DVector::zeros(n)));
        }
    }

    match system.dynamics() {
        Dynamics::Constant(amat) => {
            let abscissa = system.spectral_abscissa().unwrap_or(f64::INFINITY);
            if !(rho > abscissa) {
                return Err(Error::IllPosed(format!(
                    "discount rate {rho} does not exceed the spectral abscissa {abscissa} of A"
                )));
            }
            let diag = system.constant_diagonal();
            match (&objective.state_weight, diag) {
                (StateWeight::Constant(a), Some(d)) => {
                    let b = DVector::from_iterator(n, (0..n).map(|i| a[i] / (rho - d[i])));
                    Ok(ShadowWeight {
                        repr: Repr::Constant(b),
                        closed_form: true,
                    })
                }
                (StateWeight::Constant(a), None) => {
                    let m = DMatrix::identity(n, n) * rho - amat.transpose();
                    let b = m
                        .lu()
                        .solve(a)
                        .ok_or_else(|| Error::IllPosed("ρI - Aᵀ is singular".into()))?;
                    Ok(ShadowWeight::constant(b))
                }
                (StateWeight::TimeVarying(af), diag) => {
                    let len = DECAY_LENGTHS / (rho - abscissa);
                    let at = amat.transpose();
                    let af = af.clone();
                    let (abs_tol, rel_tol) = (opts.abs_tol, opts.rel_tol);
                    let kernel = move |tau: f64| -> DMatrix<f64> {
                        match &diag {
                            Some(d) => DMatrix::from_diagonal(&d.map(|v| ((v - rho) * tau).exp())),
                            None => (&at * tau).exp() * (-rho * tau).exp(),
                        }
                    };
                    let f = move |t: f64| -> Result<DVector<f64>> {
                        let integrand = |tau: f64| kernel(tau) * af(t + tau);
                        let main = quad::integrate(integrand, 0.0, len, abs_tol, rel_tol)?;
                        let tail = quad::integrate(integrand, len, 2.0 * len, abs_tol, 1e-6)?;
                        let scale = 1.0 + main.value.amax();
                        if tail.value.amax() > 1e-10 * scale {
                            return Err(Error::IllPosed(format!(
                                "shadow-weight integral is not converging at t = {t}"
                            )));
                        }
                        Ok(main.value + tail.value)
                    };
                    // Probe once so divergence is reported at construction.
                    f(0.0)?;
                    Ok(ShadowWeight {
                        repr: Repr::Lazy(Arc::new(f)),
                        closed_form: false,
                    })
                }
            }
        }
        Dynamics::TimeVarying(amat_fn) => tabulate_backward(amat_fn.clone(), objective, opts, n),
    }
}

/// Backward RK4 for `b' = ρ b - A(t)ᵀ b - a(t)` started from zero far out.
fn tabulate_backward(
    amat: super::system::MatrixFn,
    objective: &DiscountedLinearObjective,
    opts: &ShadowOptions,
    n: usize,
) -> Result<ShadowWeight> {
    let rho = objective.discount_rate;
    let horizon = opts.horizon.unwrap_or(100.0 / rho);
    let len = DECAY_LENGTHS / rho;
    let h = opts.ode_step;
    let total = ((horizon + len) / h).ceil() as usize;
    let keep = (horizon / h).ceil() as usize + 2;
    let weight = objective.state_weight.clone();
    let rhs = |t: f64, b: &DVector<f64>| -> DVector<f64> { b * rho - amat(t).transpose() * b - weight.at(t) };
    let mut b = DVector::zeros(n);
    let mut values = vec![DVector::zeros(n); keep];
    let mut slopes = vec![DVector::zeros(n); keep];
    for k in (0..total).rev() {
        let t1 = (k + 1) as f64 * h;
        // Step from t1 down to t1 - h.
        let k1 = rhs(t1, &b);
        let k2 = rhs(t1 - 0.5 * h, &(&b - &k1 * (0.5 * h)));
        let k3 = rhs(t1 - 0.5 * h, &(&b - &k2 * (0.5 * h)));
        let k4 = rhs(t1 - h, &(&b - &k3 * h));
        b -= (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        if b.iter().any(|v| !v.is_finite()) || b.amax() > 1e100 {
            return Err(Error::IllPosed(
                "shadow weight diverges; discount rate too small for these dynamics".into(),
            ));
        }
        if k < keep {
            slopes[k] = rhs(k as f64 * h, &b);
            values[k] = b.clone();
        }
    }
    Ok(ShadowWeight {
        repr: Repr::Tabulated {
            step: h,
            values: Arc::new(values),
            slopes: Arc::new(slopes),
        },
        closed_form: false,
    })
}
