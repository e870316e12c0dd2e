use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;

use crate::error::{Error, Result};

pub type VectorFn = Arc<dyn Fn(f64) -> DVector<f64> + Send + Sync>;
pub type PayoffFn = Arc<dyn Fn(f64, &[f64]) -> f64 + Send + Sync>;

/// The state weight `a(t)` of the running payoff `⟨a(t), x⟩ + h(t, u)`.
#[derive(Clone)]
pub enum StateWeight {
    Constant(DVector<f64>),
    TimeVarying(VectorFn),
}

impl StateWeight {
    pub fn at(&self, t: f64) -> DVector<f64> {
        match self {
            StateWeight::Constant(a) => a.clone(),
            StateWeight::TimeVarying(f) => f(t),
        }
    }
}

impl fmt::Debug for StateWeight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateWeight::Constant(a) => write!(f, "Constant({a:?})"),
            StateWeight::TimeVarying(_) => write!(f, "TimeVarying(..)"),
        }
    }
}

/// `J(u) = ∫₀^∞ e^{-ρt} [⟨a(t), x(t)⟩ + h(t, u(t))] dt`.
#[derive(Clone)]
pub struct DiscountedLinearObjective {
    pub state_weight: StateWeight,
    pub control_payoff: PayoffFn,
    pub discount_rate: f64,
    payoff_time_invariant: bool,
}

impl fmt::Debug for DiscountedLinearObjective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DiscountedLinearObjective")
            .field("state_weight", &self.state_weight)
            .field("discount_rate", &self.discount_rate)
            .finish()
    }
}

impl DiscountedLinearObjective {
    pub fn new(state_weight: StateWeight, control_payoff: PayoffFn, discount_rate: f64) -> Result<Self> {
        if !(discount_rate > 0.0 && discount_rate.is_finite()) {
            return Err(Error::Precondition("discount rate must be > 0".into()));
        }
        Ok(Self {
            state_weight,
            control_payoff,
            discount_rate,
            payoff_time_invariant: false,
        })
    }

    /// Declare that `h(t, u)` does not depend on `t`.
    pub fn with_time_invariant_payoff(mut self) -> Self {
        self.payoff_time_invariant = true;
        self
    }

    pub fn is_autonomous(&self) -> bool {
        self.payoff_time_invariant && matches!(self.state_weight, StateWeight::Constant(_))
    }

    pub fn payoff(&self, t: f64, u: &[f64]) -> f64 {
        (self.control_payoff)(t, u)
    }
}
