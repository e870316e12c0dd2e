//! The two-country temporary game on the carbon-cycle system.

use std::sync::Arc;

use nalgebra::DVector;

use super::closed_form::{b1_level, b2_level};
use crate::climate::{
    climate_system, consumption_for_price, country_objective, Allocation, ClimateParams, Country, EconParams,
};
use crate::error::Result;
use crate::itm::{BestResponse, GamePlayer, TemporaryGame};

/// Country 1 owns `C1, B1, K1, Ra, Rb`, country 2 owns `C2, B2, K2`.
pub const NORTH_CONTROLS: [usize; 5] = [0, 2, 4, 6, 7];
pub const SOUTH_CONTROLS: [usize; 3] = [1, 3, 5];

pub fn climate_game(econ: &EconParams, climate: &ClimateParams) -> Result<TemporaryGame> {
    econ.validate()?;
    TemporaryGame::new(
        climate_system(climate, econ)?,
        vec![
            GamePlayer {
                controls: NORTH_CONTROLS.to_vec(),
                objective: country_objective(econ, Country::North)?,
            },
            GamePlayer {
                controls: SOUTH_CONTROLS.to_vec(),
                objective: country_objective(econ, Country::South)?,
            },
        ],
    )
}

/// Exact best responses of the two countries. The emission price of player
/// `i` is read off its shadow weight.
pub fn analytic_best_response(econ: &EconParams, climate: &ClimateParams) -> Arc<BestResponse<'static>> {
    let e = *econ;
    let (lp, lt) = climate.loadings();
    Arc::new(move |game: &TemporaryGame, player: usize, t: f64, u: &[f64]| {
        let b = game.shadow(player).at(t)?;
        let price = -(b[0] * lp + b[1] * lt);
        let other = Allocation::from_slice(u);
        if player == 0 {
            let y = e.a_bar - 1.0;
            let c1 = consumption_for_price(y, price * e.eta_k, e.sigma1);
            let b1 = b1_level(&e);
            let leverage = e.eta_b * other.b2.max(0.0).powf(e.theta2);
            let rb = if leverage > 0.0 {
                e.g.inverse_deriv(e.eta_k / (y * leverage))
            } else {
                0.0
            };
            Ok(vec![c1, b1, (c1 + b1 + rb) / y, 0.0, rb])
        } else {
            let y = e.a_bar * e.h.value(other.ra) - 1.0;
            let c2 = consumption_for_price(y, price * e.eta_k, e.sigma2);
            let b2 = b2_level(&e, other.rb, y);
            Ok(vec![c2, b2, (c2 + b2) / y])
        }
    })
}

/// A neutral starting profile for best-response iteration.
pub fn initial_profile() -> DVector<f64> {
    DVector::from_vec(vec![1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 0.0, 0.0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::climate::{default_rho, phi_constant};
    use crate::itm::{nash_at, NashOptions};
    use crate::regimes::closed_form::nash_closed_form;

    #[test]
    fn fixed_point_matches_closed_form() {
        let e = EconParams::default();
        let c = ClimateParams::default();
        let game = climate_game(&e, &c).unwrap();
        let br = analytic_best_response(&e, &c);
        let p = nash_at(&game, 0.0, &initial_profile(), br.as_ref(), &NashOptions::default()).unwrap();
        let cf = nash_closed_form(&e, phi_constant(default_rho(), &c)).unwrap();
        for (x, y) in p.u.iter().zip(cf.to_array()) {
            assert!((x - y).abs() <= 1e-8 * y.abs().max(1.0), "{x} vs {y}");
        }
        assert!(p.iterations <= 20, "{}", p.iterations);
    }
}
