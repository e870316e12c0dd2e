#![allow(dead_code)]

use climate_itm::climate::{default_rho, EconParams, TechCurve};
use climate_itm::itm::relative_gap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Draw parameters uniformly within ±50% of the defaults, rejecting draws
/// that violate the model's standing assumptions.
pub fn random_econ(rng: &mut ChaCha8Rng, sigma: f64) -> EconParams {
    let d = EconParams::default();
    let mut s = |v: f64| v * rng.random_range(0.5..1.5);
    loop {
        let e = EconParams {
            a_bar: s(d.a_bar),
            sigma1: sigma,
            sigma2: sigma,
            gamma1: s(d.gamma1),
            gamma2: s(d.gamma2),
            rho1: default_rho(),
            rho2: default_rho(),
            eta_k: s(d.eta_k),
            eta_b: s(d.eta_b),
            theta1: s(d.theta1),
            theta2: s(d.theta2),
            g: TechCurve::new(s(d.g.at_zero), s(d.g.at_infinity).min(0.99)),
            h: TechCurve::new(s(d.h.at_zero), s(d.h.at_infinity).min(0.99)),
        };
        if e.validate().is_ok() {
            return e;
        }
    }
}

pub fn draws(seed: u64, n: usize, sigma: f64) -> Vec<EconParams> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| random_econ(&mut rng, sigma)).collect()
}

/// Largest componentwise relative gap between two allocations.
pub fn max_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| relative_gap(*x, *y)).fold(0.0, f64::max)
}
