use climate_itm::climate::{
    climate_system, country_objective, default_rho, emissions, phi_constant, resource_feasibility, temperature,
    ClimateParams, Country, EconParams, Regime, TechCurve,
};
use climate_itm::itm::{fubini_check, TimeGrid};
use climate_itm::regimes::{
    abatement_value, b1_level, gp_closed_form, nash_closed_form, rb_argmax, rp_closed_form, solve_regime,
};
use climate_itm::robust::{randomized_bands, Alpha, DrawResponse, RandomizationSpec};
use climate_itm::scenario::{parse_config, ScenarioConfig};
use nalgebra::DVector;
use proptest::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Parameters within ±50% of the defaults that pass validation.
fn econ(sigma: impl Strategy<Value = f64>) -> impl Strategy<Value = EconParams> {
    (prop::collection::vec(0.5f64..1.5, 11), sigma)
        .prop_map(|(s, sigma)| {
            let d = EconParams::default();
            EconParams {
                a_bar: d.a_bar * s[0],
                sigma1: sigma,
                sigma2: sigma,
                gamma1: d.gamma1 * s[1],
                gamma2: d.gamma2 * s[2],
                rho1: default_rho(),
                rho2: default_rho(),
                eta_k: d.eta_k * s[3],
                eta_b: d.eta_b * s[4],
                theta1: d.theta1 * s[5],
                theta2: d.theta2 * s[6],
                g: TechCurve::new(d.g.at_zero * s[7], (d.g.at_infinity * s[8]).min(0.99)),
                h: TechCurve::new(d.h.at_zero * s[9], (d.h.at_infinity * s[10]).min(0.99)),
            }
        })
        .prop_filter("admissible parameters", |e| e.validate().is_ok())
}

fn closed_form(r: Regime, e: &EconParams, phi: f64) -> climate_itm::climate::Allocation {
    match r {
        Regime::GlobalPlanner => gp_closed_form(e, phi),
        Regime::RestrictedPlanner => rp_closed_form(e, phi),
        Regime::Nash => nash_closed_form(e, phi),
    }
    .unwrap()
}

fn regime() -> impl Strategy<Value = Regime> {
    prop::sample::select(Regime::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn budgets_bind(e in econ(0.7f64..1.4), r in regime()) {
        let a = closed_form(r, &e, phi_constant(e.rho1, &ClimateParams::default()));
        let f = resource_feasibility(&a, &e, r);
        prop_assert!(f.feasible, "{f:?}");
        let scale = a.to_array().iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for s in f.slacks {
            prop_assert!(s.abs() <= 1e-10 * scale, "slack {s}");
        }
    }

    #[test]
    fn structural_zeros(e in econ(0.7f64..1.4)) {
        let phi = phi_constant(e.rho1, &ClimateParams::default());
        let gp = closed_form(Regime::GlobalPlanner, &e, phi);
        let nash = closed_form(Regime::Nash, &e, phi);
        prop_assert_eq!(gp.ra, 0.0);
        prop_assert_eq!(gp.k2, 0.0);
        prop_assert_eq!(nash.ra, 0.0);
    }

    #[test]
    fn north_abatement_is_regime_free(e in econ(0.7f64..1.4)) {
        let phi = phi_constant(e.rho1, &ClimateParams::default());
        let b1 = b1_level(&e);
        for r in Regime::ALL {
            let a = closed_form(r, &e, phi);
            prop_assert!((a.b1 - b1).abs() <= 1e-12 * b1.max(1.0), "{r:?}: {} vs {b1}", a.b1);
        }
    }

    #[test]
    fn transfer_argmax_is_optimal(e in econ(Just(1.0)), y in 1.0f64..20.0, d in 1e-4f64..0.5) {
        let net = |r: f64| abatement_value(&e, r, y) - e.eta_k * r / (e.a_bar - 1.0);
        let (rb, _) = rb_argmax(&e, y).unwrap();
        prop_assert!(rb >= 0.0);
        prop_assert!(net(rb) >= net(rb + d) - 1e-12 * net(rb).abs().max(1.0));
        prop_assert!(net(rb) >= net(0.0) - 1e-12 * net(rb).abs().max(1.0));
        if rb > d {
            prop_assert!(net(rb) >= net(rb - d) - 1e-12 * net(rb).abs().max(1.0));
        }
    }

    #[test]
    fn equal_discounting_is_stationary(e in econ(0.8f64..1.25), r in regime()) {
        let g = TimeGrid::new(0.0, 50.0, 17).unwrap();
        // Draws whose sequestration outweighs the initial stock leave
        // temperature undefined and are rejected by the solver.
        let s = match solve_regime(r, &e, &ClimateParams::default(), &g) {
            Err(climate_itm::Error::Domain(msg)) if msg.contains("positive stocks") => return Ok(()),
            other => other.unwrap(),
        };
        prop_assert!(s.diagnostics.stationary);
        prop_assert!(s.allocations.iter().all(|a| *a == s.allocations[0]));
        // Positive net emissions make the stock, and so temperature, rise.
        if s.diagnostics.non_positive_emissions == 0 {
            prop_assert!(s.temperature.windows(2).all(|w| w[1] > w[0]));
        }
    }

    #[test]
    fn higher_damages_lower_nash_emissions(e in econ(0.8f64..1.25), k in 1.05f64..3.0) {
        let phi = phi_constant(e.rho1, &ClimateParams::default());
        let base = emissions(&closed_form(Regime::Nash, &e, phi), &e).total;
        let scaled = e.with_gammas(e.gamma1 * k, e.gamma2 * k);
        let more = emissions(&closed_form(Regime::Nash, &scaled, phi), &scaled).total;
        prop_assert!(more < base, "{more} >= {base}");
    }

    #[test]
    fn temperature_increases_with_stock(s in 1e-3f64..1e4, f in 1.0001f64..10.0, s_bar in 0.1f64..100.0) {
        prop_assert!(temperature(s * f, s_bar).unwrap() > temperature(s, s_bar).unwrap());
        prop_assert!(temperature(s_bar, s_bar).unwrap().abs() < 1e-15);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn transformed_objective_matches_original(e in econ(0.7f64..1.4), seed in any::<u64>(), south in any::<bool>()) {
        let c = ClimateParams::default();
        let sys = climate_system(&c, &e).unwrap();
        let obj = country_objective(&e, if south { Country::South } else { Country::North }).unwrap();
        let g = TimeGrid::new(0.0, 40.0, 41).unwrap();
        let sampler = |rng: &mut ChaCha8Rng, _t: f64| {
            let v: Vec<f64> = (0..8).map(|_| rng.random_range(0.1..50.0)).collect();
            DVector::from_vec(v)
        };
        let r = fubini_check(&sys, &obj, &g, &sampler, 5, seed).unwrap();
        prop_assert!(r.max_relative_error < 1e-6, "{r:?}");
    }

    #[test]
    fn bands_are_ordered(seed in any::<u64>(), alpha in 0.25f64..4.0, r in regime()) {
        let e = EconParams::default();
        let g = TimeGrid::new(0.0, 30.0, 13).unwrap();
        let spec = RandomizationSpec::new(40, seed);
        let b = randomized_bands(r, &spec, Alpha::Finite(alpha), (e.gamma1, e.gamma2), &e, &ClimateParams::default(), &g)
            .unwrap();
        for k in 0..g.n_points() {
            prop_assert!(b.lower[k] <= b.median[k] && b.median[k] <= b.upper[k]);
        }
    }

    #[test]
    fn draws_have_the_benchmark_mean(seed in any::<u64>(), m1 in 0.005f64..0.03, m2 in 0.005f64..0.03) {
        let e = EconParams::default();
        let g = TimeGrid::new(0.0, 10.0, 3).unwrap();
        let mut spec = RandomizationSpec::new(4000, seed);
        spec.response = DrawResponse::Naive;
        let b = randomized_bands(Regime::GlobalPlanner, &spec, Alpha::Infinite, (m1, m2), &e, &ClimateParams::default(), &g)
            .unwrap();
        let n = b.draws.len() as f64;
        let mean1 = b.draws.iter().map(|d| d.0).sum::<f64>() / n;
        let mean2 = b.draws.iter().map(|d| d.1).sum::<f64>() / n;
        // Six standard errors of an exponential sample mean.
        prop_assert!((mean1 - m1).abs() < 6.0 * m1 / n.sqrt(), "{mean1} vs {m1}");
        prop_assert!((mean2 - m2).abs() < 6.0 * m2 / n.sqrt(), "{mean2} vs {m2}");
    }

    #[test]
    fn config_round_trips(
        a_bar in 5.0f64..20.0,
        sigma in 0.5f64..2.0,
        p0 in 0.0f64..100.0,
        alpha in prop_oneof![Just(f64::INFINITY), 0.1f64..10.0],
        seed in any::<u64>(),
        n_grid in 2usize..2000,
    ) {
        let text = format!(
            "[econ]\nA_bar = {a_bar:?}\nsigma1 = {sigma:?}\n[climate]\nP0 = {p0:?}\n[solver]\nn_grid = {n_grid}\n[robust]\nalpha = {}\n[randomization]\nseed = {seed}\n",
            if alpha.is_finite() { format!("{alpha:?}") } else { "\"inf\"".to_string() }
        );
        let cfg = parse_config(&text).unwrap();
        let again: ScenarioConfig = parse_config(&cfg.to_toml()).unwrap();
        prop_assert_eq!(&cfg.econ, &again.econ);
        prop_assert_eq!(&cfg.climate, &again.climate);
        prop_assert_eq!(&cfg.solver, &again.solver);
        prop_assert_eq!(&cfg.robust, &again.robust);
        prop_assert_eq!(&cfg.randomization, &again.randomization);
        prop_assert_eq!(cfg.to_toml(), again.to_toml());
    }
}
