//! End-to-end acceptance checks. Each test prints one PASS/FAIL line with the
//! numbers behind the verdict, then asserts it.
//!
//! Tests hold a shared lock so the timed checks do not compete for the CPU.

mod common;

use std::io::Write;
use std::sync::{Mutex, MutexGuard};
use std::time::{Duration, Instant};

use climate_itm::climate::{
    climate_system, country_objective, phi_constant, resource_feasibility, Allocation, ClimateParams, Country,
    EconParams, Regime,
};
use climate_itm::itm::{fubini_check, nash_at, NashOptions, TimeGrid};
use climate_itm::regimes::{
    analytic_best_response, climate_game, compare_regimes, gp_closed_form, hetero_discount_path, initial_profile,
    nash_closed_form, rp_closed_form, solve_regime, temporary_oracle, Relation, TemporaryWeights,
};
use climate_itm::robust::{
    alpha_sweep, robust_gp, robust_gp_foc, robust_nash, robust_nash_foc, robust_nash_from, Alpha, NashSolveOptions,
    RobustParams,
};
use climate_itm::scenario::{randomize_cmd, ScenarioConfig};
use common::{draws, max_gap};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Pinned tolerances.
const ITM_IDENTITY_TOL: f64 = 1e-6;
const ITM_IDENTITY_TIME: Duration = Duration::from_secs(10);
const ORACLE_TOL: f64 = 1e-6;
const ORACLE_TIME: Duration = Duration::from_secs(120);
const FIXED_POINT_TOL: f64 = 1e-8;
const FIXED_POINT_MAX_ITER: usize = 20;
const ROBUST_GP_FOC_TOL: f64 = 1e-10;
const LARGE_ALPHA: f64 = 1e6;
const LARGE_ALPHA_TOL: f64 = 1e-4;
const ROBUST_NASH_FOC_TOL: f64 = 1e-8;
const MULTI_START_TOL: f64 = 1e-7;
const BANDS_TIME: Duration = Duration::from_secs(60);
const CLOSED_FORM_PATH_TOL: f64 = 1e-8;
/// Slack allowed in weak orderings of computed numbers.
const ORDER_SLACK: f64 = 1e-9;

static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn verdict(n: u32, name: &str, pass: bool, detail: String) {
    // Written past the test harness's capture so every verdict reaches the log.
    let line = format!("criterion {n:>2} {name}: {} | {detail}\n", if pass { "PASS" } else { "FAIL" });
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes()).and_then(|_| out.flush());
    assert!(pass, "criterion {n} ({name}) failed: {detail}");
}

fn grid() -> TimeGrid {
    TimeGrid::new(0.0, 50.0, 512).unwrap()
}

/// A random allocation that meets both per-country budgets.
fn admissible(rng: &mut ChaCha8Rng, e: &EconParams) -> Allocation {
    let mut u = |lo: f64, hi: f64| rng.random_range(lo..hi);
    let (c1, c2, b1, b2) = (u(1.0, 800.0), u(1.0, 800.0), u(0.0, 40.0), u(0.0, 10.0));
    let (ra, rb) = (u(0.0, 3.0), u(0.0, 3.0));
    let (s1, s2) = (u(1.0, 1.5), u(1.0, 1.5));
    let k1 = s1 * (c1 + b1 + ra + rb) / (e.a_bar - 1.0);
    let k2 = s2 * (c2 + b2) / (e.a_bar * e.h.value(ra) - 1.0);
    Allocation { c1, c2, b1, b2, k1, k2, ra, rb }
}

#[test]
fn c01_itm_identity() {
    let _g = serial();
    let e = EconParams::default();
    let c = ClimateParams::default();
    let sys = climate_system(&c, &e).unwrap();
    let g = TimeGrid::new(0.0, 50.0, 101).unwrap();
    let sampler = move |rng: &mut ChaCha8Rng, _t: f64| {
        let a = admissible(rng, &e);
        assert!(resource_feasibility(&a, &e, Regime::RestrictedPlanner).feasible);
        DVector::from_row_slice(&a.to_array())
    };
    let start = Instant::now();
    let mut worst = 0.0f64;
    for (k, country) in [Country::North, Country::South].into_iter().enumerate() {
        let obj = country_objective(&e, country).unwrap();
        let r = fubini_check(&sys, &obj, &g, &sampler, 100, 7 + k as u64).unwrap();
        worst = worst.max(r.max_relative_error);
    }
    let took = start.elapsed();
    verdict(
        1,
        "ITM identity",
        worst < ITM_IDENTITY_TOL && took < ITM_IDENTITY_TIME,
        format!("max relative gap {worst:e} (< {ITM_IDENTITY_TOL:e}) over 2x100 paths in {took:?}"),
    );
}

#[test]
fn c02_closed_forms_match_oracle() {
    let _g = serial();
    let climate = ClimateParams::default();
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut worst_at = String::new();
    for (k, sigma) in [1.0, 0.8, 1.2].into_iter().enumerate() {
        for (d, e) in draws(11 + k as u64, 50, sigma).into_iter().enumerate() {
            let phi = phi_constant(e.rho1, &climate);
            let w = TemporaryWeights::equal(&e, phi);
            for r in Regime::ALL {
                let cf = match r {
                    Regime::GlobalPlanner => gp_closed_form(&e, phi),
                    Regime::RestrictedPlanner => rp_closed_form(&e, phi),
                    Regime::Nash => nash_closed_form(&e, phi),
                }
                .unwrap();
                let or = temporary_oracle(r, &e, &climate, &w).unwrap();
                let gap = max_gap(&cf.to_array(), &or.to_array());
                if gap > worst {
                    worst = gap;
                    worst_at = format!("{} sigma {sigma} draw {d}", r.tag());
                }
            }
        }
    }
    let took = start.elapsed();
    verdict(
        2,
        "closed forms vs oracle",
        worst < ORACLE_TOL && took < ORACLE_TIME,
        format!("worst componentwise gap {worst:e} ({worst_at}) over 450 solves in {took:?}"),
    );
}

#[test]
fn c03_nash_fixed_point() {
    let _g = serial();
    let e = EconParams::default();
    let c = ClimateParams::default();
    let game = climate_game(&e, &c).unwrap();
    let br = analytic_best_response(&e, &c);
    let p = nash_at(&game, 0.0, &initial_profile(), br.as_ref(), &NashOptions::default()).unwrap();
    let cf = nash_closed_form(&e, phi_constant(e.rho1, &c)).unwrap();
    let gap = max_gap(p.u.as_slice(), &cf.to_array());
    verdict(
        3,
        "temporary Nash fixed point",
        gap < FIXED_POINT_TOL && p.iterations <= FIXED_POINT_MAX_ITER,
        format!("gap {gap:e} (< {FIXED_POINT_TOL:e}) after {} iterations (<= {FIXED_POINT_MAX_ITER})", p.iterations),
    );
}

#[test]
fn c04_regime_orderings() {
    let _g = serial();
    let r = compare_regimes(&EconParams::default(), &ClimateParams::default(), &grid()).unwrap();
    let mut bad = Vec::new();
    for o in &r.orderings {
        let strict_ok = o.relation == Relation::Equal || o.margin > 0.0;
        if !(o.holds && strict_ok) {
            bad.push(format!("{} (margin {:e})", o.name, o.margin));
        }
    }
    let smallest = r
        .orderings
        .iter()
        .filter(|o| o.relation != Relation::Equal)
        .map(|o| o.margin)
        .fold(f64::INFINITY, f64::min);
    let n_conditional = r.orderings.iter().filter(|o| o.conditional).count();
    let gated = r.precondition.holds == (n_conditional > 0);
    verdict(
        4,
        "regime orderings",
        bad.is_empty() && gated && r.domain_violation.is_none(),
        format!(
            "{} orderings, smallest inequality margin {smallest:e}, failures {bad:?}; precondition {} vs {} holds={} with {n_conditional} conditional checks",
            r.orderings.len(),
            r.precondition.lhs,
            r.precondition.rhs,
            r.precondition.holds
        ),
    );
}

#[test]
fn c05_sigma_sweep() {
    let _g = serial();
    let c = ClimateParams::default();
    let g = grid();
    let sigmas = [0.6, 0.8, 1.0, 1.2, 1.5, 2.0];
    let gaps: Vec<f64> = sigmas
        .iter()
        .map(|&s| {
            let e = EconParams { sigma1: s, sigma2: s, ..EconParams::default() };
            let gp = solve_regime(Regime::GlobalPlanner, &e, &c, &g).unwrap();
            let n = solve_regime(Regime::Nash, &e, &c, &g).unwrap();
            n.final_temperature() - gp.final_temperature()
        })
        .collect();
    let non_negative = gaps.iter().all(|&x| x >= 0.0);
    let decreasing = gaps.windows(2).all(|w| w[1] <= w[0] + ORDER_SLACK);
    let ends = gaps[0] > gaps[4];
    let table: Vec<String> = sigmas.iter().zip(&gaps).map(|(s, x)| format!("{s}: {x:.4}")).collect();
    verdict(
        5,
        "sigma sweep",
        non_negative && decreasing && ends,
        format!(
            "Nash - GP final temperature [{}]; >= 0 {non_negative}, weakly decreasing {decreasing}, gap(0.6) > gap(1.5) {ends}",
            table.join(", ")
        ),
    );
}

#[test]
fn c06_gamma_heterogeneity() {
    let _g = serial();
    let c = ClimateParams::default();
    let g = grid();
    let nash = |g1, g2| {
        let s = solve_regime(Regime::Nash, &EconParams::default().with_gammas(g1, g2), &c, &g).unwrap();
        (s.emissions[0], s.cumulative_emissions())
    };
    let (sym, sym_total) = nash(0.0125, 0.0125);
    let (asym, asym_total) = nash(0.0075, 0.0175);
    let higher = asym.total > sym.total && asym_total > sym_total;
    let asym_order = asym.g1 > asym.g2;
    let reversed = sym.g1 < sym.g2;
    verdict(
        6,
        "damage heterogeneity",
        higher && asym_order && reversed,
        format!(
            "G asym {:.4} vs sym {:.4}; asym G1 {:.4} > G2 {:.4}; sym G1 {:.4} < G2 {:.4}",
            asym.total, sym.total, asym.g1, asym.g2, sym.g1, sym.g2
        ),
    );
}

#[test]
fn c07_robust_planner() {
    let _g = serial();
    let e = EconParams::default();
    let c = ClimateParams::default();
    let alphas = [0.25, 0.5, 1.0, 2.0, 4.0];
    let hats = [(0.0125, 0.0125), (0.0075, 0.0175), (0.02, 0.01), (0.005, 0.005), (0.03, 0.02)];
    let mut worst = 0.0f64;
    let mut positive = true;
    for a in alphas {
        for (h1, h2) in hats {
            let r = RobustParams::new(Alpha::Finite(a), h1, h2).unwrap();
            let s = robust_gp(&r, &e, &c).unwrap();
            let foc = robust_gp_foc(&r, &e, &c, s.gamma1, s.gamma2).unwrap();
            worst = worst.max(foc[0].abs()).max(foc[1].abs());
            positive &= s.gamma1 + s.gamma2 > 0.0;
        }
    }
    let r = RobustParams::from_econ(Alpha::Finite(LARGE_ALPHA), &e).unwrap();
    let s = robust_gp(&r, &e, &c).unwrap();
    let drift = (s.gamma1 - e.gamma1).abs().max((s.gamma2 - e.gamma2).abs());
    verdict(
        7,
        "robust planner",
        worst < ROBUST_GP_FOC_TOL && drift < LARGE_ALPHA_TOL && positive,
        format!(
            "max FOC residual {worst:e} on 5x5 grid (< {ROBUST_GP_FOC_TOL:e}); alpha {LARGE_ALPHA:e} drift {drift:e}; gamma sums positive {positive}"
        ),
    );
}

#[test]
fn c08_robust_nash() {
    let _g = serial();
    let e = EconParams::default();
    let c = ClimateParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst_res = 0.0f64;
    let mut worst_spread = 0.0f64;
    for a in [0.5, 1.0, 2.0] {
        let r = RobustParams::from_econ(Alpha::Finite(a), &e).unwrap();
        let base = robust_nash(&r, &e, &c).unwrap();
        let mut roots = vec![[base.gamma1, base.gamma2]];
        for _ in 0..10 {
            let start = [rng.random_range(0.001..0.2), rng.random_range(0.001..0.2)];
            let s = robust_nash_from(&r, &e, &c, start, &NashSolveOptions::default()).unwrap();
            roots.push([s.gamma1, s.gamma2]);
        }
        for root in &roots {
            let f = robust_nash_foc(&r, &e, &c, root[0], root[1]).unwrap();
            worst_res = worst_res.max(f[0].abs()).max(f[1].abs());
        }
        for i in 0..roots.len() {
            for j in 0..i {
                let d = ((roots[i][0] - roots[j][0]).powi(2) + (roots[i][1] - roots[j][1]).powi(2)).sqrt();
                worst_spread = worst_spread.max(d);
            }
        }
    }
    verdict(
        8,
        "robust Nash",
        worst_res < ROBUST_NASH_FOC_TOL && worst_spread < MULTI_START_TOL,
        format!("max residual {worst_res:e} (< {ROBUST_NASH_FOC_TOL:e}); max pairwise root distance {worst_spread:e} over 10 random starts per alpha"),
    );
}

#[test]
fn c09_alpha_sweep() {
    let _g = serial();
    let e = EconParams::default();
    let c = ClimateParams::default();
    let g = grid();
    let alphas = [0.25, 0.5, 1.0, 2.0, f64::INFINITY].map(|a| Alpha::new(a).unwrap());
    let finals: Vec<Vec<f64>> = Regime::ALL
        .iter()
        .map(|&r| {
            alpha_sweep(r, (e.gamma1, e.gamma2), &alphas, &e, &c, &g)
                .into_iter()
                .map(|run| run.unwrap().solution.final_temperature())
                .collect()
        })
        .collect();
    let monotone = finals.iter().all(|t| t.windows(2).all(|w| w[0] <= w[1] + ORDER_SLACK));
    let ordered = (0..alphas.len())
        .all(|k| finals[0][k] <= finals[1][k] + ORDER_SLACK && finals[1][k] <= finals[2][k] + ORDER_SLACK);
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(" ");
    verdict(
        9,
        "alpha sweep",
        monotone && ordered,
        format!(
            "final temperatures GP [{}] RP [{}] Nash [{}]; non-decreasing {monotone}, GP <= RP <= Nash {ordered}",
            fmt(&finals[0]),
            fmt(&finals[1]),
            fmt(&finals[2])
        ),
    );
}

#[test]
fn c10_randomization() {
    let _g = serial();
    let cfg = ScenarioConfig::default();
    assert_eq!(cfg.randomization.n_draws, 1000);
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let start = Instant::now();
    randomize_cmd(&cfg, &Regime::ALL, a.path()).unwrap();
    let took = start.elapsed();
    randomize_cmd(&cfg, &Regime::ALL, b.path()).unwrap();
    let bytes_a = std::fs::read(a.path().join("bands.csv")).unwrap();
    let bytes_b = std::fs::read(b.path().join("bands.csv")).unwrap();
    let identical = bytes_a == bytes_b;
    let text = String::from_utf8(bytes_a).unwrap();
    let mut monotone = true;
    for line in text.lines().skip(1) {
        let v: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        for q in v[1..].chunks(3) {
            monotone &= q[0] <= q[1] && q[1] <= q[2];
        }
    }
    verdict(
        10,
        "randomized bands",
        took < BANDS_TIME && monotone && identical,
        format!("3 regimes x 1000 draws in {took:?} (< {BANDS_TIME:?}); bands ordered {monotone}; repeat byte-identical {identical}"),
    );
}

#[test]
fn c11_heterogeneous_discounting() {
    let _g = serial();
    let c = ClimateParams::default();
    let g = grid();
    let base = EconParams::default();
    let impatient_south = EconParams { rho2: 1.2 * base.rho1, ..base };
    let mut shape = true;
    let mut matched = 0.0f64;
    for r in [Regime::GlobalPlanner, Regime::RestrictedPlanner] {
        let s = hetero_discount_path(&impatient_south, &c, r, &g).unwrap();
        for w in s.allocations.windows(2) {
            shape &= w[1].c1 >= w[0].c1 * (1.0 - 1e-12) && w[1].c2 <= w[0].c2 * (1.0 + 1e-12);
        }
        let equal = hetero_discount_path(&base, &c, r, &g).unwrap();
        let phi = phi_constant(base.rho1, &c);
        let cf = match r {
            Regime::GlobalPlanner => gp_closed_form(&base, phi),
            _ => rp_closed_form(&base, phi),
        }
        .unwrap()
        .to_array();
        for a in &equal.allocations {
            matched = matched.max(max_gap(&a.to_array(), &cf));
        }
    }
    verdict(
        11,
        "heterogeneous discounting",
        shape && matched < CLOSED_FORM_PATH_TOL,
        format!("C1 rising and C2 falling for GP and RP {shape}; equal-rate paths vs closed forms {matched:e} (< {CLOSED_FORM_PATH_TOL:e})"),
    );
}
