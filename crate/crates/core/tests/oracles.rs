use proptest::prelude::*;
use sigfbsde::oracles::{
    black_scholes_call, gbm_call_exact_mc, highdim_solution, lookback_bridge_mc, lookback_closed_form, mc_price,
    ngd_call_bound, nonlinear_solution, running_sum_integral, McConfig,
};
use sigfbsde::sde::{ForwardModel, PathGrid, SdeSpec};

#[test]
fn black_scholes_matches_exact_sampling() {
    for (i, &(s, k, r, sigma, t)) in
        [(100.0, 80.0, 0.05, 0.2, 1.0), (100.0, 120.0, 0.01, 0.4, 2.0), (1.0, 1.0, 0.0, 1.0, 0.5)].iter().enumerate()
    {
        let exact = black_scholes_call(s, k, r, sigma, t);
        let mc = gbm_call_exact_mc(s, k, r, sigma, t, 1_000_000, 100 + i as u64).unwrap();
        assert!(mc.agrees(exact, 3.0, 0.0), "case {i}: {exact} vs {} +- {}", mc.value, mc.stderr);
    }
}

#[test]
fn black_scholes_limits() {
    assert!((black_scholes_call(100.0, 0.0, 0.05, 0.2, 1.0) - 100.0).abs() < 1e-12);
    let deep = black_scholes_call(100.0, 1e-6, 0.05, 0.2, 1.0);
    assert!((deep - (100.0 - 1e-6 * (-0.05f64).exp())).abs() < 1e-9);
    assert!((black_scholes_call(100.0, 80.0, 0.05, 0.0, 1.0) - (100.0 - 80.0 * (-0.05f64).exp())).abs() < 1e-12);
    assert!(black_scholes_call(100.0, 1e6, 0.05, 0.2, 1.0) < 1e-12);
}

#[test]
fn lookback_matches_bridge_mc() {
    for &(x0, r, sigma) in &[(1.0, 0.01, 1.0), (100.0, 0.05, 0.3)] {
        let exact = lookback_closed_form(x0, x0, r, sigma, 0.0, 1.0).unwrap();
        let mc = lookback_bridge_mc(x0, r, sigma, 1.0, 50, 200_000, 31).unwrap();
        assert!(mc.agrees(exact, 3.0, 0.0), "{exact} vs {} +- {}", mc.value, mc.stderr);
    }
}

#[test]
fn lookback_closed_form_edges() {
    assert!((lookback_closed_form(1.3, 0.9, 0.02, 0.5, 1.0, 1.0).unwrap() - 0.4).abs() < 1e-15);
    assert!(lookback_closed_form(0.8, 0.9, 0.02, 0.5, 0.0, 1.0).is_err());
    assert!(lookback_closed_form(1.0, 1.0, 0.0, 0.5, 0.0, 1.0).is_err());
    // Close to expiry the value tends to the payoff.
    let v = lookback_closed_form(1.3, 0.9, 0.02, 0.5, 1.0 - 1e-10, 1.0).unwrap();
    assert!((v - 0.4).abs() < 1e-4);
    // Discretely monitored Euler MC sits below the continuous value.
    let model = ForwardModel::Euler(SdeSpec::gbm(1.0, 0.01, 1.0));
    let disc = mc_price(
        &model,
        |p| p.point(p.n_points() - 1)[0] - (0..p.n_points()).map(|i| p.point(i)[0]).fold(f64::INFINITY, f64::min),
        0.01,
        &McConfig::new(3, 20_000, 20, 1.0),
    )
    .unwrap();
    assert!(disc.value < lookback_closed_form(1.0, 1.0, 0.01, 1.0, 0.0, 1.0).unwrap());
}

#[test]
fn ngd_bound_matches_shifted_drift_mc() {
    let (s, k, r, sigma, kappa) = (100.0, 80.0, 0.05, 0.2, 0.05);
    for sign in [1.0, -1.0] {
        let bound = ngd_call_bound(s, k, r, sigma, kappa, sign, 1.0);
        let drift = r + sign * sigma * kappa;
        let model = ForwardModel::Euler(SdeSpec::gbm(s, drift, sigma));
        let payoff = |p: sigfbsde::sde::PathRef<'_>| (p.point(p.n_points() - 1)[0] - k).max(0.0);
        let mc = mc_price(&model, payoff, r, &McConfig::new(5, 200_000, 50, 1.0)).unwrap();
        // Euler bias on a 50-step GBM call is far below one cent here.
        assert!(mc.agrees(bound, 3.0, 0.01), "sign {sign}: {bound} vs {} +- {}", mc.value, mc.stderr);
    }
}

#[test]
fn highdim_value_is_martingale() {
    let (d, n, t) = (5, 40, 1.0);
    assert!((highdim_solution(PathGrid::single(vec![0.0], &[vec![0.0; d]]).unwrap().path(0), t).unwrap() - d as f64 / 3.0).abs() < 1e-15);
    // Fix a prefix up to t = 0.5 and average the terminal payoff over continuations.
    let model = ForwardModel::Euler(SdeSpec::brownian(vec![0.0; d]));
    let prefix_bm = sigfbsde::sde::gen_brownian(77, 1, n / 2, d, 0.5).unwrap();
    let prefix = model.simulate(&prefix_bm).unwrap();
    let want = highdim_solution(prefix.path(0), t).unwrap();
    let start = prefix.terminal(0).to_vec();
    let head = running_sum_integral(prefix.path(0));
    let cont = ForwardModel::Euler(SdeSpec::brownian(start));
    let payoff = |p: sigfbsde::sde::PathRef<'_>| (head + running_sum_integral(p)).powi(2);
    let mc = mc_price(&cont, payoff, 0.0, &McConfig::new(10, 100_000, n / 2, 0.5)).unwrap();
    // The trapezoid rule on a 20-step continuation biases the mean by O(dt^2).
    assert!(mc.agrees(want, 3.0, 1e-3 * want.abs()), "{want} vs {} +- {}", mc.value, mc.stderr);
}

#[test]
fn nonlinear_value_at_origin() {
    assert_eq!(nonlinear_solution(0.0, 0.0), 1.0);
    assert!((nonlinear_solution(0.5, -0.5) - 1.0).abs() < 1e-15);
}

proptest! {
    #[test]
    fn ngd_bounds_bracket_black_scholes(
        s in 50.0f64..150.0, k in 50.0f64..150.0, r in 0.0f64..0.1, sigma in 0.05f64..0.6,
        kappa in 0.0f64..0.3, extra in 0.0f64..0.3,
    ) {
        let bs = black_scholes_call(s, k, r, sigma, 1.0);
        let ask = ngd_call_bound(s, k, r, sigma, kappa, 1.0, 1.0);
        let bid = ngd_call_bound(s, k, r, sigma, kappa, -1.0, 1.0);
        prop_assert!(bid <= bs + 1e-9 && bs <= ask + 1e-9);
        prop_assert!((ngd_call_bound(s, k, r, sigma, 0.0, 1.0, 1.0) - bs).abs() <= 1e-9 * bs.max(1.0));
        let wider = ngd_call_bound(s, k, r, sigma, kappa + extra, 1.0, 1.0);
        prop_assert!(wider >= ask - 1e-9);
    }

    #[test]
    fn black_scholes_no_arbitrage(s in 1.0f64..200.0, k in 1.0f64..200.0, r in 0.0f64..0.1, sigma in 0.01f64..1.0, t in 0.01f64..3.0) {
        let c = black_scholes_call(s, k, r, sigma, t);
        prop_assert!(c >= (s - k * (-r * t).exp()).max(0.0) - 1e-9);
        prop_assert!(c <= s + 1e-9);
        prop_assert!(black_scholes_call(s, k * 1.01, r, sigma, t) <= c + 1e-9);
    }

    #[test]
    fn lookback_value_exceeds_payoff_now(x in 1.0f64..2.0, m in 0.5f64..1.0, t in 0.0f64..0.9) {
        let v = lookback_closed_form(x, m, 0.03, 0.4, t, 1.0).unwrap();
        prop_assert!(v >= (x - m) * (-0.03f64 * (1.0 - t)).exp() - 1e-12);
    }
}
