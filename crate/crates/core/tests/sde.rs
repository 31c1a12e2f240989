use proptest::prelude::*;
use sigfbsde::sde::dump::{read_grid, read_increments, write_grid, write_increments};
use sigfbsde::sde::{gen_brownian, gen_brownian_range, simulate_euler, simulate_heston, BrownianBatch, HestonParams, SdeSpec};

fn mean(xs: impl Iterator<Item = f64>) -> (f64, usize) {
    let (mut s, mut n) = (0.0, 0);
    for x in xs {
        s += x;
        n += 1;
    }
    (s / n as f64, n)
}

fn heston() -> HestonParams {
    HestonParams { s0: 100.0, v0: 0.0457, r: 0.05, kappa: 5.07, theta: 0.0457, sigma: 0.48, rho: -0.767, lambda: 0.0 }
}

/// Sums groups of `factor` consecutive steps.
fn coarsen(bm: &BrownianBatch, factor: usize) -> BrownianBatch {
    let n = bm.n_steps / factor;
    let mut inc = vec![0.0; bm.n_paths * n * bm.d];
    for j in 0..bm.n_paths {
        for i in 0..bm.n_steps {
            for c in 0..bm.d {
                inc[(j * n + i / factor) * bm.d + c] += bm.step(j, i)[c];
            }
        }
    }
    BrownianBatch { n_steps: n, increments: inc, ..bm.clone() }
}

#[test]
fn brownian_moments() {
    let (n_paths, n, d, t) = (20_000, 50, 3, 2.0);
    let bm = gen_brownian(11, n_paths, n, d, t).unwrap();
    let dt = bm.dt();
    let count = (n_paths * n) as f64;
    for c in 0..d {
        let (m, _) = mean(bm.increments.iter().skip(c).step_by(d).copied());
        let (var, _) = mean(bm.increments.iter().skip(c).step_by(d).map(|x| (x - m).powi(2)));
        assert!(m.abs() <= 5.0 * (dt / count).sqrt(), "component {c}: mean {m}");
        assert!((var / dt - 1.0).abs() <= 0.02, "component {c}: variance ratio {}", var / dt);
    }
    for (a, b) in [(0, 1), (0, 2), (1, 2)] {
        let (cov, _) = mean(bm.increments.chunks(d).map(|s| s[a] * s[b]));
        assert!((cov / dt).abs() <= 0.02, "corr({a},{b}) = {}", cov / dt);
    }
    // Consecutive steps are uncorrelated.
    let (lag, _) = mean((0..n_paths).flat_map(|j| (1..n).map(move |i| (j, i))).map(|(j, i)| bm.step(j, i)[0] * bm.step(j, i - 1)[0]));
    assert!((lag / dt).abs() <= 0.02, "lag-one corr {}", lag / dt);
    // Terminal value has variance T.
    let (tv, _) = mean((0..n_paths).map(|j| bm.path(j).iter().step_by(d).sum::<f64>().powi(2)));
    assert!((tv / t - 1.0).abs() <= 0.03, "Var W_T / T = {}", tv / t);
}

#[test]
fn gbm_mean() {
    let (x0, r, sigma, t) = (100.0, 0.05, 0.2, 1.0);
    let bm = gen_brownian(12, 40_000, 100, 1, t).unwrap();
    let grid = simulate_euler(&SdeSpec::gbm(x0, r, sigma), &bm).unwrap();
    let (m, _) = mean((0..grid.n_paths()).map(|j| grid.terminal(j)[0]));
    let want = x0 * (r * t).exp();
    assert!((m / want - 1.0).abs() <= 0.005, "E[X_T] {m} vs {want}");
    let (m_half, _) = mean((0..grid.n_paths()).map(|j| grid.point(j, 50)[0]));
    assert!((m_half / (x0 * (r * 0.5f64).exp()) - 1.0).abs() <= 0.005);
}

#[test]
fn cir_variance_mean() {
    let p = HestonParams { v0: 0.09, ..heston() };
    let t = 1.0;
    let bm = gen_brownian(13, 40_000, 200, 2, t).unwrap();
    let grid = simulate_heston(&p, &bm).unwrap();
    for (i, ti) in [(40, 0.2), (200, 1.0)] {
        let (m, _) = mean((0..grid.n_paths()).map(|j| grid.point(j, i)[1]));
        let want = p.theta + (p.v0 - p.theta) * (-p.kappa * ti).exp();
        assert!((m / want - 1.0).abs() <= 0.02, "E[V_{ti}] {m} vs {want}");
    }
    let min_v = grid.values().chunks(2).map(|x| x[1]).fold(f64::INFINITY, f64::min);
    assert!(min_v >= -1e-10, "variance went to {min_v}");
}

#[test]
fn heston_scheme_failure_is_reported() {
    // Far outside the positivity regime the step must fail loudly.
    let p = HestonParams { sigma: 3.0, v0: 0.01, theta: 0.01, kappa: 0.5, ..heston() };
    let bm = gen_brownian(16, 200, 100, 2, 1.0).unwrap();
    match simulate_heston(&p, &bm) {
        Err(sigfbsde::Error::SchemeFailure { step, .. }) => assert!(step >= 1),
        other => panic!("expected a scheme failure, got {:?}", other.map(|g| g.n_paths())),
    }
}

#[test]
fn heston_discounted_price_is_martingale() {
    let p = heston();
    let bm = gen_brownian(14, 40_000, 100, 2, 1.0).unwrap();
    let grid = simulate_heston(&p, &bm).unwrap();
    let (m, _) = mean((0..grid.n_paths()).map(|j| grid.terminal(j)[0] * (-p.r).exp()));
    assert!((m / p.s0 - 1.0).abs() <= 0.005, "{m}");
}

#[test]
fn euler_weak_error_is_first_order() {
    // E[X_T^2] for GBM, estimated against the exact solution on the same noise.
    let (x0, r, sigma, t) = (1.0, 0.5, 1.0, 1.0);
    let fine = gen_brownian(15, 100_000, 800, 1, t).unwrap();
    let exact: Vec<f64> = (0..fine.n_paths)
        .map(|j| x0 * ((r - 0.5 * sigma * sigma) * t + sigma * fine.path(j).iter().sum::<f64>()).exp())
        .collect();
    let spec = SdeSpec::gbm(x0, r, sigma);
    let errs: Vec<f64> = [16, 4, 1]
        .iter()
        .map(|&f| {
            let grid = simulate_euler(&spec, &coarsen(&fine, f)).unwrap();
            let (e, _) = mean((0..grid.n_paths()).map(|j| grid.terminal(j)[0].powi(2) - exact[j].powi(2)));
            e.abs()
        })
        .collect();
    let truth = x0 * x0 * ((2.0 * r + sigma * sigma) * t).exp();
    assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
    // First order: four times the steps, about a quarter of the error.
    let ratio = errs[0] / errs[1];
    assert!((2.5..=6.0).contains(&ratio), "ratio {ratio}, errors {errs:?}");
    assert!(errs[0] / truth < 0.1);
}

#[test]
fn brownian_chunks_and_dumps_roundtrip() {
    let whole = gen_brownian_range(21, 0, 30, 8, 2, 1.0, false).unwrap();
    let a = gen_brownian_range(21, 0, 11, 8, 2, 1.0, false).unwrap();
    let b = gen_brownian_range(21, 11, 19, 8, 2, 1.0, false).unwrap();
    let joined: Vec<f64> = a.increments.iter().chain(&b.increments).copied().collect();
    assert_eq!(joined, whole.increments);

    let dir = std::env::temp_dir().join(format!("sigfbsde_sde_test_{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let grid = simulate_heston(&heston(), &whole).unwrap();
    write_grid(&dir.join("p.bin"), &grid, 21).unwrap();
    write_increments(&dir.join("i.bin"), &whole).unwrap();
    let (back, header) = read_grid(&dir.join("p.bin")).unwrap();
    assert_eq!(back, grid);
    assert_eq!((header.n_paths, header.n_steps, header.dim, header.seed), (30, 8, 2, 21));
    assert_eq!(read_increments(&dir.join("i.bin")).unwrap().increments, whole.increments);
    std::fs::remove_dir_all(&dir).unwrap();
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn chunking_never_changes_paths(seed in any::<u64>(), split in 1usize..20, anti in any::<bool>()) {
        let split = if anti { split & !1 } else { split }.max(if anti { 2 } else { 1 });
        let whole = gen_brownian_range(seed, 0, 20, 5, 1, 1.0, anti).unwrap();
        let a = gen_brownian_range(seed, 0, split, 5, 1, 1.0, anti).unwrap();
        let tail = gen_brownian_range(seed, split, 20 - split.min(19), 5, 1, 1.0, anti);
        let mut joined = a.increments.clone();
        if split < 20 {
            joined.extend(tail.unwrap().increments);
        }
        prop_assert_eq!(&joined[..], &whole.increments[..]);
    }

    #[test]
    fn zero_volatility_gbm_is_deterministic(x0 in 0.1f64..10.0, r in -0.2f64..0.2, n in 1usize..50) {
        let bm = gen_brownian(3, 2, n, 1, 1.0).unwrap();
        let g = simulate_euler(&SdeSpec::gbm(x0, r, 0.0), &bm).unwrap();
        let want = x0 * (1.0 + r / n as f64).powi(n as i32);
        prop_assert!((g.terminal(0)[0] - want).abs() <= 1e-12 * want);
        prop_assert_eq!(g.terminal(0)[0], g.terminal(1)[0]);
    }

    /// The implicit Milstein step keeps `V >= 0` whenever `sigma^2 < 4 kappa theta`.
    #[test]
    fn heston_variance_nonnegative(seed in any::<u64>(), frac in 0.0f64..0.99, rho in -0.95f64..0.95) {
        let base = heston();
        let sigma = frac * (4.0 * base.kappa * base.theta).sqrt();
        let p = HestonParams { sigma, rho, ..base };
        let bm = gen_brownian(seed, 8, 50, 2, 1.0).unwrap();
        let g = simulate_heston(&p, &bm).unwrap();
        prop_assert!(g.values().chunks(2).all(|x| x[0] > 0.0 && x[1] >= -1e-10));
    }
}
