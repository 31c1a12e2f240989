//! Quick self-check of the library: algebraic identities, gradients and oracles.
//!
//! Every check runs in well under a second so the whole manifest stays fast;
//! the full test suite runs the same identities at larger scale.

use std::time::Instant;

use sigfbsde::bsde::{batch_loss, lookback, loss_and_grad, simulate_data, Parameters, RolloutSettings, TrainConfig};
use sigfbsde::nn::{LstmParams, Matrix};
use sigfbsde::oracles::{
    black_scholes_call, brute_force_signature, gbm_call_exact_mc, lookback_bridge_mc, lookback_closed_form,
    ngd_call_bound,
};
use sigfbsde::sde::rng::{domain, Stream};
use sigfbsde::sde::{gen_brownian, PathGrid};
use sigfbsde::sig::{chen_concat, is_lyndon, lyndon_basis, shuffle_eval, signature, witt_dimension, Word};

#[derive(Clone, Debug)]
pub struct CheckResult {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
    pub ms: f64,
}

type Check = fn() -> Result<(bool, String), String>;

pub const CHECKS: [(&str, Check); 9] = [
    ("chen_identity", chen),
    ("shuffle_identity", shuffle),
    ("exp_log_roundtrip", exp_log),
    ("brute_force_signature", brute_force),
    ("lyndon_dimension", lyndon),
    ("rollout_gradient", gradient),
    ("brownian_moments", brownian),
    ("black_scholes_vs_mc", black_scholes),
    ("lookback_vs_mc", lookback_mc),
];

fn random_path(seed: u64, n: usize, d: usize) -> PathGrid {
    let mut rng = Stream::new(seed, domain::ORACLE, 7);
    let mut rows = vec![vec![0.0; d]];
    for i in 1..=n {
        let next = rows[i - 1].iter().map(|x| x + 0.5 * rng.normal()).collect();
        rows.push(next);
    }
    PathGrid::single(PathGrid::uniform_times(n, 1.0), &rows).expect("valid path")
}

fn e(err: impl std::fmt::Display) -> String {
    err.to_string()
}

fn chen() -> Result<(bool, String), String> {
    let p = random_path(1, 12, 3);
    let whole = signature(p.path(0), 4).map_err(e)?;
    let a = signature(p.path(0).window(0, 5), 4).map_err(e)?;
    let b = signature(p.path(0).window(5, 12), 4).map_err(e)?;
    let err = chen_concat(&a, &b).map_err(e)?.max_abs_diff(&whole);
    Ok((err <= 1e-10, format!("max error {err:.1e}")))
}

fn shuffle() -> Result<(bool, String), String> {
    let p = random_path(2, 10, 2);
    let s = signature(p.path(0), 4).map_err(e)?;
    let mut worst = 0.0f64;
    for (x, y) in [(vec![1], vec![2]), (vec![1, 2], vec![2]), (vec![2, 1], vec![1, 1])] {
        let (w1, w2) = (Word::new(x), Word::new(y));
        let lhs = s.get(&w1).map_err(e)? * s.get(&w2).map_err(e)?;
        worst = worst.max((lhs - shuffle_eval(&s, &w1, &w2).map_err(e)?).abs());
    }
    Ok((worst <= 1e-10, format!("max error {worst:.1e}")))
}

fn exp_log() -> Result<(bool, String), String> {
    let p = random_path(3, 8, 3);
    let s = signature(p.path(0), 4).map_err(e)?;
    let err = s.log().map_err(e)?.exp().max_abs_diff(&s);
    Ok((err <= 1e-10, format!("max error {err:.1e}")))
}

fn brute_force() -> Result<(bool, String), String> {
    let p = random_path(4, 6, 2);
    let exact = signature(p.path(0), 3).map_err(e)?;
    let brute = brute_force_signature(p.path(0), 3, 32).map_err(e)?;
    let err = exact.max_abs_diff(&brute);
    Ok((err <= 1e-8, format!("max error {err:.1e}")))
}

fn lyndon() -> Result<(bool, String), String> {
    for d in 1..=3usize {
        for m in 1..=4usize {
            let basis = lyndon_basis(d, m).map_err(e)?;
            if basis.len() != witt_dimension(d, m) || !basis.iter().all(|w| is_lyndon(w.letters())) {
                return Ok((false, format!("d={d} m={m}: {} words", basis.len())));
            }
        }
    }
    Ok((true, "d<=3, m<=4".into()))
}

fn gradient() -> Result<(bool, String), String> {
    let p = lookback(1.0, 0.01, 1.0, 1.0);
    let cfg = TrainConfig { n_paths: 8, n_test: 0, batch_size: 8, n_steps: 20, n_segments: 5, ..TrainConfig::default() };
    let data = simulate_data(&p, &cfg).map_err(e)?;
    let batch = data.train.full_batch().map_err(e)?;
    let settings = RolloutSettings::for_dataset(&data.train, 1.0);
    let mut params = Parameters::new(0.5, 1, LstmParams::init(data.train.width, 4, 1, 11));
    params.z0 = Matrix::scalar(0.3);
    let (_, grads) = loss_and_grad(&p, &batch, &params, &settings).map_err(e)?;
    let ad: Vec<f64> = grads.iter().flat_map(|g| g.data().to_vec()).collect();
    let mut fd = Vec::with_capacity(ad.len());
    for b in 0..params.blocks().len() {
        for i in 0..params.blocks()[b].len() {
            let x = params.blocks()[b].data()[i];
            let h = 1e-5 * x.abs().max(1.0);
            params.blocks_mut()[b].data_mut()[i] = x + h;
            let up = batch_loss(&p, &batch, &params, &settings).map_err(e)?;
            params.blocks_mut()[b].data_mut()[i] = x - h;
            let down = batch_loss(&p, &batch, &params, &settings).map_err(e)?;
            params.blocks_mut()[b].data_mut()[i] = x;
            fd.push((up - down) / (2.0 * h));
        }
    }
    let diff = ad.iter().zip(&fd).map(|(a, f)| (a - f).powi(2)).sum::<f64>().sqrt();
    let norm = fd.iter().map(|f| f * f).sum::<f64>().sqrt();
    let rel = diff / norm;
    Ok((rel <= 1e-5, format!("{} parameters, relative error {rel:.1e}", ad.len())))
}

fn brownian() -> Result<(bool, String), String> {
    let bm = gen_brownian(5, 20_000, 4, 1, 1.0).map_err(e)?;
    let n = bm.increments.len() as f64;
    let mean = bm.increments.iter().sum::<f64>() / n;
    let var = bm.increments.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let ok = mean.abs() <= 5.0 * (bm.dt() / n).sqrt() && (var / bm.dt() - 1.0).abs() <= 0.02;
    Ok((ok, format!("mean {mean:.2e}, variance ratio {:.4}", var / bm.dt())))
}

fn black_scholes() -> Result<(bool, String), String> {
    let exact = black_scholes_call(100.0, 80.0, 0.05, 0.2, 1.0);
    let mc = gbm_call_exact_mc(100.0, 80.0, 0.05, 0.2, 1.0, 200_000, 17).map_err(e)?;
    let flat = ngd_call_bound(100.0, 80.0, 0.05, 0.2, 0.0, 1.0, 1.0);
    let ok = mc.agrees(exact, 3.0, 0.0) && (flat - exact).abs() <= 1e-12;
    Ok((ok, format!("closed form {exact:.4}, MC {:.4} +- {:.4}", mc.value, mc.stderr)))
}

fn lookback_mc() -> Result<(bool, String), String> {
    let exact = lookback_closed_form(1.0, 1.0, 0.01, 1.0, 0.0, 1.0).map_err(e)?;
    let mc = lookback_bridge_mc(1.0, 0.01, 1.0, 1.0, 20, 50_000, 19).map_err(e)?;
    Ok((mc.agrees(exact, 3.0, 0.0), format!("closed form {exact:.4}, MC {:.4} +- {:.4}", mc.value, mc.stderr)))
}

/// Runs every check; a check that errors counts as a failure.
pub fn run_all() -> Vec<CheckResult> {
    CHECKS
        .iter()
        .map(|(name, f)| {
            let t = Instant::now();
            let (pass, detail) = f().unwrap_or_else(|err| (false, format!("error: {err}")));
            CheckResult { name, pass, detail, ms: t.elapsed().as_secs_f64() * 1e3 }
        })
        .collect()
}
