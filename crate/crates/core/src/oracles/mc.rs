use super::{OracleMethod, OracleResult};
use crate::error::{Error, Result};
use crate::sde::rng::{domain, Stream};
use crate::sde::{gen_brownian_range, ForwardModel, PathRef};

/// Monte Carlo run settings; the seed is mixed with an oracle-only domain.
#[derive(Clone, Copy, Debug)]
pub struct McConfig {
    pub seed: u64,
    pub n_paths: usize,
    pub n_steps: usize,
    pub horizon: f64,
    pub chunk: usize,
    pub antithetic: bool,
}

impl McConfig {
    pub fn new(seed: u64, n_paths: usize, n_steps: usize, horizon: f64) -> Self {
        McConfig { seed, n_paths, n_steps, horizon, chunk: 10_000, antithetic: false }
    }
}

#[derive(Default)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1.0;
        let d = x - self.mean;
        self.mean += d / self.n;
        self.m2 += d * (x - self.mean);
    }

    fn result(&self, scale: f64) -> OracleResult {
        let var = if self.n > 1.0 { self.m2 / (self.n - 1.0) } else { 0.0 };
        OracleResult { value: scale * self.mean, method: OracleMethod::MonteCarlo, stderr: scale * (var / self.n).sqrt() }
    }
}

/// `e^{-rT} E[payoff(X)]` over paths simulated with the model's scheme.
pub fn mc_price<F>(model: &ForwardModel, payoff: F, r: f64, cfg: &McConfig) -> Result<OracleResult>
where
    F: Fn(PathRef<'_>) -> f64,
{
    if cfg.n_paths == 0 || cfg.chunk == 0 {
        return Err(Error::arg("Monte Carlo needs n_paths >= 1 and chunk >= 1"));
    }
    let mut m = Moments::default();
    let mut first = 0;
    while first < cfg.n_paths {
        let count = cfg.chunk.min(cfg.n_paths - first);
        let bm = gen_brownian_range(
            cfg.seed ^ domain::ORACLE,
            first,
            count,
            cfg.n_steps,
            model.noise_dim(),
            cfg.horizon,
            cfg.antithetic,
        )?;
        let grid = model.simulate(&bm)?;
        for j in 0..count {
            m.push(payoff(grid.path(j)));
        }
        first += count;
    }
    Ok(m.result((-r * cfg.horizon).exp()))
}

/// Continuously monitored lookback call by exact log-GBM steps and Brownian-bridge minima.
///
/// Within a step of a Brownian motion with variance `s^2 dt` from `a` to `b`,
/// the minimum is `(a + b - sqrt((b - a)^2 - 2 s^2 dt ln U)) / 2`, so the
/// estimate has no monitoring bias for any `n_steps`.
pub fn lookback_bridge_mc(x0: f64, r: f64, sigma: f64, horizon: f64, n_steps: usize, n_paths: usize, seed: u64) -> Result<OracleResult> {
    if n_steps == 0 || n_paths == 0 || !(sigma > 0.0) || !(x0 > 0.0) {
        return Err(Error::arg("bridge MC needs positive counts, sigma and x0"));
    }
    let dt = horizon / n_steps as f64;
    let drift = (r - 0.5 * sigma * sigma) * dt;
    let sd = sigma * dt.sqrt();
    let var = sigma * sigma * dt;
    let mut m = Moments::default();
    for j in 0..n_paths {
        let mut rng = Stream::new(seed, domain::ORACLE, j as u64);
        let (mut l, mut lmin) = (x0.ln(), x0.ln());
        for _ in 0..n_steps {
            let next = l + drift + sd * rng.normal();
            let bridge = 0.5 * (l + next - ((next - l).powi(2) - 2.0 * var * rng.uniform().ln()).sqrt());
            lmin = lmin.min(bridge);
            l = next;
        }
        m.push(l.exp() - lmin.exp());
    }
    Ok(m.result((-r * horizon).exp()))
}

/// European call by exact terminal GBM sampling.
pub fn gbm_call_exact_mc(s: f64, k: f64, r: f64, sigma: f64, horizon: f64, n_paths: usize, seed: u64) -> Result<OracleResult> {
    if n_paths == 0 {
        return Err(Error::arg("n_paths must be positive"));
    }
    let mut rng = Stream::new(seed, domain::ORACLE, u64::MAX);
    let mut m = Moments::default();
    for _ in 0..n_paths {
        let st = s * ((r - 0.5 * sigma * sigma) * horizon + sigma * horizon.sqrt() * rng.normal()).exp();
        m.push((st - k).max(0.0));
    }
    Ok(m.result((-r * horizon).exp()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::{black_scholes_call, lookback_closed_form};
    use crate::sde::SdeSpec;

    #[test]
    fn constant_payoff() {
        let model = ForwardModel::Euler(SdeSpec::gbm(1.0, 0.0, 0.3));
        let res = mc_price(&model, |_| 2.5, 0.0, &McConfig::new(1, 500, 4, 1.0)).unwrap();
        assert!((res.value - 2.5).abs() < 1e-12);
        assert!(res.stderr < 1e-12);
    }

    #[test]
    fn euler_call_near_black_scholes() {
        let model = ForwardModel::Euler(SdeSpec::gbm(100.0, 0.05, 0.2));
        let payoff = |p: PathRef<'_>| (p.point(p.n_points() - 1)[0] - 80.0).max(0.0);
        let res = mc_price(&model, payoff, 0.05, &McConfig::new(3, 40_000, 50, 1.0)).unwrap();
        let bs = black_scholes_call(100.0, 80.0, 0.05, 0.2, 1.0);
        assert!(res.agrees(bs, 3.0, 0.02), "{res:?} vs {bs}");
    }

    #[test]
    fn exact_call_mc() {
        let res = gbm_call_exact_mc(100.0, 80.0, 0.05, 0.2, 1.0, 200_000, 9).unwrap();
        let bs = black_scholes_call(100.0, 80.0, 0.05, 0.2, 1.0);
        assert!(res.agrees(bs, 3.0, 0.0), "{res:?} vs {bs}");
    }

    #[test]
    fn bridge_lookback_matches_closed_form() {
        let res = lookback_bridge_mc(1.0, 0.01, 1.0, 1.0, 4, 200_000, 17).unwrap();
        let cf = lookback_closed_form(1.0, 1.0, 0.01, 1.0, 0.0, 1.0).unwrap();
        assert!(res.agrees(cf, 3.0, 0.0), "{res:?} vs {cf}");
    }
}
