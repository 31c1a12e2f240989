//! Ground-truth values: closed forms, quadrature and Monte Carlo.

mod mc;
mod quadrature;

pub use mc::{gbm_call_exact_mc, lookback_bridge_mc, mc_price, McConfig};
pub use quadrature::{brute_force_signature, MAX_QUADRATURE_ORDER, MAX_QUADRATURE_POINTS};

use crate::error::{Error, Result};
use crate::sde::PathRef;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OracleMethod {
    ClosedForm,
    Quadrature,
    MonteCarlo,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleResult {
    pub value: f64,
    pub method: OracleMethod,
    pub stderr: f64,
}

impl OracleResult {
    pub fn closed_form(value: f64) -> Self {
        OracleResult { value, method: OracleMethod::ClosedForm, stderr: 0.0 }
    }

    /// True when `x` lies within `k` standard errors (plus `slack`) of the value.
    pub fn agrees(&self, x: f64, k: f64, slack: f64) -> bool {
        (x - self.value).abs() <= k * self.stderr + slack
    }
}

/// Standard normal CDF, `erfc(-x / sqrt 2) / 2` with the libm erfc.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Floating-strike lookback call `E[e^{-r(T-t)}(X_T - min X)]` under Black–Scholes.
///
/// `m_run` is the running minimum up to `t`. Needs `r != 0`; at `t >= T` this
/// is the payoff `x - m_run`.
pub fn lookback_closed_form(x: f64, m_run: f64, r: f64, sigma: f64, t: f64, horizon: f64) -> Result<f64> {
    if !(m_run > 0.0 && x >= m_run) {
        return Err(Error::Domain(format!("lookback needs x >= m_run > 0, got x={x}, m={m_run}")));
    }
    if !(sigma > 0.0) || r == 0.0 {
        return Err(Error::Domain("lookback closed form needs sigma > 0 and r != 0".into()));
    }
    if t >= horizon {
        return Ok(x - m_run);
    }
    let tau = horizon - t;
    let st = sigma * tau.sqrt();
    let a1 = ((x / m_run).ln() + (r + 0.5 * sigma * sigma) * tau) / st;
    let a2 = a1 - st;
    let a3 = a1 - 2.0 * r / sigma * tau.sqrt();
    let disc = (-r * tau).exp();
    let k = sigma * sigma / (2.0 * r);
    Ok(x * normal_cdf(a1) - m_run * disc * normal_cdf(a2)
        - x * k * (normal_cdf(-a1) - disc * (m_run / x).powf(2.0 * r / (sigma * sigma)) * normal_cdf(-a3)))
}

/// Black–Scholes European call.
pub fn black_scholes_call(s: f64, k: f64, r: f64, sigma: f64, horizon: f64) -> f64 {
    let disc = (-r * horizon).exp();
    if k <= 0.0 {
        return s - k * disc;
    }
    if sigma * horizon.sqrt() < 1e-300 {
        return (s - k * disc).max(0.0);
    }
    let st = sigma * horizon.sqrt();
    let d1 = ((s / k).ln() + (r + 0.5 * sigma * sigma) * horizon) / st;
    s * normal_cdf(d1) - k * disc * normal_cdf(d1 - st)
}

/// Call bound under the no-good-deal driver `sign * kappa |z| - r y`.
///
/// For a call `Z = sigma X u_x >= 0`, so the driver is linear in `z` and the
/// bound is a call discounted at `r` on a stock drifting at `r + sign sigma kappa`.
pub fn ngd_call_bound(s: f64, k: f64, r: f64, sigma: f64, kappa: f64, sign: f64, horizon: f64) -> f64 {
    let shift = sign * sigma * kappa * horizon;
    shift.exp() * black_scholes_call(s, k * (-shift).exp(), r, sigma, horizon)
}

/// Trapezoidal `int_0^t sum_i w^i ds` over the points of `prefix`.
pub fn running_sum_integral(prefix: PathRef<'_>) -> f64 {
    let sum = |i: usize| prefix.point(i).iter().sum::<f64>();
    (1..prefix.n_points())
        .map(|i| 0.5 * (sum(i - 1) + sum(i)) * (prefix.times[i] - prefix.times[i - 1]))
        .sum()
}

/// Value process of the `f = 0`, `g = (int_0^T sum X ds)^2` problem along Brownian paths.
///
/// `prefix` is the path on `[0, t]` with `t` its last time.
pub fn highdim_solution(prefix: PathRef<'_>, horizon: f64) -> Result<f64> {
    if prefix.n_points() == 0 {
        return Err(Error::arg("empty path prefix"));
    }
    let d = prefix.dim as f64;
    let t = *prefix.times.last().unwrap();
    let rem = horizon - t;
    let integral = running_sum_integral(prefix);
    let last: f64 = prefix.point(prefix.n_points() - 1).iter().sum();
    Ok(integral * integral + last * last * rem * rem + 2.0 * rem * last * integral + d / 3.0 * rem.powi(3))
}

/// `cos(x + xbar)`, the value process of the nonlinear example.
pub fn nonlinear_solution(x: f64, xbar: f64) -> f64 {
    (x + xbar).cos()
}
