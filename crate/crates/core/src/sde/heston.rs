use super::brownian::BrownianBatch;
use super::grid::PathGrid;
use crate::error::{Error, Result};

/// Heston model under the pricing measure.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HestonParams {
    pub s0: f64,
    pub v0: f64,
    pub r: f64,
    pub kappa: f64,
    pub theta: f64,
    pub sigma: f64,
    pub rho: f64,
    /// Volatility risk premium; the implicit step uses `kappa + sigma * lambda`.
    pub lambda: f64,
}

/// Negative variance beyond this is treated as a scheme failure.
pub const VARIANCE_TOLERANCE: f64 = 1e-10;

impl HestonParams {
    pub fn feller_satisfied(&self) -> bool {
        2.0 * self.kappa * self.theta >= self.sigma * self.sigma
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.v0 > 0.0) || !(self.s0 > 0.0) {
            return Err(Error::arg("Heston needs s0 > 0 and v0 > 0"));
        }
        if !(self.rho.abs() < 1.0) {
            return Err(Error::arg(format!("correlation must satisfy |rho| < 1, got {}", self.rho)));
        }
        if self.sigma < 0.0 || self.theta < 0.0 {
            return Err(Error::arg("Heston needs sigma >= 0 and theta >= 0"));
        }
        Ok(())
    }
}

/// Log-price Euler plus implicit Milstein variance; state is `(S, V)`.
///
/// `V` is driven by `dW^1`, and `log S` by `rho dW^1 + sqrt(1 - rho^2) dW^2`.
pub fn simulate_heston(p: &HestonParams, bm: &BrownianBatch) -> Result<PathGrid> {
    p.validate()?;
    if bm.d != 2 {
        return Err(Error::arg(format!("Heston needs 2 noise dimensions, got {}", bm.d)));
    }
    if !p.feller_satisfied() {
        log::warn!(
            "Feller condition violated: 2*kappa*theta = {} < sigma^2 = {}",
            2.0 * p.kappa * p.theta,
            p.sigma * p.sigma
        );
    }
    let n = bm.n_steps;
    let dt = bm.dt();
    let kt = p.kappa + p.sigma * p.lambda;
    let rho_c = (1.0 - p.rho * p.rho).sqrt();
    let denom = 1.0 + kt * dt;
    let mut values = vec![0.0; bm.n_paths * (n + 1) * 2];
    for (j, path) in values.chunks_mut((n + 1) * 2).enumerate() {
        let (mut log_s, mut v) = (p.s0.ln(), p.v0);
        path[0] = p.s0;
        path[1] = p.v0;
        for i in 0..n {
            let dw = bm.step(j, i);
            let sv = v.max(0.0).sqrt();
            log_s += (p.r - 0.5 * v.max(0.0)) * dt + sv * (p.rho * dw[0] + rho_c * dw[1]);
            v = (v + p.kappa * p.theta * dt + p.sigma * sv * dw[0] + 0.25 * p.sigma * p.sigma * (dw[0] * dw[0] - dt))
                / denom;
            if v < -VARIANCE_TOLERANCE || !v.is_finite() || !log_s.is_finite() {
                return Err(Error::SchemeFailure { step: i + 1, reason: format!("variance {v} on path {j}") });
            }
            path[(i + 1) * 2] = log_s.exp();
            path[(i + 1) * 2 + 1] = v;
        }
    }
    PathGrid::new(PathGrid::uniform_times(n, bm.horizon), values, bm.n_paths, 2)
}
