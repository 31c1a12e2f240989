use std::sync::Arc;

use crate::error::{Error, Result};
use crate::nn::{Tape, Var};
use crate::oracles::{lookback_closed_form, ngd_call_bound, running_sum_integral};
use crate::sde::{ForwardModel, HestonParams, PathRef, SdeSpec};

/// `+1` for the ask (upper) bound, `-1` for the bid.
pub type Sign = f64;

/// `sign * kappa * |z| - r y`.
pub fn driver_ngd(y: f64, z: &[f64], kappa: f64, r: f64, sign: Sign) -> f64 {
    sign * kappa * z.iter().map(|x| x * x).sum::<f64>().sqrt() - r * y
}

/// `-r y`: the generator of `dY = rY dt + Z dW` written as `Y_t = g + int f - int Z dW`.
pub fn driver_lookback(y: f64, r: f64) -> f64 {
    -r * y
}

/// Sensitivity vector of the ambiguity driver w.r.t. `(r, kappa, kappa theta)`.
pub fn heston_eta(v: f64, y: f64, z: [f64; 2], sigma: f64, rho: f64) -> Result<[f64; 3]> {
    if !(v > 0.0) {
        return Err(Error::Domain(format!("Heston driver needs v > 0, got {v}")));
    }
    if !(rho * rho < 1.0) || !(sigma > 0.0) {
        return Err(Error::Domain("Heston driver needs |rho| < 1 and sigma > 0".into()));
    }
    let sv = v.sqrt();
    let rc = (1.0 - rho * rho).sqrt();
    Ok([
        z[1] / (rc * sv) - y,
        -z[0] * sv / sigma + rho * z[1] * sv / (sigma * rc),
        z[0] / (sigma * sv) - rho * z[1] / (sigma * rc * sv),
    ])
}

/// `sign * sqrt(chi * eta^T Sigma eta) - r y` with diagonal `Sigma`.
pub fn driver_heston(
    v: f64,
    y: f64,
    z: [f64; 2],
    chi: f64,
    sigma_diag: [f64; 3],
    params: &HestonParams,
    sign: Sign,
) -> Result<f64> {
    let eta = heston_eta(v, y, z, params.sigma, params.rho)?;
    let q: f64 = eta.iter().zip(&sigma_diag).map(|(e, s)| s * e * e).sum();
    Ok(sign * (chi * q).sqrt() - params.r * y)
}

/// `min_{mu in [lo, hi]} mu z`.
pub fn min_mu_z(z: f64, mu_lo: f64, mu_hi: f64) -> f64 {
    if z >= 0.0 {
        mu_lo * z
    } else {
        mu_hi * z
    }
}

/// The state-only part `f0(x, xbar)` of the nonlinear generator.
pub fn nonlinear_f0(x: f64, xbar: f64, mu_lo: f64, mu_hi: f64) -> f64 {
    let s = x + xbar;
    let sn = s.sin();
    sn.max(0.0) * (mu_hi + x) + sn.min(0.0) * (mu_lo + x) + 0.5 * s.cos()
}

/// The nonlinear example's generator in its displayed form, `-(min mu z + f0)`.
///
/// The solver registry uses the negation, which is the sign under which
/// `Y = cos(X + int X)` solves `Y_t = g + int f - int Z dW`.
pub fn driver_nonlinear(x: f64, xbar: f64, _y: f64, z: f64, mu_lo: f64, mu_hi: f64) -> f64 {
    -(min_mu_z(z, mu_lo, mu_hi) + nonlinear_f0(x, xbar, mu_lo, mu_hi))
}

/// `(int_0^T sum_i X^i ds)^2` with the trapezoidal rule on the path mesh.
pub fn terminal_highdim(path: PathRef<'_>) -> f64 {
    let i = running_sum_integral(path);
    i * i
}

/// Generator `f(t, X, y, z)` of the backward equation.
#[derive(Clone, Debug, PartialEq)]
pub enum Driver {
    Zero,
    /// `-r y`
    Linear { r: f64 },
    /// `sign * kappa |z| - r y`
    Ngd { kappa: f64, r: f64, sign: Sign },
    /// Heston ambiguity bound; state column is `V` at the left endpoint.
    Heston { chi: f64, sigma_diag: [f64; 3], params: HestonParams, sign: Sign },
    /// `min mu z + f0(x, xbar)`; state column is `f0` at the left endpoint.
    Nonlinear { mu_lo: f64, mu_hi: f64 },
}

/// Coefficients of `eta` in `(z1, z2)` that depend only on `V`.
pub(crate) const HESTON_STATE_COLS: usize = 5;

impl Driver {
    /// Width of the per-segment state the driver reads.
    pub fn state_width(&self) -> usize {
        match self {
            Driver::Heston { .. } => HESTON_STATE_COLS,
            Driver::Nonlinear { .. } => 1,
            _ => 0,
        }
    }

    /// Fills the driver state for the left endpoint `x` (with running integrals `xbar`).
    pub(crate) fn write_state(&self, x: &[f64], xbar: &[f64], out: &mut [f64]) -> Result<()> {
        match self {
            Driver::Heston { params, .. } => {
                let v = x[1];
                if !(v > 0.0) {
                    return Err(Error::Domain(format!("Heston driver needs v > 0, got {v}")));
                }
                let (sv, rc, s, rho) = (v.sqrt(), (1.0 - params.rho * params.rho).sqrt(), params.sigma, params.rho);
                // eta1 = a z2 - y; eta2 = b z1 + c z2; eta3 = d z1 + e z2
                out.copy_from_slice(&[
                    1.0 / (rc * sv),
                    -sv / s,
                    rho * sv / (s * rc),
                    1.0 / (s * sv),
                    -rho / (s * rc * sv),
                ]);
            }
            Driver::Nonlinear { mu_lo, mu_hi } => out[0] = nonlinear_f0(x[0], xbar[0], *mu_lo, *mu_hi),
            _ => {}
        }
        Ok(())
    }

    /// Scalar evaluation from the stored state, used to cross-check the tape.
    pub fn eval_from_state(&self, y: f64, z: &[f64], state: &[f64]) -> f64 {
        match self {
            Driver::Zero => 0.0,
            Driver::Linear { r } => -r * y,
            Driver::Ngd { kappa, r, sign } => driver_ngd(y, z, *kappa, *r, *sign),
            Driver::Heston { chi, sigma_diag, params, sign } => {
                let eta = [state[0] * z[1] - y, state[1] * z[0] + state[2] * z[1], state[3] * z[0] + state[4] * z[1]];
                let q: f64 = eta.iter().zip(sigma_diag).map(|(e, s)| s * e * e).sum();
                sign * (chi * q).sqrt() - params.r * y
            }
            Driver::Nonlinear { mu_lo, mu_hi } => min_mu_z(z[0], *mu_lo, *mu_hi) + state[0],
        }
    }

    /// Batched driver on the tape; `y` is `B x 1`, `z` is `B x d`, `state` is `B x state_width`.
    pub fn on_tape(&self, tape: &mut Tape, y: Var, z: Var, state: Option<Var>) -> Result<Var> {
        match self {
            Driver::Zero => Ok(tape.scale(y, 0.0)),
            Driver::Linear { r } => Ok(tape.scale(y, -r)),
            Driver::Ngd { kappa, r, sign } => {
                let n = tape.row_norm(z);
                let a = tape.scale(n, sign * kappa);
                let b = tape.scale(y, -r);
                tape.add(a, b)
            }
            Driver::Heston { chi, sigma_diag, params, sign } => {
                let st = state.ok_or_else(|| Error::arg("Heston driver needs state"))?;
                let col = |t: &mut Tape, v: Var, j: usize| t.slice_cols(v, j, j + 1);
                let (z1, z2) = (col(tape, z, 0)?, col(tape, z, 1)?);
                let c: Vec<Var> = (0..HESTON_STATE_COLS).map(|j| col(tape, st, j)).collect::<Result<_>>()?;
                let t1 = tape.mul(c[0], z2)?;
                let e1 = tape.sub(t1, y)?;
                let (t2a, t2b) = (tape.mul(c[1], z1)?, tape.mul(c[2], z2)?);
                let e2 = tape.add(t2a, t2b)?;
                let (t3a, t3b) = (tape.mul(c[3], z1)?, tape.mul(c[4], z2)?);
                let e3 = tape.add(t3a, t3b)?;
                let mut q: Option<Var> = None;
                for (e, s) in [e1, e2, e3].into_iter().zip(sigma_diag) {
                    let sq = tape.square(e);
                    let w = tape.scale(sq, chi * s);
                    q = Some(match q {
                        None => w,
                        Some(acc) => tape.add(acc, w)?,
                    });
                }
                let root = tape.sqrt(q.unwrap());
                let a = tape.scale(root, *sign);
                let b = tape.scale(y, -params.r);
                tape.add(a, b)
            }
            Driver::Nonlinear { mu_lo, mu_hi } => {
                let st = state.ok_or_else(|| Error::arg("nonlinear driver needs state"))?;
                let pos = tape.relu(z);
                let negz = tape.scale(z, -1.0);
                let neg = tape.relu(negz);
                let a = tape.scale(pos, *mu_lo);
                let b = tape.scale(neg, -mu_hi);
                let m = tape.add(a, b)?;
                tape.add(m, st)
            }
        }
    }
}

/// Terminal functional `g`.
#[derive(Clone, Debug, PartialEq)]
pub enum Terminal {
    /// `X^1_T`
    Identity,
    /// `(X^1_T - K)^+`
    Call { strike: f64 },
    /// `X_T - min_t X_t` over the fine mesh.
    Lookback,
    /// `(int sum X ds)^2`
    HighdimSquare,
    /// `cos(X_T + int X ds)`
    CosRunning,
}

impl Terminal {
    pub fn is_markov(&self) -> bool {
        matches!(self, Terminal::Identity | Terminal::Call { .. })
    }

    /// `g` from the terminal state alone; only for Markov functionals.
    pub fn eval_state(&self, x_t: &[f64]) -> Result<f64> {
        match self {
            Terminal::Identity => Ok(x_t[0]),
            Terminal::Call { strike } => Ok((x_t[0] - strike).max(0.0)),
            _ => Err(Error::arg("terminal functional needs the whole path")),
        }
    }

    /// `g` from the fine path.
    pub fn eval_path(&self, path: PathRef<'_>) -> f64 {
        let last = path.point(path.n_points() - 1);
        match self {
            Terminal::Identity => last[0],
            Terminal::Call { strike } => (last[0] - strike).max(0.0),
            Terminal::Lookback => {
                let min = (0..path.n_points()).map(|i| path.point(i)[0]).fold(f64::INFINITY, f64::min);
                last[0] - min
            }
            Terminal::HighdimSquare => terminal_highdim(path),
            Terminal::CosRunning => {
                let xbar = running_sum_integral(path);
                (last[0] + xbar).cos()
            }
        }
    }
}

/// Closed-form reference value for `Y_0`, when one exists.
pub type OracleFn = Arc<dyn Fn() -> Result<f64> + Send + Sync>;

/// One benchmark: forward model, generator, terminal functional and horizon.
#[derive(Clone)]
pub struct FBSDEProblem {
    pub name: String,
    pub model: ForwardModel,
    pub driver: Driver,
    pub terminal: Terminal,
    pub horizon: f64,
    /// Selects the path functional route for `g` (and path prefixes for the driver).
    pub path_dependent: bool,
    /// Rate used to discount `g` for the `Y_0` warm start.
    pub discount_rate: f64,
    pub oracle: Option<OracleFn>,
}

impl std::fmt::Debug for FBSDEProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FBSDEProblem")
            .field("name", &self.name)
            .field("model", &self.model)
            .field("driver", &self.driver)
            .field("terminal", &self.terminal)
            .field("horizon", &self.horizon)
            .field("path_dependent", &self.path_dependent)
            .finish_non_exhaustive()
    }
}

impl FBSDEProblem {
    pub fn noise_dim(&self) -> usize {
        self.model.noise_dim()
    }

    pub fn state_dim(&self) -> usize {
        self.model.state_dim()
    }

    /// Value dimension; every shipped problem is scalar.
    pub fn d2(&self) -> usize {
        1
    }

    pub fn oracle_value(&self) -> Option<Result<f64>> {
        self.oracle.as_ref().map(|f| f())
    }

    /// `g` for one fine path, through the (M) or (NM) route.
    pub fn terminal_value(&self, path: PathRef<'_>) -> Result<f64> {
        if self.path_dependent {
            Ok(self.terminal.eval_path(path))
        } else {
            self.terminal.eval_state(path.point(path.n_points() - 1))
        }
    }
}

/// Numeric parameters shared by the problem registry.
#[derive(Clone, Debug, PartialEq)]
pub struct ProblemParams {
    pub x0: f64,
    pub r: f64,
    pub sigma: f64,
    pub horizon: f64,
    pub kappa: f64,
    pub strike: f64,
    pub sign: Sign,
    pub dim: usize,
    pub mu_lo: f64,
    pub mu_hi: f64,
    pub heston: HestonParams,
    pub chi: f64,
    pub sigma_diag: [f64; 3],
}

/// `chi^2_3(0.95)`.
pub const CHI2_3_95: f64 = 7.814_727_903_251_179;

impl Default for ProblemParams {
    fn default() -> Self {
        ProblemParams {
            x0: 1.0,
            r: 0.01,
            sigma: 1.0,
            horizon: 1.0,
            kappa: 0.05,
            strike: 80.0,
            sign: 1.0,
            dim: 20,
            mu_lo: 0.2,
            mu_hi: 0.3,
            heston: HestonParams {
                s0: 100.0,
                v0: 0.0457,
                r: 0.05,
                kappa: 5.070,
                theta: 0.0457,
                sigma: 0.48,
                rho: -0.767,
                lambda: 0.0,
            },
            chi: CHI2_3_95,
            sigma_diag: [2.5e-5, 0.25, 1e-4],
        }
    }
}

pub const PROBLEM_NAMES: [&str; 5] = ["gbm_ngd", "lookback", "heston_ua", "highdim", "nonlinear"];

/// GBM call under the no-good-deal bound at level `kappa`.
pub fn gbm_ngd(x0: f64, r: f64, sigma: f64, kappa: f64, strike: f64, sign: Sign, horizon: f64) -> FBSDEProblem {
    FBSDEProblem {
        name: "gbm_ngd".into(),
        model: ForwardModel::Euler(SdeSpec::gbm(x0, r, sigma)),
        driver: Driver::Ngd { kappa, r, sign },
        terminal: Terminal::Call { strike },
        horizon,
        path_dependent: false,
        discount_rate: r,
        oracle: Some(Arc::new(move || Ok(ngd_call_bound(x0, strike, r, sigma, kappa, sign, horizon)))),
    }
}

pub fn lookback(x0: f64, r: f64, sigma: f64, horizon: f64) -> FBSDEProblem {
    FBSDEProblem {
        name: "lookback".into(),
        model: ForwardModel::Euler(SdeSpec::gbm(x0, r, sigma)),
        driver: Driver::Linear { r },
        terminal: Terminal::Lookback,
        horizon,
        path_dependent: true,
        discount_rate: r,
        oracle: Some(Arc::new(move || lookback_closed_form(x0, x0, r, sigma, 0.0, horizon))),
    }
}

pub fn heston_ua(params: HestonParams, strike: f64, chi: f64, sigma_diag: [f64; 3], sign: Sign, horizon: f64) -> FBSDEProblem {
    FBSDEProblem {
        name: "heston_ua".into(),
        model: ForwardModel::Heston(params),
        driver: Driver::Heston { chi, sigma_diag, params, sign },
        terminal: Terminal::Call { strike },
        horizon,
        path_dependent: false,
        discount_rate: params.r,
        oracle: None,
    }
}

pub fn highdim(dim: usize, horizon: f64) -> FBSDEProblem {
    FBSDEProblem {
        name: "highdim".into(),
        model: ForwardModel::Euler(SdeSpec::brownian(vec![0.0; dim])),
        driver: Driver::Zero,
        terminal: Terminal::HighdimSquare,
        horizon,
        path_dependent: true,
        discount_rate: 0.0,
        oracle: Some(Arc::new(move || Ok(dim as f64 / 3.0 * horizon.powi(3)))),
    }
}

pub fn nonlinear(mu_lo: f64, mu_hi: f64, horizon: f64) -> FBSDEProblem {
    FBSDEProblem {
        name: "nonlinear".into(),
        model: ForwardModel::Euler(SdeSpec::brownian(vec![0.0])),
        driver: Driver::Nonlinear { mu_lo, mu_hi },
        terminal: Terminal::CosRunning,
        horizon,
        path_dependent: true,
        discount_rate: 0.0,
        oracle: Some(Arc::new(|| Ok(1.0))),
    }
}

/// Problem registry keyed by name.
pub fn problem_by_name(name: &str, p: &ProblemParams) -> Result<FBSDEProblem> {
    if !(p.sign == 1.0 || p.sign == -1.0) {
        return Err(Error::arg(format!("sign must be +1 or -1, got {}", p.sign)));
    }
    match name {
        "gbm_ngd" => Ok(gbm_ngd(p.x0, p.r, p.sigma, p.kappa, p.strike, p.sign, p.horizon)),
        "lookback" => Ok(lookback(p.x0, p.r, p.sigma, p.horizon)),
        "heston_ua" => {
            p.heston.validate()?;
            Ok(heston_ua(p.heston, p.strike, p.chi, p.sigma_diag, p.sign, p.horizon))
        }
        "highdim" => Ok(highdim(p.dim, p.horizon)),
        "nonlinear" => {
            if p.mu_lo > p.mu_hi {
                return Err(Error::arg("nonlinear problem needs mu_lo <= mu_hi"));
            }
            Ok(nonlinear(p.mu_lo, p.mu_hi, p.horizon))
        }
        other => Err(Error::arg(format!("unknown problem '{other}' (known: {})", PROBLEM_NAMES.join(", ")))),
    }
}
