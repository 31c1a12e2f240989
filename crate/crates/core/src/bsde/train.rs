//! The training loop: sample a batch, roll out, score `g`, step `(Y_0, Z_0, theta)`.

use std::time::Instant;

use rand::seq::index::sample;

use super::dataset::{Dataset, FeatureSpec, Z0Mode};
use super::problem::FBSDEProblem;
use super::rollout::{dataset_loss, loss_and_grad, Parameters, RolloutSettings};
use crate::error::{Error, Result};
use crate::nn::{LstmParams, Matrix, OptimState};
use crate::sde::rng::{domain, Stream};
use crate::sig::{FeatureScaling, SegmentSpec};

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub seed: u64,
    /// Training paths `N-hat`.
    pub n_paths: usize,
    /// Held-out paths simulated after the training ones.
    pub n_test: usize,
    pub batch_size: usize,
    pub n_steps: usize,
    pub n_segments: usize,
    pub sig_order: usize,
    pub use_log: bool,
    /// Raw values on every fine step instead of segment signatures.
    pub vanilla: bool,
    pub iterations: usize,
    /// Stop once the batch loss is at or below this.
    pub loss_threshold: f64,
    pub lr: f64,
    /// Learning rate for `Y_0`; defaults to `lr`.
    pub y0_lr: Option<f64>,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub decay_every: usize,
    pub decay_factor: f64,
    pub hidden_dim: usize,
    pub z0_mode: Z0Mode,
    pub z_scale: f64,
    /// Per-coordinate multiplier on `X` before features are built.
    pub input_scale: Option<Vec<f64>>,
    pub feature_scaling: FeatureScaling,
    pub antithetic: bool,
    /// Paths simulated per chunk while building datasets.
    pub chunk: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            seed: 42,
            n_paths: 100_000,
            n_test: 1000,
            batch_size: 1000,
            n_steps: 1000,
            n_segments: 5,
            sig_order: 3,
            use_log: false,
            vanilla: false,
            iterations: 5000,
            loss_threshold: 0.0,
            lr: 1e-3,
            y0_lr: None,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            decay_every: 2000,
            decay_factor: 0.5,
            hidden_dim: 32,
            z0_mode: Z0Mode::Free,
            z_scale: 1.0,
            input_scale: None,
            feature_scaling: FeatureScaling::None,
            antithetic: false,
            chunk: 2000,
        }
    }
}

impl TrainConfig {
    /// Fine steps per segment.
    pub fn k(&self) -> usize {
        if self.vanilla {
            1
        } else {
            self.n_steps / self.n_segments.max(1)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Argument(m));
        if self.n_steps == 0 || self.n_segments == 0 {
            return bad("n_steps and n_segments must be positive".into());
        }
        if !self.vanilla && self.n_steps % self.n_segments != 0 {
            return bad(format!("n_segments={} does not divide n_steps={}", self.n_segments, self.n_steps));
        }
        if self.batch_size == 0 || self.batch_size > self.n_paths {
            return bad(format!("batch size {} must be in 1..={}", self.batch_size, self.n_paths));
        }
        if self.iterations == 0 {
            return bad("iterations must be positive".into());
        }
        if !(self.loss_threshold.is_finite() && self.loss_threshold >= 0.0) {
            return bad(format!("loss threshold must be finite and >= 0, got {}", self.loss_threshold));
        }
        let rates = [self.lr, self.y0_lr.unwrap_or(self.lr)];
        if rates.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return bad("learning rates must be positive".into());
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.adam_eps > 0.0) {
            return bad("Adam needs beta in [0, 1) and eps > 0".into());
        }
        if self.decay_every == 0 || !(self.decay_factor > 0.0 && self.decay_factor <= 1.0) {
            return bad("decay_every must be positive and decay_factor in (0, 1]".into());
        }
        if self.hidden_dim == 0 || self.sig_order == 0 {
            return bad("hidden_dim and sig_order must be positive".into());
        }
        if !(self.z_scale.is_finite() && self.z_scale != 0.0) {
            return bad("z_scale must be finite and non-zero".into());
        }
        if self.antithetic && self.n_paths % 2 == 1 {
            return bad("antithetic sampling needs an even number of training paths".into());
        }
        Ok(())
    }

    /// Learning-rate multiplier at iteration `it` (0-based).
    pub fn decay(&self, it: usize) -> f64 {
        self.decay_factor.powi((it / self.decay_every) as i32)
    }

    pub fn feature_spec(&self, problem: &FBSDEProblem) -> Result<FeatureSpec> {
        let d = problem.state_dim();
        let spec = if self.vanilla {
            FeatureSpec::vanilla(self.n_steps, problem.horizon, d, self.z0_mode)?
        } else {
            let seg = SegmentSpec::with_segments(self.n_steps, self.n_segments, problem.horizon)?;
            FeatureSpec::signature(seg, d, self.sig_order, self.use_log, self.feature_scaling, self.z0_mode)?
        };
        Ok(match &self.input_scale {
            Some(s) => spec.with_input_scale(s.clone()),
            None => spec,
        })
    }
}

/// Outcome of one training run.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    pub y0: f64,
    /// Batch loss at each iteration, before the update.
    pub losses: Vec<f64>,
    /// `Y_0` after each update.
    pub y0_trace: Vec<f64>,
    pub wall_ms: Vec<f64>,
    pub iterations: usize,
    /// Stopped on the loss threshold rather than the iteration cap.
    pub converged: bool,
    /// Initial `Y_0` (discounted sample mean of `g`).
    pub y0_init: f64,
    pub test_loss: Option<f64>,
    pub oracle: Option<f64>,
    pub params: Parameters,
}

impl TrainReport {
    pub fn abs_err(&self) -> Option<f64> {
        self.oracle.map(|o| (self.y0 - o).abs())
    }

    pub fn rel_err(&self) -> Option<f64> {
        self.oracle.map(|o| (self.y0 - o).abs() / o.abs())
    }

    pub fn mean_wall_ms(&self) -> f64 {
        self.wall_ms.iter().sum::<f64>() / self.wall_ms.len().max(1) as f64
    }

    /// Everything except timings agrees bit for bit.
    pub fn same_trajectory(&self, other: &TrainReport) -> bool {
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        self.y0.to_bits() == other.y0.to_bits()
            && bits(&self.losses) == bits(&other.losses)
            && bits(&self.y0_trace) == bits(&other.y0_trace)
            && self.params == other.params
            && self.test_loss.map(f64::to_bits) == other.test_loss.map(f64::to_bits)
    }
}

/// Training and held-out data for one configuration.
pub struct Data {
    pub train: Dataset,
    pub test: Option<Dataset>,
}

/// Simulates the training paths `0..N` and test paths `N..N + n_test`.
pub fn simulate_data(problem: &FBSDEProblem, cfg: &TrainConfig) -> Result<Data> {
    cfg.validate()?;
    let spec = cfg.feature_spec(problem)?;
    let train = Dataset::simulate(problem, &spec, cfg.seed, 0, cfg.n_paths, cfg.chunk, cfg.antithetic)?;
    let test = if cfg.n_test > 0 {
        Some(Dataset::simulate(problem, &spec, cfg.seed, cfg.n_paths, cfg.n_test, cfg.chunk, false)?)
    } else {
        None
    };
    Ok(Data { train, test })
}

/// Fresh parameters: seeded network, zero `Z_0`, `Y_0 = e^{-rT} mean(g)`.
pub fn initial_parameters(problem: &FBSDEProblem, cfg: &TrainConfig, train: &Dataset) -> Parameters {
    let y0 = (-problem.discount_rate * problem.horizon).exp() * train.mean_g();
    let net = LstmParams::init(train.width, cfg.hidden_dim, problem.noise_dim(), cfg.seed);
    Parameters::new(y0, problem.noise_dim(), net)
}

/// Simulates data and trains from scratch.
pub fn train(problem: &FBSDEProblem, cfg: &TrainConfig) -> Result<TrainReport> {
    let data = simulate_data(problem, cfg)?;
    let params = initial_parameters(problem, cfg, &data.train);
    train_on(problem, cfg, &data, params)
}

/// Trains `params` on pre-built data.
pub fn train_on(problem: &FBSDEProblem, cfg: &TrainConfig, data: &Data, mut params: Parameters) -> Result<TrainReport> {
    cfg.validate()?;
    let ds = &data.train;
    if cfg.batch_size > ds.n_paths {
        return Err(Error::arg(format!("batch size {} exceeds {} training paths", cfg.batch_size, ds.n_paths)));
    }
    if params.net.input_dim != ds.width || params.net.output_dim != ds.noise_dim {
        return Err(Error::arg("network shape does not match the dataset"));
    }
    let settings = RolloutSettings::for_dataset(ds, cfg.z_scale);
    let y0_init = params.y0();
    let y0_lr = cfg.y0_lr.unwrap_or(cfg.lr);
    let blocks = params.blocks();
    let mut opt_y0 = OptimState::adam(y0_lr, cfg.beta1, cfg.beta2, cfg.adam_eps, &blocks[..1]);
    let mut opt_rest = OptimState::adam(cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps, &blocks[1..]);
    let all: Vec<usize> = (0..ds.n_paths).collect();
    let full = (cfg.batch_size == ds.n_paths).then(|| ds.batch(&all)).transpose()?;

    let (mut losses, mut trace, mut wall) = (Vec::new(), Vec::new(), Vec::new());
    let mut converged = false;
    for it in 0..cfg.iterations {
        let t0 = Instant::now();
        let sampled;
        let batch = match &full {
            Some(b) => b,
            None => {
                let mut rng = Stream::new(cfg.seed, domain::BATCH, it as u64);
                let idx = sample(rng.rng_mut(), ds.n_paths, cfg.batch_size).into_vec();
                sampled = ds.batch(&idx)?;
                &sampled
            }
        };
        let diverged = |params: &Parameters| Error::TrainingDiverged { iteration: it, last_y0: params.y0() };
        let (loss, grads) = match loss_and_grad(problem, batch, &params, &settings) {
            Ok(v) => v,
            Err(Error::RolloutDiverged { .. }) => return Err(diverged(&params)),
            Err(e) => return Err(e),
        };
        if !loss.is_finite() || grads.iter().any(|g| !g.is_finite()) {
            return Err(diverged(&params));
        }
        let scale = cfg.decay(it);
        opt_y0.lr = y0_lr * scale;
        opt_rest.lr = cfg.lr * scale;
        let gref: Vec<&Matrix> = grads.iter().collect();
        let mut pm = params.blocks_mut();
        let (head, tail) = pm.split_at_mut(1);
        opt_y0.adam_step(head, &gref[..1])?;
        opt_rest.adam_step(tail, &gref[1..])?;
        losses.push(loss);
        trace.push(params.y0());
        wall.push(t0.elapsed().as_secs_f64() * 1e3);
        if loss <= cfg.loss_threshold {
            converged = true;
            break;
        }
    }
    let test_loss = data.test.as_ref().map(|t| dataset_loss(problem, t, &params, cfg.z_scale, 1000)).transpose()?;
    let oracle = problem.oracle_value().transpose()?;
    Ok(TrainReport {
        y0: params.y0(),
        iterations: losses.len(),
        losses,
        y0_trace: trace,
        wall_ms: wall,
        converged,
        y0_init,
        test_loss,
        oracle,
        params,
    })
}
