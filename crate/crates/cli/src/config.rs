//! Experiment configuration: one TOML file per experiment, layered over a preset.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sigfbsde::bsde::{preset, problem_by_name, FBSDEProblem, ProblemParams, TrainConfig, Z0Mode, PROBLEM_NAMES};
use sigfbsde::sde::HestonParams;
use sigfbsde::sig::FeatureScaling;

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: String,
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Shared simulation cache; entries are keyed by a hash of the simulation settings.
    pub cache_dir: PathBuf,
    pub params: ParamsSection,
    pub segments: SegmentsSection,
    pub signature: SignatureSection,
    pub train: TrainSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    pub x0: f64,
    pub r: f64,
    pub sigma: f64,
    pub kappa: f64,
    pub strike: f64,
    /// `1` for the ask (upper) price, `-1` for the bid.
    pub sign: f64,
    pub dim: usize,
    pub mu_lo: f64,
    pub mu_hi: f64,
    pub chi: f64,
    pub sigma_diag: [f64; 3],
    pub heston: HestonSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HestonSection {
    pub s0: f64,
    pub v0: f64,
    pub r: f64,
    pub kappa: f64,
    pub theta: f64,
    pub sigma: f64,
    pub rho: f64,
    pub lambda: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentsSection {
    /// Fine steps.
    pub n: usize,
    /// Coarse segments.
    pub ntilde: usize,
    /// Fine steps per segment; must equal `n / ntilde` when given.
    #[serde(default, with = "unset")]
    pub k: Option<usize>,
    pub horizon: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scaling {
    None,
    FactorialRoot,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Z0 {
    Free,
    Network,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignatureSection {
    pub order: usize,
    pub use_log: bool,
    pub scaling: Scaling,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub n_paths: usize,
    pub n_test: usize,
    pub batch_size: usize,
    pub iterations: usize,
    pub loss_threshold: f64,
    pub lr: f64,
    #[serde(default, with = "unset")]
    pub y0_lr: Option<f64>,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub decay_every: usize,
    pub decay_factor: f64,
    pub hidden_dim: usize,
    pub z0_mode: Z0,
    pub z_scale: f64,
    #[serde(default, with = "unset")]
    pub input_scale: Option<Vec<f64>>,
    pub vanilla: bool,
    pub antithetic: bool,
    pub chunk: usize,
}

/// Command-line overrides applied after the file is read.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub vanilla: bool,
    pub log_sig: bool,
}

impl ExperimentConfig {
    /// The built-in settings for a registry name.
    pub fn preset(name: &str) -> Result<Self, CliError> {
        let (p, t) = preset(name).map_err(CliError::from)?;
        let h = p.heston;
        Ok(ExperimentConfig {
            problem: name.to_string(),
            seed: t.seed,
            out_dir: PathBuf::from("runs").join(name),
            cache_dir: PathBuf::from("cache"),
            params: ParamsSection {
                x0: p.x0,
                r: p.r,
                sigma: p.sigma,
                kappa: p.kappa,
                strike: p.strike,
                sign: p.sign,
                dim: p.dim,
                mu_lo: p.mu_lo,
                mu_hi: p.mu_hi,
                chi: p.chi,
                sigma_diag: p.sigma_diag,
                heston: HestonSection {
                    s0: h.s0,
                    v0: h.v0,
                    r: h.r,
                    kappa: h.kappa,
                    theta: h.theta,
                    sigma: h.sigma,
                    rho: h.rho,
                    lambda: h.lambda,
                },
            },
            segments: SegmentsSection { n: t.n_steps, ntilde: t.n_segments, k: None, horizon: p.horizon },
            signature: SignatureSection {
                order: t.sig_order,
                use_log: t.use_log,
                scaling: match t.feature_scaling {
                    FeatureScaling::None => Scaling::None,
                    FeatureScaling::FactorialRoot => Scaling::FactorialRoot,
                },
            },
            train: TrainSection {
                n_paths: t.n_paths,
                n_test: t.n_test,
                batch_size: t.batch_size,
                iterations: t.iterations,
                loss_threshold: t.loss_threshold,
                lr: t.lr,
                y0_lr: t.y0_lr,
                beta1: t.beta1,
                beta2: t.beta2,
                adam_eps: t.adam_eps,
                decay_every: t.decay_every,
                decay_factor: t.decay_factor,
                hidden_dim: t.hidden_dim,
                z0_mode: match t.z0_mode {
                    Z0Mode::Free => Z0::Free,
                    Z0Mode::Network => Z0::Network,
                },
                z_scale: t.z_scale,
                input_scale: t.input_scale,
                vanilla: t.vanilla,
                antithetic: t.antithetic,
                chunk: t.chunk,
            },
        })
    }

    /// Parses a config; keys that are left out take the problem's preset values.
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let user: toml::Table = text.parse().map_err(|e| CliError::Validation(format!("config: {e}")))?;
        let name = match user.get("problem") {
            Some(toml::Value::String(s)) => s.clone(),
            Some(_) => return Err(CliError::Validation("config: 'problem' must be a string".into())),
            None => return Err(CliError::Validation("config: missing 'problem'".into())),
        };
        if !PROBLEM_NAMES.contains(&name.as_str()) {
            return Err(CliError::Validation(format!("unknown problem '{name}' (known: {})", PROBLEM_NAMES.join(", "))));
        }
        let base = toml::Table::try_from(Self::preset(&name)?).map_err(|e| CliError::Validation(e.to_string()))?;
        let merged = merge(base, user);
        let cfg: Self = merged.try_into().map_err(|e: toml::de::Error| CliError::Validation(format!("config: {e}")))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Validation(e.to_string()))
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(d) = &o.out_dir {
            self.out_dir = d.clone();
        }
        if o.vanilla {
            self.train.vanilla = true;
        }
        if o.log_sig {
            self.signature.use_log = true;
        }
    }

    pub fn problem_params(&self) -> ProblemParams {
        let p = &self.params;
        let h = &p.heston;
        ProblemParams {
            x0: p.x0,
            r: p.r,
            sigma: p.sigma,
            horizon: self.segments.horizon,
            kappa: p.kappa,
            strike: p.strike,
            sign: p.sign,
            dim: p.dim,
            mu_lo: p.mu_lo,
            mu_hi: p.mu_hi,
            heston: HestonParams {
                s0: h.s0,
                v0: h.v0,
                r: h.r,
                kappa: h.kappa,
                theta: h.theta,
                sigma: h.sigma,
                rho: h.rho,
                lambda: h.lambda,
            },
            chi: p.chi,
            sigma_diag: p.sigma_diag,
        }
    }

    pub fn build_problem(&self) -> Result<FBSDEProblem, CliError> {
        if !(self.segments.horizon > 0.0 && self.segments.horizon.is_finite()) {
            return Err(CliError::Validation(format!("horizon must be positive, got {}", self.segments.horizon)));
        }
        problem_by_name(&self.problem, &self.problem_params()).map_err(CliError::from)
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            seed: self.seed,
            n_paths: t.n_paths,
            n_test: t.n_test,
            batch_size: t.batch_size,
            n_steps: self.segments.n,
            n_segments: self.segments.ntilde,
            sig_order: self.signature.order,
            use_log: self.signature.use_log,
            vanilla: t.vanilla,
            iterations: t.iterations,
            loss_threshold: t.loss_threshold,
            lr: t.lr,
            y0_lr: t.y0_lr,
            beta1: t.beta1,
            beta2: t.beta2,
            adam_eps: t.adam_eps,
            decay_every: t.decay_every,
            decay_factor: t.decay_factor,
            hidden_dim: t.hidden_dim,
            z0_mode: match t.z0_mode {
                Z0::Free => Z0Mode::Free,
                Z0::Network => Z0Mode::Network,
            },
            z_scale: t.z_scale,
            input_scale: t.input_scale.clone(),
            feature_scaling: match self.signature.scaling {
                Scaling::None => FeatureScaling::None,
                Scaling::FactorialRoot => FeatureScaling::FactorialRoot,
            },
            antithetic: t.antithetic,
            chunk: t.chunk,
        }
    }

    /// Full validation; every failure maps to exit code 2.
    pub fn validate(&self) -> Result<(), CliError> {
        let s = &self.segments;
        if !self.train.vanilla && (s.ntilde == 0 || s.n % s.ntilde != 0) {
            return Err(CliError::Validation(format!("ntilde={} does not divide n={}", s.ntilde, s.n)));
        }
        if let Some(k) = s.k {
            if !self.train.vanilla && k * s.ntilde != s.n {
                return Err(CliError::Validation(format!("k={k} times ntilde={} is not n={}", s.ntilde, s.n)));
            }
        }
        let problem = self.build_problem()?;
        let cfg = self.train_config();
        cfg.validate()?;
        if let Some(scale) = &cfg.input_scale {
            if scale.len() != problem.state_dim() {
                return Err(CliError::Validation(format!(
                    "input_scale has {} entries, problem state has {}",
                    scale.len(),
                    problem.state_dim()
                )));
            }
        }
        Ok(())
    }

    /// Segments actually used by the trainer (vanilla runs use one per fine step).
    pub fn effective_ntilde(&self) -> usize {
        if self.train.vanilla {
            self.segments.n
        } else {
            self.segments.ntilde
        }
    }

    /// Label used in report rows.
    pub fn method(&self) -> &'static str {
        if self.train.vanilla {
            "vanilla"
        } else if self.signature.use_log {
            "logsig"
        } else {
            "sig"
        }
    }
}

/// Recursively overlays `top` on `base`.
fn merge(mut base: toml::Table, top: toml::Table) -> toml::Table {
    for (k, v) in top {
        match (base.remove(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(t)) => {
                base.insert(k, toml::Value::Table(merge(b, t)));
            }
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
    base
}

/// Optional values are written as the string `"none"` rather than left out,
/// so that an explicit "unset" survives being layered over a preset.
mod unset {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr<T> {
        Value(T),
        Word(String),
    }

    pub fn serialize<T: Serialize, S: Serializer>(v: &Option<T>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(x) => x.serialize(s),
            None => s.serialize_str("none"),
        }
    }

    pub fn deserialize<'de, T: Deserialize<'de>, D: Deserializer<'de>>(d: D) -> Result<Option<T>, D::Error> {
        match Repr::<T>::deserialize(d)? {
            Repr::Value(x) => Ok(Some(x)),
            Repr::Word(w) if w == "none" => Ok(None),
            Repr::Word(w) => Err(serde::de::Error::custom(format!("expected a value or \"none\", got \"{w}\""))),
        }
    }
}
