//! Default problem parameters and training settings per benchmark.

use super::problem::{ProblemParams, PROBLEM_NAMES};
use super::train::TrainConfig;
use crate::error::{Error, Result};

/// Parameters and training settings for a registry name.
pub fn preset(name: &str) -> Result<(ProblemParams, TrainConfig)> {
    let base = ProblemParams::default();
    let cfg = TrainConfig::default();
    match name {
        "lookback" => Ok((base, cfg)),
        "gbm_ngd" => Ok((
            ProblemParams { x0: 100.0, r: 0.05, sigma: 0.2, kappa: 0.05, strike: 80.0, ..base },
            TrainConfig { iterations: 3000, y0_lr: Some(1e-2), z_scale: 20.0, input_scale: Some(vec![0.01]), ..cfg },
        )),
        "heston_ua" => Ok((
            ProblemParams { strike: 100.0, ..base },
            TrainConfig {
                n_steps: 500,
                iterations: 3000,
                y0_lr: Some(1e-2),
                z_scale: 10.0,
                input_scale: Some(vec![0.01, 10.0]),
                ..cfg
            },
        )),
        "highdim" => Ok((
            ProblemParams { dim: 20, ..base },
            TrainConfig { n_paths: 200_000, n_steps: 100, sig_order: 2, use_log: true, iterations: 3000, ..cfg },
        )),
        "nonlinear" => Ok((base, TrainConfig { n_steps: 100, n_segments: 20, ..cfg })),
        other => Err(Error::arg(format!("no preset for '{other}' (known: {})", PROBLEM_NAMES.join(", ")))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bsde::problem_by_name;

    #[test]
    fn every_problem_has_a_valid_preset() {
        for name in PROBLEM_NAMES {
            let (p, cfg) = preset(name).unwrap();
            cfg.validate().unwrap();
            let prob = problem_by_name(name, &p).unwrap();
            assert_eq!(prob.horizon, 1.0);
            assert_eq!(cfg.input_scale.as_ref().map_or(prob.state_dim(), |s| s.len()), prob.state_dim());
        }
        assert!(preset("asian").is_err());
    }
}
