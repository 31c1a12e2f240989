//! The deep signature FBSDE solver.

mod dataset;
mod presets;
mod problem;
mod rollout;
mod train;

pub use dataset::{Dataset, FeatureSpec, InputKind, MiniBatch, Z0Mode};
pub use presets::preset;
pub use problem::{
    driver_heston, driver_lookback, driver_ngd, driver_nonlinear, gbm_ngd, heston_eta, heston_ua, highdim, lookback,
    min_mu_z, nonlinear, nonlinear_f0, problem_by_name, terminal_highdim, Driver, FBSDEProblem, OracleFn,
    ProblemParams, Sign, Terminal, CHI2_3_95, PROBLEM_NAMES,
};
pub use rollout::{
    batch_loss, dataset_loss, loss_and_grad, rollout, terminal_loss, Parameters, RolloutSettings, RolloutState,
    PARAM_NAMES,
};
pub use train::{initial_parameters, simulate_data, train, train_on, Data, TrainConfig, TrainReport};
