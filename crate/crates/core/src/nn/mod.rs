//! Dense matrices, a reverse-mode tape, the LSTM network and optimizers.

pub mod checkpoint;
mod lstm;
mod matrix;
mod optim;
mod tape;

pub use lstm::{lstm_forward, LstmParams, LstmVars, BLOCK_NAMES};
pub use matrix::Matrix;
pub use optim::{sgd_step, OptimState};
pub use tape::{Gradients, Tape, Var};
