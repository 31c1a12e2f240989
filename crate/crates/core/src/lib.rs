//! Deep signature / log-signature FBSDE solver.
//!
//! Forward paths are simulated on a fine mesh, summarised segment by segment
//! into truncated (log-)signatures, and fed to an LSTM that parameterises the
//! `Z` process of a backward SDE. The backward process `Y` is rolled forward
//! with an Euler step per segment and `(Y0, network)` is trained by
//! minimising the squared terminal mismatch.
//!
//! Modules:
//! - [`sig`]: truncated tensor algebra, signatures, log-signatures, Lyndon basis.
//! - [`sde`]: seeded Brownian increments, Euler and Heston path simulation.
//! - [`nn`]: reverse-mode tape, LSTM, Adam/SGD, checkpoints.
//! - [`bsde`]: benchmark problems, drivers, rollout, loss and training loop.
//! - [`oracles`]: closed forms, brute-force signatures and Monte Carlo pricers.

pub mod bsde;
pub mod error;
pub mod nn;
pub mod oracles;
pub mod sde;
pub mod sig;

pub use error::{Error, Result};
