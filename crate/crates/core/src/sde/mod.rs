//! Brownian increments and forward-path simulation.

mod brownian;
pub mod dump;
mod euler;
mod grid;
mod heston;
pub mod rng;

pub use brownian::{gen_brownian, gen_brownian_range, BrownianBatch};
pub use euler::{simulate_euler, DiffusionFn, DriftFn, SdeSpec};
pub use grid::{PathGrid, PathRef};
pub use heston::{simulate_heston, HestonParams, VARIANCE_TOLERANCE};

use crate::error::{Error, Result};
use crate::sig::SegmentSpec;

/// Forward dynamics and the scheme used to simulate them.
#[derive(Clone, Debug)]
pub enum ForwardModel {
    Euler(SdeSpec),
    Heston(HestonParams),
}

impl ForwardModel {
    pub fn state_dim(&self) -> usize {
        match self {
            ForwardModel::Euler(s) => s.d_state,
            ForwardModel::Heston(_) => 2,
        }
    }

    pub fn noise_dim(&self) -> usize {
        match self {
            ForwardModel::Euler(s) => s.d_noise,
            ForwardModel::Heston(_) => 2,
        }
    }

    pub fn x0(&self) -> Vec<f64> {
        match self {
            ForwardModel::Euler(s) => s.x0.clone(),
            ForwardModel::Heston(p) => vec![p.s0, p.v0],
        }
    }

    pub fn simulate(&self, bm: &BrownianBatch) -> Result<PathGrid> {
        match self {
            ForwardModel::Euler(s) => simulate_euler(s, bm),
            ForwardModel::Heston(p) => simulate_heston(p, bm),
        }
    }
}

/// Keeps every `k`-th mesh point (the segment endpoints `u_i`).
pub fn coarsen(path: &PathGrid, spec: &SegmentSpec) -> Result<PathGrid> {
    if path.n_steps() != spec.n {
        return Err(Error::arg(format!("path has {} steps, segment spec has n={}", path.n_steps(), spec.n)));
    }
    if spec.n % spec.k != 0 {
        return Err(Error::arg(format!("k={} does not divide n={}", spec.k, spec.n)));
    }
    let d = path.dim();
    let idx: Vec<usize> = (0..=spec.ntilde()).map(|i| i * spec.k).collect();
    let times = idx.iter().map(|&i| path.times()[i]).collect();
    let mut values = Vec::with_capacity(path.n_paths() * idx.len() * d);
    for j in 0..path.n_paths() {
        for &i in &idx {
            values.extend_from_slice(path.point(j, i));
        }
    }
    Ok(PathGrid::new(times, values, path.n_paths(), d)?.with_augmented_flag(path.is_time_augmented()))
}
