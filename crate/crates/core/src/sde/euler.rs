use std::sync::Arc;

use super::brownian::BrownianBatch;
use super::grid::PathGrid;
use crate::error::{Error, Result};

/// `(t, x, out)` writes a vector of length `d_state`.
pub type DriftFn = Arc<dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync>;
/// `(t, x, out)` writes a row-major `d_state x d_noise` matrix.
pub type DiffusionFn = Arc<dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync>;

/// Forward SDE `dX = b(t, X) dt + sigma(t, X) dW`.
#[derive(Clone)]
pub struct SdeSpec {
    pub d_state: usize,
    pub d_noise: usize,
    pub x0: Vec<f64>,
    pub drift: DriftFn,
    pub diffusion: DiffusionFn,
}

impl std::fmt::Debug for SdeSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SdeSpec")
            .field("d_state", &self.d_state)
            .field("d_noise", &self.d_noise)
            .field("x0", &self.x0)
            .finish_non_exhaustive()
    }
}

impl SdeSpec {
    pub fn new(x0: Vec<f64>, d_noise: usize, drift: DriftFn, diffusion: DiffusionFn) -> Self {
        SdeSpec { d_state: x0.len(), d_noise, x0, drift, diffusion }
    }

    /// One-dimensional GBM `dX = r X dt + sigma X dW`.
    pub fn gbm(x0: f64, r: f64, sigma: f64) -> Self {
        Self::new(
            vec![x0],
            1,
            Arc::new(move |_, x, out| out[0] = r * x[0]),
            Arc::new(move |_, x, out| out[0] = sigma * x[0]),
        )
    }

    /// `d`-dimensional Brownian motion started at `x0`.
    pub fn brownian(x0: Vec<f64>) -> Self {
        let d = x0.len();
        Self::new(
            x0,
            d,
            Arc::new(|_, _, out| out.iter_mut().for_each(|o| *o = 0.0)),
            Arc::new(move |_, _, out| {
                out.iter_mut().for_each(|o| *o = 0.0);
                for i in 0..d {
                    out[i * d + i] = 1.0;
                }
            }),
        )
    }
}

/// Euler–Maruyama on the mesh implied by `bm`.
pub fn simulate_euler(spec: &SdeSpec, bm: &BrownianBatch) -> Result<PathGrid> {
    if bm.d != spec.d_noise {
        return Err(Error::arg(format!("noise dimension {} but SDE expects {}", bm.d, spec.d_noise)));
    }
    if spec.x0.len() != spec.d_state {
        return Err(Error::arg("x0 length does not match d_state"));
    }
    let (ds, dn, n) = (spec.d_state, spec.d_noise, bm.n_steps);
    let times = PathGrid::uniform_times(n, bm.horizon);
    let dt = bm.dt();
    let mut values = vec![0.0; bm.n_paths * (n + 1) * ds];
    let mut b = vec![0.0; ds];
    let mut s = vec![0.0; ds * dn];
    for (j, path) in values.chunks_mut((n + 1) * ds).enumerate() {
        path[..ds].copy_from_slice(&spec.x0);
        for i in 0..n {
            let (head, tail) = path.split_at_mut((i + 1) * ds);
            let x = &head[i * ds..];
            let next = &mut tail[..ds];
            (spec.drift)(times[i], x, &mut b);
            (spec.diffusion)(times[i], x, &mut s);
            let dw = bm.step(j, i);
            for a in 0..ds {
                let noise: f64 = s[a * dn..(a + 1) * dn].iter().zip(dw).map(|(p, q)| p * q).sum();
                next[a] = x[a] + b[a] * dt + noise;
            }
            if next.iter().any(|v| !v.is_finite()) {
                return Err(Error::SimulationDiverged { step: i + 1 });
            }
        }
    }
    PathGrid::new(times, values, bm.n_paths, ds)
}
