use super::rng::{domain, Stream};
use crate::error::{Error, Result};

/// Brownian increments `[n_paths][n_steps][d]`, each `~ N(0, T / n_steps)`.
#[derive(Clone, Debug, PartialEq)]
pub struct BrownianBatch {
    pub seed: u64,
    /// Global index of the first path; chunks of one simulation share a seed.
    pub first_path: usize,
    pub n_paths: usize,
    pub n_steps: usize,
    pub d: usize,
    pub horizon: f64,
    pub increments: Vec<f64>,
}

impl BrownianBatch {
    pub fn dt(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }

    /// Increments of path `j` as `[n_steps][d]`.
    pub fn path(&self, j: usize) -> &[f64] {
        let len = self.n_steps * self.d;
        &self.increments[j * len..(j + 1) * len]
    }

    pub fn step(&self, j: usize, i: usize) -> &[f64] {
        let base = (j * self.n_steps + i) * self.d;
        &self.increments[base..base + self.d]
    }
}

pub fn gen_brownian(seed: u64, n_paths: usize, n_steps: usize, d: usize, horizon: f64) -> Result<BrownianBatch> {
    gen_brownian_range(seed, 0, n_paths, n_steps, d, horizon, false)
}

/// Paths `first..first + count` of the simulation keyed by `seed`.
///
/// With `antithetic`, odd path `2i + 1` is the negation of path `2i`.
pub fn gen_brownian_range(
    seed: u64,
    first: usize,
    count: usize,
    n_steps: usize,
    d: usize,
    horizon: f64,
    antithetic: bool,
) -> Result<BrownianBatch> {
    if count == 0 || n_steps == 0 || d == 0 {
        return Err(Error::arg(format!("counts must be positive (paths={count}, steps={n_steps}, d={d})")));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::arg(format!("horizon must be positive, got {horizon}")));
    }
    let sd = (horizon / n_steps as f64).sqrt();
    let len = n_steps * d;
    let mut increments = vec![0.0; count * len];
    for (local, chunk) in increments.chunks_mut(len).enumerate() {
        let j = first + local;
        let (stream, sign) = if antithetic { (j & !1, if j & 1 == 1 { -1.0 } else { 1.0 }) } else { (j, 1.0) };
        let mut rng = Stream::new(seed, domain::BROWNIAN, stream as u64);
        for x in chunk.iter_mut() {
            *x = sign * sd * rng.normal();
        }
    }
    Ok(BrownianBatch { seed, first_path: first, n_paths: count, n_steps, d, horizon, increments })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_increments() {
        let a = gen_brownian(42, 10, 20, 2, 1.0).unwrap();
        let b = gen_brownian(42, 10, 20, 2, 1.0).unwrap();
        assert_eq!(a, b);
        let c = gen_brownian(43, 10, 20, 2, 1.0).unwrap();
        assert_ne!(a.increments, c.increments);
    }

    #[test]
    fn chunks_match_whole_batch() {
        let whole = gen_brownian(5, 12, 7, 3, 2.0).unwrap();
        let tail = gen_brownian_range(5, 4, 8, 7, 3, 2.0, false).unwrap();
        assert_eq!(&whole.increments[4 * 21..], &tail.increments[..]);
    }

    #[test]
    fn antithetic_pairs() {
        let b = gen_brownian_range(9, 0, 4, 5, 1, 1.0, true).unwrap();
        for i in 0..5 {
            assert_eq!(b.step(0, i)[0], -b.step(1, i)[0]);
            assert_eq!(b.step(2, i)[0], -b.step(3, i)[0]);
        }
    }

    #[test]
    fn zero_counts_rejected() {
        assert!(gen_brownian(1, 0, 10, 1, 1.0).is_err());
        assert!(gen_brownian(1, 10, 0, 1, 1.0).is_err());
        assert!(gen_brownian(1, 10, 10, 0, 1.0).is_err());
    }
}
