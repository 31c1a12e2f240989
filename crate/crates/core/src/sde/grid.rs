use crate::error::{Error, Result};

/// A batch of paths sampled on a common time mesh.
///
/// `values` is row-major `[n_paths][n_points][dim]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PathGrid {
    times: Vec<f64>,
    values: Vec<f64>,
    n_paths: usize,
    dim: usize,
    time_augmented: bool,
}

/// Borrowed view of a single path.
#[derive(Clone, Copy, Debug)]
pub struct PathRef<'a> {
    pub times: &'a [f64],
    pub values: &'a [f64],
    pub dim: usize,
    pub time_augmented: bool,
}

impl<'a> PathRef<'a> {
    pub fn n_points(&self) -> usize {
        self.times.len()
    }

    pub fn point(&self, i: usize) -> &'a [f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    /// Points `start..=end`.
    pub fn window(&self, start: usize, end: usize) -> PathRef<'a> {
        PathRef {
            times: &self.times[start..=end],
            values: &self.values[start * self.dim..(end + 1) * self.dim],
            dim: self.dim,
            time_augmented: self.time_augmented,
        }
    }

    pub fn to_grid(&self) -> PathGrid {
        PathGrid {
            times: self.times.to_vec(),
            values: self.values.to_vec(),
            n_paths: 1,
            dim: self.dim,
            time_augmented: self.time_augmented,
        }
    }
}

impl PathGrid {
    pub fn new(times: Vec<f64>, values: Vec<f64>, n_paths: usize, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidPath("state dimension must be positive".into()));
        }
        if values.len() != n_paths * times.len() * dim {
            return Err(Error::InvalidPath(format!(
                "expected {} values for {} paths x {} points x {} dims, got {}",
                n_paths * times.len() * dim,
                n_paths,
                times.len(),
                dim,
                values.len()
            )));
        }
        Ok(PathGrid { times, values, n_paths, dim, time_augmented: false })
    }

    /// Single path from per-point rows.
    pub fn single(times: Vec<f64>, rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map(|r| r.len()).unwrap_or(1);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::InvalidPath("ragged path rows".into()));
        }
        let values = rows.iter().flatten().copied().collect();
        Self::new(times, values, 1, dim)
    }

    /// Uniform mesh `0, T/n, .., T`.
    pub fn uniform_times(n_steps: usize, horizon: f64) -> Vec<f64> {
        let dt = horizon / n_steps as f64;
        (0..=n_steps).map(|i| if i == n_steps { horizon } else { i as f64 * dt }).collect()
    }

    pub(crate) fn with_augmented_flag(mut self, flag: bool) -> Self {
        self.time_augmented = flag;
        self
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn n_points(&self) -> usize {
        self.times.len()
    }

    pub fn n_steps(&self) -> usize {
        self.times.len().saturating_sub(1)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn horizon(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    pub fn is_time_augmented(&self) -> bool {
        self.time_augmented
    }

    pub fn path(&self, j: usize) -> PathRef<'_> {
        let len = self.times.len() * self.dim;
        PathRef {
            times: &self.times,
            values: &self.values[j * len..(j + 1) * len],
            dim: self.dim,
            time_augmented: self.time_augmented,
        }
    }

    pub fn point(&self, j: usize, i: usize) -> &[f64] {
        let base = (j * self.times.len() + i) * self.dim;
        &self.values[base..base + self.dim]
    }

    pub fn terminal(&self, j: usize) -> &[f64] {
        self.point(j, self.times.len() - 1)
    }

    /// Checks at least two points and strictly increasing times.
    pub fn validate_mesh(&self) -> Result<()> {
        if self.times.len() < 2 {
            return Err(Error::InvalidPath(format!("need >= 2 time points, got {}", self.times.len())));
        }
        if let Some(i) = self.times.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidPath(format!("times not strictly increasing at index {}", i + 1)));
        }
        Ok(())
    }
}
