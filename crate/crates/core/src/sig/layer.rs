//! Segment-wise (log-)signature features.

use super::lyndon::{witt_dimension, LyndonBasis};
use super::tensor::{factorial, sig_width, TruncatedTensor};
use crate::error::{Error, Result};
use crate::sde::{PathGrid, PathRef};

/// Fine mesh of `n` steps grouped into `ntilde = n / k` segments.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SegmentSpec {
    pub n: usize,
    pub k: usize,
    pub horizon: f64,
}

impl SegmentSpec {
    pub fn new(n: usize, k: usize, horizon: f64) -> Result<Self> {
        if n == 0 || k == 0 {
            return Err(Error::arg("n and k must be positive"));
        }
        if n % k != 0 {
            return Err(Error::arg(format!("coarsening factor k={k} does not divide n={n}")));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::arg(format!("horizon must be positive, got {horizon}")));
        }
        Ok(SegmentSpec { n, k, horizon })
    }

    /// Builds the spec from `n` and the number of segments.
    pub fn with_segments(n: usize, ntilde: usize, horizon: f64) -> Result<Self> {
        if ntilde == 0 || n % ntilde != 0 {
            return Err(Error::arg(format!("ntilde={ntilde} does not divide n={n}")));
        }
        Self::new(n, n / ntilde, horizon)
    }

    pub fn ntilde(&self) -> usize {
        self.n / self.k
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.n as f64
    }

    pub fn du(&self) -> f64 {
        self.k as f64 * self.dt()
    }

    /// Fine-grid indices `(start, end)` of segment `i` (0-based).
    pub fn bounds(&self, i: usize) -> (usize, usize) {
        (i * self.k, (i + 1) * self.k)
    }
}

/// Optional per-level rescaling of features.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum FeatureScaling {
    #[default]
    None,
    /// Level `k` multiplied by `(k!)^(1/k)`.
    FactorialRoot,
}

/// The (log-)signature sequence layer over the time-augmented path.
#[derive(Clone, Debug)]
pub struct SigLayer {
    state_dim: usize,
    order: usize,
    use_log: bool,
    scaling: FeatureScaling,
    basis: Option<LyndonBasis>,
    level_scale: Vec<f64>,
}

impl SigLayer {
    /// `state_dim` is the raw path dimension; the layer works on `state_dim + 1` letters.
    pub fn new(state_dim: usize, order: usize, use_log: bool, scaling: FeatureScaling) -> Result<Self> {
        if state_dim == 0 || order == 0 {
            return Err(Error::arg("signature layer needs state_dim >= 1 and order >= 1"));
        }
        let basis = if use_log { Some(LyndonBasis::new(state_dim + 1, order)?) } else { None };
        let level_scale = (0..=order)
            .map(|k| match scaling {
                FeatureScaling::None => 1.0,
                FeatureScaling::FactorialRoot if k == 0 => 1.0,
                FeatureScaling::FactorialRoot => factorial(k).powf(1.0 / k as f64),
            })
            .collect();
        Ok(SigLayer { state_dim, order, use_log, scaling, basis, level_scale })
    }

    pub fn alphabet(&self) -> usize {
        self.state_dim + 1
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn use_log(&self) -> bool {
        self.use_log
    }

    pub fn scaling(&self) -> FeatureScaling {
        self.scaling
    }

    /// Width of each feature vector.
    pub fn width(&self) -> usize {
        if self.use_log {
            witt_dimension(self.alphabet(), self.order)
        } else {
            sig_width(self.alphabet(), self.order)
        }
    }

    fn check(&self, path: &PathRef<'_>, spec: &SegmentSpec) -> Result<()> {
        let dim = if path.time_augmented { path.dim - 1 } else { path.dim };
        if dim != self.state_dim {
            return Err(Error::arg(format!("path dimension {dim} but layer expects {}", self.state_dim)));
        }
        if path.n_points() != spec.n + 1 {
            return Err(Error::arg(format!(
                "mesh misaligned: path has {} points, segment spec needs {}",
                path.n_points(),
                spec.n + 1
            )));
        }
        Ok(())
    }

    /// Features for segments `0..count`, written row after row into `out`.
    pub fn apply_into(&self, path: PathRef<'_>, spec: &SegmentSpec, count: usize, out: &mut [f64]) -> Result<()> {
        self.check(&path, spec)?;
        let width = self.width();
        if count > spec.ntilde() || out.len() < count * width {
            return Err(Error::arg("output buffer too small for requested segments"));
        }
        let alphabet = self.alphabet();
        let mut inc = vec![0.0; alphabet];
        let (mut acc, mut next) = (Vec::new(), Vec::new());
        let mut sig = TruncatedTensor::identity(alphabet, self.order);
        for seg in 0..count {
            let (start, end) = spec.bounds(seg);
            sig.level_mut(0)[0] = 1.0;
            for k in 1..=self.order {
                sig.level_mut(k).iter_mut().for_each(|x| *x = 0.0);
            }
            for i in start + 1..=end {
                let (a, b) = (path.point(i - 1), path.point(i));
                if path.time_augmented {
                    inc.iter_mut().zip(a.iter().zip(b)).for_each(|(s, (x, y))| *s = y - x);
                } else {
                    inc[0] = path.times[i] - path.times[i - 1];
                    inc[1..].iter_mut().zip(a.iter().zip(b)).for_each(|(s, (x, y))| *s = y - x);
                }
                sig.mul_exp_vector_scratch(&inc, &mut acc, &mut next);
            }
            let row = &mut out[seg * width..(seg + 1) * width];
            match &self.basis {
                Some(basis) => {
                    basis.project_into(&sig.log()?, row);
                    if self.scaling != FeatureScaling::None {
                        for (x, w) in row.iter_mut().zip(basis.words()) {
                            *x *= self.level_scale[w.len()];
                        }
                    }
                }
                None => {
                    let mut off = 0;
                    for k in 1..=self.order {
                        let block = sig.level(k);
                        let s = self.level_scale[k];
                        for (dst, &v) in row[off..off + block.len()].iter_mut().zip(block) {
                            *dst = v * s;
                        }
                        off += block.len();
                    }
                }
            }
        }
        Ok(())
    }

    /// One feature vector per segment.
    pub fn apply(&self, path: PathRef<'_>, spec: &SegmentSpec) -> Result<Vec<Vec<f64>>> {
        let width = self.width();
        let mut flat = vec![0.0; spec.ntilde() * width];
        self.apply_into(path, spec, spec.ntilde(), &mut flat)?;
        Ok(flat.chunks(width).map(|c| c.to_vec()).collect())
    }
}

/// Segment-wise truncated (log-)signatures of the time-augmented single path in `path`.
pub fn sig_sequence_layer(path: &PathGrid, spec: &SegmentSpec, order: usize, use_log: bool) -> Result<Vec<Vec<f64>>> {
    if path.n_paths() != 1 {
        return Err(Error::arg(format!("expected a single path, got {}", path.n_paths())));
    }
    path.validate_mesh()?;
    let state_dim = if path.is_time_augmented() { path.dim() - 1 } else { path.dim() };
    SigLayer::new(state_dim, order, use_log, FeatureScaling::None)?.apply(path.path(0), spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sig::{signature, time_augment};

    fn random_walk(n: usize, d: usize, seed: u64) -> PathGrid {
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let mut rows = vec![vec![0.0; d]];
        for i in 1..=n {
            let prev = rows[i - 1].clone();
            rows.push(prev.iter().map(|x| x + next()).collect());
        }
        PathGrid::single(PathGrid::uniform_times(n, 1.0), &rows).unwrap()
    }

    #[test]
    fn spec_rejects_non_divisible() {
        assert!(SegmentSpec::new(100, 30, 1.0).is_err());
        let s = SegmentSpec::new(100, 20, 1.0).unwrap();
        assert_eq!(s.ntilde(), 5);
        assert!((s.du() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn one_segment_is_whole_signature() {
        let p = random_walk(12, 2, 3);
        let spec = SegmentSpec::new(12, 12, 1.0).unwrap();
        let feats = sig_sequence_layer(&p, &spec, 3, false).unwrap();
        assert_eq!(feats.len(), 1);
        let whole = signature(time_augment(&p).unwrap().path(0), 3).unwrap().flatten();
        for (a, b) in feats[0].iter().zip(&whole) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn constant_path_log_mode() {
        let rows = vec![vec![2.5]; 11];
        let p = PathGrid::single(PathGrid::uniform_times(10, 1.0), &rows).unwrap();
        let spec = SegmentSpec::new(10, 2, 1.0).unwrap();
        let feats = sig_sequence_layer(&p, &spec, 3, true).unwrap();
        for f in &feats {
            // Lyndon order: (1), (2), (1,2), (1,1,2), (1,2,2)
            assert!((f[0] - 0.2).abs() < 1e-14);
            assert!(f[1..].iter().all(|&x| x.abs() < 1e-14), "{f:?}");
        }
    }

    #[test]
    fn width_for_one_dim_time_augmented() {
        let p = random_walk(100, 1, 9);
        let spec = SegmentSpec::new(100, 20, 1.0).unwrap();
        let feats = sig_sequence_layer(&p, &spec, 3, false).unwrap();
        assert_eq!(feats.len(), 5);
        assert!(feats.iter().all(|f| f.len() == 14));
    }

    #[test]
    fn misaligned_mesh_rejected() {
        let p = random_walk(10, 1, 1);
        let spec = SegmentSpec::new(20, 4, 1.0).unwrap();
        assert!(sig_sequence_layer(&p, &spec, 2, false).is_err());
    }

    #[test]
    fn augmented_input_gives_same_features() {
        let p = random_walk(20, 2, 5);
        let spec = SegmentSpec::new(20, 5, 1.0).unwrap();
        let a = sig_sequence_layer(&p, &spec, 3, true).unwrap();
        let b = sig_sequence_layer(&time_augment(&p).unwrap(), &spec, 3, true).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn factorial_root_scaling() {
        let p = random_walk(10, 1, 2);
        let spec = SegmentSpec::new(10, 5, 1.0).unwrap();
        let plain = SigLayer::new(1, 3, false, FeatureScaling::None).unwrap().apply(p.path(0), &spec).unwrap();
        let scaled = SigLayer::new(1, 3, false, FeatureScaling::FactorialRoot).unwrap().apply(p.path(0), &spec).unwrap();
        let s3 = 6f64.powf(1.0 / 3.0);
        assert_eq!(plain[0][0], scaled[0][0]);
        assert!((plain[0][2] * 2f64.sqrt() - scaled[0][2]).abs() < 1e-14);
        assert!((plain[0][13] * s3 - scaled[0][13]).abs() < 1e-14);
    }
}
