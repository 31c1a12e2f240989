//! Simulated training data: segment features, increments, driver states and `g`.

use super::problem::FBSDEProblem;
use crate::error::{Error, Result};
use crate::nn::Matrix;
use crate::sde::{gen_brownian_range, BrownianBatch, PathGrid, PathRef};
use crate::sig::{FeatureScaling, SegmentSpec, SigLayer};

/// How `Z` at the first coarse point is produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Z0Mode {
    /// A free trainable vector; the network sees segment `i` before emitting `Z_{u_i}`.
    #[default]
    Free,
    /// The network output after segment `i + 1` is used as `Z_{u_i}`.
    Network,
}

/// What the network reads at each coarse step.
#[derive(Clone, Debug)]
pub enum InputKind {
    /// Segment (log-)signatures of the time-augmented, rescaled path.
    Signature(SigLayer),
    /// Raw `(u_i, X_{u_i})` at the right end of each segment.
    Raw,
}

/// Everything needed to turn fine paths into network inputs.
#[derive(Clone, Debug)]
pub struct FeatureSpec {
    pub segments: SegmentSpec,
    pub inputs: InputKind,
    pub z0_mode: Z0Mode,
    /// Per-coordinate multiplier applied to `X` before features are computed.
    pub input_scale: Vec<f64>,
}

impl FeatureSpec {
    pub fn signature(
        segments: SegmentSpec,
        state_dim: usize,
        order: usize,
        use_log: bool,
        scaling: FeatureScaling,
        z0_mode: Z0Mode,
    ) -> Result<Self> {
        Ok(FeatureSpec {
            segments,
            inputs: InputKind::Signature(SigLayer::new(state_dim, order, use_log, scaling)?),
            z0_mode,
            input_scale: vec![1.0; state_dim],
        })
    }

    /// Raw coarse values on every fine step.
    pub fn vanilla(n: usize, horizon: f64, state_dim: usize, z0_mode: Z0Mode) -> Result<Self> {
        Ok(FeatureSpec {
            segments: SegmentSpec::new(n, 1, horizon)?,
            inputs: InputKind::Raw,
            z0_mode,
            input_scale: vec![1.0; state_dim],
        })
    }

    pub fn with_input_scale(mut self, scale: Vec<f64>) -> Self {
        self.input_scale = scale;
        self
    }

    pub fn width(&self) -> usize {
        match &self.inputs {
            InputKind::Signature(l) => l.width(),
            InputKind::Raw => self.input_scale.len() + 1,
        }
    }

    /// Number of network inputs consumed per path.
    pub fn n_inputs(&self) -> usize {
        let nt = self.segments.ntilde();
        match self.z0_mode {
            Z0Mode::Free => nt - 1,
            Z0Mode::Network => nt,
        }
    }

    fn validate(&self, problem: &FBSDEProblem) -> Result<()> {
        let d = problem.state_dim();
        if self.input_scale.len() != d {
            return Err(Error::arg(format!("input_scale has {} entries, state has {d}", self.input_scale.len())));
        }
        if self.input_scale.iter().any(|s| !s.is_finite()) {
            return Err(Error::arg("input_scale must be finite"));
        }
        if (self.segments.horizon - problem.horizon).abs() > 1e-12 * problem.horizon {
            return Err(Error::arg("segment horizon differs from the problem horizon"));
        }
        Ok(())
    }
}

/// Per-path training data, one row block per path.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub n_paths: usize,
    pub n_inputs: usize,
    pub width: usize,
    pub ntilde: usize,
    pub noise_dim: usize,
    pub state_width: usize,
    pub du: f64,
    pub z0_mode: Z0Mode,
    /// `[path][input][width]`
    pub inputs: Vec<f64>,
    /// Segment increments `Delta W_{u_i}`, `[path][segment][noise]`.
    pub dw: Vec<f64>,
    /// Driver state at `u_{i-1}`, `[path][segment][state_width]`.
    pub state: Vec<f64>,
    /// `g` along each fine path.
    pub g: Vec<f64>,
}

/// One mini-batch in per-step matrix form.
#[derive(Clone, Debug)]
pub struct MiniBatch {
    pub inputs: Vec<Matrix>,
    pub dw: Vec<Matrix>,
    pub state: Vec<Matrix>,
    pub g: Matrix,
}

impl MiniBatch {
    pub fn len(&self) -> usize {
        self.g.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl Dataset {
    fn empty(spec: &FeatureSpec, problem: &FBSDEProblem) -> Self {
        Dataset {
            n_paths: 0,
            n_inputs: spec.n_inputs(),
            width: spec.width(),
            ntilde: spec.segments.ntilde(),
            noise_dim: problem.noise_dim(),
            state_width: problem.driver.state_width(),
            du: spec.segments.du(),
            z0_mode: spec.z0_mode,
            inputs: Vec::new(),
            dw: Vec::new(),
            state: Vec::new(),
            g: Vec::new(),
        }
    }

    /// Appends paths already simulated from the increments in `bm`.
    pub fn extend_from_paths(
        &mut self,
        problem: &FBSDEProblem,
        spec: &FeatureSpec,
        paths: &PathGrid,
        bm: &BrownianBatch,
    ) -> Result<()> {
        let seg = &spec.segments;
        if paths.n_steps() != seg.n || bm.n_steps != seg.n || paths.n_paths() != bm.n_paths {
            return Err(Error::arg("paths, increments and segment spec disagree"));
        }
        let (k, nt, d, sw, w) = (seg.k, self.ntilde, self.noise_dim, self.state_width, self.width);
        let ds = paths.dim();
        let n_in = self.n_inputs;
        let mut scaled = vec![0.0; paths.n_points() * ds];
        let mut xbar = vec![0.0; ds];
        let base_in = self.inputs.len();
        self.inputs.resize(base_in + paths.n_paths() * n_in * w, 0.0);
        for j in 0..paths.n_paths() {
            let path = paths.path(j);
            // Features.
            let out = &mut self.inputs[base_in + j * n_in * w..base_in + (j + 1) * n_in * w];
            for (dst, (src, s)) in scaled.iter_mut().zip(path.values.iter().zip(spec.input_scale.iter().cycle())) {
                *dst = src * s;
            }
            let sp = PathRef { times: path.times, values: &scaled, dim: ds, time_augmented: false };
            match &spec.inputs {
                InputKind::Signature(layer) => layer.apply_into(sp, seg, n_in, out)?,
                InputKind::Raw => {
                    for q in 0..n_in {
                        let i = (q + 1) * k;
                        out[q * w] = path.times[i];
                        out[q * w + 1..(q + 1) * w].copy_from_slice(sp.point(i));
                    }
                }
            }
            // Segment increments and left-endpoint driver states.
            xbar.iter_mut().for_each(|x| *x = 0.0);
            let s0 = self.state.len();
            self.state.resize(s0 + nt * sw, 0.0);
            for i in 0..nt {
                let (start, end) = seg.bounds(i);
                if sw > 0 {
                    problem.driver.write_state(path.point(start), &xbar, &mut self.state[s0 + i * sw..s0 + (i + 1) * sw])?;
                }
                let mut acc = vec![0.0; d];
                for step in start..end {
                    acc.iter_mut().zip(bm.step(j, step)).for_each(|(a, b)| *a += b);
                    let h = 0.5 * (path.times[step + 1] - path.times[step]);
                    let (a, b) = (path.point(step), path.point(step + 1));
                    xbar.iter_mut().enumerate().for_each(|(c, x)| *x += h * (a[c] + b[c]));
                }
                self.dw.extend_from_slice(&acc);
            }
            let g = problem.terminal_value(path)?;
            if !g.is_finite() {
                return Err(Error::Domain(format!("terminal value not finite on path {}", bm.first_path + j)));
            }
            self.g.push(g);
        }
        self.n_paths += paths.n_paths();
        Ok(())
    }

    /// Simulates paths `first..first + count` of the stream keyed by `seed`, in chunks.
    pub fn simulate(
        problem: &FBSDEProblem,
        spec: &FeatureSpec,
        seed: u64,
        first: usize,
        count: usize,
        chunk: usize,
        antithetic: bool,
    ) -> Result<Self> {
        spec.validate(problem)?;
        let mut ds = Self::empty(spec, problem);
        ds.inputs.reserve(count * ds.n_inputs * ds.width);
        let chunk = chunk.max(1);
        let mut done = 0;
        while done < count {
            let c = chunk.min(count - done);
            let bm = gen_brownian_range(
                seed,
                first + done,
                c,
                spec.segments.n,
                problem.noise_dim(),
                problem.horizon,
                antithetic,
            )?;
            let paths = problem.model.simulate(&bm)?;
            ds.extend_from_paths(problem, spec, &paths, &bm)?;
            done += c;
        }
        Ok(ds)
    }

    /// Builds a dataset from given paths (and the increments that drove them).
    pub fn from_paths(problem: &FBSDEProblem, spec: &FeatureSpec, paths: &PathGrid, bm: &BrownianBatch) -> Result<Self> {
        spec.validate(problem)?;
        let mut ds = Self::empty(spec, problem);
        ds.extend_from_paths(problem, spec, paths, bm)?;
        Ok(ds)
    }

    pub fn input_row(&self, path: usize, q: usize) -> &[f64] {
        let base = (path * self.n_inputs + q) * self.width;
        &self.inputs[base..base + self.width]
    }

    pub fn dw_row(&self, path: usize, i: usize) -> &[f64] {
        let base = (path * self.ntilde + i) * self.noise_dim;
        &self.dw[base..base + self.noise_dim]
    }

    pub fn state_row(&self, path: usize, i: usize) -> &[f64] {
        let base = (path * self.ntilde + i) * self.state_width;
        &self.state[base..base + self.state_width]
    }

    /// Gathers the rows `idx` into per-step matrices.
    pub fn batch(&self, idx: &[usize]) -> Result<MiniBatch> {
        if let Some(&bad) = idx.iter().find(|&&j| j >= self.n_paths) {
            return Err(Error::arg(format!("path index {bad} out of range ({} paths)", self.n_paths)));
        }
        let b = idx.len();
        fn gather<'a>(idx: &[usize], cols: usize, row: impl Fn(usize) -> &'a [f64]) -> Result<Matrix> {
            let mut data = Vec::with_capacity(idx.len() * cols);
            for &j in idx {
                data.extend_from_slice(row(j));
            }
            Matrix::from_vec(idx.len(), cols, data)
        }
        let inputs = (0..self.n_inputs)
            .map(|q| gather(idx, self.width, |j| self.input_row(j, q)))
            .collect::<Result<_>>()?;
        let dw = (0..self.ntilde).map(|i| gather(idx, self.noise_dim, |j| self.dw_row(j, i))).collect::<Result<_>>()?;
        let state = (0..self.ntilde)
            .map(|i| gather(idx, self.state_width, |j| self.state_row(j, i)))
            .collect::<Result<_>>()?;
        let g = Matrix::from_vec(b, 1, idx.iter().map(|&j| self.g[j]).collect())?;
        Ok(MiniBatch { inputs, dw, state, g })
    }

    /// All paths, in order.
    pub fn full_batch(&self) -> Result<MiniBatch> {
        self.batch(&(0..self.n_paths).collect::<Vec<_>>())
    }

    /// Mean of `g`.
    pub fn mean_g(&self) -> f64 {
        self.g.iter().sum::<f64>() / self.g.len().max(1) as f64
    }
}
