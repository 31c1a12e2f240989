//! The discretised backward equation on the coarse grid.
//!
//! `Y_{u_i} = Y_{u_{i-1}} - f(u_{i-1}, X, Y_{u_{i-1}}, Z_{u_{i-1}}) du + Z_{u_{i-1}} . dW_{u_i}`

use super::dataset::{Dataset, MiniBatch, Z0Mode};
use super::problem::FBSDEProblem;
use crate::error::{Error, Result};
use crate::nn::{LstmParams, LstmVars, Matrix, Tape, Var, BLOCK_NAMES};

/// Trainable state: `Y_0`, the free `Z_0` and the network.
#[derive(Clone, Debug, PartialEq)]
pub struct Parameters {
    /// `1 x 1`
    pub y0: Matrix,
    /// `1 x d`, unused in [`Z0Mode::Network`].
    pub z0: Matrix,
    pub net: LstmParams,
}

pub const PARAM_NAMES: [&str; 6] = ["y0", "z0", BLOCK_NAMES[0], BLOCK_NAMES[1], BLOCK_NAMES[2], BLOCK_NAMES[3]];

impl Parameters {
    pub fn new(y0: f64, noise_dim: usize, net: LstmParams) -> Self {
        Parameters { y0: Matrix::scalar(y0), z0: Matrix::zeros(1, noise_dim), net }
    }

    pub fn y0(&self) -> f64 {
        self.y0.get(0, 0)
    }

    pub fn blocks(&self) -> [&Matrix; 6] {
        let [w, b, hw, hb] = self.net.blocks();
        [&self.y0, &self.z0, w, b, hw, hb]
    }

    pub fn blocks_mut(&mut self) -> [&mut Matrix; 6] {
        let [w, b, hw, hb] = self.net.blocks_mut();
        [&mut self.y0, &mut self.z0, w, b, hw, hb]
    }

    pub fn n_params(&self) -> usize {
        self.blocks().iter().map(|m| m.len()).sum()
    }

    pub fn named_blocks(&self) -> Vec<(String, Matrix)> {
        PARAM_NAMES.iter().zip(self.blocks()).map(|(n, m)| (n.to_string(), m.clone())).collect()
    }

    pub fn from_named_blocks(blocks: Vec<(String, Matrix)>) -> Result<Self> {
        let mut found: Vec<Option<Matrix>> = vec![None; PARAM_NAMES.len()];
        for (name, m) in blocks {
            let slot = PARAM_NAMES
                .iter()
                .position(|n| *n == name)
                .ok_or_else(|| Error::Format(format!("unknown parameter block '{name}'")))?;
            found[slot] = Some(m);
        }
        let mut it = found.into_iter().zip(PARAM_NAMES).map(|(m, n)| m.ok_or_else(|| Error::Format(format!("missing block '{n}'"))));
        let (y0, z0) = (it.next().unwrap()?, it.next().unwrap()?);
        let net = LstmParams::from_blocks(it.next().unwrap()?, it.next().unwrap()?, it.next().unwrap()?, it.next().unwrap()?)?;
        if y0.shape() != (1, 1) || z0.rows() != 1 || z0.cols() != net.output_dim {
            return Err(Error::Format("y0 / z0 shapes do not match the network".into()));
        }
        Ok(Parameters { y0, z0, net })
    }
}

/// `Y` per coarse point and `Z` per segment along a batch.
#[derive(Clone, Debug, PartialEq)]
pub struct RolloutState {
    /// `ys[i]` holds `Y_{u_i}` for each path, `i = 0..=ntilde`.
    pub ys: Vec<Vec<f64>>,
    /// `zs[i]` holds `Z_{u_i}` row-major `[path][noise]`, `i = 0..ntilde`.
    pub zs: Vec<Vec<f64>>,
    pub y0: f64,
}

impl RolloutState {
    pub fn terminal(&self) -> &[f64] {
        self.ys.last().map(|v| v.as_slice()).unwrap_or(&[])
    }
}

/// Rollout knobs shared by training and evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RolloutSettings {
    pub du: f64,
    /// Multiplier on the network (and free `Z_0`) output.
    pub z_scale: f64,
    pub z0_mode: Z0Mode,
}

impl RolloutSettings {
    pub fn for_dataset(ds: &Dataset, z_scale: f64) -> Self {
        RolloutSettings { du: ds.du, z_scale, z0_mode: ds.z0_mode }
    }
}

pub(crate) struct Graph {
    pub ys: Vec<Var>,
    pub zs: Vec<Var>,
    pub loss: Var,
    pub params: [Var; 6],
}

pub(crate) fn build_graph(
    tape: &mut Tape,
    problem: &FBSDEProblem,
    params: &Parameters,
    batch: &MiniBatch,
    settings: &RolloutSettings,
    trainable: bool,
) -> Result<Graph> {
    let nt = batch.dw.len();
    let need = match settings.z0_mode {
        Z0Mode::Free => nt.saturating_sub(1),
        Z0Mode::Network => nt,
    };
    if nt == 0 || batch.inputs.len() != need || batch.state.len() != nt {
        return Err(Error::arg(format!(
            "batch has {} inputs and {} segments, expected {need} inputs",
            batch.inputs.len(),
            nt
        )));
    }
    let b = batch.len();
    let put = |t: &mut Tape, m: &Matrix| if trainable { t.leaf(m.clone()) } else { t.constant(m.clone()) };
    let y0 = put(tape, &params.y0);
    let z0 = put(tape, &params.z0);
    let net: LstmVars = params.net.to_tape(tape, trainable);
    let mut y = tape.broadcast_rows(y0, b)?;
    let mut h = net.zero_state(tape, b);
    let mut ys = vec![y];
    let mut zs = Vec::with_capacity(nt);
    let mut next_z: Option<Var> = None;
    let sw = problem.driver.state_width();
    for i in 0..nt {
        let raw = match settings.z0_mode {
            Z0Mode::Free if i == 0 => tape.broadcast_rows(z0, b)?,
            Z0Mode::Free => next_z.take().expect("network output from previous segment"),
            Z0Mode::Network => {
                let x = tape.constant(batch.inputs[i].clone());
                let (s, o) = net.step(tape, x, h)?;
                h = s;
                o
            }
        };
        let z = tape.scale(raw, settings.z_scale);
        let st = (sw > 0).then(|| tape.constant(batch.state[i].clone()));
        let f = problem.driver.on_tape(tape, y, z, st)?;
        let drift = tape.scale(f, -settings.du);
        let dw = tape.constant(batch.dw[i].clone());
        let zdw = tape.mul(z, dw)?;
        let mart = tape.sum_cols(zdw);
        let y1 = tape.add(y, drift)?;
        y = tape.add(y1, mart)?;
        if !tape.value(y).is_finite() {
            return Err(Error::RolloutDiverged { segment: i + 1 });
        }
        ys.push(y);
        zs.push(z);
        if settings.z0_mode == Z0Mode::Free && i + 1 < nt {
            let x = tape.constant(batch.inputs[i].clone());
            let (s, o) = net.step(tape, x, h)?;
            h = s;
            next_z = Some(o);
        }
    }
    let g = tape.constant(batch.g.clone());
    let diff = tape.sub(y, g)?;
    let sq = tape.square(diff);
    let loss = tape.mean(sq);
    let [w, bb, hw, hb] = net.vars();
    Ok(Graph { ys, zs, loss, params: [y0, z0, w, bb, hw, hb] })
}

/// Runs the backward recursion on a batch without recording gradients.
pub fn rollout(problem: &FBSDEProblem, batch: &MiniBatch, params: &Parameters, settings: &RolloutSettings) -> Result<RolloutState> {
    let mut tape = Tape::new();
    let g = build_graph(&mut tape, problem, params, batch, settings, false)?;
    Ok(RolloutState {
        ys: g.ys.iter().map(|&v| tape.value(v).data().to_vec()).collect(),
        zs: g.zs.iter().map(|&v| tape.value(v).data().to_vec()).collect(),
        y0: params.y0(),
    })
}

/// Mean squared terminal mismatch `E[(Y_T - g)^2]` over the batch.
pub fn terminal_loss(state: &RolloutState, g: &[f64]) -> Result<f64> {
    let yt = state.terminal();
    if yt.len() != g.len() || g.is_empty() {
        return Err(Error::arg(format!("{} terminal values against {} targets", yt.len(), g.len())));
    }
    Ok(yt.iter().zip(g).map(|(y, t)| (y - t) * (y - t)).sum::<f64>() / g.len() as f64)
}

/// Loss on a batch.
pub fn batch_loss(problem: &FBSDEProblem, batch: &MiniBatch, params: &Parameters, settings: &RolloutSettings) -> Result<f64> {
    let mut tape = Tape::new();
    let g = build_graph(&mut tape, problem, params, batch, settings, false)?;
    Ok(tape.value(g.loss).get(0, 0))
}

/// Loss and its gradient for every block of [`Parameters::blocks`].
pub fn loss_and_grad(
    problem: &FBSDEProblem,
    batch: &MiniBatch,
    params: &Parameters,
    settings: &RolloutSettings,
) -> Result<(f64, Vec<Matrix>)> {
    let mut tape = Tape::new();
    let g = build_graph(&mut tape, problem, params, batch, settings, true)?;
    let loss = tape.value(g.loss).get(0, 0);
    let mut grads = tape.backward(g.loss)?;
    let out = g.params.iter().zip(params.blocks()).map(|(&v, m)| grads.take_or_zero(v, m.shape())).collect();
    Ok((loss, out))
}

/// Loss over a whole dataset, evaluated in slices of `chunk` paths.
pub fn dataset_loss(problem: &FBSDEProblem, ds: &Dataset, params: &Parameters, z_scale: f64, chunk: usize) -> Result<f64> {
    let settings = RolloutSettings::for_dataset(ds, z_scale);
    let mut total = 0.0;
    let chunk = chunk.max(1);
    let mut start = 0;
    while start < ds.n_paths {
        let end = (start + chunk).min(ds.n_paths);
        let idx: Vec<usize> = (start..end).collect();
        let l = batch_loss(problem, &ds.batch(&idx)?, params, &settings)?;
        total += l * (end - start) as f64;
        start = end;
    }
    Ok(total / ds.n_paths.max(1) as f64)
}
