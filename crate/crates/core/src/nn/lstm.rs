use super::matrix::Matrix;
use super::tape::{Tape, Var};
use crate::error::{Error, Result};
use crate::sde::rng::{domain, Stream};

/// One LSTM layer plus an affine head `hidden -> output`.
///
/// `w` stacks the gate matrices row-wise in the order input, forget, output,
/// candidate; each block is `hidden x (input + hidden)` acting on `[x | h]`.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmParams {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub output_dim: usize,
    pub w: Matrix,
    pub b: Matrix,
    pub head_w: Matrix,
    pub head_b: Matrix,
}

pub const BLOCK_NAMES: [&str; 4] = ["lstm.w", "lstm.b", "head.w", "head.b"];

impl LstmParams {
    pub fn zeros(input_dim: usize, hidden_dim: usize, output_dim: usize) -> Self {
        LstmParams {
            input_dim,
            hidden_dim,
            output_dim,
            w: Matrix::zeros(4 * hidden_dim, input_dim + hidden_dim),
            b: Matrix::zeros(1, 4 * hidden_dim),
            head_w: Matrix::zeros(output_dim, hidden_dim),
            head_b: Matrix::zeros(1, output_dim),
        }
    }

    /// Uniform `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` weights, forget bias `+1`.
    pub fn init(input_dim: usize, hidden_dim: usize, output_dim: usize, seed: u64) -> Self {
        let mut p = Self::zeros(input_dim, hidden_dim, output_dim);
        let mut rng = Stream::new(seed, domain::INIT, 0);
        let mut fill = |m: &mut Matrix, bound: f64| {
            m.data_mut().iter_mut().for_each(|x| *x = bound * (2.0 * rng.uniform() - 1.0));
        };
        let gate_bound = 1.0 / ((input_dim + hidden_dim) as f64).sqrt();
        let head_bound = 1.0 / (hidden_dim as f64).sqrt();
        fill(&mut p.w, gate_bound);
        fill(&mut p.b, gate_bound);
        fill(&mut p.head_w, head_bound);
        fill(&mut p.head_b, head_bound);
        for j in hidden_dim..2 * hidden_dim {
            p.b.data_mut()[j] = 1.0;
        }
        p
    }

    pub fn blocks(&self) -> [&Matrix; 4] {
        [&self.w, &self.b, &self.head_w, &self.head_b]
    }

    pub fn blocks_mut(&mut self) -> [&mut Matrix; 4] {
        [&mut self.w, &mut self.b, &mut self.head_w, &mut self.head_b]
    }

    pub fn from_blocks(w: Matrix, b: Matrix, head_w: Matrix, head_b: Matrix) -> Result<Self> {
        let hidden_dim = b.cols() / 4;
        let p = LstmParams {
            input_dim: w.cols().saturating_sub(hidden_dim),
            hidden_dim,
            output_dim: head_w.rows(),
            w,
            b,
            head_w,
            head_b,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let (i, h, o) = (self.input_dim, self.hidden_dim, self.output_dim);
        let ok = h > 0
            && self.w.shape() == (4 * h, i + h)
            && self.b.shape() == (1, 4 * h)
            && self.head_w.shape() == (o, h)
            && self.head_b.shape() == (1, o);
        if !ok {
            return Err(Error::arg("inconsistent LSTM parameter shapes"));
        }
        if !self.blocks().iter().all(|m| m.is_finite()) {
            return Err(Error::arg("non-finite LSTM parameters"));
        }
        Ok(())
    }

    pub fn n_params(&self) -> usize {
        self.blocks().iter().map(|m| m.len()).sum()
    }

    /// Places the parameters on `tape`, as leaves or as constants.
    pub fn to_tape(&self, tape: &mut Tape, trainable: bool) -> LstmVars {
        let mut put = |m: &Matrix| if trainable { tape.leaf(m.clone()) } else { tape.constant(m.clone()) };
        LstmVars {
            hidden_dim: self.hidden_dim,
            w: put(&self.w),
            b: put(&self.b),
            head_w: put(&self.head_w),
            head_b: put(&self.head_b),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct LstmVars {
    pub hidden_dim: usize,
    pub w: Var,
    pub b: Var,
    pub head_w: Var,
    pub head_b: Var,
}

impl LstmVars {
    pub fn vars(&self) -> [Var; 4] {
        [self.w, self.b, self.head_w, self.head_b]
    }

    /// Zero `[h | c]` for `batch` rows.
    pub fn zero_state(&self, tape: &mut Tape, batch: usize) -> Var {
        tape.constant(Matrix::zeros(batch, 2 * self.hidden_dim))
    }

    /// One recurrent step; returns the new state and the head output.
    pub fn step(&self, tape: &mut Tape, x: Var, state: Var) -> Result<(Var, Var)> {
        let next = tape.lstm_cell(x, state, self.w, self.b)?;
        let out = self.head(tape, next)?;
        Ok((next, out))
    }

    /// Head applied to the hidden half of `state`.
    pub fn head(&self, tape: &mut Tape, state: Var) -> Result<Var> {
        let h = tape.slice_cols(state, 0, self.hidden_dim)?;
        let lin = tape.matmul_nt(h, self.head_w)?;
        tape.add_row(lin, self.head_b)
    }
}

/// Runs the network over `inputs` (each `batch x input_dim`); output `i` sees inputs `0..=i`.
pub fn lstm_forward(params: &LstmParams, inputs: &[Matrix]) -> Result<Vec<Matrix>> {
    params.validate()?;
    let first = inputs.first().ok_or_else(|| Error::arg("empty input sequence"))?;
    let batch = first.rows();
    if inputs.iter().any(|m| m.shape() != (batch, params.input_dim)) {
        return Err(Error::arg(format!("inputs must be {batch}x{}", params.input_dim)));
    }
    let mut tape = Tape::new();
    let vars = params.to_tape(&mut tape, false);
    let mut state = vars.zero_state(&mut tape, batch);
    let mut outs = Vec::with_capacity(inputs.len());
    for x in inputs {
        let xv = tape.constant(x.clone());
        let (s, o) = vars.step(&mut tape, xv, state)?;
        state = s;
        outs.push(tape.value(o).clone());
    }
    Ok(outs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sig(x: f64) -> f64 {
        1.0 / (1.0 + (-x).exp())
    }

    #[test]
    fn zero_network_outputs_head_bias() {
        let mut p = LstmParams::zeros(3, 5, 2);
        p.head_b = Matrix::from_vec(1, 2, vec![0.7, -1.1]).unwrap();
        let inputs = vec![Matrix::filled(4, 3, 2.0); 3];
        for out in lstm_forward(&p, &inputs).unwrap() {
            for r in 0..4 {
                assert_eq!(out.row(r), &[0.7, -1.1]);
            }
        }
    }

    #[test]
    fn causality() {
        let p = LstmParams::init(2, 6, 1, 3);
        let mut inputs: Vec<Matrix> = (0..8).map(|i| Matrix::filled(2, 2, 0.1 * i as f64)).collect();
        let base = lstm_forward(&p, &inputs).unwrap();
        inputs[4].data_mut()[0] += 0.5;
        let pert = lstm_forward(&p, &inputs).unwrap();
        for i in 0..8 {
            if i < 4 {
                assert_eq!(base[i], pert[i]);
            } else {
                assert_ne!(base[i], pert[i]);
            }
        }
    }

    #[test]
    fn matches_straight_line_recurrence() {
        let p = LstmParams::init(2, 3, 1, 9);
        let xs = [[0.3, -0.8], [1.2, 0.4]];
        let inputs: Vec<Matrix> = xs.iter().map(|x| Matrix::from_vec(1, 2, x.to_vec()).unwrap()).collect();
        let got = lstm_forward(&p, &inputs).unwrap();
        let (mut h, mut c) = ([0.0f64; 3], [0.0f64; 3]);
        for (step, x) in xs.iter().enumerate() {
            let z: Vec<f64> = (0..12)
                .map(|row| {
                    let w = p.w.row(row);
                    p.b.get(0, row) + w[0] * x[0] + w[1] * x[1] + w[2] * h[0] + w[3] * h[1] + w[4] * h[2]
                })
                .collect();
            for j in 0..3 {
                let (i, f, o, g) = (sig(z[j]), sig(z[3 + j]), sig(z[6 + j]), z[9 + j].tanh());
                c[j] = f * c[j] + i * g;
                h[j] = o * c[j].tanh();
            }
            let want = p.head_b.get(0, 0) + (0..3).map(|j| p.head_w.get(0, j) * h[j]).sum::<f64>();
            assert!((got[step].get(0, 0) - want).abs() < 1e-12);
        }
    }

    #[test]
    fn bounded_inputs_stay_finite() {
        let p = LstmParams::init(3, 8, 2, 1);
        let inputs: Vec<Matrix> = (0..20).map(|i| Matrix::filled(2, 3, if i % 2 == 0 { 1e3 } else { -1e3 })).collect();
        assert!(lstm_forward(&p, &inputs).unwrap().iter().all(|m| m.is_finite()));
    }

    #[test]
    fn init_forget_bias_and_bounds() {
        let p = LstmParams::init(4, 5, 1, 2);
        let bound = 1.0 / 3.0;
        assert!(p.w.max_abs() <= bound);
        assert!((5..10).all(|j| p.b.get(0, j) == 1.0));
        assert_eq!(p, LstmParams::init(4, 5, 1, 2));
    }

    #[test]
    fn shape_checks() {
        let p = LstmParams::zeros(2, 3, 1);
        assert!(lstm_forward(&p, &[]).is_err());
        assert!(lstm_forward(&p, &[Matrix::zeros(1, 3)]).is_err());
    }
}
