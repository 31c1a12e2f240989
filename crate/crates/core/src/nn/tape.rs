//! Reverse-mode differentiation over dense matrices.
//!
//! Nodes are appended in evaluation order, so the node list is already a
//! topological order and the backward pass is a single reverse sweep.
//! Adjoints are summed into each parent. Constants (`needs_grad == false`)
//! receive no adjoint at all.

use super::matrix::{gemm_nn, gemm_nt, gemm_tn, Matrix};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
struct LstmCache {
    /// `[x | h_prev]`
    xh: Matrix,
    /// Activated gates `[i | f | o | g]`.
    gates: Matrix,
    tanh_c: Matrix,
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(usize, usize),
    MatMulNT(usize, usize),
    AddRow(usize, usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Scale(usize, f64),
    AddScalar(usize),
    Sigmoid(usize),
    Tanh(usize),
    Relu(usize),
    Square(usize),
    Sqrt(usize),
    RowNorm(usize),
    SliceCols(usize, usize),
    ConcatCols(Vec<usize>),
    Mean(usize),
    SumCols(usize),
    BroadcastRows(usize),
    Lstm { x: usize, state: usize, w: usize, b: usize, cache: LstmCache },
}

#[derive(Debug)]
struct Node {
    op: Op,
    value: Matrix,
    needs_grad: bool,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Adjoints of every node that needs a gradient, indexed by `Var`.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Matrix> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    /// Adjoint of `v`, zeros of `shape` if nothing reached it.
    pub fn take_or_zero(&mut self, v: Var, shape: (usize, usize)) -> Matrix {
        self.grads.get_mut(v.0).and_then(|g| g.take()).unwrap_or_else(|| Matrix::zeros(shape.0, shape.1))
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn col_sums(m: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(1, m.cols());
    for i in 0..m.rows() {
        out.data_mut().iter_mut().zip(m.row(i)).for_each(|(o, x)| *o += x);
    }
    out
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op: Op, value: Matrix, needs_grad: bool) -> Var {
        self.nodes.push(Node { op, value, needs_grad });
        Var(self.nodes.len() - 1)
    }

    fn ng(&self, vs: &[usize]) -> bool {
        vs.iter().any(|&v| self.nodes[v].needs_grad)
    }

    /// Trainable input.
    pub fn leaf(&mut self, m: Matrix) -> Var {
        self.push(Op::Leaf, m, true)
    }

    /// Input that needs no gradient.
    pub fn constant(&mut self, m: Matrix) -> Var {
        self.push(Op::Leaf, m, false)
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn needs_grad(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn val(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.val(a).matmul(self.val(b))?;
        let ng = self.ng(&[a.0, b.0]);
        Ok(self.push(Op::MatMul(a.0, b.0), value, ng))
    }

    /// `a * b^T`.
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.val(a).matmul_nt(self.val(b))?;
        let ng = self.ng(&[a.0, b.0]);
        Ok(self.push(Op::MatMulNT(a.0, b.0), value, ng))
    }

    /// Adds the `1 x c` row `bias` to every row of `a`.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (av, bv) = (self.val(a), self.val(bias));
        if bv.rows() != 1 || bv.cols() != av.cols() {
            return Err(Error::arg(format!("add_row {:?} + {:?}", av.shape(), bv.shape())));
        }
        let mut value = av.clone();
        for i in 0..value.rows() {
            value.row_mut(i).iter_mut().zip(bv.data()).for_each(|(o, b)| *o += b);
        }
        let ng = self.ng(&[a.0, bias.0]);
        Ok(self.push(Op::AddRow(a.0, bias.0), value, ng))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.val(a).zip_map(self.val(b), |x, y| x + y)?;
        let ng = self.ng(&[a.0, b.0]);
        Ok(self.push(Op::Add(a.0, b.0), value, ng))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.val(a).zip_map(self.val(b), |x, y| x - y)?;
        let ng = self.ng(&[a.0, b.0]);
        Ok(self.push(Op::Sub(a.0, b.0), value, ng))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.val(a).zip_map(self.val(b), |x, y| x * y)?;
        let ng = self.ng(&[a.0, b.0]);
        Ok(self.push(Op::Mul(a.0, b.0), value, ng))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let value = self.val(a).scale(c);
        let ng = self.ng(&[a.0]);
        self.push(Op::Scale(a.0, c), value, ng)
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Var {
        let value = self.val(a).map(|x| x + c);
        let ng = self.ng(&[a.0]);
        self.push(Op::AddScalar(a.0), value, ng)
    }

    fn unary(&mut self, a: Var, op: Op, f: impl Fn(f64) -> f64) -> Var {
        let value = self.val(a).map(f);
        let ng = self.ng(&[a.0]);
        self.push(op, value, ng)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(a, Op::Sigmoid(a.0), sigmoid)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, Op::Tanh(a.0), f64::tanh)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.unary(a, Op::Relu(a.0), |x| x.max(0.0))
    }

    pub fn square(&mut self, a: Var) -> Var {
        self.unary(a, Op::Square(a.0), |x| x * x)
    }

    /// Square root of a nonnegative input; the adjoint at 0 is taken as 0.
    pub fn sqrt(&mut self, a: Var) -> Var {
        self.unary(a, Op::Sqrt(a.0), |x| x.max(0.0).sqrt())
    }

    /// Euclidean norm of each row, `r x c -> r x 1`.
    pub fn row_norm(&mut self, a: Var) -> Var {
        let av = self.val(a);
        let data = (0..av.rows()).map(|i| av.row(i).iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
        let value = Matrix::from_vec(av.rows(), 1, data).unwrap();
        let ng = self.ng(&[a.0]);
        self.push(Op::RowNorm(a.0), value, ng)
    }

    /// Columns `start..end`.
    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let av = self.val(a);
        if start >= end || end > av.cols() {
            return Err(Error::arg(format!("slice {start}..{end} of {} columns", av.cols())));
        }
        let mut value = Matrix::zeros(av.rows(), end - start);
        for i in 0..av.rows() {
            value.row_mut(i).copy_from_slice(&av.row(i)[start..end]);
        }
        let ng = self.ng(&[a.0]);
        Ok(self.push(Op::SliceCols(a.0, start), value, ng))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let rows = parts.first().map(|&p| self.val(p).rows()).ok_or_else(|| Error::arg("concat of nothing"))?;
        if parts.iter().any(|&p| self.val(p).rows() != rows) {
            return Err(Error::arg("concat_cols row mismatch"));
        }
        let cols: usize = parts.iter().map(|&p| self.val(p).cols()).sum();
        let mut value = Matrix::zeros(rows, cols);
        for i in 0..rows {
            let mut off = 0;
            for &p in parts {
                let r = self.val(p).row(i);
                value.row_mut(i)[off..off + r.len()].copy_from_slice(r);
                off += r.len();
            }
        }
        let idx: Vec<usize> = parts.iter().map(|p| p.0).collect();
        let ng = self.ng(&idx);
        Ok(self.push(Op::ConcatCols(idx), value, ng))
    }

    /// Mean of all entries, `1 x 1`.
    pub fn mean(&mut self, a: Var) -> Var {
        let av = self.val(a);
        let value = Matrix::scalar(av.sum() / av.len() as f64);
        let ng = self.ng(&[a.0]);
        self.push(Op::Mean(a.0), value, ng)
    }

    /// Row sums, `r x c -> r x 1`.
    pub fn sum_cols(&mut self, a: Var) -> Var {
        let av = self.val(a);
        let data = (0..av.rows()).map(|i| av.row(i).iter().sum()).collect();
        let value = Matrix::from_vec(av.rows(), 1, data).unwrap();
        let ng = self.ng(&[a.0]);
        self.push(Op::SumCols(a.0), value, ng)
    }

    /// Repeats a `1 x c` row `rows` times.
    pub fn broadcast_rows(&mut self, a: Var, rows: usize) -> Result<Var> {
        let av = self.val(a);
        if av.rows() != 1 {
            return Err(Error::arg("broadcast_rows needs a single row"));
        }
        let mut value = Matrix::zeros(rows, av.cols());
        for i in 0..rows {
            value.row_mut(i).copy_from_slice(av.data());
        }
        let ng = self.ng(&[a.0]);
        Ok(self.push(Op::BroadcastRows(a.0), value, ng))
    }

    /// Fused LSTM cell on `state = [h | c]`.
    ///
    /// `w` is `4h x (in + h)` with row blocks `i, f, o, g`; `b` is `1 x 4h`.
    pub fn lstm_cell(&mut self, x: Var, state: Var, w: Var, b: Var) -> Result<Var> {
        let (xv, sv, wv, bv) = (self.val(x), self.val(state), self.val(w), self.val(b));
        let batch = xv.rows();
        let h = sv.cols() / 2;
        let input = xv.cols();
        if sv.rows() != batch || sv.cols() != 2 * h || h == 0 {
            return Err(Error::arg(format!("lstm state {:?} for batch {batch}", sv.shape())));
        }
        if wv.shape() != (4 * h, input + h) || bv.shape() != (1, 4 * h) {
            return Err(Error::arg(format!(
                "lstm weights {:?}/{:?} for input {input}, hidden {h}",
                wv.shape(),
                bv.shape()
            )));
        }
        let mut xh = Matrix::zeros(batch, input + h);
        for r in 0..batch {
            let row = xh.row_mut(r);
            row[..input].copy_from_slice(xv.row(r));
            row[input..].copy_from_slice(&sv.row(r)[..h]);
        }
        let mut gates = Matrix::zeros(batch, 4 * h);
        for r in 0..batch {
            gates.row_mut(r).copy_from_slice(bv.data());
        }
        gemm_nt(&xh, wv, &mut gates);
        let mut tanh_c = Matrix::zeros(batch, h);
        let mut value = Matrix::zeros(batch, 2 * h);
        for r in 0..batch {
            let g = gates.row_mut(r);
            for v in &mut g[..3 * h] {
                *v = sigmoid(*v);
            }
            for v in &mut g[3 * h..] {
                *v = v.tanh();
            }
            let c_prev = &sv.row(r)[h..];
            let out = value.row_mut(r);
            let tc = tanh_c.row_mut(r);
            for j in 0..h {
                let c = g[h + j] * c_prev[j] + g[j] * g[3 * h + j];
                tc[j] = c.tanh();
                out[j] = g[2 * h + j] * tc[j];
                out[h + j] = c;
            }
        }
        let ng = self.ng(&[x.0, state.0, w.0, b.0]);
        let cache = LstmCache { xh, gates, tanh_c };
        Ok(self.push(Op::Lstm { x: x.0, state: state.0, w: w.0, b: b.0, cache }, value, ng))
    }

    /// Reverse sweep from the scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.val(loss).shape() != (1, 1) {
            return Err(Error::arg(format!("loss must be 1x1, got {:?}", self.val(loss).shape())));
        }
        let mut grads: Vec<Option<Matrix>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Matrix::scalar(1.0));
        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            if matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.propagate(i, &g, &mut grads)?;
        }
        Ok(Gradients { grads })
    }

    fn propagate(&self, i: usize, g: &Matrix, grads: &mut [Option<Matrix>]) -> Result<()> {
        let nodes = &self.nodes;
        let want = |p: usize| nodes[p].needs_grad;
        let mut acc = |p: usize, m: Matrix| match &mut grads[p] {
            Some(existing) => existing.add_assign(&m),
            slot => *slot = Some(m),
        };
        let y = &nodes[i].value;
        match &nodes[i].op {
            Op::Leaf => {}
            &Op::MatMul(a, b) => {
                if want(a) {
                    acc(a, g.matmul_nt(&nodes[b].value)?);
                }
                if want(b) {
                    acc(b, nodes[a].value.matmul_tn(g)?);
                }
            }
            &Op::MatMulNT(a, b) => {
                if want(a) {
                    acc(a, g.matmul(&nodes[b].value)?);
                }
                if want(b) {
                    acc(b, g.matmul_tn(&nodes[a].value)?);
                }
            }
            &Op::AddRow(a, bias) => {
                if want(a) {
                    acc(a, g.clone());
                }
                if want(bias) {
                    acc(bias, col_sums(g));
                }
            }
            &Op::Add(a, b) => {
                if want(a) {
                    acc(a, g.clone());
                }
                if want(b) {
                    acc(b, g.clone());
                }
            }
            &Op::Sub(a, b) => {
                if want(a) {
                    acc(a, g.clone());
                }
                if want(b) {
                    acc(b, g.scale(-1.0));
                }
            }
            &Op::Mul(a, b) => {
                if want(a) {
                    acc(a, g.zip_map(&nodes[b].value, |u, v| u * v)?);
                }
                if want(b) {
                    acc(b, g.zip_map(&nodes[a].value, |u, v| u * v)?);
                }
            }
            &Op::Scale(a, c) => acc(a, g.scale(c)),
            &Op::AddScalar(a) => acc(a, g.clone()),
            &Op::Sigmoid(a) => acc(a, g.zip_map(y, |u, s| u * s * (1.0 - s))?),
            &Op::Tanh(a) => acc(a, g.zip_map(y, |u, t| u * (1.0 - t * t))?),
            &Op::Relu(a) => acc(a, g.zip_map(&nodes[a].value, |u, x| if x > 0.0 { u } else { 0.0 })?),
            &Op::Square(a) => acc(a, g.zip_map(&nodes[a].value, |u, x| 2.0 * u * x)?),
            &Op::Sqrt(a) => acc(a, g.zip_map(y, |u, s| if s > 0.0 { 0.5 * u / s } else { 0.0 })?),
            &Op::RowNorm(a) => {
                let av = &nodes[a].value;
                let mut d = Matrix::zeros(av.rows(), av.cols());
                for r in 0..av.rows() {
                    let n = y.get(r, 0);
                    if n > 0.0 {
                        let s = g.get(r, 0) / n;
                        d.row_mut(r).iter_mut().zip(av.row(r)).for_each(|(o, x)| *o = s * x);
                    }
                }
                acc(a, d);
            }
            &Op::SliceCols(a, start) => {
                let av = &nodes[a].value;
                let mut d = Matrix::zeros(av.rows(), av.cols());
                for r in 0..av.rows() {
                    d.row_mut(r)[start..start + g.cols()].copy_from_slice(g.row(r));
                }
                acc(a, d);
            }
            Op::ConcatCols(parts) => {
                let mut off = 0;
                for &p in parts {
                    let c = nodes[p].value.cols();
                    if want(p) {
                        let mut d = Matrix::zeros(g.rows(), c);
                        for r in 0..g.rows() {
                            d.row_mut(r).copy_from_slice(&g.row(r)[off..off + c]);
                        }
                        acc(p, d);
                    }
                    off += c;
                }
            }
            &Op::Mean(a) => {
                let av = &nodes[a].value;
                acc(a, Matrix::filled(av.rows(), av.cols(), g.get(0, 0) / av.len() as f64));
            }
            &Op::SumCols(a) => {
                let av = &nodes[a].value;
                let mut d = Matrix::zeros(av.rows(), av.cols());
                for r in 0..av.rows() {
                    d.row_mut(r).fill(g.get(r, 0));
                }
                acc(a, d);
            }
            &Op::BroadcastRows(a) => acc(a, col_sums(g)),
            Op::Lstm { x, state, w, b, cache } => {
                let (x, state, w, b) = (*x, *state, *w, *b);
                let sv = &nodes[state].value;
                let h = sv.cols() / 2;
                let batch = sv.rows();
                let input = nodes[x].value.cols();
                let mut dz = Matrix::zeros(batch, 4 * h);
                let mut dc_prev = Matrix::zeros(batch, h);
                for r in 0..batch {
                    let gr = g.row(r);
                    let gates = cache.gates.row(r);
                    let tc = cache.tanh_c.row(r);
                    let c_prev = &sv.row(r)[h..];
                    let dzr = dz.row_mut(r);
                    let dcp = dc_prev.row_mut(r);
                    for j in 0..h {
                        let (ig, fg, og, gg) = (gates[j], gates[h + j], gates[2 * h + j], gates[3 * h + j]);
                        let dh = gr[j];
                        let dc = gr[h + j] + dh * og * (1.0 - tc[j] * tc[j]);
                        dzr[j] = dc * gg * ig * (1.0 - ig);
                        dzr[h + j] = dc * c_prev[j] * fg * (1.0 - fg);
                        dzr[2 * h + j] = dh * tc[j] * og * (1.0 - og);
                        dzr[3 * h + j] = dc * ig * (1.0 - gg * gg);
                        dcp[j] = dc * fg;
                    }
                }
                if want(w) {
                    let mut dw = Matrix::zeros(4 * h, input + h);
                    gemm_tn(&dz, &cache.xh, &mut dw);
                    acc(w, dw);
                }
                if want(b) {
                    acc(b, col_sums(&dz));
                }
                if want(x) || want(state) {
                    let mut dxh = Matrix::zeros(batch, input + h);
                    gemm_nn(&dz, &nodes[w].value, &mut dxh);
                    if want(x) {
                        let mut dx = Matrix::zeros(batch, input);
                        for r in 0..batch {
                            dx.row_mut(r).copy_from_slice(&dxh.row(r)[..input]);
                        }
                        acc(x, dx);
                    }
                    if want(state) {
                        let mut ds = Matrix::zeros(batch, 2 * h);
                        for r in 0..batch {
                            let row = ds.row_mut(r);
                            row[..h].copy_from_slice(&dxh.row(r)[input..]);
                            row[h..].copy_from_slice(dc_prev.row(r));
                        }
                        acc(state, ds);
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Lcg(u64);
    impl Lcg {
        fn next(&mut self) -> f64 {
            self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((self.0 >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        }
        fn matrix(&mut self, r: usize, c: usize) -> Matrix {
            Matrix::from_vec(r, c, (0..r * c).map(|_| self.next()).collect()).unwrap()
        }
    }

    /// Max relative error of the tape gradient against central differences.
    fn check(inputs: Vec<Matrix>, build: impl Fn(&mut Tape, &[Var]) -> Var, tol: f64) {
        let eval = |vals: &[Matrix]| {
            let mut t = Tape::new();
            let vars: Vec<Var> = vals.iter().map(|m| t.leaf(m.clone())).collect();
            let out = build(&mut t, &vars);
            t.value(out).get(0, 0)
        };
        let mut t = Tape::new();
        let vars: Vec<Var> = inputs.iter().map(|m| t.leaf(m.clone())).collect();
        let out = build(&mut t, &vars);
        let grads = t.backward(out).unwrap();
        let h = 1e-5;
        for (k, m) in inputs.iter().enumerate() {
            let g = grads.get(vars[k]).cloned().unwrap_or_else(|| Matrix::zeros(m.rows(), m.cols()));
            for idx in 0..m.len() {
                let mut plus = inputs.clone();
                plus[k].data_mut()[idx] += h;
                let mut minus = inputs.clone();
                minus[k].data_mut()[idx] -= h;
                let fd = (eval(&plus) - eval(&minus)) / (2.0 * h);
                let an = g.data()[idx];
                let err = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-3);
                assert!(err <= tol, "input {k} entry {idx}: fd {fd} vs tape {an}");
            }
        }
    }

    #[test]
    fn square_of_three() {
        let mut t = Tape::new();
        let w = t.leaf(Matrix::scalar(3.0));
        let y = t.square(w);
        let g = t.backward(y).unwrap();
        assert_eq!(g.get(w).unwrap().get(0, 0), 6.0);
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let mut t = Tape::new();
        let w = t.leaf(Matrix::zeros(2, 1));
        assert!(t.backward(w).is_err());
    }

    #[test]
    fn leaf_adjoints_accumulate() {
        let mut t = Tape::new();
        let w = t.leaf(Matrix::scalar(2.0));
        let a = t.square(w);
        let b = t.scale(w, 5.0);
        let s = t.add(a, b).unwrap();
        let g = t.backward(s).unwrap();
        assert_eq!(g.get(w).unwrap().get(0, 0), 9.0);
    }

    #[test]
    fn constants_get_no_adjoint() {
        let mut t = Tape::new();
        let c = t.constant(Matrix::scalar(2.0));
        let w = t.leaf(Matrix::scalar(1.0));
        let p = t.mul(c, w).unwrap();
        let g = t.backward(p).unwrap();
        assert!(g.get(c).is_none());
        assert_eq!(g.get(w).unwrap().get(0, 0), 2.0);
    }

    #[test]
    fn least_squares_gradient() {
        let mut rng = Lcg(11);
        let a = rng.matrix(6, 4);
        let b = rng.matrix(6, 1);
        let w = rng.matrix(4, 1);
        check(
            vec![w],
            move |t, v| {
                let ac = t.constant(a.clone());
                let bc = t.constant(b.clone());
                let aw = t.matmul(ac, v[0]).unwrap();
                let r = t.sub(aw, bc).unwrap();
                let s = t.square(r);
                t.mean(s)
            },
            1e-6,
        );
    }

    #[test]
    fn every_primitive_matches_differences() {
        let mut rng = Lcg(5);
        let inputs = vec![rng.matrix(3, 4), rng.matrix(2, 4), rng.matrix(1, 2), rng.matrix(3, 4)];
        check(
            inputs,
            |t, v| {
                let p = t.matmul_nt(v[0], v[1]).unwrap();
                let p = t.add_row(p, v[2]).unwrap();
                let s = t.sigmoid(p);
                let th = t.tanh(v[3]);
                let m = t.mul(th, v[0]).unwrap();
                let q = t.sub(m, v[3]).unwrap();
                let sl = t.slice_cols(q, 1, 3).unwrap();
                let cat = t.concat_cols(&[s, sl]).unwrap();
                let sq = t.square(cat);
                let sh = t.add_scalar(sq, 0.3);
                let rt = t.sqrt(sh);
                let rn = t.row_norm(rt);
                let sc = t.sum_cols(cat);
                let both = t.add(rn, sc).unwrap();
                let br = t.broadcast_rows(v[2], 3).unwrap();
                let mm = t.matmul(both, v[2]).unwrap();
                let mm = t.mul(mm, br).unwrap();
                let relu = t.relu(mm);
                let out = t.scale(relu, 1.7);
                let total = t.add(out, mm).unwrap();
                t.mean(total)
            },
            1e-6,
        );
    }

    #[test]
    fn lstm_cell_gradient() {
        let mut rng = Lcg(21);
        let (batch, input, h) = (3, 2, 4);
        let inputs = vec![
            rng.matrix(batch, input),
            rng.matrix(batch, 2 * h),
            rng.matrix(4 * h, input + h),
            rng.matrix(1, 4 * h),
        ];
        check(
            inputs,
            |t, v| {
                let s1 = t.lstm_cell(v[0], v[1], v[2], v[3]).unwrap();
                let s2 = t.lstm_cell(v[0], s1, v[2], v[3]).unwrap();
                let sq = t.square(s2);
                t.mean(sq)
            },
            1e-6,
        );
    }

    #[test]
    fn shape_errors() {
        let mut t = Tape::new();
        let a = t.leaf(Matrix::zeros(2, 3));
        let b = t.leaf(Matrix::zeros(2, 2));
        assert!(t.add(a, b).is_err());
        assert!(t.matmul(a, a).is_err());
        assert!(t.slice_cols(a, 2, 5).is_err());
        assert!(t.broadcast_rows(a, 4).is_err());
    }
}
