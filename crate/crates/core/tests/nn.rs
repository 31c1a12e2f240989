use proptest::prelude::*;
use sigfbsde::nn::checkpoint::{read_checkpoint, write_checkpoint};
use sigfbsde::nn::{lstm_forward, sgd_step, LstmParams, Matrix, OptimState, Tape};

fn mat(rows: usize, cols: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-1.0f64..1.0, rows * cols).prop_map(move |v| Matrix::from_vec(rows, cols, v).unwrap())
}

fn naive(a: &Matrix, b: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(a.rows(), b.cols());
    for i in 0..a.rows() {
        for j in 0..b.cols() {
            out.set(i, j, (0..a.cols()).map(|k| a.get(i, k) * b.get(k, j)).sum());
        }
    }
    out
}

fn max_diff(a: &Matrix, b: &Matrix) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// LSTM over `xs` with a squared-output loss, all parameters as leaves.
fn lstm_loss(p: &LstmParams, xs: &[Matrix], grads: bool) -> (f64, Vec<Matrix>) {
    let mut tape = Tape::new();
    let vars = p.to_tape(&mut tape, true);
    let mut state = vars.zero_state(&mut tape, xs[0].rows());
    let mut total = None;
    for x in xs {
        let xv = tape.constant(x.clone());
        let (s, out) = vars.step(&mut tape, xv, state).unwrap();
        state = s;
        let sq = tape.square(out);
        let m = tape.mean(sq);
        total = Some(match total {
            None => m,
            Some(t) => tape.add(t, m).unwrap(),
        });
    }
    let loss = total.unwrap();
    let value = tape.value(loss).data()[0];
    if !grads {
        return (value, Vec::new());
    }
    let mut g = tape.backward(loss).unwrap();
    let out = vars.vars().iter().zip(p.blocks()).map(|(&v, m)| g.take_or_zero(v, m.shape())).collect();
    (value, out)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn products_match_naive((a, b) in (1usize..40, 1usize..40, 1usize..40).prop_flat_map(|(n, k, m)| (mat(n, k), mat(k, m)))) {
        let want = naive(&a, &b);
        prop_assert!(max_diff(&a.matmul(&b).unwrap(), &want) <= 1e-12);
        prop_assert!(max_diff(&a.matmul_nt(&b.transpose()).unwrap(), &want) <= 1e-12);
        prop_assert!(max_diff(&a.transpose().matmul_tn(&b).unwrap(), &want) <= 1e-12);
        prop_assert!(a.matmul(&a).is_err() || a.rows() == a.cols());
    }

    #[test]
    fn lstm_tape_gradient_matches_differences(
        seed in any::<u64>(),
        input in 1usize..4,
        hidden in 1usize..5,
        output in 1usize..3,
        xs in prop::collection::vec(mat(3, 3), 1..4),
    ) {
        let xs: Vec<Matrix> = xs.iter().map(|x| Matrix::from_vec(3, input, x.data()[..3 * input].to_vec()).unwrap()).collect();
        let mut p = LstmParams::init(input, hidden, output, seed);
        let (_, ad) = lstm_loss(&p, &xs, true);
        for b in 0..4 {
            for i in 0..p.blocks()[b].len() {
                let x = p.blocks()[b].data()[i];
                let h = 1e-6;
                p.blocks_mut()[b].data_mut()[i] = x + h;
                let up = lstm_loss(&p, &xs, false).0;
                p.blocks_mut()[b].data_mut()[i] = x - h;
                let down = lstm_loss(&p, &xs, false).0;
                p.blocks_mut()[b].data_mut()[i] = x;
                let fd = (up - down) / (2.0 * h);
                let a = ad[b].data()[i];
                prop_assert!((a - fd).abs() <= 1e-6 * (1.0 + fd.abs()), "block {} entry {}: {} vs {}", b, i, a, fd);
            }
        }
    }

    #[test]
    fn tape_forward_matches_lstm_forward(seed in any::<u64>(), xs in prop::collection::vec(mat(2, 3), 1..5)) {
        let p = LstmParams::init(3, 4, 2, seed);
        let outs = lstm_forward(&p, &xs).unwrap();
        let mut tape = Tape::new();
        let vars = p.to_tape(&mut tape, true);
        let mut state = vars.zero_state(&mut tape, 2);
        for (x, want) in xs.iter().zip(&outs) {
            let xv = tape.constant(x.clone());
            let (s, o) = vars.step(&mut tape, xv, state).unwrap();
            state = s;
            prop_assert_eq!(tape.value(o), want);
        }
    }

    #[test]
    fn checkpoint_roundtrip(blocks in prop::collection::vec((1usize..5, 1usize..5, any::<u64>()), 0..6)) {
        let named: Vec<(String, Matrix)> = blocks
            .iter()
            .enumerate()
            .map(|(i, &(r, c, bits))| {
                let data = (0..r * c).map(|k| f64::from_bits(bits.rotate_left(k as u32) & !(0x7ffu64 << 52) | (0x3ffu64 << 52))).collect();
                (format!("block{i}"), Matrix::from_vec(r, c, data).unwrap())
            })
            .collect();
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &named).unwrap();
        prop_assert_eq!(&read_checkpoint(&mut buf.as_slice()).unwrap(), &named);
        if !buf.is_empty() {
            let cut = buf.len() - 1;
            prop_assert!(read_checkpoint(&mut &buf[..cut]).is_err());
        }
    }
}

#[test]
fn leaf_used_twice_accumulates() {
    let mut t = Tape::new();
    let x = t.leaf(Matrix::scalar(3.0));
    let y = t.mul(x, x).unwrap();
    let z = t.add(y, x).unwrap();
    let g = t.backward(z).unwrap();
    assert_eq!(g.get(x).unwrap().data(), &[7.0]);
}

#[test]
fn optimizers_minimise_a_quadratic() {
    let target = Matrix::from_vec(1, 3, vec![1.5, -2.0, 0.25]).unwrap();
    let grad = |x: &Matrix| x.zip_map(&target, |a, b| 2.0 * (a - b)).unwrap();

    let mut x = Matrix::zeros(1, 3);
    let mut adam = OptimState::adam(0.05, 0.9, 0.999, 1e-8, &[&x]);
    for _ in 0..2000 {
        let g = grad(&x);
        adam.adam_step(&mut [&mut x], &[&g]).unwrap();
    }
    assert!(max_diff(&x, &target) < 1e-3, "{:?}", x.data());

    let mut y = Matrix::zeros(1, 3);
    for _ in 0..200 {
        let g = grad(&y);
        sgd_step(0.1, &mut [&mut y], &[&g]).unwrap();
    }
    assert!(max_diff(&y, &target) < 1e-12);
}
