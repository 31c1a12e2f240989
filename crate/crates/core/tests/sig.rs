use proptest::prelude::*;
use sigfbsde::oracles::brute_force_signature;
use sigfbsde::sde::PathGrid;
use sigfbsde::sig::{
    chen_concat, is_lyndon, log_signature, lyndon_basis, shuffle_eval, sig_sequence_layer, sig_width, signature,
    time_augment, witt_dimension, witt_level, LyndonBasis, SegmentSpec, TruncatedTensor, Word,
};

fn grid(rows: &[Vec<f64>]) -> PathGrid {
    PathGrid::single(PathGrid::uniform_times(rows.len() - 1, 1.0), rows).unwrap()
}

fn reversed(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    rows.iter().rev().cloned().collect()
}

/// `(rows, order)` with `d <= 4`, `m <= 5` and up to eight points.
fn path_and_order(max_points: usize) -> impl Strategy<Value = (Vec<Vec<f64>>, usize)> {
    (1usize..=4, 1usize..=5, 2usize..=max_points).prop_flat_map(|(d, m, n)| {
        let m = if d == 4 { m.min(4) } else { m };
        (prop::collection::vec(prop::collection::vec(-1.0f64..1.0, d), n), Just(m))
    })
}

fn close(a: &TruncatedTensor, b: &TruncatedTensor, tol: f64) -> bool {
    a.max_abs_diff(b) <= tol
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn chen_identity((rows, m) in path_and_order(8), cut in 0.0f64..1.0) {
        let g = grid(&rows);
        let k = 1 + (cut * (rows.len() - 2) as f64) as usize;
        let left = signature(g.path(0).window(0, k), m).unwrap();
        let right = signature(g.path(0).window(k, rows.len() - 1), m).unwrap();
        let whole = signature(g.path(0), m).unwrap();
        prop_assert!(close(&chen_concat(&left, &right).unwrap(), &whole, 1e-11));
    }

    #[test]
    fn shuffle_identity((rows, w1, w2) in (1usize..=3).prop_flat_map(|d| (
        prop::collection::vec(prop::collection::vec(-1.0f64..1.0, d), 2..6),
        prop::collection::vec(1..=d, 1..=3).prop_map(Word::new),
        prop::collection::vec(1..=d, 1..=2).prop_map(Word::new),
    ))) {
        let s = signature(grid(&rows).path(0), w1.len() + w2.len()).unwrap();
        let lhs = s.get(&w1).unwrap() * s.get(&w2).unwrap();
        prop_assert!((lhs - shuffle_eval(&s, &w1, &w2).unwrap()).abs() <= 1e-11);
    }

    #[test]
    fn exp_inverts_log((rows, m) in path_and_order(8)) {
        let s = signature(grid(&rows).path(0), m).unwrap();
        let log = s.log().unwrap();
        prop_assert_eq!(log.scalar(), 0.0);
        prop_assert!(close(&log.exp(), &s, 1e-11));
        prop_assert!(close(&log.exp().log().unwrap(), &log, 1e-11));
    }

    #[test]
    fn log_signature_is_lie((rows, m) in path_and_order(6)) {
        let d = rows[0].len();
        let s = signature(grid(&rows).path(0), m).unwrap();
        let log = s.log().unwrap();
        let basis = LyndonBasis::new(d, m).unwrap();
        let coords = basis.project(&log).unwrap();
        prop_assert_eq!(coords.coords.len(), witt_dimension(d, m));
        prop_assert!(close(&basis.reconstruct(&coords).unwrap(), &log, 1e-10));
    }

    #[test]
    fn matches_brute_force(rows in (1usize..=3).prop_flat_map(|d| prop::collection::vec(prop::collection::vec(-1.0f64..1.0, d), 2..5)), m in 1usize..=3) {
        let g = grid(&rows);
        let exact = signature(g.path(0), m).unwrap();
        let brute = brute_force_signature(g.path(0), m, 16).unwrap();
        prop_assert!(close(&exact, &brute, 1e-10));
    }

    #[test]
    fn reversal_is_inverse((rows, m) in path_and_order(6)) {
        let d = rows[0].len();
        let fwd = signature(grid(&rows).path(0), m).unwrap();
        let back = signature(grid(&reversed(&rows)).path(0), m).unwrap();
        prop_assert!(close(&fwd.mul(&back).unwrap(), &TruncatedTensor::identity(d, m), 1e-10));
    }

    #[test]
    fn invariant_under_subdivision((rows, m) in path_and_order(6), at in 0.0f64..1.0, frac in 0.01f64..0.99) {
        let i = (at * (rows.len() - 1) as f64) as usize;
        let mid: Vec<f64> = rows[i].iter().zip(&rows[i + 1]).map(|(a, b)| a + frac * (b - a)).collect();
        let mut finer = rows.clone();
        finer.insert(i + 1, mid);
        let a = signature(grid(&rows).path(0), m).unwrap();
        let b = signature(grid(&finer).path(0), m).unwrap();
        prop_assert!(close(&a, &b, 1e-11));
    }

    #[test]
    fn translation_invariant((rows, m) in path_and_order(6), shift in -5.0f64..5.0) {
        let moved: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|x| x + shift).collect()).collect();
        let a = signature(grid(&rows).path(0), m).unwrap();
        let b = signature(grid(&moved).path(0), m).unwrap();
        prop_assert!(close(&a, &b, 1e-11));
    }

    #[test]
    fn segment_layer_matches_window_log_signatures(
        rows in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 2), 13),
        m in 1usize..=3,
    ) {
        let g = grid(&rows);
        let spec = SegmentSpec::new(12, 4, 1.0).unwrap();
        let layer = sig_sequence_layer(&g, &spec, m, true).unwrap();
        let aug = time_augment(&g).unwrap();
        for (q, feats) in layer.iter().enumerate() {
            let (a, b) = spec.bounds(q);
            let direct = log_signature(aug.path(0).window(a, b), m).unwrap();
            for (x, y) in feats.iter().zip(&direct.coords) {
                prop_assert!((x - y).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn dimension_laws() {
    for d in 1..=4usize {
        for m in 1..=5usize {
            let width: usize = (1..=m).map(|k| d.pow(k as u32)).sum();
            assert_eq!(sig_width(d, m), width);
            assert_eq!(TruncatedTensor::zero(d, m).flatten().len(), width);
            let basis = lyndon_basis(d, m).unwrap();
            assert_eq!(basis.len(), witt_dimension(d, m), "d={d} m={m}");
            assert!(basis.iter().all(|w| is_lyndon(w.letters()) && w.len() <= m));
            // Necklace identity: sum over divisors k of n of k * L_k = d^n.
            let necklace: usize = (1..=m).filter(|k| m % k == 0).map(|k| k * witt_level(d, k)).sum();
            assert_eq!(necklace, d.pow(m as u32));
        }
    }
    assert_eq!(witt_dimension(2, 3), 5);
    assert_eq!(witt_dimension(3, 3), 14);
}

#[test]
fn one_dimensional_signature_is_exponential() {
    let g = grid(&[vec![0.3], vec![-0.2], vec![1.1]]);
    let s = signature(g.path(0), 5).unwrap();
    let x: f64 = 1.1 - 0.3;
    let mut fact = 1.0;
    for k in 1..=5 {
        fact *= k as f64;
        assert!((s.level(k)[0] - x.powi(k as i32) / fact).abs() < 1e-14);
    }
}
