use crate::error::{Error, Result};
use crate::sde::PathRef;
use crate::sig::{TruncatedTensor, Word};

pub const MAX_QUADRATURE_POINTS: usize = 12;
pub const MAX_QUADRATURE_ORDER: usize = 4;

/// Iterated integrals by nested trapezoidal Riemann–Stieltjes sums.
///
/// Each linear piece is split into `refinement` sub-steps; for every word the
/// integral `I_k(t) = int_0^t I_{k-1} dx^{j_k}` is accumulated step by step.
/// Two resolutions are combined by Richardson extrapolation. Independent of
/// the exponential/Chen route.
pub fn brute_force_signature(path: PathRef<'_>, order: usize, refinement: usize) -> Result<TruncatedTensor> {
    let n = path.n_points();
    if n > MAX_QUADRATURE_POINTS || order > MAX_QUADRATURE_ORDER {
        return Err(Error::Complexity(format!(
            "brute-force quadrature limited to {MAX_QUADRATURE_POINTS} points and order {MAX_QUADRATURE_ORDER}, got {n} points, order {order}"
        )));
    }
    if n == 0 || order == 0 || refinement == 0 {
        return Err(Error::arg("quadrature needs a non-empty path, order >= 1 and refinement >= 1"));
    }
    let coarse = nested_sums(path, order, refinement);
    let fine = nested_sums(path, order, 2 * refinement);
    let levels = coarse
        .iter()
        .zip(&fine)
        .map(|(c, f)| c.iter().zip(f).map(|(a, b)| (4.0 * b - a) / 3.0).collect())
        .collect();
    let mut out = TruncatedTensor::from_levels(path.dim, levels)?;
    out.level_mut(0)[0] = 1.0;
    Ok(out)
}

fn nested_sums(path: PathRef<'_>, order: usize, refinement: usize) -> Vec<Vec<f64>> {
    let d = path.dim;
    // Fine increments of the piecewise-linear interpolant.
    let mut incs: Vec<&[f64]> = Vec::new();
    let mut pieces = Vec::new();
    for i in 1..path.n_points() {
        let (a, b) = (path.point(i - 1), path.point(i));
        pieces.push(a.iter().zip(b).map(|(x, y)| (y - x) / refinement as f64).collect::<Vec<f64>>());
    }
    for p in &pieces {
        for _ in 0..refinement {
            incs.push(p);
        }
    }
    let mut levels = vec![vec![1.0]];
    for k in 1..=order {
        let mut block = vec![0.0; d.pow(k as u32)];
        for (idx, slot) in block.iter_mut().enumerate() {
            let word = Word::from_index(idx, k, d);
            let letters = word.letters();
            // acc[j] holds I_j at the current time for the prefix of length j.
            let mut acc = vec![0.0; k + 1];
            acc[0] = 1.0;
            for inc in &incs {
                let prev = acc.clone();
                for j in 1..=k {
                    let dx = inc[letters[j - 1] - 1];
                    acc[j] = prev[j] + 0.5 * (prev[j - 1] + acc[j - 1]) * dx;
                }
            }
            *slot = acc[k];
        }
        levels.push(block);
    }
    levels
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sde::PathGrid;
    use crate::sig::signature;

    #[test]
    fn linear_segment_matches_exponential() {
        let g = PathGrid::single(vec![0.0, 1.0], &[vec![0.0, 0.0], vec![0.7, -1.2]]).unwrap();
        let bf = brute_force_signature(g.path(0), 4, 1 << 10).unwrap();
        let ex = TruncatedTensor::exp_of_vector(&[0.7, -1.2], 4);
        assert!(bf.max_abs_diff(&ex) < 1e-6);
    }

    #[test]
    fn two_segments_match_chen_route() {
        let rows = vec![vec![0.0, 1.0], vec![0.5, -0.3], vec![-0.2, 0.4]];
        let g = PathGrid::single(vec![0.0, 0.5, 1.0], &rows).unwrap();
        let bf = brute_force_signature(g.path(0), 3, 256).unwrap();
        let chen = signature(g.path(0), 3).unwrap();
        assert!(bf.max_abs_diff(&chen) < 1e-6);
    }

    #[test]
    fn complexity_guard() {
        let rows: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64]).collect();
        let g = PathGrid::single(PathGrid::uniform_times(49, 1.0), &rows).unwrap();
        assert!(matches!(brute_force_signature(g.path(0), 4, 8), Err(Error::Complexity(_))));
        let small = g.path(0).window(0, 3);
        assert!(matches!(brute_force_signature(small, 5, 8), Err(Error::Complexity(_))));
    }
}
