//! Signatures and log-signatures of piecewise-linear paths.

mod layer;
mod lyndon;
mod tensor;

pub use layer::{sig_sequence_layer, FeatureScaling, SegmentSpec, SigLayer};
pub use lyndon::{
    bracket_expansion, is_lyndon, lyndon_basis, standard_factorization, witt_dimension, witt_level,
    LogSigVector, LyndonBasis,
};
pub use tensor::{chen_concat, shuffle_eval, sig_width, TruncatedTensor, Word};

use crate::error::{Error, Result};
use crate::sde::{PathGrid, PathRef};

/// Prepends the time mesh as coordinate 1 of every point.
pub fn time_augment(path: &PathGrid) -> Result<PathGrid> {
    path.validate_mesh()?;
    if path.is_time_augmented() {
        return Err(Error::InvalidPath("path is already time-augmented".into()));
    }
    let d = path.dim();
    let mut values = Vec::with_capacity(path.values().len() / d * (d + 1));
    for j in 0..path.n_paths() {
        for (i, &t) in path.times().iter().enumerate() {
            values.push(t);
            values.extend_from_slice(path.point(j, i));
        }
    }
    Ok(PathGrid::new(path.times().to_vec(), values, path.n_paths(), d + 1)?.with_augmented_flag(true))
}

/// Exact truncated signature of the piecewise-linear interpolant.
pub fn signature(path: PathRef<'_>, order: usize) -> Result<TruncatedTensor> {
    if order < 1 {
        return Err(Error::arg("signature order must be >= 1"));
    }
    if path.n_points() == 0 {
        return Err(Error::arg("empty path"));
    }
    let d = path.dim;
    let mut sig = TruncatedTensor::identity(d, order);
    let mut inc = vec![0.0; d];
    for i in 1..path.n_points() {
        let (a, b) = (path.point(i - 1), path.point(i));
        inc.iter_mut().zip(a.iter().zip(b)).for_each(|(s, (x, y))| *s = y - x);
        if inc.iter().all(|&x| x == 0.0) {
            continue;
        }
        sig.mul_exp_vector_in_place(&inc);
    }
    Ok(sig)
}

/// Signature of the single path held by a one-path grid.
pub fn signature_of_grid(grid: &PathGrid, order: usize) -> Result<TruncatedTensor> {
    if grid.n_paths() != 1 {
        return Err(Error::arg(format!("expected a single path, got {}", grid.n_paths())));
    }
    signature(grid.path(0), order)
}

/// Lyndon coordinates of `log(signature(path))`.
pub fn log_signature(path: PathRef<'_>, order: usize) -> Result<LogSigVector> {
    let sig = signature(path, order)?;
    let basis = LyndonBasis::new(path.dim, order)?;
    basis.project(&sig.log()?)
}
