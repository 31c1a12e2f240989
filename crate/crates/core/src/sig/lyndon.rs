//! Lyndon words and log-signature coordinates.
//!
//! A log-signature is a Lie element, and a Lie element is determined by its
//! coefficients on Lyndon words: the standard bracketing `P_w` of a Lyndon
//! word `w` equals `w` plus lexicographically larger words of the same
//! length, so the coefficient read-off is triangular and invertible.

use super::tensor::{TruncatedTensor, Word};
use crate::error::{Error, Result};

/// True when `letters` is strictly smaller than each of its proper rotations.
pub fn is_lyndon(letters: &[usize]) -> bool {
    let n = letters.len();
    if n == 0 {
        return false;
    }
    (1..n).all(|s| {
        let rotated = letters[s..].iter().chain(&letters[..s]);
        letters.iter().lt(rotated)
    })
}

fn mobius(mut n: usize) -> i64 {
    let mut result = 1;
    let mut p = 2;
    while p * p <= n {
        if n % p == 0 {
            n /= p;
            if n % p == 0 {
                return 0;
            }
            result = -result;
        }
        p += 1;
    }
    if n > 1 {
        result = -result;
    }
    result
}

/// Number of Lyndon words of length exactly `k` over `dim` letters.
pub fn witt_level(dim: usize, k: usize) -> usize {
    let mut total: i64 = 0;
    for j in 1..=k {
        if k % j == 0 {
            total += mobius(j) * (dim as i64).pow((k / j) as u32);
        }
    }
    (total / k as i64) as usize
}

/// Dimension of the free Lie algebra truncated at `order`.
pub fn witt_dimension(dim: usize, order: usize) -> usize {
    (1..=order).map(|k| witt_level(dim, k)).sum()
}

/// All Lyndon words of length `<= order`, sorted by (length, lexicographic).
pub fn lyndon_basis(dim: usize, order: usize) -> Result<Vec<Word>> {
    if dim == 0 || order == 0 {
        return Err(Error::arg(format!("lyndon basis needs d >= 1 and m >= 1, got d={dim}, m={order}")));
    }
    // Duval's generator, letters 0-based, output in lexicographic order.
    let mut out: Vec<Word> = Vec::new();
    let mut w: Vec<isize> = vec![-1];
    while !w.is_empty() {
        *w.last_mut().unwrap() += 1;
        out.push(Word::new(w.iter().map(|&l| l as usize + 1).collect()));
        let m = w.len();
        while w.len() < order {
            w.push(w[w.len() - m]);
        }
        while w.last() == Some(&(dim as isize - 1)) {
            w.pop();
        }
    }
    out.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    Ok(out)
}

/// Standard factorisation `w = u v` with `v` the longest proper Lyndon suffix.
pub fn standard_factorization(word: &Word) -> Option<(Word, Word)> {
    let l = word.letters();
    if l.len() < 2 {
        return None;
    }
    (1..l.len())
        .find(|&s| is_lyndon(&l[s..]))
        .map(|s| (Word::from(&l[..s]), Word::from(&l[s..])))
}

/// Dense level block of the standard Lie bracketing `P_w`.
pub fn bracket_expansion(word: &Word, dim: usize) -> Vec<f64> {
    match standard_factorization(word) {
        None => {
            let mut v = vec![0.0; dim];
            v[word.letters()[0] - 1] = 1.0;
            v
        }
        Some((u, v)) => {
            let pu = bracket_expansion(&u, dim);
            let pv = bracket_expansion(&v, dim);
            let mut out = vec![0.0; pu.len() * pv.len()];
            for (i, &a) in pu.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (j, &b) in pv.iter().enumerate() {
                    out[i * pv.len() + j] += a * b;
                }
            }
            for (j, &b) in pv.iter().enumerate() {
                if b == 0.0 {
                    continue;
                }
                for (i, &a) in pu.iter().enumerate() {
                    out[j * pu.len() + i] -= b * a;
                }
            }
            out
        }
    }
}

/// Coordinates of a truncated log-signature on the Lyndon words.
#[derive(Clone, Debug, PartialEq)]
pub struct LogSigVector {
    pub dim: usize,
    pub order: usize,
    pub coords: Vec<f64>,
}

/// Precomputed Lyndon words with their positions inside tensor levels.
#[derive(Clone, Debug)]
pub struct LyndonBasis {
    dim: usize,
    order: usize,
    words: Vec<Word>,
    slots: Vec<(usize, usize)>,
}

impl LyndonBasis {
    pub fn new(dim: usize, order: usize) -> Result<Self> {
        let words = lyndon_basis(dim, order)?;
        let slots = words
            .iter()
            .map(|w| Ok((w.len(), w.index(dim)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(LyndonBasis { dim, order, words, slots })
    }

    pub fn words(&self) -> &[Word] {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Reads the Lyndon-word coefficients off a tensor logarithm.
    pub fn project(&self, log: &TruncatedTensor) -> Result<LogSigVector> {
        if log.dim() != self.dim || log.order() != self.order {
            return Err(Error::arg("tensor shape does not match the Lyndon basis"));
        }
        let coords = self.slots.iter().map(|&(k, i)| log.level(k)[i]).collect();
        Ok(LogSigVector { dim: self.dim, order: self.order, coords })
    }

    /// Writes the projection straight into `out` (length `self.len()`).
    pub fn project_into(&self, log: &TruncatedTensor, out: &mut [f64]) {
        for (o, &(k, i)) in out.iter_mut().zip(&self.slots) {
            *o = log.level(k)[i];
        }
    }

    /// Rebuilds the full Lie element `sum_w c_w P_w` from Lyndon read-offs.
    pub fn reconstruct(&self, v: &LogSigVector) -> Result<TruncatedTensor> {
        if v.coords.len() != self.len() {
            return Err(Error::arg("coordinate vector length does not match basis"));
        }
        let mut out = TruncatedTensor::zero(self.dim, self.order);
        let expansions: Vec<Vec<f64>> =
            self.words.iter().map(|w| bracket_expansion(w, self.dim)).collect();
        // Solve the triangular system level by level, in increasing word order.
        let mut c = vec![0.0; self.len()];
        for a in 0..self.len() {
            let (k, idx) = self.slots[a];
            let mut rhs = v.coords[a];
            for b in 0..a {
                if self.slots[b].0 == k {
                    rhs -= c[b] * expansions[b][idx];
                }
            }
            c[a] = rhs / expansions[a][idx];
        }
        for (a, exp) in expansions.iter().enumerate() {
            let k = self.slots[a].0;
            out.level_mut(k).iter_mut().zip(exp).for_each(|(o, e)| *o += c[a] * e);
        }
        Ok(out)
    }
}
