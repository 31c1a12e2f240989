//! Truncated tensor algebra `T_m(R^d)`.
//!
//! Level `k` is a dense block of `d^k` coefficients. A word `(j1, .., jk)` with
//! letters in `1..=d` is stored at the radix-`d` index
//! `(j1-1) d^(k-1) + .. + (jk-1)`, so concatenating words multiplies the left
//! index by `d^|right|` and adds the right index.

use crate::error::{Error, Result};
use std::fmt;

/// A word over the alphabet `{1, .., d}`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Word(Vec<usize>);

impl Word {
    pub fn new(letters: Vec<usize>) -> Self {
        Word(letters)
    }

    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn letters(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Radix-`dim` index of the word inside its level block.
    pub fn index(&self, dim: usize) -> Result<usize> {
        let mut idx = 0usize;
        for &l in &self.0 {
            if l == 0 || l > dim {
                return Err(Error::arg(format!("letter {l} outside alphabet 1..={dim}")));
            }
            idx = idx * dim + (l - 1);
        }
        Ok(idx)
    }

    /// Inverse of [`Word::index`].
    pub fn from_index(mut idx: usize, len: usize, dim: usize) -> Self {
        let mut letters = vec![0; len];
        for slot in letters.iter_mut().rev() {
            *slot = idx % dim + 1;
            idx /= dim;
        }
        Word(letters)
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Word(v)
    }
}

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, l) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{l}")?;
        }
        write!(f, ")")
    }
}

impl From<&[usize]> for Word {
    fn from(v: &[usize]) -> Self {
        Word(v.to_vec())
    }
}

/// Element of the truncated tensor algebra.
#[derive(Clone, Debug, PartialEq)]
pub struct TruncatedTensor {
    dim: usize,
    order: usize,
    levels: Vec<Vec<f64>>,
}

/// Number of coefficients in levels `1..=order`: `d + d^2 + .. + d^m`.
pub fn sig_width(dim: usize, order: usize) -> usize {
    (1..=order).map(|k| dim.pow(k as u32)).sum()
}

impl TruncatedTensor {
    pub fn zero(dim: usize, order: usize) -> Self {
        assert!(dim >= 1, "alphabet size must be positive");
        let levels = (0..=order).map(|k| vec![0.0; dim.pow(k as u32)]).collect();
        TruncatedTensor { dim, order, levels }
    }

    /// The unit `(1, 0, 0, ..)`.
    pub fn identity(dim: usize, order: usize) -> Self {
        let mut t = Self::zero(dim, order);
        t.levels[0][0] = 1.0;
        t
    }

    pub fn from_levels(dim: usize, levels: Vec<Vec<f64>>) -> Result<Self> {
        if dim == 0 || levels.is_empty() {
            return Err(Error::arg("tensor needs dim >= 1 and a level-0 block"));
        }
        for (k, block) in levels.iter().enumerate() {
            if block.len() != dim.pow(k as u32) {
                return Err(Error::arg(format!(
                    "level {k} has {} entries, expected {}",
                    block.len(),
                    dim.pow(k as u32)
                )));
            }
        }
        let order = levels.len() - 1;
        Ok(TruncatedTensor { dim, order, levels })
    }

    /// Degree-1 element with the given level-1 block.
    pub fn from_vector(v: &[f64], order: usize) -> Self {
        let mut t = Self::zero(v.len(), order);
        if order >= 1 {
            t.levels[1].copy_from_slice(v);
        }
        t
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn levels(&self) -> &[Vec<f64>] {
        &self.levels
    }

    pub fn level(&self, k: usize) -> &[f64] {
        &self.levels[k]
    }

    pub fn level_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.levels[k]
    }

    pub fn scalar(&self) -> f64 {
        self.levels[0][0]
    }

    pub fn get(&self, word: &Word) -> Result<f64> {
        if word.len() > self.order {
            return Err(Error::arg(format!("word {word:?} longer than order {}", self.order)));
        }
        Ok(self.levels[word.len()][word.index(self.dim)?])
    }

    pub fn set(&mut self, word: &Word, value: f64) -> Result<()> {
        if word.len() > self.order {
            return Err(Error::arg(format!("word {word:?} longer than order {}", self.order)));
        }
        let idx = word.index(self.dim)?;
        self.levels[word.len()][idx] = value;
        Ok(())
    }

    /// Levels `1..=order` concatenated.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(sig_width(self.dim, self.order));
        for block in &self.levels[1..] {
            out.extend_from_slice(block);
        }
        out
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.levels
            .iter()
            .zip(&other.levels)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (a, b) in out.levels.iter_mut().zip(&other.levels) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (a, b) in out.levels.iter_mut().zip(&other.levels) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x -= y);
        }
        out
    }

    pub fn scale(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.levels.iter_mut().flatten().for_each(|x| *x *= c);
        out
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim || self.order != other.order {
            return Err(Error::arg(format!(
                "tensor shapes differ: (d={}, m={}) vs (d={}, m={})",
                self.dim, self.order, other.dim, other.order
            )));
        }
        Ok(())
    }

    /// Truncated tensor product.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let mut out = Self::zero(self.dim, self.order);
        mul_into(self, other, &mut out);
        Ok(out)
    }

    /// Tensor exponential of a degree-1 element: `(1, v, v⊗v/2!, ..)`.
    pub fn exp_of_vector(v: &[f64], order: usize) -> Self {
        let dim = v.len();
        let mut t = Self::zero(dim, order);
        t.levels[0][0] = 1.0;
        for k in 1..=order {
            let (prev, cur) = t.levels.split_at_mut(k);
            let prev = &prev[k - 1];
            let cur = &mut cur[0];
            let inv_k = 1.0 / k as f64;
            for (i, &p) in prev.iter().enumerate() {
                let row = &mut cur[i * dim..(i + 1) * dim];
                for (slot, &x) in row.iter_mut().zip(v) {
                    *slot = p * x * inv_k;
                }
            }
        }
        t
    }

    /// In-place right multiplication by `exp(v)` for a degree-1 `v`.
    ///
    /// This is one Chen step of a piecewise-linear signature. Levels are
    /// updated from the top down so lower levels still hold their old values.
    pub fn mul_exp_vector_in_place(&mut self, v: &[f64]) {
        let (mut acc, mut next) = (Vec::new(), Vec::new());
        self.mul_exp_vector_scratch(v, &mut acc, &mut next);
    }

    /// [`Self::mul_exp_vector_in_place`] with caller-owned scratch buffers.
    pub fn mul_exp_vector_scratch(&mut self, v: &[f64], acc: &mut Vec<f64>, next: &mut Vec<f64>) {
        debug_assert_eq!(v.len(), self.dim);
        // new_k = sum_{j=0..k} old_j ⊗ v^{⊗(k-j)} / (k-j)!
        //       = (((old_0 v/k + old_1) v/(k-1) + old_2) v/(k-2) ..) v/1 + old_k
        for k in (1..=self.order).rev() {
            acc.clear();
            acc.push(self.levels[0][0]);
            for j in 1..=k {
                let inv = 1.0 / (k - j + 1) as f64;
                next.clear();
                for &a in acc.iter() {
                    let s = a * inv;
                    next.extend(v.iter().map(|&x| s * x));
                }
                next.iter_mut().zip(&self.levels[j]).for_each(|(n, o)| *n += o);
                std::mem::swap(acc, next);
            }
            self.levels[k].copy_from_slice(acc);
        }
    }

    /// Tensor exponential `sum_k x^k / k!` (the scalar part is factored out).
    pub fn exp(&self) -> Self {
        let a0 = self.scalar();
        let mut x = self.clone();
        x.levels[0][0] = 0.0;
        let mut out = Self::identity(self.dim, self.order);
        let mut power = Self::identity(self.dim, self.order);
        let mut scratch = Self::zero(self.dim, self.order);
        for k in 1..=self.order {
            mul_into(&power, &x, &mut scratch);
            std::mem::swap(&mut power, &mut scratch);
            let c = 1.0 / factorial(k);
            for (o, p) in out.levels.iter_mut().zip(&power.levels) {
                o.iter_mut().zip(p).for_each(|(a, b)| *a += c * b);
            }
        }
        if a0 != 0.0 {
            out = out.scale(a0.exp());
        }
        out
    }

    /// Tensor logarithm `sum_k (-1)^(k+1) (a-1)^k / k`; requires scalar part 1.
    pub fn log(&self) -> Result<Self> {
        if (self.scalar() - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!(
                "tensor log needs level-0 coefficient 1, got {}",
                self.scalar()
            )));
        }
        let mut x = self.clone();
        x.levels[0][0] = 0.0;
        let mut out = Self::zero(self.dim, self.order);
        let mut power = x.clone();
        let mut scratch = Self::zero(self.dim, self.order);
        for k in 1..=self.order {
            let c = if k % 2 == 1 { 1.0 } else { -1.0 } / k as f64;
            for (o, p) in out.levels.iter_mut().zip(&power.levels) {
                o.iter_mut().zip(p).for_each(|(a, b)| *a += c * b);
            }
            if k < self.order {
                mul_into(&power, &x, &mut scratch);
                std::mem::swap(&mut power, &mut scratch);
            }
        }
        Ok(out)
    }
}

fn mul_into(a: &TruncatedTensor, b: &TruncatedTensor, out: &mut TruncatedTensor) {
    for block in out.levels.iter_mut() {
        block.iter_mut().for_each(|x| *x = 0.0);
    }
    for k in 0..=a.order {
        let out_k = &mut out.levels[k];
        for i in 0..=k {
            let left = &a.levels[i];
            let right = &b.levels[k - i];
            if right.iter().all(|&x| x == 0.0) {
                continue;
            }
            let rlen = right.len();
            for (li, &l) in left.iter().enumerate() {
                if l == 0.0 {
                    continue;
                }
                let dst = &mut out_k[li * rlen..(li + 1) * rlen];
                dst.iter_mut().zip(right).for_each(|(d, &r)| *d += l * r);
            }
        }
    }
}

pub(crate) fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// Chen concatenation of two truncated signatures.
pub fn chen_concat(a: &TruncatedTensor, b: &TruncatedTensor) -> Result<TruncatedTensor> {
    a.mul(b)
}

/// `sum over shuffles K of (w1, w2) of a[K]`, counted with multiplicity.
pub fn shuffle_eval(a: &TruncatedTensor, w1: &Word, w2: &Word) -> Result<f64> {
    if w1.len() + w2.len() > a.order() {
        return Err(Error::arg(format!(
            "|w1| + |w2| = {} exceeds order {}",
            w1.len() + w2.len(),
            a.order()
        )));
    }
    let dim = a.dim();
    w1.index(dim)?;
    w2.index(dim)?;
    let block = a.level(w1.len() + w2.len());
    let mut total = 0.0;
    shuffle_walk(w1.letters(), w2.letters(), 0, dim, block, &mut total);
    Ok(total)
}

fn shuffle_walk(u: &[usize], v: &[usize], prefix: usize, dim: usize, block: &[f64], acc: &mut f64) {
    match (u.split_first(), v.split_first()) {
        (None, None) => *acc += block[prefix],
        (Some((&a, rest)), None) => shuffle_walk(rest, v, prefix * dim + a - 1, dim, block, acc),
        (None, Some((&b, rest))) => shuffle_walk(u, rest, prefix * dim + b - 1, dim, block, acc),
        (Some((&a, ru)), Some((&b, rv))) => {
            shuffle_walk(ru, v, prefix * dim + a - 1, dim, block, acc);
            shuffle_walk(u, rv, prefix * dim + b - 1, dim, block, acc);
        }
    }
}
