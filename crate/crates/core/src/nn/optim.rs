use super::matrix::Matrix;
use crate::error::{Error, Result};

/// Adam hyper-parameters and moments.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub m: Vec<Matrix>,
    pub v: Vec<Matrix>,
    pub step: u64,
}

impl OptimState {
    /// Moments congruent to `params`.
    pub fn adam(lr: f64, beta1: f64, beta2: f64, eps: f64, params: &[&Matrix]) -> Self {
        let zeros = || params.iter().map(|p| Matrix::zeros(p.rows(), p.cols())).collect();
        OptimState { lr, beta1, beta2, eps, m: zeros(), v: zeros(), step: 0 }
    }

    pub fn with_defaults(params: &[&Matrix]) -> Self {
        Self::adam(1e-3, 0.9, 0.999, 1e-8, params)
    }

    fn check(&self, params: &[&mut Matrix], grads: &[&Matrix]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::arg("parameter, gradient and moment counts differ"));
        }
        for ((p, g), m) in params.iter().zip(grads).zip(&self.m) {
            if p.shape() != m.shape() || g.shape() != m.shape() {
                return Err(Error::arg(format!("shape mismatch {:?} / {:?} / {:?}", p.shape(), g.shape(), m.shape())));
            }
        }
        Ok(())
    }

    /// Bias-corrected Adam update.
    pub fn adam_step(&mut self, params: &mut [&mut Matrix], grads: &[&Matrix]) -> Result<()> {
        self.check(params, grads)?;
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for (k, p) in params.iter_mut().enumerate() {
            let g = grads[k].data();
            let m = self.m[k].data_mut();
            let v = self.v[k].data_mut();
            for (i, x) in p.data_mut().iter_mut().enumerate() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                *x -= self.lr * (m[i] / c1) / ((v[i] / c2).sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

/// Plain gradient descent.
pub fn sgd_step(lr: f64, params: &mut [&mut Matrix], grads: &[&Matrix]) -> Result<()> {
    if params.len() != grads.len() {
        return Err(Error::arg("parameter and gradient counts differ"));
    }
    for (p, g) in params.iter_mut().zip(grads) {
        p.same_shape(g)?;
        p.data_mut().iter_mut().zip(g.data()).for_each(|(x, d)| *x -= lr * d);
    }
    Ok(())
}
