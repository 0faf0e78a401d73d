//! Bayesian logistic regression posterior over `x = [w, log α]`.
//!
//! Model: `y_i ∈ {-1, +1}`, `P(y_i | w) = σ(y_i w·x_i)`, `w | α ~ N(0, α⁻¹ I)`
//! and `α ~ Gamma(shape a, rate b)`. With `s = log α` (Jacobian included) the
//! unnormalized log posterior is
//!
//! ```text
//! Σ_i log σ(y_i w·x_i) + (d/2) s - e^s |w|²/2 + a s - b e^s
//! ```
//!
//! giving `∂/∂w = Σ_i y_i x_i σ(-y_i w·x_i) - e^s w` and
//! `∂/∂s = d/2 + a - e^s (b + |w|²/2)`.

use std::sync::Arc;

use super::dataset::Dataset;

pub const PRIOR_SHAPE: f64 = 1.0;
pub const PRIOR_RATE: f64 = 0.01;

/// Numerically stable logistic function.
#[inline]
pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `log σ(t) = -softplus(-t)`.
#[inline]
pub fn log_sigmoid(t: f64) -> f64 {
    let z = -t;
    -(z.max(0.0) + (-z.abs()).exp().ln_1p())
}

#[derive(Debug, Clone)]
pub struct LogisticRegressionModel {
    data: Arc<Dataset>,
    prior_shape: f64,
    prior_rate: f64,
}

impl LogisticRegressionModel {
    pub fn new(data: Arc<Dataset>) -> Self {
        Self {
            data,
            prior_shape: PRIOR_SHAPE,
            prior_rate: PRIOR_RATE,
        }
    }

    pub fn with_prior(mut self, shape: f64, rate: f64) -> Self {
        self.prior_shape = shape;
        self.prior_rate = rate;
        self
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn prior_shape(&self) -> f64 {
        self.prior_shape
    }

    pub fn prior_rate(&self) -> f64 {
        self.prior_rate
    }

    /// Length of the state vector, `d_f + 1`.
    pub fn dim(&self) -> usize {
        self.data.n_features() + 1
    }

    fn dot(&self, w: &[f64], i: usize) -> f64 {
        self.data.row(i).iter().zip(w).map(|(a, b)| a * b).sum()
    }

    /// Score with the likelihood summed over `rows` and multiplied by `scale`.
    pub(crate) fn score_into(&self, x: &[f64], rows: &[usize], scale: f64, out: &mut [f64]) {
        let d = self.data.n_features();
        let (w, s) = (&x[..d], x[d]);
        let alpha = s.exp();
        out.fill(0.0);
        for &i in rows {
            let y = self.data.label(i);
            let c = y * sigmoid(-y * self.dot(w, i));
            for (o, xi) in out[..d].iter_mut().zip(self.data.row(i)) {
                *o += c * xi;
            }
        }
        let w_sq: f64 = w.iter().map(|v| v * v).sum();
        for (o, wj) in out[..d].iter_mut().zip(w) {
            *o = scale * *o - alpha * wj;
        }
        out[d] = d as f64 / 2.0 + self.prior_shape - alpha * (self.prior_rate + w_sq / 2.0);
    }

    pub(crate) fn log_posterior(&self, x: &[f64]) -> f64 {
        let d = self.data.n_features();
        let (w, s) = (&x[..d], x[d]);
        let alpha = s.exp();
        let lik: f64 = self
            .data
            .train()
            .iter()
            .map(|&i| log_sigmoid(self.data.label(i) * self.dot(w, i)))
            .sum();
        let w_sq: f64 = w.iter().map(|v| v * v).sum();
        lik + d as f64 / 2.0 * s - alpha * w_sq / 2.0 + self.prior_shape * s - self.prior_rate * alpha
    }
}
