//! Target distributions `π ∝ exp(-V)` and their scores `∇log π = -∇V`.

mod dataset;
mod logistic;
mod mixture;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

pub use dataset::{
    load_dataset, make_synthetic_logistic, parse_dataset, DataFormat, Dataset, LabelMap,
    LoadOptions, TRAIN_FRACTION,
};
pub use logistic::{log_sigmoid, sigmoid, LogisticRegressionModel, PRIOR_RATE, PRIOR_SHAPE};
pub use mixture::GaussianMixture1D;

use crate::ensemble::ParticleEnsemble;
use crate::error::{check_finite, input_err, Error, Result};

/// `V(x) = (precision / 2) |x - center|²`.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadratic {
    center: Vec<f64>,
    precision: f64,
}

impl Quadratic {
    pub fn new(center: Vec<f64>, precision: f64) -> Result<Self> {
        if center.is_empty() {
            return input_err("quadratic target needs dimension >= 1");
        }
        check_finite(&center)?;
        if !(precision > 0.0 && precision.is_finite()) {
            return input_err("precision must be positive");
        }
        Ok(Self { center, precision })
    }

    /// Standard normal in `d` dimensions.
    pub fn standard(d: usize) -> Result<Self> {
        Self::new(vec![0.0; d], 1.0)
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn precision(&self) -> f64 {
        self.precision
    }
}

#[derive(Debug, Clone)]
pub enum TargetKind {
    GaussianMixture1D(GaussianMixture1D),
    Quadratic(Quadratic),
    BayesianLogistic(LogisticRegressionModel),
}

/// How the data term of a Bayesian target is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScoreMode {
    Exact,
    /// Unbiased estimate from `size` training rows drawn without
    /// replacement and rescaled by `n_train / size`.
    Minibatch { size: usize },
}

/// A drawn data-mini-batch: training row indices plus the rescaling factor.
#[derive(Debug, Clone, PartialEq)]
pub struct DataBatch {
    rows: Vec<usize>,
    scale: f64,
}

impl DataBatch {
    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }
}

#[derive(Debug, Clone)]
pub struct Target {
    kind: TargetKind,
    mode: ScoreMode,
}

impl Target {
    pub fn gaussian_mixture() -> Self {
        Self {
            kind: TargetKind::GaussianMixture1D(GaussianMixture1D::default()),
            mode: ScoreMode::Exact,
        }
    }

    pub fn quadratic(q: Quadratic) -> Self {
        Self {
            kind: TargetKind::Quadratic(q),
            mode: ScoreMode::Exact,
        }
    }

    pub fn logistic(model: LogisticRegressionModel, mode: ScoreMode) -> Result<Self> {
        if let ScoreMode::Minibatch { size } = mode {
            let n_train = model.data().train().len();
            if size == 0 || size > n_train {
                return input_err(format!(
                    "minibatch size {size} must lie in 1..={n_train} (training rows)"
                ));
            }
        }
        if model.data().train().is_empty() {
            return input_err("logistic target needs a non-empty training split");
        }
        Ok(Self {
            kind: TargetKind::BayesianLogistic(model),
            mode,
        })
    }

    pub fn kind(&self) -> &TargetKind {
        &self.kind
    }

    pub fn mode(&self) -> ScoreMode {
        self.mode
    }

    pub fn is_exact(&self) -> bool {
        self.mode == ScoreMode::Exact
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            TargetKind::GaussianMixture1D(_) => 1,
            TargetKind::Quadratic(q) => q.center.len(),
            TargetKind::BayesianLogistic(m) => m.dim(),
        }
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        check_finite(x)
    }

    /// Draws the data-mini-batch for one iteration; `None` in exact mode.
    pub fn draw_data_batch<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<DataBatch> {
        match (&self.kind, self.mode) {
            (TargetKind::BayesianLogistic(m), ScoreMode::Minibatch { size }) => {
                let train = m.data().train();
                let rows = index::sample(rng, train.len(), size)
                    .into_iter()
                    .map(|k| train[k])
                    .collect();
                Some(DataBatch {
                    rows,
                    scale: train.len() as f64 / size as f64,
                })
            }
            _ => None,
        }
    }

    /// `∇log π(x)`. In minibatch mode one data batch is drawn from `rng`.
    pub fn score<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R) -> Result<Vec<f64>> {
        self.check_point(x)?;
        let batch = self.draw_data_batch(rng);
        let mut out = vec![0.0; x.len()];
        self.score_into(x, batch.as_ref(), &mut out);
        Ok(out)
    }

    /// Score with the full data term, whatever the configured mode.
    pub fn score_exact(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x)?;
        let mut out = vec![0.0; x.len()];
        self.score_into(x, None, &mut out);
        Ok(out)
    }

    /// Scores of every particle, flat N×d. One data batch is drawn and
    /// shared by all particles.
    pub fn scores<R: Rng + ?Sized>(&self, ensemble: &ParticleEnsemble, rng: &mut R) -> Result<Vec<f64>> {
        if ensemble.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: ensemble.dim(),
            });
        }
        let batch = self.draw_data_batch(rng);
        let mut out = vec![0.0; ensemble.positions().len()];
        for (x, o) in ensemble.rows().zip(out.chunks_exact_mut(ensemble.dim())) {
            self.score_into(x, batch.as_ref(), o);
        }
        Ok(out)
    }

    /// Scores of every particle with the full data term.
    pub fn scores_exact(&self, ensemble: &ParticleEnsemble) -> Result<Vec<f64>> {
        if ensemble.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: ensemble.dim(),
            });
        }
        let mut out = vec![0.0; ensemble.positions().len()];
        for (x, o) in ensemble.rows().zip(out.chunks_exact_mut(ensemble.dim())) {
            self.score_into(x, None, o);
        }
        Ok(out)
    }

    /// Unchecked score; `batch = None` means the full training set.
    pub(crate) fn score_into(&self, x: &[f64], batch: Option<&DataBatch>, out: &mut [f64]) {
        match &self.kind {
            TargetKind::GaussianMixture1D(m) => out[0] = m.score(x[0]),
            TargetKind::Quadratic(q) => {
                for ((o, xi), ci) in out.iter_mut().zip(x).zip(&q.center) {
                    *o = -q.precision * (xi - ci);
                }
            }
            TargetKind::BayesianLogistic(m) => match batch {
                Some(b) => m.score_into(x, &b.rows, b.scale, out),
                None => m.score_into(x, m.data().train(), 1.0, out),
            },
        }
    }

    /// `log π(x)` up to an additive constant.
    pub fn log_density_unnormalized(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        Ok(match &self.kind {
            TargetKind::GaussianMixture1D(m) => m.log_density(x[0]),
            TargetKind::Quadratic(q) => {
                let sq: f64 = x.iter().zip(&q.center).map(|(a, c)| (a - c) * (a - c)).sum();
                -0.5 * q.precision * sq
            }
            TargetKind::BayesianLogistic(m) => m.log_posterior(x),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(99)
    }

    fn central_diff(t: &Target, x: &[f64], step: f64) -> Vec<f64> {
        (0..x.len())
            .map(|c| {
                let mut xp = x.to_vec();
                let mut xm = x.to_vec();
                xp[c] += step;
                xm[c] -= step;
                (t.log_density_unnormalized(&xp).unwrap() - t.log_density_unnormalized(&xm).unwrap())
                    / (2.0 * step)
            })
            .collect()
    }

    #[test]
    fn mixture_score_at_zero_matches_finite_difference() {
        let t = Target::gaussian_mixture();
        let s = t.score_exact(&[0.0]).unwrap()[0];
        let fd = central_diff(&t, &[0.0], 1e-6)[0];
        assert_relative_eq!(s, fd, max_relative = 1e-7);
        // closed form: responsibilities are 1/3 and 2/3 at x = 0 since the
        // component densities are equal there, so the score is 2/3·2 - 1/3·2
        assert_relative_eq!(s, 2.0 / 3.0, max_relative = 1e-14);
        assert!(s > 0.0);
    }

    #[test]
    fn quadratic_score() {
        let t = Target::quadratic(Quadratic::standard(2).unwrap());
        assert_eq!(t.score(&[3.0, 4.0], &mut rng()).unwrap(), vec![-3.0, -4.0]);
        let x = [0.3, -1.7];
        let lp = t.log_density_unnormalized(&x).unwrap() - t.log_density_unnormalized(&[0.0, 0.0]).unwrap();
        assert_relative_eq!(lp, -(0.09 + 2.89) / 2.0, max_relative = 1e-14);
    }

    #[test]
    fn mixture_log_density_at_means() {
        let t = Target::gaussian_mixture();
        let at = |x: f64| t.log_density_unnormalized(&[x]).unwrap();
        // direct evaluation oracle
        let phi = |z: f64| (-z * z / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let pdf = |x: f64| phi(x + 2.0) / 3.0 + 2.0 * phi(x - 2.0) / 3.0;
        assert_relative_eq!(at(2.0) - at(-2.0), (pdf(2.0) / pdf(-2.0)).ln(), max_relative = 1e-13);
        // the overlap terms cancel only to ~e^-8, so log 2 holds to about 1e-3
        assert_relative_eq!(at(2.0) - at(-2.0), 2f64.ln(), epsilon = 1e-3);
        assert!(at(2.0) != at(-2.0));
    }

    #[test]
    fn input_errors() {
        let t = Target::gaussian_mixture();
        assert!(t.score_exact(&[0.0, 1.0]).is_err());
        assert!(t.score_exact(&[f64::NAN]).is_err());
        assert!(Quadratic::new(vec![], 1.0).is_err());
        assert!(Quadratic::new(vec![0.0], 0.0).is_err());
    }

    fn logistic_target(mode: ScoreMode) -> Target {
        let ds = make_synthetic_logistic(8, 300, 3, 1.5).unwrap();
        Target::logistic(LogisticRegressionModel::new(Arc::new(ds)), mode).unwrap()
    }

    #[test]
    fn minibatch_larger_than_training_set_is_rejected() {
        let ds = make_synthetic_logistic(8, 100, 3, 1.5).unwrap();
        let m = LogisticRegressionModel::new(Arc::new(ds));
        assert!(Target::logistic(m.clone(), ScoreMode::Minibatch { size: 81 }).is_err());
        assert!(Target::logistic(m.clone(), ScoreMode::Minibatch { size: 0 }).is_err());
        assert!(Target::logistic(m, ScoreMode::Minibatch { size: 80 }).is_ok());
    }

    #[test]
    fn score_matches_log_density_gradient() {
        let mut r = ChaCha8Rng::seed_from_u64(5);
        let targets = [
            Target::gaussian_mixture(),
            Target::quadratic(Quadratic::new(vec![1.0, -2.0, 0.5], 2.5).unwrap()),
            logistic_target(ScoreMode::Exact),
        ];
        for t in &targets {
            for _ in 0..100 {
                let x: Vec<f64> = (0..t.dim()).map(|_| r.random_range(-3.0..3.0)).collect();
                let s = t.score_exact(&x).unwrap();
                let fd = central_diff(t, &x, 1e-5);
                let scale = s.iter().map(|v| v.abs()).fold(1.0, f64::max);
                for (a, b) in s.iter().zip(&fd) {
                    assert!((a - b).abs() <= 1e-5 * scale, "{a} vs {b} at {x:?}");
                }
            }
        }
    }

    #[test]
    fn zero_data_reduces_to_prior_score() {
        let ds = make_synthetic_logistic(1, 50, 4, 1.0).unwrap();
        let m = LogisticRegressionModel::new(Arc::new(ds));
        let alpha: f64 = 0.7;
        let x = [0.5, -1.0, 2.0, 0.25, alpha.ln()];
        let mut out = [0.0; 5];
        m.score_into(&x, &[], 1.0, &mut out);
        for j in 0..4 {
            assert_relative_eq!(out[j], -alpha * x[j], max_relative = 1e-14);
        }
        let w_sq: f64 = x[..4].iter().map(|v| v * v).sum();
        assert_relative_eq!(out[4], 2.0 + 1.0 - alpha * (0.01 + w_sq / 2.0), max_relative = 1e-14);
    }

    #[test]
    fn logistic_score_is_finite_at_extreme_logits() {
        let t = logistic_target(ScoreMode::Exact);
        let x = [150.0, -150.0, 150.0, 0.0];
        let s = t.score_exact(&x).unwrap();
        assert!(s.iter().all(|v| v.is_finite()));
        assert!(t.log_density_unnormalized(&x).unwrap().is_finite());
    }

    #[test]
    fn minibatch_score_is_unbiased() {
        let t = logistic_target(ScoreMode::Minibatch { size: 20 });
        let x = [0.3, -0.2, 0.8, 0.1];
        let exact = t.score_exact(&x).unwrap();
        let mut r = ChaCha8Rng::seed_from_u64(17);
        let draws = 10_000;
        let mut sum = [0.0; 4];
        let mut sum_sq = [0.0; 4];
        for _ in 0..draws {
            let s = t.score(&x, &mut r).unwrap();
            for c in 0..4 {
                sum[c] += s[c];
                sum_sq[c] += s[c] * s[c];
            }
        }
        for c in 0..4 {
            let mean = sum[c] / draws as f64;
            let var = sum_sq[c] / draws as f64 - mean * mean;
            let se = (var / draws as f64).sqrt();
            // the log α component carries no data term and is exact
            assert!((mean - exact[c]).abs() <= 4.0 * se + 1e-9, "coord {c}: {mean} vs {}", exact[c]);
        }
    }

    #[test]
    fn scores_share_one_batch() {
        let t = logistic_target(ScoreMode::Minibatch { size: 10 });
        let e = ParticleEnsemble::from_rows(&[vec![0.1, 0.2, 0.3, 0.0], vec![0.1, 0.2, 0.3, 0.0]]).unwrap();
        let s = t.scores(&e, &mut rng()).unwrap();
        assert_eq!(s[..4], s[4..]);
        let batch = t.draw_data_batch(&mut rng()).unwrap();
        let mut direct = [0.0; 4];
        t.score_into(e.row(0), Some(&batch), &mut direct);
        assert_eq!(&s[..4], &direct);
    }
}
