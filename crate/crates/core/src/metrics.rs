//! Sample-quality and prediction metrics.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::ensemble::ParticleEnsemble;
use crate::error::{input_err, Error, Result};
use crate::targets::{Dataset, GaussianMixture1D};

/// Scalar test functions on 1D particles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestFunction {
    Identity,
    Square,
    Cos2x,
}

impl TestFunction {
    pub const ALL: [TestFunction; 3] = [TestFunction::Identity, TestFunction::Square, TestFunction::Cos2x];

    pub fn eval(self, x: f64) -> f64 {
        match self {
            TestFunction::Identity => x,
            TestFunction::Square => x * x,
            TestFunction::Cos2x => (2.0 * x).cos(),
        }
    }

    /// Expectation under the default two-component mixture.
    pub fn mixture_truth(self) -> f64 {
        let m = GaussianMixture1D::default();
        match self {
            TestFunction::Identity => m.mean(),
            TestFunction::Square => m.second_moment(),
            TestFunction::Cos2x => m.mean_cos2x(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TestFunction::Identity => "x",
            TestFunction::Square => "x^2",
            TestFunction::Cos2x => "cos(2x)",
        }
    }
}

/// Mean of `f` over the particles of a 1D ensemble.
pub fn empirical_expectation(ensemble: &ParticleEnsemble, f: TestFunction) -> Result<f64> {
    if ensemble.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: ensemble.dim(),
        });
    }
    let sum: f64 = ensemble.positions().iter().map(|&x| f.eval(x)).sum();
    Ok(sum / ensemble.len() as f64)
}

/// `(1/R) Σ_r (h̄_r - truth)²` over at least two runs.
pub fn mse_over_runs(estimates: &[f64], truth: f64) -> Result<f64> {
    if estimates.len() < 2 {
        return input_err(format!("MSE needs at least two runs, got {}", estimates.len()));
    }
    let ss: f64 = estimates.iter().map(|h| (h - truth) * (h - truth)).sum();
    Ok(ss / estimates.len() as f64)
}

/// Exact W2 between two empirical measures with the same number of atoms.
pub fn w2_empirical_1d(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return input_err(format!("W2 needs equal sample counts, got {} and {}", a.len(), b.len()));
    }
    if a.is_empty() {
        return input_err("W2 of empty samples");
    }
    let sorted = |v: &[f64]| {
        let mut s = v.to_vec();
        s.sort_by(f64::total_cmp);
        s
    };
    let (sa, sb) = (sorted(a), sorted(b));
    let ss: f64 = sa.iter().zip(&sb).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok((ss / a.len() as f64).sqrt())
}

/// Gaussian kernel density estimate at each grid point.
pub fn kde_curve(samples: &[f64], bandwidth: f64, grid: &[f64]) -> Result<Vec<f64>> {
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return input_err(format!("KDE bandwidth must be positive, got {bandwidth}"));
    }
    if samples.is_empty() {
        return input_err("KDE of empty samples");
    }
    let norm = 1.0 / ((2.0 * PI).sqrt() * bandwidth * samples.len() as f64);
    Ok(grid
        .iter()
        .map(|&g| {
            samples
                .iter()
                .map(|&s| (-0.5 * ((g - s) / bandwidth).powi(2)).exp())
                .sum::<f64>()
                * norm
        })
        .collect())
}

/// Silverman's rule `0.9 min(σ, IQR/1.34) n^{-1/5}`, falling back to σ
/// or 1 for degenerate samples.
pub fn silverman_bandwidth(samples: &[f64]) -> f64 {
    let n = samples.len();
    if n < 2 {
        return 1.0;
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let sd = (samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let q = |u: f64| {
        let pos = u * (n - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        s[lo] + (pos - lo as f64) * (s[hi] - s[lo])
    };
    let iqr = q(0.75) - q(0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    if spread > 0.0 {
        0.9 * spread * (n as f64).powf(-0.2)
    } else {
        1.0
    }
}

/// Test-split accuracy of the posterior-mean predictive probability.
///
/// Particles are laid out as `[w_1..w_d, log α]`. A probability of exactly
/// 0.5 predicts `+1`.
pub fn classification_accuracy(particles: &ParticleEnsemble, data: &Dataset) -> Result<f64> {
    let d = data.n_features();
    if particles.dim() != d + 1 {
        return Err(Error::DimensionMismatch {
            expected: d + 1,
            got: particles.dim(),
        });
    }
    let test = data.test();
    if test.is_empty() {
        return input_err("dataset has no test split");
    }
    let correct = test
        .iter()
        .filter(|&&r| {
            let x = data.row(r);
            // σ(t) - 1/2 = tanh(t/2)/2 is exactly odd, so symmetric particle
            // sets land on the tie instead of a rounding error away from it
            let centred: f64 = particles
                .rows()
                .map(|p| (0.5 * p[..d].iter().zip(x).map(|(w, v)| w * v).sum::<f64>()).tanh())
                .sum();
            let pred = if centred >= 0.0 { 1.0 } else { -1.0 };
            pred == data.label(r)
        })
        .count();
    Ok(correct as f64 / test.len() as f64)
}
