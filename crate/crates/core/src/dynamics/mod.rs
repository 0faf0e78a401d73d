//! Particle update laws.
//!
//! With the pair force `F(x, y) = ∇_y K(x, y) + K(x, y) ∇log π(y)` the full
//! SVGD drift of particle `i` is `(1/N) Σ_j F(X_i, X_j)`, self term included.
//! The random-batch drift keeps the self term and replaces the rest by a sum
//! over the batch `C` containing `i`:
//!
//! ```text
//! (1/N) F(X_i, X_i) + (N-1) / (N (|C|-1)) Σ_{j ∈ C, j ≠ i} F(X_i, X_j)
//! ```
//!
//! Scores are evaluated once per particle per step and reused across pairs;
//! for data-mini-batch targets this also means one data batch per step.

mod noise;
mod stepper;
mod trajectory;

use rand::Rng;

pub use noise::{chi_variance_theoretical, noise_chi, NoiseProbe};
pub use stepper::{rbm_replacement_sweep, rbm_svgd_step, svgd_step, Method, Sampler};
pub use trajectory::{ensemble_deviation, trajectory_deviation, Trajectory};

use crate::batching::BatchPartition;
use crate::ensemble::{DriftField, ParticleEnsemble};
use crate::error::{check_same_dim, input_err, Error, Result};
use crate::kernels::Kernel;
use crate::targets::Target;

/// `F(x, y) = ∇_y K(x, y) + K(x, y) · score(y)`.
///
/// `rng` is only consumed by data-mini-batch targets.
pub fn pair_force<R: Rng + ?Sized>(
    kernel: &Kernel,
    target: &Target,
    x: &[f64],
    y: &[f64],
    rng: &mut R,
) -> Result<Vec<f64>> {
    check_same_dim(x, y)?;
    let score = target.score(y, rng)?;
    let k = kernel.eval(x, y)?;
    Ok(x.iter()
        .zip(y)
        .zip(&score)
        .map(|((a, b), s)| k * (a - b) / kernel.bandwidth() + k * s)
        .collect())
}

/// Borrowed view of the pre-step state used by every drift routine.
pub(crate) struct Forces<'a> {
    kernel: &'a Kernel,
    positions: &'a [f64],
    scores: &'a [f64],
    dim: usize,
}

impl<'a> Forces<'a> {
    pub(crate) fn new(kernel: &'a Kernel, positions: &'a [f64], scores: &'a [f64], dim: usize) -> Self {
        Self {
            kernel,
            positions,
            scores,
            dim,
        }
    }

    #[inline]
    fn row(&self, i: usize) -> &[f64] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    /// `out += coef · F(x_i, x_j)`.
    #[inline]
    pub(crate) fn add(&self, i: usize, j: usize, coef: f64, out: &mut [f64]) {
        let xi = self.row(i);
        let xj = self.row(j);
        let sj = &self.scores[j * self.dim..(j + 1) * self.dim];
        let h = self.kernel.bandwidth();
        let k = self.kernel.value(xi, xj);
        for c in 0..self.dim {
            out[c] += coef * (k * (xi[c] - xj[c]) / h + k * sj[c]);
        }
    }

    pub(crate) fn full_row(&self, i: usize, n: usize, out: &mut [f64]) {
        out.fill(0.0);
        let coef = 1.0 / n as f64;
        self.add(i, i, coef, out);
        for j in (0..n).filter(|&j| j != i) {
            self.add(i, j, coef, out);
        }
    }

    /// Batch drift of `i`; `batch` must contain `i`, be sorted, and have at
    /// least two members.
    pub(crate) fn batch_row(&self, i: usize, batch: &[usize], n: usize, out: &mut [f64]) {
        out.fill(0.0);
        self.add(i, i, 1.0 / n as f64, out);
        let coef = batch_coefficient(n, batch.len());
        for &j in batch.iter().filter(|&&j| j != i) {
            self.add(i, j, coef, out);
        }
    }
}

/// `(N-1) / (N (|C|-1))`. Written as one division of exact integers so that
/// `|C| = N` rounds to exactly the same double as `1/N`.
#[inline]
pub(crate) fn batch_coefficient(n: usize, batch_len: usize) -> f64 {
    (n - 1) as f64 / (n * (batch_len - 1)) as f64
}

fn check_target_dim(ensemble: &ParticleEnsemble, target: &Target) -> Result<()> {
    if ensemble.dim() != target.dim() {
        return Err(Error::DimensionMismatch {
            expected: target.dim(),
            got: ensemble.dim(),
        });
    }
    Ok(())
}

/// Full SVGD drift, Θ(N²d).
pub fn full_drift<R: Rng + ?Sized>(
    ensemble: &ParticleEnsemble,
    kernel: &Kernel,
    target: &Target,
    rng: &mut R,
) -> Result<DriftField> {
    check_target_dim(ensemble, target)?;
    let scores = target.scores(ensemble, rng)?;
    Ok(full_drift_with_scores(ensemble, kernel, &scores))
}

pub(crate) fn full_drift_with_scores(ensemble: &ParticleEnsemble, kernel: &Kernel, scores: &[f64]) -> DriftField {
    let (n, d) = (ensemble.len(), ensemble.dim());
    let forces = Forces::new(kernel, ensemble.positions(), scores, d);
    let mut drift = DriftField::zeros(n, d);
    for i in 0..n {
        forces.full_row(i, n, drift.row_mut(i));
    }
    drift
}

/// Random-batch drift for a given partition, Θ(Npd).
pub fn batch_drift<R: Rng + ?Sized>(
    ensemble: &ParticleEnsemble,
    kernel: &Kernel,
    target: &Target,
    partition: &BatchPartition,
    rng: &mut R,
) -> Result<DriftField> {
    check_target_dim(ensemble, target)?;
    if partition.n() != ensemble.len() {
        return input_err(format!(
            "partition covers {} indices but the ensemble has {} particles",
            partition.n(),
            ensemble.len()
        ));
    }
    let scores = target.scores(ensemble, rng)?;
    batch_drift_with_scores(ensemble, kernel, &scores, partition)
}

pub(crate) fn batch_drift_with_scores(
    ensemble: &ParticleEnsemble,
    kernel: &Kernel,
    scores: &[f64],
    partition: &BatchPartition,
) -> Result<DriftField> {
    let (n, d) = (ensemble.len(), ensemble.dim());
    let forces = Forces::new(kernel, ensemble.positions(), scores, d);
    let mut drift = DriftField::zeros(n, d);
    for batch in partition.batches() {
        if batch.len() < 2 {
            return Err(Error::Internal("batch of size 1 in partition".into()));
        }
        for &i in batch {
            forces.batch_row(i, batch, n, drift.row_mut(i));
        }
    }
    Ok(drift)
}

/// First non-finite row of a drift field, reported as a blowup.
pub(crate) fn check_drift(drift: &DriftField, iteration: u64) -> Result<()> {
    match drift.values.iter().position(|v| !v.is_finite()) {
        Some(k) => Err(Error::Blowup {
            particle: k / drift.dim,
            iteration,
        }),
        None => Ok(()),
    }
}
