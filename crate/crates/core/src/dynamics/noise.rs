//! Batch-noise diagnostics.
//!
//! For particle `i` and a random partition, the noise is the exact
//! interaction term minus its batch estimate:
//!
//! ```text
//! χ_i = (1/N) Σ_{j≠i} F(x_i, x_j) - (N-1)/(N(|C|-1)) Σ_{j∈C, j≠i} F(x_i, x_j)
//! ```
//!
//! It has zero mean over uniform partitions, and when `p | N` its second
//! moment is `(1 - 1/N)² (1/(p-1) - 1/(N-1)) Λ_i` with `Λ_i` the empirical
//! dispersion of the pair forces acting on `i`.

use crate::batching::BatchPartition;
use crate::ensemble::ParticleEnsemble;
use crate::error::{input_err, Result};
use crate::kernels::Kernel;
use crate::targets::Target;

use super::{batch_coefficient, check_target_dim, Forces};

/// Pair forces acting on one particle, precomputed so that many partitions
/// can be evaluated in O(p) each.
#[derive(Debug, Clone)]
pub struct NoiseProbe {
    particle: usize,
    n: usize,
    dim: usize,
    /// `F(x_i, x_j)` for every `j`, row-major; row `i` is the self term.
    forces: Vec<f64>,
}

impl NoiseProbe {
    /// Requires an exact-mode target; data-mini-batch noise is a separate
    /// source of randomness and is excluded from these diagnostics.
    pub fn new(ensemble: &ParticleEnsemble, kernel: &Kernel, target: &Target, particle: usize) -> Result<Self> {
        check_target_dim(ensemble, target)?;
        if !target.is_exact() {
            return input_err("noise diagnostics need an exact-mode target");
        }
        let (n, d) = (ensemble.len(), ensemble.dim());
        if particle >= n {
            return input_err(format!("particle {particle} out of range for N={n}"));
        }
        let scores = target.scores_exact(ensemble)?;
        let f = Forces::new(kernel, ensemble.positions(), &scores, d);
        let mut forces = vec![0.0; n * d];
        for j in 0..n {
            f.add(particle, j, 1.0, &mut forces[j * d..(j + 1) * d]);
        }
        Ok(Self {
            particle,
            n,
            dim: d,
            forces,
        })
    }

    pub fn particle(&self) -> usize {
        self.particle
    }

    pub fn force(&self, j: usize) -> &[f64] {
        &self.forces[j * self.dim..(j + 1) * self.dim]
    }

    /// `χ_i` for a given partition.
    pub fn chi(&self, partition: &BatchPartition) -> Result<Vec<f64>> {
        if partition.n() != self.n {
            return input_err("partition size does not match the ensemble");
        }
        let i = self.particle;
        let batch = partition.batch_of(i);
        let inv_n = 1.0 / self.n as f64;
        let coef = batch_coefficient(self.n, batch.len());
        let mut chi = vec![0.0; self.dim];
        for j in (0..self.n).filter(|&j| j != i) {
            for (c, f) in chi.iter_mut().zip(self.force(j)) {
                *c += inv_n * f;
            }
        }
        for &j in batch.iter().filter(|&&j| j != i) {
            for (c, f) in chi.iter_mut().zip(self.force(j)) {
                *c -= coef * f;
            }
        }
        Ok(chi)
    }

    /// `Λ_i = (1/(N-2)) Σ_{j≠i} |F(x_i, x_j) - mean_{k≠i} F(x_i, x_k)|²`.
    pub fn dispersion(&self) -> Result<f64> {
        if self.n < 3 {
            return input_err("dispersion needs N >= 3");
        }
        let i = self.particle;
        let others = || (0..self.n).filter(move |&j| j != i);
        let mut mean = vec![0.0; self.dim];
        for j in others() {
            for (m, f) in mean.iter_mut().zip(self.force(j)) {
                *m += f;
            }
        }
        mean.iter_mut().for_each(|m| *m /= (self.n - 1) as f64);
        let ss: f64 = others()
            .map(|j| {
                self.force(j)
                    .iter()
                    .zip(&mean)
                    .map(|(f, m)| (f - m) * (f - m))
                    .sum::<f64>()
            })
            .sum();
        Ok(ss / (self.n - 2) as f64)
    }

    /// Predicted `E|χ_i|²` for uniform partitions with batch size `p | N`.
    pub fn second_moment(&self, p: usize) -> Result<f64> {
        if p < 2 || p > self.n {
            return input_err(format!("batch size {p} out of range for N={}", self.n));
        }
        let n = self.n as f64;
        let lambda = self.dispersion()?;
        let bracket = 1.0 / (p - 1) as f64 - 1.0 / (n - 1.0);
        Ok((1.0 - 1.0 / n).powi(2) * bracket * lambda)
    }
}

pub fn noise_chi(
    ensemble: &ParticleEnsemble,
    kernel: &Kernel,
    target: &Target,
    partition: &BatchPartition,
    particle: usize,
) -> Result<Vec<f64>> {
    NoiseProbe::new(ensemble, kernel, target, particle)?.chi(partition)
}

pub fn chi_variance_theoretical(
    ensemble: &ParticleEnsemble,
    kernel: &Kernel,
    target: &Target,
    particle: usize,
    p: usize,
) -> Result<f64> {
    NoiseProbe::new(ensemble, kernel, target, particle)?.second_moment(p)
}
