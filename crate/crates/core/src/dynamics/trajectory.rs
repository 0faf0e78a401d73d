//! Coupled-run deviation.

use serde::{Deserialize, Serialize};

use crate::ensemble::ParticleEnsemble;
use crate::error::{input_err, Error, Result};

/// `(1/N) Σ_i |a_i - b_i|²`.
pub fn ensemble_deviation(a: &ParticleEnsemble, b: &ParticleEnsemble) -> Result<f64> {
    if a.len() != b.len() || a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.len() * a.dim(),
            got: b.len() * b.dim(),
        });
    }
    let ss: f64 = a
        .positions()
        .iter()
        .zip(b.positions())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    Ok(ss / a.len() as f64)
}

/// Snapshots of one run, ordered by iteration.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    snapshots: Vec<ParticleEnsemble>,
}

impl Trajectory {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a snapshot; iterations must increase strictly.
    pub fn push(&mut self, ensemble: ParticleEnsemble) -> Result<()> {
        if let Some(last) = self.snapshots.last() {
            if ensemble.iteration() <= last.iteration() {
                return input_err(format!(
                    "snapshot at iteration {} after iteration {}",
                    ensemble.iteration(),
                    last.iteration()
                ));
            }
            if ensemble.len() != last.len() || ensemble.dim() != last.dim() {
                return input_err("snapshot shape differs from earlier snapshots");
            }
        }
        self.snapshots.push(ensemble);
        Ok(())
    }

    pub fn snapshots(&self) -> &[ParticleEnsemble] {
        &self.snapshots
    }

    pub fn at(&self, iteration: u64) -> Option<&ParticleEnsemble> {
        self.snapshots
            .binary_search_by_key(&iteration, |s| s.iteration())
            .ok()
            .map(|k| &self.snapshots[k])
    }

    pub fn last(&self) -> Option<&ParticleEnsemble> {
        self.snapshots.last()
    }
}

/// Deviation between two runs at a shared iteration.
pub fn trajectory_deviation(a: &Trajectory, b: &Trajectory, iteration: u64) -> Result<f64> {
    match (a.at(iteration), b.at(iteration)) {
        (Some(x), Some(y)) => ensemble_deviation(x, y),
        _ => input_err(format!("no snapshot at iteration {iteration} in both runs")),
    }
}
