use serde::{Deserialize, Serialize};

use crate::error::{input_err, Error, Result};

/// N particles in R^d, stored row-major (particle `i` is row `i`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleEnsemble {
    positions: Vec<f64>,
    n: usize,
    dim: usize,
    iteration: u64,
}

impl ParticleEnsemble {
    pub fn new(n: usize, dim: usize, positions: Vec<f64>) -> Result<Self> {
        if n == 0 || dim == 0 {
            return input_err("ensemble needs N >= 1 and d >= 1");
        }
        if positions.len() != n * dim {
            return Err(Error::DimensionMismatch {
                expected: n * dim,
                got: positions.len(),
            });
        }
        if let Some(k) = positions.iter().position(|v| !v.is_finite()) {
            return input_err(format!("non-finite coordinate in particle {}", k / dim));
        }
        Ok(Self {
            positions,
            n,
            dim,
            iteration: 0,
        })
    }

    /// One-dimensional ensemble from scalar positions.
    pub fn from_scalars(xs: &[f64]) -> Result<Self> {
        Self::new(xs.len(), 1, xs.to_vec())
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return input_err("rows of unequal length");
        }
        Self::new(rows.len(), dim, rows.concat())
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn set_iteration(&mut self, k: u64) {
        self.iteration = k;
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.positions.chunks_exact(self.dim)
    }

    /// Shifts every particle by `offset`.
    pub fn translated(&self, offset: &[f64]) -> Result<Self> {
        if offset.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: offset.len(),
            });
        }
        let mut out = self.clone();
        for row in out.positions.chunks_exact_mut(self.dim) {
            for (x, o) in row.iter_mut().zip(offset) {
                *x += o;
            }
        }
        Ok(out)
    }

    /// Adds `displacement` row-wise and checks that the result is finite.
    ///
    /// On failure the ensemble is left untouched and the first offending
    /// particle is reported.
    pub fn advance(&mut self, displacement: &DriftField) -> Result<()> {
        self.check_shape(displacement)?;
        let next: Vec<f64> = self
            .positions
            .iter()
            .zip(&displacement.values)
            .map(|(x, v)| x + v)
            .collect();
        if let Some(k) = next.iter().position(|v| !v.is_finite()) {
            return Err(Error::Blowup {
                particle: k / self.dim,
                iteration: self.iteration,
            });
        }
        self.positions = next;
        self.iteration += 1;
        Ok(())
    }

    pub(crate) fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.positions[i * self.dim..(i + 1) * self.dim]
    }

    pub(crate) fn check_shape(&self, field: &DriftField) -> Result<()> {
        if field.n != self.n || field.dim != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.n * self.dim,
                got: field.n * field.dim,
            });
        }
        Ok(())
    }
}

/// Per-particle velocities with the same shape as an ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftField {
    pub(crate) values: Vec<f64>,
    pub(crate) n: usize,
    pub(crate) dim: usize,
}

impl DriftField {
    pub fn zeros(n: usize, dim: usize) -> Self {
        Self {
            values: vec![0.0; n * dim],
            n,
            dim,
        }
    }

    pub fn from_values(n: usize, dim: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * dim {
            return Err(Error::DimensionMismatch {
                expected: n * dim,
                got: values.len(),
            });
        }
        Ok(Self { values, n, dim })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| c * v).collect(),
            n: self.n,
            dim: self.dim,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}
