//! Positive-definite interaction kernels.
//!
//! Only the Gaussian family is provided:
//!
//! ```text
//! K(x, y) = c · exp(-|x - y|² / (2h)),   c = (2πh)^(-1/2) if normalized else 1
//! ```
//!
//! Note the bandwidth `h` plays the role of a variance, not a standard
//! deviation. The normalizing constant is the one-dimensional one for every
//! `d`; it only rescales time.

use serde::{Deserialize, Serialize};

use crate::ensemble::ParticleEnsemble;
use crate::error::{check_finite, check_same_dim, input_err, Result};

/// Floor returned by [`median_bandwidth`] when the median pairwise distance
/// is zero.
pub const BANDWIDTH_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    family: KernelFamily,
    bandwidth: f64,
    normalized: bool,
}

impl Kernel {
    pub fn gaussian(bandwidth: f64, normalized: bool) -> Result<Self> {
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return input_err(format!("bandwidth must be positive, got {bandwidth}"));
        }
        Ok(Self {
            family: KernelFamily::Gaussian,
            bandwidth,
            normalized,
        })
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn normalized(&self) -> bool {
        self.normalized
    }

    pub fn with_bandwidth(&self, bandwidth: f64) -> Result<Self> {
        match self.family {
            KernelFamily::Gaussian => Self::gaussian(bandwidth, self.normalized),
        }
    }

    /// Peak value `K(x, x)`.
    pub fn prefactor(&self) -> f64 {
        if self.normalized {
            (2.0 * std::f64::consts::PI * self.bandwidth).sqrt().recip()
        } else {
            1.0
        }
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        check_same_dim(x, y)?;
        check_finite(x)?;
        check_finite(y)?;
        Ok(self.value(x, y))
    }

    /// `∇_y K(x, y) = K(x, y) · (x - y) / h`.
    pub fn grad_y(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        check_same_dim(x, y)?;
        check_finite(x)?;
        check_finite(y)?;
        let k = self.value(x, y);
        Ok(x.iter()
            .zip(y)
            .map(|(a, b)| k * (a - b) / self.bandwidth)
            .collect())
    }

    /// Unchecked evaluation for the hot loops; callers guarantee equal,
    /// non-zero lengths.
    #[inline]
    pub(crate) fn value(&self, x: &[f64], y: &[f64]) -> f64 {
        let sq: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
        self.prefactor() * (-sq / (2.0 * self.bandwidth)).exp()
    }
}

/// Bandwidth chosen by the median rule, with a flag for the degenerate case.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bandwidth {
    pub h: f64,
    pub degenerate: bool,
}

/// `h = med² / (2 log N)` where `med` is the lower median of the
/// N(N-1)/2 pairwise Euclidean distances.
///
/// If the rule yields something below [`BANDWIDTH_FLOOR`] (all particles
/// coincident, or more than half of the pairs coincident) the floor is
/// returned with `degenerate = true`.
pub fn median_bandwidth(ensemble: &ParticleEnsemble) -> Result<Bandwidth> {
    let n = ensemble.len();
    if n < 2 {
        return input_err("median bandwidth needs at least two particles");
    }
    let mut dists = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        let xi = ensemble.row(i);
        for j in (i + 1)..n {
            let sq: f64 = xi
                .iter()
                .zip(ensemble.row(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            dists.push(sq.sqrt());
        }
    }
    let mid = (dists.len() - 1) / 2;
    let (_, med, _) = dists.select_nth_unstable_by(mid, f64::total_cmp);
    let h = *med * *med / (2.0 * (n as f64).ln());
    if h < BANDWIDTH_FLOOR {
        Ok(Bandwidth {
            h: BANDWIDTH_FLOOR,
            degenerate: true,
        })
    } else {
        Ok(Bandwidth {
            h,
            degenerate: false,
        })
    }
}
