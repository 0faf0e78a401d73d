use std::f64::consts::PI;

/// Two-component Gaussian mixture on the real line.
///
/// The default is `π(x) = (1/3) N(x; -2, 1) + (2/3) N(x; 2, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture1D {
    weights: [f64; 2],
    means: [f64; 2],
    variances: [f64; 2],
}

impl Default for GaussianMixture1D {
    fn default() -> Self {
        Self {
            weights: [1.0 / 3.0, 2.0 / 3.0],
            means: [-2.0, 2.0],
            variances: [1.0, 1.0],
        }
    }
}

impl GaussianMixture1D {
    pub fn weights(&self) -> [f64; 2] {
        self.weights
    }

    pub fn means(&self) -> [f64; 2] {
        self.means
    }

    pub fn variances(&self) -> [f64; 2] {
        self.variances
    }

    fn log_component(&self, k: usize, x: f64) -> f64 {
        let v = self.variances[k];
        let z = x - self.means[k];
        self.weights[k].ln() - 0.5 * (2.0 * PI * v).ln() - z * z / (2.0 * v)
    }

    pub fn log_density(&self, x: f64) -> f64 {
        let a = self.log_component(0, x);
        let b = self.log_component(1, x);
        let m = a.max(b);
        m + ((a - m).exp() + (b - m).exp()).ln()
    }

    pub fn density(&self, x: f64) -> f64 {
        self.log_density(x).exp()
    }

    /// `d/dx log π(x)`, computed from component responsibilities so it stays
    /// finite far in the tails where both densities underflow.
    pub fn score(&self, x: f64) -> f64 {
        let a = self.log_component(0, x);
        let b = self.log_component(1, x);
        let m = a.max(b);
        let (ra, rb) = ((a - m).exp(), (b - m).exp());
        let s = ra + rb;
        (ra * (self.means[0] - x) / self.variances[0] + rb * (self.means[1] - x) / self.variances[1])
            / s
    }

    pub fn cdf(&self, x: f64) -> f64 {
        (0..2)
            .map(|k| {
                let z = (x - self.means[k]) / self.variances[k].sqrt();
                self.weights[k] * 0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
            })
            .sum()
    }

    /// Inverse CDF by bisection; `u` must lie in (0, 1).
    pub fn quantile(&self, u: f64) -> f64 {
        let (mut lo, mut hi) = (-60.0, 60.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.cdf(mid) < u {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-13 {
                break;
            }
        }
        0.5 * (lo + hi)
    }

    /// `m` equally weighted reference points at the midpoint quantiles
    /// `(i + 1/2) / m`.
    pub fn quantile_grid(&self, m: usize) -> Vec<f64> {
        (0..m)
            .map(|i| self.quantile((i as f64 + 0.5) / m as f64))
            .collect()
    }

    pub fn mean(&self) -> f64 {
        self.weights[0] * self.means[0] + self.weights[1] * self.means[1]
    }

    pub fn second_moment(&self) -> f64 {
        (0..2)
            .map(|k| self.weights[k] * (self.variances[k] + self.means[k] * self.means[k]))
            .sum()
    }

    /// `E cos(2X)`.
    pub fn mean_cos2x(&self) -> f64 {
        (0..2)
            .map(|k| self.weights[k] * (2.0 * self.means[k]).cos() * (-2.0 * self.variances[k]).exp())
            .sum()
    }
}
