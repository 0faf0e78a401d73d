//! TOML run configuration.
//!
//! ```toml
//! experiment = "mixture"
//! method = "rbm_partition"     # svgd | rbm_partition | rbm_replacement
//! particles = 256
//! batch_size = 16
//! iterations = 500
//! seed = 1
//! snapshot_stride = 100
//!
//! [kernel]
//! bandwidth = 0.35
//! normalized = true
//!
//! [target]
//! kind = "gaussian_mixture"    # gaussian_mixture | quadratic | logistic
//!
//! [schedule]
//! kind = "adagrad"
//! eta0 = 0.2
//!
//! [init]
//! kind = "normal"
//! mean = -10.0
//! std = 1.0
//! ```
//!
//! Every field has a default, and [`RunConfig::to_toml`] writes all of them
//! out so that the echoed file reproduces the run on its own.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Gamma, Normal};
use serde::{Deserialize, Serialize};

use crate::dynamics::{Method, Sampler};
use crate::ensemble::ParticleEnsemble;
use crate::error::{input_err, Error, Result};
use crate::kernels::Kernel;
use crate::rng::{stream, INIT_STREAM};
use crate::schedules::ScheduleSpec;
use crate::targets::{
    load_dataset, make_synthetic_logistic, Dataset, LoadOptions, LogisticRegressionModel, Quadratic, ScoreMode,
    Target, PRIOR_RATE, PRIOR_SHAPE,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Free-form label copied into reports.
    pub experiment: String,
    pub method: Method,
    pub particles: usize,
    /// Ignored by `svgd`.
    pub batch_size: usize,
    pub iterations: u64,
    pub seed: u64,
    /// Snapshot every this many iterations; 0 keeps only the first and last.
    pub snapshot_stride: u64,
    /// Euler sub-steps per iteration (fixed schedules only).
    pub substeps: usize,
    pub kernel: KernelSpec,
    pub target: TargetSpec,
    pub schedule: ScheduleSpec,
    pub init: InitSpec,
    pub output: OutputSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            experiment: "mixture".into(),
            method: Method::Svgd,
            particles: 100,
            batch_size: 2,
            iterations: 500,
            seed: 0,
            snapshot_stride: 100,
            substeps: 1,
            kernel: KernelSpec::default(),
            target: TargetSpec::GaussianMixture,
            schedule: ScheduleSpec::adagrad(0.2),
            init: InitSpec::default(),
            output: OutputSpec::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelSpec {
    pub bandwidth: f64,
    pub normalized: bool,
    /// Median-rule bandwidth recomputed every iteration (svgd only).
    pub dynamic: bool,
}

impl Default for KernelSpec {
    fn default() -> Self {
        Self {
            bandwidth: 2.0,
            normalized: true,
            dynamic: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetSpec {
    GaussianMixture,
    Quadratic {
        center: Vec<f64>,
        #[serde(default = "one")]
        precision: f64,
    },
    Logistic {
        data: DataSpec,
        /// Data-mini-batch size; 0 means the full training set.
        #[serde(default)]
        minibatch: usize,
        #[serde(default = "prior_shape")]
        prior_shape: f64,
        #[serde(default = "prior_rate")]
        prior_rate: f64,
    },
}

fn one() -> f64 {
    1.0
}

fn prior_shape() -> f64 {
    PRIOR_SHAPE
}

fn prior_rate() -> f64 {
    PRIOR_RATE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSpec {
    Synthetic {
        n: usize,
        features: usize,
        separation: f64,
        #[serde(default)]
        seed: u64,
    },
    File {
        path: PathBuf,
        options: LoadOptions,
    },
}

impl DataSpec {
    pub fn load(&self) -> Result<Dataset> {
        match self {
            DataSpec::Synthetic {
                n,
                features,
                separation,
                seed,
            } => make_synthetic_logistic(*seed, *n, *features, *separation),
            DataSpec::File { path, options } => load_dataset(path, options),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitSpec {
    /// Every coordinate i.i.d. `N(mean, std²)`.
    Normal { mean: f64, std: f64 },
    /// Logistic targets: `α ~ Gamma(a, rate b)`, `w ~ N(0, I/α)`, stored as
    /// `[w, log α]`.
    Prior,
}

impl Default for InitSpec {
    fn default() -> Self {
        InitSpec::Normal { mean: -10.0, std: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    /// Report directory; empty means no files are written.
    pub dir: PathBuf,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Checks everything that can be checked without loading data.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.particles == 0 {
            return bad("particles must be at least 1".into());
        }
        if self.method.is_batched() && (self.batch_size < 2 || self.batch_size > self.particles) {
            return bad(format!(
                "batch_size must satisfy 2 <= p <= N for {:?}, got p={}, N={}",
                self.method, self.batch_size, self.particles
            ));
        }
        if self.substeps == 0 {
            return bad("substeps must be at least 1".into());
        }
        let fixed = matches!(self.schedule, ScheduleSpec::Fixed { .. });
        if self.substeps > 1 && !fixed {
            return bad("substeps > 1 requires a fixed schedule".into());
        }
        if self.method == Method::RbmReplacement && !fixed {
            return bad("rbm_replacement requires a fixed schedule".into());
        }
        if self.kernel.dynamic && self.method.is_batched() {
            return bad("dynamic bandwidth is only supported with svgd".into());
        }
        if self.kernel.dynamic && self.particles < 2 {
            return bad("dynamic bandwidth needs at least two particles".into());
        }
        self.schedule.validate().map_err(|e| Error::Config(e.to_string()))?;
        Kernel::gaussian(self.kernel.bandwidth, self.kernel.normalized).map_err(|e| Error::Config(e.to_string()))?;
        match (&self.target, self.init) {
            (TargetSpec::Logistic { .. }, _) => {}
            (_, InitSpec::Prior) => return bad("prior initialisation needs a logistic target".into()),
            (TargetSpec::Quadratic { center, precision }, _) => {
                Quadratic::new(center.clone(), *precision).map_err(|e| Error::Config(e.to_string()))?;
            }
            _ => {}
        }
        if let InitSpec::Normal { mean, std } = self.init {
            if !mean.is_finite() || !(std >= 0.0 && std.is_finite()) {
                return bad(format!("invalid normal init: mean {mean}, std {std}"));
            }
        }
        Ok(())
    }

    pub fn kernel(&self) -> Result<Kernel> {
        Kernel::gaussian(self.kernel.bandwidth, self.kernel.normalized)
    }

    /// Builds the target, loading or generating the dataset if needed.
    pub fn build_target(&self) -> Result<Target> {
        match &self.target {
            TargetSpec::GaussianMixture => Ok(Target::gaussian_mixture()),
            TargetSpec::Quadratic { center, precision } => Ok(Target::quadratic(Quadratic::new(center.clone(), *precision)?)),
            TargetSpec::Logistic {
                data,
                minibatch,
                prior_shape,
                prior_rate,
            } => {
                let model =
                    LogisticRegressionModel::new(Arc::new(data.load()?)).with_prior(*prior_shape, *prior_rate);
                let mode = if *minibatch == 0 {
                    ScoreMode::Exact
                } else {
                    ScoreMode::Minibatch { size: *minibatch }
                };
                Target::logistic(model, mode)
            }
        }
    }

    /// Initial ensemble from the init stream of `seed`; independent of the
    /// method and batch size.
    pub fn initial_ensemble(&self, target: &Target) -> Result<ParticleEnsemble> {
        let mut rng = stream(self.seed, INIT_STREAM);
        let (n, d) = (self.particles, target.dim());
        let positions = match self.init {
            InitSpec::Normal { mean, std } => {
                let dist = Normal::new(mean, std).map_err(|e| Error::Config(e.to_string()))?;
                (0..n * d).map(|_| dist.sample(&mut rng)).collect()
            }
            InitSpec::Prior => {
                let (shape, rate) = match &self.target {
                    TargetSpec::Logistic {
                        prior_shape,
                        prior_rate,
                        ..
                    } => (*prior_shape, *prior_rate),
                    _ => return input_err("prior initialisation needs a logistic target"),
                };
                let gamma = Gamma::new(shape, 1.0 / rate).map_err(|e| Error::Config(e.to_string()))?;
                let mut out = Vec::with_capacity(n * d);
                for _ in 0..n {
                    let alpha: f64 = gamma.sample(&mut rng).max(f64::MIN_POSITIVE);
                    let sd = alpha.sqrt().recip();
                    for _ in 0..d - 1 {
                        out.push(sd * rng.sample::<f64, _>(rand_distr::StandardNormal));
                    }
                    out.push(alpha.ln());
                }
                out
            }
        };
        ParticleEnsemble::new(n, d, positions)
    }

    pub fn sampler(&self, target: Target) -> Result<Sampler> {
        Ok(Sampler::new(self.kernel()?, target, self.method, self.schedule, self.seed)?
            .with_batch_size(self.batch_size)
            .with_dynamic_bandwidth(self.kernel.dynamic)
            .with_substeps(self.substeps))
    }
}
