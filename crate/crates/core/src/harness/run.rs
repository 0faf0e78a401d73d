//! Single-run driver and report files.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::ensemble::ParticleEnsemble;
use crate::error::{Error, Result};
use crate::metrics::{classification_accuracy, empirical_expectation, w2_empirical_1d, TestFunction};
use crate::targets::{GaussianMixture1D, Target, TargetKind};

use super::config::{RunConfig, TargetSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub iteration: u64,
    /// Stepping time accumulated up to this snapshot, metrics excluded.
    pub elapsed_secs: f64,
    /// `[E x, E x², E cos 2x]` for 1D ensembles.
    pub moments: Option<[f64; 3]>,
    /// W2 to the midpoint quantiles of the mixture target.
    pub w2: Option<f64>,
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub iteration: u64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: RunConfig,
    pub snapshots: Vec<Snapshot>,
    pub final_ensemble: ParticleEnsemble,
    pub total_runtime_secs: f64,
    pub mean_iteration_secs: f64,
    pub failure: Option<Failure>,
}

impl RunReport {
    pub fn last_snapshot(&self) -> &Snapshot {
        self.snapshots.last().expect("a report always holds the initial snapshot")
    }

    pub fn succeeded(&self) -> bool {
        self.failure.is_none()
    }
}

pub(crate) struct Evaluator {
    reference: Option<Vec<f64>>,
    target: Target,
}

impl Evaluator {
    pub(crate) fn new(target: &Target, n: usize) -> Self {
        let reference = match target.kind() {
            TargetKind::GaussianMixture1D(m) => Some(m.quantile_grid(n)),
            _ => None,
        };
        Self {
            reference,
            target: target.clone(),
        }
    }

    pub(crate) fn snapshot(&self, e: &ParticleEnsemble, elapsed_secs: f64) -> Result<Snapshot> {
        let moments = if e.dim() == 1 {
            let mut m = [0.0; 3];
            for (slot, f) in m.iter_mut().zip(TestFunction::ALL) {
                *slot = empirical_expectation(e, f)?;
            }
            Some(m)
        } else {
            None
        };
        let w2 = match &self.reference {
            Some(r) => Some(w2_empirical_1d(e.positions(), r)?),
            None => None,
        };
        let accuracy = match self.target.kind() {
            TargetKind::BayesianLogistic(model) if !model.data().test().is_empty() => {
                Some(classification_accuracy(e, model.data())?)
            }
            _ => None,
        };
        Ok(Snapshot {
            iteration: e.iteration(),
            elapsed_secs,
            moments,
            w2,
            accuracy,
        })
    }
}

/// Runs one configuration. A numerical blowup ends the run early and is
/// recorded in [`RunReport::failure`]; invalid configurations are errors.
pub fn run(config: &RunConfig) -> Result<RunReport> {
    config.validate()?;
    let target = config.build_target()?;
    let initial = config.initial_ensemble(&target)?;
    run_from(config, target, initial)
}

pub(crate) fn run_from(config: &RunConfig, target: Target, initial: ParticleEnsemble) -> Result<RunReport> {
    let evaluator = Evaluator::new(&target, initial.len());
    let mut sampler = config.sampler(target)?;
    sampler.validate(&initial)?;
    let mut ensemble = initial;
    let mut snapshots = vec![evaluator.snapshot(&ensemble, 0.0)?];
    let mut elapsed = 0.0;
    let mut failure = None;
    let mut done = 0u64;
    for k in 1..=config.iterations {
        let start = Instant::now();
        let outcome = sampler.step(&mut ensemble);
        elapsed += start.elapsed().as_secs_f64();
        match outcome {
            Ok(()) => done = k,
            Err(e @ Error::Blowup { .. }) => {
                failure = Some(Failure {
                    iteration: k,
                    message: e.to_string(),
                });
                break;
            }
            Err(e) => return Err(e),
        }
        let stride_hit = config.snapshot_stride > 0 && k % config.snapshot_stride == 0;
        if stride_hit || k == config.iterations {
            snapshots.push(evaluator.snapshot(&ensemble, elapsed)?);
        }
    }
    if failure.is_some() && snapshots.last().map(|s| s.iteration) != Some(ensemble.iteration()) {
        snapshots.push(evaluator.snapshot(&ensemble, elapsed)?);
    }
    let mean_iteration_secs = if done > 0 { elapsed / done as f64 } else { 0.0 };
    let report = RunReport {
        config: config.clone(),
        snapshots,
        final_ensemble: ensemble,
        total_runtime_secs: elapsed,
        mean_iteration_secs,
        failure,
    };
    if !config.output.dir.as_os_str().is_empty() {
        write_report(&report, &config.output.dir)?;
    }
    Ok(report)
}

/// Writes `config.toml`, `snapshots.ndjson`, `summary.txt` and
/// `final_ensemble.txt` into `dir`.
pub fn write_report(report: &RunReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("config.toml"), report.config.to_toml()?)?;

    let mut nd = fs::File::create(dir.join("snapshots.ndjson"))?;
    for s in &report.snapshots {
        let line = serde_json::to_string(s).map_err(|e| Error::Internal(e.to_string()))?;
        writeln!(nd, "{line}")?;
    }

    fs::write(dir.join("summary.txt"), summary_table(report))?;

    let mut out = String::new();
    for row in report.final_ensemble.rows() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.17e}")).collect();
        out.push_str(&cells.join(" "));
        out.push('\n');
    }
    fs::write(dir.join("final_ensemble.txt"), out)?;
    Ok(())
}

pub fn summary_table(report: &RunReport) -> String {
    let c = &report.config;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "experiment {}  method {:?}  N {}  p {}  iterations {}  seed {}",
        c.experiment, c.method, c.particles, c.batch_size, c.iterations, c.seed
    );
    let _ = writeln!(
        s,
        "total stepping time {:.6} s  mean per iteration {:.3e} s",
        report.total_runtime_secs, report.mean_iteration_secs
    );
    if let Some(f) = &report.failure {
        let _ = writeln!(s, "FAILED at iteration {}: {}", f.iteration, f.message);
    }
    let _ = writeln!(
        s,
        "{:>10} {:>12} {:>12} {:>12} {:>12} {:>10} {:>9}",
        "iteration", "time_s", "E[x]", "E[x^2]", "E[cos2x]", "W2", "accuracy"
    );
    let opt = |v: Option<f64>, w: usize| v.map_or_else(|| format!("{:>w$}", "-"), |x| format!("{x:>w$.5}"));
    for snap in &report.snapshots {
        let m = snap.moments;
        let _ = writeln!(
            s,
            "{:>10} {:>12.5} {} {} {} {} {}",
            snap.iteration,
            snap.elapsed_secs,
            opt(m.map(|m| m[0]), 12),
            opt(m.map(|m| m[1]), 12),
            opt(m.map(|m| m[2]), 12),
            opt(snap.w2, 10),
            opt(snap.accuracy, 9)
        );
    }
    if matches!(c.target, TargetSpec::GaussianMixture) {
        let m = GaussianMixture1D::default();
        let _ = writeln!(
            s,
            "{:>10} {:>12} {:>12.5} {:>12.5} {:>12.5}",
            "truth",
            "",
            m.mean(),
            m.second_moment(),
            m.mean_cos2x()
        );
    }
    s
}
