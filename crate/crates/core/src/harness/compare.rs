//! Multi-seed comparison of full SVGD against random-batch variants.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dynamics::Method;
use crate::error::{input_err, Result};
use crate::metrics::{mse_over_runs, TestFunction};

use super::config::{RunConfig, TargetSpec};
use super::run::{run_from, RunReport};

/// Mean and sample standard deviation of one quantity over runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    pub fn of(xs: &[f64]) -> Option<Self> {
        if xs.is_empty() {
            return None;
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let std = if xs.len() > 1 {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Some(Self { mean, std })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub iteration: u64,
    pub accuracy: Stat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    /// `N` for full SVGD.
    pub batch_size: usize,
    pub runs: usize,
    pub failures: usize,
    /// Final `h̄` of each successful run, in seed order, for `x`, `x²`, `cos 2x`.
    pub estimates: Option<[Vec<f64>; 3]>,
    pub mse: Option<[f64; 3]>,
    pub accuracy: Vec<Checkpoint>,
    pub mean_iteration_secs: f64,
    /// SVGD time per iteration over this row's.
    pub speedup: f64,
}

impl MethodSummary {
    pub fn label(&self) -> String {
        match self.method {
            Method::Svgd => "svgd".into(),
            Method::RbmPartition => format!("rbm p={}", self.batch_size),
            Method::RbmReplacement => format!("rbm-r p={}", self.batch_size),
        }
    }

    /// Mean over runs of the final estimate of `f`.
    pub fn mean_estimate(&self, f: TestFunction) -> Option<f64> {
        let est = self.estimates.as_ref()?;
        let k = TestFunction::ALL.iter().position(|&g| g == f)?;
        Stat::of(&est[k]).map(|s| s.mean)
    }

    pub fn final_accuracy(&self) -> Option<Stat> {
        self.accuracy.last().map(|c| c.accuracy)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub seeds: Vec<u64>,
    /// Full SVGD first, then the batch sizes in the order given.
    pub rows: Vec<MethodSummary>,
}

impl CompareReport {
    pub fn svgd(&self) -> &MethodSummary {
        &self.rows[0]
    }

    pub fn row(&self, batch_size: usize) -> Option<&MethodSummary> {
        self.rows[1..].iter().find(|r| r.batch_size == batch_size)
    }

    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "runs per method: {}", self.seeds.len());
        let _ = writeln!(
            s,
            "{:<14} {:>5} {:>12} {:>12} {:>12} {:>13} {:>8}",
            "method", "fail", "mse[x]", "mse[x^2]", "mse[cos2x]", "s/iteration", "speedup"
        );
        for r in &self.rows {
            let m = |k: usize| r.mse.map_or_else(|| format!("{:>12}", "-"), |v| format!("{:>12.4e}", v[k]));
            let _ = writeln!(
                s,
                "{:<14} {:>5} {} {} {} {:>13.4e} {:>8.2}",
                r.label(),
                r.failures,
                m(0),
                m(1),
                m(2),
                r.mean_iteration_secs,
                r.speedup
            );
        }
        if self.rows.iter().any(|r| !r.accuracy.is_empty()) {
            let its: Vec<u64> = self.rows[0].accuracy.iter().map(|c| c.iteration).collect();
            let _ = write!(s, "\n{:<14}", "accuracy");
            for it in &its {
                let _ = write!(s, " {:>15}", it);
            }
            s.push('\n');
            for r in &self.rows {
                let _ = write!(s, "{:<14}", r.label());
                for c in &r.accuracy {
                    let _ = write!(s, " {:>7.4}±{:<7.4}", c.accuracy.mean, c.accuracy.std);
                }
                s.push('\n');
            }
        }
        s
    }
}

/// Runs full SVGD and every batch size in `batch_sizes` with seeds
/// `config.seed + 1 ..= config.seed + runs`. For a given seed every method
/// starts from the same ensemble. A batch size equal to `N` is reported as
/// full SVGD. Batched rows use `config.method` when it is a batched method
/// and `rbm_partition` otherwise.
pub fn compare(config: &RunConfig, batch_sizes: &[usize], runs: usize) -> Result<CompareReport> {
    if runs == 0 {
        return input_err("compare needs at least one run");
    }
    let n = config.particles;
    let batched = if config.method.is_batched() {
        config.method
    } else {
        Method::RbmPartition
    };
    let mut plan = vec![(Method::Svgd, n)];
    for &p in batch_sizes {
        plan.push(if p == n { (Method::Svgd, n) } else { (batched, p) });
    }
    for &(m, p) in &plan {
        RunConfig {
            method: m,
            batch_size: p,
            ..config.clone()
        }
        .validate()?;
    }

    let seeds: Vec<u64> = (1..=runs as u64).map(|r| config.seed + r).collect();
    let target = config.build_target()?;
    let mut reports: Vec<Vec<RunReport>> = vec![Vec::with_capacity(runs); plan.len()];
    for &seed in &seeds {
        let seeded = RunConfig {
            seed,
            output: Default::default(),
            ..config.clone()
        };
        let initial = seeded.initial_ensemble(&target)?;
        for (slot, &(method, p)) in plan.iter().enumerate() {
            let cfg = RunConfig {
                method,
                batch_size: p,
                kernel: super::config::KernelSpec {
                    dynamic: config.kernel.dynamic && method == Method::Svgd,
                    ..config.kernel
                },
                ..seeded.clone()
            };
            reports[slot].push(run_from(&cfg, target.clone(), initial.clone())?);
        }
    }

    let mixture = matches!(config.target, TargetSpec::GaussianMixture);
    let mut rows: Vec<MethodSummary> = plan
        .iter()
        .zip(&reports)
        .map(|(&(method, p), reps)| summarize(method, p, reps, mixture))
        .collect::<Result<_>>()?;
    let base = rows[0].mean_iteration_secs;
    for r in &mut rows {
        r.speedup = if r.mean_iteration_secs > 0.0 {
            base / r.mean_iteration_secs
        } else {
            f64::NAN
        };
    }
    Ok(CompareReport { seeds, rows })
}

fn summarize(method: Method, p: usize, reports: &[RunReport], mixture: bool) -> Result<MethodSummary> {
    let ok: Vec<&RunReport> = reports.iter().filter(|r| r.succeeded()).collect();
    let (estimates, mse) = if mixture && !ok.is_empty() {
        let est: [Vec<f64>; 3] = std::array::from_fn(|k| {
            ok.iter()
                .filter_map(|r| r.last_snapshot().moments.map(|m| m[k]))
                .collect()
        });
        let mse = if ok.len() >= 2 {
            let mut v = [0.0; 3];
            for (k, f) in TestFunction::ALL.iter().enumerate() {
                v[k] = mse_over_runs(&est[k], f.mixture_truth())?;
            }
            Some(v)
        } else {
            None
        };
        (Some(est), mse)
    } else {
        (None, None)
    };

    let mut accuracy = Vec::new();
    if let Some(first) = ok.first() {
        for (k, snap) in first.snapshots.iter().enumerate() {
            if snap.accuracy.is_none() {
                continue;
            }
            let vals: Vec<f64> = ok
                .iter()
                .filter_map(|r| r.snapshots.get(k).and_then(|s| s.accuracy))
                .collect();
            if let Some(stat) = Stat::of(&vals) {
                accuracy.push(Checkpoint {
                    iteration: snap.iteration,
                    accuracy: stat,
                });
            }
        }
    }

    let times: Vec<f64> = ok.iter().map(|r| r.mean_iteration_secs).collect();
    Ok(MethodSummary {
        method,
        batch_size: p,
        runs: reports.len(),
        failures: reports.len() - ok.len(),
        estimates,
        mse,
        accuracy,
        mean_iteration_secs: Stat::of(&times).map_or(0.0, |s| s.mean),
        speedup: 1.0,
    })
}
