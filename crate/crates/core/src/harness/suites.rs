//! Verification, scaling and timing suites.

use std::fmt::Write as _;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::batching::{enumerate_partitions, pair_incidence_probability, random_partition, triple_incidence_probability};
use crate::dynamics::{batch_drift, ensemble_deviation, full_drift, Method, NoiseProbe, Sampler};
use crate::ensemble::ParticleEnsemble;
use crate::error::{input_err, Error, Result};
use crate::kernels::Kernel;
use crate::schedules::ScheduleSpec;
use crate::targets::{Quadratic, Target};

use super::config::RunConfig;

/// One pass/fail line of a suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub measured: f64,
    pub reference: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckResult {
    fn new(name: String, measured: f64, reference: f64, tolerance: f64, passed: bool) -> Self {
        Self {
            name,
            measured,
            reference,
            tolerance,
            passed,
        }
    }
}

pub fn format_checks(checks: &[CheckResult]) -> String {
    let mut s = String::new();
    for c in checks {
        let _ = writeln!(
            s,
            "{} {:<52} measured {:>13.6e} reference {:>13.6e} tol {:.1e}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.measured,
            c.reference,
            c.tolerance
        );
    }
    s
}

fn uniform_1d(rng: &mut ChaCha8Rng, n: usize, half_width: f64) -> Result<ParticleEnsemble> {
    let xs: Vec<f64> = (0..n).map(|_| rng.random_range(-half_width..half_width)).collect();
    ParticleEnsemble::from_scalars(&xs)
}

/// Over all partitions of `n` particles into blocks of `p`, the batch drift
/// averages to the full drift.
pub fn exhaustive_unbiasedness(n: usize, p: usize, configs: usize, kernel: &Kernel, seed: u64) -> Result<CheckResult> {
    let target = Target::gaussian_mixture();
    let parts = enumerate_partitions(n, p)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut dummy = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..configs {
        let e = uniform_1d(&mut rng, n, 4.0)?;
        let full = full_drift(&e, kernel, &target, &mut dummy)?;
        let mut avg = vec![0.0; n];
        for part in &parts {
            let b = batch_drift(&e, kernel, &target, part, &mut dummy)?;
            for (a, v) in avg.iter_mut().zip(b.values()) {
                *a += v / parts.len() as f64;
            }
        }
        for (a, f) in avg.iter().zip(full.values()) {
            worst = worst.max((a - f).abs() / f.abs().max(1e-300));
        }
    }
    let tol = 1e-12;
    Ok(CheckResult::new(
        format!("unbiased drift, exhaustive N={n} p={p}"),
        worst,
        0.0,
        tol,
        worst <= tol,
    ))
}

/// Exhaustive mean and second moment of the batch noise against zero and
/// the closed form. Returns the worst absolute mean component and the worst
/// relative second-moment error.
pub fn exhaustive_noise(
    n: usize,
    p: usize,
    configs: usize,
    kernel: &Kernel,
    seed: u64,
) -> Result<(CheckResult, CheckResult)> {
    let target = Target::gaussian_mixture();
    let parts = enumerate_partitions(n, p)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut worst_mean, mut worst_rel) = (0.0f64, 0.0f64);
    for _ in 0..configs {
        let e = uniform_1d(&mut rng, n, 4.0)?;
        for i in 0..n {
            let probe = NoiseProbe::new(&e, kernel, &target, i)?;
            let (mut mean, mut sq) = (0.0, 0.0);
            for part in &parts {
                let chi = probe.chi(part)?[0];
                mean += chi / parts.len() as f64;
                sq += chi * chi / parts.len() as f64;
            }
            let theory = probe.second_moment(p)?;
            worst_mean = worst_mean.max(mean.abs());
            worst_rel = worst_rel.max((sq - theory).abs() / theory);
        }
    }
    Ok((
        CheckResult::new(
            format!("noise mean, exhaustive N={n} p={p} ({} partitions)", parts.len()),
            worst_mean,
            0.0,
            1e-12,
            worst_mean <= 1e-12,
        ),
        CheckResult::new(
            format!("noise second moment, exhaustive N={n} p={p}"),
            worst_rel,
            0.0,
            1e-10,
            worst_rel <= 1e-10,
        ),
    ))
}

/// Monte Carlo mean (in standard errors) and relative second-moment error
/// of the batch noise of `particle`.
pub fn monte_carlo_noise(
    ensemble: &ParticleEnsemble,
    kernel: &Kernel,
    target: &Target,
    particle: usize,
    p: usize,
    draws: usize,
    seed: u64,
) -> Result<(CheckResult, CheckResult)> {
    if draws < 2 {
        return input_err("need at least two draws");
    }
    let n = ensemble.len();
    let d = ensemble.dim();
    let probe = NoiseProbe::new(ensemble, kernel, target, particle)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum = vec![0.0; d];
    let mut sum_sq = vec![0.0; d];
    let mut norm_sq = 0.0;
    for _ in 0..draws {
        let chi = probe.chi(&random_partition(n, p, &mut rng)?)?;
        for c in 0..d {
            sum[c] += chi[c];
            sum_sq[c] += chi[c] * chi[c];
        }
        norm_sq += chi.iter().map(|v| v * v).sum::<f64>();
    }
    let m = draws as f64;
    let mut worst_z = 0.0f64;
    for c in 0..d {
        let mean = sum[c] / m;
        let var = (sum_sq[c] - m * mean * mean) / (m - 1.0);
        let se = (var / m).sqrt();
        let z = if se > 0.0 { mean.abs() / se } else { 0.0 };
        worst_z = worst_z.max(z);
    }
    let emp = norm_sq / m;
    let theory = probe.second_moment(p)?;
    let rel = (emp - theory).abs() / theory;
    Ok((
        CheckResult::new(
            format!("noise mean, Monte Carlo N={n} p={p} i={particle} (SE units)"),
            worst_z,
            0.0,
            4.0,
            worst_z <= 4.0,
        ),
        CheckResult::new(
            format!("noise second moment, Monte Carlo N={n} p={p} i={particle}"),
            emp,
            theory,
            0.02,
            rel <= 0.02,
        ),
    ))
}

/// Monte Carlo frequencies of `{0,1}` and `{0,1,2}` sharing a batch.
pub fn incidence_frequencies(n: usize, p: usize, draws: usize, seed: u64) -> Result<(f64, f64)> {
    if n < 3 {
        return input_err("incidence checks need N >= 3");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut pair, mut triple) = (0usize, 0usize);
    for _ in 0..draws {
        let part = random_partition(n, p, &mut rng)?;
        if part.same_batch(0, 1) {
            pair += 1;
            if part.same_batch(1, 2) {
                triple += 1;
            }
        }
    }
    Ok((pair as f64 / draws as f64, triple as f64 / draws as f64))
}

pub fn pair_incidence_check(n: usize, p: usize, draws: usize, seed: u64, rel_tol: f64) -> Result<CheckResult> {
    let (freq, _) = incidence_frequencies(n, p, draws, seed)?;
    let exact = pair_incidence_probability(n, p)?;
    Ok(CheckResult::new(
        format!("pair incidence N={n} p={p}"),
        freq,
        exact,
        rel_tol,
        (freq - exact).abs() <= rel_tol * exact,
    ))
}

pub fn triple_incidence_check(n: usize, p: usize, draws: usize, seed: u64, rel_tol: f64) -> Result<CheckResult> {
    let (_, freq) = incidence_frequencies(n, p, draws, seed)?;
    let exact = triple_incidence_probability(n, p)?;
    Ok(CheckResult::new(
        format!("triple incidence N={n} p={p}"),
        freq,
        exact,
        rel_tol,
        (freq - exact).abs() <= rel_tol * exact,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyOptions {
    /// Particle count of the Monte Carlo noise check.
    pub n: usize,
    pub batch_sizes: Vec<usize>,
    pub noise_draws: usize,
    pub incidence_draws: usize,
    pub exhaustive_configs: usize,
    pub bandwidth: f64,
    pub seed: u64,
}

impl Default for ConsistencyOptions {
    fn default() -> Self {
        Self {
            n: 64,
            batch_sizes: vec![2, 4, 8],
            noise_draws: 100_000,
            incidence_draws: 1_000_000,
            exhaustive_configs: 10,
            bandwidth: 1.0,
            seed: 0,
        }
    }
}

/// Runs the exhaustive and Monte Carlo checks on the mixture target.
/// Failures are entries of the result, not errors.
pub fn consistency_suite(opts: &ConsistencyOptions) -> Result<Vec<CheckResult>> {
    let kernel = Kernel::gaussian(opts.bandwidth, true)?;
    let mut out = vec![exhaustive_unbiasedness(4, 2, opts.exhaustive_configs, &kernel, opts.seed)?];
    for (n, p) in [(4, 2), (6, 2), (6, 3)] {
        let (m, v) = exhaustive_noise(n, p, opts.exhaustive_configs, &kernel, opts.seed)?;
        out.push(m);
        out.push(v);
    }
    let target = Target::gaussian_mixture();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let e = uniform_1d(&mut rng, opts.n, 4.0)?;
    for &p in &opts.batch_sizes {
        if !opts.n.is_multiple_of(p) {
            return input_err(format!("batch size {p} does not divide N={}", opts.n));
        }
        let (m, v) = monte_carlo_noise(&e, &kernel, &target, 0, p, opts.noise_draws, opts.seed + p as u64)?;
        out.push(m);
        out.push(v);
    }
    for (n, p) in [(10, 2), (12, 4)] {
        out.push(pair_incidence_check(n, p, opts.incidence_draws, opts.seed, 0.01)?);
    }
    for (n, p) in [(12, 3), (12, 4)] {
        out.push(triple_incidence_check(n, p, opts.incidence_draws, opts.seed + 1, 0.02)?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub eta: f64,
    pub iterations: u64,
    pub mean_deviation: f64,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub rows: Vec<ScalingRow>,
    /// Least-squares slope of `log deviation` against `log η`.
    pub slope: f64,
}

impl ScalingReport {
    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:>10} {:>10} {:>14} {:>8}", "eta", "steps", "deviation", "failed");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:>10.5} {:>10} {:>14.6e} {:>8}",
                r.eta, r.iterations, r.mean_deviation, r.failures
            );
        }
        let _ = writeln!(s, "log-log slope {:.4}", self.slope);
        s
    }
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Coupled runs of full SVGD and the configured batched method from the same
/// initial ensemble, with a fixed step `η` for `round(horizon/η)` steps.
/// Seeds are `config.seed + 1 ..= config.seed + seeds`.
pub fn scaling_suite(config: &RunConfig, etas: &[f64], seeds: usize, horizon: f64) -> Result<ScalingReport> {
    if etas.len() < 2 || etas.windows(2).any(|w| w[1] >= w[0]) {
        return input_err("etas must be strictly decreasing with at least two entries");
    }
    if seeds == 0 || horizon.is_nan() || horizon <= 0.0 {
        return input_err("need at least one seed and a positive horizon");
    }
    let method = if config.method.is_batched() {
        config.method
    } else {
        Method::RbmPartition
    };
    let target = config.build_target()?;
    let kernel = config.kernel()?;
    let mut rows = Vec::with_capacity(etas.len());
    for &eta in etas {
        let steps = (horizon / eta).round() as u64;
        let mut total = 0.0;
        let mut ok = 0usize;
        for r in 1..=seeds as u64 {
            let seed = config.seed + r;
            let initial = RunConfig {
                seed,
                ..config.clone()
            }
            .initial_ensemble(&target)?;
            let schedule = ScheduleSpec::Fixed { eta };
            let mut exact = initial.clone();
            let mut batched = initial;
            let outcome = Sampler::new(kernel, target.clone(), Method::Svgd, schedule, seed)?
                .run(&mut exact, steps)
                .and_then(|_| {
                    Sampler::new(kernel, target.clone(), method, schedule, seed)?
                        .with_batch_size(config.batch_size)
                        .run(&mut batched, steps)
                });
            match outcome {
                Ok(()) => {
                    total += ensemble_deviation(&exact, &batched)?;
                    ok += 1;
                }
                Err(Error::Blowup { .. }) => {}
                Err(e) => return Err(e),
            }
        }
        rows.push(ScalingRow {
            eta,
            iterations: steps,
            mean_deviation: if ok > 0 { total / ok as f64 } else { f64::NAN },
            failures: seeds - ok,
        });
    }
    let usable: Vec<&ScalingRow> = rows.iter().filter(|r| r.mean_deviation > 0.0).collect();
    let slope = if usable.len() >= 2 {
        let x: Vec<f64> = usable.iter().map(|r| r.eta.ln()).collect();
        let y: Vec<f64> = usable.iter().map(|r| r.mean_deviation.ln()).collect();
        fit_slope(&x, &y)
    } else {
        f64::NAN
    };
    Ok(ScalingReport { rows, slope })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub n: usize,
    /// `n` means full SVGD.
    pub p: usize,
    pub mean_secs: f64,
    pub min_secs: f64,
    /// Coefficient of variation of the per-iteration times.
    pub cv: f64,
}

pub fn format_bench(rows: &[BenchRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:>8} {:>8} {:>14} {:>14} {:>8}", "N", "p", "mean s/it", "min s/it", "cv");
    for r in rows {
        let p = if r.p == r.n { "full".to_string() } else { r.p.to_string() };
        let _ = writeln!(
            s,
            "{:>8} {:>8} {:>14.4e} {:>14.4e} {:>8.3}",
            r.n, p, r.mean_secs, r.min_secs, r.cv
        );
    }
    s
}

/// Per-iteration wall time of one stepper on a standard Gaussian target in
/// `d` dimensions. `p >= n` times full SVGD.
pub fn bench_one(n: usize, p: usize, d: usize, iterations: usize, warmup: usize, seed: u64) -> Result<BenchRow> {
    if iterations == 0 {
        return input_err("bench needs at least one timed iteration");
    }
    let target = Target::quadratic(Quadratic::standard(d)?);
    let kernel = Kernel::gaussian(1.0, true)?;
    let method = if p >= n { Method::Svgd } else { Method::RbmPartition };
    let mut sampler = Sampler::new(kernel, target, method, ScheduleSpec::Fixed { eta: 1e-3 }, seed)?.with_batch_size(p);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let positions = (0..n * d).map(|_| rng.sample(rand_distr::StandardNormal)).collect();
    let mut e = ParticleEnsemble::new(n, d, positions)?;
    for _ in 0..warmup {
        sampler.step(&mut e)?;
    }
    let mut times = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        let t = Instant::now();
        sampler.step(&mut e)?;
        times.push(t.elapsed().as_secs_f64());
    }
    let m = times.len() as f64;
    let mean = times.iter().sum::<f64>() / m;
    let var = times.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / m;
    Ok(BenchRow {
        n,
        p: p.min(n),
        mean_secs: mean,
        min_secs: times.iter().copied().fold(f64::INFINITY, f64::min),
        cv: if mean > 0.0 { var.sqrt() / mean } else { 0.0 },
    })
}

/// Times every `(N, p)` pair with `p <= N`; `p = N` runs full SVGD.
pub fn bench_suite(ns: &[usize], ps: &[usize], d: usize, iterations: usize, warmup: usize) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::new();
    for &n in ns {
        for &p in ps {
            if p > n || p < 2 && p != n {
                continue;
            }
            rows.push(bench_one(n, p, d, iterations, warmup, 0)?);
        }
    }
    Ok(rows)
}
