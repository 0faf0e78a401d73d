//! Acceptance suite. Runs every criterion in sequence, prints one PASS/FAIL
//! line each, and exits non-zero if any fails.

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rbm_svgd::batching::{enumerate_partitions, pair_incidence_probability, random_partition, triple_incidence_probability};
use rbm_svgd::dynamics::{Method, NoiseProbe, Sampler};
use rbm_svgd::harness::{bench_one, compare, scaling_suite, DataSpec, InitSpec, KernelSpec, RunConfig, TargetSpec};
use rbm_svgd::metrics::TestFunction;
use rbm_svgd::schedules::ScheduleSpec;
use rbm_svgd::{Kernel, ParticleEnsemble, Target};

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    passed: bool,
    detail: String,
}

fn uniform_1d(rng: &mut ChaCha8Rng, n: usize, half_width: f64) -> ParticleEnsemble {
    let xs: Vec<f64> = (0..n).map(|_| rng.random_range(-half_width..half_width)).collect();
    ParticleEnsemble::from_scalars(&xs).unwrap()
}

/// Independent pair-force oracle from the kernel and score definitions.
fn oracle_force(k: &Kernel, t: &Target, x: f64, y: f64) -> f64 {
    let kv = k.eval(&[x], &[y]).unwrap();
    kv * (x - y) / k.bandwidth() + kv * t.score_exact(&[y]).unwrap()[0]
}

/// Closed-form second moment of the noise, evaluated from oracle forces.
fn oracle_second_moment(k: &Kernel, t: &Target, xs: &[f64], i: usize, p: usize) -> f64 {
    let n = xs.len();
    let f: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| oracle_force(k, t, xs[i], xs[j])).collect();
    let mean = f.iter().sum::<f64>() / (n - 1) as f64;
    let lambda = f.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 2) as f64;
    let nf = n as f64;
    (1.0 - 1.0 / nf).powi(2) * (1.0 / (p - 1) as f64 - 1.0 / (nf - 1.0)) * lambda
}

fn criterion_1() -> Outcome {
    let kernel = Kernel::gaussian(1.0, true).unwrap();
    let target = Target::gaussian_mixture();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst_mean, mut worst_rel, mut configs) = (0.0f64, 0.0f64, 0);
    for (n, p) in [(4, 2), (6, 2), (6, 3)] {
        let parts = enumerate_partitions(n, p).unwrap();
        let expected = match (n, p) {
            (4, 2) => 3,
            (6, 2) => 15,
            _ => 10,
        };
        if parts.len() != expected {
            return Outcome {
                passed: false,
                detail: format!("N={n} p={p}: {} partitions, expected {expected}", parts.len()),
            };
        }
        for _ in 0..10 {
            configs += 1;
            let e = uniform_1d(&mut rng, n, 4.0);
            for i in 0..n {
                let probe = NoiseProbe::new(&e, &kernel, &target, i).unwrap();
                let (mut mean, mut sq) = (0.0, 0.0);
                for part in &parts {
                    let chi = probe.chi(part).unwrap()[0];
                    mean += chi / parts.len() as f64;
                    sq += chi * chi / parts.len() as f64;
                }
                let theory = oracle_second_moment(&kernel, &target, e.positions(), i, p);
                let lib = probe.second_moment(p).unwrap();
                worst_mean = worst_mean.max(mean.abs());
                worst_rel = worst_rel.max((sq - theory).abs() / theory).max((lib - theory).abs() / theory);
            }
        }
    }
    Outcome {
        passed: worst_mean <= 1e-12 && worst_rel <= 1e-10,
        detail: format!("{configs} configurations, max |mean| {worst_mean:.2e} (tol 1e-12), max rel err of E|chi|^2 {worst_rel:.2e} (tol 1e-10)"),
    }
}

fn criterion_2() -> Outcome {
    let kernel = Kernel::gaussian(1.0, true).unwrap();
    let target = Target::gaussian_mixture();
    let e = uniform_1d(&mut ChaCha8Rng::seed_from_u64(2), 64, 4.0);
    let draws = 100_000;
    let particle = 0;
    let mut ok = true;
    let mut parts = Vec::new();
    for p in [2usize, 4, 8] {
        let probe = NoiseProbe::new(&e, &kernel, &target, particle).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(20 + p as u64);
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..draws {
            let chi = probe.chi(&random_partition(64, p, &mut rng).unwrap()).unwrap()[0];
            s += chi;
            s2 += chi * chi;
        }
        let m = draws as f64;
        let mean = s / m;
        let se = ((s2 - m * mean * mean) / (m - 1.0) / m).sqrt();
        let z = mean.abs() / se;
        let emp = s2 / m;
        let theory = oracle_second_moment(&kernel, &target, e.positions(), particle, p);
        let rel = (emp - theory).abs() / theory;
        ok &= z <= 4.0 && rel <= 0.02;
        parts.push(format!("p={p}: |mean|/SE {z:.2}, rel err {:.2}%", 100.0 * rel));
    }
    Outcome {
        passed: ok,
        detail: format!("N=64, 1e5 draws; {} (tol 4 SE, 2%)", parts.join("; ")),
    }
}

fn criterion_3() -> Outcome {
    let draws = 1_000_000;
    let mut ok = true;
    let mut parts = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut freqs = |n: usize, p: usize| {
        let (mut pair, mut triple) = (0usize, 0usize);
        for _ in 0..draws {
            let part = random_partition(n, p, &mut rng).unwrap();
            let i12 = part.same_batch(0, 1);
            let i23 = part.same_batch(1, 2);
            pair += i12 as usize;
            triple += (i12 && i23) as usize;
        }
        (pair as f64 / draws as f64, triple as f64 / draws as f64)
    };
    for (n, p) in [(10usize, 2usize), (12, 4)] {
        let (f, _) = freqs(n, p);
        let exact = (p - 1) as f64 / (n - 1) as f64;
        assert_eq!(exact, pair_incidence_probability(n, p).unwrap());
        let rel = (f - exact).abs() / exact;
        ok &= rel <= 0.01;
        parts.push(format!("pair({n},{p}) {:.3}%", 100.0 * rel));
    }
    for (n, p) in [(12usize, 3usize), (12, 4)] {
        let (_, f) = freqs(n, p);
        let exact = ((p - 1) * (p - 2)) as f64 / ((n - 1) * (n - 2)) as f64;
        assert!((exact - triple_incidence_probability(n, p).unwrap()).abs() < 1e-15);
        let rel = (f - exact).abs() / exact;
        ok &= rel <= 0.02;
        parts.push(format!("triple({n},{p}) {:.3}%", 100.0 * rel));
    }
    Outcome {
        passed: ok,
        detail: format!("1e6 partitions; rel errors {} (tol 1% pair, 2% triple)", parts.join(", ")),
    }
}

fn mixture_study_config() -> RunConfig {
    RunConfig {
        experiment: "mixture".into(),
        particles: 256,
        iterations: 500,
        seed: 0,
        snapshot_stride: 0,
        kernel: KernelSpec {
            bandwidth: 0.35,
            normalized: true,
            dynamic: false,
        },
        target: TargetSpec::GaussianMixture,
        schedule: ScheduleSpec::adagrad(0.2),
        init: InitSpec::Normal { mean: -10.0, std: 1.0 },
        ..RunConfig::default()
    }
}

fn criterion_4() -> Outcome {
    let cfg = mixture_study_config();
    let report = compare(&cfg, &[16, 32, 64], 20).unwrap();
    let svgd = report.svgd();
    let tols = [0.15, 0.75, 0.15];
    let mut ok = report.rows.iter().all(|r| r.failures == 0);
    let mut parts = Vec::new();
    for (k, f) in TestFunction::ALL.iter().enumerate() {
        let err = (svgd.mean_estimate(*f).unwrap() - f.mixture_truth()).abs();
        ok &= err <= tols[k];
        parts.push(format!("|mean h{}-truth| {err:.3}", k + 1));
    }
    let base = svgd.mse.unwrap();
    let mut worst_ratio = 0.0f64;
    for p in [16, 32, 64] {
        let mse = report.row(p).unwrap().mse.unwrap();
        for k in 0..3 {
            worst_ratio = worst_ratio.max(mse[k] / base[k]);
        }
    }
    ok &= worst_ratio <= 3.0;
    Outcome {
        passed: ok,
        detail: format!(
            "SVGD {} (tol 0.15/0.75/0.15); max MSE(RBM)/MSE(SVGD) over p=16,32,64 and h1..h3 {worst_ratio:.2} (tol 3)",
            parts.join(", ")
        ),
    }
}

fn criterion_5() -> Outcome {
    let cfg = RunConfig {
        experiment: "scaling".into(),
        method: Method::RbmPartition,
        particles: 64,
        batch_size: 2,
        seed: 500,
        kernel: KernelSpec {
            bandwidth: 2.0,
            normalized: true,
            dynamic: false,
        },
        target: TargetSpec::GaussianMixture,
        init: InitSpec::Normal { mean: 0.0, std: 1.0 },
        ..RunConfig::default()
    };
    let etas = [0.1, 0.05, 0.025, 0.0125];
    let r = scaling_suite(&cfg, &etas, 50, 1.0).unwrap();
    let dev: Vec<f64> = r.rows.iter().map(|row| row.mean_deviation).collect();
    // independent least-squares fit
    let x: Vec<f64> = etas.iter().map(|e| e.ln()).collect();
    let y: Vec<f64> = dev.iter().map(|d| d.ln()).collect();
    let (mx, my) = (x.iter().sum::<f64>() / 4.0, y.iter().sum::<f64>() / 4.0);
    let slope = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>()
        / x.iter().map(|a| (a - mx).powi(2)).sum::<f64>();
    let failures: usize = r.rows.iter().map(|row| row.failures).sum();
    Outcome {
        passed: failures == 0 && slope >= 0.7 && dev[3] < dev[0],
        detail: format!(
            "deviations {:?}, slope {slope:.3} (tol >= 0.7), dev(0.0125) < dev(0.1): {}",
            dev.iter().map(|d| format!("{d:.3e}")).collect::<Vec<_>>(),
            dev[3] < dev[0]
        ),
    }
}

fn criterion_6() -> Outcome {
    let full = bench_one(1024, 1024, 2, 100, 3, 6).unwrap();
    let rbm = bench_one(1024, 2, 2, 100, 3, 6).unwrap();
    let ratio = rbm.mean_secs / full.mean_secs;
    Outcome {
        passed: ratio <= 0.25,
        detail: format!(
            "N=1024 d=2: SVGD {:.3e} s/it, RBM p=2 {:.3e} s/it, ratio {ratio:.4} (tol 0.25)",
            full.mean_secs, rbm.mean_secs
        ),
    }
}

fn criterion_7() -> Outcome {
    let cfg = RunConfig {
        experiment: "logistic".into(),
        method: Method::RbmPartition,
        particles: 128,
        iterations: 1000,
        seed: 700,
        snapshot_stride: 250,
        kernel: KernelSpec {
            bandwidth: 1.0,
            normalized: false,
            dynamic: false,
        },
        target: TargetSpec::Logistic {
            data: DataSpec::Synthetic {
                n: 2000,
                features: 10,
                separation: 5.0,
                seed: 7,
            },
            minibatch: 100,
            prior_shape: 1.0,
            prior_rate: 0.01,
        },
        schedule: ScheduleSpec::adagrad(0.05),
        init: InitSpec::Prior,
        ..RunConfig::default()
    };
    let report = compare(&cfg, &[8], 10).unwrap();
    let svgd = report.svgd().final_accuracy().unwrap().mean;
    let rbm = report.row(8).unwrap().final_accuracy().unwrap().mean;
    let failures: usize = report.rows.iter().map(|r| r.failures).sum();
    Outcome {
        passed: failures == 0 && (svgd - rbm).abs() <= 0.02 && svgd >= 0.8 && rbm >= 0.8,
        detail: format!("mean test accuracy SVGD {svgd:.4}, RBM p=8 {rbm:.4}, |diff| {:.4} (tol 0.02, both >= 0.8)", (svgd - rbm).abs()),
    }
}

fn criterion_8() -> Outcome {
    let kernel = Kernel::gaussian(0.35, true).unwrap();
    let target = Target::gaussian_mixture();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let init = ParticleEnsemble::from_scalars(&(0..64).map(|_| -10.0 + rng.random_range(-1.0..1.0)).collect::<Vec<_>>()).unwrap();
    let run = |method: Method, p: usize| {
        let mut s = Sampler::new(kernel, target.clone(), method, ScheduleSpec::adagrad(0.2), 42)
            .unwrap()
            .with_batch_size(p);
        let mut e = init.clone();
        let mut traj = Vec::new();
        for _ in 0..100 {
            s.step(&mut e).unwrap();
            traj.push(e.positions().to_vec());
        }
        traj
    };
    let svgd = run(Method::Svgd, 64);
    let full_batch = run(Method::RbmPartition, 64);
    let bitwise = svgd
        .iter()
        .zip(&full_batch)
        .all(|(a, b)| a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()));
    let repeat = run(Method::RbmPartition, 8) == run(Method::RbmPartition, 8);

    let cfg = RunConfig {
        method: Method::RbmPartition,
        batch_size: 8,
        particles: 64,
        iterations: 100,
        snapshot_stride: 10,
        ..mixture_study_config()
    };
    let a = rbm_svgd::harness::run(&cfg).unwrap();
    let b = rbm_svgd::harness::run(&RunConfig::from_toml(&cfg.to_toml().unwrap()).unwrap()).unwrap();
    let replay = a.final_ensemble == b.final_ensemble
        && a.snapshots.iter().zip(&b.snapshots).all(|(x, y)| x.moments == y.moments && x.w2 == y.w2);
    Outcome {
        passed: bitwise && repeat && replay,
        detail: format!("p=N bitwise equal to SVGD over 100 iterations: {bitwise}; repeated runs identical: {repeat}; echoed config replays: {replay}"),
    }
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("exact batch-noise moments", criterion_1),
        ("Monte Carlo batch-noise moments", criterion_2),
        ("batch incidence laws", criterion_3),
        ("mixture sampling study", criterion_4),
        ("step-size order of coupled deviation", criterion_5),
        ("per-iteration speedup", criterion_6),
        ("logistic regression accuracy", criterion_7),
        ("full-batch reduction and determinism", criterion_8),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let id = format!("criterion {}", k + 1);
        if !filter.is_empty() && !filter.iter().any(|p| id.contains(p.as_str()) || name.contains(p.as_str())) {
            continue;
        }
        let start = Instant::now();
        let out = f();
        let secs = start.elapsed().as_secs_f64();
        println!(
            "{} {id} ({name}, {secs:.1}s): {}",
            if out.passed { "PASS" } else { "FAIL" },
            out.detail
        );
        failed += usize::from(!out.passed);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criterion(s) failed");
        ExitCode::FAILURE
    }
}
