use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use rbm_svgd::harness::{
    bench_suite, compare, consistency_suite, format_bench, format_checks, run, scaling_suite, summary_table,
    ConsistencyOptions, RunConfig,
};
use rbm_svgd::targets::{load_dataset, DataFormat, LabelMap, LoadOptions};

#[derive(Parser)]
#[command(name = "rbm-svgd", version, about = "SVGD and random-batch SVGD experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration and write its report.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare full SVGD with several batch sizes over many seeds.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 20)]
        runs: usize,
        #[arg(long, value_delimiter = ',', required = true)]
        batch_sizes: Vec<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exhaustive and Monte Carlo checks of the batch noise and incidence laws.
    Consistency {
        #[arg(long, default_value_t = 64)]
        n: usize,
        #[arg(long, value_delimiter = ',', default_value = "2,4,8")]
        batch_sizes: Vec<usize>,
        #[arg(long, default_value_t = 100_000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Coupled SVGD/batched runs at decreasing step sizes.
    Scaling {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.05,0.025,0.0125")]
        etas: Vec<f64>,
        #[arg(long, default_value_t = 50)]
        runs: usize,
        #[arg(long, default_value_t = 1.0)]
        horizon: f64,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-iteration timings; a batch size equal to N times full SVGD.
    Bench {
        #[arg(long, value_delimiter = ',', default_value = "256,512,1024")]
        ns: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "2,4,8,1024")]
        batch_sizes: Vec<usize>,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, default_value_t = 100)]
        iterations: usize,
        #[arg(long, default_value_t = 5)]
        warmup: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parse a dataset file and print its shape and label balance.
    DatasetCheck {
        path: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Libsvm)]
        format: Format,
        /// Map labels 1/2 to +1/-1.
        #[arg(long)]
        covertype_labels: bool,
        #[arg(long)]
        header: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Libsvm,
    Csv,
}

fn load_config(path: &Path, seed: Option<u64>, out: Option<PathBuf>) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(path).with_context(|| format!("reading {}", path.display()))?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(o) = out {
        cfg.output.dir = o;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn emit(out: Option<&Path>, name: &str, text: &str) -> Result<()> {
    print!("{text}");
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(name), text)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    match real_main() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn real_main() -> Result<bool> {
    match Cli::parse().command {
        Command::Run { config, seed, out } => {
            let cfg = load_config(&config, seed, out)?;
            let report = run(&cfg)?;
            print!("{}", summary_table(&report));
            Ok(report.succeeded())
        }
        Command::Compare {
            config,
            runs,
            batch_sizes,
            seed,
            out,
        } => {
            let mut cfg = load_config(&config, seed, None)?;
            cfg.output.dir = PathBuf::new();
            let report = compare(&cfg, &batch_sizes, runs)?;
            emit(out.as_deref(), "compare.txt", &report.table())?;
            if let Some(dir) = &out {
                std::fs::write(dir.join("compare.json"), serde_json::to_string_pretty(&report)?)?;
            }
            Ok(report.rows.iter().all(|r| r.failures == 0))
        }
        Command::Consistency {
            n,
            batch_sizes,
            trials,
            seed,
            out,
        } => {
            let opts = ConsistencyOptions {
                n,
                batch_sizes,
                noise_draws: trials,
                seed,
                ..ConsistencyOptions::default()
            };
            let checks = consistency_suite(&opts)?;
            emit(out.as_deref(), "consistency.txt", &format_checks(&checks))?;
            Ok(checks.iter().all(|c| c.passed))
        }
        Command::Scaling {
            config,
            etas,
            runs,
            horizon,
            seed,
            out,
        } => {
            let cfg = load_config(&config, seed, None)?;
            let report = scaling_suite(&cfg, &etas, runs, horizon)?;
            emit(out.as_deref(), "scaling.txt", &report.table())?;
            Ok(report.rows.iter().all(|r| r.failures == 0))
        }
        Command::Bench {
            ns,
            batch_sizes,
            dim,
            iterations,
            warmup,
            out,
        } => {
            let rows = bench_suite(&ns, &batch_sizes, dim, iterations, warmup)?;
            emit(out.as_deref(), "bench.txt", &format_bench(&rows))?;
            Ok(true)
        }
        Command::DatasetCheck {
            path,
            format,
            covertype_labels,
            header,
        } => {
            let mut opts = LoadOptions::new(match format {
                Format::Libsvm => DataFormat::LibsvmLike,
                Format::Csv => DataFormat::Csv,
            });
            if covertype_labels {
                opts.labels = LabelMap::covertype();
            }
            opts.has_header = header;
            let ds = load_dataset(&path, &opts).with_context(|| format!("loading {}", path.display()))?;
            if ds.is_empty() {
                bail!("dataset is empty");
            }
            let pos = ds.labels().iter().filter(|&&y| y > 0.0).count();
            println!(
                "rows {}  features {}  positive {}  negative {}  train {}  test {}",
                ds.len(),
                ds.n_features(),
                pos,
                ds.len() - pos,
                ds.train().len(),
                ds.test().len()
            );
            Ok(true)
        }
    }
}
