//! Experiment runner: configuration, single runs, multi-seed comparisons,
//! and the verification, scaling and timing suites behind the CLI.
//!
//! Run `r` of a comparison uses seed `base + r`. Within a run the initial
//! positions, particle batches and data mini-batches come from separate
//! streams of that seed (see [`crate::rng`]).

mod compare;
mod config;
mod run;
mod suites;

pub use compare::{compare, Checkpoint, CompareReport, MethodSummary, Stat};
pub use config::{DataSpec, InitSpec, KernelSpec, OutputSpec, RunConfig, TargetSpec};
pub use run::{run, summary_table, write_report, Failure, RunReport, Snapshot};
pub use suites::{
    bench_one, bench_suite, consistency_suite, exhaustive_noise, exhaustive_unbiasedness, fit_slope, format_bench,
    format_checks, incidence_frequencies, monte_carlo_noise, pair_incidence_check, scaling_suite,
    triple_incidence_check, BenchRow, CheckResult, ConsistencyOptions, ScalingReport, ScalingRow,
};
