//! Forward-Euler steppers.
//!
//! Three update rules share one code path for forces:
//!
//! * `Svgd`: `X ← X + η · full_drift(X)`.
//! * `RbmPartition`: one fresh random partition per iteration, every
//!   particle moves with its batch drift.
//! * `RbmReplacement`: `⌈N/p⌉` sequential sub-updates per iteration, each on
//!   a freshly sampled batch; only batch members move, each by the full step.
//!
//! All forces of one (sub-)update are evaluated at the state before it.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::batching::{random_partition, sample_with_replacement};
use crate::ensemble::{DriftField, ParticleEnsemble};
use crate::error::{input_err, Error, Result};
use crate::kernels::{median_bandwidth, Kernel};
use crate::rng::{stream, StreamRng, BATCH_STREAM, DATA_STREAM};
use crate::schedules::{ScheduleSpec, StepSchedule};
use crate::targets::{DataBatch, Target};

use super::{batch_drift_with_scores, check_drift, check_target_dim, full_drift_with_scores, Forces};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Svgd,
    RbmPartition,
    RbmReplacement,
}

impl Method {
    pub fn is_batched(self) -> bool {
        !matches!(self, Method::Svgd)
    }
}

fn check_step(step: f64) -> Result<()> {
    if !step.is_finite() || step < 0.0 {
        return input_err(format!("step must be finite and non-negative, got {step}"));
    }
    Ok(())
}

fn check_batch_size(n: usize, p: usize) -> Result<()> {
    if p < 2 || p > n {
        return input_err(format!("batch size must satisfy 2 <= p <= N, got p={p}, N={n}"));
    }
    Ok(())
}

/// `X + step · full_drift(X)`.
pub fn svgd_step<R: Rng + ?Sized>(
    ensemble: &ParticleEnsemble,
    kernel: &Kernel,
    target: &Target,
    step: f64,
    rng: &mut R,
) -> Result<ParticleEnsemble> {
    check_step(step)?;
    check_target_dim(ensemble, target)?;
    let scores = target.scores(ensemble, rng)?;
    let drift = full_drift_with_scores(ensemble, kernel, &scores);
    let mut next = ensemble.clone();
    euler(&mut next, &drift, step)?;
    Ok(next)
}

/// One partition drawn from `batch_rng`, one data batch from `data_rng`.
pub fn rbm_svgd_step<R1: Rng + ?Sized, R2: Rng + ?Sized>(
    ensemble: &ParticleEnsemble,
    kernel: &Kernel,
    target: &Target,
    batch_size: usize,
    step: f64,
    batch_rng: &mut R1,
    data_rng: &mut R2,
) -> Result<ParticleEnsemble> {
    check_step(step)?;
    check_target_dim(ensemble, target)?;
    check_batch_size(ensemble.len(), batch_size)?;
    let partition = random_partition(ensemble.len(), batch_size, batch_rng)?;
    let scores = target.scores(ensemble, data_rng)?;
    let drift = batch_drift_with_scores(ensemble, kernel, &scores, &partition)?;
    let mut next = ensemble.clone();
    euler(&mut next, &drift, step)?;
    Ok(next)
}

/// `⌈N/p⌉` sequential sub-updates on sampled batches; one data batch per
/// sweep.
pub fn rbm_replacement_sweep<R1: Rng + ?Sized, R2: Rng + ?Sized>(
    ensemble: &ParticleEnsemble,
    kernel: &Kernel,
    target: &Target,
    batch_size: usize,
    step: f64,
    batch_rng: &mut R1,
    data_rng: &mut R2,
) -> Result<ParticleEnsemble> {
    check_step(step)?;
    check_target_dim(ensemble, target)?;
    check_batch_size(ensemble.len(), batch_size)?;
    let mut next = ensemble.clone();
    let data = target.draw_data_batch(data_rng);
    sweep_in_place(&mut next, kernel, target, batch_size, step, batch_rng, data.as_ref())?;
    Ok(next)
}

fn euler(ensemble: &mut ParticleEnsemble, drift: &DriftField, step: f64) -> Result<()> {
    check_drift(drift, ensemble.iteration())?;
    ensemble.advance(&drift.scaled(step))
}

fn sweep_in_place<R: Rng + ?Sized>(
    ensemble: &mut ParticleEnsemble,
    kernel: &Kernel,
    target: &Target,
    batch_size: usize,
    step: f64,
    batch_rng: &mut R,
    data: Option<&DataBatch>,
) -> Result<()> {
    let n = ensemble.len();
    for _ in 0..n.div_ceil(batch_size) {
        let batch = sample_with_replacement(n, batch_size, batch_rng)?;
        sub_update(ensemble, kernel, target, batch.members(), step, data)?;
    }
    ensemble.set_iteration(ensemble.iteration() + 1);
    Ok(())
}

/// Moves the members of `batch` (sorted) with their batch drift; every other
/// particle stays put.
fn sub_update(
    ensemble: &mut ParticleEnsemble,
    kernel: &Kernel,
    target: &Target,
    batch: &[usize],
    step: f64,
    data: Option<&DataBatch>,
) -> Result<()> {
    let (n, d) = (ensemble.len(), ensemble.dim());
    let mut scores = vec![0.0; n * d];
    for &j in batch {
        target.score_into(ensemble.row(j), data, &mut scores[j * d..(j + 1) * d]);
    }
    let mut moves = vec![0.0; batch.len() * d];
    {
        let forces = Forces::new(kernel, ensemble.positions(), &scores, d);
        for (&i, out) in batch.iter().zip(moves.chunks_exact_mut(d)) {
            forces.batch_row(i, batch, n, out);
        }
    }
    let mut updated = Vec::with_capacity(moves.len());
    for (&i, mv) in batch.iter().zip(moves.chunks_exact(d)) {
        for (x, v) in ensemble.row(i).iter().zip(mv) {
            let y = x + step * v;
            if !y.is_finite() {
                return Err(Error::Blowup {
                    particle: i,
                    iteration: ensemble.iteration(),
                });
            }
            updated.push(y);
        }
    }
    for (&i, row) in batch.iter().zip(updated.chunks_exact(d)) {
        ensemble.row_mut(i).copy_from_slice(row);
    }
    Ok(())
}

/// Stateful driver combining a method, a step schedule and the batch and
/// data random streams of one run.
#[derive(Debug, Clone)]
pub struct Sampler {
    kernel: Kernel,
    target: Target,
    method: Method,
    batch_size: usize,
    dynamic_bandwidth: bool,
    substeps: usize,
    schedule: StepSchedule,
    batch_rng: StreamRng,
    data_rng: StreamRng,
}

impl Sampler {
    /// Batch and data streams are derived from `seed` (stream ids 1 and 2).
    pub fn new(kernel: Kernel, target: Target, method: Method, schedule: ScheduleSpec, seed: u64) -> Result<Self> {
        Ok(Self {
            kernel,
            target,
            method,
            batch_size: 2,
            dynamic_bandwidth: false,
            substeps: 1,
            schedule: StepSchedule::new(schedule)?,
            batch_rng: stream(seed, BATCH_STREAM),
            data_rng: stream(seed, DATA_STREAM),
        })
    }

    pub fn with_batch_size(mut self, p: usize) -> Self {
        self.batch_size = p;
        self
    }

    /// Recompute the median bandwidth before every iteration (full SVGD only).
    pub fn with_dynamic_bandwidth(mut self, on: bool) -> Self {
        self.dynamic_bandwidth = on;
        self
    }

    /// Split each iteration into `m` Euler sub-steps of size `η/m`, each with
    /// fresh batches (fixed schedules only).
    pub fn with_substeps(mut self, m: usize) -> Self {
        self.substeps = m;
        self
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn target(&self) -> &Target {
        &self.target
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    pub fn schedule(&self) -> &StepSchedule {
        &self.schedule
    }

    /// Checks the sampler against an ensemble without stepping.
    pub fn validate(&self, ensemble: &ParticleEnsemble) -> Result<()> {
        check_target_dim(ensemble, &self.target)?;
        let fixed = matches!(self.schedule.spec(), ScheduleSpec::Fixed { .. });
        if self.method.is_batched() {
            check_batch_size(ensemble.len(), self.batch_size)?;
            if self.dynamic_bandwidth {
                return input_err("dynamic bandwidth requires the full SVGD method");
            }
        }
        if self.method == Method::RbmReplacement && !fixed {
            return input_err("rbm_replacement requires a fixed step schedule");
        }
        if self.substeps == 0 {
            return input_err("substeps must be at least 1");
        }
        if self.substeps > 1 && !fixed {
            return input_err("substeps > 1 requires a fixed step schedule");
        }
        if self.dynamic_bandwidth && ensemble.len() < 2 {
            return input_err("dynamic bandwidth needs at least two particles");
        }
        Ok(())
    }

    /// Advances `ensemble` by one iteration. On error the ensemble holds the
    /// last finite state.
    pub fn step(&mut self, ensemble: &mut ParticleEnsemble) -> Result<()> {
        self.validate(ensemble)?;
        if self.dynamic_bandwidth {
            let bw = median_bandwidth(ensemble)?;
            self.kernel = self.kernel.with_bandwidth(bw.h)?;
        }
        let k = ensemble.iteration();
        let m = self.substeps;
        for _ in 0..m {
            match self.method {
                Method::RbmReplacement => {
                    let ScheduleSpec::Fixed { eta } = self.schedule.spec() else {
                        unreachable!("validated above")
                    };
                    let data = self.target.draw_data_batch(&mut self.data_rng);
                    sweep_in_place(
                        ensemble,
                        &self.kernel,
                        &self.target,
                        self.batch_size,
                        eta / m as f64,
                        &mut self.batch_rng,
                        data.as_ref(),
                    )?;
                }
                Method::Svgd | Method::RbmPartition => {
                    let scores = self.target.scores(ensemble, &mut self.data_rng)?;
                    let drift = if self.method == Method::Svgd {
                        full_drift_with_scores(ensemble, &self.kernel, &scores)
                    } else {
                        let partition = random_partition(ensemble.len(), self.batch_size, &mut self.batch_rng)?;
                        batch_drift_with_scores(ensemble, &self.kernel, &scores, &partition)?
                    };
                    check_drift(&drift, k)?;
                    let drift = if m > 1 { drift.scaled(1.0 / m as f64) } else { drift };
                    let displacement = self.schedule.apply(&drift)?;
                    ensemble.advance(&displacement)?;
                }
            }
        }
        ensemble.set_iteration(k + 1);
        Ok(())
    }

    pub fn run(&mut self, ensemble: &mut ParticleEnsemble, iterations: u64) -> Result<()> {
        for _ in 0..iterations {
            self.step(ensemble)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::batching::enumerate_partitions;
    use crate::dynamics::{batch_drift, pair_force};
    use crate::targets::Quadratic;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn random_ensemble(seed: u64, n: usize, d: usize, scale: f64) -> ParticleEnsemble {
        let mut r = rng(seed);
        ParticleEnsemble::new(n, d, (0..n * d).map(|_| r.random_range(-scale..scale)).collect()).unwrap()
    }

    #[test]
    fn zero_step_is_identity() {
        let e = random_ensemble(1, 5, 1, 3.0);
        let k = Kernel::gaussian(1.0, true).unwrap();
        let t = Target::gaussian_mixture();
        let next = svgd_step(&e, &k, &t, 0.0, &mut rng(0)).unwrap();
        assert_eq!(next.positions(), e.positions());
        assert_eq!(next.iteration(), 1);
    }

    #[test]
    fn single_particle_quadratic() {
        let e = ParticleEnsemble::from_scalars(&[2.0]).unwrap();
        let k = Kernel::gaussian(1.0, false).unwrap();
        let t = Target::quadratic(Quadratic::standard(1).unwrap());
        let next = svgd_step(&e, &k, &t, 0.1, &mut rng(0)).unwrap();
        assert_relative_eq!(next.row(0)[0], 1.8, max_relative = 1e-15);
    }

    #[test]
    fn displacement_is_linear_in_step_to_first_order() {
        let e = random_ensemble(2, 6, 2, 2.0);
        let k = Kernel::gaussian(0.8, true).unwrap();
        let t = Target::quadratic(Quadratic::new(vec![0.3, -0.2], 1.5).unwrap());
        for eta in [1e-2, 1e-3] {
            let a = svgd_step(&e, &k, &t, eta, &mut rng(0)).unwrap();
            let b = svgd_step(&e, &k, &t, 2.0 * eta, &mut rng(0)).unwrap();
            for ((x0, x1), x2) in e.positions().iter().zip(a.positions()).zip(b.positions()) {
                let defect = ((x2 - x0) - 2.0 * (x1 - x0)).abs();
                assert!(defect <= 1e-12 + eta * eta, "{defect}");
            }
        }
    }

    #[test]
    fn rbm_with_full_batch_equals_svgd_bitwise() {
        let k = Kernel::gaussian(0.5, true).unwrap();
        let t = Target::gaussian_mixture();
        for n in [2usize, 5, 33] {
            let e = random_ensemble(n as u64, n, 1, 4.0);
            let a = svgd_step(&e, &k, &t, 0.05, &mut rng(0)).unwrap();
            let b = rbm_svgd_step(&e, &k, &t, n, 0.05, &mut rng(1), &mut rng(0)).unwrap();
            let c = rbm_replacement_sweep(&e, &k, &t, n, 0.05, &mut rng(1), &mut rng(0)).unwrap();
            assert_eq!(a, b);
            assert_eq!(a, c);
        }
    }

    #[test]
    fn expected_rbm_step_equals_svgd_step() {
        let k = Kernel::gaussian(1.2, true).unwrap();
        let t = Target::gaussian_mixture();
        let e = random_ensemble(4, 4, 1, 3.0);
        let eta = 0.3;
        let svgd = svgd_step(&e, &k, &t, eta, &mut rng(0)).unwrap();
        let parts = enumerate_partitions(4, 2).unwrap();
        let mut mean = [0.0; 4];
        for p in &parts {
            let d = batch_drift(&e, &k, &t, p, &mut rng(0)).unwrap();
            for ((m, x), v) in mean.iter_mut().zip(e.positions()).zip(d.values()) {
                *m += (x + eta * v) / 3.0;
            }
        }
        for (m, s) in mean.iter().zip(svgd.positions()) {
            assert!((m - s).abs() <= 1e-12 * s.abs().max(1.0));
        }
    }

    #[test]
    fn replacement_sub_updates_follow_hand_trace() {
        let k = Kernel::gaussian(1.0, true).unwrap();
        let t = Target::gaussian_mixture();
        let e = ParticleEnsemble::from_scalars(&[-1.5, -0.2, 0.9, 2.4]).unwrap();
        let eta = 0.25;
        // record the batches the sweep will see
        let mut recorder = rng(9);
        let b1 = sample_with_replacement(4, 2, &mut recorder).unwrap();
        let b2 = sample_with_replacement(4, 2, &mut recorder).unwrap();

        let mut x: Vec<f64> = e.positions().to_vec();
        for b in [b1.members(), b2.members()] {
            let (i, j) = (b[0], b[1]);
            let f = |a: usize, c: usize, x: &[f64]| pair_force(&k, &t, &[x[a]], &[x[c]], &mut rng(0)).unwrap()[0];
            // (1/N) F_ii + (N-1)/(N(p-1)) F_ij with N=4, p=2
            let vi = 0.25 * f(i, i, &x) + 0.75 * f(i, j, &x);
            let vj = 0.25 * f(j, j, &x) + 0.75 * f(j, i, &x);
            x[i] += eta * vi;
            x[j] += eta * vj;
        }
        let out = rbm_replacement_sweep(&e, &k, &t, 2, eta, &mut rng(9), &mut rng(0)).unwrap();
        for (a, b) in out.positions().iter().zip(&x) {
            assert_relative_eq!(*a, *b, max_relative = 1e-14);
        }
        assert_eq!(out.iteration(), 1);
    }

    #[test]
    fn sub_update_leaves_other_particles_alone() {
        let k = Kernel::gaussian(1.0, true).unwrap();
        let t = Target::gaussian_mixture();
        let mut e = random_ensemble(5, 6, 1, 3.0);
        let before = e.clone();
        sub_update(&mut e, &k, &t, &[1, 4], 0.1, None).unwrap();
        for i in [0, 2, 3, 5] {
            assert_eq!(e.row(i), before.row(i));
        }
        assert_ne!(e.row(1), before.row(1));
        sub_update(&mut e, &k, &t, &[0, 2], 0.1, None).unwrap();
        assert_eq!(e.row(4), {
            let mut e2 = before.clone();
            sub_update(&mut e2, &k, &t, &[1, 4], 0.1, None).unwrap();
            e2.row(4).to_vec()
        });
    }

    #[test]
    fn blowup_names_particle() {
        let k = Kernel::gaussian(1.0, false).unwrap();
        let t = Target::quadratic(Quadratic::standard(1).unwrap());
        let e = ParticleEnsemble::from_scalars(&[0.0, 1e300]).unwrap();
        match svgd_step(&e, &k, &t, 1e10, &mut rng(0)) {
            Err(Error::Blowup { particle, .. }) => assert_eq!(particle, 1),
            other => panic!("expected blowup, got {other:?}"),
        }
    }

    #[test]
    fn sampler_reduces_to_svgd_and_is_deterministic() {
        let k = Kernel::gaussian(0.35, true).unwrap();
        let t = Target::gaussian_mixture();
        let e0 = random_ensemble(6, 16, 1, 3.0);
        let run = |method, p| {
            let mut s = Sampler::new(k, t.clone(), method, ScheduleSpec::adagrad(0.2), 11)
                .unwrap()
                .with_batch_size(p);
            let mut e = e0.clone();
            s.run(&mut e, 50).unwrap();
            e
        };
        let svgd = run(Method::Svgd, 2);
        assert_eq!(svgd, run(Method::RbmPartition, 16));
        assert_eq!(svgd.iteration(), 50);
        assert_eq!(run(Method::RbmPartition, 4), run(Method::RbmPartition, 4));
        assert_ne!(run(Method::RbmPartition, 4), svgd);
    }

    #[test]
    fn translation_equivariance() {
        let k = Kernel::gaussian(0.9, true).unwrap();
        let shift = [1.5, -2.25];
        let e = random_ensemble(7, 12, 2, 2.0);
        let shifted = e.translated(&shift).unwrap();
        let t = Target::quadratic(Quadratic::new(vec![0.0, 0.0], 1.0).unwrap());
        let ts = Target::quadratic(Quadratic::new(shift.to_vec(), 1.0).unwrap());
        for method in [Method::Svgd, Method::RbmPartition, Method::RbmReplacement] {
            let mk = |t: &Target| {
                Sampler::new(k, t.clone(), method, ScheduleSpec::Fixed { eta: 0.1 }, 3)
                    .unwrap()
                    .with_batch_size(3)
            };
            let (mut a, mut b) = (e.clone(), shifted.clone());
            mk(&t).run(&mut a, 20).unwrap();
            mk(&ts).run(&mut b, 20).unwrap();
            for (ra, rb) in a.rows().zip(b.rows()) {
                for c in 0..2 {
                    assert!((ra[c] + shift[c] - rb[c]).abs() < 1e-12, "{method:?}");
                }
            }
        }
    }

    #[test]
    fn substeps_match_smaller_steps() {
        let k = Kernel::gaussian(1.0, true).unwrap();
        let t = Target::gaussian_mixture();
        let e0 = random_ensemble(8, 8, 1, 2.0);
        let mut a = e0.clone();
        Sampler::new(k, t.clone(), Method::Svgd, ScheduleSpec::Fixed { eta: 0.2 }, 0)
            .unwrap()
            .with_substeps(4)
            .run(&mut a, 3)
            .unwrap();
        let mut b = e0.clone();
        Sampler::new(k, t, Method::Svgd, ScheduleSpec::Fixed { eta: 0.05 }, 0)
            .unwrap()
            .run(&mut b, 12)
            .unwrap();
        assert_eq!(a.iteration(), 3);
        for (x, y) in a.positions().iter().zip(b.positions()) {
            assert_relative_eq!(*x, *y, max_relative = 1e-13);
        }
    }

    #[test]
    fn invalid_configurations_are_rejected() {
        let k = Kernel::gaussian(1.0, true).unwrap();
        let t = Target::gaussian_mixture();
        let mut e = random_ensemble(9, 8, 1, 1.0);
        let mk = |m, s| Sampler::new(k, t.clone(), m, s, 0).unwrap();
        let fixed = ScheduleSpec::Fixed { eta: 0.1 };
        assert!(mk(Method::RbmPartition, fixed).with_batch_size(1).step(&mut e).is_err());
        assert!(mk(Method::RbmPartition, fixed).with_batch_size(9).step(&mut e).is_err());
        assert!(mk(Method::RbmPartition, fixed).with_dynamic_bandwidth(true).step(&mut e).is_err());
        assert!(mk(Method::RbmReplacement, ScheduleSpec::adagrad(0.1)).step(&mut e).is_err());
        assert!(mk(Method::Svgd, ScheduleSpec::adagrad(0.1)).with_substeps(2).step(&mut e).is_err());
        assert!(mk(Method::Svgd, fixed).with_dynamic_bandwidth(true).step(&mut e).is_ok());
        assert!(svgd_step(&e, &k, &t, f64::NAN, &mut rng(0)).is_err());
    }
}
