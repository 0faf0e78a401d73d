//! Step-size sequences turning a drift field into a displacement.
//!
//! `Fixed(η)` returns `η · drift`. `Adagrad { eta0, epsilon, beta }` keeps a
//! per-coordinate accumulator `A` and returns `η0 · drift / (ε + √A)`, where
//!
//! ```text
//! A ← β A + (1 - β) drift²    for 0 < β < 1 (exponential average)
//! A ← A + drift²              for β = 0 (textbook AdaGrad running sum)
//! ```

use serde::{Deserialize, Serialize};

use crate::ensemble::DriftField;
use crate::error::{input_err, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScheduleSpec {
    Fixed {
        eta: f64,
    },
    Adagrad {
        eta0: f64,
        #[serde(default = "default_epsilon")]
        epsilon: f64,
        #[serde(default = "default_beta")]
        beta: f64,
    },
}

fn default_epsilon() -> f64 {
    1e-6
}

fn default_beta() -> f64 {
    0.9
}

impl ScheduleSpec {
    pub fn adagrad(eta0: f64) -> Self {
        Self::Adagrad {
            eta0,
            epsilon: default_epsilon(),
            beta: default_beta(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Fixed { eta } if eta > 0.0 && eta.is_finite() => Ok(()),
            Self::Fixed { eta } => input_err(format!("fixed step must be positive, got {eta}")),
            Self::Adagrad { eta0, epsilon, beta } => {
                if !(eta0 > 0.0 && eta0.is_finite()) {
                    return input_err(format!("eta0 must be positive, got {eta0}"));
                }
                if !(epsilon > 0.0 && epsilon.is_finite()) {
                    return input_err(format!("epsilon must be positive, got {epsilon}"));
                }
                if !(0.0..1.0).contains(&beta) {
                    return input_err(format!("beta must lie in [0, 1), got {beta}"));
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct StepSchedule {
    spec: ScheduleSpec,
    accumulator: Vec<f64>,
    shape: Option<(usize, usize)>,
    calls: u64,
}

impl StepSchedule {
    pub fn new(spec: ScheduleSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self {
            spec,
            accumulator: Vec::new(),
            shape: None,
            calls: 0,
        })
    }

    pub fn fixed(eta: f64) -> Result<Self> {
        Self::new(ScheduleSpec::Fixed { eta })
    }

    pub fn spec(&self) -> ScheduleSpec {
        self.spec
    }

    pub fn calls(&self) -> u64 {
        self.calls
    }

    /// AdaGrad accumulator; empty before the first call or for fixed steps.
    pub fn accumulator(&self) -> &[f64] {
        &self.accumulator
    }

    /// Displacement for one step. State advances exactly once per call.
    pub fn apply(&mut self, drift: &DriftField) -> Result<DriftField> {
        if !drift.is_finite() {
            return input_err("non-finite drift passed to schedule");
        }
        let shape = (drift.len(), drift.dim());
        match self.shape {
            None => self.shape = Some(shape),
            Some(s) if s != shape => {
                return Err(Error::DimensionMismatch {
                    expected: s.0 * s.1,
                    got: shape.0 * shape.1,
                })
            }
            _ => {}
        }
        self.calls += 1;
        match self.spec {
            ScheduleSpec::Fixed { eta } => Ok(drift.scaled(eta)),
            ScheduleSpec::Adagrad { eta0, epsilon, beta } => {
                if self.accumulator.is_empty() {
                    self.accumulator = vec![0.0; drift.values.len()];
                }
                let values = self
                    .accumulator
                    .iter_mut()
                    .zip(&drift.values)
                    .map(|(a, &g)| {
                        if beta == 0.0 {
                            *a += g * g;
                        } else {
                            *a = beta * *a + (1.0 - beta) * g * g;
                        }
                        eta0 * g / (epsilon + a.sqrt())
                    })
                    .collect();
                DriftField::from_values(drift.len(), drift.dim(), values)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn field(v: &[f64]) -> DriftField {
        DriftField::from_values(1, v.len(), v.to_vec()).unwrap()
    }

    #[test]
    fn fixed_scales() {
        let mut s = StepSchedule::fixed(0.1).unwrap();
        let out = s.apply(&field(&[1.0, -2.0])).unwrap();
        assert_relative_eq!(out.values()[0], 0.1);
        assert_relative_eq!(out.values()[1], -0.2);
    }

    #[test]
    fn adagrad_first_step_is_about_eta0() {
        let mut s = StepSchedule::new(ScheduleSpec::Adagrad {
            eta0: 0.2,
            epsilon: 1e-12,
            beta: 0.0,
        })
        .unwrap();
        let out = s.apply(&field(&[3.0, -0.001, 250.0])).unwrap();
        for (o, g) in out.values().iter().zip([3.0f64, -0.001, 250.0]) {
            assert_relative_eq!(*o, 0.2 * g.signum(), max_relative = 1e-8);
        }
    }

    #[test]
    fn adagrad_constant_drift_closed_form() {
        let (eta0, eps, g) = (0.2, 1e-3, -0.7);
        let mut s = StepSchedule::new(ScheduleSpec::Adagrad {
            eta0,
            epsilon: eps,
            beta: 0.0,
        })
        .unwrap();
        for k in 1..=9u32 {
            let out = s.apply(&field(&[g])).unwrap();
            // A_k = k g²
            let expect = eta0 * g / (eps + (k as f64).sqrt() * g.abs());
            assert_relative_eq!(out.values()[0], expect, max_relative = 1e-14);
            assert_relative_eq!(s.accumulator()[0], k as f64 * g * g, max_relative = 1e-14);
        }
    }

    #[test]
    fn adagrad_beta_averaging() {
        let mut s = StepSchedule::new(ScheduleSpec::Adagrad {
            eta0: 1.0,
            epsilon: 1e-6,
            beta: 0.9,
        })
        .unwrap();
        s.apply(&field(&[2.0])).unwrap();
        assert_relative_eq!(s.accumulator()[0], 0.4, max_relative = 1e-14);
        s.apply(&field(&[1.0])).unwrap();
        assert_relative_eq!(s.accumulator()[0], 0.9 * 0.4 + 0.1, max_relative = 1e-14);
        assert_eq!(s.calls(), 2);
    }

    #[test]
    fn errors() {
        assert!(StepSchedule::fixed(0.0).is_err());
        assert!(StepSchedule::new(ScheduleSpec::Adagrad { eta0: 0.1, epsilon: 0.0, beta: 0.5 }).is_err());
        assert!(StepSchedule::new(ScheduleSpec::Adagrad { eta0: 0.1, epsilon: 1e-6, beta: 1.0 }).is_err());
        let mut s = StepSchedule::new(ScheduleSpec::adagrad(0.1)).unwrap();
        assert!(s.apply(&field(&[f64::NAN])).is_err());
        s.apply(&field(&[1.0, 2.0])).unwrap();
        assert!(s.apply(&field(&[1.0])).is_err());
    }

    proptest! {
        #[test]
        fn accumulator_monotone_without_momentum(gs in proptest::collection::vec(-50.0f64..50.0, 1..40)) {
            let mut s = StepSchedule::new(ScheduleSpec::Adagrad { eta0: 0.3, epsilon: 1e-6, beta: 0.0 }).unwrap();
            let mut prev = 0.0f64;
            for (k, g) in gs.into_iter().enumerate() {
                let out = s.apply(&field(&[g])).unwrap();
                let a = s.accumulator()[0];
                prop_assert!(a >= prev);
                prev = a;
                if k == 0 {
                    prop_assert!(out.values()[0].abs() <= 0.3 * g.abs() / (1e-6 + g.abs()) + 1e-15);
                }
                prop_assert!(out.values()[0].abs() <= 0.3 + 1e-15);
            }
        }

        #[test]
        fn fixed_commutes_with_scaling(c in -10.0f64..10.0, g in proptest::collection::vec(-5.0f64..5.0, 1..6)) {
            let mut s1 = StepSchedule::fixed(0.37).unwrap();
            let mut s2 = StepSchedule::fixed(0.37).unwrap();
            let a = s1.apply(&field(&g).scaled(c)).unwrap();
            let b = s2.apply(&field(&g)).unwrap().scaled(c);
            for (x, y) in a.values().iter().zip(b.values()) {
                prop_assert!((x - y).abs() <= 1e-12 * (1.0 + y.abs()));
            }
        }
    }
}
