//! Multi-objective reward functions.
//!
//! * mixed: `α·accuracy − (1−α)·energy_n`
//! * power constraint: `accuracy` if peak power `<` threshold, else 0
//! * accuracy constraint: `1 − energy_n` if accuracy `>` threshold, else 0
//! * MAC constraint: `accuracy` if normalized MAC `<` threshold, else the
//!   (negative) violation reward
//!
//! `energy_n` is energy divided by a per-space normalizer, clamped to `[0, 1]`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{MonasError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvaluationResult {
    pub accuracy: f64,
    /// Energy per 1000 inferences, joules.
    pub energy_joules: f64,
    pub peak_power_watts: Option<f64>,
    pub mac_total: Option<u64>,
    pub mac_normalized: Option<f64>,
}

impl EvaluationResult {
    pub fn new(accuracy: f64, energy_joules: f64) -> Self {
        EvaluationResult {
            accuracy,
            energy_joules,
            peak_power_watts: None,
            mac_total: None,
            mac_normalized: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardKind {
    Mixed,
    PowerConstraint,
    AccuracyConstraint,
    MacConstraint,
}

impl RewardKind {
    pub fn name(self) -> &'static str {
        match self {
            RewardKind::Mixed => "mixed",
            RewardKind::PowerConstraint => "power_constraint",
            RewardKind::AccuracyConstraint => "accuracy_constraint",
            RewardKind::MacConstraint => "mac_constraint",
        }
    }
}

impl fmt::Display for RewardKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RewardKind {
    type Err = MonasError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "mixed" => Ok(RewardKind::Mixed),
            "power_constraint" | "power" => Ok(RewardKind::PowerConstraint),
            "accuracy_constraint" | "accuracy" => Ok(RewardKind::AccuracyConstraint),
            "mac_constraint" | "mac" => Ok(RewardKind::MacConstraint),
            other => Err(MonasError::InvalidValue(format!(
                "unknown reward kind `{other}`"
            ))),
        }
    }
}

pub const DEFAULT_VIOLATION_REWARD: f64 = -1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RewardSpec {
    Mixed {
        alpha: f64,
        energy_norm_max: f64,
    },
    PowerConstraint {
        threshold: f64,
    },
    AccuracyConstraint {
        threshold: f64,
        energy_norm_max: f64,
    },
    MacConstraint {
        threshold: f64,
        violation_reward: f64,
    },
}

pub fn normalize_energy(energy_joules: f64, energy_norm_max: f64) -> Result<f64> {
    if !(energy_norm_max > 0.0) {
        return Err(MonasError::InvalidValue(format!(
            "energy normalizer must be positive, got {energy_norm_max}"
        )));
    }
    Ok((energy_joules / energy_norm_max).clamp(0.0, 1.0))
}

impl RewardSpec {
    pub fn kind(&self) -> RewardKind {
        match self {
            RewardSpec::Mixed { .. } => RewardKind::Mixed,
            RewardSpec::PowerConstraint { .. } => RewardKind::PowerConstraint,
            RewardSpec::AccuracyConstraint { .. } => RewardKind::AccuracyConstraint,
            RewardSpec::MacConstraint { .. } => RewardKind::MacConstraint,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            RewardSpec::Mixed {
                alpha,
                energy_norm_max,
            } => {
                if !(0.0..=1.0).contains(&alpha) {
                    return Err(MonasError::InvalidValue(format!(
                        "alpha {alpha} not in [0, 1]"
                    )));
                }
                normalize_energy(0.0, energy_norm_max).map(|_| ())
            }
            RewardSpec::AccuracyConstraint {
                threshold,
                energy_norm_max,
            } => {
                if !threshold.is_finite() {
                    return Err(MonasError::InvalidValue("threshold must be finite".into()));
                }
                normalize_energy(0.0, energy_norm_max).map(|_| ())
            }
            RewardSpec::PowerConstraint { threshold } => {
                if !threshold.is_finite() {
                    return Err(MonasError::InvalidValue("threshold must be finite".into()));
                }
                Ok(())
            }
            RewardSpec::MacConstraint {
                threshold,
                violation_reward,
            } => {
                if !threshold.is_finite() || !violation_reward.is_finite() {
                    return Err(MonasError::InvalidValue(
                        "threshold and violation reward must be finite".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    /// Whether `eval` meets the hard constraint; `None` for the mixed reward.
    pub fn satisfies(&self, eval: &EvaluationResult) -> Result<Option<bool>> {
        Ok(match *self {
            RewardSpec::Mixed { .. } => None,
            RewardSpec::PowerConstraint { threshold } => {
                let power = eval
                    .peak_power_watts
                    .ok_or(MonasError::MissingField("peak_power_watts"))?;
                Some(power < threshold)
            }
            RewardSpec::AccuracyConstraint { threshold, .. } => Some(eval.accuracy > threshold),
            RewardSpec::MacConstraint { threshold, .. } => {
                let mac = eval
                    .mac_normalized
                    .ok_or(MonasError::MissingField("mac_normalized"))?;
                Some(mac < threshold)
            }
        })
    }

    pub fn compute(&self, eval: &EvaluationResult) -> Result<f64> {
        self.validate()?;
        let satisfied = self.satisfies(eval)?;
        Ok(match *self {
            RewardSpec::Mixed {
                alpha,
                energy_norm_max,
            } => {
                let energy = normalize_energy(eval.energy_joules, energy_norm_max)?;
                alpha * eval.accuracy - (1.0 - alpha) * energy
            }
            RewardSpec::PowerConstraint { .. } => {
                if satisfied == Some(true) {
                    eval.accuracy
                } else {
                    0.0
                }
            }
            RewardSpec::AccuracyConstraint {
                energy_norm_max, ..
            } => {
                if satisfied == Some(true) {
                    1.0 - normalize_energy(eval.energy_joules, energy_norm_max)?
                } else {
                    0.0
                }
            }
            RewardSpec::MacConstraint {
                violation_reward, ..
            } => {
                if satisfied == Some(true) {
                    eval.accuracy
                } else {
                    violation_reward
                }
            }
        })
    }
}

pub fn compute_reward(spec: &RewardSpec, eval: &EvaluationResult) -> Result<f64> {
    spec.compute(eval)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn energy_normalization() {
        assert!((normalize_energy(129.37, 130.0).unwrap() - 0.995_153_846).abs() < 1e-9);
        assert_eq!(normalize_energy(0.0, 130.0).unwrap(), 0.0);
        assert_eq!(normalize_energy(500.0, 130.0).unwrap(), 1.0);
        assert!(normalize_energy(1.0, 0.0).is_err());
        assert!(normalize_energy(1.0, -3.0).is_err());
    }

    #[test]
    fn reward_kind_names() {
        for k in [
            RewardKind::Mixed,
            RewardKind::PowerConstraint,
            RewardKind::AccuracyConstraint,
            RewardKind::MacConstraint,
        ] {
            assert_eq!(k.name().parse::<RewardKind>().unwrap(), k);
        }
        assert!("pareto".parse::<RewardKind>().is_err());
    }

    #[test]
    fn validation() {
        assert!(RewardSpec::Mixed {
            alpha: 1.5,
            energy_norm_max: 1.0
        }
        .validate()
        .is_err());
        assert!(RewardSpec::AccuracyConstraint {
            threshold: 0.8,
            energy_norm_max: 0.0
        }
        .validate()
        .is_err());
        assert!(RewardSpec::PowerConstraint {
            threshold: f64::NAN
        }
        .validate()
        .is_err());
    }

    proptest! {
        #[test]
        fn mixed_monotone_and_bounded(
            alpha in 0.01f64..0.99,
            acc in 0.0f64..1.0,
            e in 0.0f64..1.0,
            d in 0.001f64..0.5,
        ) {
            let spec = RewardSpec::Mixed { alpha, energy_norm_max: 1.0 };
            let base = spec.compute(&EvaluationResult::new(acc, e)).unwrap();
            let more_acc = spec.compute(&EvaluationResult::new((acc + d).min(1.0), e)).unwrap();
            let more_e = spec.compute(&EvaluationResult::new(acc, (e + d).min(1.0))).unwrap();
            prop_assert!(more_acc >= base);
            prop_assert!(more_e <= base);
            prop_assert!(base >= -(1.0 - alpha) - 1e-12 && base <= alpha + 1e-12);
        }
    }
}
