//! Run configuration from a flat key-value file plus command-line overrides.
//!
//! ```text
//! space = condensenet
//! reward.kind = power_constraint
//! reward.threshold = 70
//! run.iterations = 600
//! run.seed = 1
//! ```
//!
//! Overrides are applied on top of the file, then per-space defaults fill
//! whatever is still unset. Unknown keys are rejected.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;

use crate::engine::{EvaluatorSpec, RunConfig};
use crate::error::{MonasError, Result};
use crate::kv::KvFile;
use crate::reward::{RewardKind, RewardSpec, DEFAULT_VIOLATION_REWARD};
use crate::space::SpaceKind;

pub const KEYS: &[&str] = &[
    "space",
    "reward.kind",
    "reward.alpha",
    "reward.threshold",
    "reward.energy_norm_max",
    "reward.violation",
    "evaluator.kind",
    "evaluator.fixture",
    "evaluator.fallback",
    "controller.hidden",
    "controller.init_scale",
    "controller.baseline",
    "controller.clip",
    "adam.lr",
    "run.iterations",
    "run.seed",
    "run.batch",
    "run.window",
    "cost.channels",
    "cost.resolution",
    "cost.input_channels",
    "out.dir",
];

pub const DEFAULT_ITERATIONS: usize = 600;
pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_ALPHA: f64 = 0.5;

pub fn default_threshold(kind: RewardKind) -> Option<f64> {
    match kind {
        RewardKind::Mixed => None,
        RewardKind::PowerConstraint => Some(70.0),
        RewardKind::AccuracyConstraint => Some(0.85),
        RewardKind::MacConstraint => Some(0.31),
    }
}

/// Energy (J) that maps to 1.0 after normalization.
pub fn default_energy_norm(space: SpaceKind) -> f64 {
    match space {
        SpaceKind::AlexNet => 100.0,
        SpaceKind::CondenseNet => 130.0,
        SpaceKind::Macro => 100.0,
    }
}

/// Merged raw values, last writer wins.
#[derive(Debug, Clone, Default)]
pub struct ConfigValues {
    values: BTreeMap<String, String>,
}

impl ConfigValues {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_kv(kv: &KvFile) -> Result<Self> {
        let mut out = Self::new();
        for (key, line, value) in kv.iter() {
            if !KEYS.contains(&key) {
                return Err(MonasError::Parse {
                    line,
                    message: format!("unknown config key `{key}`"),
                });
            }
            out.values.insert(key.to_string(), value.to_string());
        }
        Ok(out)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            MonasError::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        Self::from_kv(&KvFile::parse(&text)?)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<()> {
        if !KEYS.contains(&key) {
            return Err(MonasError::Config(format!("unknown config key `{key}`")));
        }
        self.values.insert(key.to_string(), value.into());
        Ok(())
    }

    /// Parses `key=value`.
    pub fn set_pair(&mut self, pair: &str) -> Result<()> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| MonasError::Config(format!("expected key=value, got `{pair}`")))?;
        self.set(k.trim(), v.trim())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|_| MonasError::Config(format!("invalid value `{v}` for `{key}`")))
            })
            .transpose()
    }

    /// `off`/`none` disables; anything else must parse as a number.
    fn optional_f64(&self, key: &str) -> Result<Option<Option<f64>>> {
        match self.get(key) {
            None => Ok(None),
            Some("off" | "none") => Ok(Some(None)),
            Some(_) => Ok(Some(self.parsed::<f64>(key)?)),
        }
    }

    pub fn resolve(&self) -> Result<RunConfig> {
        let space: SpaceKind = match self.get("space") {
            Some(s) => s
                .parse()
                .map_err(|e: MonasError| MonasError::Config(e.to_string()))?,
            None => return Err(MonasError::Config("missing key `space`".into())),
        };
        let kind: RewardKind = match self.get("reward.kind") {
            Some(s) => s
                .parse()
                .map_err(|e: MonasError| MonasError::Config(e.to_string()))?,
            None => RewardKind::Mixed,
        };
        let threshold = self
            .parsed::<f64>("reward.threshold")?
            .or(default_threshold(kind));
        let energy_norm_max = self
            .parsed::<f64>("reward.energy_norm_max")?
            .unwrap_or(default_energy_norm(space));
        let reward = match kind {
            RewardKind::Mixed => RewardSpec::Mixed {
                alpha: self.parsed("reward.alpha")?.unwrap_or(DEFAULT_ALPHA),
                energy_norm_max,
            },
            RewardKind::PowerConstraint => RewardSpec::PowerConstraint {
                threshold: threshold.unwrap_or_default(),
            },
            RewardKind::AccuracyConstraint => RewardSpec::AccuracyConstraint {
                threshold: threshold.unwrap_or_default(),
                energy_norm_max,
            },
            RewardKind::MacConstraint => RewardSpec::MacConstraint {
                threshold: threshold.unwrap_or_default(),
                violation_reward: self
                    .parsed("reward.violation")?
                    .unwrap_or(DEFAULT_VIOLATION_REWARD),
            },
        };

        let iterations = self.parsed("run.iterations")?.unwrap_or(DEFAULT_ITERATIONS);
        let seed = self.parsed("run.seed")?.unwrap_or(DEFAULT_SEED);
        let mut cfg = RunConfig::new(space, reward, iterations, seed);

        let fixture = self.get("evaluator.fixture").map(PathBuf::from);
        cfg.evaluator = match self.get("evaluator.kind").unwrap_or("surrogate") {
            "surrogate" => {
                if self.get("evaluator.fallback").is_some() {
                    return Err(MonasError::Config(
                        "evaluator.fallback only applies to the lookup evaluator".into(),
                    ));
                }
                EvaluatorSpec::Surrogate { fixture }
            }
            "lookup" => {
                if space != SpaceKind::CondenseNet {
                    return Err(MonasError::Config(
                        "the lookup evaluator only covers the condensenet space".into(),
                    ));
                }
                EvaluatorSpec::Lookup {
                    table: fixture,
                    fallback: self.parsed("evaluator.fallback")?.unwrap_or(false),
                }
            }
            other => {
                return Err(MonasError::Config(format!("unknown evaluator `{other}`")));
            }
        };

        if let Some(v) = self.parsed("controller.hidden")? {
            cfg.hidden = v;
        }
        if let Some(v) = self.parsed("controller.init_scale")? {
            cfg.init_scale = v;
        }
        if let Some(v) = self.optional_f64("controller.baseline")? {
            cfg.baseline_decay = v;
        }
        if let Some(v) = self.optional_f64("controller.clip")? {
            cfg.clip_norm = v;
        }
        if let Some(v) = self.parsed("adam.lr")? {
            cfg.learning_rate = v;
        }
        if let Some(v) = self.parsed("run.batch")? {
            cfg.batch_size = v;
        }
        if let Some(v) = self.parsed("run.window")? {
            cfg.window = v;
        }
        if let Some(v) = self.parsed("cost.channels")? {
            cfg.cost.channels = v;
        }
        if let Some(v) = self.parsed("cost.resolution")? {
            cfg.cost.input_resolution = v;
        }
        if let Some(v) = self.parsed("cost.input_channels")? {
            cfg.cost.input_channels = v;
        }
        if let Some(v) = self.get("out.dir") {
            cfg.out_dir = PathBuf::from(v);
        }
        if let Some(d) = cfg.baseline_decay {
            if !(0.0..1.0).contains(&d) {
                return Err(MonasError::Config(
                    "controller.baseline must be in [0, 1)".into(),
                ));
            }
        }
        if let Some(c) = cfg.clip_norm {
            if !(c > 0.0) {
                return Err(MonasError::Config(
                    "controller.clip must be positive".into(),
                ));
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn values(text: &str) -> Result<ConfigValues> {
        ConfigValues::from_kv(&KvFile::parse(text)?)
    }

    #[test]
    fn defaults_fill_in() {
        let cfg = values("space = macro\nreward.kind = mac")
            .unwrap()
            .resolve()
            .unwrap();
        assert_eq!(
            cfg.reward,
            RewardSpec::MacConstraint {
                threshold: 0.31,
                violation_reward: -1.0
            }
        );
        assert_eq!(cfg.hidden, 64);
        assert_eq!(cfg.iterations, DEFAULT_ITERATIONS);
        assert_eq!(cfg.window, 50);

        let cfg = values("space = condensenet").unwrap().resolve().unwrap();
        assert_eq!(
            cfg.reward,
            RewardSpec::Mixed {
                alpha: 0.5,
                energy_norm_max: 130.0
            }
        );
    }

    #[test]
    fn overrides_win() {
        let mut v = values("space = alexnet\nrun.seed = 3\nadam.lr = 0.1").unwrap();
        v.set_pair("run.seed=9").unwrap();
        v.set("space", "condensenet").unwrap();
        v.set_pair("controller.baseline = 0.9").unwrap();
        let cfg = v.resolve().unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.space, SpaceKind::CondenseNet);
        assert_eq!(cfg.learning_rate, 0.1);
        assert_eq!(cfg.baseline_decay, Some(0.9));
        v.set("controller.clip", "off").unwrap();
        assert_eq!(v.resolve().unwrap().clip_norm, None);
    }

    #[test]
    fn every_key_is_settable() {
        let mut v = ConfigValues::new();
        for key in KEYS {
            v.set(key, "x").unwrap();
        }
        assert!(v.set("run.epochs", "1").is_err());
    }

    #[test]
    fn rejects_bad_config() {
        assert!(matches!(
            values("space = macro\nrun.epochs = 3"),
            Err(MonasError::Parse { line: 2, .. })
        ));
        let bad = [
            "reward.kind = mixed",
            "space = vgg",
            "space = macro\nrun.iterations = 0",
            "space = macro\nrun.iterations = -1",
            "space = macro\nadam.lr = 0",
            "space = macro\nreward.kind = mixed\nreward.alpha = 1.5",
            "space = macro\nevaluator.kind = lookup",
            "space = condensenet\nevaluator.kind = oracle",
            "space = condensenet\ncontroller.baseline = 1",
        ];
        for text in bad {
            let err = values(text).unwrap().resolve().unwrap_err();
            assert!(err.is_usage(), "{text}: {err}");
        }
    }

    #[test]
    fn lookup_evaluator() {
        let cfg = values("space = condensenet\nevaluator.kind = lookup\nevaluator.fallback = true")
            .unwrap()
            .resolve()
            .unwrap();
        assert_eq!(
            cfg.evaluator,
            EvaluatorSpec::Lookup {
                table: None,
                fallback: true
            }
        );
    }
}
