//! Architecture scoring back-ends.
//!
//! Nothing here trains a network. [`SurrogateEvaluator`] is an analytic
//! accuracy/cost landscape with hash-seeded noise, and [`LookupEvaluator`]
//! serves measured results from a table keyed by CondenseNet architecture.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cost::{macro_mac, MacroCostConfig};
use crate::error::{MonasError, Result};
use crate::kv::KvFile;
use crate::reward::EvaluationResult;
use crate::space::{
    Architecture, CondenseNetArch, SpaceKind, ALEXNET_FILTERS, ALEXNET_KERNEL, CONDENSENET_GROWTHS,
    CONDENSENET_STAGES, MACRO_LAYERS,
};

/// The shipped surrogate constants.
pub const SURROGATE_FIXTURE: &str = include_str!("../fixtures/surrogate_v1.conf");
/// The shipped CondenseNet results table.
pub const CONDENSENET_TABLE: &str = include_str!("../fixtures/condensenet_table.csv");

pub trait Evaluator: Send + Sync {
    fn evaluate(&self, arch: &Architecture) -> Result<EvaluationResult>;
    fn descriptor(&self) -> String;
}

/// Surrogate constants for one space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateConfig {
    pub a_max: f64,
    /// Diminishing-returns scale of the accuracy curve.
    pub kappa: f64,
    pub energy_base: f64,
    pub energy_scale: f64,
    pub power_base: f64,
    pub power_scale: f64,
    /// Half-width of the uniform accuracy noise.
    pub noise: f64,
    /// Per-layer (or per-block) capacity weights.
    pub weights: Vec<f64>,
}

impl SurrogateConfig {
    fn from_kv(kv: &KvFile, prefix: &str, layers: usize) -> Result<Self> {
        let key = |k: &str| format!("{prefix}.{k}");
        let cfg = SurrogateConfig {
            a_max: kv.require(&key("a_max"))?,
            kappa: kv.require(&key("kappa"))?,
            energy_base: kv.require(&key("energy_base"))?,
            energy_scale: kv.require(&key("energy_scale"))?,
            power_base: kv.require(&key("power_base"))?,
            power_scale: kv.require(&key("power_scale"))?,
            noise: kv.require(&key("noise"))?,
            weights: kv
                .list(&key("weights"))?
                .unwrap_or_else(|| vec![1.0; layers]),
        };
        cfg.validate(prefix, layers)?;
        Ok(cfg)
    }

    fn validate(&self, name: &str, layers: usize) -> Result<()> {
        let scalars = [
            self.a_max,
            self.kappa,
            self.energy_base,
            self.energy_scale,
            self.power_base,
            self.power_scale,
            self.noise,
        ];
        if scalars.iter().chain(&self.weights).any(|v| !v.is_finite()) {
            return Err(MonasError::Config(format!(
                "{name}: coefficients must be finite"
            )));
        }
        if self.noise < 0.0 || self.kappa <= 0.0 {
            return Err(MonasError::Config(format!(
                "{name}: need noise >= 0 and kappa > 0"
            )));
        }
        if !(0.0..=1.0).contains(&self.a_max) {
            return Err(MonasError::Config(format!(
                "{name}: a_max must lie in [0, 1]"
            )));
        }
        if self.energy_base < 0.0
            || self.energy_scale < 0.0
            || self.power_base < 0.0
            || self.power_scale < 0.0
        {
            return Err(MonasError::Config(format!(
                "{name}: cost coefficients must be >= 0"
            )));
        }
        if self.weights.len() != layers || self.weights.iter().any(|&w| w < 0.0) {
            return Err(MonasError::Config(format!(
                "{name}: need {layers} non-negative weights"
            )));
        }
        if self.weights.iter().sum::<f64>() <= 0.0 {
            return Err(MonasError::Config(format!("{name}: weights sum to zero")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateFixture {
    pub version: u32,
    pub alexnet: SurrogateConfig,
    pub condensenet: SurrogateConfig,
    #[serde(rename = "macro")]
    pub macro_space: SurrogateConfig,
}

impl SurrogateFixture {
    pub fn parse(text: &str) -> Result<Self> {
        let kv = KvFile::parse(text)?;
        let version: u32 = kv.require("version")?;
        if version != 1 {
            return Err(MonasError::Config(format!(
                "unsupported surrogate fixture version {version}"
            )));
        }
        for key in kv.keys() {
            let known = key == "version"
                || ["alexnet.", "condensenet.", "macro."]
                    .iter()
                    .any(|p| key.starts_with(p));
            if !known {
                return Err(MonasError::Config(format!("unknown surrogate key `{key}`")));
            }
        }
        Ok(SurrogateFixture {
            version,
            alexnet: SurrogateConfig::from_kv(&kv, "alexnet", 2)?,
            condensenet: SurrogateConfig::from_kv(&kv, "condensenet", 3)?,
            macro_space: SurrogateConfig::from_kv(&kv, "macro", MACRO_LAYERS)?,
        })
    }

    pub fn shipped() -> Self {
        Self::parse(SURROGATE_FIXTURE).expect("shipped surrogate fixture parses")
    }

    pub fn for_space(&self, kind: SpaceKind) -> &SurrogateConfig {
        match kind {
            SpaceKind::AlexNet => &self.alexnet,
            SpaceKind::CondenseNet => &self.condensenet,
            SpaceKind::Macro => &self.macro_space,
        }
    }
}

/// Deterministic noise in `[-1, 1)` from a 64-bit FNV-1a hash of the seed and
/// the architecture's compact text, finished with a splitmix64 round.
fn arch_noise(seed: u64, arch: &Architecture) -> f64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let text = arch.to_compact();
    for b in seed.to_le_bytes().iter().chain(text.as_bytes()) {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h = h.wrapping_add(0x9e37_79b9_7f4a_7c15);
    h = (h ^ (h >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h = (h ^ (h >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^= h >> 31;
    let unit = (h >> 11) as f64 / (1u64 << 53) as f64;
    2.0 * unit - 1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateEvaluator {
    pub fixture: SurrogateFixture,
    pub seed: u64,
    pub cost: MacroCostConfig,
}

/// Size measures of an architecture on a `[0, 1]` scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Capacity {
    pub total: f64,
    pub max_layer: f64,
}

impl SurrogateEvaluator {
    pub fn new(fixture: SurrogateFixture, seed: u64) -> Self {
        SurrogateEvaluator {
            fixture,
            seed,
            cost: MacroCostConfig::default(),
        }
    }

    pub fn shipped(seed: u64) -> Self {
        Self::new(SurrogateFixture::shipped(), seed)
    }

    pub fn capacity(&self, arch: &Architecture) -> Result<Capacity> {
        let cfg = self.fixture.for_space(arch.space());
        let w = &cfg.weights;
        let weighted = |sizes: &[f64], max_size: f64| {
            let num: f64 = sizes.iter().zip(w).map(|(s, w)| s * w).sum();
            let den: f64 = w.iter().sum::<f64>() * max_size;
            let max_layer = sizes.iter().copied().fold(0.0, f64::max) / max_size;
            Capacity {
                total: num / den,
                max_layer,
            }
        };
        Ok(match arch {
            Architecture::AlexNet(a) => {
                let max_k = *ALEXNET_KERNEL.last().unwrap() as f64;
                let max_size = *ALEXNET_FILTERS.last().unwrap() as f64 * max_k * max_k;
                let sizes: Vec<f64> = a
                    .layers
                    .iter()
                    .map(|l| l.filters as f64 * l.height as f64 * l.width as f64)
                    .collect();
                weighted(&sizes, max_size)
            }
            Architecture::CondenseNet(a) => {
                let max_size = *CONDENSENET_STAGES.last().unwrap() as f64
                    * *CONDENSENET_GROWTHS.last().unwrap() as f64;
                let sizes: Vec<f64> = (0..3)
                    .map(|b| a.stages[b] as f64 * a.growths[b] as f64)
                    .collect();
                weighted(&sizes, max_size)
            }
            Architecture::Macro(m) => {
                let report = macro_mac(m, &self.cost)?;
                let layer_max: Vec<f64> = (0..MACRO_LAYERS)
                    .map(|i| {
                        crate::space::MacroOp::ALL
                            .iter()
                            .map(|&op| self.cost.op_mac(i, op))
                            .collect::<Result<Vec<_>>>()
                            .map(|v| v.into_iter().max().unwrap_or(0) as f64)
                    })
                    .collect::<Result<_>>()?;
                let num: f64 = report
                    .per_layer
                    .iter()
                    .zip(w)
                    .map(|((_, mac), w)| *mac as f64 * w)
                    .sum();
                let den: f64 = layer_max.iter().zip(w).map(|(m, w)| m * w).sum();
                let biggest = layer_max.iter().copied().fold(0.0, f64::max);
                let max_layer = report
                    .per_layer
                    .iter()
                    .map(|(_, mac)| *mac as f64)
                    .fold(0.0, f64::max)
                    / biggest;
                Capacity {
                    total: num / den,
                    max_layer,
                }
            }
        })
    }
}

impl Evaluator for SurrogateEvaluator {
    fn evaluate(&self, arch: &Architecture) -> Result<EvaluationResult> {
        let cfg = self.fixture.for_space(arch.space());
        let cap = self.capacity(arch)?;
        let clean = cfg.a_max * (1.0 - (-cap.total / cfg.kappa).exp());
        let accuracy = (clean + cfg.noise * arch_noise(self.seed, arch)).clamp(0.0, 1.0);
        let mut result =
            EvaluationResult::new(accuracy, cfg.energy_base + cfg.energy_scale * cap.total);
        result.peak_power_watts = Some(cfg.power_base + cfg.power_scale * cap.max_layer);
        if let Architecture::Macro(m) = arch {
            let report = macro_mac(m, &self.cost)?;
            result.mac_total = Some(report.total_mac);
            result.mac_normalized = Some(report.normalized);
        }
        Ok(result)
    }

    fn descriptor(&self) -> String {
        format!("surrogate(v{}, seed={})", self.fixture.version, self.seed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LookupRow {
    pub arch: CondenseNetArch,
    pub error_pct: f64,
    pub energy_j: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LookupTable {
    rows: Vec<LookupRow>,
    index: HashMap<CondenseNetArch, usize>,
}

pub const LOOKUP_HEADER: &str = "stage1,stage2,stage3,growth1,growth2,growth3,error_pct,energy_j";

impl LookupTable {
    /// Parses the comma-delimited table format; the header line is required.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == LOOKUP_HEADER => {}
            _ => {
                return Err(MonasError::Parse {
                    line: 1,
                    message: format!("expected header `{LOOKUP_HEADER}`"),
                })
            }
        }
        let mut table = LookupTable::default();
        for (n, raw) in lines {
            let line = n + 1;
            let raw = raw.trim();
            if raw.is_empty() {
                continue;
            }
            let fields: Vec<&str> = raw.split(',').map(str::trim).collect();
            if fields.len() != 8 {
                return Err(MonasError::Parse {
                    line,
                    message: format!("expected 8 fields, got {}", fields.len()),
                });
            }
            let int = |k: usize| {
                fields[k].parse::<u32>().map_err(|_| MonasError::Parse {
                    line,
                    message: format!("bad integer `{}`", fields[k]),
                })
            };
            let real = |k: usize| {
                fields[k]
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| MonasError::Parse {
                        line,
                        message: format!("bad number `{}`", fields[k]),
                    })
            };
            let arch = CondenseNetArch {
                stages: [int(0)?, int(1)?, int(2)?],
                growths: [int(3)?, int(4)?, int(5)?],
            };
            let error_pct = real(6)?;
            let energy_j = real(7)?;
            if !(0.0..=100.0).contains(&error_pct) || energy_j < 0.0 {
                return Err(MonasError::Parse {
                    line,
                    message: "error must lie in [0, 100] and energy be >= 0".into(),
                });
            }
            if table.index.contains_key(&arch) {
                return Err(MonasError::DuplicateKey {
                    line,
                    key: Architecture::CondenseNet(arch).to_compact(),
                });
            }
            table.index.insert(arch, table.rows.len());
            table.rows.push(LookupRow {
                arch,
                error_pct,
                energy_j,
            });
        }
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn shipped() -> Self {
        Self::parse(CONDENSENET_TABLE).expect("shipped lookup table parses")
    }

    pub fn rows(&self) -> &[LookupRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get(&self, arch: &CondenseNetArch) -> Option<&LookupRow> {
        self.index.get(arch).map(|&i| &self.rows[i])
    }
}

pub fn load_lookup(path: &Path) -> Result<LookupTable> {
    LookupTable::load(path)
}

#[derive(Debug, Clone)]
pub struct LookupEvaluator {
    pub table: LookupTable,
    /// Used for architectures missing from the table, when set.
    pub fallback: Option<SurrogateEvaluator>,
}

impl LookupEvaluator {
    pub fn new(table: LookupTable) -> Self {
        LookupEvaluator {
            table,
            fallback: None,
        }
    }
}

impl Evaluator for LookupEvaluator {
    fn evaluate(&self, arch: &Architecture) -> Result<EvaluationResult> {
        let found = match arch {
            Architecture::CondenseNet(a) => self.table.get(a),
            _ => None,
        };
        match (found, &self.fallback) {
            (Some(row), _) => Ok(EvaluationResult::new(
                1.0 - row.error_pct / 100.0,
                row.energy_j,
            )),
            (None, Some(fb)) => fb.evaluate(arch),
            (None, None) => Err(MonasError::NotFound(arch.to_compact())),
        }
    }

    fn descriptor(&self) -> String {
        format!(
            "lookup({} rows{})",
            self.table.len(),
            if self.fallback.is_some() {
                ", surrogate fallback"
            } else {
                ""
            }
        )
    }
}
