//! The three decision spaces and the mapping between controller action
//! sequences and architecture descriptions.
//!
//! A space is an ordered list of decision slots. The controller predicts one
//! slot per time step, in slot order. Its input vector concatenates every
//! slot's candidates (slot-major), so a previous choice is a one-hot at
//! `vocab_offsets[slot] + action`.

mod text;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{MonasError, Result};

pub const ALEXNET_FILTERS: [u32; 5] = [8, 16, 32, 48, 64];
pub const ALEXNET_KERNEL: [u32; 4] = [3, 5, 7, 9];
pub const CONDENSENET_STAGES: [u32; 5] = [6, 8, 10, 12, 14];
pub const CONDENSENET_GROWTHS: [u32; 5] = [4, 8, 16, 24, 32];
pub const MACRO_LAYERS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpaceKind {
    AlexNet,
    CondenseNet,
    Macro,
}

impl SpaceKind {
    pub const ALL: [SpaceKind; 3] = [SpaceKind::AlexNet, SpaceKind::CondenseNet, SpaceKind::Macro];

    pub fn name(self) -> &'static str {
        match self {
            SpaceKind::AlexNet => "alexnet",
            SpaceKind::CondenseNet => "condensenet",
            SpaceKind::Macro => "macro",
        }
    }
}

impl fmt::Display for SpaceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SpaceKind {
    type Err = MonasError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "alexnet" => Ok(SpaceKind::AlexNet),
            "condensenet" => Ok(SpaceKind::CondenseNet),
            "macro" => Ok(SpaceKind::Macro),
            other => Err(MonasError::UnknownSpace(other.to_string())),
        }
    }
}

/// Slot types. The controller keeps one softmax head per type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SlotKind {
    Filters,
    Height,
    Width,
    Stage,
    Growth,
    Op,
    Skip,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MacroOp {
    #[serde(rename = "conv3x3")]
    Conv3x3,
    #[serde(rename = "conv5x5")]
    Conv5x5,
    #[serde(rename = "sep_conv3x3")]
    SepConv3x3,
    #[serde(rename = "sep_conv5x5")]
    SepConv5x5,
    #[serde(rename = "avg_pool")]
    AvgPool,
    #[serde(rename = "max_pool")]
    MaxPool,
}

impl MacroOp {
    pub const ALL: [MacroOp; 6] = [
        MacroOp::Conv3x3,
        MacroOp::Conv5x5,
        MacroOp::SepConv3x3,
        MacroOp::SepConv5x5,
        MacroOp::AvgPool,
        MacroOp::MaxPool,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MacroOp::Conv3x3 => "conv3x3",
            MacroOp::Conv5x5 => "conv5x5",
            MacroOp::SepConv3x3 => "sep_conv3x3",
            MacroOp::SepConv5x5 => "sep_conv5x5",
            MacroOp::AvgPool => "avg_pool",
            MacroOp::MaxPool => "max_pool",
        }
    }

    pub fn index(self) -> usize {
        MacroOp::ALL.iter().position(|&o| o == self).unwrap()
    }

    pub fn kernel(self) -> u64 {
        match self {
            MacroOp::Conv3x3 | MacroOp::SepConv3x3 => 3,
            MacroOp::Conv5x5 | MacroOp::SepConv5x5 => 5,
            // pooling windows are 3x3
            MacroOp::AvgPool | MacroOp::MaxPool => 3,
        }
    }

    pub fn is_pool(self) -> bool {
        matches!(self, MacroOp::AvgPool | MacroOp::MaxPool)
    }
}

impl fmt::Display for MacroOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MacroOp {
    type Err = MonasError;

    fn from_str(s: &str) -> Result<Self> {
        MacroOp::ALL
            .into_iter()
            .find(|op| op.name() == s.trim())
            .ok_or_else(|| MonasError::InvalidValue(format!("unknown operation `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Candidate {
    Int(u32),
    Op(MacroOp),
    Flag(bool),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionSlot {
    pub name: String,
    pub kind: SlotKind,
    pub candidates: Vec<Candidate>,
}

impl DecisionSlot {
    fn new(name: String, kind: SlotKind, candidates: Vec<Candidate>) -> Self {
        debug_assert!(!candidates.is_empty());
        DecisionSlot {
            name,
            kind,
            candidates,
        }
    }

    fn ints(name: String, kind: SlotKind, values: &[u32]) -> Self {
        Self::new(
            name,
            kind,
            values.iter().map(|&v| Candidate::Int(v)).collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    fn int_at(&self, action: usize) -> u32 {
        match self.candidates[action] {
            Candidate::Int(v) => v,
            other => unreachable!("slot {} holds {other:?}", self.name),
        }
    }

    fn position_of(&self, value: Candidate) -> Result<usize> {
        self.candidates
            .iter()
            .position(|&c| c == value)
            .ok_or_else(|| {
                MonasError::InvalidArchitecture(format!(
                    "{value:?} is not a candidate of slot {}",
                    self.name
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    kind: SpaceKind,
    slots: Vec<DecisionSlot>,
    vocab_offsets: Vec<usize>,
    vocab_size: usize,
}

/// Ordered candidate indices chosen by one rollout, with their log-probabilities.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ActionSequence {
    pub actions: Vec<usize>,
    pub log_probs: Vec<f64>,
}

impl ActionSequence {
    pub fn new(actions: Vec<usize>) -> Self {
        ActionSequence {
            actions,
            log_probs: Vec::new(),
        }
    }

    pub fn total_log_prob(&self) -> f64 {
        self.log_probs.iter().sum()
    }

    /// Dash-joined indices, e.g. `0-4-4-1-2-3`.
    pub fn to_compact(&self) -> String {
        self.actions
            .iter()
            .map(|a| a.to_string())
            .collect::<Vec<_>>()
            .join("-")
    }

    pub fn parse_compact(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Ok(ActionSequence::default());
        }
        let actions = s
            .split('-')
            .map(|t| {
                t.trim()
                    .parse::<usize>()
                    .map_err(|_| MonasError::InvalidValue(format!("bad action `{t}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ActionSequence::new(actions))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConvLayer {
    pub filters: u32,
    pub height: u32,
    pub width: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AlexNetArch {
    pub layers: [ConvLayer; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CondenseNetArch {
    pub stages: [u32; 3],
    pub growths: [u32; 3],
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MacroLayer {
    pub op: MacroOp,
    /// Zero-based indices of earlier layers feeding this one, ascending.
    pub skips: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MacroArch {
    pub layers: Vec<MacroLayer>,
}

impl MacroArch {
    pub fn uniform_op(op: MacroOp) -> Self {
        MacroArch {
            layers: (0..MACRO_LAYERS)
                .map(|_| MacroLayer {
                    op,
                    skips: Vec::new(),
                })
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.len() != MACRO_LAYERS {
            return Err(MonasError::InvalidArchitecture(format!(
                "macro architecture needs {MACRO_LAYERS} layers, got {}",
                self.layers.len()
            )));
        }
        for (i, layer) in self.layers.iter().enumerate() {
            if layer.skips.iter().any(|&j| j >= i) {
                return Err(MonasError::InvalidArchitecture(format!(
                    "layer {} skips from a non-earlier layer",
                    i + 1
                )));
            }
            if layer.skips.windows(2).any(|w| w[0] >= w[1]) {
                return Err(MonasError::InvalidArchitecture(format!(
                    "layer {} skip list must be strictly ascending",
                    i + 1
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "space", rename_all = "lowercase")]
pub enum Architecture {
    AlexNet(AlexNetArch),
    CondenseNet(CondenseNetArch),
    Macro(MacroArch),
}

impl Architecture {
    pub fn space(&self) -> SpaceKind {
        match self {
            Architecture::AlexNet(_) => SpaceKind::AlexNet,
            Architecture::CondenseNet(_) => SpaceKind::CondenseNet,
            Architecture::Macro(_) => SpaceKind::Macro,
        }
    }
}

impl SearchSpace {
    pub fn build(kind: SpaceKind) -> Self {
        let mut slots = Vec::new();
        match kind {
            SpaceKind::AlexNet => {
                for l in 1..=2 {
                    slots.push(DecisionSlot::ints(
                        format!("conv{l}.filters"),
                        SlotKind::Filters,
                        &ALEXNET_FILTERS,
                    ));
                    slots.push(DecisionSlot::ints(
                        format!("conv{l}.height"),
                        SlotKind::Height,
                        &ALEXNET_KERNEL,
                    ));
                    slots.push(DecisionSlot::ints(
                        format!("conv{l}.width"),
                        SlotKind::Width,
                        &ALEXNET_KERNEL,
                    ));
                }
            }
            SpaceKind::CondenseNet => {
                for b in 1..=3 {
                    slots.push(DecisionSlot::ints(
                        format!("block{b}.stage"),
                        SlotKind::Stage,
                        &CONDENSENET_STAGES,
                    ));
                    slots.push(DecisionSlot::ints(
                        format!("block{b}.growth"),
                        SlotKind::Growth,
                        &CONDENSENET_GROWTHS,
                    ));
                }
            }
            SpaceKind::Macro => {
                let ops: Vec<Candidate> = MacroOp::ALL.iter().map(|&o| Candidate::Op(o)).collect();
                let flags = vec![Candidate::Flag(false), Candidate::Flag(true)];
                for i in 1..=MACRO_LAYERS {
                    slots.push(DecisionSlot::new(
                        format!("layer{i}.op"),
                        SlotKind::Op,
                        ops.clone(),
                    ));
                    for j in 1..i {
                        slots.push(DecisionSlot::new(
                            format!("layer{i}.skip{j}"),
                            SlotKind::Skip,
                            flags.clone(),
                        ));
                    }
                }
            }
        }

        let mut vocab_offsets = Vec::with_capacity(slots.len());
        let mut vocab_size = 0;
        for slot in &slots {
            vocab_offsets.push(vocab_size);
            vocab_size += slot.len();
        }
        SearchSpace {
            kind,
            slots,
            vocab_offsets,
            vocab_size,
        }
    }

    pub fn kind(&self) -> SpaceKind {
        self.kind
    }

    pub fn slots(&self) -> &[DecisionSlot] {
        &self.slots
    }

    pub fn num_slots(&self) -> usize {
        self.slots.len()
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn vocab_offsets(&self) -> &[usize] {
        &self.vocab_offsets
    }

    /// Distinct slot kinds, in first-appearance order.
    pub fn slot_kinds(&self) -> Vec<SlotKind> {
        let mut kinds = Vec::new();
        for s in &self.slots {
            if !kinds.contains(&s.kind) {
                kinds.push(s.kind);
            }
        }
        kinds
    }

    /// Number of distinct architectures, i.e. the product of candidate counts.
    pub fn cardinality(&self) -> u128 {
        self.slots.iter().map(|s| s.len() as u128).product()
    }

    pub fn validate(&self, seq: &ActionSequence) -> Result<()> {
        if seq.actions.len() != self.slots.len() {
            return Err(MonasError::InvalidValue(format!(
                "{} actions for a space with {} slots",
                seq.actions.len(),
                self.slots.len()
            )));
        }
        for (slot, (&action, s)) in seq.actions.iter().zip(&self.slots).enumerate() {
            if action >= s.len() {
                return Err(MonasError::ActionOutOfRange {
                    slot,
                    action,
                    candidates: s.len(),
                });
            }
        }
        Ok(())
    }

    /// Input vector for the step after `previous` (all zeros on the first step).
    pub fn one_hot_input(&self, previous: Option<(usize, usize)>) -> Result<Vec<f64>> {
        let mut v = vec![0.0; self.vocab_size];
        if let Some((slot, action)) = previous {
            let s = self
                .slots
                .get(slot)
                .ok_or_else(|| MonasError::InvalidValue(format!("slot {slot} out of range")))?;
            if action >= s.len() {
                return Err(MonasError::ActionOutOfRange {
                    slot,
                    action,
                    candidates: s.len(),
                });
            }
            v[self.vocab_offsets[slot] + action] = 1.0;
        }
        Ok(v)
    }

    pub fn decode(&self, seq: &ActionSequence) -> Result<Architecture> {
        self.validate(seq)?;
        let a = &seq.actions;
        let s = &self.slots;
        Ok(match self.kind {
            SpaceKind::AlexNet => {
                let layer = |l: usize| ConvLayer {
                    filters: s[3 * l].int_at(a[3 * l]),
                    height: s[3 * l + 1].int_at(a[3 * l + 1]),
                    width: s[3 * l + 2].int_at(a[3 * l + 2]),
                };
                Architecture::AlexNet(AlexNetArch {
                    layers: [layer(0), layer(1)],
                })
            }
            SpaceKind::CondenseNet => {
                let mut arch = CondenseNetArch {
                    stages: [0; 3],
                    growths: [0; 3],
                };
                for b in 0..3 {
                    arch.stages[b] = s[2 * b].int_at(a[2 * b]);
                    arch.growths[b] = s[2 * b + 1].int_at(a[2 * b + 1]);
                }
                Architecture::CondenseNet(arch)
            }
            SpaceKind::Macro => {
                let mut layers = Vec::with_capacity(MACRO_LAYERS);
                let mut k = 0;
                for i in 0..MACRO_LAYERS {
                    let op = match s[k].candidates[a[k]] {
                        Candidate::Op(op) => op,
                        other => unreachable!("op slot holds {other:?}"),
                    };
                    k += 1;
                    let mut skips = Vec::new();
                    for j in 0..i {
                        if s[k].candidates[a[k]] == Candidate::Flag(true) {
                            skips.push(j);
                        }
                        k += 1;
                    }
                    layers.push(MacroLayer { op, skips });
                }
                Architecture::Macro(MacroArch { layers })
            }
        })
    }

    pub fn encode(&self, arch: &Architecture) -> Result<ActionSequence> {
        let s = &self.slots;
        let mut actions = Vec::with_capacity(s.len());
        match (self.kind, arch) {
            (SpaceKind::AlexNet, Architecture::AlexNet(a)) => {
                for (l, layer) in a.layers.iter().enumerate() {
                    actions.push(s[3 * l].position_of(Candidate::Int(layer.filters))?);
                    actions.push(s[3 * l + 1].position_of(Candidate::Int(layer.height))?);
                    actions.push(s[3 * l + 2].position_of(Candidate::Int(layer.width))?);
                }
            }
            (SpaceKind::CondenseNet, Architecture::CondenseNet(a)) => {
                for b in 0..3 {
                    actions.push(s[2 * b].position_of(Candidate::Int(a.stages[b]))?);
                    actions.push(s[2 * b + 1].position_of(Candidate::Int(a.growths[b]))?);
                }
            }
            (SpaceKind::Macro, Architecture::Macro(a)) => {
                a.validate()?;
                for (i, layer) in a.layers.iter().enumerate() {
                    actions.push(s[actions.len()].position_of(Candidate::Op(layer.op))?);
                    for j in 0..i {
                        actions.push(usize::from(layer.skips.contains(&j)));
                    }
                }
            }
            (kind, arch) => {
                return Err(MonasError::InvalidArchitecture(format!(
                    "{} architecture given to the {kind} space",
                    arch.space()
                )))
            }
        }
        Ok(ActionSequence::new(actions))
    }
}
