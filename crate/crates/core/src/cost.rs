//! Multiply-accumulate counts for convolutional layers and the 12-layer
//! macro space.
//!
//! Standard convolution costs `K²·C_in·H·W·C_out`, depthwise-separable
//! convolution `C_in·H·W·(K² + C_out)`, where `H×W` is the output feature
//! map. Pooling, skip connections and the classifier are not priced.

use serde::{Deserialize, Serialize};

use crate::error::{MonasError, Result};
use crate::space::{MacroArch, MacroOp, MACRO_LAYERS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Conv,
    SepConv,
    Pool,
}

impl From<MacroOp> for LayerKind {
    fn from(op: MacroOp) -> Self {
        match op {
            MacroOp::Conv3x3 | MacroOp::Conv5x5 => LayerKind::Conv,
            MacroOp::SepConv3x3 | MacroOp::SepConv5x5 => LayerKind::SepConv,
            MacroOp::AvgPool | MacroOp::MaxPool => LayerKind::Pool,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerGeometry {
    pub kernel: u64,
    pub c_in: u64,
    pub c_out: u64,
    /// Output feature-map height.
    pub height: u64,
    /// Output feature-map width.
    pub width: u64,
    pub kind: LayerKind,
}

impl LayerGeometry {
    fn check(&self) -> Result<()> {
        if self.kernel == 0
            || self.c_in == 0
            || self.c_out == 0
            || self.height == 0
            || self.width == 0
        {
            return Err(MonasError::InvalidValue(format!(
                "layer geometry must be positive: {self:?}"
            )));
        }
        Ok(())
    }
}

fn product(factors: &[u64]) -> Result<u64> {
    factors.iter().try_fold(1u64, |acc, &f| {
        acc.checked_mul(f)
            .ok_or_else(|| MonasError::InvalidValue("MAC count overflows u64".into()))
    })
}

pub fn conv_mac(g: &LayerGeometry) -> Result<u64> {
    g.check()?;
    product(&[g.kernel, g.kernel, g.c_in, g.height, g.width, g.c_out])
}

pub fn sep_conv_mac(g: &LayerGeometry) -> Result<u64> {
    g.check()?;
    let k2 = product(&[g.kernel, g.kernel])?;
    let inner = k2
        .checked_add(g.c_out)
        .ok_or_else(|| MonasError::InvalidValue("MAC count overflows u64".into()))?;
    product(&[g.c_in, g.height, g.width, inner])
}

/// MAC count dispatched on `g.kind`; pooling is free.
pub fn layer_mac(g: &LayerGeometry) -> Result<u64> {
    match g.kind {
        LayerKind::Conv => conv_mac(g),
        LayerKind::SepConv => sep_conv_mac(g),
        LayerKind::Pool => {
            g.check()?;
            Ok(0)
        }
    }
}

/// Channel and resolution schedule of the macro body.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MacroCostConfig {
    /// Constant body width `C`.
    pub channels: u64,
    /// Side of the square input image.
    pub input_resolution: u64,
    pub input_channels: u64,
}

impl Default for MacroCostConfig {
    fn default() -> Self {
        MacroCostConfig {
            channels: 32,
            input_resolution: 32,
            input_channels: 3,
        }
    }
}

impl MacroCostConfig {
    /// Output side of layer `index` (0-based): full for layers 0..4, half for
    /// 4..8, quarter for 8..12 ("same" padding, stride 2 at layers 4 and 8).
    pub fn resolution(&self, index: usize) -> u64 {
        let r = self.input_resolution >> (index / 4);
        r.max(1)
    }

    pub fn geometry(&self, index: usize, op: MacroOp) -> LayerGeometry {
        let c_in = if index == 0 {
            self.input_channels
        } else {
            self.channels
        };
        let kind = LayerKind::from(op);
        let r = self.resolution(index);
        LayerGeometry {
            kernel: op.kernel(),
            c_in,
            c_out: if kind == LayerKind::Pool {
                c_in
            } else {
                self.channels
            },
            height: r,
            width: r,
            kind,
        }
    }

    pub fn op_mac(&self, index: usize, op: MacroOp) -> Result<u64> {
        layer_mac(&self.geometry(index, op))
    }

    /// Total MAC when every layer picks its most expensive operation.
    pub fn max_space_mac(&self) -> Result<u64> {
        (0..MACRO_LAYERS).try_fold(0u64, |acc, i| {
            let worst = MacroOp::ALL
                .iter()
                .map(|&op| self.op_mac(i, op))
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .max()
                .unwrap_or(0);
            Ok(acc + worst)
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacReport {
    pub total_mac: u64,
    /// `(layer number, MAC)`, layer numbers 1-based.
    pub per_layer: Vec<(usize, u64)>,
    pub normalized: f64,
}

pub fn macro_mac(arch: &MacroArch, config: &MacroCostConfig) -> Result<MacReport> {
    arch.validate()?;
    let per_layer = arch
        .layers
        .iter()
        .enumerate()
        .map(|(i, l)| Ok((i + 1, config.op_mac(i, l.op)?)))
        .collect::<Result<Vec<_>>>()?;
    let total_mac: u64 = per_layer.iter().map(|(_, m)| m).sum();
    let max = config.max_space_mac()?;
    let normalized = if max == 0 {
        0.0
    } else {
        (total_mac as f64 / max as f64).clamp(0.0, 1.0)
    };
    Ok(MacReport {
        total_mac,
        per_layer,
        normalized,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::MacroLayer;

    fn geom(kernel: u64, c_in: u64, hw: u64, c_out: u64, kind: LayerKind) -> LayerGeometry {
        LayerGeometry {
            kernel,
            c_in,
            c_out,
            height: hw,
            width: hw,
            kind,
        }
    }

    #[test]
    fn conv_examples() {
        assert_eq!(
            conv_mac(&geom(3, 3, 32, 16, LayerKind::Conv)).unwrap(),
            442_368
        );
        assert_eq!(conv_mac(&geom(1, 1, 1, 1, LayerKind::Conv)).unwrap(), 1);
        assert_eq!(
            conv_mac(&geom(5, 32, 16, 32, LayerKind::Conv)).unwrap(),
            6_553_600
        );
    }

    #[test]
    fn sep_conv_examples() {
        assert_eq!(
            sep_conv_mac(&geom(3, 32, 16, 32, LayerKind::SepConv)).unwrap(),
            335_872
        );
        assert_eq!(
            sep_conv_mac(&geom(1, 1, 1, 1, LayerKind::SepConv)).unwrap(),
            2
        );
    }

    #[test]
    fn non_positive_dimension_rejected() {
        assert!(conv_mac(&geom(0, 3, 32, 16, LayerKind::Conv)).is_err());
        assert!(sep_conv_mac(&geom(3, 3, 32, 0, LayerKind::SepConv)).is_err());
        assert!(conv_mac(&geom(u64::MAX, 3, 32, 16, LayerKind::Conv)).is_err());
    }

    #[test]
    fn sep_conv_cheaper_across_macro_geometries() {
        let cfg = MacroCostConfig::default();
        for i in 0..MACRO_LAYERS {
            for k in [3, 5] {
                let mut g = cfg.geometry(i, MacroOp::Conv3x3);
                g.kernel = k;
                assert!(k * k + g.c_out < k * k * g.c_out);
                assert!(sep_conv_mac(&g).unwrap() < conv_mac(&g).unwrap());
            }
        }
    }

    #[test]
    fn all_pool_is_free() {
        let r = macro_mac(
            &MacroArch::uniform_op(MacroOp::MaxPool),
            &MacroCostConfig::default(),
        )
        .unwrap();
        assert_eq!(r.total_mac, 0);
        assert_eq!(r.normalized, 0.0);
        assert_eq!(r.per_layer.len(), 12);
    }

    #[test]
    fn most_expensive_arch_normalizes_to_one() {
        let cfg = MacroCostConfig::default();
        let layers = (0..MACRO_LAYERS)
            .map(|i| MacroLayer {
                op: *MacroOp::ALL
                    .iter()
                    .max_by_key(|&&op| cfg.op_mac(i, op).unwrap())
                    .unwrap(),
                skips: (0..i).collect(),
            })
            .collect();
        let r = macro_mac(&MacroArch { layers }, &cfg).unwrap();
        assert_eq!(r.normalized, 1.0);
        assert_eq!(r.total_mac, cfg.max_space_mac().unwrap());
    }

    #[test]
    fn all_conv5x5_by_layer() {
        // C = 32, 32×32 input; layer 1 reads 3 channels.
        let mut expected = 25 * 3 * 32 * 32 * 32;
        expected += 3 * (25 * 32 * 32 * 32 * 32);
        expected += 4 * (25 * 32 * 16 * 16 * 32);
        expected += 4 * (25 * 32 * 8 * 8 * 32);
        let r = macro_mac(
            &MacroArch::uniform_op(MacroOp::Conv5x5),
            &MacroCostConfig::default(),
        )
        .unwrap();
        assert_eq!(r.total_mac, expected);
        assert_eq!(r.total_mac, r.per_layer.iter().map(|p| p.1).sum::<u64>());
    }

    #[test]
    fn pooling_keeps_channels() {
        let g = MacroCostConfig::default().geometry(0, MacroOp::AvgPool);
        assert_eq!(g.c_in, g.c_out);
    }
}
