//! Key-value text form of an [`Architecture`].
//!
//! One `key = value` pair per line (or separated by `;` in the single-line
//! form). `#` starts a comment. Keys by space:
//!
//! ```text
//! space = alexnet        filters = 32,64    height = 3,5     width = 3,9
//! space = condensenet    stages = 6,14,14   growths = 32,32,32
//! space = macro          layer1 = conv3x3   layer2 = avg_pool   layer2.skips = 1 ...
//! ```
//!
//! Macro skips are 1-based layer numbers; an absent `layerN.skips` key means
//! no skips.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use super::{
    AlexNetArch, Architecture, CondenseNetArch, ConvLayer, MacroArch, MacroLayer, MacroOp,
    SpaceKind, MACRO_LAYERS,
};
use crate::error::{MonasError, Result};

fn join<T: fmt::Display>(values: impl IntoIterator<Item = T>) -> String {
    values
        .into_iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

impl Architecture {
    fn pairs(&self) -> Vec<(String, String)> {
        let mut out = vec![("space".to_string(), self.space().to_string())];
        match self {
            Architecture::AlexNet(a) => {
                out.push(("filters".into(), join(a.layers.iter().map(|l| l.filters))));
                out.push(("height".into(), join(a.layers.iter().map(|l| l.height))));
                out.push(("width".into(), join(a.layers.iter().map(|l| l.width))));
            }
            Architecture::CondenseNet(a) => {
                out.push(("stages".into(), join(a.stages)));
                out.push(("growths".into(), join(a.growths)));
            }
            Architecture::Macro(a) => {
                for (i, layer) in a.layers.iter().enumerate() {
                    out.push((format!("layer{}", i + 1), layer.op.to_string()));
                    if !layer.skips.is_empty() {
                        out.push((
                            format!("layer{}.skips", i + 1),
                            join(layer.skips.iter().map(|j| j + 1)),
                        ));
                    }
                }
            }
        }
        out
    }

    /// Multi-line form, newline-terminated.
    pub fn to_text(&self) -> String {
        self.pairs()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    /// Single-line form, pairs separated by `; `.
    pub fn to_compact(&self) -> String {
        self.pairs()
            .into_iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join("; ")
    }

    pub fn parse_text(text: &str) -> Result<Self> {
        let mut map: BTreeMap<String, (usize, String)> = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = n + 1;
            let content = raw.split('#').next().unwrap_or("");
            for item in content.split(';') {
                let item = item.trim();
                if item.is_empty() {
                    continue;
                }
                let (k, v) = item.split_once('=').ok_or_else(|| MonasError::Parse {
                    line,
                    message: format!("expected `key = value`, got `{item}`"),
                })?;
                let key = k.trim().to_string();
                if map.contains_key(&key) {
                    return Err(MonasError::DuplicateKey { line, key });
                }
                map.insert(key, (line, v.trim().to_string()));
            }
        }

        let take = |map: &mut BTreeMap<String, (usize, String)>, key: &str| {
            map.remove(key).ok_or_else(|| MonasError::Parse {
                line: 0,
                message: format!("missing key `{key}`"),
            })
        };
        let (_, space) = take(&mut map, "space")?;
        let kind: SpaceKind = space.parse()?;

        let arch = match kind {
            SpaceKind::AlexNet => {
                let filters = ints::<2>(take(&mut map, "filters")?)?;
                let height = ints::<2>(take(&mut map, "height")?)?;
                let width = ints::<2>(take(&mut map, "width")?)?;
                let layer = |l: usize| ConvLayer {
                    filters: filters[l],
                    height: height[l],
                    width: width[l],
                };
                Architecture::AlexNet(AlexNetArch {
                    layers: [layer(0), layer(1)],
                })
            }
            SpaceKind::CondenseNet => Architecture::CondenseNet(CondenseNetArch {
                stages: ints::<3>(take(&mut map, "stages")?)?,
                growths: ints::<3>(take(&mut map, "growths")?)?,
            }),
            SpaceKind::Macro => {
                let mut layers = Vec::with_capacity(MACRO_LAYERS);
                for i in 1..=MACRO_LAYERS {
                    let (line, op) = take(&mut map, &format!("layer{i}"))?;
                    let op = MacroOp::from_str(&op).map_err(|e| MonasError::Parse {
                        line,
                        message: e.to_string(),
                    })?;
                    let skips = match map.remove(&format!("layer{i}.skips")) {
                        None => Vec::new(),
                        Some((line, v)) => parse_list(line, &v)?
                            .into_iter()
                            .map(|j: usize| {
                                if j == 0 || j >= i {
                                    Err(MonasError::Parse {
                                        line,
                                        message: format!("layer{i} cannot skip from layer {j}"),
                                    })
                                } else {
                                    Ok(j - 1)
                                }
                            })
                            .collect::<Result<Vec<_>>>()?,
                    };
                    layers.push(MacroLayer { op, skips });
                }
                let arch = MacroArch { layers };
                arch.validate()?;
                Architecture::Macro(arch)
            }
        };

        if let Some((key, (line, _))) = map.into_iter().next() {
            return Err(MonasError::Parse {
                line,
                message: format!("unknown key `{key}`"),
            });
        }
        Ok(arch)
    }
}

fn parse_list<T: FromStr>(line: usize, v: &str) -> Result<Vec<T>> {
    v.split(',')
        .map(|t| {
            t.trim().parse::<T>().map_err(|_| MonasError::Parse {
                line,
                message: format!("bad number `{}`", t.trim()),
            })
        })
        .collect()
}

fn ints<const N: usize>((line, v): (usize, String)) -> Result<[u32; N]> {
    let values: Vec<u32> = parse_list(line, &v)?;
    values.try_into().map_err(|v: Vec<u32>| MonasError::Parse {
        line,
        message: format!("expected {N} values, got {}", v.len()),
    })
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_compact())
    }
}

impl FromStr for Architecture {
    type Err = MonasError;

    fn from_str(s: &str) -> Result<Self> {
        Architecture::parse_text(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{ActionSequence, SearchSpace};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn condensenet_text() {
        let arch = Architecture::CondenseNet(CondenseNetArch {
            stages: [6, 14, 14],
            growths: [32, 32, 32],
        });
        assert_eq!(
            arch.to_text(),
            "space = condensenet\nstages = 6,14,14\ngrowths = 32,32,32\n"
        );
        assert_eq!(
            arch.to_compact(),
            "space=condensenet; stages=6,14,14; growths=32,32,32"
        );
    }

    #[test]
    fn macro_text_with_comments() {
        let mut text = String::from("# all pooling\nspace = macro\n");
        for i in 1..=12 {
            text.push_str(&format!("layer{i} = avg_pool\n"));
        }
        text.push_str("layer3.skips = 1,2\n");
        let arch = Architecture::parse_text(&text).unwrap();
        let Architecture::Macro(m) = &arch else {
            panic!()
        };
        assert_eq!(m.layers[2].skips, vec![0, 1]);
        assert!(m.layers.iter().all(|l| l.op == MacroOp::AvgPool));
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(
            Architecture::parse_text("space = condensenet\nstages = 6,14\ngrowths=4,4,4"),
            Err(MonasError::Parse { line: 2, .. })
        ));
        assert!(matches!(
            Architecture::parse_text("space = condensenet\nstages = 6,6,6\nstages = 6,6,6"),
            Err(MonasError::DuplicateKey { line: 3, .. })
        ));
        assert!(Architecture::parse_text("space = vgg").is_err());
        assert!(Architecture::parse_text(
            "space=condensenet; stages=6,6,6; growths=4,4,4; extra=1"
        )
        .is_err());
        assert!(Architecture::parse_text("nonsense").is_err());
    }

    proptest! {
        #[test]
        fn text_round_trip(kind in 0usize..3, seed in any::<u64>()) {
            let space = SearchSpace::build(SpaceKind::ALL[kind]);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let seq = ActionSequence::new(
                space.slots().iter().map(|s| rng.random_range(0..s.len())).collect(),
            );
            let arch = space.decode(&seq).unwrap();
            prop_assert_eq!(Architecture::parse_text(&arch.to_text()).unwrap(), arch.clone());
            prop_assert_eq!(arch.to_compact().parse::<Architecture>().unwrap(), arch);
        }
    }
}
