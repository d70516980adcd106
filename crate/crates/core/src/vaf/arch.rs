//! Layer wiring of the two-path value network and its shape arithmetic.
//!
//! ```text
//! full  3xHxWf -> conv 64 5x5/3 -> relu -> conv 128 3x3/2 -> relu -> flatten
//!              -> fc 512 -> relu -> fc 256 ----------------------------+
//! local 3xHxWl -> conv 64 3x3/1 -> relu -> conv 128 3x3/2 -> relu        |
//!              -> flatten -> fc 128 -------------------------------------+
//! concat 384 -> relu -> fc 128 -> relu -> fc 1
//! ```
//!
//! Convolutions use valid padding: `out = (in - k) / stride + 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CHANNELS: usize = 3;
pub const FULL_COLS: usize = 800;
pub const LOCAL_COLS: usize = 121;

/// Spatial size of the encoded inputs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct InputShape {
    pub rows: usize,
    pub full_cols: usize,
    pub local_cols: usize,
}

impl InputShape {
    /// The corridor shape: 43 matrix rows, 800 minutes, a 121-minute window.
    pub const CORRIDOR: InputShape = InputShape {
        rows: 43,
        full_cols: FULL_COLS,
        local_cols: LOCAL_COLS,
    };

    pub fn full_len(&self) -> usize {
        CHANNELS * self.rows * self.full_cols
    }

    pub fn local_len(&self) -> usize {
        CHANNELS * self.rows * self.local_cols
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LayerKind {
    Conv {
        in_channels: usize,
        out_channels: usize,
        kernel: [usize; 2],
        stride: usize,
    },
    Fc {
        in_features: usize,
        out_features: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: LayerKind,
}

impl LayerSpec {
    fn conv(name: &str, in_channels: usize, out_channels: usize, k: usize, stride: usize) -> Self {
        LayerSpec {
            name: name.into(),
            kind: LayerKind::Conv {
                in_channels,
                out_channels,
                kernel: [k, k],
                stride,
            },
        }
    }

    fn fc(name: &str, in_features: usize, out_features: usize) -> Self {
        LayerSpec {
            name: name.into(),
            kind: LayerKind::Fc {
                in_features,
                out_features,
            },
        }
    }

    /// Row-major weight shape: `[out, in, kh, kw]` or `[out, in]`.
    pub fn weight_shape(&self) -> Vec<usize> {
        match self.kind {
            LayerKind::Conv {
                in_channels,
                out_channels,
                kernel,
                ..
            } => vec![out_channels, in_channels, kernel[0], kernel[1]],
            LayerKind::Fc {
                in_features,
                out_features,
            } => vec![out_features, in_features],
        }
    }

    pub fn weight_len(&self) -> usize {
        self.weight_shape().iter().product()
    }

    pub fn bias_len(&self) -> usize {
        match self.kind {
            LayerKind::Conv { out_channels, .. } => out_channels,
            LayerKind::Fc { out_features, .. } => out_features,
        }
    }

    pub fn fan_in(&self) -> usize {
        self.weight_len() / self.bias_len()
    }
}

/// Layer names in payload order.
pub const LAYER_NAMES: [&str; 9] = [
    "full_conv1",
    "full_conv2",
    "full_fc",
    "full_proj",
    "local_conv1",
    "local_conv2",
    "local_proj",
    "head_hidden",
    "head_out",
];

pub fn conv_out(input: usize, kernel: usize, stride: usize) -> Option<usize> {
    (input >= kernel && stride > 0).then(|| (input - kernel) / stride + 1)
}

/// Spatial sizes through the network for one input shape.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ShapeChain {
    pub full_conv1: (usize, usize),
    pub full_conv2: (usize, usize),
    pub full_flatten: usize,
    pub local_conv1: (usize, usize),
    pub local_conv2: (usize, usize),
    pub local_flatten: usize,
}

impl ShapeChain {
    pub fn new(input: InputShape) -> Result<Self> {
        let too_small = |layer: &str| Error::Architecture {
            layer: layer.into(),
            message: format!(
                "input {}x{}/{} too small for the kernel",
                input.rows, input.full_cols, input.local_cols
            ),
        };
        let step = |(h, w): (usize, usize), k, s, layer: &str| -> Result<(usize, usize)> {
            Ok((
                conv_out(h, k, s).ok_or_else(|| too_small(layer))?,
                conv_out(w, k, s).ok_or_else(|| too_small(layer))?,
            ))
        };
        let f1 = step((input.rows, input.full_cols), 5, 3, "full_conv1")?;
        let f2 = step(f1, 3, 2, "full_conv2")?;
        let l1 = step((input.rows, input.local_cols), 3, 1, "local_conv1")?;
        let l2 = step(l1, 3, 2, "local_conv2")?;
        Ok(ShapeChain {
            full_conv1: f1,
            full_conv2: f2,
            full_flatten: 128 * f2.0 * f2.1,
            local_conv1: l1,
            local_conv2: l2,
            local_flatten: 128 * l2.0 * l2.1,
        })
    }
}

/// The expected layer list for `input`.
pub fn layers_for(input: InputShape) -> Result<Vec<LayerSpec>> {
    let chain = ShapeChain::new(input)?;
    Ok(vec![
        LayerSpec::conv("full_conv1", CHANNELS, 64, 5, 3),
        LayerSpec::conv("full_conv2", 64, 128, 3, 2),
        LayerSpec::fc("full_fc", chain.full_flatten, 512),
        LayerSpec::fc("full_proj", 512, 256),
        LayerSpec::conv("local_conv1", CHANNELS, 64, 3, 1),
        LayerSpec::conv("local_conv2", 64, 128, 3, 2),
        LayerSpec::fc("local_proj", chain.local_flatten, 128),
        LayerSpec::fc("head_hidden", 384, 128),
        LayerSpec::fc("head_out", 128, 1),
    ])
}

/// Checks a declared layer list against the wiring for `input`.
pub fn check_layers(input: InputShape, declared: &[LayerSpec]) -> Result<()> {
    let expected = layers_for(input)?;
    if declared.len() != expected.len() {
        return Err(Error::Architecture {
            layer: declared.get(expected.len()).map_or("<end>", |l| l.name.as_str()).into(),
            message: format!("expected {} layers, found {}", expected.len(), declared.len()),
        });
    }
    for (d, e) in declared.iter().zip(&expected) {
        if d.name != e.name {
            return Err(Error::Architecture {
                layer: d.name.clone(),
                message: format!("expected layer `{}` at this position", e.name),
            });
        }
        match (&d.kind, &e.kind) {
            (
                LayerKind::Conv {
                    in_channels: di,
                    out_channels: dout,
                    kernel: dk,
                    stride: ds,
                },
                LayerKind::Conv {
                    in_channels: ei,
                    out_channels: eout,
                    kernel: ek,
                    stride: es,
                },
            ) => {
                let arch = |message: String| Error::Architecture {
                    layer: d.name.clone(),
                    message,
                };
                if ds != es {
                    return Err(arch(format!("stride {ds}, expected {es}")));
                }
                if dk != ek {
                    return Err(arch(format!("kernel {dk:?}, expected {ek:?}")));
                }
                if di != ei || dout != eout {
                    return Err(Error::Shape {
                        layer: d.name.clone(),
                        expected: format!("{ei} -> {eout} channels"),
                        actual: format!("{di} -> {dout} channels"),
                    });
                }
            }
            (
                LayerKind::Fc {
                    in_features: di,
                    out_features: dout,
                },
                LayerKind::Fc {
                    in_features: ei,
                    out_features: eout,
                },
            ) => {
                if di != ei || dout != eout {
                    return Err(Error::Shape {
                        layer: d.name.clone(),
                        expected: format!("{ei} -> {eout} features"),
                        actual: format!("{di} -> {dout} features"),
                    });
                }
            }
            _ => {
                return Err(Error::Architecture {
                    layer: d.name.clone(),
                    message: "wrong layer kind".into(),
                })
            }
        }
    }
    Ok(())
}

pub fn parameter_count(layers: &[LayerSpec]) -> usize {
    layers.iter().map(|l| l.weight_len() + l.bias_len()).sum()
}
