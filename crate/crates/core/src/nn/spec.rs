//! Architecture descriptions and the registry of named models.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::repr::RepresentationKind;
use crate::signal::GestureClass;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    /// Valid convolution (padding 0, stride 1) followed by ReLU.
    Conv3d {
        kernel: [usize; 3],
        filters: usize,
    },
    /// Non-overlapping max pooling (stride = kernel).
    Pool3d {
        kernel: [usize; 3],
    },
    Flatten,
    FullyConnected {
        outputs: usize,
    },
}

impl fmt::Display for LayerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LayerSpec::Conv3d {
                kernel: [a, b, c],
                filters,
            } => {
                write!(f, "Conv3D({a}x{b}x{c}, {filters} filters)")
            }
            LayerSpec::Pool3d { kernel: [a, b, c] } => write!(f, "Pool3D({a}x{b}x{c})"),
            LayerSpec::Flatten => f.write_str("Flatten"),
            LayerSpec::FullyConnected { outputs } => write!(f, "FC({outputs})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModelSpec {
    pub name: String,
    pub representation: RepresentationKind,
    pub layers: Vec<LayerSpec>,
    pub class_count: usize,
}

/// Filters in the first of two stacked convolutions.
pub const FIRST_CONV_FILTERS: usize = 4;
/// Filters in the last convolution before the classifier.
pub const LAST_CONV_FILTERS: usize = 8;

/// Names accepted by [`ModelSpec::named`]; the first six are the main
/// architectures, the last two the kernel-depth variants.
pub const MODEL_NAMES: [&str; 8] = [
    "stft2dcnn",
    "stft3dcnn",
    "stt2dcnn",
    "stt3dcnn",
    "rt2dcnn",
    "rt3dcnn",
    "stft3dcnn_4_7",
    "stt3dcnn_7_1",
];

fn two_conv(first: [usize; 3], second: [usize; 3]) -> Vec<LayerSpec> {
    vec![
        LayerSpec::Conv3d {
            kernel: first,
            filters: FIRST_CONV_FILTERS,
        },
        LayerSpec::Conv3d {
            kernel: second,
            filters: LAST_CONV_FILTERS,
        },
        LayerSpec::Pool3d { kernel: [1, 1, 1] },
        LayerSpec::Flatten,
        LayerSpec::FullyConnected {
            outputs: GestureClass::COUNT,
        },
    ]
}

impl ModelSpec {
    pub fn named(name: &str) -> Result<Self> {
        use RepresentationKind::*;
        let (representation, layers) = match name {
            "stft2dcnn" => (Stft, two_conv([28, 3, 3], [1, 3, 3])),
            "stft3dcnn" => (Stft, two_conv([7, 3, 3], [1, 3, 3])),
            "stft3dcnn_4_7" => (Stft, two_conv([4, 3, 3], [7, 3, 3])),
            "stt2dcnn" => (Stt, two_conv([28, 3, 3], [1, 3, 3])),
            "stt3dcnn" => (Stt, two_conv([4, 3, 3], [7, 3, 3])),
            "stt3dcnn_7_1" => (Stt, two_conv([7, 3, 3], [1, 3, 3])),
            "rt2dcnn" => (
                Rt,
                vec![
                    LayerSpec::Conv3d {
                        kernel: [28, 3, 3],
                        filters: LAST_CONV_FILTERS,
                    },
                    LayerSpec::Pool3d { kernel: [1, 1, 1] },
                    LayerSpec::Flatten,
                    LayerSpec::FullyConnected {
                        outputs: GestureClass::COUNT,
                    },
                ],
            ),
            // The feature axis of the raw stack has extent 4, so a second
            // 3-wide kernel cannot fit after the first (4 -> 2); the second
            // layer's feature extent is the full remaining 2.
            "rt3dcnn" => (Rt, two_conv([5, 3, 3], [5, 3, 2])),
            other => return Err(Error::SpecUnknown(other.to_string())),
        };
        Ok(Self {
            name: name.to_string(),
            representation,
            layers,
            class_count: GestureClass::COUNT,
        })
    }

    pub fn all() -> Vec<Self> {
        MODEL_NAMES
            .iter()
            .map(|n| Self::named(n).expect("registry names resolve"))
            .collect()
    }

    /// Checks that the spec's representation matches the input kind.
    pub fn check_representation(&self, kind: RepresentationKind) -> Result<()> {
        if kind != self.representation {
            return Err(Error::RepresentationMismatch {
                expected: self.representation.to_string(),
                found: kind.to_string(),
            });
        }
        Ok(())
    }

    /// Per-layer output shapes for an input of the given dims. Fails with
    /// `ShapeMismatch` when any kernel exceeds the incoming extents.
    pub fn infer_shapes(&self, input_dims: [usize; 3]) -> Result<Vec<LayerShape>> {
        let mut shapes = Vec::with_capacity(self.layers.len());
        let mut cur = Shape::Volume {
            channels: 1,
            dims: input_dims,
        };
        if input_dims.contains(&0) {
            return Err(Error::ShapeMismatch(format!("empty input dims {input_dims:?}")));
        }
        for (i, layer) in self.layers.iter().enumerate() {
            let err = |msg: String| Error::ShapeMismatch(format!("{} layer {i} ({layer}): {msg}", self.name));
            cur = match (*layer, cur) {
                (LayerSpec::Conv3d { kernel, filters }, Shape::Volume { dims, .. }) => {
                    if filters == 0 {
                        return Err(err("zero filters".into()));
                    }
                    for a in 0..3 {
                        if kernel[a] == 0 || kernel[a] > dims[a] {
                            return Err(err(format!("kernel {kernel:?} exceeds extents {dims:?}")));
                        }
                    }
                    Shape::Volume {
                        channels: filters,
                        dims: [0, 1, 2].map(|a| dims[a] - kernel[a] + 1),
                    }
                }
                (LayerSpec::Pool3d { kernel }, Shape::Volume { channels, dims }) => {
                    for a in 0..3 {
                        if kernel[a] == 0 || kernel[a] > dims[a] {
                            return Err(err(format!("pool {kernel:?} exceeds extents {dims:?}")));
                        }
                    }
                    Shape::Volume {
                        channels,
                        dims: [0, 1, 2].map(|a| dims[a] / kernel[a]),
                    }
                }
                (LayerSpec::Flatten, Shape::Volume { channels, dims }) => {
                    Shape::Flat(channels * dims.iter().product::<usize>())
                }
                (LayerSpec::FullyConnected { outputs }, Shape::Flat(_)) => {
                    if outputs == 0 {
                        return Err(err("zero outputs".into()));
                    }
                    Shape::Flat(outputs)
                }
                (_, Shape::Flat(_)) => return Err(err("expects a volume, got a flat vector".into())),
                (LayerSpec::FullyConnected { .. }, Shape::Volume { .. }) => {
                    return Err(err("expects a flat vector; add Flatten".into()))
                }
            };
            shapes.push(LayerShape {
                layer: *layer,
                output: cur,
            });
        }
        match cur {
            Shape::Flat(n) if n == self.class_count => Ok(shapes),
            other => Err(Error::ShapeMismatch(format!(
                "{}: final output {other} is not a {}-class vector",
                self.name, self.class_count
            ))),
        }
    }

    /// Builds against a representation: both the kind and the dims must fit.
    pub fn audit(&self, kind: RepresentationKind, dims: [usize; 3]) -> Result<Vec<LayerShape>> {
        self.check_representation(kind)?;
        self.infer_shapes(dims)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Shape {
    Volume { channels: usize, dims: [usize; 3] },
    Flat(usize),
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Shape::Volume {
                channels,
                dims: [a, b, c],
            } => write!(f, "{channels}x({a},{b},{c})"),
            Shape::Flat(n) => write!(f, "[{n}]"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerShape {
    pub layer: LayerSpec,
    pub output: Shape,
}
