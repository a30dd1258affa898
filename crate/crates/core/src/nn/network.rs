//! Compiled layer stack over a flat parameter vector, with forward and
//! backward passes.

use serde::{Deserialize, Serialize};

use super::conv::{conv3d_backward, conv3d_forward, ConvGeometry, ConvScratch};
use super::spec::{LayerSpec, ModelSpec, Shape};
use crate::error::{Error, Result};
use crate::repr::{Featurizer, Normalizer, ReprConfig, RepresentationKind, Tensor3};
use crate::signal::{FeatureFrame, GestureClass};
use crate::windowing::WindowingConfig;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Layer {
    Conv {
        geom: ConvGeometry,
        w_off: usize,
        b_off: usize,
    },
    Pool {
        channels: usize,
        in_dims: [usize; 3],
        kernel: [usize; 3],
    },
    Flatten,
    Dense {
        inputs: usize,
        outputs: usize,
        w_off: usize,
        b_off: usize,
    },
}

impl Layer {
    fn pool_out_dims(in_dims: [usize; 3], kernel: [usize; 3]) -> [usize; 3] {
        [0, 1, 2].map(|a| in_dims[a] / kernel[a])
    }
}

/// A spec compiled against concrete input dims: layer geometry plus the
/// offsets of each layer's parameters in the flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub(crate) layers: Vec<Layer>,
    input_dims: [usize; 3],
    param_count: usize,
}

impl Network {
    pub fn compile(spec: &ModelSpec, input_dims: [usize; 3]) -> Result<Self> {
        spec.infer_shapes(input_dims)?;
        let mut layers = Vec::with_capacity(spec.layers.len());
        let mut cur = Shape::Volume {
            channels: 1,
            dims: input_dims,
        };
        let mut offset = 0;
        for layer in &spec.layers {
            let (compiled, next) = match (*layer, cur) {
                (LayerSpec::Conv3d { kernel, filters }, Shape::Volume { channels, dims }) => {
                    let geom = ConvGeometry::new(channels, filters, dims, kernel)?;
                    let w_off = offset;
                    let b_off = w_off + geom.weight_len();
                    offset = b_off + filters;
                    (
                        Layer::Conv { geom, w_off, b_off },
                        Shape::Volume {
                            channels: filters,
                            dims: geom.out_dims(),
                        },
                    )
                }
                (LayerSpec::Pool3d { kernel }, Shape::Volume { channels, dims }) => (
                    Layer::Pool {
                        channels,
                        in_dims: dims,
                        kernel,
                    },
                    Shape::Volume {
                        channels,
                        dims: Layer::pool_out_dims(dims, kernel),
                    },
                ),
                (LayerSpec::Flatten, Shape::Volume { channels, dims }) => {
                    (Layer::Flatten, Shape::Flat(channels * dims.iter().product::<usize>()))
                }
                (LayerSpec::FullyConnected { outputs }, Shape::Flat(inputs)) => {
                    let w_off = offset;
                    let b_off = w_off + inputs * outputs;
                    offset = b_off + outputs;
                    (
                        Layer::Dense {
                            inputs,
                            outputs,
                            w_off,
                            b_off,
                        },
                        Shape::Flat(outputs),
                    )
                }
                _ => unreachable!("shape inference already validated the layer sequence"),
            };
            layers.push(compiled);
            cur = next;
        }
        Ok(Self {
            layers,
            input_dims,
            param_count: offset,
        })
    }

    pub fn input_dims(&self) -> [usize; 3] {
        self.input_dims
    }

    pub fn param_count(&self) -> usize {
        self.param_count
    }

    /// He-style uniform initialization (limit `sqrt(6 / fan_in)`), zero biases.
    pub fn init_params(&self, rng: &mut impl rand::Rng) -> Vec<f64> {
        let mut params = vec![0.0; self.param_count];
        for layer in &self.layers {
            let (w_off, n, fan_in) = match layer {
                Layer::Conv { geom, w_off, .. } => (*w_off, geom.weight_len(), geom.patch_len()),
                Layer::Dense {
                    inputs, outputs, w_off, ..
                } => (*w_off, inputs * outputs, *inputs),
                _ => continue,
            };
            let limit = (6.0 / fan_in as f64).sqrt();
            for w in &mut params[w_off..w_off + n] {
                *w = rng.random_range(-limit..limit);
            }
        }
        params
    }

    /// Offsets and lengths of each parameterized layer's weights and biases,
    /// in layer order.
    pub fn param_groups(&self) -> Vec<ParamGroup> {
        let mut out = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            match layer {
                Layer::Conv { geom, w_off, b_off } => {
                    out.push(ParamGroup {
                        layer: i,
                        name: "conv.weight",
                        offset: *w_off,
                        len: geom.weight_len(),
                    });
                    out.push(ParamGroup {
                        layer: i,
                        name: "conv.bias",
                        offset: *b_off,
                        len: geom.out_channels,
                    });
                }
                Layer::Dense {
                    inputs,
                    outputs,
                    w_off,
                    b_off,
                } => {
                    out.push(ParamGroup {
                        layer: i,
                        name: "fc.weight",
                        offset: *w_off,
                        len: inputs * outputs,
                    });
                    out.push(ParamGroup {
                        layer: i,
                        name: "fc.bias",
                        offset: *b_off,
                        len: *outputs,
                    });
                }
                _ => {}
            }
        }
        out
    }

    /// Runs the network, keeping every layer's output in `trace`. Returns the
    /// logits (the last trace entry).
    pub fn forward<'t>(&self, params: &[f64], input: &[f64], trace: &'t mut Trace) -> Result<&'t [f64]> {
        if params.len() != self.param_count {
            return Err(Error::ShapeMismatch(format!(
                "{} parameters, network needs {}",
                params.len(),
                self.param_count
            )));
        }
        let expected: usize = self.input_dims.iter().product();
        if input.len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "input has {} values, network expects {expected}",
                input.len()
            )));
        }
        trace.acts.resize_with(self.layers.len() + 1, Vec::new);
        trace.acts[0].clear();
        trace.acts[0].extend_from_slice(input);
        self.forward_from(params, 0, trace)
    }

    /// Recomputes layers `from..` on top of the activations already in
    /// `trace`, which must come from a full forward pass of the same input.
    pub(crate) fn forward_from<'t>(&self, params: &[f64], from: usize, trace: &'t mut Trace) -> Result<&'t [f64]> {
        for (i, layer) in self.layers.iter().enumerate().skip(from) {
            let (before, after) = trace.acts.split_at_mut(i + 1);
            let x = &before[i];
            let y = &mut after[0];
            match layer {
                Layer::Conv { geom, w_off, b_off } => {
                    let w = &params[*w_off..*w_off + geom.weight_len()];
                    let b = &params[*b_off..*b_off + geom.out_channels];
                    conv3d_forward(geom, x, w, b, &mut trace.scratch, y)?;
                    for v in y.iter_mut() {
                        *v = v.max(0.0);
                    }
                }
                Layer::Pool {
                    channels,
                    in_dims,
                    kernel,
                } => {
                    max_pool(*channels, *in_dims, *kernel, x, y);
                }
                Layer::Flatten => {
                    y.clear();
                    y.extend_from_slice(x);
                }
                Layer::Dense {
                    inputs,
                    outputs,
                    w_off,
                    b_off,
                } => {
                    y.clear();
                    for o in 0..*outputs {
                        let row = &params[w_off + o * inputs..w_off + (o + 1) * inputs];
                        let s: f64 = row.iter().zip(x.iter()).map(|(w, v)| w * v).sum();
                        y.push(params[b_off + o] + s);
                    }
                }
            }
        }
        Ok(trace.acts.last().map(Vec::as_slice).unwrap_or(&[]))
    }

    /// Backpropagates `grad_logits` through a trace produced by
    /// [`Network::forward`], accumulating parameter gradients into `grads`.
    pub fn backward(&self, params: &[f64], trace: &mut Trace, grad_logits: &[f64], grads: &mut [f64]) -> Result<()> {
        if grads.len() != self.param_count {
            return Err(Error::ShapeMismatch("gradient buffer size".into()));
        }
        let mut upstream = grad_logits.to_vec();
        let mut next = Vec::new();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let x = &trace.acts[i];
            let y = &trace.acts[i + 1];
            match layer {
                Layer::Dense {
                    inputs,
                    outputs,
                    w_off,
                    b_off,
                } => {
                    next.clear();
                    next.resize(*inputs, 0.0);
                    for o in 0..*outputs {
                        let g = upstream[o];
                        grads[b_off + o] += g;
                        if g == 0.0 {
                            continue;
                        }
                        let w_row = w_off + o * inputs;
                        for (j, xv) in x.iter().enumerate() {
                            grads[w_row + j] += g * xv;
                            next[j] += g * params[w_row + j];
                        }
                    }
                }
                Layer::Flatten => {
                    next.clear();
                    next.extend_from_slice(&upstream);
                }
                Layer::Pool {
                    channels,
                    in_dims,
                    kernel,
                } => {
                    max_pool_backward(*channels, *in_dims, *kernel, x, &upstream, &mut next);
                }
                Layer::Conv { geom, w_off, b_off } => {
                    // ReLU: y = max(pre, 0)
                    for (u, &yv) in upstream.iter_mut().zip(y.iter()) {
                        if yv <= 0.0 {
                            *u = 0.0;
                        }
                    }
                    let w = &params[*w_off..*w_off + geom.weight_len()];
                    let (gw, rest) = grads[*w_off..].split_at_mut(geom.weight_len());
                    debug_assert_eq!(*b_off, *w_off + geom.weight_len());
                    let gb = &mut rest[..geom.out_channels];
                    let want_input = i > 0;
                    conv3d_backward(
                        geom,
                        &upstream,
                        x,
                        w,
                        want_input.then_some(&mut next),
                        gw,
                        gb,
                        &mut trace.scratch,
                    )?;
                    if !want_input {
                        return Ok(());
                    }
                }
            }
            std::mem::swap(&mut upstream, &mut next);
        }
        Ok(())
    }

    /// The activation pattern (ReLU on/off per conv output and pooling argmax)
    /// of the last forward pass; equal patterns mean the same linear piece.
    pub(crate) fn activation_pattern(&self, trace: &Trace) -> Vec<u32> {
        let mut pat = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            match layer {
                Layer::Conv { .. } => pat.extend(trace.acts[i + 1].iter().map(|&v| u32::from(v > 0.0))),
                Layer::Pool {
                    channels,
                    in_dims,
                    kernel,
                } => pat.extend(pool_argmax(*channels, *in_dims, *kernel, &trace.acts[i]).map(|a| a as u32)),
                _ => {}
            }
        }
        pat
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamGroup {
    pub layer: usize,
    pub name: &'static str,
    pub offset: usize,
    pub len: usize,
}

/// Per-layer activations from a forward pass plus reusable scratch.
#[derive(Debug, Default, Clone)]
pub struct Trace {
    acts: Vec<Vec<f64>>,
    scratch: ConvScratch,
}

impl Trace {
    pub fn logits(&self) -> &[f64] {
        self.acts.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Flat indices (into the input volume) of each pooled maximum.
fn pool_argmax<'a>(
    channels: usize,
    in_dims: [usize; 3],
    kernel: [usize; 3],
    x: &'a [f64],
) -> impl Iterator<Item = usize> + 'a {
    let [d0, d1, d2] = in_dims;
    let [o0, o1, o2] = Layer::pool_out_dims(in_dims, kernel);
    let [k0, k1, k2] = kernel;
    (0..channels).flat_map(move |c| {
        (0..o0).flat_map(move |a| {
            (0..o1).flat_map(move |b| {
                (0..o2).map(move |e| {
                    let mut best = usize::MAX;
                    for i in 0..k0 {
                        for j in 0..k1 {
                            for k in 0..k2 {
                                let idx = ((c * d0 + a * k0 + i) * d1 + b * k1 + j) * d2 + e * k2 + k;
                                if best == usize::MAX || x[idx] > x[best] {
                                    best = idx;
                                }
                            }
                        }
                    }
                    best
                })
            })
        })
    })
}

fn max_pool(channels: usize, in_dims: [usize; 3], kernel: [usize; 3], x: &[f64], y: &mut Vec<f64>) {
    y.clear();
    if kernel == [1, 1, 1] {
        y.extend_from_slice(x);
        return;
    }
    y.extend(pool_argmax(channels, in_dims, kernel, x).map(|i| x[i]));
}

fn max_pool_backward(
    channels: usize,
    in_dims: [usize; 3],
    kernel: [usize; 3],
    x: &[f64],
    upstream: &[f64],
    out: &mut Vec<f64>,
) {
    out.clear();
    if kernel == [1, 1, 1] {
        out.extend_from_slice(upstream);
        return;
    }
    out.resize(x.len(), 0.0);
    for (g, idx) in upstream.iter().zip(pool_argmax(channels, in_dims, kernel, x)) {
        out[idx] += g;
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Cross-entropy of softmax(logits) against `label`, and its gradient with
/// respect to the logits.
pub fn cross_entropy(logits: &[f64], label: usize) -> (f64, Vec<f64>) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    let loss = lse - logits[label];
    let mut grad = softmax(logits);
    grad[label] -= 1.0;
    (loss, grad)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub seed: u64,
    pub epochs: usize,
    pub final_loss: Option<f64>,
}

/// A trained (or freshly initialized) classifier together with everything
/// needed to featurize raw windows the same way it was trained.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub spec: ModelSpec,
    pub windowing: WindowingConfig,
    pub repr: ReprConfig,
    pub normalizer: Normalizer,
    pub params: Vec<f64>,
    pub meta: TrainingMeta,
    net: Network,
}

impl Model {
    /// A freshly initialized model for `spec` on the representation implied
    /// by `windowing`.
    pub fn init(spec: ModelSpec, windowing: WindowingConfig, repr: ReprConfig, seed: u64) -> Result<Self> {
        use rand::SeedableRng;
        windowing.validate()?;
        let dims = spec.representation.dims(&windowing);
        spec.audit(spec.representation, dims)?;
        let net = Network::compile(&spec, dims)?;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let params = net.init_params(&mut rng);
        Ok(Self {
            spec,
            windowing,
            repr,
            normalizer: Normalizer::identity(),
            params,
            meta: TrainingMeta {
                seed,
                epochs: 0,
                final_loss: None,
            },
            net,
        })
    }

    pub(crate) fn from_parts(
        spec: ModelSpec,
        windowing: WindowingConfig,
        repr: ReprConfig,
        normalizer: Normalizer,
        params: Vec<f64>,
        meta: TrainingMeta,
    ) -> Result<Self> {
        let dims = spec.representation.dims(&windowing);
        let net = Network::compile(&spec, dims)?;
        if params.len() != net.param_count() {
            return Err(Error::MalformedModel(format!(
                "{} parameters stored, {} needs {}",
                params.len(),
                spec.name,
                net.param_count()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::MalformedModel("non-finite parameter".into()));
        }
        Ok(Self {
            spec,
            windowing,
            repr,
            normalizer,
            params,
            meta,
            net,
        })
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn input_dims(&self) -> [usize; 3] {
        self.net.input_dims()
    }

    pub fn representation(&self) -> RepresentationKind {
        self.spec.representation
    }

    pub fn featurizer(&self) -> Result<Featurizer> {
        Featurizer::new(self.spec.representation, self.windowing, self.repr)
    }

    pub(crate) fn check_input(&self, input: &Tensor3) -> Result<()> {
        let kind = input.kind().ok_or_else(|| Error::RepresentationMismatch {
            expected: self.spec.representation.to_string(),
            found: format!("{:?}", input.axes()),
        })?;
        self.spec.check_representation(kind)?;
        if input.dims() != self.input_dims() {
            return Err(Error::ShapeMismatch(format!(
                "input dims {:?}, model expects {:?}",
                input.dims(),
                self.input_dims()
            )));
        }
        Ok(())
    }

    /// Class probabilities for an already normalized input tensor.
    pub fn forward(&self, input: &Tensor3) -> Result<[f64; GestureClass::COUNT]> {
        let mut trace = Trace::default();
        self.forward_with(input, &mut trace)
    }

    pub fn forward_with(&self, input: &Tensor3, trace: &mut Trace) -> Result<[f64; GestureClass::COUNT]> {
        self.check_input(input)?;
        let logits = self.net.forward(&self.params, input.data(), trace)?;
        let p = softmax(logits);
        let mut out = [0.0; GestureClass::COUNT];
        out.copy_from_slice(&p);
        Ok(out)
    }

    /// Featurizes, normalizes and classifies one detection window.
    pub fn classify_window(
        &self,
        featurizer: &Featurizer,
        frames: &[FeatureFrame],
        trace: &mut Trace,
    ) -> Result<(GestureClass, [f64; GestureClass::COUNT])> {
        if featurizer.kind() != self.spec.representation {
            return Err(Error::RepresentationMismatch {
                expected: self.spec.representation.to_string(),
                found: featurizer.kind().to_string(),
            });
        }
        let mut t = featurizer.build(frames)?;
        self.normalizer.apply(&mut t)?;
        let probs = self.forward_with(&t, trace)?;
        Ok((argmax_class(&probs), probs))
    }
}

/// Highest-probability class; ties go to the lowest index.
pub fn argmax_class(probs: &[f64]) -> GestureClass {
    let mut best = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > probs[best] {
            best = i;
        }
    }
    GestureClass::from_index(best).unwrap_or_default()
}
