//! Valid (unpadded, stride 1) multi-channel 3D convolution.
//!
//! Layouts are row-major: volumes are `[channel][d0][d1][d2]`, kernels are
//! `[out][in][k0][k1][k2]`. Both passes go through an im2col patch matrix so
//! the inner loops are long contiguous dot products.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ConvGeometry {
    pub in_channels: usize,
    pub out_channels: usize,
    pub in_dims: [usize; 3],
    pub kernel: [usize; 3],
}

impl ConvGeometry {
    pub fn new(in_channels: usize, out_channels: usize, in_dims: [usize; 3], kernel: [usize; 3]) -> Result<Self> {
        if in_channels == 0 || out_channels == 0 {
            return Err(Error::ShapeMismatch("convolution needs at least one channel".into()));
        }
        for axis in 0..3 {
            if kernel[axis] == 0 || kernel[axis] > in_dims[axis] {
                return Err(Error::ShapeMismatch(format!(
                    "kernel {kernel:?} does not fit input extents {in_dims:?} (axis {axis})"
                )));
            }
        }
        Ok(Self {
            in_channels,
            out_channels,
            in_dims,
            kernel,
        })
    }

    pub fn out_dims(&self) -> [usize; 3] {
        [0, 1, 2].map(|a| self.in_dims[a] - self.kernel[a] + 1)
    }

    pub fn input_len(&self) -> usize {
        self.in_channels * self.in_dims.iter().product::<usize>()
    }

    pub fn output_len(&self) -> usize {
        self.out_channels * self.positions()
    }

    pub fn positions(&self) -> usize {
        self.out_dims().iter().product()
    }

    /// Weights per output channel.
    pub fn patch_len(&self) -> usize {
        self.in_channels * self.kernel.iter().product::<usize>()
    }

    pub fn weight_len(&self) -> usize {
        self.out_channels * self.patch_len()
    }

    /// Fills `patches` (`positions × patch_len`) from `input`.
    fn im2col(&self, input: &[f64], patches: &mut Vec<f64>) {
        let [d0, d1, d2] = self.in_dims;
        let [k0, k1, k2] = self.kernel;
        let [o0, o1, o2] = self.out_dims();
        patches.clear();
        patches.reserve(self.positions() * self.patch_len());
        for x in 0..o0 {
            for y in 0..o1 {
                for z in 0..o2 {
                    for c in 0..self.in_channels {
                        let base = c * d0 * d1 * d2;
                        for a in 0..k0 {
                            for b in 0..k1 {
                                let row = base + ((x + a) * d1 + (y + b)) * d2 + z;
                                patches.extend_from_slice(&input[row..row + k2]);
                            }
                        }
                    }
                }
            }
        }
    }

    /// Scatters patch-matrix gradients back onto an input-shaped buffer.
    fn col2im(&self, patches: &[f64], grad_input: &mut [f64]) {
        let [d0, d1, d2] = self.in_dims;
        let [k0, k1, k2] = self.kernel;
        let [o0, o1, o2] = self.out_dims();
        let mut it = patches.chunks_exact(k2);
        for x in 0..o0 {
            for y in 0..o1 {
                for z in 0..o2 {
                    for c in 0..self.in_channels {
                        let base = c * d0 * d1 * d2;
                        for a in 0..k0 {
                            for b in 0..k1 {
                                let row = base + ((x + a) * d1 + (y + b)) * d2 + z;
                                let src = it.next().expect("patch matrix sized by geometry");
                                for (g, s) in grad_input[row..row + k2].iter_mut().zip(src) {
                                    *g += s;
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    fn check(&self, what: &str, len: usize, expected: usize) -> Result<()> {
        if len != expected {
            return Err(Error::ShapeMismatch(format!(
                "{what}: {len} values, geometry needs {expected}"
            )));
        }
        Ok(())
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    // four accumulators; fixed order keeps results bit-reproducible
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        let j = 4 * i;
        acc[0] += a[j] * b[j];
        acc[1] += a[j + 1] * b[j + 1];
        acc[2] += a[j + 2] * b[j + 2];
        acc[3] += a[j + 3] * b[j + 3];
    }
    let mut tail = 0.0;
    for j in 4 * chunks..a.len() {
        tail += a[j] * b[j];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Scratch space reused across calls.
#[derive(Debug, Default, Clone)]
pub struct ConvScratch {
    patches: Vec<f64>,
    patch_grad: Vec<f64>,
}

/// `out[o, p] = bias[o] + Σ weights[o, ·] · patch[p, ·]`; no activation.
pub fn conv3d_forward(
    geom: &ConvGeometry,
    input: &[f64],
    weights: &[f64],
    bias: &[f64],
    scratch: &mut ConvScratch,
    out: &mut Vec<f64>,
) -> Result<()> {
    geom.check("input", input.len(), geom.input_len())?;
    geom.check("weights", weights.len(), geom.weight_len())?;
    geom.check("bias", bias.len(), geom.out_channels)?;
    geom.im2col(input, &mut scratch.patches);
    let positions = geom.positions();
    let k = geom.patch_len();
    out.clear();
    out.resize(geom.output_len(), 0.0);
    for (o, (w, dst)) in weights.chunks_exact(k).zip(out.chunks_exact_mut(positions)).enumerate() {
        for (p, patch) in scratch.patches.chunks_exact(k).enumerate() {
            dst[p] = bias[o] + dot(w, patch);
        }
    }
    Ok(())
}

/// Gradients of [`conv3d_forward`] given the upstream gradient of its output.
/// Weight and bias gradients are accumulated into `grad_weights` /
/// `grad_bias`; the input gradient (if requested) is overwritten.
#[allow(clippy::too_many_arguments)]
pub fn conv3d_backward(
    geom: &ConvGeometry,
    upstream: &[f64],
    input: &[f64],
    weights: &[f64],
    grad_input: Option<&mut Vec<f64>>,
    grad_weights: &mut [f64],
    grad_bias: &mut [f64],
    scratch: &mut ConvScratch,
) -> Result<()> {
    geom.check("upstream", upstream.len(), geom.output_len())?;
    geom.check("input", input.len(), geom.input_len())?;
    geom.check("weights", weights.len(), geom.weight_len())?;
    geom.check("weight grad", grad_weights.len(), geom.weight_len())?;
    geom.check("bias grad", grad_bias.len(), geom.out_channels)?;
    geom.im2col(input, &mut scratch.patches);
    let positions = geom.positions();
    let k = geom.patch_len();

    for (o, up) in upstream.chunks_exact(positions).enumerate() {
        grad_bias[o] += up.iter().sum::<f64>();
        let gw = &mut grad_weights[o * k..(o + 1) * k];
        for (p, patch) in scratch.patches.chunks_exact(k).enumerate() {
            if up[p] != 0.0 {
                axpy(up[p], patch, gw);
            }
        }
    }

    if let Some(grad_input) = grad_input {
        scratch.patch_grad.clear();
        scratch.patch_grad.resize(positions * k, 0.0);
        for (o, up) in upstream.chunks_exact(positions).enumerate() {
            let w = &weights[o * k..(o + 1) * k];
            for (p, pg) in scratch.patch_grad.chunks_exact_mut(k).enumerate() {
                if up[p] != 0.0 {
                    axpy(up[p], w, pg);
                }
            }
        }
        grad_input.clear();
        grad_input.resize(geom.input_len(), 0.0);
        geom.col2im(&scratch.patch_grad, grad_input);
    }
    Ok(())
}
