//! The three 3D input representations built from a detection window:
//! STFT spectrogram, pseudo-spectrogram (STT) and raw-time stack (RT).

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{FeatureFrame, CHANNELS, FEATURES, JOINTS};
use crate::windowing::{slide_subwindows, WindowingConfig};

/// Floor applied to per-channel standard deviations during normalization.
pub const STD_FLOOR: f64 = 1e-8;

/// Dense row-major 3D array with named axes.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    dims: [usize; 3],
    data: Vec<f64>,
    axes: [&'static str; 3],
}

impl Tensor3 {
    pub fn zeros(dims: [usize; 3], axes: [&'static str; 3]) -> Self {
        Self {
            dims,
            data: vec![0.0; dims.iter().product()],
            axes,
        }
    }

    pub fn from_vec(dims: [usize; 3], data: Vec<f64>, axes: [&'static str; 3]) -> Result<Self> {
        let n: usize = dims.iter().product();
        if data.len() != n {
            return Err(Error::ShapeMismatch(format!("{} values for dims {dims:?}", data.len())));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::ShapeMismatch("non-finite tensor entry".into()));
        }
        Ok(Self { dims, data, axes })
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn axes(&self) -> [&'static str; 3] {
        self.axes
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn offset(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.dims[1] + j) * self.dims[2] + k
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.offset(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let o = self.offset(i, j, k);
        self.data[o] = v;
    }

    /// The representation this tensor's axis names identify, if any.
    pub fn kind(&self) -> Option<RepresentationKind> {
        RepresentationKind::ALL.into_iter().find(|k| k.axes() == self.axes)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RepresentationKind {
    /// Magnitude spectrogram: (channel, frequency bin, time frame).
    Stft,
    /// Pseudo-spectrogram of raw sub-window values: (channel, position, time frame).
    Stt,
    /// Raw-time stack: (time, joint, feature).
    Rt,
}

impl RepresentationKind {
    pub const ALL: [RepresentationKind; 3] = [
        RepresentationKind::Stft,
        RepresentationKind::Stt,
        RepresentationKind::Rt,
    ];

    pub fn axes(self) -> [&'static str; 3] {
        match self {
            RepresentationKind::Stft => ["channel", "frequency", "frame"],
            RepresentationKind::Stt => ["channel", "position", "frame"],
            RepresentationKind::Rt => ["time", "joint", "feature"],
        }
    }

    /// Tensor dims produced for a windowing configuration.
    pub fn dims(self, cfg: &WindowingConfig) -> [usize; 3] {
        match self {
            RepresentationKind::Stft => [CHANNELS, cfg.sub_len / 2 + 1, cfg.frame_count()],
            RepresentationKind::Stt => [CHANNELS, cfg.sub_len, cfg.frame_count()],
            RepresentationKind::Rt => [cfg.detect_len, JOINTS, FEATURES],
        }
    }
}

impl fmt::Display for RepresentationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RepresentationKind::Stft => "stft",
            RepresentationKind::Stt => "stt",
            RepresentationKind::Rt => "rt",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowFunction {
    #[default]
    Hann,
    Rectangular,
}

impl WindowFunction {
    /// Periodic window coefficients of length `n`.
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            WindowFunction::Rectangular => vec![1.0; n],
            WindowFunction::Hann => (0..n)
                .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpectrumScale {
    #[default]
    Magnitude,
    Power,
    /// `ln(1 + magnitude)`
    LogMagnitude,
}

impl SpectrumScale {
    fn apply(self, magnitude: f64) -> f64 {
        match self {
            SpectrumScale::Magnitude => magnitude,
            SpectrumScale::Power => magnitude * magnitude,
            SpectrumScale::LogMagnitude => magnitude.ln_1p(),
        }
    }
}

/// Representation parameters; embedded in saved models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReprConfig {
    pub window: WindowFunction,
    pub scale: SpectrumScale,
}

impl Default for ReprConfig {
    fn default() -> Self {
        Self {
            window: WindowFunction::Hann,
            scale: SpectrumScale::Magnitude,
        }
    }
}

/// Reusable STFT machinery for a fixed sub-window length.
pub struct StftPlan {
    sub_len: usize,
    taper: Vec<f64>,
    scale: SpectrumScale,
    fft: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for StftPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StftPlan")
            .field("sub_len", &self.sub_len)
            .field("scale", &self.scale)
            .finish()
    }
}

impl StftPlan {
    pub fn new(cfg: &WindowingConfig, repr: &ReprConfig) -> Result<Self> {
        cfg.validate()?;
        if cfg.sub_len % 2 != 0 {
            return Err(Error::ConfigInvalid(format!(
                "STFT needs an even sub_len, got {}",
                cfg.sub_len
            )));
        }
        let fft = FftPlanner::new().plan_fft_forward(cfg.sub_len);
        Ok(Self {
            sub_len: cfg.sub_len,
            taper: repr.window.coefficients(cfg.sub_len),
            scale: repr.scale,
            fft,
        })
    }
}

fn check_block(frames: &[FeatureFrame], cfg: &WindowingConfig) -> Result<()> {
    cfg.validate()?;
    if frames.len() != cfg.detect_len {
        return Err(Error::ConfigInvalid(format!(
            "window has {} frames, detect_len is {}",
            frames.len(),
            cfg.detect_len
        )));
    }
    Ok(())
}

/// Spectrogram tensor `(channel, bin, frame)`: entry `[c, b, k]` is the
/// (scaled) magnitude of one-sided DFT bin `b` of the tapered `k`-th
/// sub-window of channel `c`.
pub fn build_stft(frames: &[FeatureFrame], cfg: &WindowingConfig, plan: &StftPlan) -> Result<Tensor3> {
    check_block(frames, cfg)?;
    if plan.sub_len != cfg.sub_len {
        return Err(Error::ConfigInvalid(format!(
            "STFT plan built for sub_len {}, config has {}",
            plan.sub_len, cfg.sub_len
        )));
    }
    let kind = RepresentationKind::Stft;
    let dims = kind.dims(cfg);
    let mut out = Tensor3::zeros(dims, kind.axes());
    let subs = slide_subwindows(frames, cfg)?;
    let mut buf = vec![Complex::new(0.0, 0.0); cfg.sub_len];
    let mut scratch = vec![Complex::new(0.0, 0.0); plan.fft.get_inplace_scratch_len()];
    for c in 0..CHANNELS {
        for (k, sub) in subs.iter().enumerate() {
            for ((slot, frame), w) in buf.iter_mut().zip(sub.iter()).zip(&plan.taper) {
                *slot = Complex::new(frame.channel(c) * w, 0.0);
            }
            plan.fft.process_with_scratch(&mut buf, &mut scratch);
            for (b, z) in buf.iter().take(dims[1]).enumerate() {
                out.set(c, b, k, plan.scale.apply(z.norm()));
            }
        }
    }
    Ok(out)
}

/// Pseudo-spectrogram `(channel, position, frame)`: entry `[c, p, k]` is the
/// raw sample of channel `c` at window-local index `k·hop + p`.
pub fn build_stt(frames: &[FeatureFrame], cfg: &WindowingConfig) -> Result<Tensor3> {
    check_block(frames, cfg)?;
    let kind = RepresentationKind::Stt;
    let mut out = Tensor3::zeros(kind.dims(cfg), kind.axes());
    for (k, sub) in slide_subwindows(frames, cfg)?.iter().enumerate() {
        for (p, frame) in sub.iter().enumerate() {
            for c in 0..CHANNELS {
                out.set(c, p, k, frame.channel(c));
            }
        }
    }
    Ok(out)
}

/// Raw-time stack `(time, joint, feature)`.
pub fn build_rt(frames: &[FeatureFrame]) -> Tensor3 {
    let kind = RepresentationKind::Rt;
    let data = frames.iter().flat_map(|f| f.channels()).collect::<Vec<_>>();
    Tensor3 {
        dims: [frames.len(), JOINTS, FEATURES],
        data,
        axes: kind.axes(),
    }
}

/// Direct O(N²) one-sided DFT magnitude. Independent of the FFT path.
pub fn dft_magnitude_oracle(samples: &[f64]) -> Result<Vec<f64>> {
    let n = samples.len();
    if n < 2 || n % 2 != 0 {
        return Err(Error::OddLength(n));
    }
    Ok((0..=n / 2)
        .map(|b| {
            let (mut re, mut im) = (0.0, 0.0);
            for (i, &x) in samples.iter().enumerate() {
                // reduce the phase index mod n to keep the angle small
                let phase = -2.0 * PI * ((b * i) % n) as f64 / n as f64;
                re += x * phase.cos();
                im += x * phase.sin();
            }
            re.hypot(im)
        })
        .collect())
}

/// Channel index of a tensor entry (joint-major) for each representation.
fn channel_of(kind: RepresentationKind, dims: [usize; 3], flat: usize) -> usize {
    match kind {
        RepresentationKind::Stft | RepresentationKind::Stt => flat / (dims[1] * dims[2]),
        RepresentationKind::Rt => flat % (dims[1] * dims[2]),
    }
}

/// Per-channel z-score statistics computed on a training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalizer {
    pub fn identity() -> Self {
        Self {
            mean: vec![0.0; CHANNELS],
            std: vec![1.0; CHANNELS],
        }
    }

    pub fn fit<'a, I>(tensors: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a Tensor3>,
    {
        let mut sum = vec![0.0; CHANNELS];
        let mut sq = vec![0.0; CHANNELS];
        let mut count = vec![0usize; CHANNELS];
        for t in tensors {
            let kind = t
                .kind()
                .ok_or_else(|| Error::ShapeMismatch(format!("unknown axes {:?}", t.axes())))?;
            for (flat, &v) in t.data.iter().enumerate() {
                let c = channel_of(kind, t.dims, flat);
                sum[c] += v;
                sq[c] += v * v;
                count[c] += 1;
            }
        }
        if count.iter().all(|&n| n == 0) {
            return Err(Error::EmptyDataset);
        }
        let mut mean = vec![0.0; CHANNELS];
        let mut std = vec![1.0; CHANNELS];
        for c in 0..CHANNELS {
            if count[c] == 0 {
                continue;
            }
            let n = count[c] as f64;
            mean[c] = sum[c] / n;
            let var = (sq[c] / n - mean[c] * mean[c]).max(0.0);
            std[c] = var.sqrt().max(STD_FLOOR);
        }
        Ok(Self { mean, std })
    }

    pub fn apply(&self, t: &mut Tensor3) -> Result<()> {
        let kind = t
            .kind()
            .ok_or_else(|| Error::ShapeMismatch(format!("unknown axes {:?}", t.axes())))?;
        let dims = t.dims;
        for (flat, v) in t.data.iter_mut().enumerate() {
            let c = channel_of(kind, dims, flat);
            *v = (*v - self.mean[c]) / self.std[c];
        }
        Ok(())
    }
}

/// Builds one representation from detection windows, holding any reusable
/// state (the FFT plan).
#[derive(Debug)]
pub struct Featurizer {
    kind: RepresentationKind,
    windowing: WindowingConfig,
    stft: Option<StftPlan>,
}

impl Featurizer {
    pub fn new(kind: RepresentationKind, windowing: WindowingConfig, repr: ReprConfig) -> Result<Self> {
        windowing.validate()?;
        let stft = match kind {
            RepresentationKind::Stft => Some(StftPlan::new(&windowing, &repr)?),
            _ => None,
        };
        Ok(Self { kind, windowing, stft })
    }

    pub fn kind(&self) -> RepresentationKind {
        self.kind
    }

    pub fn windowing(&self) -> &WindowingConfig {
        &self.windowing
    }

    pub fn dims(&self) -> [usize; 3] {
        self.kind.dims(&self.windowing)
    }

    pub fn build(&self, frames: &[FeatureFrame]) -> Result<Tensor3> {
        match self.kind {
            RepresentationKind::Stft => {
                let plan = self.stft.as_ref().expect("STFT featurizer always has a plan");
                build_stft(frames, &self.windowing, plan)
            }
            RepresentationKind::Stt => build_stt(frames, &self.windowing),
            RepresentationKind::Rt => {
                check_block(frames, &self.windowing)?;
                Ok(build_rt(frames))
            }
        }
    }
}
