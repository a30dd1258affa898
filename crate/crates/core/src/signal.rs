//! Sensor-signal data model: per-timestamp joint features, gesture labels and
//! validated series.
//!
//! Channel ordering is joint-major everywhere in the crate: channel
//! `c = 4 * joint + feature` with zero-based `joint` in `0..7` and `feature`
//! in `0..4` (`e`, `ė`, `τ`, `τ_ext`).

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const JOINTS: usize = 7;
pub const FEATURES: usize = 4;
/// Number of scalar channels per timestamp (joints × features).
pub const CHANNELS: usize = JOINTS * FEATURES;
pub const NOMINAL_RATE_HZ: f64 = 200.0;
/// Largest accepted sample spacing as a multiple of the nominal period.
pub const MAX_GAP_FACTOR: f64 = 1.5;

/// Per-joint feature columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Feature {
    /// Joint position error [rad].
    PositionError = 0,
    /// Joint velocity error [rad/s].
    VelocityError = 1,
    /// Measured joint torque [N·m].
    Torque = 2,
    /// Estimated external torque [N·m].
    ExternalTorque = 3,
}

impl Feature {
    pub const ALL: [Feature; FEATURES] = [
        Feature::PositionError,
        Feature::VelocityError,
        Feature::Torque,
        Feature::ExternalTorque,
    ];

    pub fn short_name(self) -> &'static str {
        match self {
            Feature::PositionError => "e",
            Feature::VelocityError => "de",
            Feature::Torque => "tau",
            Feature::ExternalTorque => "tauext",
        }
    }
}

/// Flattened channel index for zero-based `joint` and a feature.
#[inline]
pub fn channel_index(joint: usize, feature: Feature) -> usize {
    joint * FEATURES + feature as usize
}

/// One timestamp's 7×4 matrix of joint features.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FeatureFrame {
    pub values: [[f64; FEATURES]; JOINTS],
}

impl FeatureFrame {
    pub fn zeros() -> Self {
        Self::default()
    }

    /// Builds a frame from a joint-major channel slice of length 28.
    pub fn from_channels(channels: &[f64]) -> Result<Self> {
        if channels.len() != CHANNELS {
            return Err(Error::LengthMismatch {
                expected: CHANNELS,
                found: channels.len(),
            });
        }
        let mut values = [[0.0; FEATURES]; JOINTS];
        for (j, row) in values.iter_mut().enumerate() {
            row.copy_from_slice(&channels[j * FEATURES..(j + 1) * FEATURES]);
        }
        Ok(Self { values })
    }

    #[inline]
    pub fn channel(&self, c: usize) -> f64 {
        self.values[c / FEATURES][c % FEATURES]
    }

    #[inline]
    pub fn channel_mut(&mut self, c: usize) -> &mut f64 {
        &mut self.values[c / FEATURES][c % FEATURES]
    }

    pub fn get(&self, joint: usize, feature: Feature) -> f64 {
        self.values[joint][feature as usize]
    }

    pub fn channels(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().flat_map(|row| row.iter().copied())
    }
}

/// Gesture taxonomy. `NoContact` is the negative class, so "contact detected"
/// is equivalent to "class != NoContact".
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[repr(u8)]
pub enum GestureClass {
    #[default]
    NoContact = 0,
    SingleTap = 1,
    Push = 2,
    Grab = 3,
}

impl GestureClass {
    pub const COUNT: usize = 4;
    pub const ALL: [GestureClass; 4] = [
        GestureClass::NoContact,
        GestureClass::SingleTap,
        GestureClass::Push,
        GestureClass::Grab,
    ];
    pub const GESTURES: [GestureClass; 3] = [GestureClass::SingleTap, GestureClass::Push, GestureClass::Grab];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn is_contact(self) -> bool {
        self != GestureClass::NoContact
    }

    pub fn short_name(self) -> &'static str {
        match self {
            GestureClass::NoContact => "N",
            GestureClass::SingleTap => "ST",
            GestureClass::Push => "P",
            GestureClass::Grab => "G",
        }
    }
}

impl TryFrom<i64> for GestureClass {
    type Error = Error;

    fn try_from(v: i64) -> Result<Self> {
        usize::try_from(v)
            .ok()
            .and_then(GestureClass::from_index)
            .ok_or(Error::UnknownClass(v))
    }
}

impl fmt::Display for GestureClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            GestureClass::NoContact => "no-contact",
            GestureClass::SingleTap => "single-tap",
            GestureClass::Push => "push",
            GestureClass::Grab => "grab",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SeriesMeta {
    pub pose: Option<u8>,
    pub session: String,
}

/// Unvalidated input: ragged frames as parsed from a file or produced by a
/// generator.
#[derive(Debug, Clone, Default)]
pub struct RawSeries {
    pub nominal_rate_hz: f64,
    pub timestamps_ms: Vec<f64>,
    /// `frames[t][joint][feature]`
    pub frames: Vec<Vec<Vec<f64>>>,
    pub contact: Vec<bool>,
    pub labels: Vec<GestureClass>,
    pub meta: SeriesMeta,
}

/// A validated, uniformly sampled series with per-sample ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalSeries {
    sample_rate: f64,
    frames: Vec<FeatureFrame>,
    labels: Vec<GestureClass>,
    contact: Vec<bool>,
    meta: SeriesMeta,
}

impl SignalSeries {
    /// Constructs a series from already well-formed frames, checking the
    /// remaining invariants (lengths, finiteness, label/flag agreement).
    pub fn new(
        sample_rate: f64,
        frames: Vec<FeatureFrame>,
        labels: Vec<GestureClass>,
        meta: SeriesMeta,
    ) -> Result<Self> {
        let contact = labels.iter().map(|l| l.is_contact()).collect();
        Self::with_flags(sample_rate, frames, labels, contact, meta)
    }

    pub fn with_flags(
        sample_rate: f64,
        frames: Vec<FeatureFrame>,
        labels: Vec<GestureClass>,
        contact: Vec<bool>,
        meta: SeriesMeta,
    ) -> Result<Self> {
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(Error::ConfigInvalid(format!(
                "sample rate {sample_rate} must be positive"
            )));
        }
        if frames.is_empty() {
            return Err(Error::EmptySeries);
        }
        for len in [labels.len(), contact.len()] {
            if len != frames.len() {
                return Err(Error::LengthMismatch {
                    expected: frames.len(),
                    found: len,
                });
            }
        }
        for (t, frame) in frames.iter().enumerate() {
            if let Some(c) = frame.channels().position(|v| !v.is_finite()) {
                return Err(Error::NonFiniteValue { frame: t, channel: c });
            }
        }
        check_flags(&labels, &contact)?;
        Ok(Self {
            sample_rate,
            frames,
            labels,
            contact,
            meta,
        })
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn period_ms(&self) -> f64 {
        1000.0 / self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frames(&self) -> &[FeatureFrame] {
        &self.frames
    }

    pub fn labels(&self) -> &[GestureClass] {
        &self.labels
    }

    pub fn contact_flags(&self) -> &[bool] {
        &self.contact
    }

    pub fn meta(&self) -> &SeriesMeta {
        &self.meta
    }

    pub fn set_meta(&mut self, meta: SeriesMeta) {
        self.meta = meta;
    }
}

fn check_flags(labels: &[GestureClass], contact: &[bool]) -> Result<()> {
    for (index, (&label, &flag)) in labels.iter().zip(contact).enumerate() {
        if flag != label.is_contact() {
            return Err(Error::LabelFlagInconsistent {
                index,
                contact: flag,
                label: label as u8,
            });
        }
    }
    Ok(())
}

/// Checks every series invariant and produces a [`SignalSeries`].
pub fn validate_series(raw: RawSeries) -> Result<SignalSeries> {
    let n = raw.frames.len();
    if n == 0 {
        return Err(Error::EmptySeries);
    }
    if !(raw.nominal_rate_hz.is_finite() && raw.nominal_rate_hz > 0.0) {
        return Err(Error::ConfigInvalid(format!(
            "nominal rate {} must be positive",
            raw.nominal_rate_hz
        )));
    }
    for len in [raw.timestamps_ms.len(), raw.contact.len(), raw.labels.len()] {
        if len != n {
            return Err(Error::LengthMismatch {
                expected: n,
                found: len,
            });
        }
    }

    let mut frames = Vec::with_capacity(n);
    for (t, rows) in raw.frames.iter().enumerate() {
        if rows.len() != JOINTS {
            return Err(Error::JointCountMismatch {
                frame: t,
                found: rows.len(),
            });
        }
        let mut frame = FeatureFrame::zeros();
        for (j, row) in rows.iter().enumerate() {
            if row.len() != FEATURES {
                return Err(Error::FeatureCountMismatch {
                    frame: t,
                    joint: j,
                    found: row.len(),
                });
            }
            for (f, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFiniteValue {
                        frame: t,
                        channel: j * FEATURES + f,
                    });
                }
                frame.values[j][f] = v;
            }
        }
        frames.push(frame);
    }

    let period = 1000.0 / raw.nominal_rate_hz;
    let limit = MAX_GAP_FACTOR * period;
    for (index, pair) in raw.timestamps_ms.windows(2).enumerate() {
        let gap = pair[1] - pair[0];
        if !gap.is_finite() || gap <= 0.0 || gap > limit {
            return Err(Error::SamplingGap {
                index,
                gap_ms: gap,
                limit_ms: limit,
            });
        }
    }

    check_flags(&raw.labels, &raw.contact)?;
    Ok(SignalSeries {
        sample_rate: raw.nominal_rate_hz,
        frames,
        labels: raw.labels,
        contact: raw.contact,
        meta: raw.meta,
    })
}

/// Where a detection window came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowOrigin {
    pub series: String,
    pub start: usize,
}

/// A detection window: a verbatim slice of consecutive frames plus its label.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledWindow<'a> {
    pub frames: &'a [FeatureFrame],
    pub label: GestureClass,
    pub origin: WindowOrigin,
}

/// Labels a detection window from its per-sample labels.
///
/// Fewer than half contact samples gives `NoContact`. Otherwise the most
/// frequent gesture among the contact samples wins, ties going to the lowest
/// class index. With the default 28-sample window the threshold is 14.
pub fn label_window(labels: &[GestureClass], expected_len: usize) -> Result<GestureClass> {
    if labels.len() != expected_len || expected_len == 0 {
        return Err(Error::LengthMismatch {
            expected: expected_len,
            found: labels.len(),
        });
    }
    let mut counts = [0usize; GestureClass::COUNT];
    for l in labels {
        counts[l.index()] += 1;
    }
    let contact: usize = counts[1..].iter().sum();
    if 2 * contact < expected_len {
        return Ok(GestureClass::NoContact);
    }
    let mut best = GestureClass::SingleTap;
    for g in GestureClass::GESTURES {
        if counts[g.index()] > counts[best.index()] {
            best = g;
        }
    }
    Ok(best)
}
