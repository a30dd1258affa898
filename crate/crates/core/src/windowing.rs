//! Detection windows over a series, and sliding sub-windows inside a
//! detection window.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{label_window, FeatureFrame, LabeledWindow, SignalSeries, WindowOrigin};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowingConfig {
    /// Samples per detection window.
    pub detect_len: usize,
    /// Stride between detection windows.
    pub detect_step: usize,
    /// Samples per sliding sub-window.
    pub sub_len: usize,
    /// Stride between sub-windows.
    pub sub_hop: usize,
}

impl Default for WindowingConfig {
    fn default() -> Self {
        Self {
            detect_len: 28,
            detect_step: 14,
            sub_len: 16,
            // Two stacked 3-wide kernels along the frame axis need 5 frames.
            sub_hop: 3,
        }
    }
}

impl WindowingConfig {
    pub fn validate(&self) -> Result<()> {
        let Self {
            detect_len,
            detect_step,
            sub_len,
            sub_hop,
        } = *self;
        if sub_len == 0 || sub_len > detect_len {
            return Err(Error::ConfigInvalid(format!(
                "sub_len {sub_len} must be in 1..={detect_len}"
            )));
        }
        if sub_hop == 0 {
            return Err(Error::ConfigInvalid("sub_hop must be >= 1".into()));
        }
        if detect_step == 0 || detect_step > detect_len {
            return Err(Error::ConfigInvalid(format!(
                "detect_step {detect_step} must be in 1..={detect_len}"
            )));
        }
        Ok(())
    }

    /// Number of sub-window frames per detection window.
    pub fn frame_count(&self) -> usize {
        (self.detect_len - self.sub_len) / self.sub_hop + 1
    }

    /// Number of detection windows that fit in `len` samples.
    pub fn window_count(&self, len: usize) -> usize {
        if len < self.detect_len {
            0
        } else {
            (len - self.detect_len) / self.detect_step + 1
        }
    }

    /// Real-time budget per window: one detection step of wall time.
    pub fn step_budget_ms(&self, sample_rate: f64) -> f64 {
        self.detect_step as f64 * 1000.0 / sample_rate
    }
}

/// Cuts a series into labeled detection windows starting at
/// `0, step, 2·step, …`. Trailing samples that do not fill a window are
/// dropped.
pub fn segment_windows<'a>(series: &'a SignalSeries, cfg: &WindowingConfig) -> Result<Vec<LabeledWindow<'a>>> {
    cfg.validate()?;
    let n = cfg.window_count(series.len());
    let mut out = Vec::with_capacity(n);
    for w in 0..n {
        let start = w * cfg.detect_step;
        let end = start + cfg.detect_len;
        out.push(LabeledWindow {
            frames: &series.frames()[start..end],
            label: label_window(&series.labels()[start..end], cfg.detect_len)?,
            origin: WindowOrigin {
                series: series.meta().session.clone(),
                start,
            },
        });
    }
    Ok(out)
}

/// Sliding sub-windows of a detection-window block; frame `k` covers
/// `[k·hop, k·hop + sub_len)`.
pub fn slide_subwindows<'a>(block: &'a [FeatureFrame], cfg: &WindowingConfig) -> Result<Vec<&'a [FeatureFrame]>> {
    cfg.validate()?;
    if block.len() != cfg.detect_len {
        return Err(Error::ConfigInvalid(format!(
            "block has {} rows, detect_len is {}",
            block.len(),
            cfg.detect_len
        )));
    }
    Ok((0..cfg.frame_count())
        .map(|k| {
            let s = k * cfg.sub_hop;
            &block[s..s + cfg.sub_len]
        })
        .collect())
}
