//! Sample-by-sample replay with per-window latency measurement.

use std::collections::VecDeque;
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::error::Result;
use crate::eval::{ContactEvent, MajorityVoter, PredictionStream, WindowPrediction, DELAY_LIMIT_MS};
use crate::nn::{Model, Trace};
use crate::pipeline::{finish_prediction, SeriesPrediction};
use crate::repr::Featurizer;
use crate::signal::{FeatureFrame, GestureClass, SignalSeries};

/// Result of one completed detection window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowResult {
    pub start: usize,
    pub raw: GestureClass,
    pub output: GestureClass,
    pub probs: [f64; GestureClass::COUNT],
    /// Featurize + infer + vote.
    pub latency: Duration,
}

/// Holds the last `detect_len` samples and classifies every completed window.
#[derive(Debug)]
pub struct StreamProcessor<'m> {
    model: &'m Model,
    featurizer: Featurizer,
    voter: Option<MajorityVoter>,
    ring: VecDeque<FeatureFrame>,
    seen: usize,
    trace: Trace,
}

impl<'m> StreamProcessor<'m> {
    pub fn new(model: &'m Model, vote: bool) -> Result<Self> {
        Ok(Self {
            model,
            featurizer: model.featurizer()?,
            voter: vote.then(MajorityVoter::new),
            ring: VecDeque::with_capacity(model.windowing.detect_len),
            seen: 0,
            trace: Trace::default(),
        })
    }

    pub fn push(&mut self, frame: FeatureFrame) -> Result<Option<WindowResult>> {
        let cfg = self.model.windowing;
        if self.ring.len() == cfg.detect_len {
            self.ring.pop_front();
        }
        self.ring.push_back(frame);
        self.seen += 1;
        if self.seen < cfg.detect_len || (self.seen - cfg.detect_len) % cfg.detect_step != 0 {
            return Ok(None);
        }
        let t0 = Instant::now();
        let block = self.ring.make_contiguous();
        let (raw, probs) = self.model.classify_window(&self.featurizer, block, &mut self.trace)?;
        let output = match &mut self.voter {
            Some(v) => v.push(raw),
            None => raw,
        };
        let latency = t0.elapsed();
        Ok(Some(WindowResult {
            start: self.seen - cfg.detect_len,
            raw,
            output,
            probs,
            latency,
        }))
    }
}

/// Turns the output class sequence into events as soon as they close.
#[derive(Debug, Clone, Default)]
pub struct EventTracker {
    open: Option<(usize, GestureClass)>,
}

impl EventTracker {
    /// Feeds the output of a window; returns the event closed by it, if any.
    /// The first window's class is taken to hold from sample 0.
    pub fn push(&mut self, start: usize, class: GestureClass) -> Option<ContactEvent> {
        let start = if self.open.is_none() { 0 } else { start };
        match self.open {
            Some((_, c)) if c == class => None,
            prev => {
                self.open = Some((start, class));
                match prev {
                    Some((s, c)) if c.is_contact() => Some(ContactEvent {
                        start: s,
                        end: start,
                        gesture: c,
                    }),
                    _ => None,
                }
            }
        }
    }

    pub fn finish(&mut self, len: usize) -> Option<ContactEvent> {
        match self.open.take() {
            Some((s, c)) if c.is_contact() && s < len => Some(ContactEvent {
                start: s,
                end: len,
                gesture: c,
            }),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StreamEvent {
    pub event: ContactEvent,
    pub start_ms: f64,
    pub end_ms: f64,
    /// Delay after the onset of the overlapping ground-truth event, when
    /// there is one.
    pub dd_ms: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct StreamReport {
    pub windows: Vec<WindowResult>,
    pub events: Vec<StreamEvent>,
    pub prediction: SeriesPrediction,
    pub budget_ms: f64,
}

impl StreamReport {
    pub fn latencies_ms(&self) -> Vec<f64> {
        self.windows.iter().map(|w| w.latency.as_secs_f64() * 1000.0).collect()
    }

    /// Nearest-rank percentile of the window latencies.
    pub fn percentile_ms(&self, p: f64) -> f64 {
        percentile(&self.latencies_ms(), p)
    }

    pub fn max_ms(&self) -> f64 {
        self.latencies_ms().into_iter().fold(0.0, f64::max)
    }

    pub fn violations(&self) -> usize {
        self.latencies_ms().iter().filter(|&&l| l > self.budget_ms).count()
    }
}

pub fn percentile(values: &[f64], p: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = ((p / 100.0) * v.len() as f64).ceil().max(1.0) as usize;
    v[rank.min(v.len()) - 1]
}

fn ground_truth_dd(series: &SignalSeries, ev: &ContactEvent) -> Option<f64> {
    let labels = series.labels();
    // ground-truth event overlapping the predicted one
    let t = (ev.start..ev.end).find(|&t| labels[t].is_contact())?;
    let mut onset = t;
    while onset > 0 && labels[onset - 1].is_contact() {
        onset -= 1;
    }
    let dd = ev.start.saturating_sub(onset) as f64 * series.period_ms();
    Some(dd)
}

/// Replays `series` through a [`StreamProcessor`]. With `speed > 0` samples
/// are released at `speed ×` the sample rate of wall-clock time; `speed = 0`
/// runs as fast as possible. `on_window` and `on_event` observe results as
/// they happen.
pub fn replay(
    model: &Model,
    series: &SignalSeries,
    vote: bool,
    speed: f64,
    mut on_window: impl FnMut(&WindowResult),
    mut on_event: impl FnMut(&StreamEvent),
) -> Result<StreamReport> {
    let mut proc = StreamProcessor::new(model, vote)?;
    let mut tracker = EventTracker::default();
    let period = series.period_ms();
    let mut windows = Vec::new();
    let mut events = Vec::new();
    let mut emit = |ev: ContactEvent, events: &mut Vec<StreamEvent>| {
        let e = StreamEvent {
            event: ev,
            start_ms: ev.start as f64 * period,
            end_ms: ev.end as f64 * period,
            dd_ms: ground_truth_dd(series, &ev).filter(|&d| d <= DELAY_LIMIT_MS),
        };
        on_event(&e);
        events.push(e);
    };
    let t0 = Instant::now();
    for (i, frame) in series.frames().iter().enumerate() {
        if speed > 0.0 {
            let due = Duration::from_secs_f64(i as f64 * period / 1000.0 / speed);
            if let Some(wait) = due.checked_sub(t0.elapsed()) {
                std::thread::sleep(wait);
            }
        }
        if let Some(w) = proc.push(*frame)? {
            on_window(&w);
            if let Some(ev) = tracker.push(w.start, w.output) {
                emit(ev, &mut events);
            }
            windows.push(w);
        }
    }
    if let Some(ev) = tracker.finish(series.len()) {
        emit(ev, &mut events);
    }
    let raw = PredictionStream {
        sample_rate: series.sample_rate(),
        windows: windows
            .iter()
            .map(|w| WindowPrediction {
                start: w.start,
                class: w.raw,
                probs: w.probs,
            })
            .collect(),
    };
    Ok(StreamReport {
        prediction: finish_prediction(raw, series.len(), vote),
        events,
        windows,
        budget_ms: model.windowing.step_budget_ms(series.sample_rate()),
    })
}
