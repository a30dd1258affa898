//! Window predictions to sample labels, events and detection/classification
//! metrics.

use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::GestureClass;

/// Delays above this count as failures (DD) or are left out of the mean (RD).
pub const DELAY_LIMIT_MS: f64 = 150.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowPrediction {
    pub start: usize,
    pub class: GestureClass,
    pub probs: [f64; GestureClass::COUNT],
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PredictionStream {
    pub sample_rate: f64,
    pub windows: Vec<WindowPrediction>,
}

impl PredictionStream {
    pub fn classes(&self) -> Vec<GestureClass> {
        self.windows.iter().map(|w| w.class).collect()
    }
}

/// 2-of-3 vote over `(a, b, c)`; with three distinct classes the previous
/// output is held.
pub fn vote_triple(a: GestureClass, b: GestureClass, c: GestureClass, prev: GestureClass) -> GestureClass {
    if a == b || a == c {
        a
    } else if b == c {
        b
    } else {
        prev
    }
}

/// Incremental form of [`majority_vote`] for live use.
#[derive(Debug, Clone, Default)]
pub struct MajorityVoter {
    raw: Vec<GestureClass>,
    prev: Option<GestureClass>,
}

impl MajorityVoter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, raw: GestureClass) -> GestureClass {
        if self.raw.len() == 3 {
            self.raw.remove(0);
        }
        self.raw.push(raw);
        let out = match (self.raw.as_slice(), self.prev) {
            ([a, b, c], Some(prev)) => vote_triple(*a, *b, *c, prev),
            _ => raw,
        };
        self.prev = Some(out);
        out
    }
}

pub fn majority_vote(stream: &PredictionStream) -> PredictionStream {
    let mut voter = MajorityVoter::new();
    let windows = stream
        .windows
        .iter()
        .map(|w| WindowPrediction {
            class: voter.push(w.class),
            ..*w
        })
        .collect();
    PredictionStream {
        sample_rate: stream.sample_rate,
        windows,
    }
}

/// Each sample takes the class of the latest window starting at or before
/// it; samples before the first window take the first window's class.
pub fn to_sample_labels(stream: &PredictionStream, len: usize) -> Vec<GestureClass> {
    let mut out = vec![GestureClass::NoContact; len];
    let Some(first) = stream.windows.first() else {
        return out;
    };
    let mut current = first.class;
    let mut next = 0;
    for (t, slot) in out.iter_mut().enumerate() {
        while next < stream.windows.len() && stream.windows[next].start <= t {
            current = stream.windows[next].class;
            next += 1;
        }
        *slot = current;
    }
    out
}

/// Half-open run `[start, end)` of one gesture.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContactEvent {
    pub start: usize,
    pub end: usize,
    pub gesture: GestureClass,
}

pub fn extract_events(labels: &[GestureClass]) -> Vec<ContactEvent> {
    let mut events = Vec::new();
    let mut t = 0;
    while t < labels.len() {
        let g = labels[t];
        let start = t;
        while t < labels.len() && labels[t] == g {
            t += 1;
        }
        if g.is_contact() {
            events.push(ContactEvent {
                start,
                end: t,
                gesture: g,
            });
        }
    }
    events
}

/// Rebuilds sample labels from events (inverse of [`extract_events`]).
pub fn events_to_labels(events: &[ContactEvent], len: usize) -> Vec<GestureClass> {
    let mut out = vec![GestureClass::NoContact; len];
    for ev in events {
        out[ev.start..ev.end.min(len)].fill(ev.gesture);
    }
    out
}

/// Contact runs of a prediction: consecutive contact samples regardless of
/// gesture class.
pub fn contact_runs(labels: &[GestureClass]) -> Vec<(usize, usize)> {
    let mut runs = Vec::new();
    let mut t = 0;
    while t < labels.len() {
        if labels[t].is_contact() {
            let s = t;
            while t < labels.len() && labels[t].is_contact() {
                t += 1;
            }
            runs.push((s, t));
        } else {
            t += 1;
        }
    }
    runs
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventOutcome {
    pub event: ContactEvent,
    /// Samples from onset to the first predicted contact inside the event.
    /// `None` when the event has no predicted contact at all.
    pub dd_samples: Option<usize>,
    /// Samples from the event end to the first predicted no-contact at or
    /// after it (the series end if there is none).
    pub rd_samples: usize,
    pub detected: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContactReport {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    pub fn_: usize,
    pub sample_rate: f64,
    pub events: Vec<EventOutcome>,
    /// Samples counted as true positives.
    pub tp_mask: Vec<bool>,
}

impl ContactReport {
    pub fn limit_samples(&self) -> f64 {
        DELAY_LIMIT_MS * self.sample_rate / 1000.0
    }

    pub fn mean_dd_ms(&self) -> Option<f64> {
        mean(self.events.iter().filter(|e| e.detected).filter_map(|e| e.dd_samples))
            .map(|s| s * 1000.0 / self.sample_rate)
    }

    /// Mean over detected events whose recovery stayed within the limit.
    pub fn mean_rd_ms(&self) -> Option<f64> {
        let limit = self.limit_samples();
        mean(
            self.events
                .iter()
                .filter(|e| e.detected && e.rd_samples as f64 <= limit)
                .map(|e| e.rd_samples),
        )
        .map(|s| s * 1000.0 / self.sample_rate)
    }
}

fn mean(it: impl Iterator<Item = usize>) -> Option<f64> {
    let (mut sum, mut n) = (0usize, 0usize);
    for v in it {
        sum += v;
        n += 1;
    }
    (n > 0).then(|| sum as f64 / n as f64)
}

fn check_lengths(gt: &[GestureClass], pred: &[GestureClass]) -> Result<()> {
    if gt.len() != pred.len() {
        return Err(Error::LengthMismatch {
            expected: gt.len(),
            found: pred.len(),
        });
    }
    Ok(())
}

/// Sample-level contact confusion counts with per-event delays. An event
/// whose first predicted contact comes later than [`DELAY_LIMIT_MS`] after
/// onset (or never) counts entirely as FN. Predicted contact outside any
/// ground-truth event is FP, however long it lasts.
pub fn contact_metrics(gt: &[GestureClass], pred: &[GestureClass], sample_rate: f64) -> Result<ContactReport> {
    check_lengths(gt, pred)?;
    let n = gt.len();
    let limit = DELAY_LIMIT_MS * sample_rate / 1000.0;
    let mut tp_mask = vec![false; n];
    let (mut tp, mut tn, mut fp, mut fn_) = (0, 0, 0, 0);
    for t in 0..n {
        match (gt[t].is_contact(), pred[t].is_contact()) {
            (true, true) => {
                tp += 1;
                tp_mask[t] = true;
            }
            (true, false) => fn_ += 1,
            (false, true) => fp += 1,
            (false, false) => tn += 1,
        }
    }
    let mut events = Vec::new();
    for ev in extract_events(gt) {
        let dd = (ev.start..ev.end).find(|&t| pred[t].is_contact()).map(|t| t - ev.start);
        let rd = (ev.end..n).find(|&t| !pred[t].is_contact()).unwrap_or(n) - ev.end;
        let detected = matches!(dd, Some(d) if d as f64 <= limit);
        if !detected {
            for hit in &mut tp_mask[ev.start..ev.end] {
                if *hit {
                    *hit = false;
                    tp -= 1;
                    fn_ += 1;
                }
            }
        }
        events.push(EventOutcome {
            event: ev,
            dd_samples: dd,
            rd_samples: rd,
            detected,
        });
    }
    Ok(ContactReport {
        tp,
        tn,
        fp,
        fn_,
        sample_rate,
        events,
        tp_mask,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GestureReport {
    /// TP samples whose predicted gesture matches the ground truth.
    pub tp_gesture: usize,
    pub tp_contact: usize,
    /// Per-gesture `(TP, FN)` over ground-truth events of that gesture,
    /// indexed like [`GestureClass::GESTURES`].
    pub per_gesture: [(usize, usize); 3],
}

impl GestureReport {
    pub fn accuracy(&self) -> f64 {
        100.0 * self.tp_gesture as f64 / self.tp_contact as f64
    }

    pub fn dfr(&self, gesture: GestureClass) -> Option<f64> {
        let (tp, fn_) = self.per_gesture[gesture.index().checked_sub(1)?];
        percent(fn_, tp + fn_)
    }
}

pub fn gesture_metrics(gt: &[GestureClass], pred: &[GestureClass], contact: &ContactReport) -> Result<GestureReport> {
    check_lengths(gt, pred)?;
    check_lengths(gt, &vec![GestureClass::NoContact; contact.tp_mask.len()])?;
    let mut tp_gesture = 0;
    let mut per_gesture = [(0, 0); 3];
    for t in 0..gt.len() {
        if let Some(g) = gt[t].index().checked_sub(1) {
            if contact.tp_mask[t] {
                per_gesture[g].0 += 1;
            } else {
                per_gesture[g].1 += 1;
            }
        }
        if contact.tp_mask[t] && pred[t] == gt[t] {
            tp_gesture += 1;
        }
    }
    if contact.tp == 0 {
        return Err(Error::EmptyTpRegion);
    }
    Ok(GestureReport {
        tp_gesture,
        tp_contact: contact.tp,
        per_gesture,
    })
}

fn percent(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| 100.0 * num as f64 / den as f64)
}

/// All reported metrics; percentages and milliseconds. `None` marks a metric
/// whose denominator is empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricBundle {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub acc: Option<f64>,
    pub dfr: Option<f64>,
    pub far: Option<f64>,
    pub dd_ms: Option<f64>,
    pub rd_ms: Option<f64>,
    pub gesture_acc: Option<f64>,
    pub dfr_st: Option<f64>,
    pub dfr_p: Option<f64>,
    pub dfr_g: Option<f64>,
    pub events: usize,
    pub detected_events: usize,
}

/// Pools sessions: counts and per-event delays are summed over sessions,
/// events never span two sessions.
#[derive(Debug, Clone, Default)]
pub struct MetricAccumulator {
    samples: usize,
    tp: usize,
    tn: usize,
    fp: usize,
    fn_: usize,
    tp_gesture: usize,
    per_gesture: [(usize, usize); 3],
    dd: Vec<f64>,
    rd: Vec<f64>,
    events: usize,
    detected: usize,
}

impl MetricAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, gt: &[GestureClass], pred: &[GestureClass], sample_rate: f64) -> Result<()> {
        let c = contact_metrics(gt, pred, sample_rate)?;
        self.samples += gt.len();
        self.tp += c.tp;
        self.tn += c.tn;
        self.fp += c.fp;
        self.fn_ += c.fn_;
        let ms = 1000.0 / sample_rate;
        let limit = c.limit_samples();
        for e in &c.events {
            self.events += 1;
            if e.detected {
                self.detected += 1;
                self.dd.push(e.dd_samples.unwrap_or(0) as f64 * ms);
                if e.rd_samples as f64 <= limit {
                    self.rd.push(e.rd_samples as f64 * ms);
                }
            }
        }
        match gesture_metrics(gt, pred, &c) {
            Ok(g) => {
                self.tp_gesture += g.tp_gesture;
                for (acc, (tp, fn_)) in self.per_gesture.iter_mut().zip(g.per_gesture) {
                    acc.0 += tp;
                    acc.1 += fn_;
                }
            }
            Err(Error::EmptyTpRegion) => {
                // no TP samples: every gesture sample is FN
                for label in gt {
                    if let Some(g) = label.index().checked_sub(1) {
                        self.per_gesture[g].1 += 1;
                    }
                }
            }
            Err(e) => return Err(e),
        }
        Ok(())
    }

    pub fn finish(&self) -> MetricBundle {
        let avg = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
        let dfr_of = |i: usize| {
            let (tp, fn_) = self.per_gesture[i];
            percent(fn_, tp + fn_)
        };
        MetricBundle {
            tp: self.tp,
            tn: self.tn,
            fp: self.fp,
            fn_: self.fn_,
            acc: percent(self.tp + self.tn, self.samples),
            dfr: percent(self.fn_, self.tp + self.fn_),
            far: percent(self.fp, self.tn + self.fp),
            dd_ms: avg(&self.dd),
            rd_ms: avg(&self.rd),
            gesture_acc: percent(self.tp_gesture, self.tp),
            dfr_st: dfr_of(0),
            dfr_p: dfr_of(1),
            dfr_g: dfr_of(2),
            events: self.events,
            detected_events: self.detected,
        }
    }
}

pub fn evaluate(gt: &[GestureClass], pred: &[GestureClass], sample_rate: f64) -> Result<MetricBundle> {
    let mut acc = MetricAccumulator::new();
    acc.add(gt, pred, sample_rate)?;
    Ok(acc.finish())
}

/// One row of a report: a model evaluated in one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub model: String,
    pub experiment: String,
    pub metrics: MetricBundle,
}

pub const RECORD_COLUMNS: [&str; 15] = [
    "model",
    "experiment",
    "Acc",
    "DFR",
    "FAR",
    "DD",
    "RD",
    "GC-Acc",
    "DFR-ST",
    "DFR-P",
    "DFR-G",
    "TP",
    "TN",
    "FP",
    "FN",
];

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.2}"))
}

impl MetricRecord {
    fn cells(&self) -> Vec<String> {
        let m = &self.metrics;
        let mut row = vec![self.model.clone(), self.experiment.clone()];
        row.extend(
            [
                m.acc,
                m.dfr,
                m.far,
                m.dd_ms,
                m.rd_ms,
                m.gesture_acc,
                m.dfr_st,
                m.dfr_p,
                m.dfr_g,
            ]
            .map(cell),
        );
        row.extend([m.tp, m.tn, m.fp, m.fn_].map(|v| v.to_string()));
        row
    }
}

pub fn write_records_csv<W: Write>(records: &[MetricRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RECORD_COLUMNS)?;
    for r in records {
        w.write_record(r.cells())?;
    }
    w.flush().map_err(|e| Error::io("<records>", e))?;
    Ok(())
}

pub const EVENT_COLUMNS: [&str; 6] = ["session", "gesture", "start", "end", "start_ms", "end_ms"];

/// Event list as CSV; one row per `(session, event)`.
pub fn write_events_csv<W: Write>(events: &[(String, ContactEvent)], sample_rate: f64, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(EVENT_COLUMNS)?;
    let ms = 1000.0 / sample_rate;
    for (session, ev) in events {
        w.write_record([
            session.clone(),
            ev.gesture.short_name().to_string(),
            ev.start.to_string(),
            ev.end.to_string(),
            format!("{:.1}", ev.start as f64 * ms),
            format!("{:.1}", ev.end as f64 * ms),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<events>", e))?;
    Ok(())
}

/// Aligned text table with the same columns as the record file.
pub fn format_table(records: &[MetricRecord]) -> String {
    let rows: Vec<Vec<String>> = std::iter::once(RECORD_COLUMNS.iter().map(|s| s.to_string()).collect())
        .chain(records.iter().map(MetricRecord::cells))
        .collect();
    let widths: Vec<usize> = (0..RECORD_COLUMNS.len())
        .map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0))
        .collect();
    let mut s = String::new();
    for (i, row) in rows.iter().enumerate() {
        for (c, v) in row.iter().enumerate() {
            if c < 2 {
                let _ = write!(s, "{v:<w$}  ", w = widths[c]);
            } else {
                let _ = write!(s, "{v:>w$}  ", w = widths[c]);
            }
        }
        s.truncate(s.trim_end().len());
        s.push('\n');
        if i == 0 {
            s.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
            s.push('\n');
        }
    }
    s
}
