//! Synthetic joint-sensor sessions with labeled tactile gestures.
//!
//! Every event contributes an external torque `ext[j](t)` per joint. The four
//! features are then
//!
//! ```text
//! tau_ext = ext_gain[j]·ext + drift
//! tau     = tau_offset[j] + tau_gain[j]·ext + drift
//! e       = e_offset[j] + compliance[j]·ext
//! de      = (e[t] - e[t-1])·rate
//! ```
//!
//! plus independent Gaussian noise per feature. Offsets and gains depend on
//! the robot pose.

use std::f64::consts::PI;
use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{FeatureFrame, GestureClass, SeriesMeta, SignalSeries, FEATURES, JOINTS};

pub const POSES: [u8; 4] = [1, 2, 3, 4];
pub const TAP_MIN_MS: f64 = 50.0;
pub const TAP_MAX_MS: f64 = 150.0;
pub const GRAB_JOINTS: [usize; 2] = [5, 6];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Left,
    Right,
    Front,
    Back,
    Up,
}

impl Direction {
    pub const ALL: [Direction; 5] = [
        Direction::Left,
        Direction::Right,
        Direction::Front,
        Direction::Back,
        Direction::Up,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Per-joint weights of a push from this direction.
    fn push_pattern(self) -> [f64; JOINTS] {
        match self {
            Direction::Left => [1.0, 0.6, 0.0, 0.5, 0.0, 0.3, 0.1],
            Direction::Right => [-1.0, -0.6, 0.0, -0.5, 0.0, -0.3, -0.1],
            Direction::Front => [0.0, 1.0, 0.4, -0.8, 0.2, 0.4, 0.0],
            Direction::Back => [0.0, -1.0, -0.4, 0.8, -0.2, -0.4, 0.0],
            Direction::Up => [0.2, -0.7, 0.0, -0.9, 0.0, 0.6, 0.0],
        }
    }

    /// First joint touched by a tap from this direction.
    fn tap_joint(self) -> usize {
        match self {
            Direction::Left => 0,
            Direction::Right => 1,
            Direction::Front => 2,
            Direction::Back => 3,
            Direction::Up => 4,
        }
    }

    fn sign(self) -> f64 {
        match self {
            Direction::Left | Direction::Front | Direction::Up => 1.0,
            Direction::Right | Direction::Back => -1.0,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Direction::Left => "left",
            Direction::Right => "right",
            Direction::Front => "front",
            Direction::Back => "back",
            Direction::Up => "up",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthEvent {
    pub gesture: GestureClass,
    pub onset_s: f64,
    pub duration_s: f64,
    pub direction: Direction,
    /// Peak external torque scale [Nm].
    pub magnitude: f64,
}

impl SynthEvent {
    fn support(&self, rate: f64) -> (usize, usize) {
        let start = (self.onset_s * rate).round() as usize;
        let end = ((self.onset_s + self.duration_s) * rate).round() as usize;
        (start, end)
    }
}

/// Per-pose static sensor characteristics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseBaseline {
    pub tau_offset: [f64; JOINTS],
    pub e_offset: [f64; JOINTS],
    pub tau_gain: [f64; JOINTS],
    pub ext_gain: [f64; JOINTS],
    pub compliance: [f64; JOINTS],
    /// Amplitude of the slow sinusoidal drift on `tau` and `tau_ext` [Nm].
    pub drift_amplitude: f64,
    pub drift_period_s: f64,
}

impl PoseBaseline {
    /// Built-in characteristics. Pose 4 has offsets and gains outside the
    /// range spanned by poses 1 to 3 on every joint.
    pub fn for_pose(pose: u8) -> Result<Self> {
        let (tau_scale, e_scale, gain) = match pose {
            1 => (1.0, 1.0, [1.00, 0.95, 1.05, 1.00, 0.98, 1.02, 1.00]),
            2 => (1.2, 0.8, [0.92, 1.05, 0.97, 1.08, 1.03, 0.95, 1.06]),
            3 => (0.85, 1.25, [1.07, 0.90, 1.02, 0.93, 0.96, 1.08, 0.94]),
            4 => (1.6, 1.7, [1.30, 1.33, 1.28, 1.35, 1.31, 1.29, 1.32]),
            _ => return Err(Error::ConfigInvalid(format!("pose {pose} not in 1..=4"))),
        };
        let phase = f64::from(pose) * 0.9;
        let mut b = Self {
            tau_offset: [0.0; JOINTS],
            e_offset: [0.0; JOINTS],
            tau_gain: gain,
            ext_gain: [1.0; JOINTS],
            compliance: [0.0; JOINTS],
            drift_amplitude: 0.15,
            drift_period_s: 17.0,
        };
        for j in 0..JOINTS {
            let jf = j as f64;
            // gravity-like load, largest on the shoulder joints
            let load = [9.0, 14.0, 6.0, 8.0, 2.0, 1.5, 0.5][j];
            b.tau_offset[j] = load * (tau_scale + 0.15 * (0.7 * jf + phase).sin());
            b.e_offset[j] = 0.004 * (e_scale + 0.2 * (1.3 * jf + phase).cos());
            b.ext_gain[j] = if pose == 4 {
                0.85
            } else {
                1.0 + 0.04 * ((jf + phase).sin())
            };
            b.compliance[j] = 0.002 * gain[j] * (1.0 + 0.1 * jf);
        }
        Ok(b)
    }

    fn drift(&self, t_s: f64, phase: f64) -> f64 {
        self.drift_amplitude * (2.0 * PI * t_s / self.drift_period_s + phase).sin()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    pub duration_s: f64,
    #[serde(default = "default_rate")]
    pub sample_rate: f64,
    pub pose: u8,
    #[serde(default)]
    pub events: Vec<SynthEvent>,
    /// Noise standard deviation per feature, ordered `e, de, tau, tau_ext`.
    #[serde(default = "default_noise")]
    pub noise_std: [f64; FEATURES],
    /// Replaces the built-in characteristics of `pose` when set.
    #[serde(default)]
    pub baseline: Option<PoseBaseline>,
}

fn default_rate() -> f64 {
    200.0
}

pub fn default_noise() -> [f64; FEATURES] {
    [2e-4, 0.02, 0.08, 0.08]
}

impl SynthConfig {
    pub fn new(seed: u64, duration_s: f64, pose: u8) -> Self {
        Self {
            seed,
            duration_s,
            sample_rate: default_rate(),
            pose,
            events: Vec::new(),
            noise_std: default_noise(),
            baseline: None,
        }
    }

    pub fn sample_count(&self) -> usize {
        (self.duration_s * self.sample_rate).round() as usize
    }

    pub fn baseline(&self) -> Result<PoseBaseline> {
        match &self.baseline {
            Some(b) => Ok(b.clone()),
            None => PoseBaseline::for_pose(self.pose),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate.is_finite() && self.sample_rate > 0.0) {
            return Err(Error::ConfigInvalid(format!(
                "sample_rate {} must be positive",
                self.sample_rate
            )));
        }
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return Err(Error::ConfigInvalid(format!(
                "duration {} s must be positive",
                self.duration_s
            )));
        }
        if !POSES.contains(&self.pose) {
            return Err(Error::ConfigInvalid(format!("pose {} not in 1..=4", self.pose)));
        }
        if self.noise_std.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::ConfigInvalid("noise_std must be finite and >= 0".into()));
        }
        let n = self.sample_count();
        for (i, ev) in self.events.iter().enumerate() {
            if !ev.gesture.is_contact() {
                return Err(Error::ConfigInvalid(format!(
                    "event {i}: gesture must not be NoContact"
                )));
            }
            if !(ev.onset_s >= 0.0 && ev.duration_s > 0.0 && ev.magnitude.is_finite()) {
                return Err(Error::ConfigInvalid(format!(
                    "event {i}: onset {} s, duration {} s invalid",
                    ev.onset_s, ev.duration_s
                )));
            }
            let (start, end) = ev.support(self.sample_rate);
            if end > n || ev.onset_s + ev.duration_s > self.duration_s + 1e-9 {
                return Err(Error::ConfigInvalid(format!(
                    "event {i} ends at {:.3} s, after the session end {} s",
                    ev.onset_s + ev.duration_s,
                    self.duration_s
                )));
            }
            if start >= end {
                return Err(Error::ConfigInvalid(format!("event {i} covers no samples")));
            }
        }
        let mut order: Vec<usize> = (0..self.events.len()).collect();
        order.sort_by(|&a, &b| self.events[a].onset_s.total_cmp(&self.events[b].onset_s));
        for pair in order.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let (_, a_end) = self.events[a].support(self.sample_rate);
            let (b_start, _) = self.events[b].support(self.sample_rate);
            if b_start < a_end {
                let (lo, hi) = (a.min(b), a.max(b));
                return Err(Error::ConfigInvalid(format!(
                    "events {lo} and {hi} overlap ({} at {} s, {} at {} s)",
                    self.events[lo].gesture, self.events[lo].onset_s, self.events[hi].gesture, self.events[hi].onset_s
                )));
            }
        }
        Ok(())
    }
}

fn smoothstep(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * (3.0 - 2.0 * x)
}

/// Rises and falls over `ramp` samples inside a support of `len` samples.
fn envelope(i: usize, len: usize, ramp: f64) -> f64 {
    let i = i as f64 + 0.5;
    let len = len as f64;
    smoothstep(i / ramp).min(smoothstep((len - i) / ramp))
}

/// Noiseless external torque of one event, `len × JOINTS`, relative to onset.
/// `rng` draws the per-event variation (tap frequency and span, grab wobble).
pub fn event_template(ev: &SynthEvent, rate: f64, rng: &mut impl Rng) -> Vec<[f64; JOINTS]> {
    let (start, end) = ev.support(rate);
    let len = end - start;
    let mut out = vec![[0.0; JOINTS]; len];
    let dt = 1.0 / rate;
    match ev.gesture {
        GestureClass::NoContact => {}
        GestureClass::SingleTap => {
            let freq = rng.random_range(25.0..30.0);
            let decay_s = rng.random_range(0.025..0.035);
            let span = rng.random_range(2..=3usize);
            let first = ev.direction.tap_joint();
            let weights = [1.0, 0.7, 0.45];
            let sign = ev.direction.sign();
            for (i, row) in out.iter_mut().enumerate() {
                let t = i as f64 * dt;
                let v = ev.magnitude * sign * (-t / decay_s).exp() * (2.0 * PI * freq * t).sin();
                for k in 0..span {
                    row[(first + k).min(JOINTS - 1)] += weights[k] * v;
                }
            }
        }
        GestureClass::Push => {
            let pattern = ev.direction.push_pattern();
            let ramp = 0.12 * rate;
            for (i, row) in out.iter_mut().enumerate() {
                let env = envelope(i, len, ramp);
                for j in 0..JOINTS {
                    row[j] = ev.magnitude * pattern[j] * env;
                }
            }
        }
        GestureClass::Grab => {
            let ramp = 0.15 * rate;
            let wobble_hz = rng.random_range(0.8..1.6);
            let phase = rng.random_range(0.0..2.0 * PI);
            // opposing fingers press from different sides
            let bias = 0.15 * (ev.direction.index() as f64 - 2.0);
            let signs = [1.0 + bias, -(1.0 - bias)];
            for (i, row) in out.iter_mut().enumerate() {
                let t = i as f64 * dt;
                let env = envelope(i, len, ramp);
                for (k, &j) in GRAB_JOINTS.iter().enumerate() {
                    let wobble = 1.0 + 0.15 * (2.0 * PI * wobble_hz * t + phase + k as f64 * 1.3).sin();
                    row[j] = ev.magnitude * signs[k] * wobble * env;
                }
                // small reaction on the wrist
                row[4] = -0.2 * ev.magnitude * env;
            }
        }
    }
    out
}

/// Noiseless, event-free feature frames of a configuration.
pub fn pose_baseline(cfg: &SynthConfig) -> Result<Vec<FeatureFrame>> {
    cfg.validate()?;
    let base = cfg.baseline()?;
    Ok(compose(cfg, &base, &vec![[0.0; JOINTS]; cfg.sample_count()]))
}

fn compose(cfg: &SynthConfig, base: &PoseBaseline, ext: &[[f64; JOINTS]]) -> Vec<FeatureFrame> {
    let rate = cfg.sample_rate;
    let mut frames = vec![FeatureFrame::zeros(); ext.len()];
    for (t, (frame, ext)) in frames.iter_mut().zip(ext).enumerate() {
        let ts = t as f64 / rate;
        for j in 0..JOINTS {
            let drift = base.drift(ts, 0.8 * j as f64);
            let v = &mut frame.values[j];
            v[0] = base.e_offset[j] + base.compliance[j] * ext[j];
            v[2] = base.tau_offset[j] + base.tau_gain[j] * ext[j] + drift;
            v[3] = base.ext_gain[j] * ext[j] + drift;
        }
    }
    for t in 1..frames.len() {
        for j in 0..JOINTS {
            frames[t].values[j][1] = (frames[t].values[j][0] - frames[t - 1].values[j][0]) * rate;
        }
    }
    frames
}

/// Generates one labeled session. Equal configurations give bitwise-equal
/// series.
pub fn generate_session(cfg: &SynthConfig) -> Result<SignalSeries> {
    cfg.validate()?;
    let base = cfg.baseline()?;
    let n = cfg.sample_count();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut ext = vec![[0.0; JOINTS]; n];
    let mut labels = vec![GestureClass::NoContact; n];
    for ev in &cfg.events {
        let (start, end) = ev.support(cfg.sample_rate);
        let template = event_template(ev, cfg.sample_rate, &mut rng);
        for (t, row) in (start..end).zip(template) {
            for j in 0..JOINTS {
                ext[t][j] += row[j];
            }
            labels[t] = ev.gesture;
        }
    }
    let mut frames = compose(cfg, &base, &ext);
    for (f, &std) in cfg.noise_std.iter().enumerate() {
        if std == 0.0 {
            continue;
        }
        let normal = Normal::new(0.0, std).map_err(|e| Error::ConfigInvalid(e.to_string()))?;
        for frame in frames.iter_mut() {
            for j in 0..JOINTS {
                frame.values[j][f] += normal.sample(&mut rng);
            }
        }
    }
    let meta = SeriesMeta {
        pose: Some(cfg.pose),
        session: format!("pose{}_seed{}", cfg.pose, cfg.seed),
    };
    SignalSeries::new(cfg.sample_rate, frames, labels, meta)
}

/// Timing and amplitude ranges for [`plan_events`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EventPlan {
    pub lead_s: f64,
    pub gap_s: (f64, f64),
    pub tap_s: (f64, f64),
    pub sustained_s: (f64, f64),
    pub tap_magnitude: (f64, f64),
    pub push_magnitude: (f64, f64),
    pub grab_magnitude: (f64, f64),
}

impl Default for EventPlan {
    fn default() -> Self {
        Self {
            lead_s: 1.0,
            gap_s: (1.0, 2.0),
            tap_s: (0.13, 0.15),
            sustained_s: (1.0, 2.0),
            tap_magnitude: (5.0, 7.0),
            push_magnitude: (3.0, 5.0),
            grab_magnitude: (2.5, 4.0),
        }
    }
}

/// Lays out `repeats` events for every (gesture, direction) pair in shuffled
/// order, separated by random gaps. Returns the events and the session
/// duration (one trailing gap after the last event).
pub fn plan_events(plan: &EventPlan, repeats: usize, seed: u64) -> (Vec<SynthEvent>, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut kinds = Vec::with_capacity(repeats * 15);
    for _ in 0..repeats {
        for g in GestureClass::GESTURES {
            for d in Direction::ALL {
                kinds.push((g, d));
            }
        }
    }
    kinds.shuffle(&mut rng);
    let range = |rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)| if hi > lo { rng.random_range(lo..hi) } else { lo };
    let round = |s: f64| (s * 1000.0).round() / 1000.0;
    let mut t = plan.lead_s;
    let mut events = Vec::with_capacity(kinds.len());
    for (gesture, direction) in kinds {
        let (dur, mag) = match gesture {
            GestureClass::SingleTap => (plan.tap_s, plan.tap_magnitude),
            GestureClass::Push => (plan.sustained_s, plan.push_magnitude),
            _ => (plan.sustained_s, plan.grab_magnitude),
        };
        let duration_s = round(range(&mut rng, dur));
        events.push(SynthEvent {
            gesture,
            onset_s: round(t),
            duration_s,
            direction,
            magnitude: range(&mut rng, mag),
        });
        t = round(t) + duration_s + range(&mut rng, plan.gap_s);
    }
    (events, round(t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::repr::dft_magnitude_oracle;
    use crate::signal::Feature;

    fn event(gesture: GestureClass, onset_s: f64, duration_s: f64) -> SynthEvent {
        SynthEvent {
            gesture,
            onset_s,
            duration_s,
            direction: Direction::Front,
            magnitude: 4.0,
        }
    }

    #[test]
    fn ten_seconds_is_2000_samples() {
        let s = generate_session(&SynthConfig::new(1, 10.0, 1)).unwrap();
        assert_eq!(s.len(), 2000);
    }

    #[test]
    fn quiet_session_equals_baseline() {
        let mut cfg = SynthConfig::new(2, 5.0, 3);
        cfg.noise_std = [0.0; 4];
        let s = generate_session(&cfg).unwrap();
        assert_eq!(s.frames(), pose_baseline(&cfg).unwrap().as_slice());
        assert!(s.labels().iter().all(|l| *l == GestureClass::NoContact));
    }

    #[test]
    fn same_seed_is_bitwise_identical() {
        let (events, dur) = plan_events(&EventPlan::default(), 1, 5);
        let mut cfg = SynthConfig::new(5, dur, 2);
        cfg.events = events;
        let a = generate_session(&cfg).unwrap();
        let b = generate_session(&cfg).unwrap();
        assert_eq!(a, b);
        cfg.seed = 6;
        assert_ne!(generate_session(&cfg).unwrap().frames(), a.frames());
    }

    #[test]
    fn labels_cover_exactly_the_event_supports() {
        let mut cfg = SynthConfig::new(3, 6.0, 1);
        cfg.events = vec![
            event(GestureClass::SingleTap, 0.5, 0.1),
            event(GestureClass::Push, 1.0, 1.5),
            event(GestureClass::Grab, 3.0, 2.0),
        ];
        let s = generate_session(&cfg).unwrap();
        for (t, &l) in s.labels().iter().enumerate() {
            let expected = match t {
                100..=119 => GestureClass::SingleTap,
                200..=499 => GestureClass::Push,
                600..=999 => GestureClass::Grab,
                _ => GestureClass::NoContact,
            };
            assert_eq!(l, expected, "sample {t}");
        }
    }

    #[test]
    fn quiet_tau_ext_bounded_by_drift_outside_events() {
        let mut cfg = SynthConfig::new(4, 30.0, 2);
        cfg.noise_std = [0.0; 4];
        cfg.events = vec![
            event(GestureClass::Push, 5.0, 2.0),
            event(GestureClass::SingleTap, 12.0, 0.15),
        ];
        let s = generate_session(&cfg).unwrap();
        let bound = cfg.baseline().unwrap().drift_amplitude;
        let mut max: f64 = 0.0;
        for (f, l) in s.frames().iter().zip(s.labels()) {
            if !l.is_contact() {
                for j in 0..JOINTS {
                    max = max.max(f.get(j, Feature::ExternalTorque).abs());
                }
            }
        }
        assert!(max <= bound + 1e-12, "{max}");
        // a 30 s session spans more than one drift period, so the bound is
        // reached up to sampling resolution
        assert!(max > 0.99 * bound, "{max}");
    }

    #[test]
    fn overlapping_events_name_the_pair() {
        let mut cfg = SynthConfig::new(1, 10.0, 1);
        cfg.events = vec![
            event(GestureClass::Push, 1.0, 1.0),
            event(GestureClass::Grab, 5.0, 1.0),
            event(GestureClass::SingleTap, 1.9, 0.1),
        ];
        match generate_session(&cfg) {
            Err(Error::ConfigInvalid(msg)) => assert!(msg.contains("events 0 and 2"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn invalid_configs_rejected() {
        let mut cfg = SynthConfig::new(1, 2.0, 5);
        assert!(generate_session(&cfg).is_err());
        cfg.pose = 1;
        cfg.events = vec![event(GestureClass::Push, 1.5, 1.0)];
        assert!(generate_session(&cfg).is_err());
        cfg.events = vec![event(GestureClass::NoContact, 0.5, 0.5)];
        assert!(generate_session(&cfg).is_err());
    }

    /// Fraction of spectral energy (excluding DC) in bins whose frequency
    /// satisfies `pred`, from the naive DFT over a zero-padded template.
    fn energy_fraction(signal: &[f64], rate: f64, pred: impl Fn(f64) -> bool) -> f64 {
        let n = 1024;
        let mut padded = signal.to_vec();
        padded.resize(n, 0.0);
        let mag = dft_magnitude_oracle(&padded).unwrap();
        let (mut sel, mut total) = (0.0, 0.0);
        for (k, m) in mag.iter().enumerate() {
            let e = m * m;
            total += e;
            if pred(k as f64 * rate / n as f64) {
                sel += e;
            }
        }
        sel / total
    }

    #[test]
    fn templates_are_spectrally_separated() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for d in Direction::ALL {
            let mut ev = event(GestureClass::SingleTap, 0.0, 0.15);
            ev.direction = d;
            let tap = event_template(&ev, 200.0, &mut rng);
            let j = d.tap_joint();
            let series: Vec<f64> = tap.iter().map(|r| r[j]).collect();
            let hi = energy_fraction(&series, 200.0, |f| f > 10.0);
            assert!(hi > 0.8, "tap {d}: {hi}");

            for g in [GestureClass::Push, GestureClass::Grab] {
                let mut ev = event(g, 0.0, 1.5);
                ev.direction = d;
                let t = event_template(&ev, 200.0, &mut rng);
                let j = if g == GestureClass::Grab { 5 } else { 1 };
                let series: Vec<f64> = t.iter().map(|r| r[j]).collect();
                let lo = energy_fraction(&series, 200.0, |f| f < 5.0);
                assert!(lo > 0.95, "{g} {d}: {lo}");
            }
        }
    }

    #[test]
    fn pose4_outside_training_poses() {
        let b: Vec<PoseBaseline> = POSES.iter().map(|&p| PoseBaseline::for_pose(p).unwrap()).collect();
        for j in 0..JOINTS {
            let max_gain = b[..3].iter().map(|x| x.tau_gain[j]).fold(f64::MIN, f64::max);
            assert!(b[3].tau_gain[j] > max_gain);
            let max_off = b[..3].iter().map(|x| x.tau_offset[j]).fold(f64::MIN, f64::max);
            assert!(b[3].tau_offset[j] > max_off, "joint {j}");
            let min_ext = b[..3].iter().map(|x| x.ext_gain[j]).fold(f64::MAX, f64::min);
            assert!(b[3].ext_gain[j] < min_ext);
        }
    }

    #[test]
    fn planner_is_balanced_and_non_overlapping() {
        let (events, dur) = plan_events(&EventPlan::default(), 2, 11);
        assert_eq!(events.len(), 30);
        for g in GestureClass::GESTURES {
            for d in Direction::ALL {
                assert_eq!(events.iter().filter(|e| e.gesture == g && e.direction == d).count(), 2);
            }
        }
        let mut cfg = SynthConfig::new(11, dur, 1);
        cfg.events = events;
        cfg.validate().unwrap();
        let taps = cfg.events.iter().filter(|e| e.gesture == GestureClass::SingleTap);
        for t in taps {
            assert!(t.duration_s * 1000.0 >= TAP_MIN_MS && t.duration_s * 1000.0 <= TAP_MAX_MS);
        }
    }
}
