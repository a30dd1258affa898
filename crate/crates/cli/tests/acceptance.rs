//! Acceptance gate. Every criterion prints one `PASS`/`FAIL` line; the
//! process exits non-zero when any criterion fails.
//!
//! `ACCEPTANCE_ONLY=1,7,8 cargo test --test acceptance` runs a subset.

use std::fs;
use std::io::Write;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tactile_core::config::{CustomSession, Split};
use tactile_core::eval::{contact_metrics, gesture_metrics, majority_vote, vote_triple, WindowPrediction};
use tactile_core::nn::{grad_check, LayerSpec, Shape, MODEL_NAMES};
use tactile_core::pipeline::{evaluate_model, session_config, train_on};
use tactile_core::repr::{build_stft, dft_magnitude_oracle, StftPlan, WindowFunction};
use tactile_core::signal::{SeriesMeta, CHANNELS};
use tactile_core::stream::percentile;
use tactile_core::synth::{generate_session, plan_events, EventPlan};
use tactile_core::windowing::segment_windows;
use tactile_core::{
    Error, FeatureFrame, GestureClass, Model, ModelSpec, PredictionStream, ReprConfig, RepresentationKind, RunConfig,
    SignalSeries, SynthConfig, Tensor3, WindowingConfig,
};

const BIN: &str = env!("CARGO_BIN_EXE_tactile");

const STFT_TOLERANCE: f64 = 1e-9;
const STFT_WINDOWS: usize = 100;
const STFT_RUNTIME: Duration = Duration::from_secs(5);

const GRAD_TOLERANCE: f64 = 1e-4;
const GRAD_INPUTS: usize = 5;
const GRAD_RUNTIME: Duration = Duration::from_secs(120);

const METRIC_CASES: usize = 1000;
const METRIC_RUNTIME: Duration = Duration::from_secs(30);

const SAME_POSE_MIN_EVENTS: usize = 300;
const SAME_POSE_CONTACT_ACC: f64 = 95.0;
const SAME_POSE_GESTURE_ACC: f64 = 90.0;
const SAME_POSE_MAX_DD_MS: f64 = 150.0;
const SAME_POSE_RUNTIME: Duration = Duration::from_secs(15 * 60);

const CROSS_POSE_SEEDS: u64 = 5;
const CROSS_POSE_REQUIRED: usize = 4;

const STREAM_SECONDS: f64 = 60.0;
const STREAM_LIMIT_MS: f64 = 70.0;
const STREAM_P99_TARGET_MS: f64 = 5.0;

const SEGMENT_MAX_LEN: usize = 500;

/// Epochs for the experiment analogues.
const EPOCHS: usize = 10;
/// Events per (gesture, direction) pair in every generated session.
const REPEATS: usize = 4;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

type Criterion = (u32, &'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        (1, "stft matches dft oracle", stft_oracle),
        (2, "gradient check", gradients),
        (3, "metric oracle", metric_oracle),
        (4, "pose-1 experiment", same_pose),
        (5, "cross-pose trend", cross_pose),
        (6, "real-time budget", realtime),
        (7, "majority vote", vote_cases),
        (8, "segmentation count", segmentation),
        (9, "determinism", determinism),
        (10, "shape audit", shape_audit),
    ];
    let only: Option<Vec<u32>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|p| p.trim().parse().ok()).collect());
    let mut failed = Vec::new();
    let mut out = std::io::stdout();
    for (id, name, run) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let t0 = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(run))
            .unwrap_or_else(|e| Outcome::new(false, format!("panicked: {}", panic_message(&e))));
        let tag = if outcome.pass { "PASS" } else { "FAIL" };
        writeln!(
            out,
            "{tag} criterion {id:>2} {name}: {} [{:.1}s]",
            outcome.detail,
            t0.elapsed().as_secs_f64()
        )
        .unwrap();
        out.flush().unwrap();
        if !outcome.pass {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        writeln!(out, "acceptance: all criteria passed").unwrap();
    } else {
        writeln!(out, "acceptance: failed criteria {failed:?}").unwrap();
        std::process::exit(1);
    }
}

fn panic_message(e: &Box<dyn std::any::Any + Send>) -> String {
    e.downcast_ref::<String>()
        .cloned()
        .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
        .unwrap_or_else(|| "unknown".into())
}

fn random_frames(rng: &mut ChaCha8Rng, len: usize) -> Vec<FeatureFrame> {
    (0..len)
        .map(|_| {
            let ch: Vec<f64> = (0..CHANNELS).map(|_| rng.random_range(-3.0..3.0)).collect();
            FeatureFrame::from_channels(&ch).unwrap()
        })
        .collect()
}

fn stft_oracle() -> Outcome {
    let t0 = Instant::now();
    let cfg = WindowingConfig::default();
    let repr = ReprConfig {
        window: WindowFunction::Rectangular,
        ..ReprConfig::default()
    };
    let plan = StftPlan::new(&cfg, &repr).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    let mut compared = 0usize;
    for _ in 0..STFT_WINDOWS {
        let frames = random_frames(&mut rng, cfg.detect_len);
        let t = build_stft(&frames, &cfg, &plan).unwrap();
        for c in 0..CHANNELS {
            for k in 0..cfg.frame_count() {
                let s = k * cfg.sub_hop;
                let sub: Vec<f64> = frames[s..s + cfg.sub_len].iter().map(|f| f.channel(c)).collect();
                for (b, m) in dft_magnitude_oracle(&sub).unwrap().into_iter().enumerate() {
                    worst = worst.max((t.get(c, b, k) - m).abs());
                    compared += 1;
                }
            }
        }
    }
    let elapsed = t0.elapsed();
    Outcome::new(
        worst <= STFT_TOLERANCE && elapsed < STFT_RUNTIME,
        format!("{compared} bins, max |dev| {worst:.2e} (limit {STFT_TOLERANCE:.0e}), {elapsed:.2?} (limit {STFT_RUNTIME:?})"),
    )
}

fn gradients() -> Outcome {
    let t0 = Instant::now();
    let cfg = WindowingConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut worst: f64 = 0.0;
    let mut skipped = 0;
    let mut checked = 0;
    let mut per_model = Vec::new();
    for name in MODEL_NAMES {
        let mut model_worst: f64 = 0.0;
        for i in 0..GRAD_INPUTS {
            let model = Model::init(ModelSpec::named(name).unwrap(), cfg, ReprConfig::default(), i as u64).unwrap();
            let dims = model.input_dims();
            let data = (0..dims.iter().product())
                .map(|_| rng.random_range(-1.5..1.5))
                .collect();
            let x = Tensor3::from_vec(dims, data, model.representation().axes()).unwrap();
            let label = GestureClass::ALL[i % GestureClass::COUNT];
            let r = grad_check(&model, &x, label).unwrap();
            model_worst = model_worst.max(r.max_rel_error);
            skipped += r.skipped;
            checked += r.checked;
        }
        worst = worst.max(model_worst);
        per_model.push(format!("{name} {model_worst:.1e}"));
    }
    let elapsed = t0.elapsed();
    Outcome::new(
        worst < GRAD_TOLERANCE && elapsed < GRAD_RUNTIME,
        format!(
            "max rel err {worst:.2e} (limit {GRAD_TOLERANCE:.0e}) over {checked} params, {skipped} skipped at kinks, \
             {elapsed:.1?} (limit {GRAD_RUNTIME:?}); {}",
            per_model.join(", ")
        ),
    )
}

/// Random labels built from runs, with back-to-back gesture changes.
fn random_truth(rng: &mut ChaCha8Rng) -> Vec<GestureClass> {
    let len = rng.random_range(1..400);
    let mut out = Vec::with_capacity(len);
    while out.len() < len {
        let class = if rng.random_bool(0.5) {
            GestureClass::NoContact
        } else {
            GestureClass::GESTURES[rng.random_range(0..3)]
        };
        let run = rng.random_range(1..80);
        out.extend(std::iter::repeat(class).take(run));
    }
    out.truncate(len);
    out
}

/// A prediction derived from `gt` by delaying onsets, stretching ends,
/// swapping classes and adding spurious runs.
fn perturbed(rng: &mut ChaCha8Rng, gt: &[GestureClass]) -> Vec<GestureClass> {
    let n = gt.len();
    let mut pred = vec![GestureClass::NoContact; n];
    let mut t = 0;
    while t < n {
        let g = gt[t];
        let s = t;
        while t < n && gt[t] == g {
            t += 1;
        }
        if !g.is_contact() || rng.random_bool(0.1) {
            continue;
        }
        let start = (s + rng.random_range(0..50)).min(n);
        let end = (t as i64 + rng.random_range(-10..50)).clamp(start as i64, n as i64) as usize;
        let class = if rng.random_bool(0.8) {
            g
        } else {
            GestureClass::GESTURES[rng.random_range(0..3)]
        };
        pred[start..end].fill(class);
    }
    for _ in 0..rng.random_range(0..4) {
        let s = rng.random_range(0..n);
        let e = (s + rng.random_range(1..20)).min(n);
        pred[s..e].fill(GestureClass::ALL[rng.random_range(0..4)]);
    }
    pred
}

#[derive(Debug, PartialEq)]
struct OracleCounts {
    tp: usize,
    tn: usize,
    fp: usize,
    fn_: usize,
    tp_gesture: usize,
    per_gesture: [(usize, usize); 3],
    /// `(start, end, dd, rd, detected)` per ground-truth event.
    events: Vec<(usize, usize, Option<usize>, usize, bool)>,
}

/// Brute force: every sample looks up its own event boundaries and checks
/// the detection delay of that event directly.
fn metric_brute_force(gt: &[GestureClass], pred: &[GestureClass], limit: usize) -> OracleCounts {
    let n = gt.len();
    let bounds = |t: usize| {
        let mut s = t;
        while s > 0 && gt[s - 1] == gt[t] {
            s -= 1;
        }
        let mut e = t + 1;
        while e < n && gt[e] == gt[t] {
            e += 1;
        }
        (s, e)
    };
    let first_contact = |s: usize, e: usize| (s..e).find(|&u| pred[u].is_contact()).map(|u| u - s);
    let mut c = OracleCounts {
        tp: 0,
        tn: 0,
        fp: 0,
        fn_: 0,
        tp_gesture: 0,
        per_gesture: [(0, 0); 3],
        events: Vec::new(),
    };
    for t in 0..n {
        if !gt[t].is_contact() {
            if pred[t].is_contact() {
                c.fp += 1;
            } else {
                c.tn += 1;
            }
            continue;
        }
        let (s, e) = bounds(t);
        let detected = first_contact(s, e).is_some_and(|d| d <= limit);
        let slot = &mut c.per_gesture[gt[t].index() - 1];
        if detected && pred[t].is_contact() {
            c.tp += 1;
            slot.0 += 1;
            if pred[t] == gt[t] {
                c.tp_gesture += 1;
            }
        } else {
            c.fn_ += 1;
            slot.1 += 1;
        }
        if t == s {
            let dd = first_contact(s, e);
            let mut rd = 0;
            while e + rd < n && pred[e + rd].is_contact() {
                rd += 1;
            }
            c.events.push((s, e, dd, rd, dd.is_some_and(|d| d <= limit)));
        }
    }
    c
}

fn metric_oracle() -> Outcome {
    let t0 = Instant::now();
    let rate = 200.0;
    let limit = 30;
    let mut rng = ChaCha8Rng::seed_from_u64(37);
    let mut mismatches = 0;
    let mut first = None;
    let (mut events, mut undetected) = (0, 0);
    for case in 0..METRIC_CASES {
        let gt = random_truth(&mut rng);
        let pred = perturbed(&mut rng, &gt);
        let oracle = metric_brute_force(&gt, &pred, limit);
        let contact = contact_metrics(&gt, &pred, rate).unwrap();
        let (tp_gesture, per_gesture) = match gesture_metrics(&gt, &pred, &contact) {
            Ok(g) => (g.tp_gesture, g.per_gesture),
            Err(Error::EmptyTpRegion) => (0, oracle.per_gesture),
            Err(e) => panic!("{e}"),
        };
        let got = OracleCounts {
            tp: contact.tp,
            tn: contact.tn,
            fp: contact.fp,
            fn_: contact.fn_,
            tp_gesture,
            per_gesture,
            events: contact
                .events
                .iter()
                .map(|e| (e.event.start, e.event.end, e.dd_samples, e.rd_samples, e.detected))
                .collect(),
        };
        events += oracle.events.len();
        undetected += oracle.events.iter().filter(|e| !e.4).count();
        if got != oracle {
            mismatches += 1;
            first.get_or_insert(case);
        }
    }
    let elapsed = t0.elapsed();
    Outcome::new(
        mismatches == 0 && elapsed < METRIC_RUNTIME,
        format!(
            "{METRIC_CASES} pairs, {events} events ({undetected} missed or late), {mismatches} mismatches{}, \
             {elapsed:.2?} (limit {METRIC_RUNTIME:?})",
            first.map(|c| format!(" (first at case {c})")).unwrap_or_default()
        ),
    )
}

fn experiment_run(seed: u64) -> RunConfig {
    let mut run = RunConfig::default();
    run.seed = seed;
    run.synth.repeats = REPEATS;
    run.train.epochs = EPOCHS;
    run
}

fn sessions(run: &RunConfig, poses: &[u8], split: Split, count: usize) -> (Vec<SignalSeries>, Vec<SynthConfig>) {
    let mut series = Vec::new();
    let mut configs = Vec::new();
    for &p in poses {
        for i in 0..count {
            let cfg = session_config(run, p, split, i);
            series.push(generate_session(&cfg).unwrap());
            configs.push(cfg);
        }
    }
    (series, configs)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{v:.2}"))
}

fn same_pose() -> Outcome {
    let t0 = Instant::now();
    let mut run = experiment_run(1);
    let (train, train_cfgs) = sessions(&run, &[1], Split::Train, 4);
    let (test, test_cfgs) = sessions(&run, &[1], Split::Test, 2);
    let mut counts = std::collections::BTreeMap::new();
    for e in train_cfgs.iter().chain(&test_cfgs).flat_map(|c| &c.events) {
        *counts.entry((e.gesture, e.direction)).or_insert(0usize) += 1;
    }
    let total: usize = counts.values().sum();
    let balanced = counts.len() == 15 && counts.values().all(|&c| c == total / 15);
    let mut pass = total >= SAME_POSE_MIN_EVENTS && balanced;
    let mut parts = vec![format!("{total} events, balanced {balanced}")];
    for name in ["stft2dcnn", "stt3dcnn"] {
        run.model = name.into();
        let trained = train_on(&run, &train).unwrap();
        let (m, _) = evaluate_model(&trained.model, &test, run.vote).unwrap();
        let ok = m.acc.is_some_and(|a| a >= SAME_POSE_CONTACT_ACC)
            && m.gesture_acc.is_some_and(|a| a >= SAME_POSE_GESTURE_ACC)
            && m.dd_ms.is_some_and(|d| d <= SAME_POSE_MAX_DD_MS);
        pass &= ok;
        parts.push(format!(
            "{name} Acc {} GC-Acc {} DD {} ms",
            fmt_opt(m.acc),
            fmt_opt(m.gesture_acc),
            fmt_opt(m.dd_ms)
        ));
    }
    let elapsed = t0.elapsed();
    pass &= elapsed < SAME_POSE_RUNTIME;
    parts.push(format!(
        "limits Acc>={SAME_POSE_CONTACT_ACC} GC-Acc>={SAME_POSE_GESTURE_ACC} DD<={SAME_POSE_MAX_DD_MS} within {SAME_POSE_RUNTIME:?}"
    ));
    Outcome::new(pass, parts.join("; "))
}

fn cross_pose() -> Outcome {
    const SPECTRAL: [&str; 4] = ["stft2dcnn", "stft3dcnn", "stt2dcnn", "stt3dcnn"];
    const RAW: [&str; 2] = ["rt2dcnn", "rt3dcnn"];
    let mut held = 0;
    let mut lines = Vec::new();
    for seed in 1..=CROSS_POSE_SEEDS {
        let mut run = experiment_run(seed);
        let (train, _) = sessions(&run, &[1, 2, 3], Split::Train, 1);
        let (test, _) = sessions(&run, &[4], Split::Test, 2);
        let mut score = |name: &str| {
            run.model = name.into();
            let trained = train_on(&run, &train).unwrap();
            let (m, _) = evaluate_model(&trained.model, &test, run.vote).unwrap();
            // no true-positive samples: nothing classified correctly
            m.gesture_acc.unwrap_or(0.0)
        };
        let spectral: Vec<f64> = SPECTRAL.iter().map(|n| score(n)).collect();
        let raw: Vec<f64> = RAW.iter().map(|n| score(n)).collect();
        let lowest = spectral.iter().copied().fold(f64::INFINITY, f64::min);
        let highest = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let holds = lowest > highest;
        held += usize::from(holds);
        let fmt = |names: &[&str], v: &[f64]| {
            names
                .iter()
                .zip(v)
                .map(|(n, a)| format!("{n} {a:.1}"))
                .collect::<Vec<_>>()
                .join(" ")
        };
        lines.push(format!(
            "seed {seed} {}: {} | {}",
            if holds { "holds" } else { "breaks" },
            fmt(&SPECTRAL, &spectral),
            fmt(&RAW, &raw)
        ));
    }
    Outcome::new(
        held >= CROSS_POSE_REQUIRED,
        format!(
            "pose-4 GC-Acc, trend held on {held}/{CROSS_POSE_SEEDS} seeds (need {CROSS_POSE_REQUIRED})\n    {}",
            lines.join("\n    ")
        ),
    )
}

fn cli(dir: &Path, args: &[&str]) -> std::process::Output {
    let out = Command::new(BIN)
        .args(args)
        .current_dir(dir)
        .env("TACTILE_REPORT_DIR", dir.join("reports"))
        .output()
        .expect("binary runs");
    assert!(
        out.status.success(),
        "{args:?} exited {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

const SMALL: &str =
    "seed = 5\n[train]\nepochs = 2\n[synth]\nposes = [1]\ntrain_sessions = 1\ntest_sessions = 1\nrepeats = 1\n";

fn realtime() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut run = RunConfig::from_toml(SMALL).unwrap();
    let (mut events, _) = plan_events(&EventPlan::default(), 2, 99);
    events.retain(|e| e.onset_s + e.duration_s <= STREAM_SECONDS - 0.5);
    let mut session = SynthConfig::new(99, STREAM_SECONDS, 1);
    session.events = events;
    run.synth.custom.push(CustomSession {
        split: Split::Test,
        config: session,
    });
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, run.to_toml()).unwrap();
    let cfg = cfg.to_str().unwrap();
    cli(dir.path(), &["gen", "--config", cfg]);
    cli(dir.path(), &["train", "--config", cfg]);
    let log = cli(
        dir.path(),
        &["stream", "--config", cfg, "--session", "data/pose1_test_custom00.csv"],
    );
    let latency = fs::read_to_string(dir.path().join("reports/pose1_test_custom00.latency.csv")).unwrap();
    let ms: Vec<f64> = latency
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    let expected = WindowingConfig::default().window_count((STREAM_SECONDS * 200.0) as usize);
    let max = ms.iter().copied().fold(0.0, f64::max);
    let p99 = percentile(&ms, 99.0);
    let events = String::from_utf8_lossy(&log.stdout)
        .lines()
        .filter(|l| l.starts_with("event"))
        .count();
    Outcome::new(
        ms.len() == expected && max < STREAM_LIMIT_MS,
        format!(
            "{} windows (expected {expected}), {events} streamed events, max {max:.3} ms (limit {STREAM_LIMIT_MS} ms), \
             p99 {p99:.3} ms (target {STREAM_P99_TARGET_MS} ms: {})",
            ms.len(),
            if p99 < STREAM_P99_TARGET_MS { "met" } else { "missed" }
        ),
    )
}

fn vote_cases() -> Outcome {
    let all = GestureClass::ALL;
    let majority = |xs: [GestureClass; 3], prev: GestureClass| {
        all.into_iter()
            .find(|c| xs.iter().filter(|x| *x == c).count() >= 2)
            .unwrap_or(prev)
    };
    let mut cases = 0;
    let mut bad = 0;
    for a in all {
        for b in all {
            for c in all {
                for p in all {
                    cases += 1;
                    bad += usize::from(vote_triple(a, b, c, p) != majority([a, b, c], p));
                }
            }
        }
    }
    let stream = |classes: &[GestureClass]| PredictionStream {
        sample_rate: 200.0,
        windows: classes
            .iter()
            .enumerate()
            .map(|(i, &class)| WindowPrediction {
                start: 14 * i,
                class,
                probs: [0.0; 4],
            })
            .collect(),
    };
    let mut fixed = true;
    for c in all {
        let s = stream(&[c; 12]);
        fixed &= majority_vote(&s).classes() == vec![c; 12];
    }
    // every length-5 stream against the recursive definition
    let mut streams = 0;
    for code in 0..4usize.pow(5) {
        let raw: Vec<GestureClass> = (0..5).map(|i| all[code / 4usize.pow(i) % 4]).collect();
        let mut expect = raw[..2].to_vec();
        for i in 2..5 {
            expect.push(majority([raw[i - 2], raw[i - 1], raw[i]], expect[i - 1]));
        }
        streams += 1;
        bad += usize::from(majority_vote(&stream(&raw)).classes() != expect);
    }
    Outcome::new(
        bad == 0 && fixed && cases == 256,
        format!("{cases} triple cases and {streams} streams, {bad} mismatches, unanimous fixed points {fixed}"),
    )
}

fn segmentation() -> Outcome {
    let cfg = WindowingConfig::default();
    let mut bad = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for len in 0..=SEGMENT_MAX_LEN {
        let enumerated = (0..)
            .step_by(cfg.detect_step)
            .take_while(|s| s + cfg.detect_len <= len)
            .count();
        let formula = ((len as i64 - 28).div_euclid(14) + 1).max(0) as usize;
        let mut agree = enumerated == formula && cfg.window_count(len) == formula;
        if len > 0 {
            let frames = random_frames(&mut rng, len);
            let series =
                SignalSeries::new(200.0, frames, vec![GestureClass::NoContact; len], SeriesMeta::default()).unwrap();
            let starts: Vec<usize> = segment_windows(&series, &cfg)
                .unwrap()
                .iter()
                .map(|w| w.origin.start)
                .collect();
            agree &= starts == (0..formula).map(|i| 14 * i).collect::<Vec<_>>();
        }
        if !agree {
            bad.push(len);
        }
    }
    Outcome::new(
        bad.is_empty(),
        format!("L in 0..={SEGMENT_MAX_LEN}, {} disagreements {bad:?}", bad.len()),
    )
}

fn determinism() -> Outcome {
    let run_once = || {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.toml");
        fs::write(&cfg, SMALL).unwrap();
        let cfg = cfg.to_str().unwrap();
        cli(dir.path(), &["gen", "--config", cfg]);
        cli(dir.path(), &["train", "--config", cfg, "--model", "stt2dcnn"]);
        cli(dir.path(), &["eval", "--config", cfg, "--experiment", "run"]);
        let read = |p: &str| fs::read(dir.path().join(p)).unwrap();
        (
            read("model.bin"),
            read("reports/run.csv"),
            read("reports/run.events.csv"),
            read("model.bin.loss.csv"),
        )
    };
    let (a, b) = (run_once(), run_once());
    let same = [a.0 == b.0, a.1 == b.1, a.2 == b.2, a.3 == b.3];
    Outcome::new(
        same.iter().all(|&s| s),
        format!(
            "model {} bytes identical {}, record identical {}, events identical {}, loss log identical {}",
            a.0.len(),
            same[0],
            same[1],
            same[2],
            same[3]
        ),
    )
}

/// Output extents worked out layer by layer from valid convolution and
/// pooling arithmetic.
fn expected_shapes(spec: &ModelSpec, dims: [usize; 3]) -> Option<Vec<Shape>> {
    let mut out = Vec::new();
    let (mut channels, mut d) = (1, dims);
    let mut flat = None;
    for layer in &spec.layers {
        let shape = match *layer {
            LayerSpec::Conv3d { kernel, filters } => {
                for i in 0..3 {
                    d[i] = d[i].checked_sub(kernel[i])? + 1;
                }
                channels = filters;
                Shape::Volume { channels, dims: d }
            }
            LayerSpec::Pool3d { kernel } => {
                for i in 0..3 {
                    d[i] /= kernel[i];
                }
                Shape::Volume { channels, dims: d }
            }
            LayerSpec::Flatten => {
                flat = Some(channels * d.iter().product::<usize>());
                Shape::Flat(flat?)
            }
            LayerSpec::FullyConnected { outputs } => {
                flat = Some(outputs);
                Shape::Flat(outputs)
            }
        };
        out.push(shape);
    }
    (flat == Some(4)).then_some(out)
}

fn shape_audit() -> Outcome {
    let cfg = WindowingConfig::default();
    let kinds = [
        RepresentationKind::Stft,
        RepresentationKind::Stt,
        RepresentationKind::Rt,
    ];
    let mut pass = true;
    let mut lines = Vec::new();
    for spec in ModelSpec::all() {
        for kind in kinds {
            let dims = kind.dims(&cfg);
            let result = spec.audit(kind, dims);
            if kind == spec.representation {
                let built = Model::init(spec.clone(), cfg, ReprConfig::default(), 0).is_ok();
                match (result, expected_shapes(&spec, dims)) {
                    (Ok(shapes), Some(expected)) => {
                        let got: Vec<Shape> = shapes.iter().map(|s| s.output).collect();
                        let ok = got == expected && built;
                        pass &= ok;
                        let extents: Vec<String> = got.iter().map(|s| s.to_string()).collect();
                        lines.push(format!(
                            "{} {kind}{dims:?}: {}{}",
                            spec.name,
                            extents.join(" "),
                            if ok { "" } else { " MISMATCH" }
                        ));
                    }
                    (r, e) => {
                        pass = false;
                        lines.push(format!("{} {kind}: audit {:?}, expected {:?}", spec.name, r.err(), e));
                    }
                }
            } else {
                let refused = matches!(
                    result,
                    Err(Error::RepresentationMismatch { .. }) | Err(Error::ShapeMismatch(..))
                );
                pass &= refused;
                if !refused {
                    lines.push(format!("{} accepted {kind}", spec.name));
                }
            }
        }
    }
    Outcome::new(
        pass,
        format!(
            "8 paired builds, 16 mismatched pairings refused\n    {}",
            lines.join("\n    ")
        ),
    )
}
