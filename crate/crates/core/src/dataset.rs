//! CSV session files: one row per sample,
//! `t_ms, j1_e, j1_de, j1_tau, j1_tauext, …, j7_tauext, contact, gesture`.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::signal::{
    validate_series, Feature, GestureClass, RawSeries, SeriesMeta, SignalSeries, CHANNELS, FEATURES, JOINTS,
};

pub const COLUMN_COUNT: usize = 1 + CHANNELS + 2;

pub fn header() -> Vec<String> {
    let mut cols = Vec::with_capacity(COLUMN_COUNT);
    cols.push("t_ms".to_string());
    for j in 1..=JOINTS {
        for f in Feature::ALL {
            cols.push(format!("j{j}_{}", f.short_name()));
        }
    }
    cols.push("contact".into());
    cols.push("gesture".into());
    cols
}

pub fn write_series<W: Write>(series: &SignalSeries, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header())?;
    let period = series.period_ms();
    let mut row: Vec<String> = Vec::with_capacity(COLUMN_COUNT);
    for (t, frame) in series.frames().iter().enumerate() {
        row.clear();
        row.push(format!("{}", t as f64 * period));
        row.extend(frame.channels().map(|v| format!("{v}")));
        row.push(u8::from(series.contact_flags()[t]).to_string());
        row.push((series.labels()[t] as u8).to_string());
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

pub fn save_series(series: &SignalSeries, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_series(series, std::io::BufWriter::new(file))
}

/// Parses a session. Joint count is taken from the header so that files with
/// the wrong number of joints are reported as such by validation rather than
/// as a generic parse failure.
pub fn read_series<R: Read>(input: R, nominal_rate_hz: f64, meta: SeriesMeta) -> Result<SignalSeries> {
    let origin = Path::new(if meta.session.is_empty() {
        "<input>"
    } else {
        meta.session.as_str()
    })
    .to_path_buf();
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: origin.clone(),
        line,
        msg,
    };

    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let hdr: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if hdr.first().map(String::as_str) != Some("t_ms") {
        return Err(parse_err(1, "header must start with t_ms".into()));
    }
    let n_cols = hdr.len();
    if n_cols < 3 || hdr[n_cols - 2] != "contact" || hdr[n_cols - 1] != "gesture" {
        return Err(parse_err(1, "header must end with contact,gesture".into()));
    }
    // (joint, feature) for every signal column, in file order
    let mut layout = Vec::with_capacity(n_cols - 3);
    for name in &hdr[1..n_cols - 2] {
        let parsed = name.strip_prefix('j').and_then(|rest| {
            let (j, f) = rest.split_once('_')?;
            let j: usize = j.parse().ok()?;
            let f = Feature::ALL.iter().position(|x| x.short_name() == f)?;
            (j >= 1).then_some((j - 1, f))
        });
        layout.push(parsed.ok_or_else(|| parse_err(1, format!("unrecognized column `{name}`")))?);
    }
    let joints = layout.iter().map(|&(j, _)| j + 1).max().unwrap_or(0);

    let mut raw = RawSeries {
        nominal_rate_hz,
        meta,
        ..Default::default()
    };
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let num = |k: usize| -> Result<f64> {
            rec.get(k)
                .ok_or_else(|| parse_err(line, format!("missing column {}", k + 1)))?
                .parse::<f64>()
                .map_err(|e| parse_err(line, format!("column {}: {e}", hdr[k])))
        };
        raw.timestamps_ms.push(num(0)?);
        let mut frame: Vec<Vec<f64>> = vec![Vec::with_capacity(FEATURES); joints];
        for (k, &(j, _)) in layout.iter().enumerate() {
            frame[j].push(num(k + 1)?);
        }
        raw.frames.push(frame);
        let contact = num(n_cols - 2)?;
        let contact = match contact {
            0.0 => false,
            1.0 => true,
            c => return Err(parse_err(line, format!("contact must be 0 or 1, got {c}"))),
        };
        raw.contact.push(contact);
        let g = num(n_cols - 1)?;
        if g.fract() != 0.0 {
            return Err(parse_err(line, format!("gesture must be an integer, got {g}")));
        }
        raw.labels.push(GestureClass::try_from(g as i64)?);
    }
    validate_series(raw)
}

/// Loads a session file; the pose id is inferred from a `pose<N>` file-name
/// prefix when present.
pub fn load_series(path: &Path, nominal_rate_hz: f64) -> Result<SignalSeries> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let meta = SeriesMeta {
        pose: pose_from_name(&stem),
        session: stem,
    };
    read_series(std::io::BufReader::new(file), nominal_rate_hz, meta)
}

pub fn pose_from_name(name: &str) -> Option<u8> {
    let rest = name.strip_prefix("pose")?;
    let digits: String = rest.chars().take_while(char::is_ascii_digit).collect();
    digits.parse().ok()
}
