//! CSV and manifest ingestion.
//!
//! Signal files are comma-separated with a `t` column first, preceded by an
//! optional `# rate=<hz>` comment declaring the nominal sample rate. Loaded
//! timestamps must stay within 1% of the nominal period; the in-memory signal
//! then keeps only the uniform grid. Values are written with six decimals, so
//! files that already carry six-decimal values round-trip byte-exactly.

use super::{
    DataError, DatasetManifest, EventKind, EventSeries, SampledSignal, SensorKind, POSE_JOINTS,
};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Decimal places used when writing signal files.
const PRECISION: usize = 6;

fn read_file(path: &Path) -> Result<String, DataError> {
    std::fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_file(path: &Path, content: &str) -> Result<(), DataError> {
    std::fs::write(path, content).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn parse_cell(path: &Path, line: usize, cell: &str) -> Result<f64, DataError> {
    let value: f64 = cell.trim().parse().map_err(|_| DataError::Parse {
        path: path.to_path_buf(),
        line,
        message: format!("not a number: {cell:?}"),
    })?;
    if !value.is_finite() {
        return Err(DataError::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("non-finite value: {cell:?}"),
        });
    }
    Ok(value)
}

struct RawCsv<'a> {
    /// Declared nominal sample rate, if a `# rate=` comment is present.
    rate: Option<f64>,
    header: Vec<&'a str>,
    /// (1-based line number, raw line) for every data row.
    rows: Vec<(usize, &'a str)>,
}

fn split_csv<'a>(path: &Path, content: &'a str) -> Result<RawCsv<'a>, DataError> {
    let mut rate = None;
    let mut header = None;
    let mut rows = Vec::new();
    for (idx, line) in content.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(comment) = trimmed.strip_prefix('#') {
            if header.is_none() {
                if let Some((key, value)) = comment.split_once('=') {
                    if key.trim() == "rate" {
                        let r = parse_cell(path, line_no, value)?;
                        if r <= 0.0 {
                            return Err(DataError::Parse {
                                path: path.to_path_buf(),
                                line: line_no,
                                message: format!("rate must be positive, got {r}"),
                            });
                        }
                        rate = Some(r);
                    }
                }
            }
            continue;
        }
        if header.is_none() {
            header = Some(trimmed.split(',').map(str::trim).collect());
        } else {
            rows.push((line_no, trimmed));
        }
    }
    let header = header.ok_or_else(|| DataError::Parse {
        path: path.to_path_buf(),
        line: 1,
        message: "missing header row".to_string(),
    })?;
    Ok(RawCsv { rate, header, rows })
}

/// Validates monotone timestamps against the nominal period (declared rate
/// when present, otherwise the median step) and returns the nominal rate.
/// Any step deviating more than 1% of the period is rejected.
fn check_uniform(path: &Path, times: &[f64], declared: Option<f64>) -> Result<f64, DataError> {
    if times.is_empty() {
        return Err(DataError::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: "no data rows".to_string(),
        });
    }
    if times.len() == 1 {
        return declared.ok_or_else(|| DataError::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: "cannot infer sample rate from a single row".to_string(),
        });
    }
    let mut steps: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
    if let Some((i, &bad)) = steps.iter().enumerate().find(|(_, &d)| d <= 0.0) {
        return Err(DataError::NonUniformRate {
            path: path.to_path_buf(),
            message: format!(
                "timestamps not strictly increasing at sample {} (step {bad})",
                i + 1
            ),
        });
    }
    let period = match declared {
        Some(rate) => 1.0 / rate,
        None => {
            steps.sort_by(|a, b| a.partial_cmp(b).unwrap());
            steps[steps.len() / 2]
        }
    };
    let steps = times.windows(2).map(|w| w[1] - w[0]);
    for (i, step) in steps.enumerate() {
        if (step - period).abs() > 0.01 * period {
            return Err(DataError::NonUniformRate {
                path: path.to_path_buf(),
                message: format!(
                    "step {step} at sample {} deviates more than 1% from nominal period {period}",
                    i + 1
                ),
            });
        }
    }
    Ok(declared.unwrap_or(1.0 / period))
}

fn check_header(path: &Path, found: &[&str], expected: &[&str]) -> Result<(), DataError> {
    if found != expected {
        return Err(DataError::ChannelMismatch {
            path: path.to_path_buf(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: found.iter().map(|s| s.to_string()).collect(),
        });
    }
    Ok(())
}

/// Loads a plain multichannel signal file with columns `t,<channels...>`.
pub fn load_signal(path: &Path, channels: &[&str]) -> Result<SampledSignal, DataError> {
    let content = read_file(path)?;
    let raw = split_csv(path, &content)?;
    let expected: Vec<&str> = std::iter::once("t").chain(channels.iter().copied()).collect();
    check_header(path, &raw.header, &expected)?;
    let mut times = Vec::with_capacity(raw.rows.len());
    let mut values: Vec<Vec<f64>> = vec![Vec::with_capacity(raw.rows.len()); channels.len()];
    for &(line_no, row) in &raw.rows {
        let mut cells = row.split(',');
        let t_cell = cells.next().unwrap_or("");
        times.push(parse_cell(path, line_no, t_cell)?);
        let mut count = 0;
        for (c, cell) in cells.enumerate() {
            if c >= channels.len() {
                break;
            }
            values[c].push(parse_cell(path, line_no, cell)?);
            count += 1;
        }
        if count != channels.len() {
            return Err(DataError::Parse {
                path: path.to_path_buf(),
                line: line_no,
                message: format!("expected {} columns, found fewer", channels.len() + 1),
            });
        }
    }
    let rate = check_uniform(path, &times, raw.rate)?;
    Ok(SampledSignal::new(
        times[0],
        rate,
        channels.iter().map(|s| s.to_string()).collect(),
        values,
    ))
}

fn push_row(out: &mut String, t: f64, cells: &[f64]) {
    write!(out, "{t:.PRECISION$}").unwrap();
    for v in cells {
        write!(out, ",{v:.PRECISION$}").unwrap();
    }
    out.push('\n');
}

fn format_header(out: &mut String, rate: f64, channels: &[&str]) {
    writeln!(out, "# rate={rate}").unwrap();
    out.push('t');
    for c in channels {
        out.push(',');
        out.push_str(c);
    }
    out.push('\n');
}

/// Writes a signal with six-decimal values and a `# rate=` comment.
pub fn write_signal(path: &Path, signal: &SampledSignal) -> Result<(), DataError> {
    let mut out = String::new();
    let channels: Vec<&str> = signal.channels.iter().map(String::as_str).collect();
    format_header(&mut out, signal.sample_rate, &channels);
    let mut row = Vec::with_capacity(signal.channels.len());
    for i in 0..signal.len() {
        row.clear();
        row.extend(signal.values.iter().map(|v| v[i]));
        push_row(&mut out, signal.time_at(i), &row);
    }
    write_file(path, &out)
}

/// Loads a gaze file (`t,gx,gy,event`) into coordinates plus per-sample labels.
pub fn load_gaze(path: &Path) -> Result<(SampledSignal, Vec<EventKind>), DataError> {
    let content = read_file(path)?;
    let raw = split_csv(path, &content)?;
    check_header(path, &raw.header, &["t", "gx", "gy", "event"])?;
    let mut times = Vec::with_capacity(raw.rows.len());
    let mut gx = Vec::with_capacity(raw.rows.len());
    let mut gy = Vec::with_capacity(raw.rows.len());
    let mut events = Vec::with_capacity(raw.rows.len());
    for &(line_no, row) in &raw.rows {
        let cells: Vec<&str> = row.split(',').collect();
        if cells.len() != 4 {
            return Err(DataError::Parse {
                path: path.to_path_buf(),
                line: line_no,
                message: format!("expected 4 columns, found {}", cells.len()),
            });
        }
        times.push(parse_cell(path, line_no, cells[0])?);
        gx.push(parse_cell(path, line_no, cells[1])?);
        gy.push(parse_cell(path, line_no, cells[2])?);
        let label = cells[3].trim();
        events.push(EventKind::parse(label).ok_or_else(|| DataError::Parse {
            path: path.to_path_buf(),
            line: line_no,
            message: format!("unknown event label: {label:?}"),
        })?);
    }
    let rate = check_uniform(path, &times, raw.rate)?;
    let signal = SampledSignal::new(
        times[0],
        rate,
        vec!["gx".to_string(), "gy".to_string()],
        vec![gx, gy],
    );
    Ok((signal, events))
}

/// Writes a gaze file with per-sample event labels.
pub fn write_gaze(
    path: &Path,
    signal: &SampledSignal,
    events: &[EventKind],
) -> Result<(), DataError> {
    assert_eq!(signal.len(), events.len(), "one event label per sample");
    let gx = signal.channel("gx").expect("gaze signal has gx");
    let gy = signal.channel("gy").expect("gaze signal has gy");
    let mut out = String::new();
    format_header(&mut out, signal.sample_rate, &["gx", "gy", "event"]);
    for i in 0..signal.len() {
        let t = signal.time_at(i);
        writeln!(
            out,
            "{t:.PRECISION$},{:.PRECISION$},{:.PRECISION$},{}",
            gx[i], gy[i], events[i]
        )
        .unwrap();
    }
    write_file(path, &out)
}

/// Channel name of one pose coordinate, e.g. `j04_x`.
pub fn pose_channel(joint: usize, axis: usize) -> String {
    let axis_name = ["x", "y", "z"][axis];
    format!("j{joint:02}_{axis_name}")
}

/// Pose channel names in joint-major order, 51 in total.
pub fn pose_channels() -> Vec<String> {
    let mut names = Vec::with_capacity(POSE_JOINTS * 3);
    for joint in 0..POSE_JOINTS {
        for axis in 0..3 {
            names.push(pose_channel(joint, axis));
        }
    }
    names
}

/// Loads a long-format pose file (`t,joint,x,y,z`, joints 0..=16 per frame)
/// into a 51-channel signal in joint-major order.
pub fn load_pose(path: &Path) -> Result<SampledSignal, DataError> {
    let content = read_file(path)?;
    let raw = split_csv(path, &content)?;
    check_header(path, &raw.header, &["t", "joint", "x", "y", "z"])?;
    let joint_err = |line: usize, message: String| DataError::JointCount {
        path: path.to_path_buf(),
        message: format!("line {line}: {message}"),
    };
    let mut times = Vec::new();
    let mut values: Vec<Vec<f64>> = vec![Vec::new(); POSE_JOINTS * 3];
    let mut expected_joint = 0usize;
    let mut frame_t = 0.0f64;
    for &(line_no, row) in &raw.rows {
        let cells: Vec<&str> = row.split(',').collect();
        if cells.len() != 5 {
            return Err(DataError::Parse {
                path: path.to_path_buf(),
                line: line_no,
                message: format!("expected 5 columns, found {}", cells.len()),
            });
        }
        let t = parse_cell(path, line_no, cells[0])?;
        let joint = cells[1].trim().parse::<usize>().map_err(|_| {
            joint_err(line_no, format!("joint must be an integer, got {:?}", cells[1]))
        })?;
        if joint >= POSE_JOINTS {
            return Err(joint_err(
                line_no,
                format!("joint {joint} out of range 0..{POSE_JOINTS}"),
            ));
        }
        if joint != expected_joint {
            return Err(joint_err(
                line_no,
                format!("expected joint {expected_joint}, found {joint}"),
            ));
        }
        if joint == 0 {
            times.push(t);
            frame_t = t;
        } else if t != frame_t {
            return Err(joint_err(
                line_no,
                format!("joint {joint} timestamp {t} differs from frame timestamp {frame_t}"),
            ));
        }
        for axis in 0..3 {
            values[joint * 3 + axis].push(parse_cell(path, line_no, cells[2 + axis])?);
        }
        expected_joint = (expected_joint + 1) % POSE_JOINTS;
    }
    if expected_joint != 0 {
        return Err(joint_err(
            raw.rows.last().map(|r| r.0).unwrap_or(1),
            format!("last frame incomplete: stopped at joint {expected_joint}"),
        ));
    }
    let rate = check_uniform(path, &times, raw.rate)?;
    Ok(SampledSignal::new(
        times.first().copied().unwrap_or(0.0),
        rate,
        pose_channels(),
        values,
    ))
}

/// Writes a 51-channel pose signal in long format.
pub fn write_pose(path: &Path, signal: &SampledSignal) -> Result<(), DataError> {
    assert_eq!(
        signal.channels,
        pose_channels(),
        "pose signal must carry 51 joint-major channels"
    );
    let mut out = String::new();
    format_header(&mut out, signal.sample_rate, &["joint", "x", "y", "z"]);
    for i in 0..signal.len() {
        let t = signal.time_at(i);
        for joint in 0..POSE_JOINTS {
            writeln!(
                out,
                "{t:.PRECISION$},{joint},{:.PRECISION$},{:.PRECISION$},{:.PRECISION$}",
                signal.values[joint * 3][i],
                signal.values[joint * 3 + 1][i],
                signal.values[joint * 3 + 2][i],
            )
            .unwrap();
        }
    }
    write_file(path, &out)
}

/// Loads a `t,kind` event file with strictly increasing timestamps.
pub fn load_events(path: &Path) -> Result<EventSeries, DataError> {
    let content = read_file(path)?;
    let raw = split_csv(path, &content)?;
    check_header(path, &raw.header, &["t", "kind"])?;
    let mut series = EventSeries::new();
    for &(line_no, row) in &raw.rows {
        let cells: Vec<&str> = row.split(',').collect();
        if cells.len() != 2 {
            return Err(DataError::Parse {
                path: path.to_path_buf(),
                line: line_no,
                message: format!("expected 2 columns, found {}", cells.len()),
            });
        }
        let t = parse_cell(path, line_no, cells[0])?;
        let kind = EventKind::parse(cells[1].trim()).ok_or_else(|| DataError::Parse {
            path: path.to_path_buf(),
            line: line_no,
            message: format!("unknown event kind: {:?}", cells[1]),
        })?;
        if series.times.last().is_some_and(|&last| t <= last) {
            return Err(DataError::Parse {
                path: path.to_path_buf(),
                line: line_no,
                message: format!("event times must be strictly increasing, got {t}"),
            });
        }
        series.push(t, kind);
    }
    Ok(series)
}

/// Writes a `t,kind` event file.
pub fn write_events(path: &Path, events: &EventSeries) -> Result<(), DataError> {
    let mut out = String::from("t,kind\n");
    for (t, kind) in events.times.iter().zip(&events.kinds) {
        writeln!(out, "{t:.PRECISION$},{kind}").unwrap();
    }
    write_file(path, &out)
}

/// Loads, validates and normalizes a dataset manifest. Relative signal paths
/// are rebased onto the manifest's directory.
pub fn load_manifest(path: &Path) -> Result<DatasetManifest, DataError> {
    let content = read_file(path)?;
    let mut manifest: DatasetManifest =
        serde_json::from_str(&content).map_err(|e| DataError::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })?;
    manifest.validate()?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let rebase = |p: &Path| -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            base.join(p)
        }
    };
    for trial in &mut manifest.trials {
        trial.signals.map_paths(rebase);
    }
    for seg in &mut manifest.calm {
        seg.signals.map_paths(rebase);
    }
    manifest.normalize_order();
    Ok(manifest)
}

/// Writes a manifest as pretty-printed JSON. Paths are written as stored, so
/// callers that want a relocatable dataset should store relative paths.
pub fn save_manifest(path: &Path, manifest: &DatasetManifest) -> Result<(), DataError> {
    let mut json = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    json.push('\n');
    write_file(path, &json)
}

/// Loads the signal of `kind` from `path` with the schema that sensor uses.
pub fn load_sensor(path: &Path, kind: SensorKind) -> Result<SampledSignal, DataError> {
    match kind {
        SensorKind::Ecg | SensorKind::Eog => load_signal(path, &["value"]),
        SensorKind::Hr => load_signal(path, &["bpm"]),
        SensorKind::Acc => load_signal(path, &["ax", "ay", "az"]),
        SensorKind::Eeg => load_signal(path, &EEG_CHANNELS),
        SensorKind::Pose => load_pose(path),
        SensorKind::Gaze => panic!("use load_gaze for gaze files"),
    }
}

/// EEG stream names in file order.
pub const EEG_CHANNELS: [&str; 10] = [
    "delta",
    "theta",
    "low_alpha",
    "high_alpha",
    "low_beta",
    "high_beta",
    "low_gamma",
    "mid_gamma",
    "attention",
    "meditation",
];
