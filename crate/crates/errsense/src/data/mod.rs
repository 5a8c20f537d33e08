//! Domain types shared by every stage: sampled signals, event streams,
//! trials, calm segments and the dataset manifest.

mod io;

pub use io::{
    load_events, load_gaze, load_manifest, load_pose, load_sensor, load_signal, pose_channel,
    pose_channels, save_manifest, write_events, write_gaze, write_pose, write_signal, EEG_CHANNELS,
};

use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Number of tracked joints in a body-pose stream.
pub const POSE_JOINTS: usize = 17;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error in {path} line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("channel mismatch in {path}: expected {expected:?}, found {found:?}")]
    ChannelMismatch {
        path: PathBuf,
        expected: Vec<String>,
        found: Vec<String>,
    },
    #[error("non-uniform sample rate in {path}: {message}")]
    NonUniformRate { path: PathBuf, message: String },
    #[error("unresolved reference: {0}")]
    Reference(String),
    #[error("duplicate trial: {0}")]
    DuplicateTrial(String),
    #[error("joint count error in {path}: {message}")]
    JointCount { path: PathBuf, message: String },
}

/// Uniformly sampled multichannel time series.
///
/// Samples sit on the nominal grid `start_time + i / sample_rate`; ingestion
/// verifies that file timestamps stay within 1% of that grid and then drops
/// the per-row jitter.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSignal {
    pub start_time: f64,
    /// Samples per second, > 0.
    pub sample_rate: f64,
    pub channels: Vec<String>,
    /// Channel-major storage: `values[c][i]`. All channels share one length.
    pub values: Vec<Vec<f64>>,
}

impl SampledSignal {
    pub fn new(
        start_time: f64,
        sample_rate: f64,
        channels: Vec<String>,
        values: Vec<Vec<f64>>,
    ) -> Self {
        assert!(sample_rate > 0.0, "sample rate must be positive");
        assert_eq!(channels.len(), values.len(), "one value column per channel");
        if let Some(first) = values.first() {
            assert!(
                values.iter().all(|v| v.len() == first.len()),
                "all channels must share one length"
            );
        }
        SampledSignal {
            start_time,
            sample_rate,
            channels,
            values,
        }
    }

    /// Number of samples per channel.
    pub fn len(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Covered timespan in seconds (`len / rate`).
    pub fn duration(&self) -> f64 {
        self.len() as f64 / self.sample_rate
    }

    pub fn time_at(&self, index: usize) -> f64 {
        self.start_time + index as f64 / self.sample_rate
    }

    /// Timestamp of the last sample, if any.
    pub fn end_time(&self) -> Option<f64> {
        if self.is_empty() {
            None
        } else {
            Some(self.time_at(self.len() - 1))
        }
    }

    pub fn channel(&self, name: &str) -> Option<&[f64]> {
        self.channels
            .iter()
            .position(|c| c == name)
            .map(|i| self.values[i].as_slice())
    }
}

/// Labels for discrete eye and beat events.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    VisualIntake,
    Saccade,
    Blink,
    RPeak,
    Other,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::VisualIntake => "VISUAL_INTAKE",
            EventKind::Saccade => "SACCADE",
            EventKind::Blink => "BLINK",
            EventKind::RPeak => "RPEAK",
            EventKind::Other => "OTHER",
        }
    }

    pub fn parse(s: &str) -> Option<EventKind> {
        match s {
            "VISUAL_INTAKE" => Some(EventKind::VisualIntake),
            "SACCADE" => Some(EventKind::Saccade),
            "BLINK" => Some(EventKind::Blink),
            "RPEAK" => Some(EventKind::RPeak),
            "OTHER" => Some(EventKind::Other),
            _ => None,
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Timestamped labelled events; timestamps strictly increasing.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventSeries {
    pub times: Vec<f64>,
    pub kinds: Vec<EventKind>,
}

impl EventSeries {
    pub fn new() -> Self {
        EventSeries::default()
    }

    pub fn push(&mut self, time: f64, kind: EventKind) {
        if let Some(&last) = self.times.last() {
            assert!(time > last, "event times must be strictly increasing");
        }
        self.times.push(time);
        self.kinds.push(kind);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Task load applied during a trial.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    #[default]
    Normal,
    TimePressure,
    MultiTask,
}

impl Condition {
    pub const ALL: [Condition; 3] = [
        Condition::Normal,
        Condition::TimePressure,
        Condition::MultiTask,
    ];

    /// Fixed class index used by confusion matrices.
    pub fn index(self) -> usize {
        match self {
            Condition::Normal => 0,
            Condition::TimePressure => 1,
            Condition::MultiTask => 2,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Condition::Normal => "normal",
            Condition::TimePressure => "time_pressure",
            Condition::MultiTask => "multi_task",
        }
    }

    pub fn parse(s: &str) -> Option<Condition> {
        match s {
            "normal" => Some(Condition::Normal),
            "time_pressure" => Some(Condition::TimePressure),
            "multi_task" => Some(Condition::MultiTask),
            _ => None,
        }
    }
}

/// Sensors a trial may carry. Absent sensors have no file at all.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensorKind {
    Ecg,
    Eog,
    Hr,
    Acc,
    Gaze,
    Eeg,
    Pose,
}

impl SensorKind {
    pub const ALL: [SensorKind; 7] = [
        SensorKind::Ecg,
        SensorKind::Eog,
        SensorKind::Hr,
        SensorKind::Acc,
        SensorKind::Gaze,
        SensorKind::Eeg,
        SensorKind::Pose,
    ];

    pub fn label(self) -> &'static str {
        match self {
            SensorKind::Ecg => "ecg",
            SensorKind::Eog => "eog",
            SensorKind::Hr => "hr",
            SensorKind::Acc => "acc",
            SensorKind::Gaze => "gaze",
            SensorKind::Eeg => "eeg",
            SensorKind::Pose => "pose",
        }
    }
}

/// Per-sensor file paths of one recording. `None` means the sensor was not worn.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SignalPaths {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ecg: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eog: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hr: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub acc: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gaze: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eeg: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pose: Option<PathBuf>,
}

impl SignalPaths {
    pub fn get(&self, kind: SensorKind) -> Option<&Path> {
        let p = match kind {
            SensorKind::Ecg => &self.ecg,
            SensorKind::Eog => &self.eog,
            SensorKind::Hr => &self.hr,
            SensorKind::Acc => &self.acc,
            SensorKind::Gaze => &self.gaze,
            SensorKind::Eeg => &self.eeg,
            SensorKind::Pose => &self.pose,
        };
        p.as_deref()
    }

    pub fn set(&mut self, kind: SensorKind, path: PathBuf) {
        let slot = match kind {
            SensorKind::Ecg => &mut self.ecg,
            SensorKind::Eog => &mut self.eog,
            SensorKind::Hr => &mut self.hr,
            SensorKind::Acc => &mut self.acc,
            SensorKind::Gaze => &mut self.gaze,
            SensorKind::Eeg => &mut self.eeg,
            SensorKind::Pose => &mut self.pose,
        };
        *slot = Some(path);
    }

    /// Sensors with a path, in `SensorKind::ALL` order.
    pub fn present(&self) -> Vec<SensorKind> {
        SensorKind::ALL
            .iter()
            .copied()
            .filter(|&k| self.get(k).is_some())
            .collect()
    }

    pub fn is_empty(&self) -> bool {
        self.present().is_empty()
    }

    fn map_paths(&mut self, f: impl Fn(&Path) -> PathBuf) {
        for kind in SensorKind::ALL {
            if let Some(p) = self.get(kind) {
                let mapped = f(p);
                self.set(kind, mapped);
            }
        }
    }
}

/// One recorded task execution under a single condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub id: String,
    pub subject: String,
    /// 1-based index of the measurement cycle this trial belongs to.
    pub cycle: u32,
    pub condition: Condition,
    pub signals: SignalPaths,
    /// Id of the calm segment used as this trial's baseline.
    pub calm: String,
}

/// Task-free recording used as a subject's baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalmSegment {
    pub id: String,
    pub subject: String,
    pub signals: SignalPaths,
}

/// Index of a dataset on disk. Signal paths are stored relative to the
/// manifest file and rebased to absolute paths on load.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub subjects: Vec<String>,
    pub calm: Vec<CalmSegment>,
    pub trials: Vec<Trial>,
}

impl DatasetManifest {
    /// Checks referential integrity: calm references resolve to the same
    /// subject, ids are unique, and no (subject, cycle, condition) repeats.
    pub fn validate(&self) -> Result<(), DataError> {
        let mut calm_ids = std::collections::BTreeMap::new();
        for seg in &self.calm {
            if calm_ids.insert(seg.id.clone(), seg.subject.clone()).is_some() {
                return Err(DataError::DuplicateTrial(format!(
                    "calm segment id {} appears twice",
                    seg.id
                )));
            }
        }
        let mut trial_ids = std::collections::BTreeSet::new();
        let mut triples = std::collections::BTreeSet::new();
        for trial in &self.trials {
            if !trial_ids.insert(trial.id.clone()) {
                return Err(DataError::DuplicateTrial(format!(
                    "trial id {} appears twice",
                    trial.id
                )));
            }
            let triple = (trial.subject.clone(), trial.cycle, trial.condition);
            if !triples.insert(triple) {
                return Err(DataError::DuplicateTrial(format!(
                    "subject {} cycle {} condition {} recorded twice",
                    trial.subject,
                    trial.cycle,
                    trial.condition.label()
                )));
            }
            match calm_ids.get(&trial.calm) {
                None => {
                    return Err(DataError::Reference(format!(
                        "trial {} references unknown calm segment {}",
                        trial.id, trial.calm
                    )))
                }
                Some(subject) if *subject != trial.subject => {
                    return Err(DataError::Reference(format!(
                        "trial {} (subject {}) references calm segment {} of subject {}",
                        trial.id, trial.subject, trial.calm, subject
                    )))
                }
                Some(_) => {}
            }
        }
        Ok(())
    }

    pub fn calm_segment(&self, id: &str) -> Option<&CalmSegment> {
        self.calm.iter().find(|s| s.id == id)
    }

    pub fn calm_for_subject(&self, subject: &str) -> Vec<&CalmSegment> {
        self.calm.iter().filter(|s| s.subject == subject).collect()
    }

    /// Sorts trials by (subject, cycle, condition) and calm segments by id so
    /// downstream enumeration does not depend on file order.
    pub fn normalize_order(&mut self) {
        self.trials
            .sort_by(|a, b| (&a.subject, a.cycle, a.condition).cmp(&(&b.subject, b.cycle, b.condition)));
        self.calm.sort_by(|a, b| a.id.cmp(&b.id));
    }
}

/// Outcome of checking one trial's files on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialReport {
    pub trial_id: String,
    /// Sensors with no path in the manifest.
    pub missing: Vec<SensorKind>,
    /// Hard problems: referenced files that do not exist.
    pub errors: Vec<String>,
}

impl TrialReport {
    /// A trial is usable when at least one sensor is present and every
    /// referenced file exists.
    pub fn valid(&self) -> bool {
        self.errors.is_empty() && self.missing.len() < SensorKind::ALL.len()
    }
}

/// Checks that every referenced signal file exists and reports absent sensors.
pub fn validate_trial(id: &str, signals: &SignalPaths) -> TrialReport {
    let mut missing = Vec::new();
    let mut errors = Vec::new();
    for kind in SensorKind::ALL {
        match signals.get(kind) {
            None => missing.push(kind),
            Some(path) => {
                if !path.exists() {
                    errors.push(format!(
                        "{} file {} does not exist",
                        kind.label(),
                        path.display()
                    ));
                }
            }
        }
    }
    TrialReport {
        trial_id: id.to_string(),
        missing,
        errors,
    }
}

/// Beat-interval series with explicit coverage gaps.
///
/// `intervals[i]` spans `(interval_times[i] - intervals[i], interval_times[i])`.
/// Stretches where detection lost track are listed in `dropouts` and excluded
/// from `intervals`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RriSequence {
    /// Detected beat times; empty for interval series derived from rate samples.
    pub peak_times: Vec<f64>,
    pub intervals: Vec<f64>,
    /// Timestamp of each interval's end.
    pub interval_times: Vec<f64>,
    /// (start, end) spans excluded from interval statistics.
    pub dropouts: Vec<(f64, f64)>,
}

impl RriSequence {
    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// First and last interval timestamp.
    pub fn span(&self) -> Option<(f64, f64)> {
        match (self.interval_times.first(), self.interval_times.last()) {
            (Some(&a), Some(&b)) => Some((a, b)),
            _ => None,
        }
    }

    /// Covered span minus dropout overlap, in seconds.
    pub fn usable_span(&self) -> f64 {
        let Some((start, end)) = self.span() else {
            return 0.0;
        };
        let mut span = end - start;
        for &(a, b) in &self.dropouts {
            let overlap = (b.min(end) - a.max(start)).max(0.0);
            span -= overlap;
        }
        span.max(0.0)
    }

    pub fn mean_interval(&self) -> Option<f64> {
        if self.intervals.is_empty() {
            None
        } else {
            Some(self.intervals.iter().sum::<f64>() / self.intervals.len() as f64)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paths_with(kind: SensorKind, path: &str) -> SignalPaths {
        let mut p = SignalPaths::default();
        p.set(kind, PathBuf::from(path));
        p
    }

    fn trial(id: &str, subject: &str, cycle: u32, condition: Condition) -> Trial {
        Trial {
            id: id.to_string(),
            subject: subject.to_string(),
            cycle,
            condition,
            signals: SignalPaths::default(),
            calm: format!("{subject}_calm"),
        }
    }

    fn calm(subject: &str) -> CalmSegment {
        CalmSegment {
            id: format!("{subject}_calm"),
            subject: subject.to_string(),
            signals: SignalPaths::default(),
        }
    }

    #[test]
    fn condition_labels_round_trip() {
        for c in Condition::ALL {
            assert_eq!(Condition::parse(c.label()), Some(c));
        }
        assert_eq!(Condition::parse("bogus"), None);
    }

    #[test]
    fn condition_serde_uses_snake_case() {
        let json = serde_json::to_string(&Condition::TimePressure).unwrap();
        assert_eq!(json, "\"time_pressure\"");
        let back: Condition = serde_json::from_str(&json).unwrap();
        assert_eq!(back, Condition::TimePressure);
    }

    #[test]
    fn manifest_with_no_trials_validates() {
        let manifest = DatasetManifest::default();
        manifest.validate().unwrap();
    }

    #[test]
    fn manifest_rejects_duplicate_triples() {
        let manifest = DatasetManifest {
            subjects: vec!["s01".into()],
            calm: vec![calm("s01")],
            trials: vec![
                trial("t1", "s01", 1, Condition::Normal),
                trial("t2", "s01", 1, Condition::Normal),
            ],
        };
        let err = manifest.validate().unwrap_err();
        assert!(matches!(err, DataError::DuplicateTrial(_)), "{err}");
    }

    #[test]
    fn manifest_rejects_unresolved_calm_reference() {
        let manifest = DatasetManifest {
            subjects: vec!["s01".into()],
            calm: vec![],
            trials: vec![trial("t1", "s01", 1, Condition::Normal)],
        };
        let err = manifest.validate().unwrap_err();
        assert!(matches!(err, DataError::Reference(_)), "{err}");
    }

    #[test]
    fn manifest_rejects_calm_of_other_subject() {
        let mut t = trial("t1", "s01", 1, Condition::Normal);
        t.calm = "s02_calm".to_string();
        let manifest = DatasetManifest {
            subjects: vec!["s01".into(), "s02".into()],
            calm: vec![calm("s02")],
            trials: vec![t],
        };
        let err = manifest.validate().unwrap_err();
        assert!(matches!(err, DataError::Reference(_)), "{err}");
    }

    #[test]
    fn trial_with_no_sensors_is_invalid() {
        let report = validate_trial("t1", &SignalPaths::default());
        assert_eq!(report.missing.len(), SensorKind::ALL.len());
        assert!(!report.valid());
    }

    #[test]
    fn trial_with_dangling_file_is_invalid() {
        let report = validate_trial("t1", &paths_with(SensorKind::Ecg, "/nonexistent/ecg.csv"));
        assert_eq!(report.errors.len(), 1);
        assert!(!report.valid());
    }

    #[test]
    fn usable_span_excludes_dropouts() {
        let rri = RriSequence {
            peak_times: vec![],
            intervals: vec![1.0; 5],
            interval_times: vec![10.0, 11.0, 12.0, 50.0, 51.0],
            dropouts: vec![(12.0, 49.0)],
        };
        assert!((rri.usable_span() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn signal_accessors() {
        let s = SampledSignal::new(
            1.0,
            10.0,
            vec!["value".into()],
            vec![vec![0.0, 1.0, 2.0, 3.0]],
        );
        assert_eq!(s.len(), 4);
        assert!((s.duration() - 0.4).abs() < 1e-12);
        assert!((s.time_at(3) - 1.3).abs() < 1e-12);
        assert_eq!(s.channel("value").unwrap().len(), 4);
        assert!(s.channel("missing").is_none());
    }
}
