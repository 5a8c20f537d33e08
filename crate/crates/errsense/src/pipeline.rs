//! Feature registry and the per-trial pipeline: assembly of the 55-feature
//! vector, calm-baseline relativization, median imputation and
//! standardization with train-only statistics.

use crate::biometrics::{
    blink_rate, eeg_features, gaze_features, hrv_features, rri_from_hr, BandConfig, HrvFeatures,
};
use crate::data::{
    Condition, DataError, EventKind, SampledSignal, SensorKind, SignalPaths, EEG_CHANNELS,
};
use crate::movement::movement_trial_features;
use crate::peaks::{detect_blinks, detect_rri_sequence, DetectorConfig};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("subject mismatch: {0}")]
    SubjectMismatch(String),
    #[error("feature {0} has no non-missing training value")]
    AllMissing(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("unknown feature: {0}")]
    UnknownFeature(String),
    #[error(transparent)]
    Data(#[from] DataError),
}

/// Sensor families contributing features, in registry order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensorGroup {
    /// Chest-strap ECG (interval features from detected beats).
    Ecg,
    /// Wrist-watch heart rate (interval features from rate samples).
    Watch,
    /// Electrooculography (blink rate).
    Eog,
    /// Eye-tracking glasses (gaze statistics).
    Etg,
    /// Headband EEG (per-stream aggregates).
    Eeg,
    /// Wrist accelerometer (movement magnitudes).
    Acc,
    /// Fixed-camera body pose (joint displacement).
    Video,
}

impl SensorGroup {
    pub const ALL: [SensorGroup; 7] = [
        SensorGroup::Ecg,
        SensorGroup::Watch,
        SensorGroup::Eog,
        SensorGroup::Etg,
        SensorGroup::Eeg,
        SensorGroup::Acc,
        SensorGroup::Video,
    ];

    pub fn label(self) -> &'static str {
        match self {
            SensorGroup::Ecg => "ecg",
            SensorGroup::Watch => "watch",
            SensorGroup::Eog => "eog",
            SensorGroup::Etg => "etg",
            SensorGroup::Eeg => "eeg",
            SensorGroup::Acc => "acc",
            SensorGroup::Video => "video",
        }
    }

    pub fn parse(s: &str) -> Option<SensorGroup> {
        SensorGroup::ALL.into_iter().find(|g| g.label() == s)
    }

    /// Biometric groups describe body state; the rest describe movement.
    pub fn is_biometric(self) -> bool {
        !matches!(self, SensorGroup::Acc | SensorGroup::Video)
    }

    /// The raw sensor stream this group's features are computed from.
    pub fn source(self) -> SensorKind {
        match self {
            SensorGroup::Ecg => SensorKind::Ecg,
            SensorGroup::Watch => SensorKind::Hr,
            SensorGroup::Eog => SensorKind::Eog,
            SensorGroup::Etg => SensorKind::Gaze,
            SensorGroup::Eeg => SensorKind::Eeg,
            SensorGroup::Acc => SensorKind::Acc,
            SensorGroup::Video => SensorKind::Pose,
        }
    }
}

/// Ordered catalogue of every feature the pipeline produces.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRegistry {
    names: Vec<String>,
    groups: Vec<SensorGroup>,
}

impl FeatureRegistry {
    /// The full 55-feature registry: 36 biometric + 19 movement slots.
    pub fn standard() -> Self {
        let mut names = Vec::with_capacity(55);
        let mut groups = Vec::with_capacity(55);
        let mut push = |name: String, group: SensorGroup| {
            names.push(name);
            groups.push(group);
        };
        for (prefix, group) in [("ecg", SensorGroup::Ecg), ("watch", SensorGroup::Watch)] {
            push(format!("{prefix}_mean_rri"), group);
            push(format!("{prefix}_lf_power"), group);
            push(format!("{prefix}_hf_power"), group);
            push(format!("{prefix}_lf_hf_ratio"), group);
        }
        push("blink_rate".into(), SensorGroup::Eog);
        for name in [
            "std_gx",
            "std_gy",
            "mean_step",
            "std_step",
            "large_step_rate",
            "visual_intake_ratio",
            "saccade_ratio",
        ] {
            push(name.into(), SensorGroup::Etg);
        }
        for stream in EEG_CHANNELS {
            push(format!("eeg_{stream}_mean"), SensorGroup::Eeg);
            push(format!("eeg_{stream}_std"), SensorGroup::Eeg);
        }
        push("acc_move_mean".into(), SensorGroup::Acc);
        push("acc_move_nograv_mean".into(), SensorGroup::Acc);
        for joint in 0..crate::data::POSE_JOINTS {
            push(crate::movement::pose_feature_name(joint), SensorGroup::Video);
        }
        let registry = FeatureRegistry { names, groups };
        registry.check();
        registry
    }

    /// Cardinality and uniqueness contract, asserted at startup.
    fn check(&self) {
        assert_eq!(self.names.len(), 55, "registry must hold 55 features");
        assert_eq!(self.biometric_count(), 36, "36 biometric features");
        assert_eq!(self.movement_count(), 19, "19 movement features");
        let mut seen = std::collections::BTreeSet::new();
        for name in &self.names {
            assert!(seen.insert(name), "duplicate feature name {name}");
        }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, index: usize) -> &str {
        &self.names[index]
    }

    pub fn group(&self, index: usize) -> SensorGroup {
        self.groups[index]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn group_indices(&self, group: SensorGroup) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.groups[i] == group).collect()
    }

    pub fn biometric_count(&self) -> usize {
        self.groups.iter().filter(|g| g.is_biometric()).count()
    }

    pub fn movement_count(&self) -> usize {
        self.groups.iter().filter(|g| !g.is_biometric()).count()
    }

    /// FNV-1a fingerprint of the ordered names; persisted with scalers to
    /// catch registry drift between fitting and applying.
    pub fn fingerprint(&self) -> String {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for name in &self.names {
            for b in name.bytes().chain(std::iter::once(b'\n')) {
                h ^= b as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        format!("{h:016x}")
    }
}

impl Default for FeatureRegistry {
    fn default() -> Self {
        FeatureRegistry::standard()
    }
}

/// One trial's feature row. `values[i]` is meaningful iff `!missing[i]`;
/// masked slots hold NaN so accidental use is loud.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub trial_id: String,
    pub subject: String,
    pub cycle: u32,
    pub condition: Condition,
    pub values: Vec<f64>,
    pub missing: Vec<bool>,
    /// Slots that could not be relativized (no calm baseline available).
    pub no_baseline: Vec<bool>,
}

impl FeatureVector {
    pub fn empty(
        trial_id: &str,
        subject: &str,
        cycle: u32,
        condition: Condition,
        width: usize,
    ) -> Self {
        FeatureVector {
            trial_id: trial_id.to_string(),
            subject: subject.to_string(),
            cycle,
            condition,
            values: vec![f64::NAN; width],
            missing: vec![true; width],
            no_baseline: vec![false; width],
        }
    }

    pub fn get(&self, index: usize) -> Option<f64> {
        (!self.missing[index]).then(|| self.values[index])
    }

    pub fn set(&mut self, index: usize, value: Option<f64>) {
        match value {
            Some(v) => {
                self.values[index] = v;
                self.missing[index] = false;
            }
            None => {
                self.values[index] = f64::NAN;
                self.missing[index] = true;
            }
        }
    }

    pub fn missing_count(&self) -> usize {
        self.missing.iter().filter(|&&m| m).count()
    }
}

/// Loaded signal bundle of one trial or calm segment.
#[derive(Debug, Clone, Default)]
pub struct TrialSignals {
    pub ecg: Option<SampledSignal>,
    pub hr: Option<SampledSignal>,
    pub eog: Option<SampledSignal>,
    pub gaze: Option<(SampledSignal, Vec<EventKind>)>,
    pub eeg: Option<SampledSignal>,
    pub acc: Option<SampledSignal>,
    pub pose: Option<SampledSignal>,
}

impl TrialSignals {
    /// Loads every sensor that has a path; absent sensors stay `None`.
    pub fn load(paths: &SignalPaths) -> Result<TrialSignals, PipelineError> {
        let mut signals = TrialSignals::default();
        for kind in SensorKind::ALL {
            let Some(path) = paths.get(kind) else { continue };
            match kind {
                SensorKind::Gaze => signals.gaze = Some(crate::data::load_gaze(path)?),
                SensorKind::Ecg => signals.ecg = Some(crate::data::load_sensor(path, kind)?),
                SensorKind::Hr => signals.hr = Some(crate::data::load_sensor(path, kind)?),
                SensorKind::Eog => signals.eog = Some(crate::data::load_sensor(path, kind)?),
                SensorKind::Eeg => signals.eeg = Some(crate::data::load_sensor(path, kind)?),
                SensorKind::Acc => signals.acc = Some(crate::data::load_sensor(path, kind)?),
                SensorKind::Pose => signals.pose = Some(crate::data::load_pose(path)?),
            }
        }
        Ok(signals)
    }
}

/// Settings for turning raw signals into feature values.
#[derive(Debug, Clone, PartialEq)]
pub struct AssembleConfig {
    pub ecg_detector: DetectorConfig,
    pub blink_detector: DetectorConfig,
    pub bands: BandConfig,
}

impl Default for AssembleConfig {
    fn default() -> Self {
        AssembleConfig {
            ecg_detector: DetectorConfig::ecg(),
            blink_detector: DetectorConfig::blink(),
            bands: BandConfig::conventional(),
        }
    }
}

fn fill_hrv(out: &mut FeatureVector, registry: &FeatureRegistry, prefix: &str, hrv: &HrvFeatures) {
    let idx = |suffix: &str| registry.index_of(&format!("{prefix}_{suffix}")).unwrap();
    out.set(idx("mean_rri"), hrv.mean_rri);
    out.set(idx("lf_power"), hrv.lf_power);
    out.set(idx("hf_power"), hrv.hf_power);
    out.set(idx("lf_hf_ratio"), hrv.lf_hf_ratio);
}

/// Computes one trial's feature vector. Every failure downstream of a present
/// sensor (too-short signal, no detectable beats, ...) degrades to missing
/// slots rather than an error; absent sensors leave their group missing.
pub fn assemble(
    trial_id: &str,
    subject: &str,
    cycle: u32,
    condition: Condition,
    signals: &TrialSignals,
    large_step_threshold: Option<f64>,
    registry: &FeatureRegistry,
    cfg: &AssembleConfig,
) -> FeatureVector {
    let mut out = FeatureVector::empty(trial_id, subject, cycle, condition, registry.len());

    if let Some(ecg) = &signals.ecg {
        if let Ok(rri) = detect_rri_sequence(ecg, &cfg.ecg_detector) {
            if let Ok(hrv) = hrv_features(&rri, &cfg.bands) {
                fill_hrv(&mut out, registry, "ecg", &hrv);
            }
        }
    }
    if let Some(hr) = &signals.hr {
        if let Ok(rri) = rri_from_hr(hr) {
            if let Ok(hrv) = hrv_features(&rri, &cfg.bands) {
                fill_hrv(&mut out, registry, "watch", &hrv);
            }
        }
    }
    if let Some(eog) = &signals.eog {
        if let Ok(blinks) = detect_blinks(eog, &cfg.blink_detector) {
            let rate = blink_rate(&blinks, eog.duration());
            out.set(registry.index_of("blink_rate").unwrap(), Some(rate));
        }
    }
    if let Some((gaze, events)) = &signals.gaze {
        let threshold = large_step_threshold.unwrap_or(f64::INFINITY);
        if let Ok(g) = gaze_features(gaze, events, threshold) {
            let mut put = |name: &str, v: f64| {
                out.set(registry.index_of(name).unwrap(), Some(v));
            };
            put("std_gx", g.std_gx);
            put("std_gy", g.std_gy);
            put("mean_step", g.mean_step);
            put("std_step", g.std_step);
            put("visual_intake_ratio", g.visual_intake_ratio);
            put("saccade_ratio", g.saccade_ratio);
            // Without a calm-derived threshold the large-step count is
            // meaningless, so the slot stays missing.
            let idx = registry.index_of("large_step_rate").unwrap();
            out.set(idx, large_step_threshold.map(|_| g.large_step_rate));
        }
    }
    if let Some(eeg) = &signals.eeg {
        if let Ok(f) = eeg_features(eeg) {
            for (c, stream) in EEG_CHANNELS.iter().enumerate() {
                let mean_idx = registry.index_of(&format!("eeg_{stream}_mean")).unwrap();
                let std_idx = registry.index_of(&format!("eeg_{stream}_std")).unwrap();
                out.set(mean_idx, Some(f.means[c]));
                out.set(std_idx, Some(f.stds[c]));
            }
        }
    }
    // Acceleration and pose are extracted independently so one bad stream
    // does not mask the other.
    if let Ok(m) = movement_trial_features(signals.acc.as_ref(), None) {
        for (name, value) in m.named().into_iter().take(2) {
            out.set(registry.index_of(&name).unwrap(), value);
        }
    }
    if let Ok(m) = movement_trial_features(None, signals.pose.as_ref()) {
        for (name, value) in m.named().into_iter().skip(2) {
            out.set(registry.index_of(&name).unwrap(), value);
        }
    }
    out
}

/// Mean of the two middle order statistics; the standard even-count rule.
pub(crate) fn median(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty(), "median of empty slice");
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Large-step threshold for one subject: twice the median inter-sample gaze
/// step over the calm recordings. `None` without at least two calm samples.
pub fn calm_step_threshold(calm_gaze: &[&SampledSignal]) -> Option<f64> {
    let mut steps = Vec::new();
    for gaze in calm_gaze {
        let (gx, gy) = (gaze.channel("gx")?, gaze.channel("gy")?);
        for i in 1..gx.len() {
            steps.push(((gx[i] - gx[i - 1]).powi(2) + (gy[i] - gy[i - 1]).powi(2)).sqrt());
        }
    }
    if steps.is_empty() {
        None
    } else {
        Some(2.0 * median(&mut steps))
    }
}

/// Per-subject calm-state reference values.
#[derive(Debug, Clone, PartialEq)]
pub struct CalmBaseline {
    pub subject: String,
    /// Per-feature mean over the calm windows; `None` where no window
    /// produced a value.
    pub means: Vec<Option<f64>>,
    /// Calm-derived gaze threshold, shared with trial assembly.
    pub large_step_threshold: Option<f64>,
}

/// Averages calm-window feature vectors into a baseline. All windows must
/// belong to one subject.
pub fn calm_baseline(
    windows: &[FeatureVector],
    large_step_threshold: Option<f64>,
) -> Result<CalmBaseline, PipelineError> {
    let first = windows.first().ok_or_else(|| {
        PipelineError::Shape("calm baseline needs at least one window".to_string())
    })?;
    let width = first.values.len();
    for w in windows {
        if w.subject != first.subject {
            return Err(PipelineError::SubjectMismatch(format!(
                "calm windows mix subjects {} and {}",
                first.subject, w.subject
            )));
        }
    }
    let means = (0..width)
        .map(|i| {
            let present: Vec<f64> = windows.iter().filter_map(|w| w.get(i)).collect();
            if present.is_empty() {
                None
            } else {
                Some(present.iter().sum::<f64>() / present.len() as f64)
            }
        })
        .collect();
    Ok(CalmBaseline {
        subject: first.subject.clone(),
        means,
        large_step_threshold,
    })
}

/// Feature preprocessing mode: raw values or deviation from the calm state.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelativizeMode {
    Absolute,
    #[default]
    Relative,
}

/// Subtracts the subject's calm baseline per feature. Missing values stay
/// missing; features without a baseline pass through unchanged and are
/// flagged in `no_baseline`.
pub fn relativize(v: &FeatureVector, b: &CalmBaseline) -> Result<FeatureVector, PipelineError> {
    if v.subject != b.subject {
        return Err(PipelineError::SubjectMismatch(format!(
            "trial {} belongs to {}, baseline to {}",
            v.trial_id, v.subject, b.subject
        )));
    }
    if v.values.len() != b.means.len() {
        return Err(PipelineError::Shape(format!(
            "vector has {} slots, baseline {}",
            v.values.len(),
            b.means.len()
        )));
    }
    let mut out = v.clone();
    for i in 0..v.values.len() {
        match (v.get(i), b.means[i]) {
            (Some(value), Some(mean)) => out.set(i, Some(value - mean)),
            (Some(_), None) => out.no_baseline[i] = true,
            (None, _) => {}
        }
    }
    Ok(out)
}

/// Replaces missing slots in both sets with per-feature training medians.
/// Returns the imputed copies and the median row.
pub fn impute(
    train: &[FeatureVector],
    apply: &[FeatureVector],
    registry: &FeatureRegistry,
) -> Result<(Vec<FeatureVector>, Vec<FeatureVector>, Vec<f64>), PipelineError> {
    let width = registry.len();
    let mut medians = Vec::with_capacity(width);
    for i in 0..width {
        let mut present: Vec<f64> = train.iter().filter_map(|v| v.get(i)).collect();
        if present.is_empty() {
            return Err(PipelineError::AllMissing(registry.name(i).to_string()));
        }
        medians.push(median(&mut present));
    }
    let fill = |set: &[FeatureVector]| {
        set.iter()
            .map(|v| {
                let mut out = v.clone();
                for i in 0..width {
                    if out.missing[i] {
                        out.set(i, Some(medians[i]));
                    }
                }
                out
            })
            .collect::<Vec<_>>()
    };
    Ok((fill(train), fill(apply), medians))
}

/// Fitted preprocessing statistics: training medians for imputation and
/// training mean/std for standardization, tied to a registry fingerprint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub registry_hash: String,
    pub medians: Vec<f64>,
    pub means: Vec<f64>,
    /// Population standard deviations; constant features store 1 so the
    /// transform is the identity shift.
    pub stds: Vec<f64>,
}

impl Scaler {
    /// Fits medians, means and stds on the training set only.
    pub fn fit(train: &[FeatureVector], registry: &FeatureRegistry) -> Result<Scaler, PipelineError> {
        let (train_filled, _, medians) = impute(train, &[], registry)?;
        let width = registry.len();
        let n = train_filled.len() as f64;
        let mut means = Vec::with_capacity(width);
        let mut stds = Vec::with_capacity(width);
        for i in 0..width {
            let mean = train_filled.iter().map(|v| v.values[i]).sum::<f64>() / n;
            let var = train_filled
                .iter()
                .map(|v| (v.values[i] - mean).powi(2))
                .sum::<f64>()
                / n;
            means.push(mean);
            stds.push(if var.sqrt() > 0.0 { var.sqrt() } else { 1.0 });
        }
        Ok(Scaler {
            registry_hash: registry.fingerprint(),
            medians,
            means,
            stds,
        })
    }

    /// Imputes then standardizes one vector with the fitted statistics.
    pub fn transform(&self, v: &FeatureVector) -> FeatureVector {
        let mut out = v.clone();
        for i in 0..self.means.len() {
            let value = v.get(i).unwrap_or(self.medians[i]);
            out.set(i, Some((value - self.means[i]) / self.stds[i]));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scaler serializes")
    }

    pub fn from_json(s: &str) -> Result<Scaler, serde_json::Error> {
        serde_json::from_str(s)
    }
}

/// Imputes and standardizes both sets with training-set statistics only,
/// returning the transformed sets and the fitted scaler.
pub fn standardize(
    train: &[FeatureVector],
    apply: &[FeatureVector],
    registry: &FeatureRegistry,
) -> Result<(Vec<FeatureVector>, Vec<FeatureVector>, Scaler), PipelineError> {
    let scaler = Scaler::fit(train, registry)?;
    let t = train.iter().map(|v| scaler.transform(v)).collect();
    let a = apply.iter().map(|v| scaler.transform(v)).collect();
    Ok((t, a, scaler))
}

/// Writes feature rows in wide form: `trial,subject,cycle,condition` then one
/// column per registry feature; missing values are empty cells.
pub fn write_features_csv(
    path: &Path,
    vectors: &[FeatureVector],
    registry: &FeatureRegistry,
) -> Result<(), PipelineError> {
    let mut out = String::new();
    out.push_str("trial,subject,cycle,condition");
    for name in registry.names() {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for v in vectors {
        write!(
            out,
            "{},{},{},{}",
            v.trial_id,
            v.subject,
            v.cycle,
            v.condition.label()
        )
        .unwrap();
        for i in 0..registry.len() {
            out.push(',');
            if let Some(value) = v.get(i) {
                write!(out, "{value}").unwrap();
            }
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|source| {
        PipelineError::Data(DataError::Io {
            path: path.to_path_buf(),
            source,
        })
    })
}

/// Reads a wide-form feature file whose columns must match the registry.
pub fn read_features_csv(
    path: &Path,
    registry: &FeatureRegistry,
) -> Result<Vec<FeatureVector>, PipelineError> {
    let content = std::fs::read_to_string(path).map_err(|source| {
        PipelineError::Data(DataError::Io {
            path: path.to_path_buf(),
            source,
        })
    })?;
    let parse_err = |line: usize, message: String| {
        PipelineError::Data(DataError::Parse {
            path: path.to_path_buf(),
            line,
            message,
        })
    };
    let mut lines = content.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty file".to_string()))?;
    let cols: Vec<&str> = header.split(',').collect();
    let expected: Vec<&str> = ["trial", "subject", "cycle", "condition"]
        .into_iter()
        .chain(registry.names().iter().map(String::as_str))
        .collect();
    if cols != expected {
        return Err(parse_err(1, format!("unexpected header {header:?}")));
    }
    let mut vectors = Vec::new();
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let line_no = idx + 1;
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != expected.len() {
            return Err(parse_err(
                line_no,
                format!("expected {} cells, found {}", expected.len(), cells.len()),
            ));
        }
        let cycle: u32 = cells[2]
            .parse()
            .map_err(|e| parse_err(line_no, format!("bad cycle: {e}")))?;
        let condition = Condition::parse(cells[3])
            .ok_or_else(|| parse_err(line_no, format!("bad condition {:?}", cells[3])))?;
        let mut v = FeatureVector::empty(cells[0], cells[1], cycle, condition, registry.len());
        for i in 0..registry.len() {
            let cell = cells[4 + i];
            if !cell.is_empty() {
                let value: f64 = cell
                    .parse()
                    .map_err(|e| parse_err(line_no, format!("bad value {cell:?}: {e}")))?;
                v.set(i, Some(value));
            }
        }
        vectors.push(v);
    }
    Ok(vectors)
}

/// Writes one trial's features in long form: `trial,feature,value,missing`.
pub fn write_trial_features_long(
    path: &Path,
    v: &FeatureVector,
    registry: &FeatureRegistry,
) -> Result<(), PipelineError> {
    let mut out = String::from("trial,feature,value,missing\n");
    for i in 0..registry.len() {
        match v.get(i) {
            Some(value) => {
                writeln!(out, "{},{},{value},0", v.trial_id, registry.name(i)).unwrap()
            }
            None => writeln!(out, "{},{},,1", v.trial_id, registry.name(i)).unwrap(),
        }
    }
    std::fs::write(path, out).map_err(|source| {
        PipelineError::Data(DataError::Io {
            path: path.to_path_buf(),
            source,
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{self, SynthConfig};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn registry_holds_36_biometric_plus_19_movement_features() {
        let registry = FeatureRegistry::standard();
        assert_eq!(registry.len(), 55);
        assert_eq!(registry.biometric_count(), 36);
        assert_eq!(registry.movement_count(), 19);
    }

    #[test]
    fn registry_group_sizes_match_the_sensor_layout() {
        let registry = FeatureRegistry::standard();
        let sizes: Vec<usize> = SensorGroup::ALL
            .iter()
            .map(|&g| registry.group_indices(g).len())
            .collect();
        assert_eq!(sizes, vec![4, 4, 1, 7, 20, 2, 17]);
    }

    #[test]
    fn registry_fingerprint_is_pinned() {
        // Pinned literal: any silent registry edit must trip this test.
        assert_eq!(FeatureRegistry::standard().fingerprint(), "ba78e398369b0e76");
    }

    fn clean_config(duration: f64) -> SynthConfig {
        SynthConfig {
            trial_duration: duration,
            snr_db: None,
            artifact_rate: 0.0,
            ..SynthConfig::default()
        }
    }

    fn full_signals(seed: u64, duration: f64) -> TrialSignals {
        let cfg = clean_config(duration);
        let condition = Condition::Normal;
        let mut rng = synth::rng_stream(seed, "pipeline");
        TrialSignals {
            ecg: Some(synth::gen_ecg(&cfg, condition, &mut rng).unwrap().0),
            hr: Some(synth::gen_hr(&cfg, condition, &mut rng).unwrap()),
            eog: Some(synth::gen_eog(&cfg, condition, &mut rng).unwrap().0),
            gaze: Some(synth::gen_gaze(&cfg, condition, &mut rng).unwrap()),
            eeg: Some(synth::gen_eeg(&cfg, condition, &mut rng).unwrap()),
            acc: Some(synth::gen_acc(&cfg, condition, &mut rng).unwrap()),
            pose: Some(synth::gen_pose(&cfg, condition, &mut rng).unwrap()),
        }
    }

    #[test]
    fn full_sensor_trial_fills_every_slot() {
        let registry = FeatureRegistry::standard();
        let signals = full_signals(1, 90.0);
        let v = assemble(
            "t1",
            "s01",
            1,
            Condition::Normal,
            &signals,
            Some(25.0),
            &registry,
            &AssembleConfig::default(),
        );
        let missing: Vec<&str> = (0..registry.len())
            .filter(|&i| v.missing[i])
            .map(|i| registry.name(i))
            .collect();
        assert!(missing.is_empty(), "missing slots: {missing:?}");
    }

    #[test]
    fn absent_gaze_masks_exactly_the_seven_gaze_slots() {
        let registry = FeatureRegistry::standard();
        let mut signals = full_signals(2, 90.0);
        signals.gaze = None;
        let v = assemble(
            "t1",
            "s01",
            1,
            Condition::Normal,
            &signals,
            Some(25.0),
            &registry,
            &AssembleConfig::default(),
        );
        assert_eq!(v.missing_count(), 7);
        for i in registry.group_indices(SensorGroup::Etg) {
            assert!(v.missing[i]);
        }
    }

    #[test]
    fn absent_pose_masks_exactly_the_seventeen_video_slots() {
        let registry = FeatureRegistry::standard();
        let mut signals = full_signals(3, 90.0);
        signals.pose = None;
        let v = assemble(
            "t1",
            "s01",
            1,
            Condition::Normal,
            &signals,
            Some(25.0),
            &registry,
            &AssembleConfig::default(),
        );
        assert_eq!(v.missing_count(), 17);
        for i in registry.group_indices(SensorGroup::Video) {
            assert!(v.missing[i]);
        }
    }

    #[test]
    fn missing_threshold_masks_only_the_large_step_slot() {
        let registry = FeatureRegistry::standard();
        let signals = full_signals(4, 90.0);
        let v = assemble(
            "t1",
            "s01",
            1,
            Condition::Normal,
            &signals,
            None,
            &registry,
            &AssembleConfig::default(),
        );
        assert_eq!(v.missing_count(), 1);
        assert!(v.missing[registry.index_of("large_step_rate").unwrap()]);
    }

    fn vector_with(values: &[(usize, f64)], subject: &str, width: usize) -> FeatureVector {
        let mut v = FeatureVector::empty("t", subject, 1, Condition::Normal, width);
        for &(i, value) in values {
            v.set(i, Some(value));
        }
        v
    }

    #[test]
    fn relativizing_a_trial_against_itself_yields_zeros() {
        let registry = FeatureRegistry::standard();
        let signals = full_signals(5, 90.0);
        let v = assemble(
            "t1",
            "s01",
            1,
            Condition::Normal,
            &signals,
            Some(25.0),
            &registry,
            &AssembleConfig::default(),
        );
        let baseline = calm_baseline(std::slice::from_ref(&v), Some(25.0)).unwrap();
        let rel = relativize(&v, &baseline).unwrap();
        for i in 0..registry.len() {
            assert_relative_eq!(rel.get(i).unwrap(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn baseline_averages_calm_windows() {
        let a = vector_with(&[(0, 1.0), (1, 10.0)], "s01", 55);
        let b = vector_with(&[(0, 3.0)], "s01", 55);
        let baseline = calm_baseline(&[a, b], None).unwrap();
        assert_eq!(baseline.means[0], Some(2.0));
        // Feature 1 only appears in one window; its mean uses that window.
        assert_eq!(baseline.means[1], Some(10.0));
        assert_eq!(baseline.means[2], None);
    }

    #[test]
    fn baseline_rejects_mixed_subjects() {
        let a = vector_with(&[(0, 1.0)], "s01", 55);
        let b = vector_with(&[(0, 3.0)], "s02", 55);
        let err = calm_baseline(&[a, b], None).unwrap_err();
        assert!(matches!(err, PipelineError::SubjectMismatch(_)), "{err}");
    }

    #[test]
    fn relativize_flags_features_without_baseline() {
        let v = vector_with(&[(0, 5.0), (1, 7.0)], "s01", 55);
        let baseline = calm_baseline(&[vector_with(&[(0, 2.0)], "s01", 55)], None).unwrap();
        let rel = relativize(&v, &baseline).unwrap();
        assert_eq!(rel.get(0), Some(3.0));
        assert_eq!(rel.get(1), Some(7.0));
        assert!(rel.no_baseline[1] && !rel.no_baseline[0]);
    }

    #[test]
    fn relativize_rejects_other_subjects_baseline() {
        let v = vector_with(&[(0, 5.0)], "s01", 55);
        let baseline = calm_baseline(&[vector_with(&[(0, 2.0)], "s02", 55)], None).unwrap();
        let err = relativize(&v, &baseline).unwrap_err();
        assert!(matches!(err, PipelineError::SubjectMismatch(_)), "{err}");
    }

    #[test]
    fn imputation_uses_training_medians_on_both_sets() {
        let registry = FeatureRegistry::standard();
        let train = vec![
            vector_with(&[(0, 1.0)], "s01", 55),
            vector_with(&[(0, 2.0)], "s01", 55),
            vector_with(&[(0, 3.0)], "s01", 55),
        ];
        let mut test_vec = FeatureVector::empty("q", "s02", 1, Condition::Normal, 55);
        test_vec.set(1, Some(9.0));
        let err = impute(&train, &[test_vec.clone()], &registry).unwrap_err();
        // Feature 1 has no training value at all.
        assert!(matches!(err, PipelineError::AllMissing(_)), "{err}");

        let train: Vec<FeatureVector> = train
            .into_iter()
            .map(|mut v| {
                for i in 1..55 {
                    v.set(i, Some(0.0));
                }
                v
            })
            .collect();
        let (train_f, apply_f, medians) = impute(&train, &[test_vec], &registry).unwrap();
        assert_eq!(medians[0], 2.0);
        assert!(train_f.iter().all(|v| v.missing_count() == 0));
        assert_eq!(apply_f[0].get(0), Some(2.0));
        assert_eq!(apply_f[0].get(1), Some(9.0));
    }

    #[test]
    fn even_count_median_averages_the_middle_pair() {
        assert_eq!(median(&mut [1.0, 3.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 3.0, 2.0]), 2.5);
        assert_eq!(median(&mut [5.0]), 5.0);
    }

    #[test]
    fn standardization_maps_a_two_point_feature_to_unit_scores() {
        let registry = FeatureRegistry::standard();
        let make = |x: f64| {
            let mut v = FeatureVector::empty("t", "s", 1, Condition::Normal, 55);
            for i in 0..55 {
                v.set(i, Some(if i == 0 { x } else { 7.0 }));
            }
            v
        };
        let train = vec![make(0.0), make(2.0)];
        let (train_s, _, scaler) = standardize(&train, &[], &registry).unwrap();
        assert_relative_eq!(train_s[0].get(0).unwrap(), -1.0);
        assert_relative_eq!(train_s[1].get(0).unwrap(), 1.0);
        // Constant features fall back to scale 1 and shift to zero.
        assert_relative_eq!(train_s[0].get(5).unwrap(), 0.0);
        assert_eq!(scaler.stds[5], 1.0);
        assert_eq!(scaler.registry_hash, registry.fingerprint());
    }

    #[test]
    fn test_vectors_are_transformed_with_training_statistics_only() {
        let registry = FeatureRegistry::standard();
        let make = |x: f64, subject: &str| {
            let mut v = FeatureVector::empty("t", subject, 1, Condition::Normal, 55);
            for i in 0..55 {
                v.set(i, Some(x + i as f64));
            }
            v
        };
        let train = vec![make(0.0, "a"), make(4.0, "a")];
        let apply = vec![make(10.0, "b")];
        let (_, apply_s, scaler) = standardize(&train, &apply, &registry).unwrap();
        // Train stats per feature i: mean i+2, std 2.
        for i in 0..55 {
            assert_relative_eq!(scaler.means[i], i as f64 + 2.0, max_relative = 1e-12);
            assert_relative_eq!(scaler.stds[i], 2.0, max_relative = 1e-12);
            assert_relative_eq!(apply_s[0].get(i).unwrap(), 4.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn scaler_bytes_ignore_the_apply_set_entirely() {
        let registry = FeatureRegistry::standard();
        let make = |x: f64| {
            let mut v = FeatureVector::empty("t", "s", 1, Condition::Normal, 55);
            for i in 0..55 {
                v.set(i, Some(x * (i + 1) as f64));
            }
            v
        };
        let train = vec![make(1.0), make(2.0), make(3.0)];
        let apply_a = vec![make(100.0)];
        let apply_b: Vec<FeatureVector> = vec![make(-7.0), make(0.0)];
        let (_, _, scaler_a) = standardize(&train, &apply_a, &registry).unwrap();
        let (_, _, scaler_b) = standardize(&train, &apply_b, &registry).unwrap();
        assert_eq!(scaler_a.to_json(), scaler_b.to_json());
    }

    #[test]
    fn wide_csv_round_trips_values_and_missing_mask() {
        let registry = FeatureRegistry::standard();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("features.csv");
        let mut a = FeatureVector::empty("t1", "s01", 1, Condition::Normal, 55);
        let mut b = FeatureVector::empty("t2", "s01", 2, Condition::MultiTask, 55);
        for i in 0..55 {
            if i % 3 != 0 {
                a.set(i, Some(i as f64 * 0.1 - 2.0));
            }
            b.set(i, Some(1.0 / (i + 1) as f64));
        }
        write_features_csv(&path, &[a.clone(), b.clone()], &registry).unwrap();
        let back = read_features_csv(&path, &registry).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].trial_id, "t1");
        assert_eq!(back[1].condition, Condition::MultiTask);
        for i in 0..55 {
            assert_eq!(back[0].get(i), a.get(i));
            assert_eq!(back[1].get(i), b.get(i));
        }
    }

    #[test]
    fn long_csv_lists_all_features_with_missing_marks() {
        let registry = FeatureRegistry::standard();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trial.csv");
        let mut v = FeatureVector::empty("t9", "s01", 1, Condition::TimePressure, 55);
        v.set(0, Some(0.5));
        write_trial_features_long(&path, &v, &registry).unwrap();
        let content = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = content.lines().collect();
        assert_eq!(lines.len(), 56);
        assert_eq!(lines[0], "trial,feature,value,missing");
        assert_eq!(lines[1], "t9,ecg_mean_rri,0.5,0");
        assert!(lines[2].ends_with(",,1"));
    }

    #[test]
    fn calm_step_threshold_doubles_the_median_step() {
        let gaze = SampledSignal::new(
            0.0,
            60.0,
            vec!["gx".to_string(), "gy".to_string()],
            vec![vec![0.0, 3.0, 3.0, 10.0], vec![0.0, 4.0, 4.0, 4.0]],
        );
        // Steps: 5, 0, 7 -> median 5 -> threshold 10.
        let t = calm_step_threshold(&[&gaze]).unwrap();
        assert_relative_eq!(t, 10.0);
        assert_eq!(calm_step_threshold(&[]), None);
    }

    proptest! {
        #[test]
        fn standardized_training_features_have_zero_mean_unit_std(
            seed in 0u64..500,
            rows in 3usize..12
        ) {
            let registry = FeatureRegistry::standard();
            let mut rng = synth::rng_stream(seed, "stdprop");
            let train: Vec<FeatureVector> = (0..rows)
                .map(|r| {
                    let mut v = FeatureVector::empty(
                        &format!("t{r}"), "s", 1, Condition::Normal, 55);
                    for i in 0..55 {
                        v.set(i, Some(rand::Rng::gen_range(&mut rng, -5.0..5.0)));
                    }
                    v
                })
                .collect();
            let (train_s, _, _) = standardize(&train, &[], &registry).unwrap();
            for i in 0..55 {
                let col: Vec<f64> = train_s.iter().map(|v| v.get(i).unwrap()).collect();
                let mean = col.iter().sum::<f64>() / col.len() as f64;
                let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>()
                    / col.len() as f64;
                prop_assert!(mean.abs() <= 1e-10, "feature {i} mean {mean}");
                prop_assert!((var.sqrt() - 1.0).abs() <= 1e-8, "feature {i} std {}", var.sqrt());
            }
        }

        #[test]
        fn imputation_never_touches_present_values(
            seed in 0u64..500
        ) {
            let registry = FeatureRegistry::standard();
            let mut rng = synth::rng_stream(seed, "impprop");
            let make = |rng: &mut rand_chacha::ChaCha8Rng, id: usize| {
                let mut v = FeatureVector::empty(
                    &format!("t{id}"), "s", 1, Condition::Normal, 55);
                for i in 0..55 {
                    // Always present in row 0 so no feature is all-missing.
                    if id == 0 || rand::Rng::gen_bool(rng, 0.8) {
                        v.set(i, Some(rand::Rng::gen_range(rng, -5.0..5.0)));
                    }
                }
                v
            };
            let train: Vec<FeatureVector> = (0..5).map(|id| make(&mut rng, id)).collect();
            let (filled, _, _) = impute(&train, &[], &registry).unwrap();
            for (orig, new) in train.iter().zip(&filled) {
                prop_assert_eq!(new.missing_count(), 0);
                for i in 0..55 {
                    if let Some(value) = orig.get(i) {
                        prop_assert_eq!(new.get(i), Some(value));
                    }
                }
            }
        }
    }
}
