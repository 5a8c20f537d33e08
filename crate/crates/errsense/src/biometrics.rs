//! Per-trial biometric indices: heart-rate-variability features from beat
//! intervals, blink rate, gaze statistics and EEG aggregates.

use crate::data::{EventKind, EventSeries, RriSequence, SampledSignal};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("not enough data: {0}")]
    InsufficientData(String),
    #[error("channel mismatch: {0}")]
    ChannelMismatch(String),
    #[error("invalid band config: {0}")]
    Config(String),
}

/// Spectral-analysis settings for the beat-interval series.
///
/// The interval series is resampled onto a uniform `grid_rate` grid before the
/// periodogram, so band edges above `grid_rate / 2` contribute nothing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandConfig {
    /// Low-frequency band (lo, hi), Hz; half-open `[lo, hi)`.
    pub lf: (f64, f64),
    /// High-frequency band (lo, hi), Hz; half-open `[lo, hi)`.
    pub hf: (f64, f64),
    /// Uniform resampling rate for the interval series, Hz.
    pub grid_rate: f64,
    /// Minimum usable interval span required for spectral terms, seconds.
    pub min_span: f64,
}

impl Default for BandConfig {
    fn default() -> Self {
        BandConfig::conventional()
    }
}

impl BandConfig {
    /// Standard short-term bands: LF 0.04-0.15 Hz, HF 0.15-0.40 Hz.
    pub fn conventional() -> Self {
        BandConfig {
            lf: (0.04, 0.15),
            hf: (0.15, 0.40),
            grid_rate: 4.0,
            min_span: 60.0,
        }
    }

    pub fn validate(&self) -> Result<(), FeatureError> {
        for (name, (lo, hi)) in [("lf", self.lf), ("hf", self.hf)] {
            if !(lo >= 0.0 && hi > lo) {
                return Err(FeatureError::Config(format!(
                    "{name} band ({lo}, {hi}) must satisfy 0 <= lo < hi"
                )));
            }
        }
        if !(self.grid_rate > 0.0) {
            return Err(FeatureError::Config(format!(
                "grid rate {} must be positive",
                self.grid_rate
            )));
        }
        if !(self.min_span >= 0.0) {
            return Err(FeatureError::Config(format!(
                "min span {} must be nonnegative",
                self.min_span
            )));
        }
        Ok(())
    }
}

/// Band power below which the LF/HF ratio is considered undefined, s^2.
///
/// A perfectly steady interval series leaves rounding residue around 1e-30 in
/// the periodogram; genuine variability lands many orders above this floor.
pub const RATIO_POWER_FLOOR: f64 = 1e-12;

/// Heart-rate-variability summary of one trial. `None` marks a feature whose
/// precondition failed (no intervals, span too short, or vanishing HF power).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct HrvFeatures {
    /// Mean beat interval, seconds.
    pub mean_rri: Option<f64>,
    /// Low-frequency band power, s^2.
    pub lf_power: Option<f64>,
    /// High-frequency band power, s^2.
    pub hf_power: Option<f64>,
    /// LF / HF; missing when HF power is below [`RATIO_POWER_FLOOR`].
    pub lf_hf_ratio: Option<f64>,
}

/// Gaze-behaviour summary of one trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GazeFeatures {
    pub std_gx: f64,
    pub std_gy: f64,
    /// Mean inter-sample gaze distance, pixels.
    pub mean_step: f64,
    pub std_step: f64,
    /// Steps exceeding the threshold, per minute.
    pub large_step_rate: f64,
    /// Fraction of samples labelled as visual intake.
    pub visual_intake_ratio: f64,
    /// Fraction of samples labelled as saccade.
    pub saccade_ratio: f64,
}

/// Per-stream mean and population standard deviation, in
/// [`crate::data::EEG_CHANNELS`] order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EegFeatures {
    pub means: [f64; 10],
    pub stds: [f64; 10],
}

pub(crate) fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Population standard deviation (divisor n, not n-1).
pub(crate) fn population_std(values: &[f64]) -> f64 {
    let m = mean(values);
    (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / values.len() as f64).sqrt()
}

/// Converts a heart-rate signal (bpm) into an interval series: one interval of
/// `60 / bpm` seconds per sample, timestamped at the sample time. No beat
/// times are reconstructed.
pub fn rri_from_hr(hr: &SampledSignal) -> Result<RriSequence, FeatureError> {
    let bpm = hr.channel("bpm").ok_or_else(|| {
        FeatureError::ChannelMismatch(format!(
            "expected a bpm channel, found {:?}",
            hr.channels
        ))
    })?;
    let mut intervals = Vec::with_capacity(bpm.len());
    let mut interval_times = Vec::with_capacity(bpm.len());
    for (i, &v) in bpm.iter().enumerate() {
        if !(v > 0.0) {
            return Err(FeatureError::Domain(format!(
                "heart rate must be positive, got {v} at t={:.3}",
                hr.time_at(i)
            )));
        }
        intervals.push(60.0 / v);
        interval_times.push(hr.time_at(i));
    }
    Ok(RriSequence {
        peak_times: Vec::new(),
        intervals,
        interval_times,
        dropouts: Vec::new(),
    })
}

/// Linearly interpolates the interval series onto a uniform grid.
///
/// The output has an `rri` channel and a `bridged` channel that is 1 where the
/// grid point falls inside a dropout span (the value there is the straight
/// line between the surrounding real intervals).
pub fn resample_rri(rri: &RriSequence, grid_rate: f64) -> Result<SampledSignal, FeatureError> {
    if rri.len() < 2 {
        return Err(FeatureError::InsufficientData(format!(
            "need at least 2 intervals to resample, got {}",
            rri.len()
        )));
    }
    if !(grid_rate > 0.0) {
        return Err(FeatureError::Config(format!(
            "grid rate {grid_rate} must be positive"
        )));
    }
    let times = &rri.interval_times;
    let (start, end) = (times[0], times[times.len() - 1]);
    let n = ((end - start) * grid_rate).floor() as usize + 1;
    let mut values = Vec::with_capacity(n);
    let mut bridged = Vec::with_capacity(n);
    let mut right = 1; // times[right-1] <= t <= times[right] while scanning
    for i in 0..n {
        let t = start + i as f64 / grid_rate;
        while right < times.len() - 1 && times[right] < t {
            right += 1;
        }
        let (t0, t1) = (times[right - 1], times[right]);
        let (v0, v1) = (rri.intervals[right - 1], rri.intervals[right]);
        let v = if t1 > t0 {
            v0 + (v1 - v0) * ((t - t0) / (t1 - t0)).clamp(0.0, 1.0)
        } else {
            v0
        };
        values.push(v);
        let in_dropout = rri.dropouts.iter().any(|&(a, b)| t > a && t < b);
        bridged.push(if in_dropout { 1.0 } else { 0.0 });
    }
    Ok(SampledSignal::new(
        start,
        grid_rate,
        vec!["rri".to_string(), "bridged".to_string()],
        vec![values, bridged],
    ))
}

/// One-sided Hann-windowed periodogram. Returns the bin spacing in Hz and the
/// power spectral density per bin (s^2 / Hz for an interval series), so that
/// `sum(psd) * df` recovers the variance of the windowed signal.
pub(crate) fn hann_periodogram(values: &[f64], rate: f64) -> (f64, Vec<f64>) {
    let n = values.len();
    assert!(n >= 2, "periodogram needs at least 2 samples");
    let m = mean(values);
    let mut window_power = 0.0;
    let mut buf: Vec<Complex<f64>> = (0..n)
        .map(|i| {
            let w = 0.5 * (1.0 - (2.0 * PI * i as f64 / n as f64).cos());
            window_power += w * w;
            Complex::new((values[i] - m) * w, 0.0)
        })
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let df = rate / n as f64;
    let scale = 1.0 / (rate * window_power);
    let half = n / 2;
    let psd: Vec<f64> = (0..=half)
        .map(|k| {
            // One-sided spectrum: interior bins carry their mirror's power too.
            let two_sided = k != 0 && !(n % 2 == 0 && k == half);
            buf[k].norm_sqr() * scale * if two_sided { 2.0 } else { 1.0 }
        })
        .collect();
    (df, psd)
}

/// Rectangle-rule power over `[lo, hi)` from a one-sided periodogram.
fn band_power(df: f64, psd: &[f64], lo: f64, hi: f64) -> f64 {
    psd.iter()
        .enumerate()
        .filter(|(k, _)| {
            let f = *k as f64 * df;
            f >= lo && f < hi
        })
        .map(|(_, p)| p * df)
        .sum()
}

/// Heart-rate-variability features of one trial.
///
/// The mean is taken over the raw intervals whenever any exist. Spectral terms
/// require `usable_span >= bands.min_span`; they are computed from the
/// mean-removed, uniformly resampled series via a Hann periodogram with
/// rectangle-rule band integration, and marked missing otherwise.
pub fn hrv_features(rri: &RriSequence, bands: &BandConfig) -> Result<HrvFeatures, FeatureError> {
    bands.validate()?;
    let mut out = HrvFeatures {
        mean_rri: rri.mean_interval(),
        ..HrvFeatures::default()
    };
    if rri.len() < 2 || rri.usable_span() < bands.min_span {
        return Ok(out);
    }
    let grid = resample_rri(rri, bands.grid_rate)?;
    let (df, psd) = hann_periodogram(grid.channel("rri").unwrap(), bands.grid_rate);
    let lf = band_power(df, &psd, bands.lf.0, bands.lf.1);
    let hf = band_power(df, &psd, bands.hf.0, bands.hf.1);
    out.lf_power = Some(lf);
    out.hf_power = Some(hf);
    out.lf_hf_ratio = (hf > RATIO_POWER_FLOOR).then(|| lf / hf);
    Ok(out)
}

/// Blink frequency in events per minute over the trial span.
pub fn blink_rate(blinks: &EventSeries, trial_span: f64) -> f64 {
    assert!(trial_span > 0.0, "trial span must be positive");
    let count = blinks
        .kinds
        .iter()
        .filter(|&&k| k == EventKind::Blink)
        .count();
    count as f64 * 60.0 / trial_span
}

/// Gaze statistics over one trial.
///
/// Steps are Euclidean distances between consecutive samples; the large-step
/// rate counts steps above `large_step_threshold` per minute. Event ratios are
/// fractions of all samples; labels other than visual intake and saccade
/// (blinks included — the tracker's blink labels are not trusted) count
/// toward neither ratio.
pub fn gaze_features(
    gaze: &SampledSignal,
    events: &[EventKind],
    large_step_threshold: f64,
) -> Result<GazeFeatures, FeatureError> {
    let gx = gaze.channel("gx").ok_or_else(|| {
        FeatureError::ChannelMismatch(format!("expected gx/gy channels, found {:?}", gaze.channels))
    })?;
    let gy = gaze.channel("gy").unwrap_or(&[]);
    if gy.len() != gx.len() || events.len() != gx.len() {
        return Err(FeatureError::ChannelMismatch(format!(
            "gx has {} samples, gy {}, events {}",
            gx.len(),
            gy.len(),
            events.len()
        )));
    }
    if gx.len() < 2 {
        return Err(FeatureError::InsufficientData(format!(
            "need at least 2 gaze samples, got {}",
            gx.len()
        )));
    }
    let steps: Vec<f64> = (1..gx.len())
        .map(|i| ((gx[i] - gx[i - 1]).powi(2) + (gy[i] - gy[i - 1]).powi(2)).sqrt())
        .collect();
    let large = steps.iter().filter(|&&d| d > large_step_threshold).count();
    let n = gx.len() as f64;
    let count_kind = |kind: EventKind| events.iter().filter(|&&k| k == kind).count() as f64 / n;
    Ok(GazeFeatures {
        std_gx: population_std(gx),
        std_gy: population_std(gy),
        mean_step: mean(&steps),
        std_step: population_std(&steps),
        large_step_rate: large as f64 * 60.0 / gaze.duration(),
        visual_intake_ratio: count_kind(EventKind::VisualIntake),
        saccade_ratio: count_kind(EventKind::Saccade),
    })
}

/// Mean and population standard deviation of each of the 10 EEG streams.
pub fn eeg_features(eeg: &SampledSignal) -> Result<EegFeatures, FeatureError> {
    if eeg.channels.len() != 10 {
        return Err(FeatureError::ChannelMismatch(format!(
            "expected 10 EEG streams, found {}",
            eeg.channels.len()
        )));
    }
    if eeg.len() < 2 {
        return Err(FeatureError::InsufficientData(format!(
            "need at least 2 EEG samples, got {}",
            eeg.len()
        )));
    }
    let mut means = [0.0; 10];
    let mut stds = [0.0; 10];
    for (c, stream) in eeg.values.iter().enumerate() {
        means[c] = mean(stream);
        stds[c] = population_std(stream);
    }
    Ok(EegFeatures { means, stds })
}
