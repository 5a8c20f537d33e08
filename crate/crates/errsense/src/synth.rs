//! Synthetic multi-sensor datasets with exact ground truth.
//!
//! Every generator is a pure function of (config, condition, rng stream), and
//! every rng stream is derived from the master seed plus a stable string tag,
//! so a config reproduces its dataset byte for byte. Ground truth (R-peak and
//! blink times, condition labels) is carried alongside each generated signal
//! and written as `<signal>.truth.csv` sidecars, making the generated trees
//! usable as verification oracles for the detectors and the end-to-end study.

use crate::data::{
    save_manifest, write_events, write_gaze, write_pose, write_signal, CalmSegment, Condition,
    DataError, DatasetManifest, EventKind, EventSeries, SampledSignal, SignalPaths, Trial,
    EEG_CHANNELS, POSE_JOINTS,
};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synth config: {0}")]
    Config(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// Sampling rates of the generated sensors, Hz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SampleRates {
    pub ecg: f64,
    pub eog: f64,
    pub hr: f64,
    pub acc: f64,
    pub gaze: f64,
    pub eeg: f64,
    pub pose: f64,
}

impl Default for SampleRates {
    fn default() -> Self {
        SampleRates {
            ecg: 250.0,
            eog: 100.0,
            hr: 1.0,
            acc: 50.0,
            gaze: 60.0,
            eeg: 1.0,
            pose: 30.0,
        }
    }
}

/// Additive offsets a work condition applies on top of the baseline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct ConditionEffect {
    /// Heart-rate shift, bpm.
    pub hr_delta: f64,
    /// Blink-rate shift, blinks/minute.
    pub blink_delta: f64,
    /// Movement-amplitude shift (dimensionless scale).
    pub movement_delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub seed: u64,
    pub subjects: usize,
    /// Resting heart rate, bpm.
    pub base_hr: f64,
    /// Sinusoidal beat-interval modulation: frequency (Hz) and depth fraction.
    pub hrv_mod_freq: f64,
    pub hrv_mod_depth: f64,
    /// Clean-signal-power to white-noise-power ratio in dB; None disables
    /// all sensor noise.
    pub snr_db: Option<f64>,
    /// Motion-artifact bursts per minute on the ECG channel.
    pub artifact_rate: f64,
    /// Blinks per minute.
    pub blink_rate: f64,
    /// Relative depth of the slow (respiratory) QRS amplitude modulation.
    pub amp_jitter: f64,
    /// Baseline movement amplitude shared by acc, pose and gaze dynamics.
    pub movement_base: f64,
    /// Baseline shift applied to the EEG attention/meditation channels.
    pub eeg_shift: f64,
    /// Scale of deterministic per-subject offsets (0 = identical subjects).
    pub subject_spread: f64,
    pub time_pressure: ConditionEffect,
    pub multi_task: ConditionEffect,
    /// Seconds per task trial and per calm baseline segment.
    pub trial_duration: f64,
    pub calm_duration: f64,
    pub rates: SampleRates,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 42,
            subjects: 10,
            base_hr: 65.0,
            hrv_mod_freq: 0.1,
            hrv_mod_depth: 0.05,
            snr_db: Some(20.0),
            artifact_rate: 1.0,
            blink_rate: 15.0,
            amp_jitter: 0.1,
            movement_base: 0.3,
            eeg_shift: 0.0,
            subject_spread: 1.0,
            time_pressure: ConditionEffect {
                hr_delta: 10.0,
                blink_delta: 8.0,
                movement_delta: 0.4,
            },
            multi_task: ConditionEffect {
                hr_delta: 20.0,
                blink_delta: 16.0,
                movement_delta: 1.0,
            },
            trial_duration: 120.0,
            calm_duration: 120.0,
            rates: SampleRates::default(),
        }
    }
}

/// Refractory gap enforced between consecutive blinks, seconds.
pub const BLINK_REFRACTORY: f64 = 1.2;

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let fail = |m: String| Err(SynthError::Config(m));
        if !(30.0..=220.0).contains(&self.base_hr) {
            return fail(format!("base_hr {} outside [30, 220]", self.base_hr));
        }
        if !(0.0..0.5).contains(&self.hrv_mod_depth) {
            return fail(format!("hrv_mod_depth {} outside [0, 0.5)", self.hrv_mod_depth));
        }
        if !(self.hrv_mod_freq >= 0.0) {
            return fail(format!("hrv_mod_freq {} negative", self.hrv_mod_freq));
        }
        if !(self.trial_duration > 0.0) || !(self.calm_duration > 0.0) {
            return fail(format!(
                "durations must be positive, got trial {} and calm {}",
                self.trial_duration, self.calm_duration
            ));
        }
        if self.artifact_rate < 0.0 {
            return fail(format!("artifact_rate {} negative", self.artifact_rate));
        }
        if self.blink_rate < 0.0 {
            return fail(format!("blink_rate {} negative", self.blink_rate));
        }
        if self.blink_rate > 0.0 && 60.0 / self.blink_rate <= BLINK_REFRACTORY {
            return fail(format!(
                "blink_rate {} leaves mean gap below the {BLINK_REFRACTORY} s refractory",
                self.blink_rate
            ));
        }
        if self.amp_jitter < 0.0 || self.movement_base < 0.0 || self.subject_spread < 0.0 {
            return fail("amp_jitter, movement_base and subject_spread must be nonnegative".into());
        }
        let r = &self.rates;
        for (name, rate) in [
            ("ecg", r.ecg),
            ("eog", r.eog),
            ("hr", r.hr),
            ("acc", r.acc),
            ("gaze", r.gaze),
            ("eeg", r.eeg),
            ("pose", r.pose),
        ] {
            if !(rate > 0.0) {
                return fail(format!("sample rate {name} must be positive, got {rate}"));
            }
        }
        Ok(())
    }

    pub fn condition_effect(&self, condition: Condition) -> ConditionEffect {
        match condition {
            Condition::Normal => ConditionEffect::default(),
            Condition::TimePressure => self.time_pressure,
            Condition::MultiTask => self.multi_task,
        }
    }

    /// White-noise std that puts the given clean signal at the configured
    /// power SNR; zero when noiseless.
    fn noise_std_for(&self, clean: &[f64]) -> f64 {
        match self.snr_db {
            Some(db) => {
                let power = clean.iter().map(|v| v * v).sum::<f64>() / clean.len().max(1) as f64;
                power.sqrt() * 10f64.powf(-db / 20.0)
            }
            None => 0.0,
        }
    }
}

/// Exact event times a generated trial was built from.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GroundTruth {
    pub r_peak_times: Vec<f64>,
    pub blink_times: Vec<f64>,
    pub condition: Condition,
}

/// Deterministic rng stream for one generation task: master seed mixed with a
/// stable string tag (FNV-1a over the tag bytes).
pub fn rng_stream(seed: u64, tag: &str) -> ChaCha8Rng {
    let mut h = 0xcbf2_9ce4_8422_2325u64 ^ seed.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    for b in tag.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    ChaCha8Rng::seed_from_u64(h)
}

/// Standard normal via Box-Muller.
fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}

/// Front-end bandwidth of the electrode channels; sensor noise is smoothed to
/// roughly this cutoff so it looks anti-aliased rather than sample-white.
const NOISE_BANDWIDTH: f64 = 40.0;

/// Breathing frequency driving the slow QRS amplitude sway.
const RESP_FREQ: f64 = 0.22;

/// Adds band-limited Gaussian noise with exact std `sigma`: white draws are
/// smoothed by a short Hann kernel (circular) and rescaled to unit rms.
fn add_sensor_noise(values: &mut [f64], rate: f64, sigma: f64, rng: &mut ChaCha8Rng) {
    let n = values.len();
    if n == 0 || sigma <= 0.0 {
        return;
    }
    let white: Vec<f64> = (0..n).map(|_| gauss(rng)).collect();
    let mut l = (rate / NOISE_BANDWIDTH).round() as usize;
    if l % 2 == 0 {
        l += 1;
    }
    let kernel: Vec<f64> = (0..l)
        .map(|j| {
            let x = (j + 1) as f64 / (l + 1) as f64;
            (PI * x).sin().powi(2)
        })
        .collect();
    let half = (l / 2) as isize;
    let mut smooth = vec![0.0f64; n];
    for i in 0..n {
        let mut acc = 0.0;
        for (j, k) in kernel.iter().enumerate() {
            let idx = (i as isize + j as isize - half).rem_euclid(n as isize) as usize;
            acc += k * white[idx];
        }
        smooth[i] = acc;
    }
    let rms = (smooth.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
    let scale = sigma / rms.max(f64::MIN_POSITIVE);
    for (v, s) in values.iter_mut().zip(&smooth) {
        *v += scale * s;
    }
}

fn exp_sample(rng: &mut ChaCha8Rng, mean: f64) -> f64 {
    let u: f64 = rng.gen_range(0.0..1.0);
    -mean * (1.0 - u).ln()
}

/// Knuth's method; fine for the burst counts involved here.
fn poisson_sample(rng: &mut ChaCha8Rng, lambda: f64) -> usize {
    if lambda <= 0.0 {
        return 0;
    }
    let limit = (-lambda).exp();
    let mut k = 0usize;
    let mut p = 1.0;
    loop {
        p *= rng.gen_range(0.0f64..1.0);
        if p <= limit {
            return k;
        }
        k += 1;
    }
}

/// Beat interval at time t, seconds.
fn rri_at(cfg: &SynthConfig, hr: f64, t: f64) -> f64 {
    (60.0 / hr) * (1.0 + cfg.hrv_mod_depth * (2.0 * PI * cfg.hrv_mod_freq * t).sin())
}

/// QRS bump width: 40 ms total visible support (roughly +-2 sigma), the
/// narrow R spike of a compact single-Gaussian beat template.
const QRS_SIGMA: f64 = 0.010;

fn add_bump(values: &mut [f64], rate: f64, center: f64, sigma: f64, amp: f64) {
    let lo = (((center - 8.0 * sigma) * rate).floor().max(0.0)) as usize;
    let hi = ((((center + 8.0 * sigma) * rate).ceil()) as usize).min(values.len().saturating_sub(1));
    for i in lo..=hi {
        let z = (i as f64 / rate - center) / sigma;
        values[i] += amp * (-0.5 * z * z).exp();
    }
}

/// ECG as a train of Gaussian QRS bumps on beat times driven by the modulated
/// interval curve, plus white noise and band-limited motion-artifact bursts.
pub fn gen_ecg(
    cfg: &SynthConfig,
    condition: Condition,
    rng: &mut ChaCha8Rng,
) -> Result<(SampledSignal, GroundTruth), SynthError> {
    cfg.validate()?;
    let hr = cfg.base_hr + cfg.condition_effect(condition).hr_delta;
    let rate = cfg.rates.ecg;
    let dur = cfg.trial_duration;
    let n = (dur * rate).round() as usize;
    let mut values = vec![0.0f64; n];

    let mut peaks = Vec::new();
    let mut t = rri_at(cfg, hr, 0.0) / 2.0;
    while t < dur - 0.1 {
        peaks.push(t);
        t += rri_at(cfg, hr, t);
    }
    // R-amplitude varies slowly with respiration rather than beat-to-beat;
    // fast per-beat scatter is not a feature of clean contact ECG.
    let resp_phase = rng.gen_range(0.0..2.0 * PI);
    for &p in &peaks {
        let sway = (2.0 * PI * RESP_FREQ * p + resp_phase).sin();
        let amp = (1.0 + cfg.amp_jitter * sway).max(0.2);
        add_bump(&mut values, rate, p, QRS_SIGMA, amp);
    }

    let sigma = cfg.noise_std_for(&values);
    add_sensor_noise(&mut values, rate, sigma, rng);

    // Motion-artifact bursts: Hann-gated banks of 5-25 Hz sinusoids at a
    // sub-QRS muscle-noise scale (electrode pops and rail-outs are out of
    // scope; those would swamp any amplitude-driven detector).
    let bursts = poisson_sample(rng, cfg.artifact_rate * dur / 60.0);
    for _ in 0..bursts {
        let width = rng.gen_range(0.5..2.0);
        let start = rng.gen_range(0.0..(dur - width).max(0.001));
        let amp = rng.gen_range(0.4..0.8);
        let comps: Vec<(f64, f64)> = (0..3)
            .map(|_| (rng.gen_range(5.0..25.0), rng.gen_range(0.0..2.0 * PI)))
            .collect();
        let i0 = (start * rate) as usize;
        let i1 = (((start + width) * rate) as usize).min(n);
        for i in i0..i1 {
            let t = i as f64 / rate;
            let phase = (t - start) / width;
            let envelope = 0.5 * (1.0 - (2.0 * PI * phase).cos());
            let carrier: f64 = comps.iter().map(|&(f, p)| (2.0 * PI * f * t + p).sin()).sum();
            values[i] += amp * envelope * carrier / comps.len() as f64;
        }
    }

    let signal = SampledSignal::new(0.0, rate, vec!["value".to_string()], vec![values]);
    let truth = GroundTruth {
        r_peak_times: peaks,
        blink_times: Vec::new(),
        condition,
    };
    Ok((signal, truth))
}

/// Wrist-watch heart rate at 1 Hz, read off the same interval curve the ECG
/// beats follow, with light measurement noise.
pub fn gen_hr(
    cfg: &SynthConfig,
    condition: Condition,
    rng: &mut ChaCha8Rng,
) -> Result<SampledSignal, SynthError> {
    cfg.validate()?;
    let hr = cfg.base_hr + cfg.condition_effect(condition).hr_delta;
    let rate = cfg.rates.hr;
    let n = (cfg.trial_duration * rate).round() as usize;
    let noise = if cfg.snr_db.is_some() { 0.5 } else { 0.0 };
    let values: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 / rate;
            60.0 / rri_at(cfg, hr, t) + noise * gauss(rng)
        })
        .collect();
    Ok(SampledSignal::new(0.0, rate, vec!["bpm".to_string()], vec![values]))
}

/// Blink pulse width.
const BLINK_SIGMA: f64 = 0.06;
/// Baseline-wander sinusoid riding the drift ramp: (frequency Hz, amplitude).
const DRIFT_WAVE: (f64, f64) = (0.003, 0.10);
/// Drift ramp slope magnitude range, per second. The minimum stays above the
/// wave's steepest slope (2pi*0.003*0.10 ~ 0.0019) so the baseline never
/// flattens into a plateau that could mimic a pulse.
const DRIFT_SLOPE: (f64, f64) = (0.0025, 0.004);

/// EOG as slow baseline drift plus positive blink pulses with
/// exponential-plus-refractory gaps preserving the configured rate.
pub fn gen_eog(
    cfg: &SynthConfig,
    condition: Condition,
    rng: &mut ChaCha8Rng,
) -> Result<(SampledSignal, GroundTruth), SynthError> {
    cfg.validate()?;
    let blink_rate = (cfg.blink_rate + cfg.condition_effect(condition).blink_delta).max(0.0);
    if blink_rate > 0.0 && 60.0 / blink_rate <= BLINK_REFRACTORY {
        return Err(SynthError::Config(format!(
            "effective blink rate {blink_rate}/min leaves mean gap below the refractory"
        )));
    }
    let rate = cfg.rates.eog;
    let dur = cfg.trial_duration;
    let n = (dur * rate).round() as usize;

    // Electrode baseline: a strictly monotone ramp (random slope and sign)
    // plus a slow wave that never overcomes the ramp's slope.
    let slope = rng.gen_range(DRIFT_SLOPE.0..DRIFT_SLOPE.1)
        * if rng.gen::<bool>() { 1.0 } else { -1.0 };
    let wave_phase = rng.gen_range(0.0..2.0 * PI);
    let (wf, wa) = DRIFT_WAVE;
    let mut values: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 / rate;
            slope * (t - dur / 2.0) + wa * (2.0 * PI * wf * t + wave_phase).sin()
        })
        .collect();

    let mut blinks = Vec::new();
    if blink_rate > 0.0 {
        let mean_extra = 60.0 / blink_rate - BLINK_REFRACTORY;
        let mut t = BLINK_REFRACTORY + exp_sample(rng, mean_extra);
        while t < dur - 0.3 {
            blinks.push(t);
            t += BLINK_REFRACTORY + exp_sample(rng, mean_extra);
        }
    }
    for &b in &blinks {
        add_bump(&mut values, rate, b, BLINK_SIGMA, 1.0);
    }

    let sigma = cfg.noise_std_for(&values);
    add_sensor_noise(&mut values, rate, sigma, rng);

    let signal = SampledSignal::new(0.0, rate, vec!["value".to_string()], vec![values]);
    let truth = GroundTruth {
        r_peak_times: Vec::new(),
        blink_times: blinks,
        condition,
    };
    Ok((signal, truth))
}

/// Wrist accelerometer: gravity on z plus condition-scaled oscillation and
/// sensor noise on all axes.
pub fn gen_acc(
    cfg: &SynthConfig,
    condition: Condition,
    rng: &mut ChaCha8Rng,
) -> Result<SampledSignal, SynthError> {
    cfg.validate()?;
    let movement = cfg.movement_base + cfg.condition_effect(condition).movement_delta;
    let rate = cfg.rates.acc;
    let n = (cfg.trial_duration * rate).round() as usize;
    let noise = if cfg.snr_db.is_some() { 0.05 } else { 0.0 };

    // Two sinusoid components per horizontal axis.
    let comps: Vec<(f64, f64)> = (0..4)
        .map(|_| (rng.gen_range(1.0..4.0), rng.gen_range(0.0..2.0 * PI)))
        .collect();
    let mut ax = vec![0.0f64; n];
    let mut ay = vec![0.0f64; n];
    let mut az = vec![0.0f64; n];
    for i in 0..n {
        let t = i as f64 / rate;
        let osc = |c: &[(f64, f64)]| -> f64 {
            c.iter().map(|&(f, p)| (2.0 * PI * f * t + p).sin()).sum::<f64>() / c.len() as f64
        };
        ax[i] = movement * osc(&comps[0..2]) + noise * gauss(rng);
        ay[i] = movement * osc(&comps[2..4]) + noise * gauss(rng);
        az[i] = 9.81 + noise * gauss(rng);
    }
    Ok(SampledSignal::new(
        0.0,
        rate,
        vec!["ax".to_string(), "ay".to_string(), "az".to_string()],
        vec![ax, ay, az],
    ))
}

/// Upper-body pose stream: a static skeleton whose joints follow smooth
/// sinusoid-bank motion with amplitude proportional to the movement level.
/// Zero movement means a perfectly static skeleton.
pub fn gen_pose(
    cfg: &SynthConfig,
    condition: Condition,
    rng: &mut ChaCha8Rng,
) -> Result<SampledSignal, SynthError> {
    cfg.validate()?;
    let movement = cfg.movement_base + cfg.condition_effect(condition).movement_delta;
    let rate = cfg.rates.pose;
    let n = (cfg.trial_duration * rate).round() as usize;
    let noise = if cfg.snr_db.is_some() { 0.001 } else { 0.0 };

    let mut channels = Vec::with_capacity(POSE_JOINTS * 3);
    let mut names = Vec::with_capacity(POSE_JOINTS * 3);
    for joint in 0..POSE_JOINTS {
        let base = [
            0.1 * joint as f64,
            1.0 + 0.05 * (joint % 5) as f64,
            0.5 + 0.02 * joint as f64,
        ];
        let joint_scale: f64 = rng.gen_range(0.5..1.5);
        for axis in 0..3 {
            let amp = 0.012 * movement * joint_scale;
            let f1: f64 = rng.gen_range(0.3..1.2);
            let f2: f64 = rng.gen_range(0.3..1.2);
            let p1: f64 = rng.gen_range(0.0..2.0 * PI);
            let p2: f64 = rng.gen_range(0.0..2.0 * PI);
            let series: Vec<f64> = (0..n)
                .map(|i| {
                    let t = i as f64 / rate;
                    base[axis]
                        + amp * ((2.0 * PI * f1 * t + p1).sin() + (2.0 * PI * f2 * t + p2).sin())
                        + noise * gauss(rng)
                })
                .collect();
            names.push(crate::data::pose_channel(joint, axis));
            channels.push(series);
        }
    }
    Ok(SampledSignal::new(0.0, rate, names, channels))
}

/// Eye-tracker gaze: fixation/saccade alternation with per-sample event
/// labels. Busier conditions shorten fixations and lengthen saccade jumps.
pub fn gen_gaze(
    cfg: &SynthConfig,
    condition: Condition,
    rng: &mut ChaCha8Rng,
) -> Result<(SampledSignal, Vec<EventKind>), SynthError> {
    cfg.validate()?;
    let movement = cfg.movement_base + cfg.condition_effect(condition).movement_delta;
    let rate = cfg.rates.gaze;
    let n = (cfg.trial_duration * rate).round() as usize;
    let fix_mean = (0.35 / (1.0 + 0.4 * movement)).max(0.08);
    let step_scale = 1.0 + 0.3 * movement;
    let jitter = if cfg.snr_db.is_some() { 1.5 } else { 0.0 };

    let mut gx = Vec::with_capacity(n);
    let mut gy = Vec::with_capacity(n);
    let mut events = Vec::with_capacity(n);
    let (mut cx, mut cy) = (960.0f64, 540.0f64);
    let mut i = 0usize;
    while i < n {
        // Fixation around the current center.
        let fix_samples = ((rng.gen_range(0.5..1.5) * fix_mean * rate) as usize).max(1);
        for _ in 0..fix_samples.min(n - i) {
            gx.push(cx + jitter * gauss(rng));
            gy.push(cy + jitter * gauss(rng));
            events.push(EventKind::VisualIntake);
            i += 1;
        }
        if i >= n {
            break;
        }
        // Saccade to a new center; reflect at the screen edges.
        let angle = rng.gen_range(0.0..2.0 * PI);
        let length = rng.gen_range(40.0..160.0) * step_scale;
        let mut nx = cx + length * angle.cos();
        let mut ny = cy + length * angle.sin();
        if nx < 0.0 || nx > 1920.0 {
            nx = nx.clamp(0.0, 1920.0) * 2.0 - nx;
        }
        if ny < 0.0 || ny > 1080.0 {
            ny = ny.clamp(0.0, 1080.0) * 2.0 - ny;
        }
        let sac_samples = ((rng.gen_range(0.02..0.08) * rate) as usize).max(1);
        for s in 0..sac_samples.min(n - i) {
            let frac = (s + 1) as f64 / sac_samples as f64;
            gx.push(cx + (nx - cx) * frac);
            gy.push(cy + (ny - cy) * frac);
            events.push(EventKind::Saccade);
            i += 1;
        }
        cx = nx;
        cy = ny;
    }
    let signal = SampledSignal::new(
        0.0,
        rate,
        vec!["gx".to_string(), "gy".to_string()],
        vec![gx, gy],
    );
    Ok((signal, events))
}

/// Headband EEG summary streams at 1 Hz: per-band power plus attention and
/// meditation scores, mildly shifted by condition load.
pub fn gen_eeg(
    cfg: &SynthConfig,
    condition: Condition,
    rng: &mut ChaCha8Rng,
) -> Result<SampledSignal, SynthError> {
    cfg.validate()?;
    let rate = cfg.rates.eeg;
    let n = (cfg.trial_duration * rate).round() as usize;
    let load = condition.index() as f64;
    let noise = if cfg.snr_db.is_some() { 2.0 } else { 0.0 };
    let bases = [50.0, 40.0, 30.0, 25.0, 20.0, 15.0, 10.0, 8.0, 50.0, 50.0];

    let mut channels = Vec::with_capacity(EEG_CHANNELS.len());
    for (c, &base) in bases.iter().enumerate() {
        let phase: f64 = rng.gen_range(0.0..2.0 * PI);
        let shift = match EEG_CHANNELS[c] {
            "attention" => 5.0 * load + cfg.eeg_shift,
            "meditation" => -5.0 * load + cfg.eeg_shift,
            _ => 1.5 * load,
        };
        let series: Vec<f64> = (0..n)
            .map(|i| {
                let t = i as f64 / rate;
                (base + shift + 3.0 * (2.0 * PI * 0.01 * t + phase).sin() + noise * gauss(rng))
                    .max(0.0)
            })
            .collect();
        channels.push(series);
    }
    Ok(SampledSignal::new(
        0.0,
        rate,
        EEG_CHANNELS.iter().map(|s| s.to_string()).collect(),
        channels,
    ))
}

/// Replaces `name.csv` with `name.truth.csv`.
pub fn truth_path(signal_path: &Path) -> PathBuf {
    let stem = signal_path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("signal");
    signal_path.with_file_name(format!("{stem}.truth.csv"))
}

fn events_from(times: &[f64], kind: EventKind) -> EventSeries {
    let mut series = EventSeries::new();
    for &t in times {
        series.push(t, kind);
    }
    series
}

/// Deterministic per-subject baseline offsets.
#[derive(Debug, Clone, Copy)]
struct SubjectProfile {
    hr: f64,
    blink: f64,
    movement: f64,
    eeg: f64,
}

fn subject_profile(cfg: &SynthConfig, subject: usize) -> SubjectProfile {
    let mut rng = rng_stream(cfg.seed, &format!("subject/{subject}"));
    let s = cfg.subject_spread;
    SubjectProfile {
        hr: rng.gen_range(-6.0..6.0) * s,
        blink: rng.gen_range(-4.0..4.0) * s,
        movement: rng.gen_range(-0.15..0.15) * s,
        eeg: rng.gen_range(-6.0..6.0) * s,
    }
}

/// Config specialized to one subject and one recording, with small per-trial
/// wobble so repeated cycles are similar but not identical.
fn specialize(cfg: &SynthConfig, profile: SubjectProfile, tag: &str, duration: f64) -> SynthConfig {
    let mut rng = rng_stream(cfg.seed, &format!("wobble/{tag}"));
    let mut out = cfg.clone();
    out.base_hr = cfg.base_hr + profile.hr + rng.gen_range(-1.5..1.5);
    out.blink_rate = (cfg.blink_rate + profile.blink + rng.gen_range(-1.0..1.0)).max(0.0);
    out.movement_base = (cfg.movement_base + profile.movement + rng.gen_range(-0.05..0.05)).max(0.0);
    out.eeg_shift = cfg.eeg_shift + profile.eeg;
    out.trial_duration = duration;
    out
}

/// Generates and writes one recording (all seven sensors plus truth
/// sidecars); returns manifest-relative paths.
fn write_bundle(
    cfg: &SynthConfig,
    condition: Condition,
    root: &Path,
    rel_dir: &Path,
    tag: &str,
) -> Result<SignalPaths, SynthError> {
    let dir = root.join(rel_dir);
    std::fs::create_dir_all(&dir).map_err(|e| SynthError::Io {
        path: dir.clone(),
        source: e,
    })?;
    let seed = cfg.seed;
    let mut paths = SignalPaths::default();

    let (ecg, ecg_truth) = gen_ecg(cfg, condition, &mut rng_stream(seed, &format!("{tag}/ecg")))?;
    write_signal(&dir.join("ecg.csv"), &ecg)?;
    write_events(
        &truth_path(&dir.join("ecg.csv")),
        &events_from(&ecg_truth.r_peak_times, EventKind::RPeak),
    )?;
    paths.ecg = Some(rel_dir.join("ecg.csv"));

    let (eog, eog_truth) = gen_eog(cfg, condition, &mut rng_stream(seed, &format!("{tag}/eog")))?;
    write_signal(&dir.join("eog.csv"), &eog)?;
    write_events(
        &truth_path(&dir.join("eog.csv")),
        &events_from(&eog_truth.blink_times, EventKind::Blink),
    )?;
    paths.eog = Some(rel_dir.join("eog.csv"));

    let hr = gen_hr(cfg, condition, &mut rng_stream(seed, &format!("{tag}/hr")))?;
    write_signal(&dir.join("hr.csv"), &hr)?;
    paths.hr = Some(rel_dir.join("hr.csv"));

    let acc = gen_acc(cfg, condition, &mut rng_stream(seed, &format!("{tag}/acc")))?;
    write_signal(&dir.join("acc.csv"), &acc)?;
    paths.acc = Some(rel_dir.join("acc.csv"));

    let (gaze, gaze_events) =
        gen_gaze(cfg, condition, &mut rng_stream(seed, &format!("{tag}/gaze")))?;
    write_gaze(&dir.join("gaze.csv"), &gaze, &gaze_events)?;
    paths.gaze = Some(rel_dir.join("gaze.csv"));

    let eeg = gen_eeg(cfg, condition, &mut rng_stream(seed, &format!("{tag}/eeg")))?;
    write_signal(&dir.join("eeg.csv"), &eeg)?;
    paths.eeg = Some(rel_dir.join("eeg.csv"));

    let pose = gen_pose(cfg, condition, &mut rng_stream(seed, &format!("{tag}/pose")))?;
    write_pose(&dir.join("pose.csv"), &pose)?;
    paths.pose = Some(rel_dir.join("pose.csv"));

    Ok(paths)
}

/// Generates the full study tree: per subject one calm baseline plus
/// 3 cycles x 3 conditions of task trials, a manifest, and truth sidecars.
/// Trials are generated in parallel; every rng stream is tag-derived, so the
/// output is byte-identical for identical configs.
pub fn gen_dataset(cfg: &SynthConfig, out_dir: &Path) -> Result<DatasetManifest, SynthError> {
    cfg.validate()?;
    if cfg.subjects == 0 {
        return Err(SynthError::Config("subjects must be at least 1".into()));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| SynthError::Io {
        path: out_dir.to_path_buf(),
        source: e,
    })?;

    struct Job {
        subject: usize,
        cycle: Option<u32>,
        condition: Condition,
    }
    let mut jobs = Vec::new();
    for subject in 0..cfg.subjects {
        jobs.push(Job {
            subject,
            cycle: None,
            condition: Condition::Normal,
        });
        for cycle in 1..=3u32 {
            for &condition in &Condition::ALL {
                jobs.push(Job {
                    subject,
                    cycle: Some(cycle),
                    condition,
                });
            }
        }
    }

    let results: Result<Vec<SignalPaths>, SynthError> = jobs
        .par_iter()
        .map(|job| {
            let profile = subject_profile(cfg, job.subject);
            let sid = format!("s{:02}", job.subject);
            match job.cycle {
                None => {
                    let tag = format!("{sid}/calm");
                    let calm_cfg = specialize(cfg, profile, &tag, cfg.calm_duration);
                    write_bundle(
                        &calm_cfg,
                        Condition::Normal,
                        out_dir,
                        &PathBuf::from(&sid).join("calm"),
                        &tag,
                    )
                }
                Some(cycle) => {
                    let cond = job.condition.label();
                    let tag = format!("{sid}/c{cycle}/{cond}");
                    let trial_cfg = specialize(cfg, profile, &tag, cfg.trial_duration);
                    write_bundle(
                        &trial_cfg,
                        job.condition,
                        out_dir,
                        &PathBuf::from(&sid).join(format!("c{cycle}_{cond}")),
                        &tag,
                    )
                }
            }
        })
        .collect();
    let results = results?;

    let mut manifest = DatasetManifest::default();
    for (job, paths) in jobs.iter().zip(results) {
        let sid = format!("s{:02}", job.subject);
        if !manifest.subjects.contains(&sid) {
            manifest.subjects.push(sid.clone());
        }
        match job.cycle {
            None => manifest.calm.push(CalmSegment {
                id: format!("{sid}-calm"),
                subject: sid,
                signals: paths,
            }),
            Some(cycle) => manifest.trials.push(Trial {
                id: format!("{sid}-c{cycle}-{}", job.condition.label()),
                subject: sid.clone(),
                cycle,
                condition: job.condition,
                signals: paths,
                calm: format!("{sid}-calm"),
            }),
        }
    }
    save_manifest(&out_dir.join("manifest.json"), &manifest)?;
    // Reload through the loader: validates, rebases paths, normalizes order.
    Ok(crate::data::load_manifest(&out_dir.join("manifest.json"))?)
}

/// Outcome of greedy one-to-one event matching within a time tolerance.
#[derive(Debug, Clone, Default)]
pub struct MatchStats {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    /// (truth index, detected index) of each match.
    pub pairs: Vec<(usize, usize)>,
    /// |detected - truth| per match.
    pub offsets: Vec<f64>,
}

impl MatchStats {
    pub fn precision(&self) -> f64 {
        let denom = self.true_positives + self.false_positives;
        if denom == 0 {
            1.0
        } else {
            self.true_positives as f64 / denom as f64
        }
    }

    pub fn recall(&self) -> f64 {
        let denom = self.true_positives + self.false_negatives;
        if denom == 0 {
            1.0
        } else {
            self.true_positives as f64 / denom as f64
        }
    }

    pub fn f1(&self) -> f64 {
        let p = self.precision();
        let r = self.recall();
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }

    pub fn median_abs_offset(&self) -> Option<f64> {
        if self.offsets.is_empty() {
            return None;
        }
        let mut sorted = self.offsets.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mid = sorted.len() / 2;
        Some(if sorted.len() % 2 == 1 {
            sorted[mid]
        } else {
            (sorted[mid - 1] + sorted[mid]) / 2.0
        })
    }
}

/// Greedily matches each truth event to the closest unused detection within
/// `tolerance` seconds. Both inputs must be sorted ascending.
pub fn match_events(truth: &[f64], detected: &[f64], tolerance: f64) -> MatchStats {
    let mut used = vec![false; detected.len()];
    let mut stats = MatchStats::default();
    let mut j0 = 0usize;
    for (ti, &t) in truth.iter().enumerate() {
        while j0 < detected.len() && detected[j0] < t - tolerance {
            j0 += 1;
        }
        let mut best: Option<(usize, f64)> = None;
        let mut j = j0;
        while j < detected.len() && detected[j] <= t + tolerance {
            if !used[j] {
                let d = (detected[j] - t).abs();
                if best.map_or(true, |(_, bd)| d < bd) {
                    best = Some((j, d));
                }
            }
            j += 1;
        }
        if let Some((j, d)) = best {
            used[j] = true;
            stats.true_positives += 1;
            stats.pairs.push((ti, j));
            stats.offsets.push(d);
        }
    }
    stats.false_positives = detected.len() - stats.true_positives;
    stats.false_negatives = truth.len() - stats.true_positives;
    stats
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::peaks::local_max_indices;

    fn quiet_cfg() -> SynthConfig {
        SynthConfig {
            snr_db: None,
            artifact_rate: 0.0,
            amp_jitter: 0.0,
            subject_spread: 0.0,
            trial_duration: 10.0,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn nominal_ecg_has_unit_intervals() {
        let cfg = SynthConfig {
            base_hr: 60.0,
            hrv_mod_depth: 0.0,
            ..quiet_cfg()
        };
        let mut rng = rng_stream(cfg.seed, "test/ecg");
        let (_, truth) = gen_ecg(&cfg, Condition::Normal, &mut rng).unwrap();
        assert_eq!(truth.r_peak_times.len(), 10);
        for w in truth.r_peak_times.windows(2) {
            assert!((w[1] - w[0] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn modulated_intervals_oscillate_at_requested_frequency() {
        let cfg = SynthConfig {
            base_hr: 60.0,
            hrv_mod_freq: 0.1,
            hrv_mod_depth: 0.1,
            trial_duration: 120.0,
            ..quiet_cfg()
        };
        let mut rng = rng_stream(cfg.seed, "test/mod");
        let (_, truth) = gen_ecg(&cfg, Condition::Normal, &mut rng).unwrap();
        let intervals: Vec<f64> = truth.r_peak_times.windows(2).map(|w| w[1] - w[0]).collect();
        let mean = intervals.iter().sum::<f64>() / intervals.len() as f64;
        let crossings = intervals
            .windows(2)
            .filter(|w| (w[0] - mean).signum() != (w[1] - mean).signum())
            .count();
        // A 0.1 Hz modulation over 120 s crosses its mean about 24 times.
        assert!(
            (18..=30).contains(&crossings),
            "got {crossings} mean crossings"
        );
    }

    #[test]
    fn peaks_sit_on_local_maxima_of_clean_signal() {
        let cfg = SynthConfig {
            trial_duration: 30.0,
            ..quiet_cfg()
        };
        let mut rng = rng_stream(cfg.seed, "test/align");
        let (signal, truth) = gen_ecg(&cfg, Condition::TimePressure, &mut rng).unwrap();
        let maxima = local_max_indices(&signal.values[0]);
        let rate = signal.sample_rate;
        for &p in &truth.r_peak_times {
            let ok = maxima
                .iter()
                .any(|&i| (i as f64 / rate - p).abs() <= 1.0 / rate + 1e-12);
            assert!(ok, "no local maximum within one sample of peak at {p}");
        }
    }

    #[test]
    fn blink_count_tracks_rate_and_respects_refractory() {
        let cfg = SynthConfig {
            blink_rate: 20.0,
            trial_duration: 60.0,
            ..quiet_cfg()
        };
        let mut rng = rng_stream(cfg.seed, "test/eog");
        let (_, truth) = gen_eog(&cfg, Condition::Normal, &mut rng).unwrap();
        let n = truth.blink_times.len();
        assert!((10..=32).contains(&n), "got {n} blinks for 20/min over 60 s");
        for w in truth.blink_times.windows(2) {
            assert!(w[1] - w[0] >= BLINK_REFRACTORY - 1e-12);
        }
    }

    #[test]
    fn zero_blink_rate_gives_pure_drift() {
        let cfg = SynthConfig {
            blink_rate: 0.0,
            time_pressure: ConditionEffect::default(),
            multi_task: ConditionEffect::default(),
            trial_duration: 60.0,
            ..quiet_cfg()
        };
        let mut rng = rng_stream(cfg.seed, "test/drift");
        let (signal, truth) = gen_eog(&cfg, Condition::Normal, &mut rng).unwrap();
        assert!(truth.blink_times.is_empty());
        let max = signal.values[0].iter().cloned().fold(f64::MIN, f64::max);
        assert!(max < 0.3, "drift should stay below blink scale, got {max}");
    }

    #[test]
    fn still_noiseless_accelerometer_reads_pure_gravity() {
        let cfg = SynthConfig {
            movement_base: 0.0,
            time_pressure: ConditionEffect::default(),
            multi_task: ConditionEffect::default(),
            ..quiet_cfg()
        };
        let mut rng = rng_stream(cfg.seed, "test/acc");
        let acc = gen_acc(&cfg, Condition::MultiTask, &mut rng).unwrap();
        for i in 0..acc.len() {
            let norm = (acc.values[0][i].powi(2) + acc.values[1][i].powi(2)
                + acc.values[2][i].powi(2))
            .sqrt();
            assert!((norm - 9.81).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_movement_pose_is_static() {
        let cfg = SynthConfig {
            movement_base: 0.0,
            time_pressure: ConditionEffect::default(),
            multi_task: ConditionEffect::default(),
            ..quiet_cfg()
        };
        let mut rng = rng_stream(cfg.seed, "test/pose");
        let pose = gen_pose(&cfg, Condition::Normal, &mut rng).unwrap();
        for channel in &pose.values {
            for w in channel.windows(2) {
                assert_eq!(w[0], w[1], "static pose must not move");
            }
        }
    }

    #[test]
    fn gaze_labels_cover_both_event_kinds() {
        let cfg = SynthConfig {
            trial_duration: 30.0,
            ..quiet_cfg()
        };
        let mut rng = rng_stream(cfg.seed, "test/gaze");
        let (signal, events) = gen_gaze(&cfg, Condition::Normal, &mut rng).unwrap();
        assert_eq!(signal.len(), events.len());
        let intake = events.iter().filter(|&&e| e == EventKind::VisualIntake).count();
        let saccade = events.iter().filter(|&&e| e == EventKind::Saccade).count();
        assert!(intake > 0 && saccade > 0);
        assert!(intake > saccade, "fixations should dominate");
    }

    #[test]
    fn same_stream_tag_reproduces_identical_signals() {
        let cfg = SynthConfig::default();
        let (a, ta) = gen_ecg(&cfg, Condition::MultiTask, &mut rng_stream(7, "trial/x")).unwrap();
        let (b, tb) = gen_ecg(&cfg, Condition::MultiTask, &mut rng_stream(7, "trial/x")).unwrap();
        assert_eq!(a.values, b.values);
        assert_eq!(ta, tb);
        let (c, _) = gen_ecg(&cfg, Condition::MultiTask, &mut rng_stream(7, "trial/y")).unwrap();
        assert_ne!(a.values, c.values, "different tags must give different streams");
    }

    #[test]
    fn config_validation_rejects_out_of_range_fields() {
        let bad_hr = SynthConfig {
            base_hr: 250.0,
            ..SynthConfig::default()
        };
        assert!(matches!(bad_hr.validate(), Err(SynthError::Config(_))));
        let bad_depth = SynthConfig {
            hrv_mod_depth: 0.5,
            ..SynthConfig::default()
        };
        assert!(matches!(bad_depth.validate(), Err(SynthError::Config(_))));
        let bad_blinks = SynthConfig {
            blink_rate: 55.0,
            ..SynthConfig::default()
        };
        assert!(matches!(bad_blinks.validate(), Err(SynthError::Config(_))));
    }

    #[test]
    fn single_subject_dataset_has_nine_trials_and_one_calm() {
        let cfg = SynthConfig {
            subjects: 1,
            trial_duration: 5.0,
            calm_duration: 5.0,
            ..SynthConfig::default()
        };
        let dir = tempfile::tempdir().unwrap();
        let manifest = gen_dataset(&cfg, dir.path()).unwrap();
        assert_eq!(manifest.trials.len(), 9);
        assert_eq!(manifest.calm.len(), 1);
        assert_eq!(manifest.subjects.len(), 1);
        for trial in &manifest.trials {
            assert!(trial.signals.ecg.as_ref().unwrap().exists());
            assert!(truth_path(trial.signals.ecg.as_ref().unwrap()).exists());
            assert!(truth_path(trial.signals.eog.as_ref().unwrap()).exists());
        }
    }

    #[test]
    fn identical_configs_write_identical_trees() {
        let cfg = SynthConfig {
            subjects: 2,
            trial_duration: 4.0,
            calm_duration: 4.0,
            ..SynthConfig::default()
        };
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        gen_dataset(&cfg, dir_a.path()).unwrap();
        gen_dataset(&cfg, dir_b.path()).unwrap();

        let mut files_a = list_files(dir_a.path());
        let mut files_b = list_files(dir_b.path());
        files_a.sort();
        files_b.sort();
        let rel =
            |files: &[PathBuf], root: &Path| -> Vec<PathBuf> {
                files.iter().map(|p| p.strip_prefix(root).unwrap().to_path_buf()).collect()
            };
        assert_eq!(rel(&files_a, dir_a.path()), rel(&files_b, dir_b.path()));
        for (a, b) in files_a.iter().zip(&files_b) {
            let bytes_a = std::fs::read(a).unwrap();
            let bytes_b = std::fs::read(b).unwrap();
            assert_eq!(bytes_a, bytes_b, "{a:?} and {b:?} differ");
        }
    }

    fn list_files(root: &Path) -> Vec<PathBuf> {
        let mut out = Vec::new();
        let mut stack = vec![root.to_path_buf()];
        while let Some(dir) = stack.pop() {
            for entry in std::fs::read_dir(&dir).unwrap() {
                let path = entry.unwrap().path();
                if path.is_dir() {
                    stack.push(path);
                } else {
                    out.push(path);
                }
            }
        }
        out
    }

    #[test]
    fn event_matching_counts_and_offsets() {
        let truth = [1.0, 2.0, 3.0];
        let detected = [1.01, 2.2, 5.0];
        let stats = match_events(&truth, &detected, 0.05);
        assert_eq!(stats.true_positives, 1);
        assert_eq!(stats.false_positives, 2);
        assert_eq!(stats.false_negatives, 2);
        assert!((stats.median_abs_offset().unwrap() - 0.01).abs() < 1e-12);
        assert_eq!(stats.pairs, vec![(0, 0)]);

        let perfect = match_events(&truth, &truth, 0.05);
        assert_eq!(perfect.f1(), 1.0);
        let empty = match_events(&[], &[], 0.05);
        assert_eq!(empty.f1(), 1.0);
    }

    #[test]
    fn matching_is_one_to_one() {
        // Two detections near one truth event: only one may match.
        let stats = match_events(&[1.0], &[0.98, 1.02], 0.05);
        assert_eq!(stats.true_positives, 1);
        assert_eq!(stats.false_positives, 1);
        // The closer detection wins.
        assert!((stats.offsets[0] - 0.02).abs() < 1e-12);
    }
}
