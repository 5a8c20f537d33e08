//! Probabilistic beat and blink detection.
//!
//! Peaks are confirmed one at a time. Given the last confirmed peak at `t`,
//! the candidates are the local maxima inside the open window
//! `(t + y_min, t + y_max)`. Each candidate interval `y` is scored by
//! `amplitude^alpha` times a prior that mixes a Gaussian around the previous
//! interval, a Gaussian around the running mean interval, and a spectral
//! periodicity term read off the trailing history window; the best-scoring
//! candidate wins, ties going to the smaller interval. Blink detection reuses
//! the same machinery with a uniform prior and an amplitude gate.
//!
//! Normalization constants of the posterior never matter: selection is an
//! argmax, which is invariant under positive scaling.

use crate::data::{EventKind, EventSeries, RriSequence, SampledSignal};
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DetectError {
    #[error("invalid detector config: {0}")]
    Config(String),
    #[error("empty window: {0}")]
    EmptyWindow(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("state error: {0}")]
    State(String),
    #[error("no candidate in window ({start}, {end})")]
    NoCandidate { start: f64, end: f64 },
    #[error("signal too short: {0}")]
    SignalTooShort(String),
}

/// Tuning knobs of the detector. `ecg()` and `blink()` give the two stock
/// parameterizations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorConfig {
    /// Exponent on normalized amplitude in the likelihood.
    pub alpha: f64,
    /// Weight of the running-mean Gaussian in the prior.
    pub beta: f64,
    /// Weight of the periodicity term in the prior.
    pub gamma: f64,
    /// Std of the previous-interval Gaussian, seconds.
    pub sigma1: f64,
    /// Std of the running-mean Gaussian, seconds.
    pub sigma2: f64,
    /// Interval support bounds, seconds; candidates live in (y_min, y_max).
    pub y_min: f64,
    pub y_max: f64,
    /// Trailing history length for the periodicity spectrum, seconds.
    /// Must be at least 4 * y_max so the spectrum resolves the band.
    pub fft_window: f64,
    /// Sliding min-max normalization window, seconds.
    pub amp_window: f64,
    /// Lower bound of normalized amplitude; keeps the likelihood positive.
    pub amp_floor: f64,
    /// Minimum normalized amplitude a blink candidate must reach.
    pub amp_gate: f64,
    /// Replace the Gaussian/periodicity prior with a uniform one (blinks).
    pub uniform_prior: bool,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig::ecg()
    }
}

impl DetectorConfig {
    /// Beat detection over ECG at rest-to-moderate heart rates.
    pub fn ecg() -> Self {
        DetectorConfig {
            alpha: 1.0,
            beta: 0.5,
            gamma: 0.5,
            sigma1: 0.05,
            sigma2: 0.1,
            y_min: 0.3,
            y_max: 1.5,
            fft_window: 30.0,
            amp_window: 2.0,
            amp_floor: 1e-6,
            amp_gate: 0.0,
            uniform_prior: false,
        }
    }

    /// Blink detection over EOG: uniform prior, wide interval support and an
    /// amplitude gate that suppresses drift-only windows. The short
    /// normalization window saturates every isolated pulse to exactly 1.0
    /// (each is its own window's maximum), so the highest-amplitude selection
    /// ties across pulses and resolves to the earliest one — the next blink —
    /// rather than skipping ahead to the largest pulse of the window.
    pub fn blink() -> Self {
        DetectorConfig {
            alpha: 1.0,
            beta: 0.0,
            gamma: 0.0,
            sigma1: 0.05,
            sigma2: 0.1,
            y_min: 1.0,
            y_max: 30.0,
            fft_window: 120.0,
            amp_window: 2.0,
            amp_floor: 1e-6,
            amp_gate: 0.3,
            uniform_prior: true,
        }
    }

    pub fn validate(&self) -> Result<(), DetectError> {
        let fail = |m: String| Err(DetectError::Config(m));
        if !(self.alpha > 0.0) {
            return fail(format!("alpha must be positive, got {}", self.alpha));
        }
        if self.beta < 0.0 || self.gamma < 0.0 {
            return fail(format!(
                "beta and gamma must be nonnegative, got {} and {}",
                self.beta, self.gamma
            ));
        }
        if !(self.sigma1 > 0.0) || !(self.sigma2 > 0.0) {
            return fail(format!(
                "sigmas must be positive, got {} and {}",
                self.sigma1, self.sigma2
            ));
        }
        if !(self.y_min > 0.0 && self.y_min < self.y_max) {
            return fail(format!(
                "need 0 < y_min < y_max, got {} and {}",
                self.y_min, self.y_max
            ));
        }
        if self.fft_window < 4.0 * self.y_max {
            return fail(format!(
                "fft_window {} shorter than 4 * y_max = {}",
                self.fft_window,
                4.0 * self.y_max
            ));
        }
        if !(self.amp_window > 0.0) {
            return fail(format!("amp_window must be positive, got {}", self.amp_window));
        }
        if !(self.amp_floor > 0.0 && self.amp_floor < 1.0) {
            return fail(format!("amp_floor must be in (0, 1), got {}", self.amp_floor));
        }
        if !(0.0..=1.0).contains(&self.amp_gate) {
            return fail(format!("amp_gate must be in [0, 1], got {}", self.amp_gate));
        }
        Ok(())
    }
}

/// Sliding-window extrema via monotonic deques; window is centered, clamped
/// at the signal edges.
fn sliding_extrema(values: &[f64], half: usize) -> (Vec<f64>, Vec<f64>) {
    let n = values.len();
    let mut mins = vec![0.0; n];
    let mut maxs = vec![0.0; n];
    let mut min_q: std::collections::VecDeque<usize> = std::collections::VecDeque::new();
    let mut max_q: std::collections::VecDeque<usize> = std::collections::VecDeque::new();
    let mut pushed = 0usize;
    for i in 0..n {
        let right = (i + half).min(n.saturating_sub(1));
        while pushed <= right {
            while min_q.back().is_some_and(|&j| values[j] >= values[pushed]) {
                min_q.pop_back();
            }
            min_q.push_back(pushed);
            while max_q.back().is_some_and(|&j| values[j] <= values[pushed]) {
                max_q.pop_back();
            }
            max_q.push_back(pushed);
            pushed += 1;
        }
        let left = i.saturating_sub(half);
        while min_q.front().is_some_and(|&j| j < left) {
            min_q.pop_front();
        }
        while max_q.front().is_some_and(|&j| j < left) {
            max_q.pop_front();
        }
        mins[i] = values[*min_q.front().unwrap()];
        maxs[i] = values[*max_q.front().unwrap()];
    }
    (mins, maxs)
}

/// Rescales a signal into [amp_floor, 1] by sliding-window min-max. A locally
/// constant window degenerates to amp_floor. Invariant under positive affine
/// rescaling of the input.
pub fn normalize_amplitude(
    values: &[f64],
    sample_rate: f64,
    window: f64,
    amp_floor: f64,
) -> Vec<f64> {
    if values.is_empty() {
        return Vec::new();
    }
    let half = ((window * sample_rate / 2.0).round() as usize).max(1);
    let (mins, maxs) = sliding_extrema(values, half);
    values
        .iter()
        .zip(mins.iter().zip(&maxs))
        .map(|(&v, (&lo, &hi))| {
            if hi > lo {
                amp_floor + (1.0 - amp_floor) * (v - lo) / (hi - lo)
            } else {
                amp_floor
            }
        })
        .collect()
}

/// Indices of strict local maxima; plateaus resolve to their leftmost sample,
/// and the first/last samples never qualify.
pub fn local_max_indices(values: &[f64]) -> Vec<usize> {
    let n = values.len();
    let mut out = Vec::new();
    let mut i = 1;
    while i + 1 <= n.saturating_sub(1) {
        if values[i] > values[i - 1] {
            let mut j = i;
            while j + 1 < n && values[j + 1] == values[i] {
                j += 1;
            }
            if j + 1 < n && values[j + 1] < values[i] {
                out.push(i);
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    out
}

/// Local maxima with timestamps inside the open window `(start, end)`.
/// The window must be nonempty and overlap the signal span.
pub fn local_maxima(
    values: &[f64],
    sample_rate: f64,
    start_time: f64,
    window: (f64, f64),
) -> Result<Vec<usize>, DetectError> {
    let (w_start, w_end) = window;
    if !(w_start < w_end) {
        return Err(DetectError::EmptyWindow(format!(
            "window ({w_start}, {w_end}) is empty"
        )));
    }
    let signal_end = start_time + (values.len().saturating_sub(1)) as f64 / sample_rate;
    if w_end <= start_time || w_start >= signal_end {
        return Err(DetectError::EmptyWindow(format!(
            "window ({w_start}, {w_end}) outside signal span ({start_time}, {signal_end})"
        )));
    }
    Ok(local_max_indices(values)
        .into_iter()
        .filter(|&i| {
            let t = start_time + i as f64 / sample_rate;
            t > w_start && t < w_end
        })
        .collect())
}

/// Likelihood of a candidate: normalized amplitude raised to alpha.
pub fn likelihood_term(amplitude: f64, alpha: f64) -> Result<f64, DetectError> {
    if !(amplitude > 0.0) {
        return Err(DetectError::Domain(format!(
            "amplitude must be positive, got {amplitude}"
        )));
    }
    Ok(amplitude.powf(alpha))
}

fn gaussian_pdf(x: f64, mean: f64, sigma: f64) -> f64 {
    let z = (x - mean) / sigma;
    (-0.5 * z * z).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
}

/// Normalized strength of interval frequencies in the trailing history
/// window; bins cover [1/y_max, 1/y_min] and sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicitySpectrum {
    pub bins: Vec<f64>,
    /// Frequency of bins[0], Hz.
    pub lo_hz: f64,
    /// Bin spacing, Hz.
    pub step_hz: f64,
}

impl PeriodicitySpectrum {
    pub fn uniform(num_bins: usize, lo_hz: f64, step_hz: f64) -> Self {
        assert!(num_bins > 0, "spectrum needs at least one bin");
        PeriodicitySpectrum {
            bins: vec![1.0 / num_bins as f64; num_bins],
            lo_hz,
            step_hz,
        }
    }

    pub fn num_bins(&self) -> usize {
        self.bins.len()
    }

    /// Linear interpolation of the spectrum at frequency 1/interval, clamped
    /// to the covered band.
    pub fn eval(&self, interval: f64) -> f64 {
        let f = 1.0 / interval;
        let x = ((f - self.lo_hz) / self.step_hz).clamp(0.0, (self.bins.len() - 1) as f64);
        let i = x.floor() as usize;
        let frac = x - i as f64;
        if i + 1 < self.bins.len() {
            self.bins[i] * (1.0 - frac) + self.bins[i + 1] * frac
        } else {
            self.bins[i]
        }
    }
}

/// Bin index range covering [1/y_max, 1/y_min] for an N-point FFT.
fn band_bins(n: usize, sample_rate: f64, cfg: &DetectorConfig) -> (usize, usize) {
    let lo = 1.0 / cfg.y_max;
    let hi = 1.0 / cfg.y_min;
    let k_lo = ((lo * n as f64 / sample_rate).ceil() as usize).max(1);
    let k_hi = ((hi * n as f64 / sample_rate).floor() as usize).min(n / 2);
    (k_lo, k_hi.max(k_lo))
}

fn hann(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|i| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / (n - 1) as f64).cos()))
        .collect()
}

/// Spectrum of the history ending at sample index `end` (exclusive). History
/// shorter than the configured window falls back to the exact uniform
/// distribution over the band's bins.
pub fn periodicity_spectrum(
    values: &[f64],
    sample_rate: f64,
    end: usize,
    cfg: &DetectorConfig,
) -> PeriodicitySpectrum {
    let n = (cfg.fft_window * sample_rate).round() as usize;
    let (k_lo, k_hi) = band_bins(n, sample_rate, cfg);
    let num_bins = k_hi - k_lo + 1;
    let lo_hz = k_lo as f64 * sample_rate / n as f64;
    let step_hz = sample_rate / n as f64;
    if end < n || n < 2 {
        return PeriodicitySpectrum::uniform(num_bins, lo_hz, step_hz);
    }
    let window = &values[end - n..end];
    let taper = hann(n);
    let mut buf: Vec<Complex<f64>> = window
        .iter()
        .zip(&taper)
        .map(|(&v, &w)| Complex::new(v * w, 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let mags: Vec<f64> = (k_lo..=k_hi).map(|k| buf[k].norm()).collect();
    let sum: f64 = mags.iter().sum();
    if sum <= 0.0 {
        return PeriodicitySpectrum::uniform(num_bins, lo_hz, step_hz);
    }
    PeriodicitySpectrum {
        bins: mags.into_iter().map(|m| m / sum).collect(),
        lo_hz,
        step_hz,
    }
}

/// Convenience evaluation of the periodicity term at one candidate interval.
pub fn periodicity_term(
    values: &[f64],
    sample_rate: f64,
    end: usize,
    interval: f64,
    cfg: &DetectorConfig,
) -> f64 {
    periodicity_spectrum(values, sample_rate, end, cfg).eval(interval)
}

/// Detector state between confirmed peaks.
#[derive(Debug, Clone, Default)]
pub struct PeakState {
    pub last_peak: Option<f64>,
    /// Interval into the last confirmed peak; None right after (re)seeding.
    pub last_interval: Option<f64>,
    interval_sum: f64,
    pub interval_count: usize,
    /// Periodicity of the trailing history, refreshed before each selection.
    pub spectrum: Option<PeriodicitySpectrum>,
}

impl PeakState {
    pub fn new() -> Self {
        PeakState::default()
    }

    /// Mean of all recorded intervals.
    pub fn interval_mean(&self) -> Option<f64> {
        if self.interval_count == 0 {
            None
        } else {
            Some(self.interval_sum / self.interval_count as f64)
        }
    }

    /// Starts a (new) segment at a seed peak; the seed has no incoming interval.
    pub fn seed(&mut self, t: f64) {
        self.last_peak = Some(t);
        self.last_interval = None;
    }

    /// Confirms a peak one interval after the previous one.
    pub fn advance(&mut self, t: f64, interval: f64) {
        self.last_peak = Some(t);
        self.last_interval = Some(interval);
        self.interval_sum += interval;
        self.interval_count += 1;
    }
}

/// One candidate peak.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub time: f64,
    /// Interval from the previous confirmed peak, seconds.
    pub interval: f64,
    /// Normalized amplitude at the candidate sample.
    pub amplitude: f64,
}

/// Candidates of one selection step, ordered by time.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CandidateSet {
    pub candidates: Vec<Candidate>,
}

/// Builds the candidate set for the window after the last confirmed peak.
/// The window is truncated at the signal end; an empty result is reported as
/// `NoCandidate`.
pub fn candidate_set(
    normalized: &[f64],
    sample_rate: f64,
    start_time: f64,
    last_peak: f64,
    cfg: &DetectorConfig,
) -> Result<CandidateSet, DetectError> {
    let signal_end = start_time + (normalized.len().saturating_sub(1)) as f64 / sample_rate;
    let w_start = last_peak + cfg.y_min;
    let w_end = (last_peak + cfg.y_max).min(signal_end);
    if !(w_start < w_end) {
        return Err(DetectError::NoCandidate {
            start: w_start,
            end: w_end,
        });
    }
    let indices = local_maxima(normalized, sample_rate, start_time, (w_start, w_end))
        .map_err(|_| DetectError::NoCandidate {
            start: w_start,
            end: w_end,
        })?;
    let candidates: Vec<Candidate> = indices
        .into_iter()
        .map(|i| {
            let t = start_time + i as f64 / sample_rate;
            Candidate {
                time: t,
                interval: t - last_peak,
                amplitude: normalized[i],
            }
        })
        .collect();
    if candidates.is_empty() {
        return Err(DetectError::NoCandidate {
            start: w_start,
            end: w_end,
        });
    }
    Ok(CandidateSet { candidates })
}

/// Prior density of a candidate interval given the detector state. Requires a
/// previous interval; the spectrum falls back to uniform when absent.
pub fn prior_term(interval: f64, state: &PeakState, cfg: &DetectorConfig) -> Result<f64, DetectError> {
    let last = state.last_interval.ok_or_else(|| {
        DetectError::State("prior needs at least one recorded interval".to_string())
    })?;
    let mean = state
        .interval_mean()
        .expect("an interval was recorded, so the mean exists");
    let periodicity = match &state.spectrum {
        Some(s) => s.eval(interval),
        None => 0.0,
    };
    Ok(gaussian_pdf(interval, last, cfg.sigma1)
        + cfg.beta * gaussian_pdf(interval, mean, cfg.sigma2)
        + cfg.gamma * periodicity)
}

/// Index of the best score; ties keep the earliest entry.
/// Relative slack under which two scores count as equal. Normalization and
/// the prior mixture each cost a few ulps, so a strict comparison would turn
/// the smaller-interval tie rule into rounding roulette.
const SCORE_TIE_REL: f64 = 1e-9;

fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] * (1.0 + SCORE_TIE_REL) {
            best = i;
        }
    }
    best
}

/// Picks the candidate maximizing likelihood alone; ties go to the smaller
/// interval. Used for bootstrap steps and the uniform-prior variant.
pub fn pick_by_amplitude(set: &CandidateSet, cfg: &DetectorConfig) -> Result<Candidate, DetectError> {
    let scores: Vec<f64> = set
        .candidates
        .iter()
        .map(|c| likelihood_term(c.amplitude, cfg.alpha))
        .collect::<Result<_, _>>()?;
    Ok(set.candidates[argmax(&scores)])
}

/// Scores every candidate by likelihood times prior and returns the best;
/// ties go to the smaller interval. Pure in all inputs.
pub fn select_next(
    set: &CandidateSet,
    state: &PeakState,
    cfg: &DetectorConfig,
) -> Result<Candidate, DetectError> {
    if set.candidates.is_empty() {
        return Err(DetectError::NoCandidate {
            start: f64::NAN,
            end: f64::NAN,
        });
    }
    if cfg.uniform_prior {
        return pick_by_amplitude(set, cfg);
    }
    let mut scores = Vec::with_capacity(set.candidates.len());
    for c in &set.candidates {
        let likelihood = likelihood_term(c.amplitude, cfg.alpha)?;
        let prior = prior_term(c.interval, state, cfg)?;
        scores.push(likelihood * prior);
    }
    Ok(set.candidates[argmax(&scores)])
}

fn single_channel<'a>(signal: &'a SampledSignal) -> Result<&'a [f64], DetectError> {
    if signal.values.len() != 1 {
        return Err(DetectError::Domain(format!(
            "expected a single-channel signal, got {} channels",
            signal.values.len()
        )));
    }
    Ok(&signal.values[0])
}

/// First index of the maximum normalized amplitude inside [from, to].
fn window_argmax(
    normalized: &[f64],
    sample_rate: f64,
    start_time: f64,
    from: f64,
    to: f64,
) -> Option<usize> {
    let n = normalized.len();
    let lo = (((from - start_time) * sample_rate).ceil() as i64).max(0) as usize;
    let hi_f = ((to - start_time) * sample_rate).floor();
    if hi_f < 0.0 || lo >= n {
        return None;
    }
    let hi = (hi_f as usize).min(n - 1);
    if lo > hi {
        return None;
    }
    let mut best = lo;
    for i in lo + 1..=hi {
        if normalized[i] > normalized[best] {
            best = i;
        }
    }
    Some(best)
}

/// Detects beats over a single-channel signal and returns beat intervals with
/// dropout spans. Bootstrap: the first peak is the global amplitude maximum in
/// the first y_max seconds, and the first interval is chosen by likelihood
/// alone. On a window without candidates the detector re-seeds the same way
/// after the failure point and records the bridged gap as a dropout.
pub fn detect_rri_sequence(
    signal: &SampledSignal,
    cfg: &DetectorConfig,
) -> Result<RriSequence, DetectError> {
    cfg.validate()?;
    let values = single_channel(signal)?;
    let rate = signal.sample_rate;
    if signal.duration() <= 2.0 * cfg.y_max {
        return Err(DetectError::SignalTooShort(format!(
            "duration {:.3}s, need more than {:.3}s",
            signal.duration(),
            2.0 * cfg.y_max
        )));
    }
    let normalized = normalize_amplitude(values, rate, cfg.amp_window, cfg.amp_floor);
    let t0 = signal.start_time;
    let end = signal.end_time().expect("nonempty signal");

    let mut out = RriSequence::default();
    let mut state = PeakState::new();
    let seed_idx = window_argmax(&normalized, rate, t0, t0, t0 + cfg.y_max)
        .expect("bootstrap window is inside the signal");
    let seed_t = t0 + seed_idx as f64 / rate;
    out.peak_times.push(seed_t);
    state.seed(seed_t);

    loop {
        let last_t = state.last_peak.expect("state is seeded");
        if last_t + cfg.y_min >= end {
            break;
        }
        match candidate_set(&normalized, rate, t0, last_t, cfg) {
            Ok(set) => {
                let history_end = (((last_t - t0) * rate).round() as usize + 1).min(values.len());
                state.spectrum = Some(periodicity_spectrum(&normalized, rate, history_end, cfg));
                let chosen = if state.last_interval.is_some() {
                    select_next(&set, &state, cfg)?
                } else {
                    pick_by_amplitude(&set, cfg)?
                };
                out.peak_times.push(chosen.time);
                out.intervals.push(chosen.interval);
                out.interval_times.push(chosen.time);
                state.advance(chosen.time, chosen.interval);
            }
            Err(DetectError::NoCandidate { .. }) => {
                let from = last_t + cfg.y_min;
                if from + cfg.y_max > end {
                    break;
                }
                let seed_idx = match window_argmax(&normalized, rate, t0, from, from + cfg.y_max) {
                    Some(i) => i,
                    None => break,
                };
                let seed_t = t0 + seed_idx as f64 / rate;
                let prior_seed_failed = state.last_interval.is_none()
                    && out.dropouts.last().is_some_and(|&(_, b)| b == last_t);
                if prior_seed_failed {
                    // The previous seed confirmed nothing; it was noise. Fold
                    // this failure into the pending dropout instead of
                    // chaining micro-gaps.
                    out.peak_times.pop();
                    let (gap_start, _) = out.dropouts.pop().expect("checked above");
                    out.dropouts.push((gap_start, seed_t));
                } else {
                    out.dropouts.push((last_t, seed_t));
                }
                out.peak_times.push(seed_t);
                state.seed(seed_t);
            }
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// Detects blinks over a single-channel signal: per window the gated local
/// maximum with the highest amplitude wins; windows without a gated candidate
/// advance silently.
pub fn detect_blinks(
    signal: &SampledSignal,
    cfg: &DetectorConfig,
) -> Result<EventSeries, DetectError> {
    cfg.validate()?;
    let values = single_channel(signal)?;
    let rate = signal.sample_rate;
    if signal.duration() <= 2.0 * cfg.y_max {
        return Err(DetectError::SignalTooShort(format!(
            "duration {:.3}s, need more than {:.3}s",
            signal.duration(),
            2.0 * cfg.y_max
        )));
    }
    let normalized = normalize_amplitude(values, rate, cfg.amp_window, cfg.amp_floor);
    let t0 = signal.start_time;
    let end = signal.end_time().expect("nonempty signal");

    let mut events = EventSeries::new();
    // Bootstrap: strongest sample of the first window, if it clears the gate.
    let mut anchor = t0;
    let mut seeded = false;
    while !seeded {
        if anchor + 1.0 / rate >= end {
            return Ok(events);
        }
        let idx = match window_argmax(&normalized, rate, t0, anchor, anchor + cfg.y_max) {
            Some(i) => i,
            None => return Ok(events),
        };
        if normalized[idx] >= cfg.amp_gate {
            let t = t0 + idx as f64 / rate;
            events.push(t, EventKind::Blink);
            anchor = t;
            seeded = true;
        } else {
            anchor += cfg.y_max;
        }
    }

    while anchor + cfg.y_min < end {
        match candidate_set(&normalized, rate, t0, anchor, cfg) {
            Ok(set) => {
                let gated = CandidateSet {
                    candidates: set
                        .candidates
                        .into_iter()
                        .filter(|c| c.amplitude >= cfg.amp_gate)
                        .collect(),
                };
                if gated.candidates.is_empty() {
                    anchor += cfg.y_max - cfg.y_min;
                } else {
                    let chosen = pick_by_amplitude(&gated, cfg)?;
                    events.push(chosen.time, EventKind::Blink);
                    anchor = chosen.time;
                }
            }
            Err(DetectError::NoCandidate { .. }) => {
                anchor += cfg.y_max - cfg.y_min;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(events)
}

/// Naive comparison detector: accepts every local maximum whose normalized
/// amplitude clears a fixed threshold, with a refractory period of y_min.
pub fn threshold_detect(signal: &SampledSignal, cfg: &DetectorConfig, threshold: f64) -> Vec<f64> {
    let Ok(values) = single_channel(signal) else {
        return Vec::new();
    };
    let rate = signal.sample_rate;
    let normalized = normalize_amplitude(values, rate, cfg.amp_window, cfg.amp_floor);
    let mut peaks = Vec::new();
    let mut last = f64::NEG_INFINITY;
    for i in local_max_indices(&normalized) {
        let t = signal.start_time + i as f64 / rate;
        if normalized[i] >= threshold && t - last >= cfg.y_min {
            peaks.push(t);
            last = t;
        }
    }
    peaks
}
