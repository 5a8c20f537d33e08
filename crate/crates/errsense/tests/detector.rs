//! Detector behaviour on generated signals with known ground truth.

use errsense::data::Condition;
use errsense::peaks::{detect_blinks, detect_rri_sequence, threshold_detect, DetectorConfig};
use errsense::synth::{gen_ecg, gen_eog, match_events, rng_stream, SynthConfig};

/// R-peak F1 of the probabilistic detector on one generated trial.
fn ecg_f1(cfg: &SynthConfig, tag: &str) -> f64 {
    let mut rng = rng_stream(cfg.seed, tag);
    let (signal, truth) = gen_ecg(cfg, Condition::Normal, &mut rng).unwrap();
    let rri = detect_rri_sequence(&signal, &DetectorConfig::ecg()).unwrap();
    match_events(&truth.r_peak_times, &rri.peak_times, 0.05).f1()
}

fn clean_cfg(seed: u64) -> SynthConfig {
    SynthConfig {
        seed,
        snr_db: Some(20.0),
        artifact_rate: 0.0,
        trial_duration: 120.0,
        ..SynthConfig::default()
    }
}

#[test]
fn clean_ecg_is_detected_almost_perfectly() {
    for seed in [1, 2, 3] {
        let f1 = ecg_f1(&clean_cfg(seed), "clean");
        assert!(f1 >= 0.99, "seed {seed}: clean F1 {f1}");
    }
}

#[test]
fn heavy_noise_and_artifacts_degrade_detection() {
    let seeds: Vec<u64> = (10..25).collect();
    let long = |s: u64| SynthConfig {
        trial_duration: 300.0,
        ..clean_cfg(s)
    };
    let mean = |cfgs: &[SynthConfig]| -> f64 {
        cfgs.iter().map(|c| ecg_f1(c, "degrade")).sum::<f64>() / cfgs.len() as f64
    };
    let clean: Vec<SynthConfig> = seeds.iter().map(|&s| long(s)).collect();
    let noisy: Vec<SynthConfig> = seeds
        .iter()
        .map(|&s| SynthConfig {
            snr_db: Some(0.0),
            artifact_rate: 6.0,
            ..long(s)
        })
        .collect();
    let clean_f1 = mean(&clean);
    let noisy_f1 = mean(&noisy);
    println!("mean F1 clean={clean_f1:.4} noisy={noisy_f1:.4}");
    assert!(clean_f1 > noisy_f1, "noise must cost measurable F1");
}

#[test]
fn probabilistic_detector_outperforms_fixed_threshold_under_noise() {
    let mut margin_sum = 0.0;
    let seeds = 20;
    for seed in 0..seeds {
        let cfg = SynthConfig {
            snr_db: Some(0.0),
            artifact_rate: 6.0,
            ..clean_cfg(100 + seed)
        };
        let mut rng = rng_stream(cfg.seed, "margin");
        let (signal, truth) = gen_ecg(&cfg, Condition::Normal, &mut rng).unwrap();
        let det = DetectorConfig::ecg();
        let rri = detect_rri_sequence(&signal, &det).unwrap();
        let prob_f1 = match_events(&truth.r_peak_times, &rri.peak_times, 0.05).f1();
        let naive = threshold_detect(&signal, &det, 0.6);
        let naive_f1 = match_events(&truth.r_peak_times, &naive, 0.05).f1();
        println!("seed {seed}: probabilistic={prob_f1:.4} naive={naive_f1:.4}");
        margin_sum += prob_f1 - naive_f1;
    }
    let mean_margin = margin_sum / seeds as f64;
    println!("mean margin = {mean_margin:.4}");
    assert!(
        mean_margin >= 0.05,
        "probabilistic must beat the naive detector by 0.05, got {mean_margin:.4}"
    );
}

#[test]
fn low_noise_blink_recall_is_high() {
    let mut recalls = Vec::new();
    for seed in 0..10 {
        let cfg = SynthConfig {
            seed: 300 + seed,
            snr_db: Some(60.0),
            blink_rate: 20.0,
            trial_duration: 120.0,
            ..SynthConfig::default()
        };
        let mut rng = rng_stream(cfg.seed, "blinklow");
        let (signal, truth) = gen_eog(&cfg, Condition::Normal, &mut rng).unwrap();
        let blinks = detect_blinks(&signal, &DetectorConfig::blink()).unwrap();
        recalls.push(match_events(&truth.blink_times, &blinks.times, 0.2).recall());
    }
    let mean = recalls.iter().sum::<f64>() / recalls.len() as f64;
    println!("low-noise blink recall per seed: {recalls:?}");
    assert!(mean >= 0.95, "mean low-noise blink recall {mean:.4}");
}

#[test]
fn drift_without_blinks_stays_mostly_silent() {
    let mut per_minute = Vec::new();
    for seed in 0..10 {
        let cfg = SynthConfig {
            seed: 400 + seed,
            snr_db: None,
            blink_rate: 0.0,
            trial_duration: 120.0,
            ..SynthConfig::default()
        };
        let mut rng = rng_stream(cfg.seed, "driftonly");
        let (signal, _) = gen_eog(&cfg, Condition::Normal, &mut rng).unwrap();
        let blinks = detect_blinks(&signal, &DetectorConfig::blink()).unwrap();
        per_minute.push(blinks.times.len() as f64 / 2.0);
    }
    let mean = per_minute.iter().sum::<f64>() / per_minute.len() as f64;
    println!("false blinks per minute on pure drift: {per_minute:?}");
    assert!(mean <= 1.0, "mean false-blink rate {mean:.3}/min on pure drift");
}

#[test]
fn blink_f1_does_not_improve_with_more_noise() {
    let levels = [Some(60.0), Some(20.0), Some(0.0)];
    let mut means = Vec::new();
    for &snr in &levels {
        let mut sum = 0.0;
        let seeds = 20;
        for seed in 0..seeds {
            let cfg = SynthConfig {
                seed: 200 + seed,
                snr_db: snr,
                blink_rate: 20.0,
                trial_duration: 120.0,
                ..SynthConfig::default()
            };
            let mut rng = rng_stream(cfg.seed, "blinksweep");
            let (signal, truth) = gen_eog(&cfg, Condition::Normal, &mut rng).unwrap();
            let blinks = detect_blinks(&signal, &DetectorConfig::blink()).unwrap();
            sum += match_events(&truth.blink_times, &blinks.times, 0.2).f1();
        }
        means.push(sum / 20.0);
    }
    println!("blink F1 by snr {levels:?}: {means:?}");
    for w in means.windows(2) {
        assert!(
            w[1] <= w[0] + 0.01,
            "mean blink F1 must not improve as noise grows: {means:?}"
        );
    }
}
