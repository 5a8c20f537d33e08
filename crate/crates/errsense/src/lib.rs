//! Work-condition classification from wearable biometric and movement sensors.
//!
//! The crate covers the full path from raw sensor files to evaluation reports:
//!
//! - [`data`]: signal, trial and manifest types plus CSV ingestion
//! - [`synth`]: synthetic dataset generator with ground-truth sidecars
//! - [`peaks`]: probabilistic R-peak and blink detection
//! - [`biometrics`]: heart-rate-variability, gaze, blink and EEG features
//! - [`movement`]: accelerometer and body-pose movement features
//! - [`pipeline`]: feature registry, calm-baseline relativization, imputation, scaling
//! - [`selection`]: greedy forward selection, PCA projection, fixed lists, sensor masking
//! - [`classify`]: MLP and k-NN models with cycle-fold and leave-one-subject-out evaluation
//! - [`report`]: accuracy tables and per-condition feature plots

pub mod biometrics;
pub mod classify;
pub mod data;
pub mod movement;
pub mod peaks;
pub mod pipeline;
pub mod report;
pub mod selection;
pub mod synth;
