//! Movement features: accelerometer norm with and without the gravity
//! component, and joint-wise body-pose displacement.

use crate::data::{pose_channel, SampledSignal, POSE_JOINTS};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MovementError {
    #[error("channel mismatch: {0}")]
    ChannelMismatch(String),
    #[error("joint count error: {0}")]
    JointCount(String),
    #[error("not enough data: {0}")]
    InsufficientData(String),
}

/// Nonnegative per-sample movement magnitudes derived from one sensor stream.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MovementSeries {
    pub timestamps: Vec<f64>,
    pub values: Vec<f64>,
    /// Source joint (0..=16) for pose-derived series; `None` for acceleration.
    pub joint_index: Option<usize>,
}

impl MovementSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> Option<f64> {
        if self.values.is_empty() {
            None
        } else {
            Some(self.values.iter().sum::<f64>() / self.values.len() as f64)
        }
    }
}

fn acc_channels(acc: &SampledSignal) -> Result<(&[f64], &[f64], &[f64]), MovementError> {
    match (acc.channel("ax"), acc.channel("ay"), acc.channel("az")) {
        (Some(ax), Some(ay), Some(az)) => Ok((ax, ay, az)),
        _ => Err(MovementError::ChannelMismatch(format!(
            "expected ax/ay/az channels, found {:?}",
            acc.channels
        ))),
    }
}

/// Per-sample Euclidean norm of the three-axis acceleration.
pub fn acc_norm(acc: &SampledSignal) -> Result<MovementSeries, MovementError> {
    let (ax, ay, az) = acc_channels(acc)?;
    let values: Vec<f64> = (0..ax.len())
        .map(|i| (ax[i] * ax[i] + ay[i] * ay[i] + az[i] * az[i]).sqrt())
        .collect();
    Ok(MovementSeries {
        timestamps: (0..ax.len()).map(|i| acc.time_at(i)).collect(),
        values,
        joint_index: None,
    })
}

/// Acceleration norm with the gravity component removed: the absolute
/// deviation of each sample's norm from the trial-mean norm. A resting sensor
/// reads a constant norm (gravity only), so the series is zero by
/// construction; the absolute value keeps magnitudes nonnegative.
pub fn gravity_removed(acc: &SampledSignal) -> Result<MovementSeries, MovementError> {
    let mut series = acc_norm(acc)?;
    if !series.values.is_empty() {
        let mean = series.values.iter().sum::<f64>() / series.values.len() as f64;
        for v in &mut series.values {
            *v = (*v - mean).abs();
        }
    }
    Ok(series)
}

/// Per-joint inter-frame displacement: for each joint, the Euclidean distance
/// between its position in consecutive frames. Returns one series per joint;
/// each has one fewer sample than the pose stream, timestamped at the later
/// frame.
pub fn pose_displacement(pose: &SampledSignal) -> Result<Vec<MovementSeries>, MovementError> {
    if pose.channels.len() != POSE_JOINTS * 3 {
        return Err(MovementError::JointCount(format!(
            "expected {} pose channels ({} joints x 3 axes), found {}",
            POSE_JOINTS * 3,
            POSE_JOINTS,
            pose.channels.len()
        )));
    }
    let n = pose.len();
    if n < 2 {
        return Err(MovementError::InsufficientData(format!(
            "need at least 2 pose frames, got {n}"
        )));
    }
    let mut out = Vec::with_capacity(POSE_JOINTS);
    for joint in 0..POSE_JOINTS {
        let coords: Vec<&[f64]> = (0..3)
            .map(|axis| {
                pose.channel(&pose_channel(joint, axis)).ok_or_else(|| {
                    MovementError::ChannelMismatch(format!(
                        "missing pose channel {}",
                        pose_channel(joint, axis)
                    ))
                })
            })
            .collect::<Result<_, _>>()?;
        let values: Vec<f64> = (1..n)
            .map(|i| {
                coords
                    .iter()
                    .map(|c| (c[i] - c[i - 1]).powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .collect();
        out.push(MovementSeries {
            timestamps: (1..n).map(|i| pose.time_at(i)).collect(),
            values,
            joint_index: Some(joint),
        });
    }
    Ok(out)
}

/// Name of one pose movement feature, e.g. `pose_move_mean_j04`.
pub fn pose_feature_name(joint: usize) -> String {
    format!("pose_move_mean_j{joint:02}")
}

/// Trial-level movement summary: per-series means with absent sensors left
/// missing.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MovementFeatures {
    /// Mean acceleration norm.
    pub acc_move_mean: Option<f64>,
    /// Mean gravity-removed acceleration norm.
    pub acc_move_nograv_mean: Option<f64>,
    /// Mean displacement per joint.
    pub pose_move_mean: [Option<f64>; POSE_JOINTS],
}

impl MovementFeatures {
    /// Feature (name, value) pairs in registry order: 2 acceleration slots
    /// then 17 joint slots — 19 in total.
    pub fn named(&self) -> Vec<(String, Option<f64>)> {
        let mut out = Vec::with_capacity(2 + POSE_JOINTS);
        out.push(("acc_move_mean".to_string(), self.acc_move_mean));
        out.push(("acc_move_nograv_mean".to_string(), self.acc_move_nograv_mean));
        for (j, v) in self.pose_move_mean.iter().enumerate() {
            out.push((pose_feature_name(j), *v));
        }
        out
    }
}

/// Computes the 19 movement features from whichever sensors are present.
pub fn movement_trial_features(
    acc: Option<&SampledSignal>,
    pose: Option<&SampledSignal>,
) -> Result<MovementFeatures, MovementError> {
    let mut features = MovementFeatures::default();
    if let Some(acc) = acc {
        features.acc_move_mean = acc_norm(acc)?.mean();
        features.acc_move_nograv_mean = gravity_removed(acc)?.mean();
    }
    if let Some(pose) = pose {
        for series in pose_displacement(pose)? {
            features.pose_move_mean[series.joint_index.unwrap()] = series.mean();
        }
    }
    Ok(features)
}
