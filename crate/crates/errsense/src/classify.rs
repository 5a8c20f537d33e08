//! Condition classifiers and the evaluation harness.
//!
//! A small fully connected network (rectifier hidden layers, softmax output,
//! cross-entropy loss) is the primary model; a k-nearest-neighbour vote is
//! kept as a cheap independent baseline. The harness runs cycle-split 3-fold
//! or leave-one-subject-out cross-validation with imputation and
//! standardization fitted per fold on training rows only.

use crate::data::Condition;
use crate::pipeline::FeatureVector;
use crate::selection::{pca_project, PcaModel, SelectionError, SelectionResult};
use crate::synth::rng_stream;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ClassifyError {
    #[error("labels contain fewer than two classes")]
    DegenerateLabels,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("invalid classifier config: {0}")]
    Config(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("confusion matrix has no entries")]
    EmptyMatrix,
    #[error(transparent)]
    Selection(#[from] SelectionError),
}

/// Network and schedule settings. The learning rate at epoch `t` (1-based)
/// is `initial_lr / t^decay_exponent`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub hidden: Vec<usize>,
    pub initial_lr: f64,
    pub decay_exponent: f64,
    pub epochs: usize,
    /// `None` trains full-batch; `Some(b)` walks fixed chunks of `b` rows.
    pub batch_size: Option<usize>,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            hidden: vec![200, 50, 50],
            initial_lr: 0.03,
            decay_exponent: 0.5,
            epochs: 500,
            batch_size: None,
            seed: 0,
        }
    }
}

impl MlpConfig {
    pub fn validate(&self) -> Result<(), ClassifyError> {
        if self.hidden.iter().any(|&h| h == 0) {
            return Err(ClassifyError::Config("hidden sizes must be positive".into()));
        }
        if !(self.initial_lr > 0.0) {
            return Err(ClassifyError::Config("initial_lr must be > 0".into()));
        }
        if self.epochs == 0 {
            return Err(ClassifyError::Config("epochs must be >= 1".into()));
        }
        if self.batch_size == Some(0) {
            return Err(ClassifyError::Config("batch_size must be positive".into()));
        }
        Ok(())
    }
}

/// Trained network. `weights[l][o][i]` connects input `i` of layer `l` to its
/// output `o`; hidden activations are rectified, the last layer feeds softmax.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub layer_sizes: Vec<usize>,
    pub weights: Vec<Vec<Vec<f64>>>,
    pub biases: Vec<Vec<f64>>,
    pub seed: u64,
}

fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

impl MlpModel {
    fn layers(&self) -> usize {
        self.weights.len()
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn classes(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    /// Pre-softmax activations of every layer for one row.
    fn forward(&self, row: &[f64]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let mut acts = vec![row.to_vec()];
        let mut pre = Vec::with_capacity(self.layers());
        for l in 0..self.layers() {
            let z: Vec<f64> = self.weights[l]
                .iter()
                .zip(&self.biases[l])
                .map(|(w, b)| b + w.iter().zip(&acts[l]).map(|(wi, a)| wi * a).sum::<f64>())
                .collect();
            let a = if l + 1 < self.layers() {
                z.iter().map(|&v| v.max(0.0)).collect()
            } else {
                z.clone()
            };
            pre.push(z);
            acts.push(a);
        }
        (acts, pre)
    }

    /// Class probabilities for one row.
    pub fn probabilities(&self, row: &[f64]) -> Result<Vec<f64>, ClassifyError> {
        if row.len() != self.input_dim() {
            return Err(ClassifyError::Dimension {
                expected: self.input_dim(),
                got: row.len(),
            });
        }
        let (_, pre) = self.forward(row);
        Ok(softmax(pre.last().unwrap()))
    }

    /// Mean cross-entropy over the rows.
    pub fn loss(&self, rows: &[Vec<f64>], labels: &[usize]) -> f64 {
        let mut total = 0.0;
        for (row, &y) in rows.iter().zip(labels) {
            let (_, pre) = self.forward(row);
            let z = pre.last().unwrap();
            let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
            total += lse - z[y];
        }
        total / rows.len() as f64
    }

    /// Analytic gradients of [`MlpModel::loss`] with respect to every weight
    /// and bias, in the same shapes as the parameters.
    pub fn gradients(
        &self,
        rows: &[Vec<f64>],
        labels: &[usize],
    ) -> (Vec<Vec<Vec<f64>>>, Vec<Vec<f64>>) {
        let n = rows.len() as f64;
        let mut gw: Vec<Vec<Vec<f64>>> = self
            .weights
            .iter()
            .map(|l| l.iter().map(|w| vec![0.0; w.len()]).collect())
            .collect();
        let mut gb: Vec<Vec<f64>> = self.biases.iter().map(|b| vec![0.0; b.len()]).collect();
        for (row, &y) in rows.iter().zip(labels) {
            let (acts, pre) = self.forward(row);
            let mut delta = softmax(pre.last().unwrap());
            delta[y] -= 1.0;
            for l in (0..self.layers()).rev() {
                for (o, &d) in delta.iter().enumerate() {
                    gb[l][o] += d / n;
                    for (i, a) in acts[l].iter().enumerate() {
                        gw[l][o][i] += d * a / n;
                    }
                }
                if l > 0 {
                    delta = (0..self.layer_sizes[l])
                        .map(|i| {
                            if pre[l - 1][i] > 0.0 {
                                delta
                                    .iter()
                                    .enumerate()
                                    .map(|(o, d)| self.weights[l][o][i] * d)
                                    .sum()
                            } else {
                                0.0
                            }
                        })
                        .collect();
                }
            }
        }
        (gw, gb)
    }
}

/// Trains the network by gradient descent on cross-entropy loss under the
/// decaying learning-rate schedule. Deterministic given the config seed.
pub fn mlp_train(
    rows: &[Vec<f64>],
    labels: &[usize],
    classes: usize,
    cfg: &MlpConfig,
) -> Result<MlpModel, ClassifyError> {
    cfg.validate()?;
    if classes < 2 {
        return Err(ClassifyError::Config("need at least 2 classes".into()));
    }
    if rows.is_empty() || rows.len() != labels.len() {
        return Err(ClassifyError::Config(format!(
            "{} rows vs {} labels",
            rows.len(),
            labels.len()
        )));
    }
    let dim = rows[0].len();
    if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
        return Err(ClassifyError::Dimension {
            expected: dim,
            got: bad.len(),
        });
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= classes) {
        return Err(ClassifyError::Config(format!(
            "label {bad} outside 0..{classes}"
        )));
    }
    let distinct: std::collections::BTreeSet<usize> = labels.iter().copied().collect();
    if distinct.len() < 2 {
        return Err(ClassifyError::DegenerateLabels);
    }

    let mut sizes = vec![dim];
    sizes.extend_from_slice(&cfg.hidden);
    sizes.push(classes);
    let mut rng = rng_stream(cfg.seed, "mlp-init");
    let mut weights = Vec::with_capacity(sizes.len() - 1);
    let mut biases = Vec::with_capacity(sizes.len() - 1);
    for l in 0..sizes.len() - 1 {
        let scale = 1.0 / (sizes[l] as f64).sqrt();
        weights.push(
            (0..sizes[l + 1])
                .map(|_| (0..sizes[l]).map(|_| rng.gen_range(-scale..scale)).collect())
                .collect::<Vec<Vec<f64>>>(),
        );
        biases.push(vec![0.0; sizes[l + 1]]);
    }
    let mut model = MlpModel {
        layer_sizes: sizes,
        weights,
        biases,
        seed: cfg.seed,
    };

    let batch = cfg.batch_size.unwrap_or(rows.len()).min(rows.len());
    let order: Vec<usize> = (0..rows.len()).collect();
    for t in 1..=cfg.epochs {
        let lr = cfg.initial_lr / (t as f64).powf(cfg.decay_exponent);
        for chunk in order.chunks(batch) {
            let chunk_rows: Vec<Vec<f64>> = chunk.iter().map(|&i| rows[i].clone()).collect();
            let chunk_labels: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
            let (gw, gb) = model.gradients(&chunk_rows, &chunk_labels);
            for l in 0..model.weights.len() {
                for o in 0..model.weights[l].len() {
                    model.biases[l][o] -= lr * gb[l][o];
                    for i in 0..model.weights[l][o].len() {
                        model.weights[l][o][i] -= lr * gw[l][o][i];
                    }
                }
            }
        }
    }
    Ok(model)
}

/// Predicted labels (argmax of softmax, ties to the lower class index) and
/// full probability rows.
pub fn mlp_predict(
    model: &MlpModel,
    rows: &[Vec<f64>],
) -> Result<(Vec<usize>, Vec<Vec<f64>>), ClassifyError> {
    let mut labels = Vec::with_capacity(rows.len());
    let mut probs = Vec::with_capacity(rows.len());
    for row in rows {
        let p = model.probabilities(row)?;
        let mut best = 0;
        for (c, &v) in p.iter().enumerate().skip(1) {
            if v > p[best] {
                best = c;
            }
        }
        labels.push(best);
        probs.push(p);
    }
    Ok((labels, probs))
}

/// Majority vote of the `k` nearest training rows by Euclidean distance.
/// Vote ties go to the class with the smaller summed distance among the
/// tied classes, then to the lower class index.
pub fn knn_predict(
    train_rows: &[Vec<f64>],
    train_labels: &[usize],
    query: &[f64],
    k: usize,
) -> Result<usize, ClassifyError> {
    if k == 0 || k > train_rows.len() {
        return Err(ClassifyError::Config(format!(
            "k = {k} outside 1..={}",
            train_rows.len()
        )));
    }
    if train_rows.len() != train_labels.len() {
        return Err(ClassifyError::Config("rows and labels differ in length".into()));
    }
    let mut dists: Vec<(f64, usize)> = train_rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            if row.len() != query.len() {
                return Err(ClassifyError::Dimension {
                    expected: query.len(),
                    got: row.len(),
                });
            }
            let d = row
                .iter()
                .zip(query)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            Ok((d, i))
        })
        .collect::<Result<_, _>>()?;
    dists.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut votes: std::collections::BTreeMap<usize, (usize, f64)> = Default::default();
    for &(d, i) in dists.iter().take(k) {
        let entry = votes.entry(train_labels[i]).or_insert((0, 0.0));
        entry.0 += 1;
        entry.1 += d;
    }
    let top = votes.values().map(|&(c, _)| c).max().unwrap();
    Ok(votes
        .iter()
        .filter(|(_, &(c, _))| c == top)
        .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1).then(a.0.cmp(b.0)))
        .map(|(&label, _)| label)
        .unwrap())
}

/// 3×3 confusion counts, `counts[truth][predicted]`, class order
/// (Normal, TimePressure, MultiTask). Entries are real-valued so fold
/// averages keep their fractional parts.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[f64; 3]; 3],
}

impl ConfusionMatrix {
    pub fn from_pairs(truth: &[usize], predicted: &[usize]) -> Result<Self, ClassifyError> {
        if truth.len() != predicted.len() {
            return Err(ClassifyError::Config(
                "truth and prediction lengths differ".into(),
            ));
        }
        let mut counts = [[0.0; 3]; 3];
        for (&t, &p) in truth.iter().zip(predicted) {
            if t >= 3 || p >= 3 {
                return Err(ClassifyError::Config(format!("label pair ({t},{p}) outside 0..3")));
            }
            counts[t][p] += 1.0;
        }
        Ok(ConfusionMatrix { counts })
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().flatten().sum()
    }

    pub fn row_sums(&self) -> [f64; 3] {
        [0, 1, 2].map(|r| self.counts[r].iter().sum())
    }

    pub fn add(&mut self, other: &ConfusionMatrix) {
        for r in 0..3 {
            for c in 0..3 {
                self.counts[r][c] += other.counts[r][c];
            }
        }
    }

    pub fn scaled(&self, factor: f64) -> ConfusionMatrix {
        let mut out = *self;
        for row in &mut out.counts {
            for v in row {
                *v *= factor;
            }
        }
        out
    }

    /// Entry-wise mean across folds.
    pub fn mean_of(matrices: &[ConfusionMatrix]) -> ConfusionMatrix {
        let mut sum = ConfusionMatrix::default();
        for m in matrices {
            sum.add(m);
        }
        sum.scaled(1.0 / matrices.len() as f64)
    }

    /// Three-class accuracy (trace / total) and collapsed binary accuracy,
    /// where the two non-normal conditions merge into one "abnormal" class
    /// on both axes.
    ///
    /// Entries may be raw trial counts or fold-averaged fractions. Averaged
    /// matrices printed to one decimal can leave the entry sum slightly off
    /// the true (integer) trial total — at most 0.05 per entry, 0.45 in all —
    /// so a total within that slack of an integer is treated as that integer
    /// trial count.
    pub fn score(&self) -> Result<(f64, f64), ClassifyError> {
        let raw = self.total();
        if !(raw > 0.0) {
            return Err(ClassifyError::EmptyMatrix);
        }
        let snapped = raw.round();
        let total = if snapped > 0.0 && (raw - snapped).abs() <= 0.45 {
            snapped
        } else {
            raw
        };
        let c = &self.counts;
        let acc3 = (c[0][0] + c[1][1] + c[2][2]) / total;
        let acc2 = (c[0][0] + c[1][1] + c[1][2] + c[2][1] + c[2][2]) / total;
        Ok((acc3, acc2))
    }
}

/// Which feature columns reach the model inside each fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FeatureChoice {
    /// Every column with at least one training value in the fold.
    All,
    /// Fixed registry indices.
    Subset(Vec<usize>),
    /// PCA onto `k` components, fitted on the fold's standardized training rows.
    Pca { k: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub model: MlpConfig,
    pub choice: FeatureChoice,
    /// Subjects that get no test fold under LOSO (their rows still train).
    pub exclude_subjects: Vec<String>,
    /// Provenance copied into the report; does not drive column choice.
    pub selection_record: Option<SelectionResult>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            model: MlpConfig::default(),
            choice: FeatureChoice::All,
            exclude_subjects: Vec::new(),
            selection_record: None,
        }
    }
}

/// Per-fold imputation medians and standardization statistics over the
/// chosen columns, fitted on training rows only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldScaler {
    pub columns: Vec<usize>,
    pub medians: Vec<f64>,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl FoldScaler {
    fn fit(train: &[&FeatureVector], columns: &[usize]) -> Result<FoldScaler, ClassifyError> {
        let mut medians = Vec::with_capacity(columns.len());
        for &col in columns {
            let mut present: Vec<f64> = train.iter().filter_map(|v| v.get(col)).collect();
            if present.is_empty() {
                return Err(ClassifyError::Protocol(format!(
                    "feature column {col} has no training values"
                )));
            }
            medians.push(crate::pipeline::median(&mut present));
        }
        let n = train.len() as f64;
        let mut means = Vec::with_capacity(columns.len());
        let mut stds = Vec::with_capacity(columns.len());
        for (j, &col) in columns.iter().enumerate() {
            let imputed: Vec<f64> = train
                .iter()
                .map(|v| v.get(col).unwrap_or(medians[j]))
                .collect();
            let mean = imputed.iter().sum::<f64>() / n;
            let var = imputed.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
            let std = var.sqrt();
            means.push(mean);
            stds.push(if std > 0.0 { std } else { 1.0 });
        }
        Ok(FoldScaler {
            columns: columns.to_vec(),
            medians,
            means,
            stds,
        })
    }

    pub fn transform(&self, v: &FeatureVector) -> Vec<f64> {
        self.columns
            .iter()
            .enumerate()
            .map(|(j, &col)| {
                let raw = v.get(col).unwrap_or(self.medians[j]);
                (raw - self.means[j]) / self.stds[j]
            })
            .collect()
    }

    /// FNV-1a over the serialized statistics; pins a model file to the
    /// exact preprocessing it was trained behind.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("scaler serializes");
        let mut h: u64 = 0xcbf29ce484222325;
        for b in json.as_bytes() {
            h ^= u64::from(*b);
            h = h.wrapping_mul(0x100000001b3);
        }
        format!("{h:016x}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub tag: String,
    pub confusion: ConfusionMatrix,
    pub acc3: f64,
    pub acc2: f64,
    pub test_trials: usize,
}

/// Fitted per-fold state, returned alongside the report so leakage checks
/// and artifact persistence can inspect exactly what training produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldArtifacts {
    pub tag: String,
    pub scaler: FoldScaler,
    pub model: MlpModel,
    pub pca: Option<PcaModel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub protocol: String,
    pub folds: Vec<FoldResult>,
    /// Accuracies of the summed fold counts (trial-count accuracy; equal to
    /// the fold mean when folds are the same size).
    pub mean_acc3: f64,
    pub mean_acc2: f64,
    pub selection: Option<SelectionResult>,
}

impl EvalReport {
    pub fn mean_confusion(&self) -> ConfusionMatrix {
        ConfusionMatrix::mean_of(&self.folds.iter().map(|f| f.confusion).collect::<Vec<_>>())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(s: &str) -> Result<EvalReport, serde_json::Error> {
        serde_json::from_str(s)
    }
}

struct Fold {
    tag: String,
    train: Vec<usize>,
    test: Vec<usize>,
}

fn cycle_folds(dataset: &[FeatureVector]) -> Result<Vec<Fold>, ClassifyError> {
    let mut per_subject: std::collections::BTreeMap<&str, std::collections::BTreeSet<u32>> =
        Default::default();
    for v in dataset {
        per_subject.entry(&v.subject).or_default().insert(v.cycle);
    }
    let mut iter = per_subject.iter();
    let (first_subject, cycles) = iter
        .next()
        .ok_or_else(|| ClassifyError::Protocol("empty dataset".into()))?;
    for (subject, set) in iter {
        if set != cycles {
            return Err(ClassifyError::Protocol(format!(
                "subject {subject} has cycles {set:?} but {first_subject} has {cycles:?}"
            )));
        }
    }
    if cycles.len() < 2 {
        return Err(ClassifyError::Protocol(
            "cycle split needs at least 2 cycles".into(),
        ));
    }
    Ok(cycles
        .iter()
        .map(|&c| Fold {
            tag: format!("cycle-{c}"),
            train: (0..dataset.len()).filter(|&i| dataset[i].cycle != c).collect(),
            test: (0..dataset.len()).filter(|&i| dataset[i].cycle == c).collect(),
        })
        .collect())
}

fn loso_folds(dataset: &[FeatureVector], exclude: &[String]) -> Result<Vec<Fold>, ClassifyError> {
    let subjects: std::collections::BTreeSet<&str> =
        dataset.iter().map(|v| v.subject.as_str()).collect();
    if subjects.len() < 2 {
        return Err(ClassifyError::Protocol(format!(
            "leave-one-subject-out needs at least 2 subjects, got {}",
            subjects.len()
        )));
    }
    let folds: Vec<Fold> = subjects
        .iter()
        .filter(|s| !exclude.iter().any(|e| e == *s))
        .map(|&s| Fold {
            tag: s.to_string(),
            train: (0..dataset.len()).filter(|&i| dataset[i].subject != s).collect(),
            test: (0..dataset.len()).filter(|&i| dataset[i].subject == s).collect(),
        })
        .collect();
    if folds.is_empty() {
        return Err(ClassifyError::Protocol(
            "exclusion list removed every test subject".into(),
        ));
    }
    Ok(folds)
}

/// Columns with at least one non-missing value among the given rows.
fn live_columns(train: &[&FeatureVector]) -> Vec<usize> {
    let width = train[0].values.len();
    (0..width)
        .filter(|&col| train.iter().any(|v| v.get(col).is_some()))
        .collect()
}

fn run_fold(
    dataset: &[FeatureVector],
    fold: &Fold,
    cfg: &EvalConfig,
) -> Result<(FoldResult, FoldArtifacts), ClassifyError> {
    let train: Vec<&FeatureVector> = fold.train.iter().map(|&i| &dataset[i]).collect();
    let test: Vec<&FeatureVector> = fold.test.iter().map(|&i| &dataset[i]).collect();
    let columns = match &cfg.choice {
        FeatureChoice::All | FeatureChoice::Pca { .. } => live_columns(&train),
        FeatureChoice::Subset(idx) => idx.clone(),
    };
    if columns.is_empty() {
        return Err(ClassifyError::Protocol("no feature columns to train on".into()));
    }
    let scaler = FoldScaler::fit(&train, &columns)?;
    let mut train_x: Vec<Vec<f64>> = train.iter().map(|v| scaler.transform(v)).collect();
    let mut test_x: Vec<Vec<f64>> = test.iter().map(|v| scaler.transform(v)).collect();
    let mut pca = None;
    if let FeatureChoice::Pca { k } = cfg.choice {
        let (ptrain, ptest, model) = pca_project(&train_x, &test_x, k)?;
        train_x = ptrain;
        test_x = ptest;
        pca = Some(model);
    }
    let train_y: Vec<usize> = train.iter().map(|v| v.condition.index()).collect();
    let test_y: Vec<usize> = test.iter().map(|v| v.condition.index()).collect();

    let mut model_cfg = cfg.model.clone();
    model_cfg.seed = rng_stream(cfg.model.seed, &format!("fold-{}", fold.tag)).gen::<u64>();
    let model = mlp_train(&train_x, &train_y, Condition::ALL.len(), &model_cfg)?;
    let (predicted, _) = mlp_predict(&model, &test_x)?;
    let confusion = ConfusionMatrix::from_pairs(&test_y, &predicted)?;
    let (acc3, acc2) = confusion.score()?;
    Ok((
        FoldResult {
            tag: fold.tag.clone(),
            confusion,
            acc3,
            acc2,
            test_trials: test.len(),
        },
        FoldArtifacts {
            tag: fold.tag.clone(),
            scaler,
            model,
            pca,
        },
    ))
}

fn evaluate(
    dataset: &[FeatureVector],
    cfg: &EvalConfig,
    folds: Vec<Fold>,
    protocol: &str,
) -> Result<(EvalReport, Vec<FoldArtifacts>), ClassifyError> {
    let width = dataset[0].values.len();
    if let Some(bad) = dataset.iter().find(|v| v.values.len() != width) {
        return Err(ClassifyError::Dimension {
            expected: width,
            got: bad.values.len(),
        });
    }
    let outcomes: Vec<(FoldResult, FoldArtifacts)> = folds
        .par_iter()
        .map(|fold| run_fold(dataset, fold, cfg))
        .collect::<Result<_, _>>()?;
    let (fold_results, artifacts): (Vec<FoldResult>, Vec<FoldArtifacts>) =
        outcomes.into_iter().unzip();
    let mut pooled = ConfusionMatrix::default();
    for f in &fold_results {
        pooled.add(&f.confusion);
    }
    let (mean_acc3, mean_acc2) = pooled.score()?;
    Ok((
        EvalReport {
            protocol: protocol.to_string(),
            folds: fold_results,
            mean_acc3,
            mean_acc2,
            selection: cfg.selection_record.clone(),
        },
        artifacts,
    ))
}

/// Cycle-split cross-validation: one fold per recording cycle, trained on
/// the other cycles. Every subject must have the same cycle set.
pub fn cv_by_cycle(
    dataset: &[FeatureVector],
    cfg: &EvalConfig,
) -> Result<(EvalReport, Vec<FoldArtifacts>), ClassifyError> {
    let folds = cycle_folds(dataset)?;
    evaluate(dataset, cfg, folds, "cycle3")
}

/// Leave-one-subject-out cross-validation. Subjects on the exclusion list
/// get no test fold but still contribute training rows to other folds.
pub fn loso_cv(
    dataset: &[FeatureVector],
    cfg: &EvalConfig,
) -> Result<(EvalReport, Vec<FoldArtifacts>), ClassifyError> {
    let folds = loso_folds(dataset, &cfg.exclude_subjects)?;
    evaluate(dataset, cfg, folds, "loso")
}

/// Persisted model artifact: the trained network plus the preprocessing it
/// expects, identified by the scaler hash.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub model: MlpModel,
    pub scaler: FoldScaler,
    pub scaler_hash: String,
    pub selection: Option<SelectionResult>,
}

impl ModelFile {
    pub fn new(model: MlpModel, scaler: FoldScaler, selection: Option<SelectionResult>) -> Self {
        let scaler_hash = scaler.hash();
        ModelFile {
            model,
            scaler,
            scaler_hash,
            selection,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model file serializes")
    }

    pub fn from_json(s: &str) -> Result<ModelFile, serde_json::Error> {
        serde_json::from_str(s)
    }
}

/// Trains one model on the full dataset (no folds) over the chosen columns;
/// the final-artifact path behind the train subcommand.
pub fn train_full(
    dataset: &[FeatureVector],
    cfg: &EvalConfig,
) -> Result<ModelFile, ClassifyError> {
    if dataset.is_empty() {
        return Err(ClassifyError::Protocol("empty dataset".into()));
    }
    let all: Vec<&FeatureVector> = dataset.iter().collect();
    let columns = match &cfg.choice {
        FeatureChoice::All | FeatureChoice::Pca { .. } => live_columns(&all),
        FeatureChoice::Subset(idx) => idx.clone(),
    };
    let scaler = FoldScaler::fit(&all, &columns)?;
    let mut rows: Vec<Vec<f64>> = all.iter().map(|v| scaler.transform(v)).collect();
    if let FeatureChoice::Pca { k } = cfg.choice {
        let (projected, _, _) = pca_project(&rows, &[], k)?;
        rows = projected;
    }
    let labels: Vec<usize> = all.iter().map(|v| v.condition.index()).collect();
    let model = mlp_train(&rows, &labels, Condition::ALL.len(), &cfg.model)?;
    Ok(ModelFile::new(model, scaler, cfg.selection_record.clone()))
}
