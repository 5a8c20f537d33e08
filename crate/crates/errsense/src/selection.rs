//! Feature-subset selection: greedy forward search, PCA projection, a
//! configured fixed list, and sensor-group masking for ablations.

use crate::pipeline::{FeatureRegistry, FeatureVector, SensorGroup};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SelectionError {
    #[error("invalid selection config: {0}")]
    Config(String),
    #[error("unknown feature: {0}")]
    UnknownFeature(String),
    #[error("rank error: {0}")]
    Rank(String),
}

/// Outcome of a selection run. `selected` is the best prefix of the greedy
/// path (for other methods, the whole list); `step_accuracies` records the
/// full search trajectory, which may extend past the chosen prefix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub method: String,
    pub selected: Vec<String>,
    pub step_accuracies: Vec<f64>,
    /// Validation accuracy of `selected`; `None` for methods that do not
    /// evaluate (fixed lists).
    pub best_accuracy: Option<f64>,
    /// Component count for projection-based selection; `None` otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pca_k: Option<usize>,
}

impl SelectionResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("selection result serializes")
    }

    pub fn from_json(s: &str) -> Result<SelectionResult, serde_json::Error> {
        serde_json::from_str(s)
    }

    /// Registry indices of the selected features.
    pub fn indices(&self, registry: &FeatureRegistry) -> Result<Vec<usize>, SelectionError> {
        self.selected
            .iter()
            .map(|name| {
                registry
                    .index_of(name)
                    .ok_or_else(|| SelectionError::UnknownFeature(name.clone()))
            })
            .collect()
    }
}

/// Greedy forward search: each step adds the candidate that maximizes the
/// supplied validation accuracy, ties going to the earlier registry position;
/// the reported selection is the accuracy-maximizing prefix of that path.
///
/// `eval` scores a feature-index subset (typically by cross-validated model
/// accuracy); candidate evaluations within one step run in parallel.
pub fn greedy_select(
    registry: &FeatureRegistry,
    candidates: &[usize],
    n_max: usize,
    eval: impl Fn(&[usize]) -> f64 + Sync,
) -> Result<SelectionResult, SelectionError> {
    if n_max < 1 {
        return Err(SelectionError::Config(
            "greedy selection needs n_max >= 1".to_string(),
        ));
    }
    if candidates.is_empty() {
        return Err(SelectionError::Config("no candidate features".to_string()));
    }
    if let Some(&bad) = candidates.iter().find(|&&i| i >= registry.len()) {
        return Err(SelectionError::Config(format!(
            "candidate index {bad} outside registry of {}",
            registry.len()
        )));
    }
    let mut path: Vec<usize> = Vec::new();
    let mut step_accuracies: Vec<f64> = Vec::new();
    for _ in 0..n_max.min(candidates.len()) {
        let remaining: Vec<usize> = candidates
            .iter()
            .copied()
            .filter(|i| !path.contains(i))
            .collect();
        let scores: Vec<f64> = remaining
            .par_iter()
            .map(|&f| {
                let mut subset = path.clone();
                subset.push(f);
                eval(&subset)
            })
            .collect();
        // Sequential argmax with strict > keeps ties on the earliest
        // candidate regardless of the parallel evaluation order.
        let mut best = 0;
        for (i, &s) in scores.iter().enumerate().skip(1) {
            if s > scores[best] {
                best = i;
            }
        }
        path.push(remaining[best]);
        step_accuracies.push(scores[best]);
    }
    let mut best_step = 0;
    for (i, &s) in step_accuracies.iter().enumerate().skip(1) {
        if s > step_accuracies[best_step] {
            best_step = i;
        }
    }
    Ok(SelectionResult {
        method: "greedy".to_string(),
        selected: path[..=best_step]
            .iter()
            .map(|&i| registry.name(i).to_string())
            .collect(),
        best_accuracy: Some(step_accuracies[best_step]),
        step_accuracies,
        pca_k: None,
    })
}

/// Fitted PCA basis. Components are rows, orthonormal, ordered by decreasing
/// eigenvalue, each signed so its largest-magnitude entry is positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    pub components: Vec<Vec<f64>>,
    /// Population variances along the components.
    pub eigenvalues: Vec<f64>,
    pub requested_k: usize,
}

impl PcaModel {
    pub fn k(&self) -> usize {
        self.components.len()
    }

    /// Whether the requested dimensionality had to be reduced to the
    /// covariance rank.
    pub fn reduced(&self) -> bool {
        self.k() < self.requested_k
    }

    pub fn project_one(&self, row: &[f64]) -> Vec<f64> {
        self.components
            .iter()
            .map(|c| {
                c.iter()
                    .zip(row)
                    .zip(&self.mean)
                    .map(|((w, x), m)| w * (x - m))
                    .sum()
            })
            .collect()
    }

    /// Maps a projection back into feature space.
    pub fn reconstruct(&self, z: &[f64]) -> Vec<f64> {
        let mut out = self.mean.clone();
        for (w, c) in z.iter().zip(&self.components) {
            for (o, v) in out.iter_mut().zip(c) {
                *o += w * v;
            }
        }
        out
    }
}

/// Eigenvalues below this fraction of the largest count as rank-deficient.
const PCA_RANK_TOL: f64 = 1e-10;

/// Projects both sets onto the top-`k` eigenvectors of the training
/// covariance. If the covariance rank falls below `k`, the dimensionality is
/// reduced to the rank (check [`PcaModel::reduced`]) rather than failing.
pub fn pca_project(
    train: &[Vec<f64>],
    apply: &[Vec<f64>],
    k: usize,
) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>, PcaModel), SelectionError> {
    let n = train.len();
    if n < 2 {
        return Err(SelectionError::Config(format!(
            "PCA needs at least 2 training rows, got {n}"
        )));
    }
    let d = train[0].len();
    if train.iter().chain(apply).any(|row| row.len() != d) {
        return Err(SelectionError::Config("ragged input rows".to_string()));
    }
    if k < 1 || k > d {
        return Err(SelectionError::Rank(format!(
            "k = {k} outside 1..={d}"
        )));
    }
    let mean: Vec<f64> = (0..d)
        .map(|j| train.iter().map(|row| row[j]).sum::<f64>() / n as f64)
        .collect();
    let mut cov = DMatrix::zeros(d, d);
    for row in train {
        let centered = DVector::from_iterator(d, row.iter().zip(&mean).map(|(x, m)| x - m));
        cov += &centered * centered.transpose();
    }
    cov /= n as f64;

    let eigen = cov.symmetric_eigen();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eigen.eigenvalues[b].total_cmp(&eigen.eigenvalues[a]));
    let max_eig = eigen.eigenvalues[order[0]].max(0.0);
    let rank = order
        .iter()
        .take_while(|&&i| eigen.eigenvalues[i] > PCA_RANK_TOL * max_eig.max(1e-300))
        .count();
    let kept = k.min(rank.max(1));

    let mut components = Vec::with_capacity(kept);
    let mut eigenvalues = Vec::with_capacity(kept);
    for &i in order.iter().take(kept) {
        let col = eigen.eigenvectors.column(i);
        let mut c: Vec<f64> = col.iter().copied().collect();
        // Deterministic sign: flip so the largest-magnitude entry is positive.
        let lead = c
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .map(|(j, _)| j)
            .unwrap();
        if c[lead] < 0.0 {
            for v in &mut c {
                *v = -*v;
            }
        }
        components.push(c);
        eigenvalues.push(eigen.eigenvalues[i].max(0.0));
    }
    let model = PcaModel {
        mean,
        components,
        eigenvalues,
        requested_k: k,
    };
    let project = |set: &[Vec<f64>]| set.iter().map(|row| model.project_one(row)).collect();
    Ok((project(train), project(apply), model))
}

/// Passthrough selection of a configured feature list.
pub fn fixed_list(
    names: &[String],
    registry: &FeatureRegistry,
) -> Result<SelectionResult, SelectionError> {
    let mut seen = std::collections::BTreeSet::new();
    for name in names {
        if registry.index_of(name).is_none() {
            return Err(SelectionError::UnknownFeature(name.clone()));
        }
        if !seen.insert(name) {
            return Err(SelectionError::Config(format!(
                "feature {name} listed twice"
            )));
        }
    }
    Ok(SelectionResult {
        method: "analysis-based".to_string(),
        selected: names.to_vec(),
        step_accuracies: Vec::new(),
        best_accuracy: None,
        pca_k: None,
    })
}

/// Default analysis-based list: the two gaze-event ratios plus a spread of
/// interval, blink, attention and movement features. Configuration, not
/// ground truth — override via the run config.
pub fn default_fixed_list() -> Vec<String> {
    [
        "visual_intake_ratio",
        "saccade_ratio",
        "ecg_mean_rri",
        "ecg_lf_hf_ratio",
        "watch_mean_rri",
        "blink_rate",
        "eeg_attention_mean",
        "std_gx",
        "acc_move_mean",
        "pose_move_mean_j00",
    ]
    .into_iter()
    .map(String::from)
    .collect()
}

/// Masks every feature outside the chosen sensor groups as missing; the
/// masked slots are later filled by fold-wise imputation like any other gap.
pub fn sensor_mask(
    dataset: &[FeatureVector],
    groups: &[SensorGroup],
    registry: &FeatureRegistry,
) -> Result<Vec<FeatureVector>, SelectionError> {
    if groups.is_empty() {
        return Err(SelectionError::Config(
            "sensor mask needs at least one group".to_string(),
        ));
    }
    let live: Vec<bool> = (0..registry.len())
        .map(|i| groups.contains(&registry.group(i)))
        .collect();
    Ok(dataset
        .iter()
        .map(|v| {
            let mut out = v.clone();
            for i in 0..registry.len() {
                if !live[i] {
                    out.set(i, None);
                }
            }
            out
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Condition;
    use crate::synth::rng_stream;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;

    /// Leave-one-out nearest-neighbour accuracy over the chosen dimensions —
    /// a cheap deterministic eval for exercising the greedy search.
    fn loo_nn_accuracy(rows: &[Vec<f64>], labels: &[usize], subset: &[usize]) -> f64 {
        let mut hits = 0;
        for i in 0..rows.len() {
            let mut best = None;
            let mut best_d = f64::INFINITY;
            for j in 0..rows.len() {
                if i == j {
                    continue;
                }
                let d: f64 = subset
                    .iter()
                    .map(|&f| (rows[i][f] - rows[j][f]).powi(2))
                    .sum();
                if d < best_d {
                    best_d = d;
                    best = Some(labels[j]);
                }
            }
            if best == Some(labels[i]) {
                hits += 1;
            }
        }
        hits as f64 / rows.len() as f64
    }

    /// Two-class dataset where only `signal_dim` separates the classes.
    fn planted_dataset(seed: u64, dims: usize, signal_dim: usize) -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut rng = rng_stream(seed, "planted");
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..24 {
            let label = i % 2;
            let row: Vec<f64> = (0..dims)
                .map(|d| {
                    if d == signal_dim {
                        label as f64 * 10.0 + rng.gen_range(-0.5..0.5)
                    } else {
                        rng.gen_range(-1.0..1.0)
                    }
                })
                .collect();
            rows.push(row);
            labels.push(label);
        }
        (rows, labels)
    }

    #[test]
    fn planted_separator_is_picked_first_with_perfect_step_accuracy() {
        let registry = FeatureRegistry::standard();
        let (rows, labels) = planted_dataset(1, 5, 3);
        let candidates: Vec<usize> = (0..5).collect();
        let result = greedy_select(&registry, &candidates, 3, |subset| {
            loo_nn_accuracy(&rows, &labels, subset)
        })
        .unwrap();
        assert_eq!(result.selected[0], registry.name(3));
        assert_relative_eq!(result.step_accuracies[0], 1.0);
        assert_relative_eq!(result.best_accuracy.unwrap(), 1.0);
    }

    #[test]
    fn selection_is_the_best_prefix_of_the_search_path() {
        let registry = FeatureRegistry::standard();
        // Scores rigged so accuracy peaks at 2 features then declines.
        let result = greedy_select(&registry, &[0, 1, 2, 3], 4, |subset| match subset.len() {
            1 => 0.5,
            2 => 0.9,
            _ => 0.6,
        })
        .unwrap();
        assert_eq!(result.selected.len(), 2);
        assert_eq!(result.step_accuracies.len(), 4);
        assert_relative_eq!(result.best_accuracy.unwrap(), 0.9);
    }

    #[test]
    fn ties_go_to_the_earlier_registry_position() {
        let registry = FeatureRegistry::standard();
        let result = greedy_select(&registry, &[5, 2, 9], 1, |_| 0.7).unwrap();
        // Candidate order is preserved as given; the first evaluated wins.
        assert_eq!(result.selected, vec![registry.name(5).to_string()]);
    }

    #[test]
    fn single_candidate_registry_selects_that_feature() {
        let registry = FeatureRegistry::standard();
        let result = greedy_select(&registry, &[7], 10, |_| 0.1).unwrap();
        assert_eq!(result.selected, vec![registry.name(7).to_string()]);
    }

    #[test]
    fn zero_budget_is_rejected() {
        let registry = FeatureRegistry::standard();
        let err = greedy_select(&registry, &[0], 0, |_| 0.0).unwrap_err();
        assert!(matches!(err, SelectionError::Config(_)), "{err}");
    }

    #[test]
    fn reported_accuracy_matches_reevaluating_the_selection() {
        let registry = FeatureRegistry::standard();
        let (rows, labels) = planted_dataset(2, 6, 1);
        let eval = |subset: &[usize]| loo_nn_accuracy(&rows, &labels, subset);
        let result = greedy_select(&registry, &(0..6).collect::<Vec<_>>(), 4, eval).unwrap();
        let indices = result.indices(&registry).unwrap();
        assert_relative_eq!(eval(&indices), result.best_accuracy.unwrap());
    }

    proptest! {
        #[test]
        fn first_pick_equals_the_exhaustive_best_single_feature(
            seed in 0u64..300,
            dims in 2usize..=6
        ) {
            let registry = FeatureRegistry::standard();
            let mut rng = rng_stream(seed, "greedyprop");
            let rows: Vec<Vec<f64>> = (0..18)
                .map(|_| (0..dims).map(|_| rng.gen_range(-2.0..2.0)).collect())
                .collect();
            let labels: Vec<usize> = (0..18).map(|i| i % 3).collect();
            let eval = |subset: &[usize]| loo_nn_accuracy(&rows, &labels, subset);
            let candidates: Vec<usize> = (0..dims).collect();
            let result = greedy_select(&registry, &candidates, 1, eval).unwrap();

            let mut best = 0;
            for f in 1..dims {
                if eval(&[f]) > eval(&[best]) {
                    best = f;
                }
            }
            prop_assert_eq!(&result.selected[0], registry.name(best));
        }

        #[test]
        fn greedy_never_duplicates_and_respects_the_budget(
            seed in 0u64..300,
            n_max in 1usize..8
        ) {
            let registry = FeatureRegistry::standard();
            let mut rng = rng_stream(seed, "greedydup");
            let rows: Vec<Vec<f64>> = (0..15)
                .map(|_| (0..6).map(|_| rng.gen_range(-2.0..2.0)).collect())
                .collect();
            let labels: Vec<usize> = (0..15).map(|i| i % 2).collect();
            let candidates: Vec<usize> = (0..6).collect();
            let result = greedy_select(&registry, &candidates, n_max, |subset| {
                loo_nn_accuracy(&rows, &labels, subset)
            })
            .unwrap();
            prop_assert!(result.selected.len() <= n_max);
            let unique: std::collections::BTreeSet<_> = result.selected.iter().collect();
            prop_assert_eq!(unique.len(), result.selected.len());
        }
    }

    #[test]
    fn axis_aligned_data_projects_onto_the_high_variance_axis() {
        // Variance 4 along x, 1 along y.
        let train = vec![
            vec![-2.0, 1.0],
            vec![2.0, -1.0],
            vec![-2.0, -1.0],
            vec![2.0, 1.0],
        ];
        let (proj, _, model) = pca_project(&train, &[], 1).unwrap();
        assert_relative_eq!(model.eigenvalues[0], 4.0, max_relative = 1e-9);
        assert_relative_eq!(model.components[0][0].abs(), 1.0, max_relative = 1e-9);
        assert_relative_eq!(model.components[0][1], 0.0, epsilon = 1e-9);
        for (row, z) in train.iter().zip(&proj) {
            assert_relative_eq!(z[0], row[0], max_relative = 1e-9);
        }
    }

    #[test]
    fn full_dimension_projection_reconstructs_exactly() {
        let mut rng = rng_stream(3, "pcafull");
        let train: Vec<Vec<f64>> = (0..12)
            .map(|_| (0..4).map(|_| rng.gen_range(-3.0..3.0)).collect())
            .collect();
        let (proj, _, model) = pca_project(&train, &[], 4).unwrap();
        for (row, z) in train.iter().zip(&proj) {
            let back = model.reconstruct(z);
            for (a, b) in row.iter().zip(&back) {
                assert_relative_eq!(a, b, epsilon = 1e-9);
            }
        }
    }

    /// Cyclic-sweep Jacobi eigenvalue solver — an independent oracle for the
    /// library-backed decomposition.
    fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
        let d = a.len();
        for _ in 0..100 {
            let mut off = 0.0;
            for p in 0..d {
                for q in (p + 1)..d {
                    off += a[p][q] * a[p][q];
                }
            }
            if off < 1e-24 {
                break;
            }
            for p in 0..d {
                for q in (p + 1)..d {
                    if a[p][q].abs() < 1e-300 {
                        continue;
                    }
                    let theta = 0.5 * (a[q][q] - a[p][p]) / a[p][q];
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..d {
                        let (akp, akq) = (a[k][p], a[k][q]);
                        a[k][p] = c * akp - s * akq;
                        a[k][q] = s * akp + c * akq;
                    }
                    for k in 0..d {
                        let (apk, aqk) = (a[p][k], a[q][k]);
                        a[p][k] = c * apk - s * aqk;
                        a[q][k] = s * apk + c * aqk;
                    }
                }
            }
        }
        let mut eigs: Vec<f64> = (0..d).map(|i| a[i][i]).collect();
        eigs.sort_by(|x, y| y.total_cmp(x));
        eigs
    }

    #[test]
    fn component_variances_match_an_independent_eigen_solver() {
        let mut rng = rng_stream(4, "pcajacobi");
        let n = 40;
        let d = 5;
        let train: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let base: f64 = rng.gen_range(-2.0..2.0);
                (0..d)
                    .map(|j| base * (j as f64 + 1.0) * 0.3 + rng.gen_range(-1.0..1.0))
                    .collect()
            })
            .collect();
        let (proj, _, model) = pca_project(&train, &[], d).unwrap();

        let mean: Vec<f64> = (0..d)
            .map(|j| train.iter().map(|r| r[j]).sum::<f64>() / n as f64)
            .collect();
        let mut cov = vec![vec![0.0; d]; d];
        for row in &train {
            for i in 0..d {
                for j in 0..d {
                    cov[i][j] += (row[i] - mean[i]) * (row[j] - mean[j]) / n as f64;
                }
            }
        }
        let oracle = jacobi_eigenvalues(cov);
        for (k, &ev) in oracle.iter().enumerate().take(model.k()) {
            assert_relative_eq!(model.eigenvalues[k], ev, max_relative = 1e-8);
            let col: Vec<f64> = proj.iter().map(|z| z[k]).collect();
            let cm = col.iter().sum::<f64>() / n as f64;
            let var = col.iter().map(|x| (x - cm).powi(2)).sum::<f64>() / n as f64;
            assert_relative_eq!(var, ev, max_relative = 1e-8, epsilon = 1e-12);
        }
    }

    #[test]
    fn projected_components_are_uncorrelated_on_training_data() {
        let mut rng = rng_stream(5, "pcacorr");
        let n = 30;
        let train: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect())
            .collect();
        let (proj, _, model) = pca_project(&train, &[], 3).unwrap();
        for a in 0..model.k() {
            for b in (a + 1)..model.k() {
                let ma = proj.iter().map(|z| z[a]).sum::<f64>() / n as f64;
                let mb = proj.iter().map(|z| z[b]).sum::<f64>() / n as f64;
                let cov = proj
                    .iter()
                    .map(|z| (z[a] - ma) * (z[b] - mb))
                    .sum::<f64>()
                    / n as f64;
                assert!(cov.abs() <= 1e-8, "components {a},{b} covary: {cov}");
            }
        }
    }

    #[test]
    fn degenerate_covariance_reduces_the_dimensionality() {
        // Rank-1 data embedded in 3 dimensions.
        let train: Vec<Vec<f64>> = (0..10)
            .map(|i| {
                let t = i as f64 - 4.5;
                vec![t, 2.0 * t, -t]
            })
            .collect();
        let (proj, _, model) = pca_project(&train, &[], 3).unwrap();
        assert_eq!(model.k(), 1);
        assert!(model.reduced());
        assert_eq!(proj[0].len(), 1);
    }

    #[test]
    fn apply_rows_are_projected_with_training_statistics() {
        let train = vec![vec![0.0, 0.0], vec![2.0, 0.0], vec![4.0, 0.0], vec![6.0, 0.0]];
        let apply = vec![vec![10.0, 0.0]];
        let (_, proj, model) = pca_project(&train, &apply, 1).unwrap();
        // Train mean is 3; the apply row lands at 7 along the first axis.
        assert_relative_eq!(model.mean[0], 3.0);
        assert_relative_eq!(proj[0][0], 7.0, max_relative = 1e-9);
    }

    #[test]
    fn fixed_list_passes_known_names_through() {
        let registry = FeatureRegistry::standard();
        let names = default_fixed_list();
        assert_eq!(names.len(), 10);
        let result = fixed_list(&names, &registry).unwrap();
        assert_eq!(result.method, "analysis-based");
        assert_eq!(result.selected, names);
        assert!(result
            .selected
            .contains(&"visual_intake_ratio".to_string()));
        assert!(result.selected.contains(&"saccade_ratio".to_string()));
    }

    #[test]
    fn fixed_list_rejects_unknown_names() {
        let registry = FeatureRegistry::standard();
        let err = fixed_list(&["no_such_feature".to_string()], &registry).unwrap_err();
        assert!(matches!(err, SelectionError::UnknownFeature(_)), "{err}");
    }

    #[test]
    fn fixed_list_rejects_duplicates() {
        let registry = FeatureRegistry::standard();
        let names = vec!["blink_rate".to_string(), "blink_rate".to_string()];
        let err = fixed_list(&names, &registry).unwrap_err();
        assert!(matches!(err, SelectionError::Config(_)), "{err}");
    }

    fn full_vector(id: &str) -> FeatureVector {
        let mut v = FeatureVector::empty(id, "s01", 1, Condition::Normal, 55);
        for i in 0..55 {
            v.set(i, Some(i as f64));
        }
        v
    }

    #[test]
    fn video_mask_keeps_exactly_the_seventeen_pose_features() {
        let registry = FeatureRegistry::standard();
        let masked = sensor_mask(&[full_vector("t1")], &[SensorGroup::Video], &registry).unwrap();
        assert_eq!(masked[0].missing_count(), 55 - 17);
        for i in registry.group_indices(SensorGroup::Video) {
            assert!(!masked[0].missing[i]);
        }
    }

    #[test]
    fn all_groups_mask_is_the_identity() {
        let registry = FeatureRegistry::standard();
        let original = full_vector("t1");
        let masked = sensor_mask(&[original.clone()], &SensorGroup::ALL, &registry).unwrap();
        assert_eq!(masked[0], original);
    }

    #[test]
    fn empty_group_set_is_rejected() {
        let registry = FeatureRegistry::standard();
        let err = sensor_mask(&[full_vector("t1")], &[], &registry).unwrap_err();
        assert!(matches!(err, SelectionError::Config(_)), "{err}");
    }

    #[test]
    fn selection_result_round_trips_through_json() {
        let result = SelectionResult {
            method: "greedy".to_string(),
            selected: vec!["blink_rate".to_string()],
            step_accuracies: vec![0.8, 0.7],
            best_accuracy: Some(0.8),
            pca_k: None,
        };
        let back = SelectionResult::from_json(&result.to_json()).unwrap();
        assert_eq!(back, result);
    }
}
