//! Rendering of evaluation results: markdown accuracy tables and per-feature
//! SVG line plots of condition means across subjects. All output is
//! byte-deterministic for identical inputs.

use crate::classify::{ConfusionMatrix, EvalReport};
use crate::data::Condition;
use crate::pipeline::{FeatureRegistry, FeatureVector};
use crate::selection::SelectionResult;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("feature index {0} outside registry")]
    UnknownFeature(usize),
}

fn class_labels() -> [&'static str; 3] {
    [
        Condition::ALL[0].label(),
        Condition::ALL[1].label(),
        Condition::ALL[2].label(),
    ]
}

/// Markdown table of a 3×3 confusion matrix, rows = truth.
pub fn confusion_table(m: &ConfusionMatrix) -> String {
    let labels = class_labels();
    let mut out = String::new();
    writeln!(out, "| truth \\ predicted | {} | {} | {} |", labels[0], labels[1], labels[2]).unwrap();
    writeln!(out, "|---|---|---|---|").unwrap();
    for (r, label) in labels.iter().enumerate() {
        writeln!(
            out,
            "| {} | {:.2} | {:.2} | {:.2} |",
            label, m.counts[r][0], m.counts[r][1], m.counts[r][2]
        )
        .unwrap();
    }
    out
}

/// Markdown table of the binary collapse: normal vs the two merged
/// non-normal conditions.
pub fn collapsed_table(m: &ConfusionMatrix) -> String {
    let c = &m.counts;
    let nn = c[0][0];
    let na = c[0][1] + c[0][2];
    let an = c[1][0] + c[2][0];
    let aa = c[1][1] + c[1][2] + c[2][1] + c[2][2];
    let mut out = String::new();
    writeln!(out, "| truth \\ predicted | normal | abnormal |").unwrap();
    writeln!(out, "|---|---|---|").unwrap();
    writeln!(out, "| normal | {nn:.2} | {na:.2} |").unwrap();
    writeln!(out, "| abnormal | {an:.2} | {aa:.2} |").unwrap();
    out
}

/// Markdown table of greedy search steps, marking the chosen prefix.
pub fn selection_table(sel: &SelectionResult) -> String {
    let mut out = String::new();
    writeln!(out, "method: {}", sel.method).unwrap();
    if sel.step_accuracies.is_empty() {
        writeln!(out, "features: {}", sel.selected.join(", ")).unwrap();
        return out;
    }
    writeln!(out, "\n| step | feature | accuracy | kept |").unwrap();
    writeln!(out, "|---|---|---|---|").unwrap();
    for (i, acc) in sel.step_accuracies.iter().enumerate() {
        let (name, kept) = match sel.selected.get(i) {
            Some(n) => (n.as_str(), "yes"),
            None => ("-", ""),
        };
        writeln!(out, "| {} | {} | {:.3} | {} |", i + 1, name, acc, kept).unwrap();
    }
    out
}

/// Full markdown summary: headline accuracies, mean and collapsed matrices,
/// per-fold rows, and the selection trace when present.
pub fn summary_markdown(report: &EvalReport) -> String {
    let mut out = String::new();
    writeln!(out, "# Evaluation summary\n").unwrap();
    writeln!(out, "protocol: {}", report.protocol).unwrap();
    writeln!(out, "folds: {}", report.folds.len()).unwrap();
    writeln!(out, "3-class accuracy: {:.3}", report.mean_acc3).unwrap();
    writeln!(out, "binary accuracy: {:.3}", report.mean_acc2).unwrap();
    writeln!(out, "\n## Mean confusion matrix\n").unwrap();
    let mean = report.mean_confusion();
    out.push_str(&confusion_table(&mean));
    writeln!(out, "\n## Collapsed binary matrix\n").unwrap();
    out.push_str(&collapsed_table(&mean));
    writeln!(out, "\n## Per-fold accuracy\n").unwrap();
    writeln!(out, "| fold | trials | 3-class | binary |").unwrap();
    writeln!(out, "|---|---|---|---|").unwrap();
    for fold in &report.folds {
        writeln!(
            out,
            "| {} | {} | {:.3} | {:.3} |",
            fold.tag, fold.test_trials, fold.acc3, fold.acc2
        )
        .unwrap();
    }
    if let Some(sel) = &report.selection {
        writeln!(out, "\n## Feature selection\n").unwrap();
        out.push_str(&selection_table(sel));
    }
    out
}

/// Per-condition series of one feature: for every subject (sorted), the mean
/// of that subject's non-missing values under each condition. Subjects with
/// no usable value for a condition are skipped in that condition's line.
pub fn condition_series(
    vectors: &[FeatureVector],
    feature: usize,
) -> (Vec<String>, [Vec<(usize, f64)>; 3]) {
    let mut subjects: Vec<String> = vectors.iter().map(|v| v.subject.clone()).collect();
    subjects.sort();
    subjects.dedup();
    let mut series: [Vec<(usize, f64)>; 3] = Default::default();
    for (pos, subject) in subjects.iter().enumerate() {
        for condition in Condition::ALL {
            let values: Vec<f64> = vectors
                .iter()
                .filter(|v| &v.subject == subject && v.condition == condition)
                .filter_map(|v| v.get(feature))
                .collect();
            if !values.is_empty() {
                let mean = values.iter().sum::<f64>() / values.len() as f64;
                series[condition.index()].push((pos, mean));
            }
        }
    }
    (subjects, series)
}

const SVG_W: f64 = 640.0;
const SVG_H: f64 = 360.0;
const MARGIN_L: f64 = 60.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 45.0;
const LINE_COLORS: [&str; 3] = ["#2f7d4f", "#c65a1e", "#3558a8"];

/// Line plot of one feature's per-subject condition means. Hand-rolled SVG;
/// coordinates are always finite because missing values never enter a series.
pub fn feature_svg(name: &str, subjects: &[String], series: &[Vec<(usize, f64)>; 3]) -> String {
    let plot_w = SVG_W - MARGIN_L - MARGIN_R;
    let plot_h = SVG_H - MARGIN_T - MARGIN_B;
    let all: Vec<f64> = series.iter().flatten().map(|&(_, y)| y).collect();
    let (mut lo, mut hi) = all
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if all.is_empty() {
        (lo, hi) = (0.0, 1.0);
    } else if lo == hi {
        lo -= 1.0;
        hi += 1.0;
    } else {
        let pad = 0.05 * (hi - lo);
        lo -= pad;
        hi += pad;
    }
    let n = subjects.len().max(2);
    let x_px = |pos: usize| MARGIN_L + plot_w * pos as f64 / (n - 1) as f64;
    let y_px = |v: f64| MARGIN_T + plot_h * (1.0 - (v - lo) / (hi - lo));

    let mut out = String::new();
    writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {SVG_W} {SVG_H}\" font-family=\"sans-serif\" font-size=\"12\">"
    )
    .unwrap();
    writeln!(out, "<rect width=\"{SVG_W}\" height=\"{SVG_H}\" fill=\"white\"/>").unwrap();
    writeln!(
        out,
        "<text x=\"{:.1}\" y=\"20\" font-size=\"14\" text-anchor=\"middle\">{name}</text>",
        SVG_W / 2.0
    )
    .unwrap();
    // Axes.
    writeln!(
        out,
        "<line x1=\"{MARGIN_L}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"black\"/>",
        SVG_H - MARGIN_B,
        SVG_W - MARGIN_R,
        SVG_H - MARGIN_B
    )
    .unwrap();
    writeln!(
        out,
        "<line x1=\"{MARGIN_L}\" y1=\"{MARGIN_T}\" x2=\"{MARGIN_L}\" y2=\"{:.1}\" stroke=\"black\"/>",
        SVG_H - MARGIN_B
    )
    .unwrap();
    writeln!(
        out,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{:.3}</text>",
        MARGIN_L - 6.0,
        SVG_H - MARGIN_B,
        lo
    )
    .unwrap();
    writeln!(
        out,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{:.3}</text>",
        MARGIN_L - 6.0,
        MARGIN_T + 10.0,
        hi
    )
    .unwrap();
    for (pos, subject) in subjects.iter().enumerate() {
        writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{subject}</text>",
            x_px(pos),
            SVG_H - MARGIN_B + 16.0
        )
        .unwrap();
    }
    // One polyline + legend entry per condition.
    for condition in Condition::ALL {
        let c = condition.index();
        let color = LINE_COLORS[c];
        let lx = MARGIN_L + 8.0 + 110.0 * c as f64;
        writeln!(
            out,
            "<rect x=\"{lx:.1}\" y=\"{:.1}\" width=\"14\" height=\"4\" fill=\"{color}\"/>",
            MARGIN_T - 12.0
        )
        .unwrap();
        writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\">{}</text>",
            lx + 18.0,
            MARGIN_T - 6.0,
            condition.label()
        )
        .unwrap();
        if series[c].is_empty() {
            continue;
        }
        let points: Vec<String> = series[c]
            .iter()
            .map(|&(pos, v)| format!("{:.1},{:.1}", x_px(pos), y_px(v)))
            .collect();
        writeln!(
            out,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>",
            points.join(" ")
        )
        .unwrap();
        for p in &points {
            let (x, y) = p.split_once(',').unwrap();
            writeln!(out, "<circle cx=\"{x}\" cy=\"{y}\" r=\"2.5\" fill=\"{color}\"/>").unwrap();
        }
    }
    writeln!(out, "</svg>").unwrap();
    out
}

fn write_file(path: &Path, content: &str) -> Result<(), ReportError> {
    std::fs::write(path, content).map_err(|source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes `summary.md` plus one `feature_<name>.svg` per plotted feature into
/// `dir` and returns the paths. With a selection in the report, only its
/// features are plotted; otherwise every registry feature is.
pub fn write_report(
    dir: &Path,
    report: &EvalReport,
    features: Option<(&[FeatureVector], &FeatureRegistry)>,
) -> Result<Vec<PathBuf>, ReportError> {
    std::fs::create_dir_all(dir).map_err(|source| ReportError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut written = Vec::new();
    let summary = dir.join("summary.md");
    write_file(&summary, &summary_markdown(report))?;
    written.push(summary);
    if let Some((vectors, registry)) = features {
        let indices: Vec<usize> = match &report.selection {
            Some(sel) => sel
                .selected
                .iter()
                .filter_map(|name| registry.index_of(name))
                .collect(),
            None => (0..registry.len()).collect(),
        };
        for index in indices {
            if index >= registry.len() {
                return Err(ReportError::UnknownFeature(index));
            }
            let name = registry.name(index);
            let (subjects, series) = condition_series(vectors, index);
            let path = dir.join(format!("feature_{name}.svg"));
            write_file(&path, &feature_svg(name, &subjects, &series))?;
            written.push(path);
        }
    }
    Ok(written)
}
