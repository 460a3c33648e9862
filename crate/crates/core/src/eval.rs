//! Confusion matrices, per-class recall and report rendering.
//!
//! Human-readable tables show whole percentages. Recall cells round half away
//! from zero; row-normalized matrix rows use largest-remainder rounding so
//! every rendered row sums to exactly 100%. Machine-readable output carries
//! ratios at four decimal places.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    pub class_names: Vec<String>,
    /// `counts[true][predicted]`.
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.n_classes()).map(|i| self.counts[i][i]).sum()
    }

    pub fn row_sum(&self, i: usize) -> u64 {
        self.counts[i].iter().sum()
    }

    /// `None` when nothing was evaluated.
    pub fn accuracy(&self) -> Option<f64> {
        let total = self.total();
        (total > 0).then(|| self.trace() as f64 / total as f64)
    }
}

pub fn confusion(truth: &[usize], predicted: &[usize], class_names: &[String]) -> Result<ConfusionMatrix> {
    if truth.len() != predicted.len() {
        return Err(Error::InvalidParam(format!(
            "{} true labels but {} predictions",
            truth.len(),
            predicted.len()
        )));
    }
    let k = class_names.len();
    let mut counts = vec![vec![0u64; k]; k];
    for (&t, &p) in truth.iter().zip(predicted) {
        if t >= k || p >= k {
            return Err(Error::InvalidParam(format!(
                "label pair ({t}, {p}) outside {k} classes"
            )));
        }
        counts[t][p] += 1;
    }
    Ok(ConfusionMatrix {
        class_names: class_names.to_vec(),
        counts,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassRecall {
    pub class: String,
    /// `None` for classes without support.
    pub recall: Option<f64>,
    pub support: u64,
}

pub fn per_class_recall(matrix: &ConfusionMatrix) -> Vec<ClassRecall> {
    (0..matrix.n_classes())
        .map(|i| {
            let support = matrix.row_sum(i);
            ClassRecall {
                class: matrix.class_names[i].clone(),
                recall: (support > 0).then(|| matrix.counts[i][i] as f64 / support as f64),
                support,
            }
        })
        .collect()
}

/// Whole-number percentage, half away from zero.
pub fn percent(ratio: f64) -> i64 {
    (ratio * 100.0).round() as i64
}

/// Rows as whole percentages summing to exactly 100 (largest remainder,
/// lower column first on equal remainders). Zero-support rows are `None`.
pub fn row_normalize(matrix: &ConfusionMatrix) -> Vec<Option<Vec<u32>>> {
    matrix
        .counts
        .iter()
        .map(|row| {
            let total: u64 = row.iter().sum();
            if total == 0 {
                return None;
            }
            // exact integer shares of 100
            let mut pct: Vec<u32> = row.iter().map(|&c| (c * 100 / total) as u32).collect();
            let mut rems: Vec<(u64, usize)> = row
                .iter()
                .enumerate()
                .map(|(j, &c)| ((c * 100) % total, j))
                .collect();
            rems.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
            let short = 100 - pct.iter().sum::<u32>();
            for &(_, j) in rems.iter().take(short as usize) {
                pct[j] += 1;
            }
            Some(pct)
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct RunMetadata {
    pub model_digest: String,
    pub dataset_digest: String,
    pub seed: u64,
    /// Free-form settings echoed for reproducibility.
    pub config: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub overall_accuracy: Option<f64>,
    pub per_class: Vec<ClassRecall>,
    pub matrix: ConfusionMatrix,
    pub metadata: RunMetadata,
}

impl EvalReport {
    pub fn from_matrix(matrix: ConfusionMatrix, metadata: RunMetadata) -> Self {
        EvalReport {
            overall_accuracy: matrix.accuracy(),
            per_class: per_class_recall(&matrix),
            matrix,
            metadata,
        }
    }

    pub fn recall_of(&self, class: &str) -> Option<f64> {
        self.per_class
            .iter()
            .find(|c| c.class == class)
            .and_then(|c| c.recall)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "text" => Ok(ReportFormat::Text),
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(format!("unknown report format `{other}` (text, csv, json)")),
        }
    }
}

pub fn render_report(report: &EvalReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Text => render_text(report),
        ReportFormat::Csv => render_csv(report),
        ReportFormat::Json => render_json(report),
    }
}

fn render_text(report: &EvalReport) -> String {
    let mut out = String::new();
    let width = report
        .matrix
        .class_names
        .iter()
        .map(String::len)
        .max()
        .unwrap_or(5)
        .max(6);
    match report.overall_accuracy {
        Some(a) => {
            let _ = writeln!(out, "overall accuracy {}% ({} records)", percent(a), report.matrix.total());
        }
        None => {
            let _ = writeln!(out, "overall accuracy n/a (0 records)");
        }
    }
    out.push('\n');
    let _ = writeln!(out, "{:<width$} {:>8} {:>8}", "Family", "Accuracy", "Test");
    for c in &report.per_class {
        let acc = c.recall.map_or("-".to_string(), |r| format!("{}%", percent(r)));
        let _ = writeln!(out, "{:<width$} {:>8} {:>8}", c.class, acc, c.support);
    }
    out.push('\n');
    let _ = write!(out, "{:<width$}", "");
    for name in &report.matrix.class_names {
        let _ = write!(out, " {:>w$}", name, w = name.len().max(4));
    }
    out.push('\n');
    for (name, row) in report.matrix.class_names.iter().zip(row_normalize(&report.matrix)) {
        let _ = write!(out, "{name:<width$}");
        for (j, col) in report.matrix.class_names.iter().enumerate() {
            let cell = row.as_ref().map_or("-".to_string(), |r| format!("{}%", r[j]));
            let _ = write!(out, " {:>w$}", cell, w = col.len().max(4));
        }
        out.push('\n');
    }
    out
}

fn ratio4(v: f64) -> String {
    format!("{v:.4}")
}

fn render_csv(report: &EvalReport) -> String {
    let mut out = String::from("class,support,correct,recall");
    for name in &report.matrix.class_names {
        let _ = write!(out, ",{name}");
    }
    out.push('\n');
    for (i, c) in report.per_class.iter().enumerate() {
        let _ = write!(
            out,
            "{},{},{},{}",
            c.class,
            c.support,
            report.matrix.counts[i][i],
            c.recall.map_or(String::new(), ratio4)
        );
        for v in &report.matrix.counts[i] {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

/// Rebuilds the confusion matrix from [`ReportFormat::Csv`] output.
pub fn parse_report_csv(text: &str) -> Result<ConfusionMatrix> {
    let bad = |m: &str| Error::Format(format!("report csv: {m}"));
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().ok_or_else(|| bad("empty"))?.split(',').collect();
    if header.len() < 4 || header[..4] != ["class", "support", "correct", "recall"] {
        return Err(bad("unexpected header"));
    }
    let class_names: Vec<String> = header[4..].iter().map(|s| s.to_string()).collect();
    let mut counts = Vec::new();
    for (i, line) in lines.filter(|l| !l.is_empty()).enumerate() {
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 4 + class_names.len() || class_names.get(i).map(String::as_str) != Some(parts[0]) {
            return Err(bad(&format!("row {i} does not match the header")));
        }
        let row: Vec<u64> = parts[4..]
            .iter()
            .map(|v| v.parse().map_err(|_| bad(&format!("bad count {v:?}"))))
            .collect::<Result<_>>()?;
        counts.push(row);
    }
    if counts.len() != class_names.len() {
        return Err(bad("row count differs from class count"));
    }
    Ok(ConfusionMatrix {
        class_names,
        counts,
    })
}

#[derive(Serialize)]
struct JsonClass<'a> {
    class: &'a str,
    recall: Option<f64>,
    support: u64,
}

#[derive(Serialize)]
struct JsonReport<'a> {
    overall_accuracy: Option<f64>,
    per_class: Vec<JsonClass<'a>>,
    matrix: &'a ConfusionMatrix,
    metadata: &'a RunMetadata,
}

fn round4(v: f64) -> f64 {
    (v * 1e4).round() / 1e4
}

fn render_json(report: &EvalReport) -> String {
    let doc = JsonReport {
        overall_accuracy: report.overall_accuracy.map(round4),
        per_class: report
            .per_class
            .iter()
            .map(|c| JsonClass {
                class: &c.class,
                recall: c.recall.map(round4),
                support: c.support,
            })
            .collect(),
        matrix: &report.matrix,
        metadata: &report.metadata,
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("report serializes");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("c{i}")).collect()
    }

    #[test]
    fn perfect_predictions_are_diagonal() {
        let m = confusion(&[0, 1, 2, 1], &[0, 1, 2, 1], &names(3)).unwrap();
        assert_eq!(m.counts, vec![vec![1, 0, 0], vec![0, 2, 0], vec![0, 0, 1]]);
        assert!(per_class_recall(&m).iter().all(|c| c.recall == Some(1.0)));
    }

    #[test]
    fn empty_input() {
        let m = confusion(&[], &[], &names(2)).unwrap();
        assert_eq!(m.total(), 0);
        assert_eq!(m.accuracy(), None);
        assert!(per_class_recall(&m).iter().all(|c| c.recall.is_none()));
        assert_eq!(row_normalize(&m), vec![None, None]);
    }

    #[test]
    fn two_misclassifications() {
        let m = confusion(&[0, 0, 1, 1, 1], &[0, 1, 1, 0, 1], &names(2)).unwrap();
        let off: u64 = m.total() - m.trace();
        assert_eq!(off, 2);
        assert_eq!(m.accuracy(), Some(0.6));
    }

    #[test]
    fn mismatched_lengths_and_labels() {
        assert!(confusion(&[0], &[], &names(2)).is_err());
        assert!(confusion(&[2], &[0], &names(2)).is_err());
    }

    #[test]
    fn worms_row_shape() {
        // 0 of 7 right: 6 predicted Exploits, 1 Fuzzers
        let mut counts = vec![vec![0u64; 10]; 10];
        counts[9][4] = 6;
        counts[9][5] = 1;
        counts[0][0] = 49;
        counts[0][4] = 1;
        let m = ConfusionMatrix {
            class_names: names(10),
            counts,
        };
        let recall = per_class_recall(&m);
        assert_eq!(recall[9].recall, Some(0.0));
        assert_eq!(recall[9].support, 7);
        let rows = row_normalize(&m);
        let worms = rows[9].as_ref().unwrap();
        assert_eq!((worms[4], worms[5]), (86, 14));
        assert_eq!(rows[0].as_ref().unwrap()[0], 98);
        assert!(rows[1].is_none());
    }

    #[test]
    fn single_prediction_row_is_100() {
        let m = confusion(&[1, 1, 1], &[0, 0, 0], &names(2)).unwrap();
        assert_eq!(row_normalize(&m)[1], Some(vec![100, 0]));
    }

    #[test]
    fn largest_remainder_sums_to_100() {
        // thirds, and a row where naive rounding overshoots
        let m = ConfusionMatrix {
            class_names: names(3),
            counts: vec![vec![1, 1, 1], vec![1, 1, 0], vec![0, 0, 0]],
        };
        let rows = row_normalize(&m);
        assert_eq!(rows[0], Some(vec![34, 33, 33]));
        assert_eq!(rows[1], Some(vec![50, 50, 0]));
    }

    #[test]
    fn percent_rounds_half_away() {
        assert_eq!(percent(0.965), 97);
        assert_eq!(percent(0.125), 13);
        assert_eq!(percent(0.0), 0);
    }

    #[test]
    fn csv_round_trip() {
        let m = confusion(&[0, 0, 1, 2, 2, 2], &[0, 1, 1, 2, 0, 2], &names(3)).unwrap();
        let report = EvalReport::from_matrix(m.clone(), RunMetadata::default());
        let text = render_report(&report, ReportFormat::Csv);
        assert_eq!(parse_report_csv(&text).unwrap(), m);
        let again = EvalReport::from_matrix(parse_report_csv(&text).unwrap(), RunMetadata::default());
        assert_eq!(again, report);
    }

    #[test]
    fn json_has_stable_key_order() {
        let m = confusion(&[0, 1], &[0, 0], &names(2)).unwrap();
        let report = EvalReport::from_matrix(m, RunMetadata::default());
        let json = render_report(&report, ReportFormat::Json);
        let keys = ["\"overall_accuracy\"", "\"per_class\"", "\"matrix\"", "\"metadata\""];
        let pos: Vec<usize> = keys.iter().map(|k| json.find(k).unwrap()).collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]));
        assert!(json.contains("\"overall_accuracy\": 0.5"));
        assert_eq!(json, render_report(&report, ReportFormat::Json));
    }

    #[test]
    fn text_marks_zero_support() {
        let m = confusion(&[0, 0], &[0, 1], &names(2)).unwrap();
        let text = render_report(&EvalReport::from_matrix(m, RunMetadata::default()), ReportFormat::Text);
        assert!(text.contains("overall accuracy 50% (2 records)"));
        let c1 = text.lines().find(|l| l.starts_with("c1 ")).unwrap();
        assert!(c1.contains('-'), "{text}");
    }
}
