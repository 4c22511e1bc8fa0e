//! Accuracy, precision, recall and F1 for the INFORMATIVE class, plus the
//! comparison and error-analysis reports built on them.
//!
//! Zero denominators yield 0: precision when nothing was predicted
//! positive, recall when nothing is gold positive, F1 when both are 0.
//! Rendered percentages round half away from zero to two decimals, computed
//! from the exact count ratios.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::corpus::{Label, Tweet};
use crate::ensemble::PredictionSet;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct ConfusionMatrix {
    pub true_positive: u64,
    pub false_positive: u64,
    pub false_negative: u64,
    pub true_negative: u64,
}

impl ConfusionMatrix {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (Label, Label)>) -> Self {
        let mut m = ConfusionMatrix::default();
        for (predicted, gold) in pairs {
            m.record(predicted, gold);
        }
        m
    }

    pub fn record(&mut self, predicted: Label, gold: Label) {
        match (predicted, gold) {
            (Label::Informative, Label::Informative) => self.true_positive += 1,
            (Label::Informative, Label::Uninformative) => self.false_positive += 1,
            (Label::Uninformative, Label::Informative) => self.false_negative += 1,
            (Label::Uninformative, Label::Uninformative) => self.true_negative += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.true_positive + self.false_positive + self.false_negative + self.true_negative
    }

    /// Same counts with UNINFORMATIVE treated as the positive class.
    pub fn swapped(&self) -> Self {
        ConfusionMatrix {
            true_positive: self.true_negative,
            false_positive: self.false_negative,
            false_negative: self.false_positive,
            true_negative: self.true_positive,
        }
    }

    pub fn accuracy_ratio(&self) -> Ratio {
        Ratio::new(self.true_positive + self.true_negative, self.total())
    }

    pub fn precision_ratio(&self) -> Ratio {
        Ratio::new(self.true_positive, self.true_positive + self.false_positive)
    }

    pub fn recall_ratio(&self) -> Ratio {
        Ratio::new(self.true_positive, self.true_positive + self.false_negative)
    }

    /// `2PR / (P + R)` reduced to counts: `2tp / (2tp + fp + fn)`.
    pub fn f1_ratio(&self) -> Ratio {
        Ratio::new(
            2 * self.true_positive,
            2 * self.true_positive + self.false_positive + self.false_negative,
        )
    }

    pub fn accuracy(&self) -> f64 {
        self.accuracy_ratio().value()
    }

    pub fn precision(&self) -> f64 {
        self.precision_ratio().value()
    }

    pub fn recall(&self) -> f64 {
        self.recall_ratio().value()
    }

    pub fn f1(&self) -> f64 {
        harmonic_mean(self.precision(), self.recall())
    }

    /// `true,predicted,count` rows for plotting.
    pub fn to_csv(&self) -> String {
        let rows = [
            (Label::Informative, Label::Informative, self.true_positive),
            (Label::Informative, Label::Uninformative, self.false_negative),
            (Label::Uninformative, Label::Informative, self.false_positive),
            (Label::Uninformative, Label::Uninformative, self.true_negative),
        ];
        let mut out = String::from("true,predicted,count\n");
        for (gold, predicted, count) in rows {
            let _ = writeln!(out, "{gold},{predicted},{count}");
        }
        out
    }

    pub fn render(&self) -> String {
        let w = self.total().to_string().len().max(13);
        format!(
            "{:<15} {:>w$} {:>w$}\n{:<15} {:>w$} {:>w$}\n{:<15} {:>w$} {:>w$}\n",
            "true \\ pred",
            "INFORMATIVE",
            "UNINFORMATIVE",
            "INFORMATIVE",
            self.true_positive,
            self.false_negative,
            "UNINFORMATIVE",
            self.false_positive,
            self.true_negative,
        )
    }
}

fn harmonic_mean(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Exact count ratio; `0/0` reads as 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ratio {
    pub numerator: u64,
    pub denominator: u64,
}

impl Ratio {
    pub fn new(numerator: u64, denominator: u64) -> Self {
        Ratio {
            numerator,
            denominator,
        }
    }

    pub fn value(&self) -> f64 {
        if self.denominator == 0 {
            0.0
        } else {
            self.numerator as f64 / self.denominator as f64
        }
    }

    /// Percentage in hundredths, rounded half away from zero.
    pub fn hundredths_of_percent(&self) -> u64 {
        if self.denominator == 0 {
            return 0;
        }
        let scaled = self.numerator as u128 * 10_000;
        let den = self.denominator as u128;
        ((2 * scaled + den) / (2 * den)) as u64
    }

    pub fn percent(&self) -> String {
        format_hundredths(self.hundredths_of_percent())
    }
}

fn format_hundredths(h: u64) -> String {
    format!("{}.{:02}", h / 100, h % 100)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub model_name: String,
    pub matrix: ConfusionMatrix,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl MetricsReport {
    pub fn from_matrix(model_name: impl Into<String>, matrix: ConfusionMatrix) -> Self {
        MetricsReport {
            model_name: model_name.into(),
            accuracy: matrix.accuracy(),
            precision: matrix.precision(),
            recall: matrix.recall(),
            f1: matrix.f1(),
            matrix,
        }
    }

    /// `metric=value` lines; scores as percentages with two decimals.
    pub fn to_key_values(&self) -> String {
        let m = &self.matrix;
        let mut out = String::new();
        let _ = writeln!(out, "model={}", self.model_name);
        let _ = writeln!(out, "accuracy={}", m.accuracy_ratio().percent());
        let _ = writeln!(out, "precision={}", m.precision_ratio().percent());
        let _ = writeln!(out, "recall={}", m.recall_ratio().percent());
        let _ = writeln!(out, "f1={}", m.f1_ratio().percent());
        let _ = writeln!(out, "tp={}", m.true_positive);
        let _ = writeln!(out, "fp={}", m.false_positive);
        let _ = writeln!(out, "fn={}", m.false_negative);
        let _ = writeln!(out, "tn={}", m.true_negative);
        let _ = writeln!(out, "total={}", m.total());
        out
    }
}

fn gold_labels(gold: &[Tweet]) -> Result<HashMap<&str, Label>> {
    let mut map = HashMap::with_capacity(gold.len());
    for t in gold {
        let label = t.label.ok_or_else(|| Error::UnlabeledRecord {
            split: "gold".into(),
            id: t.id.clone(),
        })?;
        if map.insert(t.id.as_str(), label).is_some() {
            return Err(Error::DuplicateId {
                id: t.id.clone(),
                line: 0,
            });
        }
    }
    Ok(map)
}

fn check_alignment(pred: &PredictionSet, gold: &HashMap<&str, Label>) -> Result<()> {
    let mut ids: Vec<String> = pred
        .ids()
        .filter(|id| !gold.contains_key(id))
        .chain(gold.keys().copied().filter(|id| pred.get(id).is_none()))
        .map(str::to_string)
        .collect();
    if ids.is_empty() {
        return Ok(());
    }
    ids.sort();
    Err(Error::IdMismatch { ids })
}

pub fn evaluate(pred: &PredictionSet, gold: &[Tweet]) -> Result<MetricsReport> {
    let gold_map = gold_labels(gold)?;
    check_alignment(pred, &gold_map)?;
    let matrix = ConfusionMatrix::from_pairs(
        pred.predictions
            .iter()
            .map(|(id, &p)| (p, gold_map[id.as_str()])),
    );
    Ok(MetricsReport::from_matrix(pred.model_name.clone(), matrix))
}

/// A published result row, stored in hundredths of a percent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PublishedResult {
    pub split: String,
    pub system: String,
    pub accuracy: u64,
    pub precision: u64,
    pub recall: u64,
    pub f1: u64,
    pub note: String,
}

const PUBLISHED: &str = include_str!("../data/published_results.tsv");

fn parse_hundredths(s: &str) -> Option<u64> {
    let (whole, frac) = s.split_once('.')?;
    if frac.len() != 2 {
        return None;
    }
    Some(whole.parse::<u64>().ok()? * 100 + frac.parse::<u64>().ok()?)
}

/// Bundled reference rows for `split` ("dev" or "test").
pub fn published_results(split: &str) -> Vec<PublishedResult> {
    PUBLISHED
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .filter_map(|l| {
            let f: Vec<&str> = l.split('\t').collect();
            (f.len() >= 6 && f[0] == split).then(|| PublishedResult {
                split: f[0].to_string(),
                system: f[1].to_string(),
                accuracy: parse_hundredths(f[2]).expect("bundled accuracy"),
                precision: parse_hundredths(f[3]).expect("bundled precision"),
                recall: parse_hundredths(f[4]).expect("bundled recall"),
                f1: parse_hundredths(f[5]).expect("bundled f1"),
                note: f.get(6).unwrap_or(&"").to_string(),
            })
        })
        .collect()
}

struct TableRow {
    name: String,
    sort_f1: f64,
    cells: [String; 4],
    reference: bool,
}

/// Renders reports (and optional published rows) sorted by F1 descending;
/// equal F1 values order by name.
pub fn comparison_table(reports: &[MetricsReport], published: &[PublishedResult]) -> String {
    let mut rows: Vec<TableRow> = reports
        .iter()
        .map(|r| TableRow {
            name: r.model_name.clone(),
            sort_f1: r.f1,
            cells: [
                r.matrix.accuracy_ratio().percent(),
                r.matrix.precision_ratio().percent(),
                r.matrix.recall_ratio().percent(),
                r.matrix.f1_ratio().percent(),
            ],
            reference: false,
        })
        .chain(published.iter().map(|p| TableRow {
            name: p.system.clone(),
            sort_f1: p.f1 as f64 / 10_000.0,
            cells: [
                format_hundredths(p.accuracy),
                format_hundredths(p.precision),
                format_hundredths(p.recall),
                format_hundredths(p.f1),
            ],
            reference: true,
        }))
        .collect();
    rows.sort_by(|a, b| {
        b.sort_f1
            .total_cmp(&a.sort_f1)
            .then_with(|| a.name.cmp(&b.name))
    });

    let width = rows
        .iter()
        .map(|r| r.name.len() + if r.reference { 2 } else { 0 })
        .chain(["model".len()])
        .max()
        .unwrap_or(5);
    let mut out = format!(
        "{:<width$}  {:>8}  {:>9}  {:>6}  {:>6}\n",
        "model", "Accuracy", "Precision", "Recall", "F1"
    );
    for r in &rows {
        let name = if r.reference {
            format!("{} *", r.name)
        } else {
            r.name.clone()
        };
        let _ = writeln!(
            out,
            "{:<width$}  {:>8}  {:>9}  {:>6}  {:>6}",
            name, r.cells[0], r.cells[1], r.cells[2], r.cells[3]
        );
    }
    if rows.iter().any(|r| r.reference) {
        out.push_str("* published result\n");
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Misclassified {
    pub id: String,
    pub text: String,
    pub predicted: Label,
    pub truth: Label,
}

/// Up to `limit` wrong predictions per direction (gold INFORMATIVE first),
/// in gold order.
pub fn misclassification_report(
    pred: &PredictionSet,
    gold: &[Tweet],
    limit: usize,
) -> Result<Vec<Misclassified>> {
    let gold_map = gold_labels(gold)?;
    check_alignment(pred, &gold_map)?;
    let mut out = Vec::new();
    for truth in Label::ALL {
        out.extend(
            gold.iter()
                .filter(|t| t.label == Some(truth))
                .filter_map(|t| {
                    let predicted = pred.get(&t.id)?;
                    (predicted != truth).then(|| Misclassified {
                        id: t.id.clone(),
                        text: t.text.clone(),
                        predicted,
                        truth,
                    })
                })
                .take(limit),
        );
    }
    Ok(out)
}

pub fn render_misclassified(rows: &[Misclassified]) -> String {
    let mut out = String::from("PL\tTL\tid\ttweet\n");
    for r in rows {
        let _ = writeln!(out, "{}\t{}\t{}\t{}", r.predicted.short(), r.truth.short(), r.id, r.text);
    }
    out
}
