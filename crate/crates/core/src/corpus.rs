//! Tweet records, the two-label scheme, TSV split loading and split statistics.
//!
//! Split files are UTF-8, one record per line, no header row by default:
//!
//! ```text
//! id<TAB>text<TAB>LABEL
//! ```
//!
//! The label column is optional for unlabeled splits. Tabs inside the tweet
//! text are not supported; such lines are rejected instead of re-joined.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Inter-annotator agreement (Fleiss' Kappa) published for the dataset.
/// Annotator-level data is not distributed, so the value is carried as-is.
pub const FLEISS_KAPPA: f64 = 0.8180;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    Informative,
    Uninformative,
}

impl Label {
    pub const ALL: [Label; 2] = [Label::Informative, Label::Uninformative];

    /// Wire form used in split and prediction files.
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Informative => "INFORMATIVE",
            Label::Uninformative => "UNINFORMATIVE",
        }
    }

    /// Short form used in error-analysis tables.
    pub fn short(self) -> &'static str {
        match self {
            Label::Informative => "IN",
            Label::Uninformative => "UN",
        }
    }

    /// Numeric training target; INFORMATIVE is the positive class.
    pub fn target(self) -> f64 {
        match self {
            Label::Informative => 1.0,
            Label::Uninformative => 0.0,
        }
    }

    pub fn from_probability(p: f64) -> Label {
        if p >= 0.5 {
            Label::Informative
        } else {
            Label::Uninformative
        }
    }

    pub fn flip(self) -> Label {
        match self {
            Label::Informative => Label::Uninformative,
            Label::Uninformative => Label::Informative,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "INFORMATIVE" => Ok(Label::Informative),
            "UNINFORMATIVE" => Ok(Label::Uninformative),
            other => Err(Error::UnknownLabel {
                label: other.to_string(),
                line: None,
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tweet {
    pub id: String,
    pub text: String,
    pub label: Option<Label>,
}

impl Tweet {
    pub fn new(id: impl Into<String>, text: impl Into<String>, label: Option<Label>) -> Self {
        Tweet {
            id: id.into(),
            text: text.into(),
            label,
        }
    }

    /// Serializes back to the split-file line format (without newline).
    pub fn to_line(&self) -> String {
        match self.label {
            Some(label) => format!("{}\t{}\t{}", self.id, self.text, label),
            None => format!("{}\t{}", self.id, self.text),
        }
    }
}

/// Loader knobs for distributions that deviate from the plain format.
#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    /// Some releases ship a header row (`Id\tText\tLabel`); skip the first
    /// non-empty line when set.
    pub skip_header: bool,
}

pub fn load_split(path: impl AsRef<Path>, expect_labels: bool) -> Result<Vec<Tweet>> {
    load_split_with(path, expect_labels, LoadOptions::default())
}

pub fn load_split_with(
    path: impl AsRef<Path>,
    expect_labels: bool,
    options: LoadOptions,
) -> Result<Vec<Tweet>> {
    let path = path.as_ref();
    let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_split(&content, expect_labels, options).map_err(|e| e.in_file(path))
}

/// Parses split-file content. Line numbers in errors are 1-based.
pub fn parse_split(content: &str, expect_labels: bool, options: LoadOptions) -> Result<Vec<Tweet>> {
    let mut tweets = Vec::new();
    let mut seen = HashSet::new();
    let mut header_pending = options.skip_header;

    for (idx, raw) in content.split('\n').enumerate() {
        let line_no = idx + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() {
            continue;
        }
        if header_pending {
            header_pending = false;
            continue;
        }

        let fields: Vec<&str> = line.split('\t').collect();
        let malformed = |reason: &str| Error::MalformedLine {
            line: line_no,
            reason: reason.to_string(),
        };
        let label = match (fields.len(), expect_labels) {
            (3, _) => Some(
                fields[2]
                    .trim()
                    .parse::<Label>()
                    .map_err(|e| e.at_line(line_no))?,
            ),
            (2, false) => None,
            (2, true) => return Err(malformed("missing label column")),
            (n, _) => return Err(malformed(&format!("expected 2 or 3 tab-separated fields, found {n}"))),
        };
        let id = fields[0].trim();
        if id.is_empty() {
            return Err(malformed("empty id"));
        }
        if fields[1].trim().is_empty() {
            return Err(malformed("empty text"));
        }
        if !seen.insert(id.to_string()) {
            return Err(Error::DuplicateId {
                id: id.to_string(),
                line: line_no,
            });
        }
        tweets.push(Tweet::new(id, fields[1], label));
    }
    Ok(tweets)
}

/// Writes tweets in split-file format, one per line.
pub fn write_split(path: impl AsRef<Path>, tweets: &[Tweet]) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, render_split(tweets)).map_err(|e| Error::io(path, e))
}

pub fn render_split(tweets: &[Tweet]) -> String {
    let mut out = String::new();
    for tweet in tweets {
        out.push_str(&tweet.to_line());
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub name: String,
    pub informative: usize,
    pub uninformative: usize,
}

impl SplitCounts {
    pub fn total(&self) -> usize {
        self.informative + self.uninformative
    }

    pub fn count(&self, label: Label) -> usize {
        match label {
            Label::Informative => self.informative,
            Label::Uninformative => self.uninformative,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub splits: Vec<SplitCounts>,
    pub fleiss_kappa: f64,
}

impl DatasetStats {
    pub fn total(&self) -> usize {
        self.splits.iter().map(SplitCounts::total).sum()
    }

    pub fn split(&self, name: &str) -> Option<&SplitCounts> {
        self.splits.iter().find(|s| s.name == name)
    }

    /// `split.LABEL=count` lines, followed by per-split and overall totals.
    pub fn key_values(&self) -> String {
        let mut out = String::new();
        for split in &self.splits {
            for label in Label::ALL {
                out.push_str(&format!("{}.{}={}\n", split.name, label, split.count(label)));
            }
            out.push_str(&format!("{}.total={}\n", split.name, split.total()));
        }
        out.push_str(&format!("total={}\n", self.total()));
        out.push_str(&format!("fleiss_kappa={:.4}\n", self.fleiss_kappa));
        out
    }

    pub fn render_table(&self) -> String {
        let width = self
            .splits
            .iter()
            .map(|s| s.name.len())
            .chain(["split".len(), "total".len()])
            .max()
            .unwrap_or(5);
        let mut out = format!(
            "{:<width$}  {:>11}  {:>13}  {:>7}\n",
            "split", "INFORMATIVE", "UNINFORMATIVE", "total"
        );
        let (mut inf, mut uninf) = (0, 0);
        for split in &self.splits {
            inf += split.informative;
            uninf += split.uninformative;
            out.push_str(&format!(
                "{:<width$}  {:>11}  {:>13}  {:>7}\n",
                split.name,
                split.informative,
                split.uninformative,
                split.total()
            ));
        }
        out.push_str(&format!(
            "{:<width$}  {:>11}  {:>13}  {:>7}\n",
            "total",
            inf,
            uninf,
            inf + uninf
        ));
        out.push_str(&format!("Fleiss' Kappa: {:.2}%\n", self.fleiss_kappa * 100.0));
        out
    }
}

/// Counts labels per named split. Every record must carry a label.
pub fn summarize(splits: &[(&str, &[Tweet])]) -> Result<DatasetStats> {
    let mut out = Vec::with_capacity(splits.len());
    for (name, tweets) in splits {
        let mut counts = SplitCounts {
            name: name.to_string(),
            informative: 0,
            uninformative: 0,
        };
        for tweet in tweets.iter() {
            match tweet.label {
                Some(Label::Informative) => counts.informative += 1,
                Some(Label::Uninformative) => counts.uninformative += 1,
                None => {
                    return Err(Error::UnlabeledRecord {
                        split: name.to_string(),
                        id: tweet.id.clone(),
                    })
                }
            }
        }
        out.push(counts);
    }
    Ok(DatasetStats {
        splits: out,
        fleiss_kappa: FLEISS_KAPPA,
    })
}
