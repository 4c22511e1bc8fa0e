//! Hard-label majority voting over per-model prediction files.
//!
//! Prediction files are UTF-8 TSV with one `id<TAB>LABEL` line per tweet;
//! the file stem names the model.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use indexmap::IndexMap;

use crate::corpus::Label;
use crate::error::{Error, Result};

/// Member names in descending dev-F1 order of the reference systems; the
/// default priority for breaking ties.
pub const DEFAULT_PRIORITY: [&str; 4] = ["xlnet", "roberta", "bert", "bigrucnn"];

pub const ENSEMBLE_NAME: &str = "ensemble";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredictionSet {
    pub model_name: String,
    pub predictions: IndexMap<String, Label>,
}

impl PredictionSet {
    pub fn new(model_name: impl Into<String>) -> Self {
        PredictionSet {
            model_name: model_name.into(),
            predictions: IndexMap::new(),
        }
    }

    pub fn from_pairs(
        model_name: impl Into<String>,
        pairs: impl IntoIterator<Item = (String, Label)>,
    ) -> Result<Self> {
        let mut set = PredictionSet::new(model_name);
        for (i, (id, label)) in pairs.into_iter().enumerate() {
            set.insert(id, label, i + 1)?;
        }
        Ok(set)
    }

    fn insert(&mut self, id: String, label: Label, line: usize) -> Result<()> {
        if self.predictions.contains_key(&id) {
            return Err(Error::DuplicateId { id, line });
        }
        self.predictions.insert(id, label);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.predictions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.predictions.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<Label> {
        self.predictions.get(id).copied()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.predictions.keys().map(String::as_str)
    }

    pub fn parse(model_name: impl Into<String>, content: &str) -> Result<Self> {
        let mut set = PredictionSet::new(model_name);
        for (idx, raw) in content.split('\n').enumerate() {
            let line_no = idx + 1;
            let line = raw.strip_suffix('\r').unwrap_or(raw);
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 2 || fields[0].trim().is_empty() {
                return Err(Error::MalformedLine {
                    line: line_no,
                    reason: format!("expected \"id<TAB>LABEL\", found {} field(s)", fields.len()),
                });
            }
            let label = Label::from_str(fields[1].trim()).map_err(|e| e.at_line(line_no))?;
            set.insert(fields[0].trim().to_string(), label, line_no)?;
        }
        Ok(set)
    }

    /// Reads a prediction file; the model name is the file stem.
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(name, &content).map_err(|e| e.in_file(path))
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (id, label) in &self.predictions {
            out.push_str(id);
            out.push('\t');
            out.push_str(label.as_str());
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.render()).map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TieBreak {
    /// The highest-priority member's vote decides.
    #[default]
    Priority,
    /// Even splits resolve to INFORMATIVE.
    TowardInformative,
}

impl FromStr for TieBreak {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "priority" => Ok(TieBreak::Priority),
            "informative" | "toward-informative" => Ok(TieBreak::TowardInformative),
            other => Err(Error::Config(format!(
                "unknown tie-break rule {other:?} (expected \"priority\" or \"informative\")"
            ))),
        }
    }
}

impl fmt::Display for TieBreak {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TieBreak::Priority => "priority",
            TieBreak::TowardInformative => "informative",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VoteConfig {
    /// Member names, highest priority first.
    pub members: Vec<String>,
    pub tie_break: TieBreak,
}

impl VoteConfig {
    pub fn new(members: impl IntoIterator<Item = impl Into<String>>, tie_break: TieBreak) -> Result<Self> {
        let config = VoteConfig {
            members: members.into_iter().map(Into::into).collect(),
            tie_break,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.members.len() < 2 {
            return Err(Error::TooFewMembers(self.members.len()));
        }
        let mut seen = HashSet::new();
        for m in &self.members {
            if !seen.insert(m.as_str()) {
                return Err(Error::Config(format!("member {m:?} listed twice")));
            }
        }
        Ok(())
    }
}

/// Outcome for one id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Decision {
    pub label: Label,
    pub tie_broken: bool,
}

/// Majority label of `votes`, which must be ordered by member priority.
///
/// # Panics
///
/// Panics on an empty vote list.
pub fn decide(votes: &[Label], tie_break: TieBreak) -> Decision {
    assert!(!votes.is_empty(), "cannot decide on zero votes");
    let informative = votes.iter().filter(|&&v| v == Label::Informative).count();
    let uninformative = votes.len() - informative;
    let majority = match informative.cmp(&uninformative) {
        std::cmp::Ordering::Greater => Some(Label::Informative),
        std::cmp::Ordering::Less => Some(Label::Uninformative),
        std::cmp::Ordering::Equal => None,
    };
    match majority {
        Some(label) => Decision {
            label,
            tie_broken: false,
        },
        None => Decision {
            label: match tie_break {
                TieBreak::Priority => votes[0],
                TieBreak::TowardInformative => Label::Informative,
            },
            tie_broken: true,
        },
    }
}

/// Fails unless every set covers the same ids; the error lists the ids not
/// shared by all sets.
pub fn check_same_ids(sets: &[PredictionSet]) -> Result<()> {
    let Some(first) = sets.first() else {
        return Ok(());
    };
    let mismatched = sets[1..]
        .iter()
        .any(|s| s.len() != first.len() || s.ids().any(|id| !first.predictions.contains_key(id)));
    if !mismatched {
        return Ok(());
    }
    let union: BTreeSet<&str> = sets.iter().flat_map(|s| s.ids()).collect();
    let ids = union
        .into_iter()
        .filter(|id| sets.iter().any(|s| !s.predictions.contains_key(*id)))
        .map(str::to_string)
        .collect();
    Err(Error::IdMismatch { ids })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VoteOutcome {
    pub predictions: PredictionSet,
    /// Ids decided by the tie-break rule, in output order.
    pub tie_broken: Vec<String>,
}

pub fn vote(sets: &[PredictionSet], config: &VoteConfig) -> Result<PredictionSet> {
    vote_detailed(sets, config).map(|o| o.predictions)
}

/// Majority vote that also reports which ids needed the tie-break. Output
/// ids follow the order of the first input set.
pub fn vote_detailed(sets: &[PredictionSet], config: &VoteConfig) -> Result<VoteOutcome> {
    if sets.len() < 2 {
        return Err(Error::TooFewMembers(sets.len()));
    }
    config.validate()?;
    let names: BTreeSet<&str> = sets.iter().map(|s| s.model_name.as_str()).collect();
    let members: BTreeSet<&str> = config.members.iter().map(String::as_str).collect();
    if names.len() != sets.len() || names != members {
        return Err(Error::Config(format!(
            "prediction sets [{}] do not match vote members [{}]",
            sets.iter().map(|s| s.model_name.as_str()).collect::<Vec<_>>().join(", "),
            config.members.join(", ")
        )));
    }
    check_same_ids(sets)?;

    let ordered: Vec<&PredictionSet> = config
        .members
        .iter()
        .map(|m| sets.iter().find(|s| &s.model_name == m).unwrap())
        .collect();
    let mut predictions = PredictionSet::new(ENSEMBLE_NAME);
    let mut tie_broken = Vec::new();
    let mut votes = Vec::with_capacity(ordered.len());
    for id in sets[0].ids() {
        votes.clear();
        votes.extend(ordered.iter().map(|s| s.predictions[id]));
        let decision = decide(&votes, config.tie_break);
        if decision.tie_broken {
            tie_broken.push(id.to_string());
        }
        predictions.predictions.insert(id.to_string(), decision.label);
    }
    Ok(VoteOutcome {
        predictions,
        tie_broken,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairAgreement {
    pub first: String,
    pub second: String,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgreementReport {
    pub pairs: Vec<PairAgreement>,
    /// Fraction of ids on which every member agrees.
    pub unanimity: f64,
    pub ids: usize,
}

impl AgreementReport {
    pub fn render(&self) -> String {
        let mut out = String::new();
        for p in &self.pairs {
            out.push_str(&format!("agreement.{}.{}={:.4}\n", p.first, p.second, p.rate));
        }
        out.push_str(&format!("unanimity={:.4}\n", self.unanimity));
        out
    }
}

/// Pairwise agreement rates (input order) and the unanimity rate. An empty
/// id universe agrees vacuously (all rates 1).
pub fn agreement_report(sets: &[PredictionSet]) -> Result<AgreementReport> {
    if sets.len() < 2 {
        return Err(Error::TooFewMembers(sets.len()));
    }
    check_same_ids(sets)?;
    let n = sets[0].len();
    let rate = |count: usize| if n == 0 { 1.0 } else { count as f64 / n as f64 };

    let mut pairs = Vec::new();
    for (i, a) in sets.iter().enumerate() {
        for b in &sets[i + 1..] {
            let same = a
                .predictions
                .iter()
                .filter(|(id, label)| b.predictions[id.as_str()] == **label)
                .count();
            pairs.push(PairAgreement {
                first: a.model_name.clone(),
                second: b.model_name.clone(),
                rate: rate(same),
            });
        }
    }
    let unanimous = sets[0]
        .predictions
        .iter()
        .filter(|(id, label)| sets[1..].iter().all(|s| s.predictions[id.as_str()] == **label))
        .count();
    Ok(AgreementReport {
        pairs,
        unanimity: rate(unanimous),
        ids: n,
    })
}
