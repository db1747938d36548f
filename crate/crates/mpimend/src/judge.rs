//! Turn model responses into verdicts and fold verdicts into confusion
//! matrices.
//!
//! The engineered prompts pin the response's last line to one of two
//! sentinels. The negative sentinel contains the positive one as a
//! substring, so it is always checked first: a response ending in
//! `NO MAJOR ERRORS DETECTED` is never defective. Free-text answers from
//! the unengineered techniques fall back to a keyword heuristic, and every
//! decision records which rule fired so runs can be audited.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::corpus::GroundTruth;
use crate::prompts::Technique;

pub const NEGATIVE_SENTINEL: &str = "NO MAJOR ERRORS DETECTED";
pub const POSITIVE_SENTINEL: &str = "MAJOR ERRORS DETECTED";

/// Only the tail of a response is scanned for sentinels; the prompts ask
/// for the verdict at the very end.
const SCAN_WINDOW_CHARS: usize = 2000;

/// Explicit "this code is fine" phrasings, checked before defect keywords
/// for the same reason the negative sentinel is checked first.
const CLEAN_PHRASES: &[&str] = &[
    "no bugs",
    "no errors",
    "no defects",
    "no issues",
    "does not contain bugs",
    "does not contain any bugs",
    "doesn't contain bugs",
    "contains no bugs",
    "contains no errors",
    "free of bugs",
    "free of errors",
    "bug-free",
    "error-free",
    "looks fine",
    "looks correct",
    "appears correct",
    "appears to be correct",
    "is correct",
];

const DEFECT_PHRASES: &[&str] = &[
    "contains bugs",
    "contains a bug",
    "contains errors",
    "contains an error",
    "has bugs",
    "has a bug",
    "has errors",
    "is buggy",
    "bug found",
    "bugs found",
    "deadlock",
    "resource leak",
    "race condition",
    "message race",
    "mismatched tag",
    "mismatched parameter",
    "missing wait",
    "missing mpi_wait",
    "defect",
    "will hang",
];

#[derive(Debug, Error)]
pub enum JudgeError {
    #[error("verdict for unknown sample id `{0}`")]
    UnknownSample(String),
}

/// What the model said about a program.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    Defective,
    Clean,
    Unparsed,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Defective => "defective",
            Self::Clean => "clean",
            Self::Unparsed => "unparsed",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "defective" => Some(Self::Defective),
            "clean" => Some(Self::Clean),
            "unparsed" => Some(Self::Unparsed),
            _ => None,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which rule produced a verdict; logged for audit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VerdictRule {
    NegativeSentinel,
    PositiveSentinel,
    CleanPhrase(&'static str),
    DefectPhrase(&'static str),
    Undecided,
}

impl fmt::Display for VerdictRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NegativeSentinel => write!(f, "negative-sentinel"),
            Self::PositiveSentinel => write!(f, "positive-sentinel"),
            Self::CleanPhrase(p) => write!(f, "clean-phrase:{p}"),
            Self::DefectPhrase(p) => write!(f, "defect-phrase:{p}"),
            Self::Undecided => write!(f, "undecided"),
        }
    }
}

fn tail_chars(text: &str, n: usize) -> &str {
    let count = text.chars().count();
    if count <= n {
        return text;
    }
    let skip = count - n;
    match text.char_indices().nth(skip) {
        Some((idx, _)) => &text[idx..],
        None => text,
    }
}

/// Classify a response. Total: every string maps to a verdict, with
/// `Unparsed` as the undecidable bucket rather than an error.
pub fn parse_verdict(response: &str, technique: Technique) -> (Verdict, VerdictRule) {
    let window = tail_chars(response, SCAN_WINDOW_CHARS);
    if window.contains(NEGATIVE_SENTINEL) {
        return (Verdict::Clean, VerdictRule::NegativeSentinel);
    }
    if window.contains(POSITIVE_SENTINEL) {
        return (Verdict::Defective, VerdictRule::PositiveSentinel);
    }

    if matches!(technique, Technique::ZeroShot | Technique::FewShot) {
        let lowered = window.to_lowercase();
        for phrase in CLEAN_PHRASES {
            if lowered.contains(phrase) {
                return (Verdict::Clean, VerdictRule::CleanPhrase(phrase));
            }
        }
        for phrase in DEFECT_PHRASES {
            if lowered.contains(phrase) {
                return (Verdict::Defective, VerdictRule::DefectPhrase(phrase));
            }
        }
    }
    (Verdict::Unparsed, VerdictRule::Undecided)
}

/// How unparseable responses count toward the confusion matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UnparsedPolicy {
    CountAsDefective,
    CountAsClean,
    #[default]
    Exclude,
}

impl UnparsedPolicy {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "count-as-defective" => Some(Self::CountAsDefective),
            "count-as-clean" => Some(Self::CountAsClean),
            "exclude" => Some(Self::Exclude),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::CountAsDefective => "count-as-defective",
            Self::CountAsClean => "count-as-clean",
            Self::Exclude => "exclude",
        }
    }
}

/// TP/TN/FP/FN counts for one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn new(tp: u64, tn: u64, fp: u64, fn_: u64) -> Self {
        Self { tp, tn, fp, fn_ }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }
}

/// A scored trial: the matrix plus how many verdicts were excluded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ScoreSummary {
    pub matrix: ConfusionMatrix,
    pub unparsed: u64,
}

/// Fold `(sample_id, verdict)` pairs against ground truth.
pub fn score(
    verdicts: &[(String, Verdict)],
    truth: &HashMap<String, GroundTruth>,
    policy: UnparsedPolicy,
) -> Result<ScoreSummary, JudgeError> {
    let mut summary = ScoreSummary::default();
    for (sample_id, verdict) in verdicts {
        let label = truth
            .get(sample_id)
            .ok_or_else(|| JudgeError::UnknownSample(sample_id.clone()))?;
        let effective = match (verdict, policy) {
            (Verdict::Unparsed, UnparsedPolicy::Exclude) => {
                summary.unparsed += 1;
                continue;
            }
            (Verdict::Unparsed, UnparsedPolicy::CountAsDefective) => Verdict::Defective,
            (Verdict::Unparsed, UnparsedPolicy::CountAsClean) => Verdict::Clean,
            (v, _) => *v,
        };
        match (effective, label) {
            (Verdict::Defective, GroundTruth::Defective) => summary.matrix.tp += 1,
            (Verdict::Defective, GroundTruth::Correct) => summary.matrix.fp += 1,
            (Verdict::Clean, GroundTruth::Correct) => summary.matrix.tn += 1,
            (Verdict::Clean, GroundTruth::Defective) => summary.matrix.fn_ += 1,
            (Verdict::Unparsed, _) => unreachable!("unparsed resolved above"),
        }
    }
    Ok(summary)
}
