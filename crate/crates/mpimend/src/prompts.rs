//! Prompt assembly for every detection and repair technique.
//!
//! Templates live in `templates/` with `[CODE]` and `[EXAMPLES]`
//! placeholders so operators can audit or reword them without rebuilding;
//! the shipped files are compiled in as defaults. Rendering is pure string
//! substitution, so identical inputs always produce byte-identical bundles.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bugrefs::{render_reference, BugReferenceSet};
use crate::corpus::ProgramSample;
use crate::rag::{RetrievalHit, VectorStore};

const ZERO_SHOT_TEMPLATE: &str = include_str!("../templates/zero_shot.txt");
const FEW_SHOT_TEMPLATE: &str = include_str!("../templates/few_shot.txt");
const FEW_SHOT_COT_TEMPLATE: &str = include_str!("../templates/few_shot_cot.txt");
const REPAIR_TEMPLATE: &str = include_str!("../templates/repair.txt");

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("sample `{0}` has empty source")]
    EmptySource(String),
    #[error("few-shot prompts need a non-empty reference set")]
    EmptyReferences,
    #[error("retrieval prompts need at least one hit")]
    EmptyHits,
    #[error("retrieval hit names unknown document `{0}`")]
    UnknownDoc(String),
    #[error("retrieval wrapping expects a Few-Shot+CoT bundle, got {0}")]
    NotEngineered(String),
    #[error("cannot read template {path}: {source}")]
    TemplateRead {
        path: String,
        source: std::io::Error,
    },
    #[error("template {path} is missing the `{placeholder}` placeholder")]
    MissingPlaceholder { path: String, placeholder: String },
}

/// Retrieval corpus composition, used both to build stores and to label
/// the RAG technique variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CorpusComposition {
    R100,
    R75,
    R50,
    R25,
    R0,
}

impl CorpusComposition {
    pub const ALL: [CorpusComposition; 5] = [
        CorpusComposition::R100,
        CorpusComposition::R75,
        CorpusComposition::R50,
        CorpusComposition::R25,
        CorpusComposition::R0,
    ];

    /// Fraction of the corpus drawn from known-good programs.
    pub fn clean_fraction(&self) -> f64 {
        match self {
            Self::R100 => 1.00,
            Self::R75 => 0.75,
            Self::R50 => 0.50,
            Self::R25 => 0.25,
            Self::R0 => 0.00,
        }
    }

    pub fn percent(&self) -> u8 {
        match self {
            Self::R100 => 100,
            Self::R75 => 75,
            Self::R50 => 50,
            Self::R25 => 25,
            Self::R0 => 0,
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "r100" | "100" => Some(Self::R100),
            "r75" | "75" => Some(Self::R75),
            "r50" | "50" => Some(Self::R50),
            "r25" | "25" => Some(Self::R25),
            "r0" | "0" => Some(Self::R0),
            _ => None,
        }
    }
}

/// Prompting technique under evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Technique {
    ZeroShot,
    FewShot,
    FewShotCoT,
    FewShotCoTRag(CorpusComposition),
    Repair,
}

impl Technique {
    /// Canonical study label used in reports, CSV output, and transcripts.
    pub fn label(&self) -> String {
        match self {
            Self::ZeroShot => "Zero-Shot".into(),
            Self::FewShot => "Few-Shot".into(),
            Self::FewShotCoT => "Few-Shot+CoT".into(),
            Self::FewShotCoTRag(c) => format!("Few-Shot+CoT+RAG_{}%", c.percent()),
            Self::Repair => "Repair".into(),
        }
    }

    /// Parse the CLI spelling (`zero-shot`, `few-shot-cot-rag-50`, ...).
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "zero-shot" => Some(Self::ZeroShot),
            "few-shot" => Some(Self::FewShot),
            "few-shot-cot" => Some(Self::FewShotCoT),
            "repair" => Some(Self::Repair),
            _ => {
                let pct = s.strip_prefix("few-shot-cot-rag-")?;
                CorpusComposition::parse(pct).map(Self::FewShotCoTRag)
            }
        }
    }

    pub fn is_rag(&self) -> bool {
        matches!(self, Self::FewShotCoTRag(_))
    }
}

impl fmt::Display for Technique {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn user(content: impl Into<String>) -> Self {
        Self { role: Role::User, content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self { role: Role::Assistant, content: content.into() }
    }
}

/// Fully rendered chat messages for one (technique, sample, trial).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptBundle {
    pub technique: Technique,
    pub sample_id: String,
    pub trial_index: u32,
    pub messages: Vec<ChatMessage>,
}

/// The four prompt templates, substitutable from disk.
#[derive(Debug, Clone)]
pub struct PromptTemplates {
    pub zero_shot: String,
    pub few_shot: String,
    pub few_shot_cot: String,
    pub repair: String,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        Self {
            zero_shot: ZERO_SHOT_TEMPLATE.into(),
            few_shot: FEW_SHOT_TEMPLATE.into(),
            few_shot_cot: FEW_SHOT_COT_TEMPLATE.into(),
            repair: REPAIR_TEMPLATE.into(),
        }
    }
}

impl PromptTemplates {
    /// Load operator-supplied templates from a directory. Missing files
    /// fall back to the built-in wording; a single trailing newline added
    /// by an editor is tolerated.
    pub fn from_dir(dir: &Path) -> Result<Self, PromptError> {
        let mut templates = Self::default();
        let slots: [(&str, &mut String, &[&str]); 4] = [
            ("zero_shot.txt", &mut templates.zero_shot, &["[CODE]"]),
            ("few_shot.txt", &mut templates.few_shot, &["[CODE]", "[EXAMPLES]"]),
            ("few_shot_cot.txt", &mut templates.few_shot_cot, &["[CODE]", "[EXAMPLES]"]),
            ("repair.txt", &mut templates.repair, &["[CODE]", "[EXAMPLES]"]),
        ];
        for (name, slot, placeholders) in slots {
            let path = dir.join(name);
            if !path.is_file() {
                continue;
            }
            let text = std::fs::read_to_string(&path).map_err(|e| PromptError::TemplateRead {
                path: path.display().to_string(),
                source: e,
            })?;
            let text = text.strip_suffix('\n').unwrap_or(&text).to_string();
            for placeholder in placeholders {
                if !text.contains(placeholder) {
                    return Err(PromptError::MissingPlaceholder {
                        path: path.display().to_string(),
                        placeholder: placeholder.to_string(),
                    });
                }
            }
            *slot = text;
        }
        Ok(templates)
    }

    fn check_sample(sample: &ProgramSample) -> Result<(), PromptError> {
        if sample.source.is_empty() {
            return Err(PromptError::EmptySource(sample.id.clone()));
        }
        Ok(())
    }

    fn rendered_examples(refs: &BugReferenceSet) -> Result<String, PromptError> {
        if refs.is_empty() {
            return Err(PromptError::EmptyReferences);
        }
        Ok(refs
            .references
            .iter()
            .map(render_reference)
            .collect::<Vec<_>>()
            .join("\n\n"))
    }

    /// The baseline question with no examples at all.
    pub fn build_zero_shot(
        &self,
        sample: &ProgramSample,
        trial: u32,
    ) -> Result<PromptBundle, PromptError> {
        Self::check_sample(sample)?;
        let content = self.zero_shot.replace("[CODE]", &sample.source);
        Ok(PromptBundle {
            technique: Technique::ZeroShot,
            sample_id: sample.id.clone(),
            trial_index: trial,
            messages: vec![ChatMessage::user(content)],
        })
    }

    /// Nine bug references followed by the baseline question.
    pub fn build_few_shot(
        &self,
        sample: &ProgramSample,
        refs: &BugReferenceSet,
        trial: u32,
    ) -> Result<PromptBundle, PromptError> {
        Self::check_sample(sample)?;
        let content = self
            .few_shot
            .replace("[EXAMPLES]", &Self::rendered_examples(refs)?)
            .replace("[CODE]", &sample.source);
        Ok(PromptBundle {
            technique: Technique::FewShot,
            sample_id: sample.id.clone(),
            trial_index: trial,
            messages: vec![ChatMessage::user(content)],
        })
    }

    /// Few-shot body plus the five-step checklist and the sentinel
    /// instruction that pins the response's final line.
    pub fn build_few_shot_cot(
        &self,
        sample: &ProgramSample,
        refs: &BugReferenceSet,
        trial: u32,
    ) -> Result<PromptBundle, PromptError> {
        Self::check_sample(sample)?;
        let content = self
            .few_shot_cot
            .replace("[EXAMPLES]", &Self::rendered_examples(refs)?)
            .replace("[CODE]", &sample.source);
        Ok(PromptBundle {
            technique: Technique::FewShotCoT,
            sample_id: sample.id.clone(),
            trial_index: trial,
            messages: vec![ChatMessage::user(content)],
        })
    }

    /// Wrap an engineered Few-Shot+CoT bundle with retrieval results.
    ///
    /// The user message is unchanged; retrieved documents ride in a single
    /// assistant message, each introduced by a
    /// `--- retrieved (distance=<d>) ---` header and separated by one
    /// blank line, in ascending distance order.
    pub fn build_rag(
        &self,
        engineered: PromptBundle,
        hits: &[RetrievalHit],
        store: &VectorStore,
        composition: CorpusComposition,
    ) -> Result<PromptBundle, PromptError> {
        if engineered.technique != Technique::FewShotCoT {
            return Err(PromptError::NotEngineered(engineered.technique.label()));
        }
        if hits.is_empty() {
            return Err(PromptError::EmptyHits);
        }
        let mut sorted: Vec<&RetrievalHit> = hits.iter().collect();
        sorted.sort_by(|a, b| {
            a.distance
                .partial_cmp(&b.distance)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| a.doc_id.cmp(&b.doc_id))
        });
        let mut sections = Vec::with_capacity(sorted.len());
        for hit in sorted {
            let doc = store
                .get(&hit.doc_id)
                .ok_or_else(|| PromptError::UnknownDoc(hit.doc_id.clone()))?;
            sections.push(format!(
                "--- retrieved (distance={:.6}) ---\n{}",
                hit.distance, doc.source
            ));
        }
        let user = engineered
            .messages
            .into_iter()
            .find(|m| m.role == Role::User)
            .expect("engineered bundle has a user message");
        Ok(PromptBundle {
            technique: Technique::FewShotCoTRag(composition),
            sample_id: engineered.sample_id,
            trial_index: engineered.trial_index,
            messages: vec![user, ChatMessage::assistant(sections.join("\n\n"))],
        })
    }

    /// Few-shot body and checklist, then the program, then the repair
    /// instruction.
    pub fn build_repair(
        &self,
        sample: &ProgramSample,
        refs: &BugReferenceSet,
        trial: u32,
    ) -> Result<PromptBundle, PromptError> {
        Self::check_sample(sample)?;
        let content = self
            .repair
            .replace("[EXAMPLES]", &Self::rendered_examples(refs)?)
            .replace("[CODE]", &sample.source);
        Ok(PromptBundle {
            technique: Technique::Repair,
            sample_id: sample.id.clone(),
            trial_index: trial,
            messages: vec![ChatMessage::user(content)],
        })
    }
}
