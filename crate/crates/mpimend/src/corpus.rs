//! Corpus loading, labeling, and preprocessing.
//!
//! Every sample enters the pipeline with its comments removed. Defective
//! samples in public MPI bug datasets tend to carry defect-descriptive
//! comments, which would leak the answer to the model, so preprocessing
//! strips `//` and `/* */` comments while leaving string and character
//! literals untouched.

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("unterminated block comment starting at byte offset {offset}")]
    UnterminatedBlockComment { offset: usize },
    #[error("manifest not found: {0}")]
    ManifestNotFound(PathBuf),
    #[error("manifest line {line}: expected 4 tab-separated fields, got {got}")]
    MalformedRecord { line: usize, got: usize },
    #[error("manifest line {line}: empty sample id")]
    EmptyId { line: usize },
    #[error("duplicate sample id `{0}`")]
    DuplicateId(String),
    #[error("manifest line {line}: unknown label `{label}` (expected `defective` or `correct`)")]
    UnknownLabel { line: usize, label: String },
    #[error("manifest line {line}: unknown defect class `{class}`")]
    UnknownDefectClass { line: usize, class: String },
    #[error("sample `{id}`: defective samples need at least one defect class")]
    MissingDefectClasses { id: String },
    #[error("sample `{id}`: correct samples must not list defect classes")]
    UnexpectedDefectClasses { id: String },
    #[error("sample `{id}`: cannot read source {path}: {source}")]
    SourceRead {
        id: String,
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot read manifest {path}: {source}")]
    ManifestRead {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("sample `{id}`: {source}")]
    Preprocess {
        id: String,
        source: Box<CorpusError>,
    },
}

/// Ground-truth label of a sample: does the program actually contain a defect?
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum GroundTruth {
    Defective,
    Correct,
}

impl GroundTruth {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "defective" => Some(Self::Defective),
            "correct" => Some(Self::Correct),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Defective => "defective",
            Self::Correct => "correct",
        }
    }
}

impl fmt::Display for GroundTruth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Closed set of MPI defect categories used for labeling and bug references.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DefectClass {
    ResourceLeak,
    CallOrdering,
    InvalidParameter,
    Deadlock,
    PointToPoint,
    Collective,
    MessageRace,
    MismatchedTag,
    MissingWait,
}

impl DefectClass {
    pub const ALL: [DefectClass; 9] = [
        DefectClass::ResourceLeak,
        DefectClass::CallOrdering,
        DefectClass::InvalidParameter,
        DefectClass::Deadlock,
        DefectClass::PointToPoint,
        DefectClass::Collective,
        DefectClass::MessageRace,
        DefectClass::MismatchedTag,
        DefectClass::MissingWait,
    ];

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "resource-leak" => Some(Self::ResourceLeak),
            "call-ordering" => Some(Self::CallOrdering),
            "invalid-parameter" => Some(Self::InvalidParameter),
            "deadlock" => Some(Self::Deadlock),
            "point-to-point" => Some(Self::PointToPoint),
            "collective" => Some(Self::Collective),
            "message-race" => Some(Self::MessageRace),
            "mismatched-tag" => Some(Self::MismatchedTag),
            "missing-wait" => Some(Self::MissingWait),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::ResourceLeak => "resource-leak",
            Self::CallOrdering => "call-ordering",
            Self::InvalidParameter => "invalid-parameter",
            Self::Deadlock => "deadlock",
            Self::PointToPoint => "point-to-point",
            Self::Collective => "collective",
            Self::MessageRace => "message-race",
            Self::MismatchedTag => "mismatched-tag",
            Self::MissingWait => "missing-wait",
        }
    }
}

impl fmt::Display for DefectClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One MPI C source with its ground truth, already comment-stripped.
#[derive(Debug, Clone)]
pub struct ProgramSample {
    pub id: String,
    pub source: String,
    pub label: GroundTruth,
    pub defect_classes: HashSet<DefectClass>,
    pub origin: String,
}

/// Totals derived from a manifest; `total = defective + correct` always.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CorpusCounts {
    pub total: usize,
    pub defective: usize,
    pub correct: usize,
}

/// An ordered corpus of samples plus its counts.
#[derive(Debug, Clone)]
pub struct CorpusManifest {
    pub samples: Vec<ProgramSample>,
    pub counts: CorpusCounts,
}

impl CorpusManifest {
    pub fn get(&self, id: &str) -> Option<&ProgramSample> {
        self.samples.iter().find(|s| s.id == id)
    }
}

#[derive(Clone, Copy)]
enum StripState {
    Code,
    Slash,
    LineComment,
    LineCommentBackslash,
    BlockComment { start: usize },
    BlockCommentStar { start: usize },
    Str,
    StrEscape,
    Char,
    CharEscape,
}

/// Remove all C comments from `source`.
///
/// `//` comments are deleted up to (not including) the newline; a
/// backslash-newline inside a `//` comment extends it, as in C. Each
/// `/* ... */` comment is replaced by a single space so adjacent tokens
/// do not fuse. Comment-like sequences inside string and character
/// literals are preserved verbatim. Everything else passes through
/// unchanged, so the function is the identity on comment-free input and
/// idempotent in general.
pub fn strip_comments(source: &str) -> Result<String, CorpusError> {
    let bytes = source.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut state = StripState::Code;

    for (i, &b) in bytes.iter().enumerate() {
        state = match state {
            StripState::Code => match b {
                b'/' => StripState::Slash,
                b'"' => {
                    out.push(b);
                    StripState::Str
                }
                b'\'' => {
                    out.push(b);
                    StripState::Char
                }
                _ => {
                    out.push(b);
                    StripState::Code
                }
            },
            StripState::Slash => match b {
                b'/' => StripState::LineComment,
                b'*' => StripState::BlockComment { start: i - 1 },
                b'"' => {
                    out.push(b'/');
                    out.push(b);
                    StripState::Str
                }
                b'\'' => {
                    out.push(b'/');
                    out.push(b);
                    StripState::Char
                }
                _ => {
                    out.push(b'/');
                    out.push(b);
                    StripState::Code
                }
            },
            StripState::LineComment => match b {
                b'\n' => {
                    out.push(b'\n');
                    StripState::Code
                }
                b'\\' => StripState::LineCommentBackslash,
                _ => StripState::LineComment,
            },
            // A backslash at the end of a comment line splices the next
            // line into the comment (C phase-2 line splicing).
            StripState::LineCommentBackslash => match b {
                b'\\' => StripState::LineCommentBackslash,
                _ => StripState::LineComment,
            },
            StripState::BlockComment { start } => match b {
                b'*' => StripState::BlockCommentStar { start },
                _ => StripState::BlockComment { start },
            },
            StripState::BlockCommentStar { start } => match b {
                b'/' => {
                    out.push(b' ');
                    StripState::Code
                }
                b'*' => StripState::BlockCommentStar { start },
                _ => StripState::BlockComment { start },
            },
            StripState::Str => match b {
                b'\\' => {
                    out.push(b);
                    StripState::StrEscape
                }
                b'"' => {
                    out.push(b);
                    StripState::Code
                }
                _ => {
                    out.push(b);
                    StripState::Str
                }
            },
            StripState::StrEscape => {
                out.push(b);
                StripState::Str
            }
            StripState::Char => match b {
                b'\\' => {
                    out.push(b);
                    StripState::CharEscape
                }
                b'\'' => {
                    out.push(b);
                    StripState::Code
                }
                _ => {
                    out.push(b);
                    StripState::Char
                }
            },
            StripState::CharEscape => {
                out.push(b);
                StripState::Char
            }
        };
    }

    match state {
        StripState::BlockComment { start } | StripState::BlockCommentStar { start } => {
            return Err(CorpusError::UnterminatedBlockComment { offset: start });
        }
        StripState::Slash => out.push(b'/'),
        _ => {}
    }

    // Only ASCII bytes are ever inspected; multi-byte sequences are copied
    // or dropped whole, so the output stays valid UTF-8.
    Ok(String::from_utf8(out).expect("stripper preserves UTF-8"))
}

/// Load a corpus from a tab-separated manifest.
///
/// `path` may be the manifest file itself or a directory containing
/// `manifest.tsv`. Each record is `id<TAB>relative_path<TAB>label<TAB>classes`
/// where `classes` is a comma-separated list of defect classes, empty for
/// correct samples. Sources are comment-stripped on load and returned in
/// manifest order.
pub fn load_corpus(path: &Path) -> Result<CorpusManifest, CorpusError> {
    let manifest_path = if path.is_dir() {
        path.join("manifest.tsv")
    } else {
        path.to_path_buf()
    };
    if !manifest_path.is_file() {
        return Err(CorpusError::ManifestNotFound(manifest_path));
    }
    let base = manifest_path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let text = std::fs::read_to_string(&manifest_path).map_err(|e| CorpusError::ManifestRead {
        path: manifest_path.clone(),
        source: e,
    })?;

    let mut samples = Vec::new();
    let mut seen = HashSet::new();
    for (lineno, line) in text.lines().enumerate() {
        let line_no = lineno + 1;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(CorpusError::MalformedRecord {
                line: line_no,
                got: fields.len(),
            });
        }
        let id = fields[0].trim();
        if id.is_empty() {
            return Err(CorpusError::EmptyId { line: line_no });
        }
        if !seen.insert(id.to_string()) {
            return Err(CorpusError::DuplicateId(id.to_string()));
        }
        let label = GroundTruth::parse(fields[2].trim()).ok_or_else(|| CorpusError::UnknownLabel {
            line: line_no,
            label: fields[2].trim().to_string(),
        })?;
        let mut classes = HashSet::new();
        for cls in fields[3].split(',').map(str::trim).filter(|c| !c.is_empty()) {
            let parsed = DefectClass::parse(cls).ok_or_else(|| CorpusError::UnknownDefectClass {
                line: line_no,
                class: cls.to_string(),
            })?;
            classes.insert(parsed);
        }
        match label {
            GroundTruth::Defective if classes.is_empty() => {
                return Err(CorpusError::MissingDefectClasses { id: id.to_string() })
            }
            GroundTruth::Correct if !classes.is_empty() => {
                return Err(CorpusError::UnexpectedDefectClasses { id: id.to_string() })
            }
            _ => {}
        }

        let source_path = base.join(fields[1].trim());
        let raw = std::fs::read_to_string(&source_path).map_err(|e| CorpusError::SourceRead {
            id: id.to_string(),
            path: source_path.clone(),
            source: e,
        })?;
        let source = strip_comments(&raw).map_err(|e| CorpusError::Preprocess {
            id: id.to_string(),
            source: Box::new(e),
        })?;

        samples.push(ProgramSample {
            id: id.to_string(),
            source,
            label,
            defect_classes: classes,
            origin: source_path.display().to_string(),
        });
    }

    let defective = samples
        .iter()
        .filter(|s| s.label == GroundTruth::Defective)
        .count();
    let counts = CorpusCounts {
        total: samples.len(),
        defective,
        correct: samples.len() - defective,
    };
    Ok(CorpusManifest { samples, counts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    #[test]
    fn line_comment_removed_up_to_newline() {
        assert_eq!(strip_comments("int x = 1; // note\n").unwrap(), "int x = 1; \n");
    }

    #[test]
    fn block_comment_becomes_one_space() {
        assert_eq!(strip_comments("a/*c*/b").unwrap(), "a b");
    }

    #[test]
    fn literals_are_protected() {
        let s = "char *s = \"//not a comment\";";
        assert_eq!(strip_comments(s).unwrap(), s);
        let c = "char c = '/'; char d = '*';";
        assert_eq!(strip_comments(c).unwrap(), c);
        let esc = "char *s = \"a\\\"//still a string\";";
        assert_eq!(strip_comments(esc).unwrap(), esc);
    }

    #[test]
    fn line_continuation_extends_line_comment() {
        assert_eq!(strip_comments("x; // a \\\ny continues\nz;").unwrap(), "x; \nz;");
    }

    #[test]
    fn unterminated_block_comment_reports_offset() {
        match strip_comments("ab/*oops") {
            Err(CorpusError::UnterminatedBlockComment { offset }) => assert_eq!(offset, 2),
            other => panic!("expected unterminated error, got {other:?}"),
        }
    }

    #[test]
    fn trailing_slash_is_kept() {
        assert_eq!(strip_comments("a = b /").unwrap(), "a = b /");
    }

    #[test]
    fn stripping_is_idempotent_on_samples() {
        let cases = [
            "int x = 1; // note\n",
            "a/*c*/b",
            "a//**/*\n*b",
            "/*a*/*/",
            "char *s = \"/*\"; /*x*/ int y; // t\n",
        ];
        for case in cases {
            let once = strip_comments(case).unwrap();
            let twice = strip_comments(&once).unwrap();
            assert_eq!(once, twice, "not idempotent for {case:?}");
        }
    }

    #[test]
    fn block_comment_of_len_l_shrinks_text_by_l_minus_one() {
        // "/*abc*/" has length 7 and becomes " ".
        let s = "x/*abc*/y";
        let stripped = strip_comments(s).unwrap();
        assert_eq!(s.len() - stripped.len(), 7 - 1);
        assert_eq!(strip_comments("/**/").unwrap(), " ");
    }

    fn write_corpus(dir: &Path, files: &[(&str, &str)], manifest: &str) -> PathBuf {
        for (name, content) in files {
            fs::write(dir.join(name), content).unwrap();
        }
        let path = dir.join("manifest.tsv");
        fs::write(&path, manifest).unwrap();
        path
    }

    #[test]
    fn load_counts_and_strips() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = "d1\td1.c\tdefective\tdeadlock\n\
                        d2\td2.c\tdefective\tresource-leak,missing-wait\n\
                        c1\tc1.c\tcorrect\t\n";
        let path = write_corpus(
            dir.path(),
            &[
                ("d1.c", "int main() { /* hang */ return 0; }\n"),
                ("d2.c", "int main() { return 1; } // leak\n"),
                ("c1.c", "int main() { return 0; }\n"),
            ],
            manifest,
        );
        let corpus = load_corpus(&path).unwrap();
        assert_eq!(
            corpus.counts,
            CorpusCounts { total: 3, defective: 2, correct: 1 }
        );
        assert_eq!(corpus.samples[0].source, "int main() {   return 0; }\n");
        assert_eq!(corpus.samples[1].source, "int main() { return 1; } \n");
        assert_eq!(corpus.samples[1].defect_classes.len(), 2);
        // directory form finds manifest.tsv
        let via_dir = load_corpus(dir.path()).unwrap();
        assert_eq!(via_dir.counts, corpus.counts);
    }

    #[test]
    fn duplicate_id_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = "a\ta.c\tcorrect\t\na\ta.c\tcorrect\t\n";
        let path = write_corpus(dir.path(), &[("a.c", "int x;")], manifest);
        assert!(matches!(load_corpus(&path), Err(CorpusError::DuplicateId(id)) if id == "a"));
    }

    #[test]
    fn label_class_consistency_is_enforced() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = "a\ta.c\tdefective\t\n";
        let path = write_corpus(dir.path(), &[("a.c", "int x;")], manifest);
        assert!(matches!(
            load_corpus(&path),
            Err(CorpusError::MissingDefectClasses { .. })
        ));

        let manifest = "a\ta.c\tcorrect\tdeadlock\n";
        fs::write(dir.path().join("manifest.tsv"), manifest).unwrap();
        assert!(matches!(
            load_corpus(dir.path()),
            Err(CorpusError::UnexpectedDefectClasses { .. })
        ));
    }

    #[test]
    fn missing_source_file_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_corpus(dir.path(), &[], "a\tnope.c\tcorrect\t\n");
        assert!(matches!(load_corpus(&path), Err(CorpusError::SourceRead { .. })));
    }

    #[test]
    fn paper_shaped_corpus_has_241_174_67_counts() {
        let dir = tempfile::tempdir().unwrap();
        let mut manifest = String::new();
        for i in 0..241 {
            let (label, classes) = if i < 174 { ("defective", "deadlock") } else { ("correct", "") };
            let name = format!("s{i:03}.c");
            fs::write(dir.path().join(&name), "int main() { return 0; }\n").unwrap();
            manifest.push_str(&format!("s{i:03}\t{name}\t{label}\t{classes}\n"));
        }
        fs::write(dir.path().join("manifest.tsv"), &manifest).unwrap();
        let corpus = load_corpus(dir.path()).unwrap();
        assert_eq!(
            corpus.counts,
            CorpusCounts { total: 241, defective: 174, correct: 67 }
        );
        assert_eq!(corpus.counts.total, corpus.counts.defective + corpus.counts.correct);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn identity_on_trigger_free_input(s in "[a-z0-9 \\n;(){}=+-]{0,200}") {
                prop_assert_eq!(strip_comments(&s).unwrap(), s);
            }

            #[test]
            fn idempotent_on_arbitrary_input(s in "[a-z \\n\"'/*\\\\]{0,120}") {
                if let Ok(once) = strip_comments(&s) {
                    let twice = strip_comments(&once).unwrap();
                    prop_assert_eq!(once, twice);
                }
            }

            #[test]
            fn never_lengthens(s in "[a-z \\n\"'/*\\\\]{0,120}") {
                if let Ok(out) = strip_comments(&s) {
                    prop_assert!(out.len() <= s.len());
                }
            }
        }
    }
}
