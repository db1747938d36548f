//! Retrieval stores for RAG prompts.
//!
//! A store maps whole programs to unit-length embedding vectors and
//! answers nearest-neighbor queries by cosine distance
//! (`1 - cosine_similarity`, smaller = more similar). Corpora are a few
//! hundred documents at most, so queries are exact scans; there is no
//! approximate index to tune or to distrust.
//!
//! Embeddings come either from an OpenAI-compatible `/v1/embeddings`
//! endpoint or from a deterministic token-hash embedder that needs no
//! network at all, which keeps the full pipeline testable offline.

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::time::Duration;

use thiserror::Error;

use crate::corpus::GroundTruth;
use crate::prompts::CorpusComposition;

/// Dimension of the offline token-hash embedding.
pub const HASH_EMBED_DIM: usize = 256;

#[derive(Debug, Error)]
pub enum RagError {
    #[error("store is empty")]
    EmptyStore,
    #[error("k must be at least 1")]
    InvalidK,
    #[error("need at least one retrieval score")]
    NoScores,
    #[error("{pool} pool has {have} documents, need {need}")]
    PoolTooSmall {
        pool: &'static str,
        need: usize,
        have: usize,
    },
    #[error("duplicate document id `{0}`")]
    DuplicateDoc(String),
    #[error("document dimension {got} does not match store dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("embedding provider error: {0}")]
    Provider(String),
    #[error("store record {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("document `{0}` has no origin path to persist")]
    MissingOrigin(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// One embedded document.
#[derive(Debug, Clone)]
pub struct RetrievalDoc {
    pub doc_id: String,
    pub source: String,
    pub label: GroundTruth,
    pub embedding: Vec<f64>,
    pub origin: Option<PathBuf>,
}

/// A scored nearest-neighbor result; `distance` lies in `[0, 2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalHit {
    pub doc_id: String,
    pub distance: f64,
}

/// Where embeddings come from.
#[derive(Debug, Clone)]
pub enum EmbedMode {
    /// Deterministic token-hash embedding, `HASH_EMBED_DIM` wide.
    Hash,
    /// OpenAI-compatible `/v1/embeddings` endpoint.
    Provider {
        base_url: String,
        model: String,
        api_key: Option<String>,
        max_retries: u32,
        timeout: Duration,
    },
}

#[derive(Debug, Clone)]
pub struct EmbedConfig {
    pub mode: EmbedMode,
}

impl EmbedConfig {
    pub fn hash() -> Self {
        Self { mode: EmbedMode::Hash }
    }

    pub fn provider(base_url: &str, model: &str, api_key: Option<String>) -> Self {
        Self {
            mode: EmbedMode::Provider {
                base_url: base_url.trim_end_matches('/').to_string(),
                model: model.to_string(),
                api_key,
                max_retries: 3,
                timeout: Duration::from_secs(60),
            },
        }
    }
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf29ce484222325u64;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

fn normalize(mut v: Vec<f64>) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        // Degenerate input (empty text or full cancellation) maps to the
        // first basis vector by rule.
        v[0] = 1.0;
        return v;
    }
    for x in &mut v {
        *x /= norm;
    }
    v
}

fn hash_embed(text: &str) -> Vec<f64> {
    let mut v = vec![0.0f64; HASH_EMBED_DIM];
    for token in text
        .split(|c: char| !(c.is_alphanumeric() || c == '_'))
        .filter(|t| !t.is_empty())
    {
        let h = fnv1a64(token.to_ascii_lowercase().as_bytes());
        let idx = (h % HASH_EMBED_DIM as u64) as usize;
        let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
        v[idx] += sign;
    }
    normalize(v)
}

fn provider_embed(
    text: &str,
    base_url: &str,
    model: &str,
    api_key: Option<&str>,
    max_retries: u32,
    timeout: Duration,
) -> Result<Vec<f64>, RagError> {
    let client = reqwest::blocking::Client::builder()
        .timeout(timeout)
        .build()
        .map_err(|e| RagError::Provider(e.to_string()))?;
    let body = serde_json::json!({ "model": model, "input": [text] });
    let url = format!("{base_url}/v1/embeddings");

    let mut last_err = String::new();
    for _attempt in 0..=max_retries {
        let mut request = client.post(&url).json(&body);
        if let Some(key) = api_key {
            request = request.bearer_auth(key);
        }
        match request.send() {
            Ok(response) if response.status().is_success() => {
                let parsed: serde_json::Value = response
                    .json()
                    .map_err(|e| RagError::Provider(e.to_string()))?;
                let raw = parsed["data"][0]["embedding"]
                    .as_array()
                    .ok_or_else(|| RagError::Provider("response lacks data[0].embedding".into()))?
                    .iter()
                    .map(|x| x.as_f64().unwrap_or(0.0))
                    .collect::<Vec<f64>>();
                if raw.is_empty() {
                    return Err(RagError::Provider("empty embedding".into()));
                }
                return Ok(normalize(raw));
            }
            Ok(response) => {
                let status = response.status();
                last_err = format!("HTTP {status}");
                if !(status.is_server_error() || status.as_u16() == 429) {
                    break;
                }
            }
            Err(e) => last_err = e.to_string(),
        }
    }
    Err(RagError::Provider(last_err))
}

/// Embed `text` as a unit vector.
pub fn embed(text: &str, cfg: &EmbedConfig) -> Result<Vec<f64>, RagError> {
    match &cfg.mode {
        EmbedMode::Hash => Ok(hash_embed(text)),
        EmbedMode::Provider { base_url, model, api_key, max_retries, timeout } => provider_embed(
            text,
            base_url,
            model,
            api_key.as_deref(),
            *max_retries,
            *timeout,
        ),
    }
}

/// A document offered to [`compose_corpus`].
#[derive(Debug, Clone)]
pub struct PoolDoc {
    pub doc_id: String,
    pub source: String,
    pub origin: Option<PathBuf>,
}

/// A document selected for a composed corpus, labeled by its pool.
#[derive(Debug, Clone)]
pub struct ComposedDoc {
    pub doc_id: String,
    pub source: String,
    pub label: GroundTruth,
    pub origin: Option<PathBuf>,
}

/// Pick `n` documents at the requested good/buggy ratio.
///
/// The clean count is `floor(n * clean_fraction)` and the buggy count is
/// the remainder; selection is deterministic, taking documents in
/// `doc_id` order from each pool.
pub fn compose_corpus(
    clean_pool: &[PoolDoc],
    buggy_pool: &[PoolDoc],
    composition: CorpusComposition,
    n: usize,
) -> Result<Vec<ComposedDoc>, RagError> {
    let clean_count = (n as f64 * composition.clean_fraction()).floor() as usize;
    let buggy_count = n - clean_count;
    if clean_pool.len() < clean_count {
        return Err(RagError::PoolTooSmall {
            pool: "clean",
            need: clean_count,
            have: clean_pool.len(),
        });
    }
    if buggy_pool.len() < buggy_count {
        return Err(RagError::PoolTooSmall {
            pool: "buggy",
            need: buggy_count,
            have: buggy_pool.len(),
        });
    }

    let pick = |pool: &[PoolDoc], count: usize, label: GroundTruth| {
        let mut sorted: Vec<&PoolDoc> = pool.iter().collect();
        sorted.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
        sorted
            .into_iter()
            .take(count)
            .map(|d| ComposedDoc {
                doc_id: d.doc_id.clone(),
                source: d.source.clone(),
                label,
                origin: d.origin.clone(),
            })
            .collect::<Vec<_>>()
    };

    let mut docs = pick(clean_pool, clean_count, GroundTruth::Correct);
    docs.extend(pick(buggy_pool, buggy_count, GroundTruth::Defective));
    Ok(docs)
}

/// Build-then-freeze vector store with exact nearest-neighbor queries.
#[derive(Debug, Default)]
pub struct VectorStore {
    docs: Vec<RetrievalDoc>,
}

impl VectorStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn docs(&self) -> &[RetrievalDoc] {
        &self.docs
    }

    pub fn get(&self, doc_id: &str) -> Option<&RetrievalDoc> {
        self.docs.iter().find(|d| d.doc_id == doc_id)
    }

    pub fn dim(&self) -> Option<usize> {
        self.docs.first().map(|d| d.embedding.len())
    }

    fn push(&mut self, doc: RetrievalDoc) -> Result<(), RagError> {
        if self.get(&doc.doc_id).is_some() {
            return Err(RagError::DuplicateDoc(doc.doc_id));
        }
        if let Some(dim) = self.dim() {
            if doc.embedding.len() != dim {
                return Err(RagError::DimensionMismatch {
                    expected: dim,
                    got: doc.embedding.len(),
                });
            }
        }
        self.docs.push(doc);
        Ok(())
    }

    pub fn add(
        &mut self,
        doc_id: &str,
        source: &str,
        label: GroundTruth,
        cfg: &EmbedConfig,
    ) -> Result<(), RagError> {
        let embedding = embed(source, cfg)?;
        self.push(RetrievalDoc {
            doc_id: doc_id.to_string(),
            source: source.to_string(),
            label,
            embedding,
            origin: None,
        })
    }

    pub fn add_composed(&mut self, doc: ComposedDoc, cfg: &EmbedConfig) -> Result<(), RagError> {
        let embedding = embed(&doc.source, cfg)?;
        self.push(RetrievalDoc {
            doc_id: doc.doc_id,
            source: doc.source,
            label: doc.label,
            embedding,
            origin: doc.origin,
        })
    }

    /// Exact k-nearest-neighbors of an already-embedded query vector.
    /// Ties in distance break toward the smaller `doc_id`.
    pub fn query_vector(&self, query: &[f64], k: usize) -> Result<Vec<RetrievalHit>, RagError> {
        if self.is_empty() {
            return Err(RagError::EmptyStore);
        }
        if k == 0 {
            return Err(RagError::InvalidK);
        }
        let mut hits: Vec<RetrievalHit> = self
            .docs
            .iter()
            .map(|d| {
                let dot: f64 = d.embedding.iter().zip(query).map(|(a, b)| a * b).sum();
                RetrievalHit {
                    doc_id: d.doc_id.clone(),
                    distance: (1.0 - dot).clamp(0.0, 2.0),
                }
            })
            .collect();
        hits.sort_by(|a, b| {
            a.distance
                .partial_cmp(&b.distance)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| a.doc_id.cmp(&b.doc_id))
        });
        hits.truncate(k);
        Ok(hits)
    }

    /// Embed `query_text` and return its k nearest documents.
    pub fn query(
        &self,
        query_text: &str,
        k: usize,
        cfg: &EmbedConfig,
    ) -> Result<Vec<RetrievalHit>, RagError> {
        let vector = embed(query_text, cfg)?;
        self.query_vector(&vector, k)
    }

    /// Mean cosine distance over all unordered document pairs.
    pub fn mean_pairwise_distance(&self) -> Option<f64> {
        if self.docs.len() < 2 {
            return None;
        }
        let mut sum = 0.0;
        let mut pairs = 0usize;
        for i in 0..self.docs.len() {
            for j in i + 1..self.docs.len() {
                let dot: f64 = self.docs[i]
                    .embedding
                    .iter()
                    .zip(&self.docs[j].embedding)
                    .map(|(a, b)| a * b)
                    .sum();
                sum += (1.0 - dot).clamp(0.0, 2.0);
                pairs += 1;
            }
        }
        Some(sum / pairs as f64)
    }

    /// Persist one record per document:
    /// `doc_id<TAB>label<TAB>dim<TAB>v0,v1,...<TAB>origin_path`.
    pub fn save(&self, path: &Path) -> Result<(), RagError> {
        let mut out = String::new();
        for doc in &self.docs {
            let origin = doc
                .origin
                .as_ref()
                .ok_or_else(|| RagError::MissingOrigin(doc.doc_id.clone()))?;
            let values: Vec<String> = doc.embedding.iter().map(|v| format!("{v}")).collect();
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\n",
                doc.doc_id,
                doc.label.as_str(),
                doc.embedding.len(),
                values.join(","),
                origin.display()
            ));
        }
        std::fs::write(path, out).map_err(|e| RagError::Io {
            path: path.to_path_buf(),
            source: e,
        })
    }

    pub fn load(path: &Path) -> Result<Self, RagError> {
        let text = std::fs::read_to_string(path).map_err(|e| RagError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let mut store = Self::new();
        let mut seen = HashSet::new();
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 5 {
                return Err(RagError::Malformed {
                    line: line_no,
                    reason: format!("expected 5 fields, got {}", fields.len()),
                });
            }
            let doc_id = fields[0].to_string();
            if !seen.insert(doc_id.clone()) {
                return Err(RagError::DuplicateDoc(doc_id));
            }
            let label = GroundTruth::parse(fields[1]).ok_or_else(|| RagError::Malformed {
                line: line_no,
                reason: format!("unknown label `{}`", fields[1]),
            })?;
            let dim: usize = fields[2].parse().map_err(|_| RagError::Malformed {
                line: line_no,
                reason: "bad dimension".into(),
            })?;
            let embedding: Vec<f64> = fields[3]
                .split(',')
                .map(|v| v.parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|_| RagError::Malformed {
                    line: line_no,
                    reason: "bad embedding value".into(),
                })?;
            if embedding.len() != dim {
                return Err(RagError::Malformed {
                    line: line_no,
                    reason: format!("dimension {dim} but {} values", embedding.len()),
                });
            }
            let origin = PathBuf::from(fields[4]);
            let source = std::fs::read_to_string(&origin).map_err(|e| RagError::Io {
                path: origin.clone(),
                source: e,
            })?;
            store.push(RetrievalDoc {
                doc_id,
                source,
                label,
                embedding,
                origin: Some(origin),
            })?;
        }
        Ok(store)
    }
}

/// Arithmetic mean of per-query first-hit distances.
pub fn mean_retrieval_score(first_hit_distances: &[f64]) -> Result<f64, RagError> {
    if first_hit_distances.is_empty() {
        return Err(RagError::NoScores);
    }
    Ok(first_hit_distances.iter().sum::<f64>() / first_hit_distances.len() as f64)
}

/// Render a retrieval score the way reports print them.
pub fn format_score(score: f64) -> String {
    format!("{score:.6}")
}
