//! Chunked, embedded, metadata-tagged document records with filtered
//! exhaustive cosine search.
//!
//! Readers take a cheap clone of an immutable snapshot; ingestion builds a
//! new snapshot under a writer lock and swaps it in.

mod chunk;
mod embed;
mod filter;
mod persist;

use std::collections::BTreeMap;
use std::io::BufRead;
use std::path::Path;
use std::sync::Arc;

use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::disease::DiseaseId;

pub use chunk::ChunkPolicy;
pub use embed::{Embedder, EmbeddingVector, HashingEmbedder};
pub use filter::{build_filter, Clause, Condition, FilterContext, FilterExpression, FilterKey};
pub use persist::{Frame, Header};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("embedding has dimension {got}, store expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("text is empty")]
    EmptyText,
    #[error("page {page} of {source_file:?} is invalid: {reason}")]
    InvalidPage {
        source_file: String,
        page: u32,
        reason: String,
    },
    #[error("dimension must be at least 1")]
    InvalidDimension,
    #[error("invalid chunk policy: {0}")]
    InvalidPolicy(String),
    #[error("k must be at least 1")]
    InvalidK,
    #[error("embedding contains non-finite values")]
    NonFinite,
    #[error("embedder unavailable: {0}")]
    BackendUnavailable(String),
    #[error("store file header mismatch: {0}")]
    HeaderMismatch(String),
    #[error("store file is corrupt: {0}")]
    Corrupt(String),
    #[error("corpus line {line}: {detail}")]
    Corpus { line: usize, detail: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl PartialEq for StoreError {
    fn eq(&self, other: &Self) -> bool {
        self.to_string() == other.to_string()
    }
}

impl StoreError {
    fn encode(e: serde_json::Error) -> Self {
        StoreError::Corrupt(format!("cannot encode: {e}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Disease,
    Vaccine,
}

impl Domain {
    pub fn as_str(self) -> &'static str {
        match self {
            Domain::Disease => "disease",
            Domain::Vaccine => "vaccine",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentMetadata {
    pub domain: Domain,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disease_code: Option<DiseaseId>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trade_names: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
    /// Keys outside the schema. Kept, but flagged at ingest.
    #[serde(flatten)]
    pub extra: BTreeMap<String, serde_json::Value>,
}

impl DocumentMetadata {
    pub fn new(domain: Domain) -> Self {
        Self {
            domain,
            disease_code: None,
            trade_names: Vec::new(),
            group: None,
            extra: BTreeMap::new(),
        }
    }
}

/// One page of pre-extracted corpus text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageInput {
    pub source_file: String,
    pub page: u32,
    pub text: String,
    pub metadata: DocumentMetadata,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentRecord {
    pub doc_id: String,
    pub source_file: String,
    pub page: u32,
    pub chunk_index: u32,
    pub text: String,
    pub metadata: DocumentMetadata,
}

pub fn doc_id(source_file: &str, page: u32) -> String {
    format!("{source_file}#p{page}")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RetrievalHit {
    pub record: DocumentRecord,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    record: DocumentRecord,
    vector: EmbeddingVector,
}

type Key = (String, u32);

/// Immutable view of the store contents.
#[derive(Debug, Default)]
pub struct Snapshot {
    entries: BTreeMap<Key, Entry>,
}

impl Snapshot {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn records(&self) -> impl Iterator<Item = &DocumentRecord> {
        self.entries.values().map(|e| &e.record)
    }

    pub fn vector(&self, doc_id: &str, chunk_index: u32) -> Option<&EmbeddingVector> {
        self.entries
            .get(&(doc_id.to_string(), chunk_index))
            .map(|e| &e.vector)
    }

    /// Exhaustive scan: filter, then sort by similarity descending with
    /// ties broken by doc_id then chunk_index ascending.
    pub fn search(
        &self,
        query: &EmbeddingVector,
        filter: &FilterExpression,
        k: usize,
    ) -> Vec<RetrievalHit> {
        let mut scored: Vec<(&Entry, f64)> = self
            .entries
            .values()
            .filter(|e| filter.matches(&e.record.metadata))
            .map(|e| (e, query.cosine(&e.vector)))
            .collect();
        scored.sort_by(|a, b| {
            b.1.total_cmp(&a.1)
                .then_with(|| a.0.record.doc_id.cmp(&b.0.record.doc_id))
                .then_with(|| a.0.record.chunk_index.cmp(&b.0.record.chunk_index))
        });
        scored
            .into_iter()
            .take(k)
            .map(|(e, s)| RetrievalHit {
                record: e.record.clone(),
                similarity: s,
            })
            .collect()
    }
}

pub struct KnowledgeStore {
    embedder: Arc<dyn Embedder>,
    policy: ChunkPolicy,
    snapshot: RwLock<Arc<Snapshot>>,
    writer: Mutex<Option<persist::StoreFile>>,
}

impl KnowledgeStore {
    pub fn in_memory(embedder: Arc<dyn Embedder>, policy: ChunkPolicy) -> Result<Self, StoreError> {
        if embedder.dimension() == 0 {
            return Err(StoreError::InvalidDimension);
        }
        policy.validate().map_err(StoreError::InvalidPolicy)?;
        Ok(Self {
            embedder,
            policy,
            snapshot: RwLock::new(Arc::new(Snapshot::default())),
            writer: Mutex::new(None),
        })
    }

    /// Opens (or creates) a store file and replays it.
    pub fn open(path: &Path, embedder: Arc<dyn Embedder>, policy: ChunkPolicy) -> Result<Self, StoreError> {
        let store = Self::in_memory(embedder, policy)?;
        let header = store.header();
        let (file, frames) = persist::StoreFile::open(path, &header)?;
        let mut snap = Snapshot::default();
        for frame in frames {
            apply(&mut snap, frame, header.dimension)?;
        }
        *store.snapshot.write() = Arc::new(snap);
        *store.writer.lock() = Some(file);
        Ok(store)
    }

    pub fn header(&self) -> Header {
        Header {
            format: persist::FORMAT.to_string(),
            version: persist::VERSION,
            dimension: self.embedder.dimension(),
            embedder: self.embedder.id().to_string(),
        }
    }

    pub fn dimension(&self) -> usize {
        self.embedder.dimension()
    }

    pub fn embedder(&self) -> &Arc<dyn Embedder> {
        &self.embedder
    }

    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.snapshot.read().clone()
    }

    pub fn len(&self) -> usize {
        self.snapshot().len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshot().is_empty()
    }

    pub fn embed(&self, text: &str) -> Result<EmbeddingVector, StoreError> {
        let v = self.embedder.embed(text)?;
        if v.dimension() != self.dimension() {
            return Err(StoreError::DimensionMismatch {
                expected: self.dimension(),
                got: v.dimension(),
            });
        }
        Ok(v)
    }

    /// Chunks, embeds and stores pages. Returns the number of chunk records
    /// produced. Re-ingesting a page replaces its chunks; unchanged chunks
    /// are not rewritten to the store file.
    pub fn ingest(&self, pages: &[PageInput]) -> Result<usize, StoreError> {
        let mut prepared = Vec::new();
        for p in pages {
            if p.source_file.trim().is_empty() || p.page == 0 {
                return Err(StoreError::InvalidPage {
                    source_file: p.source_file.clone(),
                    page: p.page,
                    reason: "source_file must be non-empty and page at least 1".into(),
                });
            }
            if p.text.trim().is_empty() {
                return Err(StoreError::InvalidPage {
                    source_file: p.source_file.clone(),
                    page: p.page,
                    reason: "text is empty".into(),
                });
            }
            if !p.metadata.extra.is_empty() {
                let keys: Vec<_> = p.metadata.extra.keys().cloned().collect();
                log::warn!(
                    "{} p.{}: untyped metadata keys {keys:?}",
                    p.source_file,
                    p.page
                );
            }
            let id = doc_id(&p.source_file, p.page);
            let chunks = self.policy.split(&p.text);
            let mut entries = Vec::with_capacity(chunks.len());
            for (i, text) in chunks.into_iter().enumerate() {
                let vector = self.embed(&text)?;
                entries.push(Entry {
                    record: DocumentRecord {
                        doc_id: id.clone(),
                        source_file: p.source_file.clone(),
                        page: p.page,
                        chunk_index: i as u32,
                        text,
                        metadata: p.metadata.clone(),
                    },
                    vector,
                });
            }
            prepared.push((id, entries));
        }

        let mut writer = self.writer.lock();
        let current = self.snapshot();
        let mut entries = current.entries.clone();
        let mut frames = Vec::new();
        let mut produced = 0;
        for (id, new) in prepared {
            produced += new.len();
            let stale: Vec<Key> = entries
                .range((id.clone(), 0)..=(id.clone(), u32::MAX))
                .map(|(k, _)| k.clone())
                .filter(|(_, idx)| *idx as usize >= new.len())
                .collect();
            for key in stale {
                entries.remove(&key);
                frames.push(Frame::Delete {
                    doc_id: key.0,
                    chunk_index: key.1,
                });
            }
            for e in new {
                let key = (e.record.doc_id.clone(), e.record.chunk_index);
                if entries.get(&key) == Some(&e) {
                    continue;
                }
                frames.push(Frame::Put {
                    record: e.record.clone(),
                    vector: e.vector.clone(),
                });
                entries.insert(key, e);
            }
        }
        if let Some(file) = writer.as_mut() {
            file.append(&frames)?;
        }
        *self.snapshot.write() = Arc::new(Snapshot { entries });
        Ok(produced)
    }

    pub fn search(
        &self,
        query: &EmbeddingVector,
        filter: &FilterExpression,
        k: usize,
    ) -> Result<Vec<RetrievalHit>, StoreError> {
        if k == 0 {
            return Err(StoreError::InvalidK);
        }
        if query.dimension() != self.dimension() {
            return Err(StoreError::DimensionMismatch {
                expected: self.dimension(),
                got: query.dimension(),
            });
        }
        Ok(self.snapshot().search(query, filter, k))
    }

    pub fn search_text(
        &self,
        query: &str,
        filter: &FilterExpression,
        k: usize,
    ) -> Result<Vec<RetrievalHit>, StoreError> {
        let v = self.embed(query)?;
        self.search(&v, filter, k)
    }

    /// Softmax over the similarities of every record passing `filter`, as a
    /// diagnostic view of how peaked retrieval is. Same order as `search`.
    pub fn retrieval_distribution(
        &self,
        query: &EmbeddingVector,
        filter: &FilterExpression,
    ) -> Result<Vec<(RetrievalHit, f64)>, StoreError> {
        let hits = self.search(query, filter, usize::MAX)?;
        Ok(softmax(hits))
    }
}

fn softmax(hits: Vec<RetrievalHit>) -> Vec<(RetrievalHit, f64)> {
    let max = hits
        .iter()
        .map(|h| h.similarity)
        .fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = hits.iter().map(|h| (h.similarity - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    hits.into_iter()
        .zip(exps)
        .map(|(h, e)| (h, e / total))
        .collect()
}

fn apply(snap: &mut Snapshot, frame: Frame, dimension: usize) -> Result<(), StoreError> {
    match frame {
        Frame::Put { record, vector } => {
            if vector.dimension() != dimension {
                return Err(StoreError::DimensionMismatch {
                    expected: dimension,
                    got: vector.dimension(),
                });
            }
            let key = (record.doc_id.clone(), record.chunk_index);
            snap.entries.insert(key, Entry { record, vector });
        }
        Frame::Delete { doc_id, chunk_index } => {
            snap.entries.remove(&(doc_id, chunk_index));
        }
    }
    Ok(())
}

/// Reads a JSONL corpus, one page object per line. Blank lines are skipped.
pub fn load_corpus(path: &Path) -> Result<Vec<PageInput>, StoreError> {
    let reader = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut pages = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let page: PageInput = serde_json::from_str(&line).map_err(|e| StoreError::Corpus {
            line: i + 1,
            detail: e.to_string(),
        })?;
        pages.push(page);
    }
    Ok(pages)
}
