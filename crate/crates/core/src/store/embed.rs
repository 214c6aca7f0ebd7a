use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::StoreError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    values: Vec<f64>,
    norm: f64,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Result<Self, StoreError> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(StoreError::NonFinite);
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        Ok(Self { values, norm })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn dimension(&self) -> usize {
        self.values.len()
    }

    /// Cosine similarity, 0 when either vector is zero.
    pub fn cosine(&self, other: &EmbeddingVector) -> f64 {
        if self.norm == 0.0 || other.norm == 0.0 {
            return 0.0;
        }
        let dot: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum();
        (dot / (self.norm * other.norm)).clamp(-1.0, 1.0)
    }
}

pub trait Embedder: Send + Sync {
    fn id(&self) -> &str;
    fn dimension(&self) -> usize;
    fn embed(&self, text: &str) -> Result<EmbeddingVector, StoreError>;
}

/// Feature hashing of lowercased unigrams and bigrams with a sign bit,
/// L2-normalized. Deterministic across platforms.
pub struct HashingEmbedder {
    dimension: usize,
    id: String,
}

const BIGRAM_WEIGHT: f64 = 0.5;

impl HashingEmbedder {
    pub fn new(dimension: usize) -> Result<Self, StoreError> {
        if dimension == 0 {
            return Err(StoreError::InvalidDimension);
        }
        Ok(Self {
            dimension,
            id: "hash-ngram-v1".to_string(),
        })
    }

    fn add(&self, acc: &mut [f64], feature: &str, weight: f64) {
        let digest = Sha256::digest(feature.as_bytes());
        let mut bytes = [0u8; 8];
        bytes.copy_from_slice(&digest[..8]);
        let h = u64::from_le_bytes(bytes);
        let index = (h % self.dimension as u64) as usize;
        let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
        acc[index] += sign * weight;
    }
}

fn tokens(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|t| {
            let trimmed = t.trim_matches(|c: char| !c.is_alphanumeric());
            if trimmed.is_empty() { t } else { trimmed }.to_lowercase()
        })
        .collect()
}

impl Embedder for HashingEmbedder {
    fn id(&self) -> &str {
        &self.id
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, StoreError> {
        let toks = tokens(text);
        if toks.is_empty() {
            return Err(StoreError::EmptyText);
        }
        let mut acc = vec![0.0; self.dimension];
        for t in &toks {
            self.add(&mut acc, &format!("u:{t}"), 1.0);
        }
        for w in toks.windows(2) {
            self.add(&mut acc, &format!("b:{} {}", w[0], w[1]), BIGRAM_WEIGHT);
        }
        let norm = acc.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for v in &mut acc {
                *v /= norm;
            }
        }
        EmbeddingVector::new(acc)
    }
}
