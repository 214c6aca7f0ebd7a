use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::disease::DiseaseId;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TopKError {
    #[error("no diagnosis records")]
    EmptyRecords,
    #[error("k must be at least 1")]
    InvalidK,
    #[error("case {0:?} has an empty ranking")]
    EmptyRanking(String),
    #[error("case {0:?} has a negative or non-finite execution time")]
    InvalidTime(String),
}

/// A disease, or the out-of-distribution outcome.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum DiagnosisLabel {
    Disease(DiseaseId),
    Ood,
}

impl TryFrom<String> for DiagnosisLabel {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        if s.eq_ignore_ascii_case("ood") {
            return Ok(DiagnosisLabel::Ood);
        }
        DiseaseId::new(&s).map(DiagnosisLabel::Disease).map_err(|e| e.to_string())
    }
}

impl From<DiagnosisLabel> for String {
    fn from(l: DiagnosisLabel) -> Self {
        l.to_string()
    }
}

impl fmt::Display for DiagnosisLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DiagnosisLabel::Disease(d) => write!(f, "{d}"),
            DiagnosisLabel::Ood => f.write_str("OOD"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosisRecord {
    pub case_id: String,
    pub actual: DiagnosisLabel,
    pub ranking: Vec<DiagnosisLabel>,
    pub exec_time_s: f64,
    #[serde(flatten)]
    pub extra: serde_json::Map<String, serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelTally {
    pub label: DiagnosisLabel,
    pub correct: usize,
    pub total: usize,
    pub mean_exec_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopKReport {
    pub k: usize,
    pub correct: usize,
    pub total: usize,
    pub accuracy: f64,
    /// In order of first appearance in the records.
    pub per_label: Vec<LabelTally>,
    /// Mean of the per-label mean execution times.
    pub mean_exec_time_s: f64,
    /// Mean over all records.
    pub record_mean_exec_time_s: f64,
}

pub fn top_k_accuracy(records: &[DiagnosisRecord], k: usize) -> Result<TopKReport, TopKError> {
    if records.is_empty() {
        return Err(TopKError::EmptyRecords);
    }
    if k == 0 {
        return Err(TopKError::InvalidK);
    }
    let mut tallies: Vec<(LabelTally, f64)> = Vec::new();
    let mut correct = 0;
    let mut time_total = 0.0;
    for r in records {
        if r.ranking.is_empty() {
            return Err(TopKError::EmptyRanking(r.case_id.clone()));
        }
        if !r.exec_time_s.is_finite() || r.exec_time_s < 0.0 {
            return Err(TopKError::InvalidTime(r.case_id.clone()));
        }
        let hit = r.ranking.iter().take(k).any(|l| *l == r.actual);
        correct += hit as usize;
        time_total += r.exec_time_s;
        let idx = match tallies.iter().position(|(t, _)| t.label == r.actual) {
            Some(i) => i,
            None => {
                tallies.push((
                    LabelTally {
                        label: r.actual.clone(),
                        correct: 0,
                        total: 0,
                        mean_exec_time_s: 0.0,
                    },
                    0.0,
                ));
                tallies.len() - 1
            }
        };
        let (t, sum) = &mut tallies[idx];
        t.total += 1;
        t.correct += hit as usize;
        *sum += r.exec_time_s;
    }
    let per_label: Vec<LabelTally> = tallies
        .into_iter()
        .map(|(mut t, sum)| {
            t.mean_exec_time_s = sum / t.total as f64;
            t
        })
        .collect();
    let mean_exec_time_s =
        per_label.iter().map(|t| t.mean_exec_time_s).sum::<f64>() / per_label.len() as f64;
    Ok(TopKReport {
        k,
        correct,
        total: records.len(),
        accuracy: correct as f64 / records.len() as f64,
        per_label,
        mean_exec_time_s,
        record_mean_exec_time_s: time_total / records.len() as f64,
    })
}
