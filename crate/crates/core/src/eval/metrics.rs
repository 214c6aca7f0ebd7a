use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricsError {
    #[error("confusion matrix has no counts")]
    EmptyMatrix,
    #[error("confusion matrix must be square with one row per label")]
    Shape,
    #[error("duplicate label {0:?}")]
    DuplicateLabel(String),
    #[error("unknown label {0:?}")]
    UnknownLabel(String),
}

/// A ratio that may have a zero denominator. Serializes as a number or null.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "Option<f64>", into = "Option<f64>")]
pub enum Score {
    Defined(f64),
    Undefined,
}

impl Score {
    fn ratio(num: f64, den: f64) -> Self {
        if den == 0.0 {
            Score::Undefined
        } else {
            Score::Defined(num / den)
        }
    }

    pub fn value(self) -> Option<f64> {
        match self {
            Score::Defined(v) => Some(v),
            Score::Undefined => None,
        }
    }
}

impl From<Option<f64>> for Score {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Score::Undefined, Score::Defined)
    }
}

impl From<Score> for Option<f64> {
    fn from(s: Score) -> Self {
        s.value()
    }
}

/// Rows are ground truth, columns are predictions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    labels: Vec<String>,
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(labels: Vec<String>, counts: Vec<Vec<u64>>) -> Result<Self, MetricsError> {
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(MetricsError::DuplicateLabel(l.clone()));
            }
        }
        if counts.len() != labels.len() || counts.iter().any(|r| r.len() != labels.len()) {
            return Err(MetricsError::Shape);
        }
        Ok(Self { labels, counts })
    }

    /// Tallies (truth, prediction) pairs over a fixed label order.
    pub fn from_pairs<'a>(
        labels: Vec<String>,
        pairs: impl IntoIterator<Item = (&'a str, &'a str)>,
    ) -> Result<Self, MetricsError> {
        let n = labels.len();
        let mut m = Self::new(labels, vec![vec![0; n]; n])?;
        for (truth, pred) in pairs {
            let r = m.index(truth)?;
            let c = m.index(pred)?;
            m.counts[r][c] += 1;
        }
        Ok(m)
    }

    fn index(&self, label: &str) -> Result<usize, MetricsError> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| MetricsError::UnknownLabel(label.to_string()))
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.labels.len()).map(|i| self.counts[i][i]).sum()
    }

    pub fn row_sum(&self, i: usize) -> u64 {
        self.counts[i].iter().sum()
    }

    pub fn column_sum(&self, j: usize) -> u64 {
        self.counts.iter().map(|r| r[j]).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: String,
    pub precision: Score,
    pub recall: Score,
    pub f1: Score,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub per_class: Vec<ClassMetrics>,
    pub accuracy: f64,
    pub correct: u64,
    pub total: u64,
}

pub fn class_metrics(m: &ConfusionMatrix) -> Result<MetricsReport, MetricsError> {
    let total = m.total();
    if total == 0 {
        return Err(MetricsError::EmptyMatrix);
    }
    let per_class = m
        .labels
        .iter()
        .enumerate()
        .map(|(i, label)| {
            let tp = m.counts[i][i] as f64;
            let precision = Score::ratio(tp, m.column_sum(i) as f64);
            let recall = Score::ratio(tp, m.row_sum(i) as f64);
            let f1 = match (precision, recall) {
                (Score::Defined(p), Score::Defined(r)) => Score::ratio(2.0 * p * r, p + r),
                _ => Score::Undefined,
            };
            ClassMetrics {
                label: label.clone(),
                precision,
                recall,
                f1,
                support: m.row_sum(i),
            }
        })
        .collect();
    let correct = m.trace();
    Ok(MetricsReport {
        per_class,
        accuracy: correct as f64 / total as f64,
        correct,
        total,
    })
}
