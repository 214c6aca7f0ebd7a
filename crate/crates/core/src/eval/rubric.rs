use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::Split;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RubricError {
    #[error("no rubric scores")]
    EmptyScores,
    #[error("example {example_id:?} is missing dimension {dimension:?}")]
    MissingDimension { example_id: String, dimension: Dimension },
    #[error("example {example_id:?} has score {value} outside [0, 5]")]
    OutOfRange { example_id: String, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dimension {
    Accuracy,
    Relevance,
    Correctness,
    Coherence,
    Expansiveness,
}

impl Dimension {
    pub const ALL: [Dimension; 5] = [
        Dimension::Accuracy,
        Dimension::Relevance,
        Dimension::Correctness,
        Dimension::Coherence,
        Dimension::Expansiveness,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum System {
    Baseline,
    Ours,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RubricScore {
    pub example_id: String,
    pub system: System,
    pub split: Split,
    /// Question set, e.g. "vaccine" or "disease".
    pub dataset: String,
    pub dimensions: BTreeMap<Dimension, f64>,
    /// Judged overall score. When absent the mean of the dimensions is used.
    #[serde(default, rename = "final", skip_serializing_if = "Option::is_none")]
    pub final_score: Option<f64>,
}

fn in_range(v: f64) -> bool {
    (0.0..=5.0).contains(&v)
}

impl RubricScore {
    pub fn validate(&self) -> Result<(), RubricError> {
        for d in Dimension::ALL {
            match self.dimensions.get(&d) {
                None => {
                    return Err(RubricError::MissingDimension {
                        example_id: self.example_id.clone(),
                        dimension: d,
                    })
                }
                Some(v) if !in_range(*v) => {
                    return Err(RubricError::OutOfRange {
                        example_id: self.example_id.clone(),
                        value: *v,
                    })
                }
                _ => {}
            }
        }
        if let Some(f) = self.final_score.filter(|f| !in_range(*f)) {
            return Err(RubricError::OutOfRange {
                example_id: self.example_id.clone(),
                value: f,
            });
        }
        Ok(())
    }

    pub fn dimension_mean(&self) -> f64 {
        Dimension::ALL
            .iter()
            .map(|d| self.dimensions.get(d).copied().unwrap_or(0.0))
            .sum::<f64>()
            / Dimension::ALL.len() as f64
    }

    pub fn final_value(&self) -> f64 {
        self.final_score.unwrap_or_else(|| self.dimension_mean())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RubricRow {
    pub split: Split,
    pub dataset: String,
    pub system: System,
    pub n: usize,
    pub means: BTreeMap<Dimension, f64>,
    #[serde(rename = "final")]
    pub final_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RubricAverage {
    pub system: System,
    pub rows: usize,
    pub means: BTreeMap<Dimension, f64>,
    #[serde(rename = "final")]
    pub final_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RubricReport {
    pub rows: Vec<RubricRow>,
    /// Per system, the unweighted mean of its row means.
    pub average: Vec<RubricAverage>,
}

pub fn rubric_aggregate(scores: &[RubricScore]) -> Result<RubricReport, RubricError> {
    if scores.is_empty() {
        return Err(RubricError::EmptyScores);
    }
    let mut groups: BTreeMap<(Split, String, System), Vec<&RubricScore>> = BTreeMap::new();
    for s in scores {
        s.validate()?;
        groups
            .entry((s.split, s.dataset.clone(), s.system))
            .or_default()
            .push(s);
    }
    let mut rows = Vec::new();
    for ((split, dataset, system), members) in groups {
        let n = members.len() as f64;
        let means = Dimension::ALL
            .iter()
            .map(|d| (*d, members.iter().map(|s| s.dimensions[d]).sum::<f64>() / n))
            .collect();
        let final_mean = members.iter().map(|s| s.final_value()).sum::<f64>() / n;
        rows.push(RubricRow {
            split,
            dataset,
            system,
            n: members.len(),
            means,
            final_mean,
        });
    }
    let mut average = Vec::new();
    for system in [System::Baseline, System::Ours] {
        let mine: Vec<&RubricRow> = rows.iter().filter(|r| r.system == system).collect();
        if mine.is_empty() {
            continue;
        }
        let n = mine.len() as f64;
        let means = Dimension::ALL
            .iter()
            .map(|d| (*d, mine.iter().map(|r| r.means[d]).sum::<f64>() / n))
            .collect();
        average.push(RubricAverage {
            system,
            rows: mine.len(),
            means,
            final_mean: mine.iter().map(|r| r.final_mean).sum::<f64>() / n,
        });
    }
    Ok(RubricReport { rows, average })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn score(id: &str, system: System, v: f64, final_score: Option<f64>) -> RubricScore {
        RubricScore {
            example_id: id.into(),
            system,
            split: Split::Test,
            dataset: "vaccine".into(),
            dimensions: Dimension::ALL.iter().map(|d| (*d, v)).collect(),
            final_score,
        }
    }

    #[test]
    fn all_fives() {
        let r = rubric_aggregate(&[score("a", System::Ours, 5.0, None), score("b", System::Ours, 5.0, None)]).unwrap();
        assert!(r.rows[0].means.values().all(|m| *m == 5.0));
        assert_eq!(r.average[0].final_mean, 5.0);
    }

    #[test]
    fn final_defaults_to_mean() {
        let mut s = score("a", System::Ours, 4.0, None);
        s.dimensions.insert(Dimension::Coherence, 5.0);
        assert!((s.final_value() - 4.2).abs() < 1e-12);
        assert_eq!(score("b", System::Ours, 4.0, Some(3.0)).final_value(), 3.0);
    }

    #[test]
    fn validation() {
        let mut s = score("a", System::Ours, 4.0, None);
        s.dimensions.remove(&Dimension::Accuracy);
        assert!(matches!(rubric_aggregate(&[s]), Err(RubricError::MissingDimension { .. })));
        assert!(matches!(rubric_aggregate(&[score("a", System::Ours, 6.0, None)]), Err(RubricError::OutOfRange { .. })));
        assert_eq!(rubric_aggregate(&[]), Err(RubricError::EmptyScores));
    }
}
