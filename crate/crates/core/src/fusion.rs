//! Weighted fusion of per-agent disease confidences.
//!
//! `C(D) = Σ αᵢ·pᵢ(D)` with the weights normalized to sum to one, then tiered
//! and thresholded against τ. An empty prediction set is out-of-distribution
//! and comes with an escalation.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::disease::{DiseaseId, DiseaseRegistry};
use crate::gateway::{extract_json, Gateway, GatewayError, ModelRequest, Purpose, TaskContext};

pub const DEFAULT_TAU: f64 = 0.375;
/// Below this maximum fused score an OOD case goes to additional tests
/// rather than expert review.
pub const EXPERT_REVIEW_FLOOR: f64 = 0.2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FusionError {
    #[error("no agent opinions supplied")]
    NoOpinions,
    #[error("agent weights sum to zero")]
    ZeroTotalWeight,
    #[error("agent {agent:?} has invalid weight {weight}")]
    InvalidWeight { agent: String, weight: f64 },
    #[error("confidence {0} is outside [0, 1]")]
    OutOfRange(f64),
    #[error("tier bands must satisfy 0 < medium < high < very_high <= 1")]
    InvalidBands,
    #[error("outcome is not out-of-distribution")]
    NotOod,
    #[error("agent {agent:?} failed: {source}")]
    AgentFailed { agent: String, source: GatewayError },
    #[error("agent {agent:?} returned malformed confidences: {detail}")]
    MalformedOpinion { agent: String, detail: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentOpinion {
    pub agent_id: String,
    pub weight: f64,
    pub confidences: BTreeMap<DiseaseId, f64>,
}

impl AgentOpinion {
    /// Builds an opinion covering every registered disease. Missing entries
    /// become 0.0; values outside [0, 1] are clamped with a warning.
    pub fn new(
        agent_id: impl Into<String>,
        weight: f64,
        confidences: BTreeMap<DiseaseId, f64>,
        registry: &DiseaseRegistry,
    ) -> Result<Self, FusionError> {
        let agent_id = agent_id.into();
        if !weight.is_finite() || weight < 0.0 {
            return Err(FusionError::InvalidWeight { agent: agent_id, weight });
        }
        let mut out = BTreeMap::new();
        for d in registry.ids() {
            out.insert(d.clone(), 0.0);
        }
        for (d, p) in confidences {
            let clamped = if p.is_nan() { 0.0 } else { p.clamp(0.0, 1.0) };
            if clamped != p {
                log::warn!("agent {agent_id}: confidence {p} for {d} clamped to {clamped}");
            }
            out.insert(d, clamped);
        }
        Ok(Self {
            agent_id,
            weight,
            confidences: out,
        })
    }
}

pub fn fuse(opinions: &[AgentOpinion]) -> Result<BTreeMap<DiseaseId, f64>, FusionError> {
    if opinions.is_empty() {
        return Err(FusionError::NoOpinions);
    }
    for o in opinions {
        if !o.weight.is_finite() || o.weight < 0.0 {
            return Err(FusionError::InvalidWeight {
                agent: o.agent_id.clone(),
                weight: o.weight,
            });
        }
    }
    let total: f64 = opinions.iter().map(|o| o.weight).sum();
    if total <= 0.0 {
        return Err(FusionError::ZeroTotalWeight);
    }
    let mut fused: BTreeMap<DiseaseId, f64> = BTreeMap::new();
    for o in opinions {
        for d in o.confidences.keys() {
            fused.entry(d.clone()).or_insert(0.0);
        }
    }
    for o in opinions {
        let alpha = o.weight / total;
        for (d, c) in fused.iter_mut() {
            *c += alpha * o.confidences.get(d).copied().unwrap_or(0.0);
        }
    }
    Ok(fused)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ConfidenceTier {
    VeryHigh,
    High,
    Medium,
    Low,
}

impl ConfidenceTier {
    pub fn label(self) -> &'static str {
        match self {
            ConfidenceTier::VeryHigh => "very high",
            ConfidenceTier::High => "high",
            ConfidenceTier::Medium => "medium",
            ConfidenceTier::Low => "low",
        }
    }
}

/// Lower edges of the three upper tiers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TierBands {
    pub very_high: f64,
    pub high: f64,
    pub medium: f64,
}

impl Default for TierBands {
    fn default() -> Self {
        Self {
            very_high: 0.75,
            high: 0.624,
            medium: 0.375,
        }
    }
}

impl TierBands {
    pub fn validate(&self) -> Result<(), FusionError> {
        let ok = 0.0 < self.medium
            && self.medium < self.high
            && self.high < self.very_high
            && self.very_high <= 1.0;
        if ok {
            Ok(())
        } else {
            Err(FusionError::InvalidBands)
        }
    }

    pub fn tier(&self, c: f64) -> Result<ConfidenceTier, FusionError> {
        if !(0.0..=1.0).contains(&c) {
            return Err(FusionError::OutOfRange(c));
        }
        Ok(if c >= self.very_high {
            ConfidenceTier::VeryHigh
        } else if c >= self.high {
            ConfidenceTier::High
        } else if c >= self.medium {
            ConfidenceTier::Medium
        } else {
            ConfidenceTier::Low
        })
    }
}

pub fn tier(c: f64) -> Result<ConfidenceTier, FusionError> {
    TierBands::default().tier(c)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusedScores {
    pub scores: BTreeMap<DiseaseId, f64>,
    pub tau: f64,
    pub prediction_set: BTreeSet<DiseaseId>,
    pub tiers: BTreeMap<DiseaseId, ConfidenceTier>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Escalation {
    ExpertReview,
    AdditionalTests,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosisOutcome {
    pub fused: FusedScores,
    pub ranking: Vec<(DiseaseId, f64)>,
    pub ood: bool,
    pub escalation: Option<Escalation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EscalationAction {
    pub kind: Escalation,
    pub instructions: String,
}

fn ranked(fused: &BTreeMap<DiseaseId, f64>) -> Vec<(DiseaseId, f64)> {
    let mut v: Vec<_> = fused.iter().map(|(d, c)| (d.clone(), *c)).collect();
    v.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    v
}

fn escalation_kind(fused: &BTreeMap<DiseaseId, f64>) -> Escalation {
    if fused.values().any(|c| *c >= EXPERT_REVIEW_FLOOR) {
        Escalation::ExpertReview
    } else {
        Escalation::AdditionalTests
    }
}

pub fn predict(fused: &BTreeMap<DiseaseId, f64>, tau: f64) -> DiagnosisOutcome {
    predict_with(fused, tau, &TierBands::default())
}

/// Scores are clamped into [0, 1] only for tiering, to absorb rounding from
/// the weighted sum.
pub fn predict_with(fused: &BTreeMap<DiseaseId, f64>, tau: f64, bands: &TierBands) -> DiagnosisOutcome {
    let prediction_set: BTreeSet<_> = fused
        .iter()
        .filter(|(_, c)| **c >= tau)
        .map(|(d, _)| d.clone())
        .collect();
    let tiers = fused
        .iter()
        .map(|(d, c)| {
            let t = bands.tier(c.clamp(0.0, 1.0)).unwrap_or(ConfidenceTier::Low);
            (d.clone(), t)
        })
        .collect();
    let ood = prediction_set.is_empty();
    DiagnosisOutcome {
        ranking: ranked(fused),
        ood,
        escalation: ood.then(|| escalation_kind(fused)),
        fused: FusedScores {
            scores: fused.clone(),
            tau,
            prediction_set,
            tiers,
        },
    }
}

/// `summary` is the confirmed symptom summary, echoed into the instructions
/// so a vet or lab sees what was reported.
pub fn escalate(outcome: &DiagnosisOutcome, summary: &str) -> Result<EscalationAction, FusionError> {
    if !outcome.fused.prediction_set.is_empty() {
        return Err(FusionError::NotOod);
    }
    let kind = outcome
        .escalation
        .unwrap_or_else(|| escalation_kind(&outcome.fused.scores));
    let mut instructions = match kind {
        Escalation::ExpertReview => "Consult a vet.".to_string(),
        Escalation::AdditionalTests => {
            "Run additional diagnostic tests (blood samples, pathogen screening).".to_string()
        }
    };
    let summary = summary.trim();
    if !summary.is_empty() {
        instructions.push_str("\nReported signs:\n");
        instructions.push_str(summary);
    }
    Ok(EscalationAction { kind, instructions })
}

pub fn rank_top_k(fused: &BTreeMap<DiseaseId, f64>, k: usize) -> Vec<(DiseaseId, f64)> {
    let mut v = ranked(fused);
    v.truncate(k);
    v
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FusionConfig {
    pub tau: f64,
    /// Raw weight per agent id; agents not listed get the uniform default.
    pub weights: BTreeMap<String, f64>,
    pub tiers: TierBands,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            tau: DEFAULT_TAU,
            weights: BTreeMap::new(),
            tiers: TierBands::default(),
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<(), FusionError> {
        self.tiers.validate()?;
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(FusionError::OutOfRange(self.tau));
        }
        for (agent, w) in &self.weights {
            if !w.is_finite() || *w < 0.0 {
                return Err(FusionError::InvalidWeight {
                    agent: agent.clone(),
                    weight: *w,
                });
            }
        }
        Ok(())
    }
}

pub fn agent_id(disease: &DiseaseId) -> String {
    format!("{}-specialist", disease.code())
}

/// Runs one specialist agent per registered disease through the gateway.
pub struct OpinionGatherer {
    gateway: Arc<Gateway>,
    registry: DiseaseRegistry,
    weights: BTreeMap<String, f64>,
}

impl OpinionGatherer {
    pub fn new(gateway: Arc<Gateway>, registry: DiseaseRegistry, weights: BTreeMap<String, f64>) -> Self {
        Self {
            gateway,
            registry,
            weights,
        }
    }

    pub fn prompt(&self, agent_disease: &DiseaseId, observations: &[String]) -> String {
        let diseases: Vec<&str> = self.registry.ids().map(|d| d.code()).collect();
        let name = self
            .registry
            .display_name(agent_disease)
            .unwrap_or(agent_disease.code());
        format!(
            "You are a veterinary specialist in {name} ({code}). Given the observed signs, \
             give a confidence in [0, 1] for each of {list}. Confidences are independent and \
             need not sum to 1. Reply with a JSON object mapping disease code to confidence.\n\
             Observed signs: {obs}",
            code = agent_disease.code(),
            list = diseases.join(", "),
            obs = observations.join("; "),
        )
    }

    fn opine(&self, disease: &DiseaseId, observations: &[String], weight: f64) -> Result<AgentOpinion, FusionError> {
        let agent = agent_id(disease);
        let request = ModelRequest::new(Purpose::Opine, self.prompt(disease, observations))
            .map_err(|source| FusionError::AgentFailed { agent: agent.clone(), source })?
            .with_parameter("temperature", 0.0)
            .with_context(TaskContext::Opine {
                agent_disease: disease.clone(),
                diseases: self.registry.ids().cloned().collect(),
                observations: observations.to_vec(),
            });
        let response = self
            .gateway
            .call(&request)
            .map_err(|source| FusionError::AgentFailed { agent: agent.clone(), source })?;
        let malformed = |detail: String| FusionError::MalformedOpinion {
            agent: agent.clone(),
            detail,
        };
        let value = extract_json(&response.text).ok_or_else(|| malformed(response.text.clone()))?;
        let raw: BTreeMap<String, f64> =
            serde_json::from_value(value).map_err(|e| malformed(e.to_string()))?;
        let mut confidences = BTreeMap::new();
        for (code, p) in raw {
            match DiseaseId::new(&code) {
                Ok(d) if self.registry.contains(&d) => {
                    confidences.insert(d, p);
                }
                _ => log::warn!("agent {agent}: ignoring confidence for unregistered {code:?}"),
            }
        }
        AgentOpinion::new(agent.clone(), weight, confidences, &self.registry)
    }

    /// One opinion per registered disease, in registry order.
    pub fn gather(&self, observations: &[String]) -> Result<Vec<AgentOpinion>, FusionError> {
        let ids: Vec<DiseaseId> = self.registry.ids().cloned().collect();
        let uniform = 1.0 / ids.len().max(1) as f64;
        ids.par_iter()
            .map(|d| {
                let w = self.weights.get(&agent_id(d)).copied().unwrap_or(uniform);
                self.opine(d, observations, w)
            })
            .collect()
    }
}
