//! Structured inputs attached to model requests. The prompt text is what a
//! hosted model sees; this is what the offline rule backend works from.

use serde::{Deserialize, Serialize};

use crate::disease::DiseaseId;
use crate::history::Turn;
use crate::pipeline::{GeneralEntity, MedicalEntity};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Passage {
    pub source_file: String,
    pub page: u32,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "snake_case")]
pub enum TaskContext {
    Classify {
        query: String,
        history: Vec<Turn>,
    },
    ExtractSymptoms {
        text: String,
    },
    Opine {
        agent_disease: DiseaseId,
        diseases: Vec<DiseaseId>,
        observations: Vec<String>,
    },
    ExtractGeneral {
        text: String,
        history: Vec<Turn>,
    },
    ExtractMedical {
        text: String,
        history: Vec<Turn>,
    },
    RewriteGeneral {
        query: String,
        entities: Vec<GeneralEntity>,
        history: Vec<Turn>,
    },
    RewriteMedical {
        query: String,
        entities: Vec<MedicalEntity>,
    },
    Generate {
        query: String,
        passages: Vec<Passage>,
    },
}
