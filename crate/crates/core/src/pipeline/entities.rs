use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneralEntity {
    pub term: String,
    pub kind: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MedicalKind {
    Medicine,
    Vaccine,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MedicalEntity {
    #[serde(default)]
    pub trade_name: Option<String>,
    #[serde(default)]
    pub group: Option<String>,
    pub kind: MedicalKind,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntitySet {
    pub general: Vec<GeneralEntity>,
    pub medical: Vec<MedicalEntity>,
}

fn folded(s: &Option<String>) -> Option<String> {
    s.as_deref().map(str::to_lowercase)
}

impl EntitySet {
    /// Builds a set, dropping later duplicates (terms compared ignoring case).
    pub fn new(general: Vec<GeneralEntity>, medical: Vec<MedicalEntity>) -> Self {
        let mut set = Self::default();
        for g in general {
            set.add_general(g);
        }
        for m in medical {
            set.add_medical(m);
        }
        set
    }

    pub fn add_general(&mut self, entity: GeneralEntity) {
        let term = entity.term.trim();
        if term.is_empty()
            || self
                .general
                .iter()
                .any(|g| g.term.to_lowercase() == term.to_lowercase())
        {
            return;
        }
        self.general.push(GeneralEntity {
            term: term.to_string(),
            kind: entity.kind,
        });
    }

    pub fn add_medical(&mut self, entity: MedicalEntity) {
        if entity.trade_name.is_none() && entity.group.is_none() {
            return;
        }
        let key = (folded(&entity.trade_name), folded(&entity.group));
        if self
            .medical
            .iter()
            .any(|m| (folded(&m.trade_name), folded(&m.group)) == key)
        {
            return;
        }
        self.medical.push(entity);
    }

    pub fn is_empty(&self) -> bool {
        self.general.is_empty() && self.medical.is_empty()
    }

    pub fn trade_names(&self) -> Vec<String> {
        self.medical
            .iter()
            .filter_map(|m| m.trade_name.clone())
            .collect()
    }
}
