//! Disease identifiers and the registry every component agrees on.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Upper-case disease code such as `ASF`. Ordered lexicographically by code,
/// which is the tie-break used wherever diseases are ranked.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct DiseaseId(String);

#[derive(Debug, Error, PartialEq, Eq)]
#[error("invalid disease code {0:?}: expected 1-16 ASCII letters or digits")]
pub struct InvalidDiseaseCode(pub String);

impl DiseaseId {
    pub fn new(code: &str) -> Result<Self, InvalidDiseaseCode> {
        let trimmed = code.trim();
        if trimmed.is_empty()
            || trimmed.len() > 16
            || !trimmed.chars().all(|c| c.is_ascii_alphanumeric())
        {
            return Err(InvalidDiseaseCode(code.to_string()));
        }
        Ok(Self(trimmed.to_ascii_uppercase()))
    }

    pub fn asf() -> Self {
        Self("ASF".into())
    }

    pub fn prrs() -> Self {
        Self("PRRS".into())
    }

    pub fn ped() -> Self {
        Self("PED".into())
    }

    pub fn fmd() -> Self {
        Self("FMD".into())
    }

    pub fn code(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for DiseaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for DiseaseId {
    type Err = InvalidDiseaseCode;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::new(s)
    }
}

impl TryFrom<String> for DiseaseId {
    type Error = InvalidDiseaseCode;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        Self::new(&value)
    }
}

impl From<DiseaseId> for String {
    fn from(value: DiseaseId) -> Self {
        value.0
    }
}

/// Registered diseases with display names. The four benchmark diseases are
/// always present; extensions may be added but never replace them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiseaseRegistry {
    entries: BTreeMap<DiseaseId, String>,
}

impl Default for DiseaseRegistry {
    fn default() -> Self {
        let entries = [
            (DiseaseId::asf(), "African Swine Fever"),
            (
                DiseaseId::prrs(),
                "Porcine Reproductive and Respiratory Syndrome",
            ),
            (DiseaseId::ped(), "Porcine Epidemic Diarrhea"),
            (DiseaseId::fmd(), "Foot-and-Mouth Disease"),
        ]
        .into_iter()
        .map(|(id, name)| (id, name.to_string()))
        .collect();
        Self { entries }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("disease {0} is already registered")]
pub struct DuplicateDisease(pub DiseaseId);

impl DiseaseRegistry {
    pub fn register(
        &mut self,
        id: DiseaseId,
        display_name: impl Into<String>,
    ) -> Result<(), DuplicateDisease> {
        if self.entries.contains_key(&id) {
            return Err(DuplicateDisease(id));
        }
        self.entries.insert(id, display_name.into());
        Ok(())
    }

    pub fn contains(&self, id: &DiseaseId) -> bool {
        self.entries.contains_key(id)
    }

    pub fn display_name(&self, id: &DiseaseId) -> Option<&str> {
        self.entries.get(id).map(String::as_str)
    }

    /// Codes in lexicographic order.
    pub fn ids(&self) -> impl Iterator<Item = &DiseaseId> {
        self.entries.keys()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
