use serde::{Deserialize, Serialize};

use super::DocumentMetadata;
use crate::disease::DiseaseId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterKey {
    Domain,
    DiseaseCode,
    TradeNames,
    Group,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", content = "value", rename_all = "snake_case")]
pub enum Condition {
    Equals(String),
    In(Vec<String>),
}

/// On the list-valued `trade_names` key, `equals` means "contains" and `in`
/// means "shares at least one name". Comparisons ignore ASCII case.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Clause {
    pub key: FilterKey,
    #[serde(flatten)]
    pub condition: Condition,
}

impl Clause {
    pub fn equals(key: FilterKey, value: impl Into<String>) -> Self {
        Self {
            key,
            condition: Condition::Equals(value.into()),
        }
    }

    pub fn one_of(key: FilterKey, values: Vec<String>) -> Self {
        Self {
            key,
            condition: Condition::In(values),
        }
    }

    fn accepts(&self, value: &str) -> bool {
        match &self.condition {
            Condition::Equals(v) => v.eq_ignore_ascii_case(value),
            Condition::In(vs) => vs.iter().any(|v| v.eq_ignore_ascii_case(value)),
        }
    }

    pub fn matches(&self, m: &DocumentMetadata) -> bool {
        match self.key {
            FilterKey::Domain => self.accepts(m.domain.as_str()),
            FilterKey::DiseaseCode => m.disease_code.as_ref().is_some_and(|d| self.accepts(d.code())),
            FilterKey::Group => m.group.as_deref().is_some_and(|g| self.accepts(g)),
            FilterKey::TradeNames => m.trade_names.iter().any(|t| self.accepts(t)),
        }
    }
}

/// Conjunction of clauses; no clauses matches everything.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterExpression {
    pub clauses: Vec<Clause>,
}

impl FilterExpression {
    pub fn match_all() -> Self {
        Self::default()
    }

    pub fn is_match_all(&self) -> bool {
        self.clauses.is_empty()
    }

    pub fn and(mut self, clause: Clause) -> Self {
        self.clauses.push(clause);
        self
    }

    pub fn matches(&self, m: &DocumentMetadata) -> bool {
        self.clauses.iter().all(|c| c.matches(m))
    }
}

/// What the filter is built from: a diagnosis, or medicine/vaccine signals.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FilterContext {
    pub diagnosis: Option<DiseaseId>,
    pub medical: bool,
    pub trade_names: Vec<String>,
}

/// A diagnosis wins over medical signals.
pub fn build_filter(ctx: &FilterContext) -> FilterExpression {
    if let Some(d) = &ctx.diagnosis {
        return FilterExpression::match_all()
            .and(Clause::equals(FilterKey::Domain, "disease"))
            .and(Clause::equals(FilterKey::DiseaseCode, d.code()));
    }
    if ctx.medical || !ctx.trade_names.is_empty() {
        let mut f = FilterExpression::match_all().and(Clause::equals(FilterKey::Domain, "vaccine"));
        if !ctx.trade_names.is_empty() {
            f = f.and(Clause::one_of(FilterKey::TradeNames, ctx.trade_names.clone()));
        }
        return f;
    }
    FilterExpression::match_all()
}
