//! Veterinary vocabulary used by the offline rule backend and by the few
//! places that need a cheap keyword signal without a model call (domain hints
//! at task registration, no-more-information markers, confirmations).
//!
//! Phrases are matched with [`crate::text::has_phrase`]; a trailing `*`
//! accepts any suffix.

use std::collections::BTreeMap;

use crate::dialogue::SymptomCategory;
use crate::disease::DiseaseId;
use crate::pipeline::MedicalKind;
use crate::router::QueryClass;
use crate::text::{has_phrase, padded};

pub struct SymptomEntry {
    pub patterns: &'static [&'static str],
    pub category: SymptomCategory,
    pub attribute: &'static str,
    pub value: &'static str,
}

macro_rules! symptom {
    ($cat:ident, $attr:literal, $value:literal, [$($p:literal),+ $(,)?]) => {
        SymptomEntry {
            patterns: &[$($p),+],
            category: SymptomCategory::$cat,
            attribute: $attr,
            value: $value,
        }
    };
}

pub static SYMPTOMS: &[SymptomEntry] = &[
    symptom!(GeneralIndicator, "mortality-rate", "pigs dying", ["died", "dead", "death*", "dying", "mortality"]),
    symptom!(GeneralIndicator, "morbidity-rate", "pigs affected", ["sick", "affected", "morbidity", "ill"]),
    symptom!(GeneralIndicator, "pig-class", "piglets", ["piglet*", "suckling*", "weaner*"]),
    symptom!(GeneralIndicator, "pig-class", "breeders", ["sow*", "breeder*", "boar*", "gilt*"]),
    symptom!(GeneralIndicator, "pig-class", "finishers", ["finisher*", "fattener*", "grower*"]),
    symptom!(GeneralIndicator, "environment", "environmental change", ["ventilation", "weather", "heat", "humid*", "cold snap"]),
    symptom!(GeneralIndicator, "body-temperature", "high fever", ["fever*", "high temperature", "febrile"]),
    symptom!(GeneralIndicator, "appetite", "reduced appetite", ["not eating", "off feed", "loss of appetite", "anorexi*"]),
    symptom!(ExternalSign, "skin", "red body", ["red bod*", "red skin", "reddening", "redness"]),
    symptom!(ExternalSign, "skin", "purple ears", ["purple ear*", "blue ear*", "cyano*"]),
    symptom!(ExternalSign, "skin", "skin lesions", ["lesion*", "ulcer*"]),
    symptom!(ExternalSign, "skin", "blisters", ["blister*", "vesicle*"]),
    symptom!(ExternalSign, "skin", "hemorrhages", ["hemorrhag*", "haemorrhag*", "bleeding", "blotch*"]),
    symptom!(ExternalSign, "discharge", "nasal discharge", ["nasal discharge", "runny nose"]),
    symptom!(ExternalSign, "discharge", "ocular discharge", ["ocular discharge", "eye discharge", "conjunctivitis"]),
    symptom!(ExternalSign, "discharge", "drooling", ["drool*", "salivat*"]),
    symptom!(ExternalSign, "behavior", "refusal to stand", ["refus* to stand", "cannot stand", "unable to stand", "won t stand"]),
    symptom!(ExternalSign, "behavior", "aggression", ["aggress*"]),
    symptom!(ExternalSign, "behavior", "lethargy", ["letharg*", "weakness", "depressed"]),
    symptom!(ExternalSign, "behavior", "lameness", ["lame*", "limp*"]),
    symptom!(SpecificCluster, "respiratory", "coughing", ["cough*"]),
    symptom!(SpecificCluster, "respiratory", "sneezing", ["sneez*"]),
    symptom!(SpecificCluster, "respiratory", "breathing difficulty", ["difficulty breathing", "breathing difficult*", "labored breathing", "pneumonia"]),
    symptom!(SpecificCluster, "gastrointestinal", "vomiting", ["vomit*"]),
    symptom!(SpecificCluster, "gastrointestinal", "diarrhea", ["diarrh*", "scour*", "watery stool*"]),
    symptom!(SpecificCluster, "gastrointestinal", "bloody stool", ["bloody stool*", "dark stool*", "blood in stool*", "stool with blood"]),
    symptom!(SpecificCluster, "neurological", "tremors", ["tremor*", "shaking"]),
    symptom!(SpecificCluster, "neurological", "seizures", ["seizure*", "convuls*"]),
    symptom!(SpecificCluster, "neurological", "paralysis", ["paralys*", "paddling"]),
    symptom!(SpecificCluster, "reproductive", "stillbirths", ["stillb*"]),
    symptom!(SpecificCluster, "reproductive", "abortions", ["abort*"]),
    symptom!(SpecificCluster, "reproductive", "infertility", ["infertil*"]),
    symptom!(SpecificCluster, "reproductive", "mummified piglets", ["mummif*"]),
];

/// Named symptom clusters, in the order they are offered when nothing hints
/// at one.
pub static CLUSTERS: &[(&str, &str)] = &[
    ("respiratory", "respiratory signs (coughing, sneezing)"),
    ("gastrointestinal", "gastrointestinal signs (vomiting, diarrhea)"),
    ("neurological", "neurological signs (tremors, seizures)"),
    ("reproductive", "reproductive problems (stillbirths, infertility)"),
];

/// Symptom entries found in `text`, in lexicon order, each at most once.
pub fn match_symptoms(text: &str) -> Vec<&'static SymptomEntry> {
    let p = padded(text);
    SYMPTOMS
        .iter()
        .filter(|e| e.patterns.iter().any(|pat| has_phrase(&p, pat)))
        .collect()
}

/// Cluster suggested by a fact: its own attribute for cluster facts, and a
/// few external signs that point at one.
pub fn cluster_hint(attribute: &str, value: &str) -> Option<&'static str> {
    match (attribute, value) {
        ("respiratory", _) | (_, "nasal discharge") | (_, "ocular discharge") => {
            Some("respiratory")
        }
        ("gastrointestinal", _) => Some("gastrointestinal"),
        ("neurological", _) | (_, "refusal to stand") => Some("neurological"),
        ("reproductive", _) => Some("reproductive"),
        _ => None,
    }
}

static DISEASE_MENTIONS: &[(&str, &[&str])] = &[
    ("ASF", &["asf", "african swine fever"]),
    ("PRRS", &["prrs", "blue ear disease", "porcine reproductive*"]),
    ("PED", &["ped", "porcine epidemic diarrh*"]),
    ("FMD", &["fmd", "foot and mouth*"]),
];

/// Diseases named in `text`, in mention-table order.
pub fn mentioned_diseases(text: &str) -> Vec<DiseaseId> {
    let p = padded(text);
    DISEASE_MENTIONS
        .iter()
        .filter(|(_, pats)| pats.iter().any(|pat| has_phrase(&p, pat)))
        .filter_map(|(code, _)| DiseaseId::new(code).ok())
        .collect()
}

pub struct TermEntry {
    pub patterns: &'static [&'static str],
    pub term: &'static str,
    pub kind: &'static str,
}

pub static GENERAL_TERMS: &[TermEntry] = &[
    TermEntry { patterns: &["asf", "african swine fever"], term: "ASF", kind: "disease" },
    TermEntry { patterns: &["prrs", "blue ear disease"], term: "PRRS", kind: "disease" },
    TermEntry { patterns: &["ped", "porcine epidemic diarrh*"], term: "PED", kind: "disease" },
    TermEntry { patterns: &["fmd", "foot and mouth*"], term: "FMD", kind: "disease" },
    TermEntry { patterns: &["roll over", "rolled over", "rolls over"], term: "Roll Over", kind: "status-transition" },
    TermEntry { patterns: &["biosecurity"], term: "biosecurity", kind: "practice" },
    TermEntry { patterns: &["quarantin*"], term: "quarantine", kind: "practice" },
    TermEntry { patterns: &["necrops*"], term: "necropsy", kind: "procedure" },
    TermEntry { patterns: &["sample*", "sampling"], term: "sampling", kind: "procedure" },
    TermEntry { patterns: &["farrowing"], term: "farrowing", kind: "production-stage" },
    TermEntry { patterns: &["dld"], term: "DLD", kind: "organization" },
];

pub struct MedicalEntry {
    pub patterns: &'static [&'static str],
    pub trade_name: Option<&'static str>,
    pub group: Option<&'static str>,
    pub kind: MedicalKind,
}

pub static MEDICAL_TERMS: &[MedicalEntry] = &[
    MedicalEntry { patterns: &["agita"], trade_name: Some("Agita"), group: None, kind: MedicalKind::Medicine },
    MedicalEntry { patterns: &["ivomec"], trade_name: Some("Ivomec"), group: Some("antihelminthic"), kind: MedicalKind::Medicine },
    MedicalEntry { patterns: &["virkon"], trade_name: Some("Virkon"), group: Some("disinfectant"), kind: MedicalKind::Medicine },
    MedicalEntry { patterns: &["ingelvac*"], trade_name: Some("Ingelvac"), group: Some("vaccine"), kind: MedicalKind::Vaccine },
    MedicalEntry { patterns: &["porcilis"], trade_name: Some("Porcilis"), group: Some("vaccine"), kind: MedicalKind::Vaccine },
    MedicalEntry { patterns: &["circovac"], trade_name: Some("Circovac"), group: Some("vaccine"), kind: MedicalKind::Vaccine },
    MedicalEntry { patterns: &["vitamin*"], trade_name: None, group: Some("vitamin"), kind: MedicalKind::Medicine },
    MedicalEntry { patterns: &["disinfect*"], trade_name: None, group: Some("disinfectant"), kind: MedicalKind::Medicine },
    MedicalEntry { patterns: &["hormone*"], trade_name: None, group: Some("hormone"), kind: MedicalKind::Medicine },
    MedicalEntry { patterns: &["antihelmint*", "anthelmint*", "dewormer*", "deworming"], trade_name: None, group: Some("antihelminthic"), kind: MedicalKind::Medicine },
    MedicalEntry { patterns: &["antibiotic*"], trade_name: None, group: Some("antibiotic"), kind: MedicalKind::Medicine },
    MedicalEntry { patterns: &["vaccin*"], trade_name: None, group: Some("vaccine"), kind: MedicalKind::Vaccine },
];

pub fn match_general_terms(text: &str) -> Vec<&'static TermEntry> {
    let p = padded(text);
    GENERAL_TERMS
        .iter()
        .filter(|e| e.patterns.iter().any(|pat| has_phrase(&p, pat)))
        .collect()
}

pub fn match_medical_terms(text: &str) -> Vec<&'static MedicalEntry> {
    let p = padded(text);
    MEDICAL_TERMS
        .iter()
        .filter(|e| e.patterns.iter().any(|pat| has_phrase(&p, pat)))
        .collect()
}

/// True when the text talks about medicines or vaccines.
pub fn is_vaccine_flavored(text: &str) -> bool {
    !match_medical_terms(text).is_empty()
}

const GREETINGS: &[&str] = &[
    "hello", "hi", "hey", "good morning", "good afternoon", "good evening", "thanks",
    "thank you", "bye", "goodbye",
];

const QUESTION_OPENERS: &[&str] = &[
    "what", "which", "how", "when", "where", "why", "can", "should", "is", "are", "do",
    "does",
];

const KNOWLEDGE_TOPICS: &[&str] = &[
    "vaccin*", "dose*", "dosage", "sample*", "test*", "treat*", "medicine*", "drug*",
    "antibiotic*", "disinfect*", "biosecurity", "prevent*", "protocol*", "injection*",
    "vitamin*", "hormone*", "deworm*", "anthelmint*", "antihelmint*", "prescription*",
    "usage", "instruction*", "transmi*", "spread*", "symptoms of", "signs of",
];

const DOMAIN_WORDS: &[&str] = &[
    "pig*", "swine", "hog*", "sow*", "boar*", "gilt*", "farm*", "herd*", "litter*",
];

pub fn is_greeting(text: &str) -> bool {
    let p = padded(text);
    GREETINGS.iter().any(|w| has_phrase(&p, w))
}

/// Raw (unnormalized) class scores for the keyword classifier.
pub fn class_scores(query: &str, last_system_turn: Option<&str>) -> BTreeMap<QueryClass, f64> {
    let p = padded(query);
    let terms = crate::text::terms(query);
    let any = |list: &[&str]| list.iter().filter(|w| has_phrase(&p, w)).count();

    let greetings = any(GREETINGS);
    let topics = any(KNOWLEDGE_TOPICS).min(2);
    let diseases = mentioned_diseases(query).len();
    let question = query.contains('?')
        || terms
            .first()
            .is_some_and(|t| QUESTION_OPENERS.contains(&t.as_str()));
    let symptoms = match_symptoms(query);
    let signs = symptoms
        .iter()
        .filter(|s| s.category != SymptomCategory::GeneralIndicator)
        .count();
    let indicators = symptoms.len() - signs;
    let domain = any(DOMAIN_WORDS) + topics + diseases + symptoms.len()
        + match_medical_terms(query).len();

    let mut k = 0.1 + topics as f64;
    let mut d = 0.1 + 1.5 * signs.min(3) as f64;
    let mut t = 0.1;
    let mut g = 0.1 + 2.0 * greetings.min(1) as f64;

    if question && (topics > 0 || diseases > 0) {
        k += 1.0;
    }
    if signs == 0 && indicators > 0 {
        t += 1.5;
    }
    if domain == 0 {
        if greetings > 0 || terms.len() > 3 {
            g += 1.0;
        } else {
            t += 1.0;
        }
    }
    if let Some(prev) = last_system_turn {
        if prev.contains("Are you looking for") {
            if has_phrase(&p, "diagnos*") {
                d += 2.0;
            }
            if has_phrase(&p, "info*") {
                k += 2.0;
            }
        }
    }

    BTreeMap::from([
        (QueryClass::K, k),
        (QueryClass::D, d),
        (QueryClass::T, t),
        (QueryClass::G, g),
    ])
}

const NO_MORE_INFO: &[&str] = &[
    "no extra information", "no more information", "no further information",
    "no additional information", "no other information", "nothing else", "nothing more",
    "that s all", "that is all", "i don t know", "no idea",
];

/// True when the user signals they have nothing more to add.
pub fn is_no_more_information(text: &str) -> bool {
    let p = padded(text);
    NO_MORE_INFO.iter().any(|m| has_phrase(&p, m))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Confirmation {
    Affirmed,
    Rejected,
    Unclear,
}

pub fn confirmation(text: &str) -> Confirmation {
    let p = padded(text);
    let neg = ["no", "not", "wrong", "incorrect", "nope"];
    let pos = ["yes", "yeah", "yep", "correct", "accurate", "right", "exactly", "confirmed"];
    if neg.iter().any(|w| has_phrase(&p, w)) {
        Confirmation::Rejected
    } else if pos.iter().any(|w| has_phrase(&p, w)) {
        Confirmation::Affirmed
    } else {
        Confirmation::Unclear
    }
}

/// Per-disease symptom weights used by the offline disease agents. A disease
/// score is the sum of weights of the observed symptom values.
pub static DISEASE_PROFILES: &[(&str, &[(&str, f64)])] = &[
    ("ASF", &[
        ("high fever", 0.2), ("hemorrhages", 0.2), ("red body", 0.15), ("pigs dying", 0.1),
        ("purple ears", 0.05), ("bloody stool", 0.1), ("vomiting", 0.05), ("lethargy", 0.05),
        ("refusal to stand", 0.05), ("reduced appetite", 0.05), ("abortions", 0.05),
    ]),
    ("PRRS", &[
        ("purple ears", 0.15), ("coughing", 0.15), ("breathing difficulty", 0.2),
        ("sneezing", 0.05), ("stillbirths", 0.2), ("abortions", 0.2), ("mummified piglets", 0.1),
        ("high fever", 0.1), ("pigs dying", 0.05), ("reduced appetite", 0.05),
    ]),
    ("PED", &[
        ("diarrhea", 0.35), ("vomiting", 0.2), ("piglets", 0.1), ("pigs dying", 0.1),
        ("reduced appetite", 0.05), ("lethargy", 0.05),
    ]),
    ("FMD", &[
        ("blisters", 0.35), ("lameness", 0.25), ("drooling", 0.2), ("high fever", 0.1),
        ("skin lesions", 0.1), ("refusal to stand", 0.05),
    ]),
];

/// Sum of profile weights matched by `observed` symptom values, capped at 0.95.
pub fn profile_score(disease: &DiseaseId, observed: &[String]) -> f64 {
    DISEASE_PROFILES
        .iter()
        .find(|(code, _)| *code == disease.code())
        .map(|(_, weights)| {
            weights
                .iter()
                .filter(|(v, _)| observed.iter().any(|o| o == v))
                .map(|(_, w)| w)
                .sum::<f64>()
                .min(0.95)
        })
        .unwrap_or(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chosen(q: &str) -> QueryClass {
        let scores = class_scores(q, None);
        crate::router::argmax(&scores)
    }

    #[test]
    fn conversation_openers_classify_as_expected() {
        assert_eq!(chosen("Hello! What can be done?"), QueryClass::G);
        assert_eq!(chosen("Many pigs received from the source have died."), QueryClass::T);
        assert_eq!(chosen("Pigs have red bodies, purple ears.."), QueryClass::D);
        assert_eq!(chosen("What samples are used for ASF testing?"), QueryClass::K);
        assert_eq!(chosen("Which vaccine protects piglets against PRRS?"), QueryClass::K);
    }

    #[test]
    fn clarification_answers_use_history() {
        let prev = "I see. Are you looking for:\n- Disease diagnosis? or General pig disease info?";
        let s = class_scores("diagnosis please", Some(prev));
        assert_eq!(crate::router::argmax(&s), QueryClass::D);
    }

    #[test]
    fn symptom_matching() {
        let m: Vec<_> = match_symptoms("Pigs have red bodies, purple ears..")
            .iter()
            .map(|e| e.value)
            .collect();
        assert_eq!(m, vec!["red body", "purple ears"]);
        assert!(match_symptoms("Hello there").is_empty());
    }

    #[test]
    fn markers_and_confirmations() {
        assert!(is_no_more_information("No extra information is available."));
        assert!(!is_no_more_information("They are coughing"));
        assert_eq!(confirmation("Yes, that's accurate."), Confirmation::Affirmed);
        assert_eq!(confirmation("No, that's wrong"), Confirmation::Rejected);
        assert_eq!(confirmation("hmm"), Confirmation::Unclear);
    }

    #[test]
    fn medical_terms() {
        let m = match_medical_terms("DLD for Agita");
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].trade_name, Some("Agita"));
        assert_eq!(match_medical_terms("which disinfectant for water")[0].group, Some("disinfectant"));
        assert!(match_medical_terms("hello").is_empty());
    }

    #[test]
    fn profiles_sum_matched_weights() {
        let obs = vec!["red body".to_string(), "purple ears".into(), "pigs dying".into()];
        assert!((profile_score(&DiseaseId::asf(), &obs) - 0.30).abs() < 1e-12);
        assert!((profile_score(&DiseaseId::fmd(), &obs)).abs() < 1e-12);
    }
}
