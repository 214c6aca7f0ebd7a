use std::io::BufRead;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{DiagnosisRecord, RubricScore};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}: parse error: {message}")]
    ParseError { line: usize, message: String },
    #[error("line {line}: missing or invalid field {field:?}: {message}")]
    SchemaError {
        line: usize,
        field: String,
        message: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Validation,
    Test,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentSource {
    pub file: String,
    pub page: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub question: String,
    pub scenario: String,
    pub question_type: String,
    pub document_source: DocumentSource,
    pub example_answer: String,
    pub split: Split,
    /// Fields outside the schema (task, labels, ids).
    #[serde(flatten)]
    pub extra: serde_json::Map<String, serde_json::Value>,
}

/// One query-classification outcome; labels are free-form class names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassificationRecord {
    pub truth: String,
    pub predicted: String,
    #[serde(flatten)]
    pub extra: serde_json::Map<String, serde_json::Value>,
}

/// Reads JSONL into `T`, checking `required` top-level fields first so a
/// missing one is reported by name. Blank lines are skipped.
pub fn load_jsonl<T: DeserializeOwned>(path: &Path, required: &[&str]) -> Result<Vec<T>, DatasetError> {
    let file = std::fs::File::open(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|source| DatasetError::Io {
            path: path.display().to_string(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(&line).map_err(|e| DatasetError::ParseError {
            line: lineno,
            message: e.to_string(),
        })?;
        let Some(obj) = value.as_object() else {
            return Err(DatasetError::ParseError {
                line: lineno,
                message: "expected a JSON object".into(),
            });
        };
        if let Some(field) = required.iter().find(|f| !obj.contains_key(**f)) {
            return Err(DatasetError::SchemaError {
                line: lineno,
                field: field.to_string(),
                message: "field is missing".into(),
            });
        }
        let record = serde_json::from_value(value).map_err(|e| {
            let message = e.to_string();
            let field = message
                .split('`')
                .nth(1)
                .unwrap_or("<record>")
                .to_string();
            DatasetError::SchemaError {
                line: lineno,
                field,
                message,
            }
        })?;
        out.push(record);
    }
    Ok(out)
}

pub fn load_examples(path: &Path) -> Result<Vec<LabeledExample>, DatasetError> {
    load_jsonl(
        path,
        &["question", "scenario", "question_type", "document_source", "example_answer", "split"],
    )
}

pub fn load_classification(path: &Path) -> Result<Vec<ClassificationRecord>, DatasetError> {
    load_jsonl(path, &["truth", "predicted"])
}

pub fn load_diagnosis(path: &Path) -> Result<Vec<DiagnosisRecord>, DatasetError> {
    load_jsonl(path, &["case_id", "actual", "ranking", "exec_time_s"])
}

pub fn load_rubric(path: &Path) -> Result<Vec<RubricScore>, DatasetError> {
    load_jsonl(path, &["example_id", "system", "split", "dataset", "dimensions"])
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn example(i: usize) -> String {
        format!(
            r#"{{"question":"q{i}","scenario":"multi-turn dialogue","question_type":"factoid","document_source":{{"file":"ASF-2022.pdf","page":3}},"example_answer":"a","split":"test","task":"classification"}}"#
        )
    }

    fn write(lines: &[String]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for l in lines {
            writeln!(f, "{l}").unwrap();
        }
        f
    }

    #[test]
    fn loads_and_keeps_unknown_fields() {
        let f = write(&[example(1), String::new(), example(2)]);
        let v = load_examples(f.path()).unwrap();
        assert_eq!(v.len(), 2);
        assert_eq!(v[0].extra["task"], "classification");
        assert_eq!(v[1].split, Split::Test);
    }

    #[test]
    fn parse_error_cites_line() {
        let mut lines: Vec<String> = (1..=6).map(example).collect();
        lines.push("{not json".into());
        let f = write(&lines);
        match load_examples(f.path()) {
            Err(DatasetError::ParseError { line, .. }) => assert_eq!(line, 7),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn schema_error_names_field() {
        let f = write(&[example(1).replace(r#""question_type":"factoid","#, "")]);
        match load_examples(f.path()) {
            Err(DatasetError::SchemaError { field, line, .. }) => {
                assert_eq!(field, "question_type");
                assert_eq!(line, 1);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
