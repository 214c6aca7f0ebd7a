//! Metric recomputation from labeled fixtures: confusion-matrix scores,
//! top-k diagnosis accuracy with timing, rubric aggregation, and paired
//! t-tests with subsample bootstrapping.

mod dataset;
mod metrics;
mod rubric;
mod stats;
mod topk;

pub use dataset::{
    load_classification, load_diagnosis, load_examples, load_jsonl, load_rubric, ClassificationRecord,
    DatasetError, DocumentSource, LabeledExample, Split,
};
pub use metrics::{class_metrics, ClassMetrics, ConfusionMatrix, MetricsError, MetricsReport, Score};
pub use rubric::{rubric_aggregate, Dimension, RubricAverage, RubricError, RubricReport, RubricRow, RubricScore, System};
pub use stats::{bootstrap_t, paired_t_test, BootstrapResult, StatsError, TTest};
pub use topk::{top_k_accuracy, DiagnosisLabel, DiagnosisRecord, LabelTally, TopKError, TopKReport};
