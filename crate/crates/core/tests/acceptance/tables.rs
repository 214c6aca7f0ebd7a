use std::time::Instant;

use herdsense::eval::{
    class_metrics, load_classification, load_diagnosis, load_rubric, rubric_aggregate, top_k_accuracy,
    ConfusionMatrix, Dimension, System,
};

use crate::common::fixture;

const LABELS: [&str; 4] = ["General", "Retrieval", "Diagnosis", "TBC"];

/// (precision, recall, f1) reference values, in LABELS order.
const REFERENCE: [(f64, f64, f64); 4] = [
    (0.750, 1.000, 0.857),
    (0.993, 0.947, 0.969),
    (0.943, 0.965, 0.953),
    (0.821, 0.941, 0.877),
];

pub fn classification() -> String {
    let start = Instant::now();
    let records = load_classification(&fixture("eval/classification_test.jsonl")).unwrap();
    let m = ConfusionMatrix::from_pairs(
        LABELS.iter().map(|s| s.to_string()).collect(),
        records.iter().map(|r| (r.truth.as_str(), r.predicted.as_str())),
    )
    .unwrap();
    let report = class_metrics(&m).unwrap();
    let elapsed = start.elapsed();

    let counts = m.counts();
    let mut worst: f64 = 0.0;
    for (i, (p, r, f)) in REFERENCE.iter().enumerate() {
        // Oracle straight from the counts.
        let tp = counts[i][i] as f64;
        let row: u64 = counts[i].iter().sum();
        let col: u64 = counts.iter().map(|c| c[i]).sum();
        let op = tp / col as f64;
        let or = tp / row as f64;
        let of = 2.0 * op * or / (op + or);

        let c = &report.per_class[i];
        assert_eq!(c.label, LABELS[i]);
        let got = [
            c.precision.value().unwrap(),
            c.recall.value().unwrap(),
            c.f1.value().unwrap(),
        ];
        for (g, o) in got.iter().zip([op, or, of]) {
            assert!((g - o).abs() < 1e-12, "{}: {g} vs oracle {o}", LABELS[i]);
        }
        for (g, want) in got.iter().zip([*p, *r, *f]) {
            let d = (g - want).abs();
            worst = worst.max(d);
            assert!(d <= 0.0005, "{}: {g:.4} vs reference {want}", LABELS[i]);
        }
    }
    assert_eq!((report.correct, report.total), (439, 461));
    let acc = 100.0 * report.accuracy;
    assert!((acc - 95.23).abs() <= 0.01, "accuracy {acc}");
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
    format!("12 values within {worst:.5}, accuracy {acc:.3}%")
}

pub fn diagnosis() -> String {
    let start = Instant::now();
    let expect = [
        ("gpt-4o", "validation", 88.46),
        ("gpt-4o", "test", 90.63),
        ("o1-mini", "validation", 82.69),
        ("o1-mini", "test", 84.37),
        ("gemini", "validation", 94.23),
        ("gemini", "test", 87.50),
    ];
    let mut out = Vec::new();
    for (model, split, want) in expect {
        let records = load_diagnosis(&fixture(&format!("eval/diagnosis_{model}_{split}.jsonl"))).unwrap();
        let report = top_k_accuracy(&records, 2).unwrap();
        // Oracle: count hits directly.
        let hits = records
            .iter()
            .filter(|r| r.ranking.iter().take(2).any(|l| *l == r.actual))
            .count();
        assert_eq!(report.correct, hits);
        let acc = 100.0 * report.accuracy;
        assert!((acc - want).abs() <= 0.01, "{model}/{split}: {acc} vs {want}");
        out.push(format!("{model}/{split} {acc:.2}"));
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
    out.join(", ")
}

pub fn rubric() -> String {
    let scores = load_rubric(&fixture("eval/rubric.jsonl")).unwrap();
    let report = rubric_aggregate(&scores).unwrap();
    // (dimension means..., final) per system, reference values.
    let reference = [
        (System::Baseline, [3.21, 3.19, 3.28, 3.92, 2.97], 3.31),
        (System::Ours, [4.12, 4.15, 4.12, 4.61, 3.71], 4.17),
    ];
    let mut worst: f64 = 0.0;
    for (system, dims, fin) in reference {
        let avg = report.average.iter().find(|a| a.system == system).unwrap();
        assert_eq!(avg.rows, 4);
        for (d, want) in Dimension::ALL.iter().zip(dims) {
            let got = avg.means[d];
            let diff = (got - want).abs();
            worst = worst.max(diff);
            // Reference values are rounded to two places; allow for the
            // representation error at the half-way point.
            assert!(diff <= 0.005 + 1e-9, "{system:?} {d:?}: {got} vs {want}");
        }
        let diff = (avg.final_mean - fin).abs();
        worst = worst.max(diff);
        assert!(diff <= 0.005 + 1e-9, "{system:?} final: {} vs {fin}", avg.final_mean);
    }
    format!("12 values within {worst:.4}")
}
