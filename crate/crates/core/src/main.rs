use std::collections::BTreeMap;
use std::io::BufRead;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use herdsense::clock::SystemClock;
use herdsense::eval::{
    bootstrap_t, class_metrics, load_classification, load_diagnosis, load_rubric, paired_t_test,
    rubric_aggregate, top_k_accuracy, ConfusionMatrix, Dimension, RubricScore, Score, System,
};
use herdsense::service::{self, ApiConfig, Engine};
use herdsense::store::{load_corpus, ChunkPolicy, HashingEmbedder, KnowledgeStore};

#[derive(Parser)]
#[command(name = "herdsense", version, about = "Swine health diagnostic assistant")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Chunk, embed and add a JSONL page corpus to a store file.
    Ingest {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        store: PathBuf,
        #[arg(long, default_value_t = 256)]
        dim: usize,
        #[arg(long, default_value_t = 512)]
        max_tokens: usize,
        #[arg(long, default_value_t = 64)]
        overlap: usize,
    },
    /// Chat on stdin, one message per line.
    Chat {
        #[arg(long)]
        config: PathBuf,
    },
    /// Score fixture files. The table goes to stderr, the JSON report to stdout.
    Evaluate {
        #[command(subcommand)]
        kind: EvalKind,
    },
}

#[derive(Subcommand)]
enum EvalKind {
    /// Per-class precision, recall and F1 from truth/predicted records.
    Classify {
        #[arg(long)]
        input: PathBuf,
    },
    /// Top-k diagnosis accuracy and execution times.
    Diagnose {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 2)]
        k: usize,
    },
    /// Rubric means per split and question set, plus paired significance
    /// tests of ours against the baseline.
    Retrieve {
        #[arg(long)]
        input: PathBuf,
        /// Extra scores file, typically the baseline system's.
        #[arg(long)]
        baseline: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        iterations: usize,
        #[arg(long, default_value_t = 0.8)]
        fraction: f64,
    },
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Serve { config } => {
            let config = ApiConfig::load(&config)?;
            let rt = tokio::runtime::Runtime::new().context("starting runtime")?;
            rt.block_on(service::serve(config))?;
        }
        Command::Ingest {
            corpus,
            store,
            dim,
            max_tokens,
            overlap,
        } => ingest(&corpus, &store, dim, ChunkPolicy { max_tokens, overlap })?,
        Command::Chat { config } => chat(&config)?,
        Command::Evaluate { kind } => {
            let report = match kind {
                EvalKind::Classify { input } => eval_classify(&input)?,
                EvalKind::Diagnose { input, k } => eval_diagnose(&input, k)?,
                EvalKind::Retrieve {
                    input,
                    baseline,
                    seed,
                    iterations,
                    fraction,
                } => eval_retrieve(&input, baseline.as_deref(), seed, iterations, fraction)?,
            };
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
    }
    Ok(())
}

fn ingest(corpus: &Path, store: &Path, dim: usize, policy: ChunkPolicy) -> Result<()> {
    let pages = load_corpus(corpus)?;
    let embedder = HashingEmbedder::new(dim)?;
    let store_handle = KnowledgeStore::open(store, Arc::new(embedder), policy)
        .with_context(|| format!("opening {}", store.display()))?;
    let chunks = store_handle.ingest(&pages)?;
    eprintln!(
        "{} pages as {chunks} chunks; {} chunks in {}",
        pages.len(),
        store_handle.len(),
        store.display()
    );
    Ok(())
}

fn chat(config: &Path) -> Result<()> {
    let config = ApiConfig::load(config)?;
    let engine = Engine::from_config(&config, Arc::new(SystemClock))?;
    let session = engine.create_session()?;
    eprintln!("session {}", session.session_id);
    for line in std::io::stdin().lock().lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let r = engine.post_message(&session.session_id, &line)?;
        println!("[{}] {}\n", r.class, r.reply);
    }
    Ok(())
}

fn fmt_score(s: Score) -> String {
    match s.value() {
        Some(v) => format!("{v:.3}"),
        None => "n/a".into(),
    }
}

fn eval_classify(input: &Path) -> Result<Value> {
    let records = load_classification(input)?;
    let mut labels: Vec<String> = Vec::new();
    for r in &records {
        for l in [&r.truth, &r.predicted] {
            if !labels.contains(l) {
                labels.push(l.clone());
            }
        }
    }
    let m = ConfusionMatrix::from_pairs(
        labels,
        records.iter().map(|r| (r.truth.as_str(), r.predicted.as_str())),
    )?;
    let report = class_metrics(&m)?;
    eprintln!("{:<16} {:>9} {:>9} {:>9} {:>8}", "class", "precision", "recall", "f1", "support");
    for c in &report.per_class {
        eprintln!(
            "{:<16} {:>9} {:>9} {:>9} {:>8}",
            c.label,
            fmt_score(c.precision),
            fmt_score(c.recall),
            fmt_score(c.f1),
            c.support
        );
    }
    eprintln!(
        "accuracy {}/{} = {:.2}%",
        report.correct,
        report.total,
        100.0 * report.accuracy
    );
    Ok(json!({"confusion": {"labels": m.labels(), "counts": m.counts()}, "metrics": report}))
}

fn eval_diagnose(input: &Path, k: usize) -> Result<Value> {
    let records = load_diagnosis(input)?;
    let report = top_k_accuracy(&records, k)?;
    eprintln!("{:<8} {:>9} {:>10}", "label", "correct", "mean time");
    for t in &report.per_label {
        eprintln!(
            "{:<8} {:>9} {:>9.2}s",
            t.label.to_string(),
            format!("{}/{}", t.correct, t.total),
            t.mean_exec_time_s
        );
    }
    eprintln!(
        "top-{k} accuracy {}/{} = {:.2}%, mean time {:.2}s",
        report.correct,
        report.total,
        100.0 * report.accuracy,
        report.mean_exec_time_s
    );
    Ok(json!(report))
}

fn eval_retrieve(
    input: &Path,
    baseline: Option<&Path>,
    seed: u64,
    iterations: usize,
    fraction: f64,
) -> Result<Value> {
    let mut scores = load_rubric(input)?;
    if let Some(b) = baseline {
        scores.extend(load_rubric(b)?);
    }
    let report = rubric_aggregate(&scores)?;

    let header: Vec<String> = Dimension::ALL
        .iter()
        .map(|d| format!("{:>6}", format!("{d:?}").chars().take(6).collect::<String>()))
        .collect();
    eprintln!("{:<24} {} {:>6}", "row", header.join(" "), "final");
    let show = |label: String, means: &BTreeMap<Dimension, f64>, fin: f64| {
        let cells: Vec<String> = Dimension::ALL
            .iter()
            .map(|d| format!("{:>6.2}", means.get(d).copied().unwrap_or(f64::NAN)))
            .collect();
        eprintln!("{label:<24} {} {fin:>6.2}", cells.join(" "));
    };
    for r in &report.rows {
        show(format!("{:?}/{}/{:?}", r.split, r.dataset, r.system), &r.means, r.final_mean);
    }
    for a in &report.average {
        show(format!("average/{:?}", a.system), &a.means, a.final_mean);
    }

    let significance = significance(&scores, seed, iterations, fraction)?;
    for (name, s) in &significance {
        eprintln!(
            "{name:<14} t={:.3} p={:.4} bootstrap t={:.3} p={:.4}",
            s["t_test"]["t"].as_f64().unwrap_or(f64::NAN),
            s["t_test"]["p"].as_f64().unwrap_or(f64::NAN),
            s["bootstrap"]["mean_t"].as_f64().unwrap_or(f64::NAN),
            s["bootstrap"]["mean_p"].as_f64().unwrap_or(f64::NAN),
        );
    }
    Ok(json!({"rubric": report, "significance": significance}))
}

/// Pairs ours and baseline scores by split, question set and example id,
/// then tests each dimension and the final score.
fn significance(
    scores: &[RubricScore],
    seed: u64,
    iterations: usize,
    fraction: f64,
) -> Result<BTreeMap<String, Value>> {
    let key = |s: &RubricScore| (s.split, s.dataset.clone(), s.example_id.clone());
    let baseline: BTreeMap<_, &RubricScore> = scores
        .iter()
        .filter(|s| s.system == System::Baseline)
        .map(|s| (key(s), s))
        .collect();
    let pairs: Vec<(&RubricScore, &RubricScore)> = scores
        .iter()
        .filter(|s| s.system == System::Ours)
        .filter_map(|s| baseline.get(&key(s)).map(|b| (s, *b)))
        .collect();
    let mut out = BTreeMap::new();
    if pairs.is_empty() {
        return Ok(out);
    }
    if pairs.len() < 2 {
        bail!("need at least two paired examples, found {}", pairs.len());
    }
    let mut columns: Vec<(String, Vec<f64>, Vec<f64>)> = Dimension::ALL
        .iter()
        .map(|d| {
            (
                format!("{d:?}").to_lowercase(),
                pairs.iter().map(|(o, _)| o.dimensions[d]).collect(),
                pairs.iter().map(|(_, b)| b.dimensions[d]).collect(),
            )
        })
        .collect();
    columns.push((
        "final".into(),
        pairs.iter().map(|(o, _)| o.final_value()).collect(),
        pairs.iter().map(|(_, b)| b.final_value()).collect(),
    ));
    for (name, ours, base) in columns {
        let entry = match paired_t_test(&ours, &base) {
            Ok(t) => json!({
                "n": pairs.len(),
                "t_test": t,
                "bootstrap": bootstrap_t(&ours, &base, fraction, iterations, seed).ok(),
            }),
            Err(e) => json!({"n": pairs.len(), "error": e.to_string()}),
        };
        out.insert(name, entry);
    }
    Ok(out)
}
