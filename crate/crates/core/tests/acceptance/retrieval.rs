use std::sync::Arc;

use herdsense::disease::DiseaseId;
use herdsense::store::{
    ChunkPolicy, Clause, DocumentMetadata, Domain, Embedder, EmbeddingVector, FilterExpression, FilterKey,
    KnowledgeStore, PageInput, StoreError,
};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const DIM: usize = 8;
const CORPORA: usize = 100;
const CODES: [&str; 4] = ["ASF", "PRRS", "PED", "FMD"];
const NAMES: [&str; 4] = ["Agita", "Ingelvac", "Porcilis", "Suvaxyn"];
const GROUPS: [&str; 3] = ["vaccine", "insecticide", "antibiotic"];

/// Reads the vector straight out of the text: whitespace-separated numbers.
struct LiteralEmbedder;

impl Embedder for LiteralEmbedder {
    fn id(&self) -> &str {
        "literal"
    }

    fn dimension(&self) -> usize {
        DIM
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, StoreError> {
        let v: Vec<f64> = text.split_whitespace().map(|t| t.parse().unwrap()).collect();
        EmbeddingVector::new(v)
    }
}

#[derive(Clone)]
struct Doc {
    doc_id: String,
    vector: Vec<f64>,
    domain: &'static str,
    code: Option<&'static str>,
    names: Vec<String>,
    group: Option<&'static str>,
}

#[derive(Debug)]
enum Want {
    All,
    Domain(&'static str),
    Disease(&'static str),
    Names(Vec<&'static str>),
    Group(&'static str),
}

impl Want {
    fn expression(&self) -> FilterExpression {
        let f = FilterExpression::match_all();
        match self {
            Want::All => f,
            Want::Domain(d) => f.and(Clause::equals(FilterKey::Domain, *d)),
            Want::Disease(c) => f
                .and(Clause::equals(FilterKey::Domain, "disease"))
                .and(Clause::equals(FilterKey::DiseaseCode, *c)),
            Want::Names(ns) => f
                .and(Clause::equals(FilterKey::Domain, "vaccine"))
                .and(Clause::one_of(FilterKey::TradeNames, ns.iter().map(|n| n.to_uppercase()).collect())),
            Want::Group(g) => f.and(Clause::equals(FilterKey::Group, *g)),
        }
    }

    fn accepts(&self, d: &Doc) -> bool {
        match self {
            Want::All => true,
            Want::Domain(x) => d.domain == *x,
            Want::Disease(c) => d.domain == "disease" && d.code == Some(*c),
            Want::Names(ns) => {
                d.domain == "vaccine" && d.names.iter().any(|n| ns.iter().any(|w| n.to_lowercase() == w.to_lowercase()))
            }
            Want::Group(g) => d.group == Some(*g),
        }
    }
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    (dot / (na * nb)).clamp(-1.0, 1.0)
}

fn random_doc(rng: &mut ChaCha8Rng, i: usize, prior: &[Doc]) -> Doc {
    // Some exact duplicates to exercise tie-breaking.
    let vector = match prior.choose(rng) {
        Some(p) if rng.random_bool(0.1) => p.vector.clone(),
        _ => (0..DIM).map(|_| rng.random_range(-1.0..1.0)).collect(),
    };
    let domain = if rng.random_bool(0.5) { "disease" } else { "vaccine" };
    let names = if domain == "vaccine" {
        let mut v = Vec::new();
        for n in NAMES {
            if rng.random_bool(0.3) {
                v.push(if rng.random_bool(0.5) { n.to_lowercase() } else { n.to_string() });
            }
        }
        v
    } else {
        Vec::new()
    };
    Doc {
        doc_id: format!("doc-{:04}.pdf#p{}", i / 3, 1 + i % 3),
        vector,
        domain,
        code: (domain == "disease").then(|| *CODES.choose(rng).unwrap()),
        names,
        group: GROUPS.choose(rng).copied().filter(|_| rng.random_bool(0.7)),
    }
}

fn page(d: &Doc) -> PageInput {
    let (file, p) = d.doc_id.split_once("#p").unwrap();
    let mut m = DocumentMetadata::new(if d.domain == "disease" { Domain::Disease } else { Domain::Vaccine });
    m.disease_code = d.code.map(|c| DiseaseId::new(c).unwrap());
    m.trade_names = d.names.clone();
    m.group = d.group.map(String::from);
    PageInput {
        source_file: file.to_string(),
        page: p.parse().unwrap(),
        text: d.vector.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(" "),
        metadata: m,
    }
}

fn random_want(rng: &mut ChaCha8Rng) -> Want {
    match rng.random_range(0..5) {
        0 => Want::All,
        1 => Want::Domain(if rng.random_bool(0.5) { "disease" } else { "vaccine" }),
        2 => Want::Disease(CODES.choose(rng).unwrap()),
        3 => {
            let m = rng.random_range(1..=2);
            Want::Names(NAMES.choose_multiple(rng, m).copied().collect())
        }
        _ => Want::Group(GROUPS.choose(rng).unwrap()),
    }
}

pub fn oracle() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut queries = 0;
    let mut largest = 0;
    for c in 0..CORPORA {
        let n = rng.random_range(1..=1000);
        largest = largest.max(n);
        let mut docs = Vec::with_capacity(n);
        for i in 0..n {
            let d = random_doc(&mut rng, i, &docs);
            docs.push(d);
        }
        let store = KnowledgeStore::in_memory(Arc::new(LiteralEmbedder), ChunkPolicy::default()).unwrap();
        store.ingest(&docs.iter().map(page).collect::<Vec<_>>()).unwrap();
        assert_eq!(store.len(), n);

        for _ in 0..10 {
            queries += 1;
            let q: Vec<f64> = (0..DIM).map(|_| rng.random_range(-1.0..1.0)).collect();
            let want = random_want(&mut rng);
            let k = rng.random_range(1..=25);
            let got: Vec<(String, f64)> = store
                .search(&EmbeddingVector::new(q.clone()).unwrap(), &want.expression(), k)
                .unwrap()
                .into_iter()
                .map(|h| (h.record.doc_id, h.similarity))
                .collect();
            let mut expect: Vec<(String, f64)> = docs
                .iter()
                .filter(|d| want.accepts(d))
                .map(|d| (d.doc_id.clone(), cosine(&q, &d.vector)))
                .collect();
            expect.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
            expect.truncate(k);
            assert_eq!(got, expect, "corpus {c}, filter {want:?}, k {k}");
        }

        // Self-retrieval for chunks whose vector is unique in the corpus.
        for d in docs.iter().filter(|d| docs.iter().filter(|o| o.vector == d.vector).count() == 1).take(5) {
            let hits = store
                .search(&EmbeddingVector::new(d.vector.clone()).unwrap(), &FilterExpression::match_all(), 1)
                .unwrap();
            assert_eq!(hits[0].record.doc_id, d.doc_id, "corpus {c}: self-retrieval");
        }
    }
    format!("{CORPORA} corpora (largest {largest} chunks), {queries} filtered queries exact")
}
