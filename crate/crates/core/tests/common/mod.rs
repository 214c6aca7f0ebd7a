#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use herdsense::clock::ManualClock;
use herdsense::gateway::{BackoffPolicy, Gateway, OfflineBackend};
use herdsense::service::{Engine, EngineOptions, SessionLog};
use herdsense::store::{load_corpus, ChunkPolicy, HashingEmbedder, KnowledgeStore};

pub fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(rel)
}

pub const CONVERSATION: [&str; 6] = [
    "Hello! What can be done?",
    "Many pigs received from the source have died.",
    "Pigs have red bodies, purple ears..,",
    "No extra information is available.",
    "Yes, that's accurate.",
    "What samples are used for ASF testing?",
];

pub fn demo_store() -> Arc<KnowledgeStore> {
    let store = KnowledgeStore::in_memory(Arc::new(HashingEmbedder::new(256).unwrap()), ChunkPolicy::default())
        .unwrap();
    store.ingest(&load_corpus(&fixture("demo/corpus.jsonl")).unwrap()).unwrap();
    Arc::new(store)
}

pub fn offline_gateway(clock: Arc<ManualClock>) -> Arc<Gateway> {
    let gw = Gateway::new(clock, BackoffPolicy::default());
    gw.register_backend(Arc::new(OfflineBackend::default())).unwrap();
    Arc::new(gw)
}

pub fn offline_engine(log: SessionLog) -> Engine {
    let clock = Arc::new(ManualClock::new(1_700_000_000_000));
    Engine::new(offline_gateway(clock), demo_store(), log, EngineOptions { seed: 7, ..Default::default() }).unwrap()
}
