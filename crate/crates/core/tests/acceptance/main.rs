//! Acceptance criteria. Each criterion runs in isolation and prints one
//! PASS/FAIL line; the process exits non-zero if any fails.

#[path = "../common/mod.rs"]
mod common;

mod backoff;
mod dialogue;
mod e2e;
mod fusion;
mod retrieval;
mod stats;
mod tables;

use std::panic::{self, AssertUnwindSafe};
use std::time::Instant;

type Criterion = (&'static str, fn() -> String);

const CRITERIA: &[Criterion] = &[
    ("confusion-matrix metrics (query classification)", tables::classification),
    ("top-2 diagnosis accuracy (three models, two splits)", tables::diagnosis),
    ("rubric average row (baseline vs ours)", tables::rubric),
    ("paired t-test and bootstrap equivalence", stats::t_tests),
    ("fusion property suite", fusion::properties),
    ("dialogue state machine enumeration", dialogue::enumeration),
    ("backoff contract", backoff::contract),
    ("retrieval oracle", retrieval::oracle),
    ("end-to-end conversation replay", e2e::replay),
];

fn message(payload: &Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = payload.downcast_ref::<String>() {
        s.clone()
    } else if let Some(s) = payload.downcast_ref::<&str>() {
        s.to_string()
    } else {
        "panic".into()
    }
}

fn main() {
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, run) in CRITERIA {
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(run));
        let ms = start.elapsed().as_millis();
        match outcome {
            Ok(detail) => println!("PASS  {name} ({ms} ms): {detail}"),
            Err(p) => {
                failed += 1;
                println!("FAIL  {name} ({ms} ms): {}", message(&p));
            }
        }
    }
    let _ = panic::take_hook();
    println!("{} of {} criteria passed", CRITERIA.len() - failed, CRITERIA.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
