use herdsense::fusion::Escalation;
use herdsense::gateway::egress_count;
use herdsense::router::QueryClass;
use herdsense::service::SessionLog;

use crate::common::{offline_engine, CONVERSATION};

fn transcript() -> (Vec<QueryClass>, String) {
    let engine = offline_engine(SessionLog::in_memory());
    let s = engine.create_session().unwrap();
    let responses: Vec<_> = CONVERSATION
        .iter()
        .map(|m| engine.post_message(&s.session_id, m).unwrap())
        .collect();
    let session = engine.get_session(&s.session_id).unwrap();

    let diag = &responses[4];
    let outcome = diag.outcome.as_ref().expect("diagnosis outcome");
    assert!(outcome.ood, "low confidence expected");
    assert_eq!(outcome.ranking[0].0.code(), "ASF");
    assert!(diag.reply.contains("There is a small chance of ASF."), "{}", diag.reply);
    let esc = diag.escalation.as_ref().expect("escalation");
    assert_eq!(esc.kind, Escalation::ExpertReview);
    assert!(esc.instructions.starts_with("Consult a vet."));

    let rec = responses[5].recommendation.as_ref().expect("recommendation");
    assert!(rec.citations.iter().any(|c| c.source_file == "ASF-2022.pdf"));
    assert!(responses[5].reply.contains("(ASF-2022.pdf)"));

    (
        session.class_sequence(),
        serde_json::to_string(&(&responses, &*session)).unwrap(),
    )
}

pub fn replay() -> String {
    let (classes, first) = transcript();
    let (_, second) = transcript();
    assert_eq!(classes, [QueryClass::G, QueryClass::T, QueryClass::D, QueryClass::K]);
    assert_eq!(first, second, "runs differ");
    assert_eq!(egress_count(), 0, "network egress");
    format!("classes G,T,D,K; {} transcript bytes identical across runs; no egress", first.len())
}
