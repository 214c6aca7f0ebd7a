use herdsense::dialogue::{
    finalize, transition, DialogueError, DialogueSession, DialogueState, Specificity, SymptomCategory,
    SymptomFact, MAX_EXCHANGES,
};

/// The transition table written out by hand: (state, answer, turns remain) -> next.
fn table(state: DialogueState, answer: Specificity, turns_remain: bool) -> DialogueState {
    use DialogueState::*;
    use Specificity::*;
    const ROWS: &[(DialogueState, Specificity, bool, DialogueState)] = &[
        (G, General, true, E), (G, External, true, E), (G, Specific, true, S), (G, MissingCrucial, true, G),
        (E, General, true, S), (E, External, true, S), (E, Specific, true, S), (E, MissingCrucial, true, E),
        (S, General, true, S), (S, External, true, S), (S, Specific, true, S), (S, MissingCrucial, true, G),
        (G, General, false, E), (G, External, false, E), (G, Specific, false, S), (G, MissingCrucial, false, G),
        (E, General, false, S), (E, External, false, S), (E, Specific, false, S), (E, MissingCrucial, false, E),
        (S, General, false, S), (S, External, false, S), (S, Specific, false, S), (S, MissingCrucial, false, S),
    ];
    ROWS.iter()
        .find(|(s, a, t, _)| *s == state && *a == answer && *t == turns_remain)
        .map(|r| r.3)
        .expect("table is total")
}

fn sequences(len: usize) -> Vec<Vec<Specificity>> {
    let mut out = vec![Vec::new()];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|s| {
                Specificity::ALL.iter().map(move |a| {
                    let mut n = s.clone();
                    n.push(*a);
                    n
                })
            })
            .collect();
    }
    out
}

pub fn enumeration() -> String {
    use DialogueState::*;
    for s in [G, E, S] {
        for a in Specificity::ALL {
            for t in [true, false] {
                assert_eq!(transition(s, a, t), table(s, a, t), "({s:?}, {a:?}, {t})");
            }
        }
    }

    let mut traces = 0;
    for start in [G, E, S] {
        for len in 0..=4 {
            for seq in sequences(len) {
                traces += 1;
                let mut session = DialogueSession::new();
                session.state = start;
                session.trace = vec![start];
                session.facts.push(SymptomFact {
                    category: SymptomCategory::ExternalSign,
                    attribute: "skin".into(),
                    value: "red body".into(),
                    source_turn: 0,
                });
                for (i, a) in seq.iter().enumerate() {
                    match session.step(*a) {
                        Ok(next) => {
                            let remain = next.exchanges_used < MAX_EXCHANGES;
                            assert_eq!(next.state, table(session.state, *a, remain), "{start:?} {seq:?}");
                            assert_eq!(next.exchanges_used, session.exchanges_used + 1);
                            assert!(next.facts.starts_with(&session.facts));
                            session = next;
                        }
                        Err(e) => {
                            assert_eq!(e, DialogueError::TurnLimitReached);
                            assert_eq!(i, MAX_EXCHANGES as usize, "{seq:?}");
                        }
                    }
                    assert!(session.exchanges_used <= MAX_EXCHANGES);
                }
                let first = finalize(&session, true).unwrap();
                assert_eq!(finalize(&session, true).unwrap(), first, "finalize idempotent");
                assert_eq!(first.truncated, session.exchanges_used == MAX_EXCHANGES);
                if session.ready_to_finalize() {
                    assert_eq!(finalize(&session, false).unwrap(), first);
                }
            }
        }
    }
    format!("24 table rows, {traces} traces, cap {MAX_EXCHANGES} never exceeded")
}
