use std::sync::Arc;
use std::time::Duration;

use herdsense::clock::ManualClock;
use herdsense::gateway::{BackoffPolicy, Gateway, GatewayError, ModelRequest, Purpose, ScriptedBackend};

pub fn contract() -> String {
    let policy = BackoffPolicy::default();
    let d = policy.base_delay;
    for m in 0..=5u32 {
        let clock = Arc::new(ManualClock::new(0));
        let gw = Gateway::new(clock.clone(), policy);
        let backend = Arc::new(
            ScriptedBackend::new("mock")
                .with_fixture("ping", "pong")
                .with_failures(m),
        );
        gw.register_backend(backend.clone()).unwrap();
        let req = ModelRequest::new(Purpose::Generate, "ping").unwrap();
        let result = gw.call(&req);

        let expected_sleeps: Vec<Duration> = (0..m.min(4)).map(|i| d * 2u32.pow(i)).collect();
        assert_eq!(clock.sleeps(), expected_sleeps, "m={m}");
        if m < 5 {
            let r = result.unwrap();
            assert_eq!(r.attempts, m + 1, "m={m}");
            assert_eq!(r.text, "pong");
        } else {
            match result {
                Err(GatewayError::RetriesExhausted(errors)) => assert_eq!(errors.len(), 5),
                other => panic!("m=5: {other:?}"),
            }
        }
        assert_eq!(backend.calls(), u64::from((m + 1).min(5)), "m={m}");
    }
    format!("m=0..5 exact; delays {:?}", [d, d * 2, d * 4, d * 8])
}
