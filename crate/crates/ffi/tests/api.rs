use std::ffi::{c_char, CStr, CString};
use std::path::{Path, PathBuf};
use std::ptr;

use herdsense_ffi::*;
use serde_json::Value;

fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn take(p: *mut c_char) -> Value {
    assert!(!p.is_null());
    let v = serde_json::from_str(unsafe { CStr::from_ptr(p) }.to_str().unwrap()).unwrap();
    unsafe { hs_string_free(p) };
    v
}

fn last_error() -> String {
    let p = hs_last_error();
    assert!(!p.is_null(), "no error recorded");
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

struct Fixture {
    _dir: tempfile::TempDir,
    engine: *mut HsEngine,
}

impl Drop for Fixture {
    fn drop(&mut self) {
        unsafe { hs_engine_free(self.engine) };
    }
}

fn engine() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let toml = format!(
        "seed = 7\n[store]\npath = {:?}\ndimension = 256\n[backend]\nkind = \"offline\"\n",
        dir.path().join("store.hs").display().to_string()
    );
    let mut engine = ptr::null_mut();
    assert_eq!(unsafe { hs_engine_from_toml(c(&toml).as_ptr(), &mut engine) }, HsStatus::Ok);
    let corpus = c(repo_root().join("fixtures/demo/corpus.jsonl").to_str().unwrap());
    let mut chunks = 0usize;
    assert_eq!(unsafe { hs_ingest(engine, corpus.as_ptr(), &mut chunks) }, HsStatus::Ok);
    assert!(chunks > 0);
    Fixture { _dir: dir, engine }
}

#[test]
fn conversation_through_the_c_abi() {
    let f = engine();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { hs_session_create(f.engine, &mut out) }, HsStatus::Ok);
    let id = take(out)["session_id"].as_str().unwrap().to_string();

    let messages = [
        "Hello! What can be done?",
        "Many pigs received from the source have died.",
        "Pigs have red bodies, purple ears..,",
        "No extra information is available.",
        "Yes, that's accurate.",
        "What samples are used for ASF testing?",
    ];
    let mut classes = Vec::new();
    let mut last = Value::Null;
    for m in messages {
        assert_eq!(
            unsafe { hs_post_message(f.engine, c(&id).as_ptr(), c(m).as_ptr(), &mut out) },
            HsStatus::Ok,
            "{m}"
        );
        last = take(out);
        classes.push(last["class"].as_str().unwrap().to_string());
    }
    assert_eq!(classes, ["G", "T", "D", "D", "D", "K"]);
    assert!(last["reply"].as_str().unwrap().contains("ASF-2022.pdf"));

    assert_eq!(unsafe { hs_session_get(f.engine, c(&id).as_ptr(), &mut out) }, HsStatus::Ok);
    assert_eq!(take(out)["turns"].as_array().unwrap().len(), 12);

    assert_eq!(unsafe { hs_health(f.engine, &mut out) }, HsStatus::Ok);
    let health = take(out);
    assert_eq!(health["sessions"], 1);
    assert!(health["documents"].as_u64().unwrap() > 0);
}

#[test]
fn classify_and_recommend() {
    let f = engine();
    let mut out = ptr::null_mut();
    let req = c(r#"{"query":"what vaccine protects against PRRS?"}"#);
    assert_eq!(unsafe { hs_classify(f.engine, req.as_ptr(), &mut out) }, HsStatus::Ok);
    let r = take(out);
    assert_eq!(r["chosen"], "K");
    let total: f64 = r["probabilities"].as_object().unwrap().values().map(|v| v.as_f64().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-9);

    let req = c(r#"{"diagnosis":"ASF","query":"ASF testing"}"#);
    assert_eq!(unsafe { hs_recommend(f.engine, req.as_ptr(), &mut out) }, HsStatus::Ok);
    let r = take(out);
    assert!(r["citations"].as_array().unwrap().iter().all(|c| c["source_file"] == "ASF-2022.pdf"));
}

#[test]
fn error_codes_and_messages() {
    let f = engine();
    let mut out = ptr::null_mut();

    assert_eq!(
        unsafe { hs_post_message(f.engine, c("s-missing").as_ptr(), c("hi").as_ptr(), &mut out) },
        HsStatus::UnknownSession
    );
    assert!(out.is_null());
    assert!(last_error().contains("s-missing"));

    assert_eq!(unsafe { hs_health(ptr::null(), &mut out) }, HsStatus::NullArgument);
    assert_eq!(unsafe { hs_session_create(f.engine, ptr::null_mut()) }, HsStatus::NullArgument);

    let bad = [0xffu8, 0xfe, 0];
    assert_eq!(
        unsafe { hs_classify(f.engine, bad.as_ptr() as *const c_char, &mut out) },
        HsStatus::InvalidUtf8
    );
    assert_eq!(
        unsafe { hs_classify(f.engine, c(r#"{"query":"x","extra":1}"#).as_ptr(), &mut out) },
        HsStatus::InvalidRequest
    );
    assert!(last_error().contains("extra"));
    assert_eq!(
        unsafe { hs_recommend(f.engine, c(r#"{"query":"   "}"#).as_ptr(), &mut out) },
        HsStatus::InvalidRequest
    );

    assert_eq!(unsafe { hs_health(f.engine, &mut out) }, HsStatus::Ok);
    take(out);
    assert!(hs_last_error().is_null(), "success clears the error");

    let mut engine = ptr::null_mut();
    assert_eq!(unsafe { hs_engine_from_toml(c("listen = 3").as_ptr(), &mut engine) }, HsStatus::Config);
    assert!(engine.is_null());
    assert_eq!(
        unsafe { hs_engine_open(c("/nonexistent/config.toml").as_ptr(), &mut engine) },
        HsStatus::Config
    );
    unsafe { hs_engine_free(ptr::null_mut()) };
    unsafe { hs_string_free(ptr::null_mut()) };
}

#[test]
fn header_declares_the_exported_api() {
    let header = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/herdsense.h")).unwrap();
    for name in [
        "typedef struct HsEngine HsEngine;",
        "HS_STATUS_UNKNOWN_SESSION = 4",
        "hs_engine_open(",
        "hs_engine_from_toml(",
        "hs_engine_free(",
        "hs_ingest(",
        "hs_session_create(",
        "hs_session_get(",
        "hs_post_message(",
        "hs_classify(",
        "hs_recommend(",
        "hs_health(",
        "hs_last_error(",
        "hs_string_free(",
    ] {
        assert!(header.contains(name), "missing {name}");
    }
}
