//! C ABI over the conversational engine.
//!
//! Every function returns an [`HsStatus`]. Results come back as JSON in
//! strings the library allocates; release them with [`hs_string_free`].
//! On failure, [`hs_last_error`] describes the most recent error on the
//! calling thread.
//!
//! An `HsEngine` may be shared between threads. It must not be used after
//! [`hs_engine_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::sync::Arc;

use herdsense::clock::SystemClock;
use herdsense::history::Turn;
use herdsense::service::{ApiConfig, Engine, ServiceError};
use herdsense::store::load_corpus;
use serde::Deserialize;

/// Opaque engine handle.
pub struct HsEngine {
    engine: Engine,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HsStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    InvalidRequest = 3,
    UnknownSession = 4,
    StorageFailure = 5,
    Config = 6,
    Downstream = 7,
    Panic = 8,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(HsStatus, String);

impl From<ServiceError> for Failure {
    fn from(e: ServiceError) -> Self {
        let status = match e {
            ServiceError::UnknownSession(_) => HsStatus::UnknownSession,
            ServiceError::InvalidRequest(_) => HsStatus::InvalidRequest,
            ServiceError::StorageFailure(_) => HsStatus::StorageFailure,
            ServiceError::Config(_) => HsStatus::Config,
            ServiceError::Downstream(_) => HsStatus::Downstream,
        };
        Failure(status, e.to_string())
    }
}

fn set_error(msg: String) {
    // Interior NULs would truncate the message on the C side anyway.
    let msg = CString::new(msg.replace('\0', " ")).expect("NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

/// Runs `f`, turning errors and panics into a status plus the thread's
/// last-error message.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> HsStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HsStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "internal panic".into());
            set_error(msg);
            HsStatus::Panic
        }
    }
}

unsafe fn arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(HsStatus::NullArgument, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Failure(HsStatus::InvalidUtf8, format!("{name}: {e}")))
}

unsafe fn engine_ref<'a>(h: *const HsEngine) -> Result<&'a Engine, Failure> {
    h.as_ref()
        .map(|h| &h.engine)
        .ok_or_else(|| Failure(HsStatus::NullArgument, "engine is null".into()))
}

unsafe fn write_json<T: serde::Serialize>(out: *mut *mut c_char, value: &T) -> Result<(), Failure> {
    let text = serde_json::to_string(value).map_err(|e| Failure(HsStatus::Panic, e.to_string()))?;
    *out = CString::new(text).expect("JSON has no NULs").into_raw();
    Ok(())
}

fn check_out<T>(out: *mut *mut T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure(HsStatus::NullArgument, "output pointer is null".into()));
    }
    unsafe { *out = ptr::null_mut() };
    Ok(())
}

fn parse<'a, T: Deserialize<'a>>(text: &'a str) -> Result<T, Failure> {
    serde_json::from_str(text).map_err(|e| Failure(HsStatus::InvalidRequest, e.to_string()))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ClassifyRequest {
    query: String,
    #[serde(default)]
    history: Vec<Turn>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RecommendRequest {
    #[serde(default)]
    diagnosis: Option<String>,
    query: String,
    #[serde(default)]
    history: Vec<Turn>,
}

fn open(config: ApiConfig, out: *mut *mut HsEngine) -> Result<(), Failure> {
    let engine = Engine::from_config(&config, Arc::new(SystemClock))?;
    unsafe { *out = Box::into_raw(Box::new(HsEngine { engine })) };
    Ok(())
}

/// Opens an engine from a TOML config file.
///
/// # Safety
/// `config_path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hs_engine_open(config_path: *const c_char, out: *mut *mut HsEngine) -> HsStatus {
    guard(|| {
        check_out(out)?;
        let path = arg(config_path, "config_path")?;
        open(ApiConfig::load(Path::new(path))?, out)
    })
}

/// Opens an engine from TOML config text.
///
/// # Safety
/// `config_toml` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hs_engine_from_toml(config_toml: *const c_char, out: *mut *mut HsEngine) -> HsStatus {
    guard(|| {
        check_out(out)?;
        open(ApiConfig::from_toml(arg(config_toml, "config_toml")?)?, out)
    })
}

/// Releases an engine. Null is ignored.
///
/// # Safety
/// `engine` must come from `hs_engine_open` or `hs_engine_from_toml` and not
/// have been freed.
#[no_mangle]
pub unsafe extern "C" fn hs_engine_free(engine: *mut HsEngine) {
    if !engine.is_null() {
        drop(Box::from_raw(engine));
    }
}

/// Loads a JSONL page corpus into the engine's store and writes the number
/// of chunks produced to `out_chunks`.
///
/// # Safety
/// Pointers must be valid; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn hs_ingest(
    engine: *const HsEngine,
    corpus_path: *const c_char,
    out_chunks: *mut usize,
) -> HsStatus {
    guard(|| {
        let e = engine_ref(engine)?;
        let path = arg(corpus_path, "corpus_path")?;
        if out_chunks.is_null() {
            return Err(Failure(HsStatus::NullArgument, "out_chunks is null".into()));
        }
        let storage = |err: herdsense::store::StoreError| Failure(HsStatus::StorageFailure, err.to_string());
        let pages = load_corpus(Path::new(path)).map_err(storage)?;
        *out_chunks = e.store().ingest(&pages).map_err(storage)?;
        Ok(())
    })
}

/// Creates a session. `out_json` receives the session record.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn hs_session_create(engine: *const HsEngine, out_json: *mut *mut c_char) -> HsStatus {
    guard(|| {
        check_out(out_json)?;
        let s = engine_ref(engine)?.create_session()?;
        write_json(out_json, &s)
    })
}

/// Writes the full session record (turns, events, state) as JSON.
///
/// # Safety
/// Pointers must be valid; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn hs_session_get(
    engine: *const HsEngine,
    session_id: *const c_char,
    out_json: *mut *mut c_char,
) -> HsStatus {
    guard(|| {
        check_out(out_json)?;
        let s = engine_ref(engine)?.get_session(arg(session_id, "session_id")?)?;
        write_json(out_json, &*s)
    })
}

/// Posts one user message and writes the turn response as JSON.
///
/// # Safety
/// Pointers must be valid; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn hs_post_message(
    engine: *const HsEngine,
    session_id: *const c_char,
    text: *const c_char,
    out_json: *mut *mut c_char,
) -> HsStatus {
    guard(|| {
        check_out(out_json)?;
        let e = engine_ref(engine)?;
        let r = e.post_message(arg(session_id, "session_id")?, arg(text, "text")?)?;
        write_json(out_json, &r)
    })
}

/// Classifies a query. `request_json` is `{"query": ..., "history": [...]}`.
///
/// # Safety
/// Pointers must be valid; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn hs_classify(
    engine: *const HsEngine,
    request_json: *const c_char,
    out_json: *mut *mut c_char,
) -> HsStatus {
    guard(|| {
        check_out(out_json)?;
        let e = engine_ref(engine)?;
        let req: ClassifyRequest = parse(arg(request_json, "request_json")?)?;
        write_json(out_json, &e.classify(&req.query, &req.history)?)
    })
}

/// Runs retrieval and answer generation. `request_json` is
/// `{"diagnosis": "ASF"?, "query": ..., "history": [...]}`.
///
/// # Safety
/// Pointers must be valid; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn hs_recommend(
    engine: *const HsEngine,
    request_json: *const c_char,
    out_json: *mut *mut c_char,
) -> HsStatus {
    guard(|| {
        check_out(out_json)?;
        let e = engine_ref(engine)?;
        let req: RecommendRequest = parse(arg(request_json, "request_json")?)?;
        write_json(out_json, &e.recommend(req.diagnosis.as_deref(), &req.query, &req.history)?)
    })
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn hs_health(engine: *const HsEngine, out_json: *mut *mut c_char) -> HsStatus {
    guard(|| {
        check_out(out_json)?;
        write_json(out_json, &engine_ref(engine)?.health())
    })
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next `hs_` call on the same thread.
#[no_mangle]
pub extern "C" fn hs_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn hs_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
