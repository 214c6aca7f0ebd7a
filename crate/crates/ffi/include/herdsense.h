#ifndef HERDSENSE_H
#define HERDSENSE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum HsStatus {
  HS_STATUS_OK = 0,
  HS_STATUS_NULL_ARGUMENT = 1,
  HS_STATUS_INVALID_UTF8 = 2,
  HS_STATUS_INVALID_REQUEST = 3,
  HS_STATUS_UNKNOWN_SESSION = 4,
  HS_STATUS_STORAGE_FAILURE = 5,
  HS_STATUS_CONFIG = 6,
  HS_STATUS_DOWNSTREAM = 7,
  HS_STATUS_PANIC = 8,
} HsStatus;

/**
 * Opaque engine handle.
 */
typedef struct HsEngine HsEngine;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Opens an engine from a TOML config file.
 *
 * # Safety
 * `config_path` must be a NUL-terminated string; `out` must be writable.
 */
enum HsStatus hs_engine_open(const char *config_path, struct HsEngine **out);

/**
 * Opens an engine from TOML config text.
 *
 * # Safety
 * `config_toml` must be a NUL-terminated string; `out` must be writable.
 */
enum HsStatus hs_engine_from_toml(const char *config_toml, struct HsEngine **out);

/**
 * Releases an engine. Null is ignored.
 *
 * # Safety
 * `engine` must come from `hs_engine_open` or `hs_engine_from_toml` and not
 * have been freed.
 */
void hs_engine_free(struct HsEngine *engine);

/**
 * Loads a JSONL page corpus into the engine's store and writes the number
 * of chunks produced to `out_chunks`.
 *
 * # Safety
 * Pointers must be valid; strings NUL-terminated.
 */
enum HsStatus hs_ingest(const struct HsEngine *engine, const char *corpus_path, size_t *out_chunks);

/**
 * Creates a session. `out_json` receives the session record.
 *
 * # Safety
 * Pointers must be valid.
 */
enum HsStatus hs_session_create(const struct HsEngine *engine, char **out_json);

/**
 * Writes the full session record (turns, events, state) as JSON.
 *
 * # Safety
 * Pointers must be valid; strings NUL-terminated.
 */
enum HsStatus hs_session_get(const struct HsEngine *engine,
                             const char *session_id,
                             char **out_json);

/**
 * Posts one user message and writes the turn response as JSON.
 *
 * # Safety
 * Pointers must be valid; strings NUL-terminated.
 */
enum HsStatus hs_post_message(const struct HsEngine *engine,
                              const char *session_id,
                              const char *text,
                              char **out_json);

/**
 * Classifies a query. `request_json` is `{"query": ..., "history": [...]}`.
 *
 * # Safety
 * Pointers must be valid; strings NUL-terminated.
 */
enum HsStatus hs_classify(const struct HsEngine *engine, const char *request_json, char **out_json);

/**
 * Runs retrieval and answer generation. `request_json` is
 * `{"diagnosis": "ASF"?, "query": ..., "history": [...]}`.
 *
 * # Safety
 * Pointers must be valid; strings NUL-terminated.
 */
enum HsStatus hs_recommend(const struct HsEngine *engine,
                           const char *request_json,
                           char **out_json);

/**
 * # Safety
 * Pointers must be valid.
 */
enum HsStatus hs_health(const struct HsEngine *engine, char **out_json);

/**
 * Message for the last failed call on this thread, or null. The pointer
 * stays valid until the next `hs_` call on the same thread.
 */
const char *hs_last_error(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void hs_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HERDSENSE_H */
