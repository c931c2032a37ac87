// SPDX-License-Identifier: Apache-2.0

#ifndef S3DIFF_H
#define S3DIFF_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum S3Status {
  S3_STATUS_OK = 0,
  S3_STATUS_NULL_ARGUMENT = 1,
  S3_STATUS_INVALID_UTF8 = 2,
  S3_STATUS_PARSE_ERROR = 3,
  S3_STATUS_NOT_FOUND = 4,
  S3_STATUS_EXEC_ERROR = 5,
  S3_STATUS_SERIALIZE_ERROR = 6,
  S3_STATUS_PANIC = 7,
} S3Status;

/**
 * A parsed mini-IR module.
 */
typedef struct S3Module S3Module;

/**
 * The score of one function pair.
 */
typedef struct S3Report S3Report;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Last error message of this thread, or null. The pointer stays valid
 * until the next library call on the same thread.
 */
const char *s3_last_error(void);

/**
 * Library version as a static string.
 */
const char *s3_version(void);

/**
 * Parses and validates mini-IR text into `*out`.
 *
 * # Safety
 * `source` is a NUL-terminated string; `out` is valid for a pointer write.
 */
enum S3Status s3_module_parse(const char *source, struct S3Module **out);

/**
 * Number of functions in a module; 0 for null.
 *
 * # Safety
 * `module` is null or a live handle from [`s3_module_parse`].
 */
size_t s3_module_function_count(const struct S3Module *module);

/**
 * # Safety
 * `module` is null or a handle from [`s3_module_parse`] not yet freed.
 */
void s3_module_free(struct S3Module *module);

/**
 * Executes `name` in both modules with default limits and scores the pair.
 *
 * # Safety
 * Both modules are live handles, `name` is NUL-terminated and `out` is
 * valid for a pointer write.
 */
enum S3Status s3_score_pair(const struct S3Module *c_module,
                            const struct S3Module *rust_module,
                            const char *name,
                            struct S3Report **out);

/**
 * Summed distance over all outputs; `u32::MAX` for null.
 *
 * # Safety
 * `report` is null or a live handle from [`s3_score_pair`].
 */
uint32_t s3_report_distance(const struct S3Report *report);

/**
 * Whether every output is equivalent; false for null.
 *
 * # Safety
 * `report` is null or a live handle from [`s3_score_pair`].
 */
bool s3_report_equivalent(const struct S3Report *report);

/**
 * Writes the report as JSON to `*out`; free it with [`s3_string_free`].
 *
 * # Safety
 * `report` is a live handle and `out` is valid for a pointer write.
 */
enum S3Status s3_report_json(const struct S3Report *report, char **out);

/**
 * # Safety
 * `report` is null or a handle from [`s3_score_pair`] not yet freed.
 */
void s3_report_free(struct S3Report *report);

/**
 * Executes `name` and writes its path summaries in KQuery form, one
 * query per line, to `*out`; free it with [`s3_string_free`].
 *
 * # Safety
 * `module` is a live handle, `name` is NUL-terminated and `out` is valid
 * for a pointer write.
 */
enum S3Status s3_module_kquery(const struct S3Module *module, const char *name, char **out);

/**
 * Releases a string returned by this library; null is ignored.
 *
 * # Safety
 * `s` is null or a string from this library not yet freed.
 */
void s3_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* S3DIFF_H */
