#ifndef OEP_OEP_H
#define OEP_OEP_H

/* C interface of the exercise recognition library. Every call returns an
 * oep_status; on failure oep_last_error() describes the problem. Strings
 * returned through char** are owned by the caller and released with
 * oep_string_free. Arguments named config_json take a JSON run configuration
 * or NULL for defaults. */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define OEP_API __declspec(dllexport)
#else
#define OEP_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum oep_status {
  OEP_OK = 0,
  OEP_ERR_PARAMETER = 1,
  OEP_ERR_DATA = 2,
  OEP_ERR_RANGE = 3,
  OEP_ERR_TRAINING = 4,
  OEP_ERR_CONFIG = 5,
  OEP_ERR_IO = 6,
  OEP_ERR_VERSION = 7,
  OEP_ERR_INTEGRITY = 8,
  OEP_ERR_INTERNAL = 9
} oep_status;

typedef struct oep_session oep_session;
typedef struct oep_bundle oep_bundle;
typedef struct oep_timeline oep_timeline;

/* Lower-case category name, e.g. "data" or "integrity". */
OEP_API const char* oep_status_name(oep_status status);
/* Message of the last failed call on this thread; "" when none. */
OEP_API const char* oep_last_error(void);
OEP_API void oep_string_free(char* s);

/* Validates a configuration and returns it with every default filled in. */
OEP_API oep_status oep_config_resolve(const char* config_json, char** resolved_json);

/* Synthetic session; `seed` alone determines the output. */
OEP_API oep_status oep_session_synthesize(uint64_t seed, const char* subject_id, int hard, int home,
                                          double sample_rate_hz, oep_session** out);
/* Reads signal.csv, subject.txt and, when present, annotations.csv. */
OEP_API oep_status oep_session_load(const char* dir, oep_session** out);
OEP_API oep_status oep_session_save(const oep_session* session, const char* dir);
OEP_API const char* oep_session_id(const oep_session* session);
OEP_API void oep_session_free(oep_session* session);

/* Feature CSV of one session; stage is 1 or 2. */
OEP_API oep_status oep_features_csv(const oep_session* session, const char* config_json, int stage, char** csv);

OEP_API oep_status oep_train(const oep_session* const* sessions, size_t n_sessions, const char* config_json,
                             oep_bundle** out, char** summary_json);
OEP_API oep_status oep_bundle_save(const oep_bundle* bundle, const char* path);
OEP_API oep_status oep_bundle_load(const char* path, oep_bundle** out);
OEP_API void oep_bundle_free(oep_bundle* bundle);

/* Runs the cascade. `stage1` receives the smoothed stage-1 timeline and
 * `activity` the final per-sample activity timeline; either may be NULL. */
OEP_API oep_status oep_predict(const oep_session* session, const oep_bundle* bundle, oep_timeline** stage1,
                               oep_timeline** activity, int* stage2_skipped);
OEP_API oep_status oep_timeline_save(const oep_timeline* timeline, const char* path);
OEP_API oep_status oep_timeline_load(const char* path, oep_timeline** out);
OEP_API void oep_timeline_free(oep_timeline* timeline);

/* Scores a timeline against annotations, read from a CSV file or taken from a
 * session. */
OEP_API oep_status oep_evaluate(const oep_timeline* prediction, const char* annotations_path,
                                const char* config_json, char** report_json, char** report_csv);
OEP_API oep_status oep_evaluate_session(const oep_timeline* prediction, const oep_session* truth,
                                        const char* config_json, char** report_json, char** report_csv);

/* Nested leave-one-subject-out evaluation of the cascade. */
OEP_API oep_status oep_cv(const oep_session* const* sessions, size_t n_sessions, const char* config_json,
                          int stage1_only, char** result_json, char** summary_csv);

#ifdef __cplusplus
}
#endif

#endif
