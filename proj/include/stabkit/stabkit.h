#ifndef STABKIT_STABKIT_H
#define STABKIT_STABKIT_H

/*
 * C interface to stabkit.
 *
 * Every fallible call returns an sk_status (SK_OK on success). On failure the
 * message is available from sk_last_error() on the calling thread until the
 * next call into the library from that thread. Handles are opaque; release
 * them with the matching *_free function (passing NULL is allowed).
 */

#include <stddef.h>

#if defined(_WIN32)
#define SK_API __declspec(dllimport)
#elif defined(__GNUC__)
#define SK_API __attribute__((visibility("default")))
#else
#define SK_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum sk_status {
  SK_OK = 0,
  SK_ERR_SYNTAX = 1,
  SK_ERR_UNKNOWN_IDENTIFIER = 2,
  SK_ERR_ARITY = 3,
  SK_ERR_DIMENSION = 4,
  SK_ERR_DOMAIN = 5,
  SK_ERR_FINITE_ESCAPE = 6,
  SK_ERR_STEPS_EXHAUSTED = 7,
  SK_ERR_STEP_UNDERFLOW = 8,
  SK_ERR_NO_CROSSING = 9,
  SK_ERR_TANGENTIAL = 10,
  SK_ERR_GRADIENT_SINGULAR = 11,
  SK_ERR_NON_CONVERGENCE = 12,
  SK_ERR_PRECONDITION = 13,
  SK_ERR_RESIDUAL = 14,
  SK_ERR_CONFIG = 15,
  SK_ERR_INVALID_ARGUMENT = 16,
  SK_ERR_ENDPOINT_MISMATCH = 17,
  SK_ERR_INTERNAL = 99
} sk_status;

typedef enum sk_verdict {
  SK_VERDICT_PASS = 0,
  SK_VERDICT_FAIL = 2,
  SK_VERDICT_INCONCLUSIVE = 3
} sk_verdict;

typedef struct sk_field sk_field;
typedef struct sk_report sk_report;

SK_API const char* sk_version(void);
SK_API const char* sk_status_name(int status);
SK_API const char* sk_last_error(void);
/* JSON pointer of the offending config member after SK_ERR_CONFIG, else "". */
SK_API const char* sk_last_error_pointer(void);

/* ---- fields ------------------------------------------------------------ */

/* Parses n component expressions in x1..xn. Parameter names/values may be
 * NULL when n_params is 0. */
SK_API sk_status sk_field_parse(const char* const* components, size_t n, const char* const* param_names,
                                const double* param_values, size_t n_params, sk_field** out);
SK_API size_t sk_field_dim(const sk_field* field);
SK_API sk_status sk_field_eval(const sk_field* field, const double* x, double* out);
/* Row-major n*n Jacobian. */
SK_API sk_status sk_field_jacobian(const sk_field* field, const double* x, double* out);
/* Time-t flow map with default integrator settings. */
SK_API sk_status sk_field_flow(const sk_field* field, const double* x0, double t, double* out);
/* Brouwer degree of F/|F| on the sphere of `radius` around `center` (n <= 3). */
SK_API sk_status sk_field_degree(const sk_field* field, const double* center, double radius, unsigned resolution,
                                 long* value, double* raw);
SK_API void sk_field_free(sk_field* field);

/* ---- commands ---------------------------------------------------------- */

/* Runs one command from a JSON request:
 *   {"command": "...", "seed": 0, "threads": 1, "system": {...},
 *    "target": {...}, "family": {...}, "options": {...}, "points": [[...]]}
 * On success *out holds the report. */
SK_API sk_status sk_run_command(const char* request_json, sk_report** out);
SK_API const char* sk_report_json(const sk_report* report);
/* Dense table produced by the command, or "" when there is none. */
SK_API const char* sk_report_csv(const sk_report* report);
SK_API sk_verdict sk_report_verdict(const sk_report* report);
SK_API void sk_report_free(sk_report* report);

#ifdef __cplusplus
}
#endif

#endif /* STABKIT_STABKIT_H */
