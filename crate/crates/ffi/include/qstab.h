#ifndef QSTAB_H
#define QSTAB_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum QsStatus {
  QS_STATUS_OK = 0,
  QS_STATUS_NULL_POINTER = 1,
  QS_STATUS_INVALID_ARGUMENT = 2,
  // Malformed JSON or matrix shapes.
  QS_STATUS_PARSE = 3,
  QS_STATUS_NUMERICAL = 4,
  // No Lyapunov certificate found although the gain condition holds.
  QS_STATUS_INFEASIBLE = 5,
  // Requested quantity is absent for this verdict.
  QS_STATUS_UNAVAILABLE = 6,
  QS_STATUS_PANIC = 7,
} QsStatus;

typedef enum QsVerdict {
  QS_VERDICT_CERTIFIED = 0,
  QS_VERDICT_FAILED_HURWITZ = 1,
  QS_VERDICT_FAILED_SMALL_GAIN = 2,
} QsVerdict;

// Opaque certificate.
typedef struct QsCertificate QsCertificate;

// Opaque linear quantum system.
typedef struct QsSystem QsSystem;

// Constants of a certified run.
typedef struct QsConstants {
  double lambda_tilde;
  double lambda;
  double c;
  double c1;
  double c2;
  double c3;
} QsConstants;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer
// stays valid until the next qstab call on the same thread.
const char *qs_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *qs_version(void);

// Two-mode degenerate parametric amplifier with pump strength `chi`.
//
// # Safety
// `out` must be valid for writes.
enum QsStatus qs_opa_new(double kappa1, double kappa2, double chi, struct QsSystem **out);

// System from JSON with keys `m1, m2, n1, n2, e1, e2`, each a row-major
// array of `[re, im]` pairs.
//
// # Safety
// `json` must be a NUL-terminated string; `out` must be valid for writes.
enum QsStatus qs_system_from_json(const char *json, struct QsSystem **out);

// Number of modes `n`, inputs `m` and channels `p`.
//
// # Safety
// `sys` must come from this library; out pointers may be null to skip.
enum QsStatus qs_system_dims(const struct QsSystem *sys, size_t *n, size_t *m, size_t *p);

// # Safety
// `sys` must come from this library and not be used afterwards.
void qs_system_free(struct QsSystem *sys);

// H∞ norm of the reduced channel map.
//
// # Safety
// `sys` must come from this library; `out` must be valid for writes.
enum QsStatus qs_hinf_norm(const struct QsSystem *sys, double *out);

// Runs the certification pipeline. A Hurwitz or small-gain failure is still
// `QS_STATUS_OK` with the verdict recorded in the certificate.
//
// # Safety
// `sys` must come from this library; `out` must be valid for writes.
enum QsStatus qs_certify(const struct QsSystem *sys,
                         double gamma,
                         double delta1,
                         double delta2,
                         struct QsCertificate **out);

// # Safety
// `cert` must come from this library; `out` must be valid for writes.
enum QsStatus qs_certificate_verdict(const struct QsCertificate *cert, enum QsVerdict *out);

// `QS_STATUS_UNAVAILABLE` unless the verdict is certified.
//
// # Safety
// `cert` must come from this library; `out` must be valid for writes.
enum QsStatus qs_certificate_constants(const struct QsCertificate *cert, struct QsConstants *out);

// Spectral abscissa of the drift matrix.
//
// # Safety
// `cert` must come from this library; `out` must be valid for writes.
enum QsStatus qs_certificate_abscissa(const struct QsCertificate *cert, double *out);

// Certificate as JSON; release with [`qs_string_free`].
//
// # Safety
// `cert` must come from this library; `out` must be valid for writes.
enum QsStatus qs_certificate_to_json(const struct QsCertificate *cert, char **out);

// # Safety
// `cert` must come from this library and not be used afterwards.
void qs_certificate_free(struct QsCertificate *cert);

// # Safety
// `s` must be a string returned by this library, or null.
void qs_string_free(char *s);

// Closed-form H∞ norm of the amplifier, `max(2/κ1, 2/κ2)`.
//
// # Safety
// `out` must be valid for writes.
enum QsStatus qs_opa_hinf(double kappa1, double kappa2, double chi, double *out);

// Largest admissible `|z2|²` at a given `|z1|²` (0 outside the region).
//
// # Safety
// `out` must be valid for writes.
enum QsStatus qs_opa_region_cap(double kappa1,
                                double kappa2,
                                double chi,
                                double gamma,
                                double delta1,
                                double delta2,
                                double z1sq,
                                double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QSTAB_H */
