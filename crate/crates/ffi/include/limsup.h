#ifndef LIMSUP_H
#define LIMSUP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum LimsupStatus {
  LIMSUP_STATUS_OK = 0,
  LIMSUP_STATUS_NULL_POINTER = 1,
  LIMSUP_STATUS_INVALID_ARGUMENT = 2,
  LIMSUP_STATUS_DIMENSION_MISMATCH = 3,
  LIMSUP_STATUS_BUDGET = 4,
  LIMSUP_STATUS_REFUSED = 5,
  LIMSUP_STATUS_PARSE = 6,
  LIMSUP_STATUS_IO = 7,
  // A string argument was not valid UTF-8.
  LIMSUP_STATUS_UTF8 = 8,
  // The output buffer is too small; the required size was written.
  LIMSUP_STATUS_BUFFER_TOO_SMALL = 9,
  // An internal panic was caught at the boundary.
  LIMSUP_STATUS_PANIC = 10,
} LimsupStatus;

// Opaque extraction result.
typedef struct LimsupExtraction LimsupExtraction;

// Opaque self-similar measure.
typedef struct LimsupMeasure LimsupMeasure;

// Opaque ball sequence.
typedef struct LimsupSequence LimsupSequence;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the last error message of this thread into `buf` (nul-terminated)
// and returns its length without the terminator, or -1 when none is set.
// The message is truncated to `cap - 1` bytes when `buf` is too small.
//
// # Safety
// `buf` must be null or point to `cap` writable bytes.
int64_t limsup_last_error(char *buf, uintptr_t cap);

// Creates an empty sequence of balls in `R^dim`.
//
// # Safety
// `out` must be a valid pointer.
enum LimsupStatus limsup_sequence_new(uintptr_t dim, struct LimsupSequence **out);

// Parses the text format with one `d c_1 .. c_d r` line per ball.
//
// # Safety
// `text` must be a nul-terminated string and `out` a valid pointer.
enum LimsupStatus limsup_sequence_parse(const char *text, struct LimsupSequence **out);

// The Farey sequence of balls `B(p/q, 1/q^2)` for `q <= q_max`.
//
// # Safety
// `out` must be a valid pointer.
enum LimsupStatus limsup_sequence_farey(uint64_t q_max, struct LimsupSequence **out);

// Appends a ball; `center` holds `dim` coordinates.
//
// # Safety
// `seq` must be a live handle and `center` must point to `dim` doubles.
enum LimsupStatus limsup_sequence_push(struct LimsupSequence *seq,
                                       const double *center,
                                       uintptr_t dim,
                                       double radius);

// Number of balls, or 0 for a null handle.
//
// # Safety
// `seq` must be null or a live handle.
uintptr_t limsup_sequence_len(const struct LimsupSequence *seq);

// Ambient dimension, or 0 for a null handle.
//
// # Safety
// `seq` must be null or a live handle.
uintptr_t limsup_sequence_dim(const struct LimsupSequence *seq);

// Radius of ball `i`.
//
// # Safety
// `seq` must be a live handle and `out` a valid pointer.
enum LimsupStatus limsup_sequence_radius(const struct LimsupSequence *seq,
                                         uintptr_t i,
                                         double *out);

// Releases a sequence. Null is ignored.
//
// # Safety
// `seq` must be null or a handle not yet freed.
void limsup_sequence_free(struct LimsupSequence *seq);

// Lebesgue measure on `[0,1]^dim`.
//
// # Safety
// `out` must be a valid pointer.
enum LimsupStatus limsup_measure_lebesgue(uintptr_t dim, struct LimsupMeasure **out);

// Middle-thirds Cantor measure with weight `p` on the left map.
//
// # Safety
// `out` must be a valid pointer.
enum LimsupStatus limsup_measure_cantor(double p, struct LimsupMeasure **out);

// Parses the measure text format.
//
// # Safety
// `text` must be a nul-terminated string and `out` a valid pointer.
enum LimsupStatus limsup_measure_parse(const char *text, struct LimsupMeasure **out);

// Certified enclosure `[lo, hi]` of the measure of the closed ball
// `B(center, radius)` with width at most `tol`.
//
// # Safety
// `mu` must be a live handle, `center` must point to `dim` doubles and
// `lo`, `hi` must be valid pointers.
enum LimsupStatus limsup_measure_eval(const struct LimsupMeasure *mu,
                                      const double *center,
                                      uintptr_t dim,
                                      double radius,
                                      double tol,
                                      double *lo,
                                      double *hi);

// Dimension of an exact-dimensional measure.
//
// # Safety
// `mu` must be a live handle and `out` a valid pointer.
enum LimsupStatus limsup_measure_dimension(const struct LimsupMeasure *mu, double *out);

// Releases a measure. Null is ignored.
//
// # Safety
// `mu` must be null or a handle not yet freed.
void limsup_measure_free(struct LimsupMeasure *mu);

// Weakly redundant extraction over scale buckets `0..=k_max`, each bucket
// covering at least `target` of the measure of its open set.
//
// # Safety
// `seq`, `mu` must be live handles and `out` a valid pointer.
enum LimsupStatus limsup_extract_weakly_redundant(const struct LimsupSequence *seq,
                                                  const struct LimsupMeasure *mu,
                                                  uint32_t k_max,
                                                  double target,
                                                  double tol,
                                                  struct LimsupExtraction **out);

// Number of kept balls.
//
// # Safety
// `ex` must be null or a live handle.
uintptr_t limsup_extraction_len(const struct LimsupExtraction *ex);

// Number of flags attached to the result.
//
// # Safety
// `ex` must be null or a live handle.
uintptr_t limsup_extraction_flag_count(const struct LimsupExtraction *ex);

// Copies the parent indices of the kept balls into `buf`. Writes the count
// to `len` and returns `BufferTooSmall` when `cap` is insufficient.
//
// # Safety
// `ex` must be a live handle, `buf` must point to `cap` writable values and
// `len` must be a valid pointer.
enum LimsupStatus limsup_extraction_indices(const struct LimsupExtraction *ex,
                                            uintptr_t *buf,
                                            uintptr_t cap,
                                            uintptr_t *len);

// Whether every family in the result carries a verified disjointness
// certificate (1) or not (0).
//
// # Safety
// `ex` must be a live handle and `out` a valid pointer.
enum LimsupStatus limsup_extraction_verified(const struct LimsupExtraction *ex, int32_t *out);

// Releases an extraction. Null is ignored.
//
// # Safety
// `ex` must be null or a handle not yet freed.
void limsup_extraction_free(struct LimsupExtraction *ex);

// Critical exponent of the natural cover by the shrunk balls
// `B(c, r^delta)`. Writes NaN when too few scales are present.
//
// # Safety
// `seq` must be a live handle and `out` a valid pointer.
enum LimsupStatus limsup_critical_exponent(const struct LimsupSequence *seq,
                                           double delta,
                                           double *out);

// Upper estimate of the `s`-dimensional Hausdorff content of a union of
// `n` boxes in `R^dim`. `lo` and `hi` hold `n * dim` corner coordinates,
// box by box. A non-positive or infinite `t` means no scale bound.
//
// # Safety
// `lo`, `hi` must point to `n * dim` doubles and `out` must be valid.
enum LimsupStatus limsup_content_upper(const double *lo,
                                       const double *hi,
                                       uintptr_t n,
                                       uintptr_t dim,
                                       double s,
                                       double t,
                                       uint32_t depth,
                                       double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LIMSUP_H */
