#ifndef PRBP_H
#define PRBP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum PrbpStatus {
  PRBP_STATUS_OK = 0,
  PRBP_STATUS_NULL_POINTER = 1,
  PRBP_STATUS_INVALID_ARGUMENT = 2,
  PRBP_STATUS_PARSE = 3,
  PRBP_STATUS_LENGTH_MISMATCH = 4,
  PRBP_STATUS_IO = 5,
  PRBP_STATUS_NUMERIC = 6,
  PRBP_STATUS_INTERNAL = 7,
} PrbpStatus;

typedef enum PrbpDecoderKind {
  PRBP_DECODER_KIND_PRBP = 0,
  PRBP_DECODER_KIND_TURBO = 1,
  /**
   * sum-product on the ISI-free channel; `target` is ignored
   */
  PRBP_DECODER_KIND_SUM_PRODUCT = 2,
} PrbpDecoderKind;

typedef enum PrbpConvention {
  PRBP_CONVENTION_PAPER = 0,
  PRBP_CONVENTION_EXACT = 1,
} PrbpConvention;

/**
 * A parsed parity-check matrix and its encoder.
 */
typedef struct PrbpCode PrbpCode;

/**
 * Decoder settings. `prbp_decode_options_default` fills in the defaults.
 */
typedef struct PrbpDecodeOptions {
  enum PrbpDecoderKind decoder;
  /**
   * NUL-terminated polynomial such as "1-D"
   */
  const char *target;
  /**
   * channel SNR in dB (no rate penalty applied)
   */
  double snr_db;
  enum PrbpConvention convention;
  /**
   * iteration cap for PR-BP and sum-product
   */
  uint32_t max_iter;
  uint32_t turbo_outer;
  uint32_t turbo_inner;
  /**
   * padding symbol, +1 or -1
   */
  double pad;
} PrbpDecodeOptions;

/**
 * Summary of one decode.
 */
typedef struct PrbpDecodeResult {
  uint32_t iterations;
  uint32_t trellis_passes;
  /**
   * 1 if the hard decision satisfies every check
   */
  uint8_t converged;
} PrbpDecodeResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *prbp_last_error(void);

/**
 * Parse alist text.
 *
 * # Safety
 * `alist` must be a NUL-terminated string and `out` a writable pointer.
 */
enum PrbpStatus prbp_code_from_alist(const char *alist, struct PrbpCode **out);

/**
 * Load an alist file, or a bundled fixture by name such as "code_2640_1320".
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out` a writable pointer.
 */
enum PrbpStatus prbp_code_load(const char *name, struct PrbpCode **out);

/**
 * Release a handle. Null is ignored.
 *
 * # Safety
 * `code` must come from `prbp_code_from_alist`/`prbp_code_load` and not be
 * used afterwards.
 */
void prbp_code_free(struct PrbpCode *code);

/**
 * Block length N, or 0 for a null handle.
 *
 * # Safety
 * `code` must be null or a live handle.
 */
size_t prbp_code_n(const struct PrbpCode *code);

/**
 * Number of parity checks M.
 *
 * # Safety
 * `code` must be null or a live handle.
 */
size_t prbp_code_m(const struct PrbpCode *code);

/**
 * Message length K = N - rank(H).
 *
 * # Safety
 * `code` must be null or a live handle.
 */
size_t prbp_code_k(const struct PrbpCode *code);

/**
 * Encode `k` message bits (0/1) into `n` codeword bits.
 *
 * # Safety
 * `msg` must hold `k` bytes and `codeword` have room for `n` bytes.
 */
enum PrbpStatus prbp_code_encode(const struct PrbpCode *code,
                                 const uint8_t *msg,
                                 size_t k,
                                 uint8_t *codeword,
                                 size_t n);

/**
 * Number of unsatisfied checks of `n` hard bits.
 *
 * # Safety
 * `bits` must hold `n` bytes and `weight` be writable.
 */
enum PrbpStatus prbp_code_syndrome_weight(const struct PrbpCode *code,
                                          const uint8_t *bits,
                                          size_t n,
                                          size_t *weight);

/**
 * Default options: PR-BP on 1-D at 3 dB, paper convention, 20 iterations,
 * turbo 3x6, padding +1.
 */
struct PrbpDecodeOptions prbp_decode_options_default(void);

/**
 * Decode received samples `y` (N + L values for an ISI target with memory
 * L). Writes N hard bits to `bits` and, when `lambdas` is non-null, N
 * likelihood fields.
 *
 * # Safety
 * `opts` must be readable, `y` hold `y_len` doubles, `bits` (and `lambdas`
 * when non-null) have room for N entries, and `result` be null or writable.
 */
enum PrbpStatus prbp_decode(const struct PrbpCode *code,
                            const struct PrbpDecodeOptions *opts,
                            const double *y,
                            size_t y_len,
                            uint8_t *bits,
                            double *lambdas,
                            struct PrbpDecodeResult *result);

/**
 * Closed-form per-symbol multiplications and additions of a full decode on
 * a (q, p)-regular code.
 *
 * # Safety
 * `target` must be a NUL-terminated string; `multiplies` and `adds` must be
 * writable.
 */
enum PrbpStatus prbp_predict_ops(uint64_t q,
                                 uint64_t p,
                                 const char *target,
                                 enum PrbpDecoderKind decoder,
                                 uint32_t iterations,
                                 uint32_t turbo_outer,
                                 uint32_t turbo_inner,
                                 uint64_t *multiplies,
                                 uint64_t *adds);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PRBP_H */
