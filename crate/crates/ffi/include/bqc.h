#ifndef BQC_H
#define BQC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum BqcStatus {
  BQC_STATUS_OK = 0,
  BQC_STATUS_NULL_POINTER = 1,
  // An argument lies outside the domain of the function.
  BQC_STATUS_DOMAIN = 2,
  BQC_STATUS_INVALID_ARGUMENT = 3,
  // The requested operation is not available for these arguments.
  BQC_STATUS_UNSUPPORTED = 4,
  BQC_STATUS_INTERNAL = 5,
} BqcStatus;

typedef enum BqcRvfKind {
  // `S = {0, …, n−1}`, `f(q) = q`; parameter `a` is `n`.
  BQC_RVF_KIND_TOY = 0,
  // Semiprimes of two `a`-bit primes.
  BQC_RVF_KIND_FACTORING = 1,
  // Isomorphic graph pairs on `a` vertices with `b` edges.
  BQC_RVF_KIND_GRAPH_ISO = 2,
} BqcRvfKind;

typedef enum BqcAttackKind {
  BQC_ATTACK_KIND_HONEST = 0,
  BQC_ATTACK_KIND_MEASURE_RESEND = 1,
  // Uses `strength`.
  BQC_ATTACK_KIND_PARTIAL_MEASURE = 2,
  // Uses `ancilla_digits`; coherent copy of every round into the ancilla.
  BQC_ATTACK_KIND_ENTANGLING_PROBE = 3,
} BqcAttackKind;

typedef enum BqcVariant {
  BQC_VARIANT_INTERACTIVE = 0,
  BQC_VARIANT_NONINTERACTIVE = 1,
} BqcVariant;

// Opaque simulation result.
typedef struct BqcRun BqcRun;

// Opaque verifiable-function instance.
typedef struct BqcRvf BqcRvf;

// Single-round figures of merit of an attack.
typedef struct BqcAttackReport {
  double g;
  double f;
  double f_offdiagonal;
} BqcAttackReport;

// Simulation parameters. `stop_on_detect` < 0 selects the variant default.
typedef struct BqcSimConfig {
  enum BqcVariant variant;
  enum BqcAttackKind attack;
  double strength;
  uintptr_t ancilla_digits;
  uintptr_t decoys;
  uintptr_t trials;
  uint64_t seed;
  bool announce_position;
  int32_t stop_on_detect;
} BqcSimConfig;

// Headline numbers of a finished simulation.
typedef struct BqcSummary {
  uintptr_t trials;
  uintptr_t n;
  double detection;
  double detection_se;
  double guess_success;
  double guess_success_se;
  double mutual_info_bits;
  double mi_bias_allowance;
  double x_exposed_rate;
  double result_verified_rate;
  bool bound_pass;
} BqcSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or null. The pointer
// stays valid until the next failing call on the same thread.
const char *bqc_last_error(void);

// Largest decoy survival probability for estimation fidelity `g`.
//
// # Safety
// `out` must be valid for writes.
enum BqcStatus bqc_fidelity_bound(double g, uintptr_t n, double *out);

// Estimation fidelity matching `info` bits.
//
// # Safety
// `out` must be valid for writes.
enum BqcStatus bqc_g_from_info(double info, uintptr_t n, double *out);

// Guaranteed detection probability with `decoys` decoys against an
// adversary holding `info` bits.
//
// # Safety
// `out` must be valid for writes.
enum BqcStatus bqc_detection_bound(double info, uintptr_t n, uintptr_t decoys, double *out);

// `−log₂ g`.
//
// # Safety
// `out` must be valid for writes.
enum BqcStatus bqc_min_entropy(double g, double *out);

// Builds a verifiable-function instance. See [`BqcRvfKind`] for the meaning
// of `a` and `b`. Release with [`bqc_rvf_free`].
//
// # Safety
// `out` must be valid for writes.
enum BqcStatus bqc_rvf_new(enum BqcRvfKind kind, uint32_t a, uint32_t b, struct BqcRvf **out);

// Number of inputs `n`; 0 for a null handle.
//
// # Safety
// `rvf` must be null or a live handle.
uintptr_t bqc_rvf_domain_size(const struct BqcRvf *rvf);

// Dimension `m` of the output register; 0 for a null handle.
//
// # Safety
// `rvf` must be null or a live handle.
uintptr_t bqc_rvf_output_size(const struct BqcRvf *rvf);

// # Safety
// `rvf` must be null or a handle from [`bqc_rvf_new`] not yet freed.
void bqc_rvf_free(struct BqcRvf *rvf);

// Exact single-round `(G, F)` of an ancilla-free attack on dimension `n`.
// Returns [`BqcStatus::Unsupported`] for entangling probes.
//
// # Safety
// `out` must be valid for writes.
enum BqcStatus bqc_evaluate_attack(enum BqcAttackKind kind,
                                   double strength,
                                   uintptr_t n,
                                   struct BqcAttackReport *out);

// Monte-Carlo simulation of the protocol. Release the result with
// [`bqc_run_free`].
//
// # Safety
// `rvf` must be a live handle, `config` readable and `out` valid for writes.
enum BqcStatus bqc_simulate(const struct BqcRvf *rvf,
                            const struct BqcSimConfig *config,
                            struct BqcRun **out);

// # Safety
// `run` must be a live handle and `out` valid for writes.
enum BqcStatus bqc_run_summary(const struct BqcRun *run, struct BqcSummary *out);

// Full report as JSON, same layout as the command line's `simulate`
// output. Release with [`bqc_string_free`]. Null on failure.
//
// # Safety
// `run` must be null or a live handle.
char *bqc_run_to_json(const struct BqcRun *run);

// # Safety
// `run` must be null or a handle from [`bqc_simulate`] not yet freed.
void bqc_run_free(struct BqcRun *run);

// # Safety
// `s` must be null or a string returned by this library not yet freed.
void bqc_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BQC_H */
