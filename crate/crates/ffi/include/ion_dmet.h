#ifndef ION_DMET_H
#define ION_DMET_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum IonDmetStatus {
  ION_DMET_STATUS_OK = 0,
  ION_DMET_STATUS_NULL_POINTER = 1,
  ION_DMET_STATUS_INVALID_ARGUMENT = 2,
  ION_DMET_STATUS_PARSE = 3,
  ION_DMET_STATUS_NUMERICAL = 4,
  ION_DMET_STATUS_IO = 5,
  ION_DMET_STATUS_NOT_FOUND = 6,
  ION_DMET_STATUS_INTERNAL = 7,
} IonDmetStatus;

/**
 * Qubit Hamiltonian as a real Pauli sum (opaque).
 */
typedef struct IonDmetHamiltonian IonDmetHamiltonian;

/**
 * Checksummed reference data set (opaque).
 */
typedef struct IonDmetReference IonDmetReference;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Static description of a status code. Never NULL.
 */
const char *ion_dmet_status_string(enum IonDmetStatus status);

/**
 * Copies the last error message (NUL-terminated, truncated to `len`) into
 * `buf` and returns the full message length excluding the NUL; 0 if none.
 *
 * # Safety
 * `buf` must be valid for `len` bytes or be NULL (then only the length is returned).
 */
size_t ion_dmet_last_error(char *buf, size_t len);

/**
 * Loads and verifies the reference data. `dir` may be NULL for the default location.
 *
 * # Safety
 * `dir` is NULL or a NUL-terminated string; `out` must be valid for writes.
 */
enum IonDmetStatus ion_dmet_reference_load(const char *dir, struct IonDmetReference **out);

/**
 * # Safety
 * `handle` is NULL or came from [`ion_dmet_reference_load`] and is not used afterwards.
 */
void ion_dmet_reference_free(struct IonDmetReference *handle);

/**
 * Number of stored bond lengths.
 *
 * # Safety
 * `handle` is a live reference handle; `out` valid for writes.
 */
enum IonDmetStatus ion_dmet_reference_count(const struct IonDmetReference *handle, size_t *out);

/**
 * Bond length number `index` (angstrom).
 *
 * # Safety
 * `handle` is a live reference handle; `out` valid for writes.
 */
enum IonDmetStatus ion_dmet_reference_bond_length(const struct IonDmetReference *handle,
                                                  size_t index,
                                                  double *out);

/**
 * Embedding-problem energy of the stored optimal ansatz at bond length `r`.
 *
 * # Safety
 * `handle` is a live reference handle; `out` valid for writes.
 */
enum IonDmetStatus ion_dmet_qcc_energy(const struct IonDmetReference *handle,
                                       double r,
                                       double *out);

/**
 * Per-atom energy of the stored optimal ansatz at bond length `r` (hartree).
 *
 * # Safety
 * `handle` is a live reference handle; `out` valid for writes.
 */
enum IonDmetStatus ion_dmet_energy_per_atom(const struct IonDmetReference *handle,
                                            double r,
                                            double *out);

/**
 * MO-basis and fragment–bath entanglement entropies (bits) of the optimal state.
 *
 * # Safety
 * `handle` is a live reference handle; both out-pointers valid for writes.
 */
enum IonDmetStatus ion_dmet_entropies(const struct IonDmetReference *handle,
                                      double r,
                                      double *mo_out,
                                      double *fragment_bath_out);

/**
 * Compiles the measurement circuit for `basis` (`"ZZ"`, `"XZ"`, `"XX"`, `"YY"`)
 * and reports native gate counts plus the total-variation distance to the
 * uncompiled circuit.
 *
 * # Safety
 * `handle` is a live reference handle; `basis` NUL-terminated; out-pointers valid for writes.
 */
enum IonDmetStatus ion_dmet_compile(const struct IonDmetReference *handle,
                                    double r,
                                    const char *basis,
                                    size_t *single_qubit_out,
                                    size_t *two_qubit_out,
                                    double *total_variation_out);

/**
 * Parses a Pauli-sum text (`<coeff> <letters>` per line).
 *
 * # Safety
 * `text` NUL-terminated; `out` valid for writes.
 */
enum IonDmetStatus ion_dmet_hamiltonian_parse(const char *text, struct IonDmetHamiltonian **out);

/**
 * # Safety
 * `handle` is NULL or came from [`ion_dmet_hamiltonian_parse`] and is not used afterwards.
 */
void ion_dmet_hamiltonian_free(struct IonDmetHamiltonian *handle);

/**
 * # Safety
 * `handle` is a live Hamiltonian handle; `out` valid for writes.
 */
enum IonDmetStatus ion_dmet_hamiltonian_qubits(const struct IonDmetHamiltonian *handle,
                                               size_t *out);

/**
 * Lowest eigenvalue by dense diagonalization (at most 10 qubits).
 *
 * # Safety
 * `handle` is a live Hamiltonian handle; `out` valid for writes.
 */
enum IonDmetStatus ion_dmet_hamiltonian_ground_energy(const struct IonDmetHamiltonian *handle,
                                                      double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ION_DMET_H */
