/* C interface for the density-sensitive hashing library. */

#ifndef DSH_H
#define DSH_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code returned by every fallible call.
 */
typedef enum DshStatus {
  /**
   * The call succeeded and its out-parameters are valid.
   */
  DSH_OK = 0,
  /**
   * A malformed argument: null pointer, bad encoding, out-of-range value.
   */
  DSH_USAGE = 1,
  /**
   * Malformed or inconsistent input data or artifact files.
   */
  DSH_DATA = 2,
  /**
   * Training failed: infeasible parameters or degenerate geometry.
   */
  DSH_TRAINING = 3,
  /**
   * An unexpected internal failure was caught at the library boundary.
   */
  DSH_INTERNAL = 4,
} DshStatus;

/**
 * Opaque handle to a store of packed binary codes.
 */
typedef struct DshCodes DshCodes;

/**
 * Opaque handle to an in-memory dataset of float vectors.
 */
typedef struct DshDataset DshDataset;

/**
 * Opaque handle to a trained hash model.
 */
typedef struct DshModel DshModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *dsh_version(void);

/**
 * Message from the most recent failing call on the current thread, as a
 * NUL-terminated UTF-8 string. Empty until something fails. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *dsh_last_error(void);

/**
 * Builds a dataset from a row-major buffer of `n` vectors with `dim`
 * floats each. The buffer is copied; the caller keeps ownership of
 * `values`. On `DSH_OK`, `*out` receives a new handle.
 */
enum DshStatus dsh_dataset_from_buffer(const float *values,
                                       size_t n,
                                       size_t dim,
                                       struct DshDataset **out);

/**
 * Loads a dataset from an `.fvecs` file.
 */
enum DshStatus dsh_dataset_load_fvecs(const char *path, struct DshDataset **out);

/**
 * Loads a dataset from a `.bvecs` file, widening each byte to a float.
 */
enum DshStatus dsh_dataset_load_bvecs(const char *path, struct DshDataset **out);

/**
 * Number of vectors in the dataset, or 0 for a null handle.
 */
size_t dsh_dataset_n(const struct DshDataset *ds);

/**
 * Dimensionality of the dataset, or 0 for a null handle.
 */
size_t dsh_dataset_dim(const struct DshDataset *ds);

/**
 * Releases a dataset handle. A null pointer is ignored.
 */
void dsh_dataset_free(struct DshDataset *ds);

/**
 * Trains a density-sensitive model with `bits` hash functions.
 *
 * `iterations`, `alpha`, and `radius` control the quantization sweep
 * count, the group-count factor, and the adjacency radius; pass 0 (or 0.0
 * for `alpha`) to use the defaults. Training is deterministic for a given
 * dataset, parameter set, and `seed`.
 */
enum DshStatus dsh_train_dsh(const struct DshDataset *ds,
                             size_t bits,
                             size_t iterations,
                             double alpha,
                             size_t radius,
                             uint64_t seed,
                             struct DshModel **out);

/**
 * Trains a random-hyperplane baseline sized for `ds`, remembering the
 * dataset's column means so later queries are centered consistently.
 */
enum DshStatus dsh_train_lsh(const struct DshDataset *ds,
                             size_t bits,
                             uint64_t seed,
                             struct DshModel **out);

/**
 * Trains a PCA hashing baseline on `ds`. `bits` may not exceed the data
 * dimensionality.
 */
enum DshStatus dsh_train_pcah(const struct DshDataset *ds, size_t bits, struct DshModel **out);

/**
 * Writes a model to `path` in the library's binary format.
 */
enum DshStatus dsh_model_save(const struct DshModel *model, const char *path);

/**
 * Loads a model previously written by `dsh_model_save` or the CLI.
 */
enum DshStatus dsh_model_load(const char *path, struct DshModel **out);

/**
 * Number of hash functions in the model, or 0 for a null handle.
 */
size_t dsh_model_bits(const struct DshModel *model);

/**
 * Input dimensionality the model expects, or 0 for a null handle.
 */
size_t dsh_model_dim(const struct DshModel *model);

/**
 * Number of 64-bit words each code occupies, or 0 for a null handle.
 */
size_t dsh_model_words_per_code(const struct DshModel *model);

/**
 * Hashing family of the model: 0 for density-sensitive, 1 for random
 * hyperplanes, 2 for PCA. Returns -1 for a null handle.
 */
int32_t dsh_model_method(const struct DshModel *model);

/**
 * Releases a model handle. A null pointer is ignored.
 */
void dsh_model_free(struct DshModel *model);

/**
 * Encodes every vector of `ds` with `model` into a new code store.
 */
enum DshStatus dsh_encode(const struct DshModel *model,
                          const struct DshDataset *ds,
                          struct DshCodes **out);

/**
 * Writes a code store to `path` in the library's binary format.
 */
enum DshStatus dsh_codes_save(const struct DshCodes *store, const char *path);

/**
 * Loads a code store previously written by `dsh_codes_save` or the CLI.
 */
enum DshStatus dsh_codes_load(const char *path, struct DshCodes **out);

/**
 * Number of codes in the store, or 0 for a null handle.
 */
size_t dsh_codes_n(const struct DshCodes *store);

/**
 * Bits per code in the store, or 0 for a null handle.
 */
size_t dsh_codes_bits(const struct DshCodes *store);

/**
 * Number of 64-bit words each stored code occupies, or 0 for a null handle.
 */
size_t dsh_codes_words_per_code(const struct DshCodes *store);

/**
 * Releases a code store handle. A null pointer is ignored.
 */
void dsh_codes_free(struct DshCodes *store);

/**
 * Encodes one query vector of `query_len` floats.
 *
 * `out_words` must hold at least `dsh_model_words_per_code(model)` words;
 * `out_words_len` is its capacity in words. Bits are packed
 * least-significant-first within each word, matching the stored codes.
 */
enum DshStatus dsh_encode_query(const struct DshModel *model,
                                const float *query,
                                size_t query_len,
                                uint64_t *out_words,
                                size_t out_words_len);

/**
 * Encodes a query and ranks every code in `store` by Hamming distance to
 * it, best first, ties broken by lower database index.
 *
 * Writes up to `top` results into `out_indices` and `out_distances`,
 * which must each hold `top` entries; `*out_written` receives the number
 * actually written (the smaller of `top` and the store size). The model
 * must produce codes of the same width as the store.
 */
enum DshStatus dsh_search(const struct DshModel *model,
                          const struct DshCodes *store,
                          const float *query,
                          size_t query_len,
                          size_t top,
                          uint32_t *out_indices,
                          uint32_t *out_distances,
                          size_t *out_written);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* DSH_H */
