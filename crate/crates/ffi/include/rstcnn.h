#ifndef RSTCNN_H
#define RSTCNN_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes.
typedef enum RstStatus {
  RST_STATUS_OK = 0,
  RST_STATUS_NULL_POINTER = 1,
  RST_STATUS_INVALID_ARGUMENT = 2,
  RST_STATUS_CONFIG = 3,
  RST_STATUS_PARSE = 4,
  RST_STATUS_DIMENSION = 5,
  RST_STATUS_UNSUPPORTED = 6,
  RST_STATUS_PRECONDITION = 7,
  RST_STATUS_UNDEFINED = 8,
  RST_STATUS_IO = 9,
  RST_STATUS_PANIC = 10,
} RstStatus;

// Spatial basis selector.
typedef enum RstBasisKind {
  RST_BASIS_KIND_FB_DISK = 0,
  RST_BASIS_KIND_SL_SQUARE = 1,
} RstBasisKind;

// Sampled filter bank `[K, N_r, N_s, L, L]`.
typedef struct RstBank RstBank;

// Feature map `[channels, N_r, N_s, H, W]`.
typedef struct RstFeature RstFeature;

// Network with synthesized filters.
typedef struct RstModel RstModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copy the calling thread's last error message into `buf` as a
// NUL-terminated string, truncating to `len - 1` bytes. Returns the full
// message length in bytes, excluding the terminator.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
size_t rst_last_error(char *buf, size_t len);

// Bessel function of the first kind `J_order(x)`.
//
// # Safety
// `out` must be a valid pointer.
enum RstStatus rst_bessel_j(uint32_t order, double x, double *out);

// The `q`-th positive zero (`q >= 1`) of `J_order`.
//
// # Safety
// `out` must be a valid pointer.
enum RstStatus rst_bessel_zero(uint32_t order, uint32_t q, double *out);

// Sample the first `k` spatial modes on an `L x L` stencil for every
// rotation and scale sample.
//
// # Safety
// `out` must be a valid pointer; on success it receives a new handle.
enum RstStatus rst_bank_build(enum RstBasisKind kind,
                              size_t k,
                              size_t n_rot,
                              size_t n_scale,
                              double t,
                              size_t stencil,
                              int32_t layer_scale,
                              struct RstBank **out);

// Read an RSTBANK1 filter bank file.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum RstStatus rst_bank_load(const char *path, struct RstBank **out);

// Write a filter bank as an RSTBANK1 file.
//
// # Safety
// `bank` must be a live handle and `path` a NUL-terminated string.
enum RstStatus rst_bank_save(const struct RstBank *bank, const char *path);

// Write `[K, N_r, N_s, L, L]` to `shape`.
//
// # Safety
// `bank` must be a live handle and `shape` point to 5 writable values.
enum RstStatus rst_bank_shape(const struct RstBank *bank, size_t *shape);

// Borrow the bank's values. The pointer stays valid until the bank is
// freed.
//
// # Safety
// `bank` must be a live handle; `values` and `len` valid pointers.
enum RstStatus rst_bank_values(const struct RstBank *bank, const double **values, size_t *len);

// # Safety
// `bank` must be null or a handle not yet freed.
void rst_bank_free(struct RstBank *bank);

// Build a network from TOML config text with A2-normalized random
// coefficients drawn from `seed`.
//
// # Safety
// `config` must be a NUL-terminated string and `out` a valid pointer.
enum RstStatus rst_model_from_config(const char *config, uint64_t seed, struct RstModel **out);

// Number of layers.
//
// # Safety
// `model` must be a live handle and `out` a valid pointer.
enum RstStatus rst_model_depth(const struct RstModel *model, size_t *out);

// Run the network on a `[channels, height, width]` image.
//
// # Safety
// `model` must be a live handle, `input` point to
// `channels * height * width` values and `out` be a valid pointer.
enum RstStatus rst_model_forward(const struct RstModel *model,
                                 const double *input,
                                 size_t channels,
                                 size_t height,
                                 size_t width,
                                 struct RstFeature **out);

// Relative equivariance error of every layer for the group element
// `(eta, beta, (vx, vy))`, written to `errors[0..depth]`.
//
// # Safety
// `model` must be a live handle, `input` point to
// `channels * height * width` values and `errors` to `errors_len` slots.
enum RstStatus rst_model_equivariance_errors(const struct RstModel *model,
                                             const double *input,
                                             size_t channels,
                                             size_t height,
                                             size_t width,
                                             double eta,
                                             double beta,
                                             double vx,
                                             double vy,
                                             size_t margin,
                                             double *errors,
                                             size_t errors_len);

// # Safety
// `model` must be null or a handle not yet freed.
void rst_model_free(struct RstModel *model);

// Write `[channels, N_r, N_s, H, W]` to `shape`.
//
// # Safety
// `feature` must be a live handle and `shape` point to 5 writable values.
enum RstStatus rst_feature_shape(const struct RstFeature *feature, size_t *shape);

// Borrow the feature values. The pointer stays valid until the feature is
// freed.
//
// # Safety
// `feature` must be a live handle; `values` and `len` valid pointers.
enum RstStatus rst_feature_values(const struct RstFeature *feature,
                                  const double **values,
                                  size_t *len);

// # Safety
// `feature` must be null or a handle not yet freed.
void rst_feature_free(struct RstFeature *feature);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RSTCNN_H */
