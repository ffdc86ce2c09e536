#ifndef AREAREMAP_H
#define AREAREMAP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>

typedef enum ArJacobian {
  AR_JACOBIAN_ARAKAWA = 0,
  AR_JACOBIAN_CENTRAL = 1,
} ArJacobian;

typedef enum ArStatus {
  AR_STATUS_OK = 0,
  AR_STATUS_NULL_POINTER = 1,
  AR_STATUS_CONFIG = 2,
  AR_STATUS_INPUT = 3,
  AR_STATUS_NUMERIC = 4,
  AR_STATUS_NO_CONVERGENCE = 5,
  AR_STATUS_PARSE = 6,
  AR_STATUS_IO = 7,
  AR_STATUS_PANIC = 8,
} ArStatus;

// Tabulated area function.
typedef struct ArAreaFunction ArAreaFunction;

// Vertex field on a uniform grid over the unit square.
typedef struct ArField ArField;

// Sorted initial values for rank projection.
typedef struct ArRankTable ArRankTable;

// Message of the last failed call on this thread, or null. Valid until the
// next call on the same thread.
const char *ar_last_error(void);

// Creates a field from `nx * ny` row-major values (x fastest).
//
// # Safety
// `values` must point to `nx * ny` readable doubles; `out` must be writable.
enum ArStatus ar_field_new(size_t nx, size_t ny, const double *values, struct ArField **out);

// # Safety
// `field` must come from this library and not be used afterwards; null is ignored.
void ar_field_free(struct ArField *field);

// # Safety
// Pointers must be valid.
enum ArStatus ar_field_dims(const struct ArField *field, size_t *nx, size_t *ny);

// Copies the values into `out`, which holds `len` doubles; `len` must equal
// `nx * ny`.
//
// # Safety
// `out` must point to `len` writable doubles.
enum ArStatus ar_field_values(const struct ArField *field, double *out, size_t len);

// Discrete Jacobian `J(a, b)`.
//
// # Safety
// Pointers must be valid.
enum ArStatus ar_jacobian(enum ArJacobian kind,
                          const struct ArField *a,
                          const struct ArField *b,
                          struct ArField **out);

// Stream function with `laplacian(psi) = -omega`, zero on the boundary.
//
// # Safety
// Pointers must be valid.
enum ArStatus ar_poisson(const struct ArField *omega, struct ArField **out);

// # Safety
// Pointers must be valid.
enum ArStatus ar_area_tabulate(const struct ArField *field,
                               size_t budget,
                               bool richardson,
                               struct ArAreaFunction **out);

// # Safety
// `area` must come from this library and not be used afterwards; null is ignored.
void ar_area_free(struct ArAreaFunction *area);

// # Safety
// Pointers must be valid.
enum ArStatus ar_area_len(const struct ArAreaFunction *area, size_t *out);

// Area enclosed by the level-`c` contour.
//
// # Safety
// Pointers must be valid.
enum ArStatus ar_area_evaluate(const struct ArAreaFunction *area, double c, double *out);

// Smallest level whose enclosed area does not exceed `a`.
//
// # Safety
// Pointers must be valid.
enum ArStatus ar_area_invert(const struct ArAreaFunction *area, double a, double *out);

// # Safety
// Pointers must be valid.
enum ArStatus ar_rank_table_new(const struct ArField *initial, struct ArRankTable **out);

// # Safety
// `table` must come from this library and not be used afterwards; null is ignored.
void ar_rank_table_free(struct ArRankTable *table);

// # Safety
// Pointers must be valid.
enum ArStatus ar_rank_project(const struct ArField *field,
                              const struct ArRankTable *table,
                              struct ArField **out);

// Relabels `field` so its contours enclose the areas of `initial`.
//
// # Safety
// Pointers must be valid.
enum ArStatus ar_relabel(const struct ArField *field,
                         const struct ArAreaFunction *initial,
                         size_t budget,
                         bool richardson,
                         struct ArField **out);

// Runs an experiment described by config text, writing artifacts to `out_dir`.
//
// # Safety
// Both strings must be valid NUL-terminated C strings.
enum ArStatus ar_run_experiment(const char *config_text, const char *out_dir);

#endif  /* AREAREMAP_H */
