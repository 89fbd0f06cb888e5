#ifndef BILMDM_H
#define BILMDM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum BlmdmStatus {
  BLMDM_STATUS_OK = 0,
  BLMDM_STATUS_NULL_POINTER = 1,
  BLMDM_STATUS_INVALID_ARGUMENT = 2,
  BLMDM_STATUS_CONFIG = 3,
  BLMDM_STATUS_IO = 4,
  BLMDM_STATUS_FORMAT = 5,
  BLMDM_STATUS_SHAPE = 6,
  BLMDM_STATUS_NUMERICAL = 7,
  BLMDM_STATUS_PANIC = 8,
} BlmdmStatus;

/*
 Opaque complex `n_p × n_f × n_fr` cube.
 */
typedef struct BlmdmCube BlmdmCube;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Library version as a static NUL-terminated string.
 */
const char *bilmdm_version(void);

/*
 Message of the last failed call on this thread, or NULL after a success.
 The pointer stays valid until the next library call on the same thread.
 */
const char *bilmdm_last_error(void);

/*
 Builds a cube from `2·n_p·n_f·n_fr` interleaved doubles.

 # Safety
 `data` must point to that many readable doubles; `out` must be writable.
 */
enum BlmdmStatus bilmdm_cube_new(size_t n_p,
                                 size_t n_f,
                                 size_t n_fr,
                                 const double *data,
                                 struct BlmdmCube **out);

/*
 Reads a 3-d BLMD file.

 # Safety
 `path` must be a NUL-terminated string; `out` must be writable.
 */
enum BlmdmStatus bilmdm_cube_read(const char *path, struct BlmdmCube **out);

/*
 Writes `cube` as a BLMD file.

 # Safety
 `cube` must be a live handle and `path` a NUL-terminated string.
 */
enum BlmdmStatus bilmdm_cube_write(const struct BlmdmCube *cube, const char *path);

/*
 # Safety
 `cube` must be a live handle; the out-pointers must be writable.
 */
enum BlmdmStatus bilmdm_cube_dims(const struct BlmdmCube *cube,
                                  size_t *n_p,
                                  size_t *n_f,
                                  size_t *n_fr);

/*
 Copies the cube into `out` as interleaved doubles. `len` is the capacity
 of `out` in doubles and must be at least `2·n_p·n_f·n_fr`.

 # Safety
 `cube` must be a live handle; `out` must have room for `len` doubles.
 */
enum BlmdmStatus bilmdm_cube_copy_data(const struct BlmdmCube *cube, double *out, size_t len);

/*
 Releases a cube; NULL is ignored.

 # Safety
 `cube` must be NULL or a handle not yet freed.
 */
void bilmdm_cube_free(struct BlmdmCube *cube);

/*
 Runs the full pipeline from a JSON configuration and returns report.json
 contents through `report_json`.

 # Safety
 `config_json` must be a NUL-terminated string; `report_json` writable.
 */
enum BlmdmStatus bilmdm_run_pipeline(const char *config_json, char **report_json);

/*
 Scores `recon` against `truth` and returns the metrics as JSON.

 # Safety
 Both cubes must be live handles; `metrics_json` must be writable.
 */
enum BlmdmStatus bilmdm_metrics(const struct BlmdmCube *truth,
                                const struct BlmdmCube *recon,
                                char **metrics_json);

/*
 Releases a string returned by this library; NULL is ignored.

 # Safety
 `s` must be NULL or a string from this library not yet freed.
 */
void bilmdm_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BILMDM_H */
