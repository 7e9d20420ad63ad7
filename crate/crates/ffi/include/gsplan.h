/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef GSPLAN_H
#define GSPLAN_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum GsplanStatus {
  GSPLAN_STATUS_OK = 0,
  // Null pointer, bad UTF-8 or a value outside its domain.
  GSPLAN_STATUS_INVALID_ARGUMENT = 1,
  // The run configuration failed to load or validate.
  GSPLAN_STATUS_CONFIG_ERROR = 2,
  // An input raster or intermediate could not be used.
  GSPLAN_STATUS_DATA_ERROR = 3,
  // A bug; includes caught panics.
  GSPLAN_STATUS_INTERNAL_ERROR = 4,
  // Index past the end of a collection.
  GSPLAN_STATUS_OUT_OF_RANGE = 5,
} GsplanStatus;

// Rain attenuation coefficient table.
typedef struct GsplanCoefficientTable GsplanCoefficientTable;

// A completed plan.
typedef struct GsplanPlan GsplanPlan;

// Inputs for a single rain attenuation evaluation.
typedef struct GsplanRainInputs {
  double frequency_ghz;
  double elevation_deg;
  // 0 horizontal, 90 vertical, 45 circular.
  double polarization_tilt_deg;
  double rain_rate_mm_h;
  double rain_height_km;
  double station_height_km;
  double latitude_deg;
} GsplanRainInputs;

// Lattice bounds and steps in degrees.
typedef struct GsplanGridSpec {
  double lat_min;
  double lat_max;
  double lon_min;
  double lon_max;
  double step_lat;
  double step_lon;
} GsplanGridSpec;

// One selected gateway.
typedef struct GsplanSite {
  size_t gw_id;
  size_t region_id;
  size_t region_cells;
  double lat;
  double lon;
} GsplanSite;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread; empty if none. The
// pointer stays valid until the next failing call on the same thread.
const char *gsplan_last_error(void);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from this library and not have been freed.
void gsplan_string_free(char *s);

// The table shipped with the library.
//
// # Safety
// `out` must be a valid pointer.
enum GsplanStatus gsplan_table_bundled(struct GsplanCoefficientTable **out);

// Loads a `freq_ghz,k_h,k_v,alpha_h,alpha_v` CSV table.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum GsplanStatus gsplan_table_from_csv(const char *path, struct GsplanCoefficientTable **out);

// # Safety
// `table` must come from a table constructor and not have been freed.
void gsplan_table_free(struct GsplanCoefficientTable *table);

// Attenuation exceeded for 0.01 % of an average year, dB.
//
// # Safety
// All pointers must be valid.
enum GsplanStatus gsplan_rain_attenuation(const struct GsplanCoefficientTable *table,
                                          const struct GsplanRainInputs *inputs,
                                          double *out_db);

// Elevation in degrees of an Earth-fixed satellite position (meters) seen
// from a geodetic observer.
//
// # Safety
// `out_deg` must be a valid pointer.
enum GsplanStatus gsplan_elevation_deg(double observer_lat,
                                       double observer_lon,
                                       double observer_alt_m,
                                       double sat_x_m,
                                       double sat_y_m,
                                       double sat_z_m,
                                       double *out_deg);

// Number of cells in the lattice.
//
// # Safety
// Both pointers must be valid.
enum GsplanStatus gsplan_grid_len(const struct GsplanGridSpec *spec, size_t *out_len);

// Fills `out` (one byte per cell, row-major from the southern row, 1 =
// allowed) with the seeded random geopolitical mask. `len` must equal the
// cell count.
//
// # Safety
// `spec` must be valid and `out` must point to `len` writable bytes.
enum GsplanStatus gsplan_geopolitical_mask(const struct GsplanGridSpec *spec,
                                           uint64_t seed,
                                           double blocked_fraction,
                                           uint8_t *out,
                                           size_t len);

// Loads a TOML run configuration and runs the full plan.
//
// # Safety
// `config_path` must be a NUL-terminated string and `out` a valid pointer.
enum GsplanStatus gsplan_plan_run(const char *config_path, struct GsplanPlan **out);

// # Safety
// `plan` must come from [`gsplan_plan_run`] and not have been freed.
void gsplan_plan_free(struct GsplanPlan *plan);

// Number of gateway sites; 0 for a null handle.
//
// # Safety
// `plan` must be null or a live handle.
size_t gsplan_plan_site_count(const struct GsplanPlan *plan);

// Fraction of cells accepted by every criterion; NaN for a null handle.
//
// # Safety
// `plan` must be null or a live handle.
double gsplan_plan_all_fraction(const struct GsplanPlan *plan);

// Copies site `index` into `out`.
//
// # Safety
// `plan` must be a live handle and `out` a valid pointer.
enum GsplanStatus gsplan_plan_site(const struct GsplanPlan *plan,
                                   size_t index,
                                   struct GsplanSite *out);

// The full report as JSON. Free the string with [`gsplan_string_free`].
//
// # Safety
// `plan` must be a live handle and `out` a valid pointer.
enum GsplanStatus gsplan_plan_report_json(const struct GsplanPlan *plan, char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GSPLAN_H */
