#ifndef TACSIM_H
#define TACSIM_H

/* C interface to the tactile sensor simulator. Every call returns a status
 * code; on failure tacsim_last_error() describes the problem for the calling
 * thread until its next failing call. Handles are opaque and owned by the
 * caller, who releases them with the matching *_free function. */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define TACSIM_API __declspec(dllexport)
#else
#define TACSIM_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum tacsim_status {
  TACSIM_OK = 0,
  TACSIM_ERR_VALIDATION = 1,
  TACSIM_ERR_SIMULATION = 2,
  TACSIM_ERR_DEGENERATE_PROBE = 3,
  TACSIM_ERR_EXTRACTION = 4,
  TACSIM_ERR_IO = 5,
  TACSIM_ERR_INTERNAL = 6
} tacsim_status;

typedef struct tacsim_config tacsim_config;
typedef struct tacsim_result tacsim_result;
typedef struct tacsim_compare tacsim_compare;

typedef void (*tacsim_log_fn)(const char* message, void* user);

typedef struct tacsim_run_stats {
  uint64_t steps;
  uint64_t transfer_cycles;
  uint64_t converged_exits;
  uint64_t limit_exits;
  uint64_t ratio_violations;
  uint64_t in_plane_steps;
  double max_converged_ratio;
  double max_ratio;
  double contact_offset_mm;
} tacsim_run_stats;

typedef struct tacsim_metrics {
  int offset_x;
  int offset_y;
  double mse;
  double psnr_db;
  double ssim;
} tacsim_metrics;

TACSIM_API const char* tacsim_version(void);
TACSIM_API const char* tacsim_last_error(void);
TACSIM_API const char* tacsim_status_name(tacsim_status status);

/* Worker thread count for the solver and renderer; 0 restores the default
 * (TACSIM_THREADS or the hardware concurrency). */
TACSIM_API tacsim_status tacsim_set_threads(int threads);

TACSIM_API tacsim_status tacsim_config_load(const char* path, tacsim_config** out);
TACSIM_API tacsim_status tacsim_config_parse(const char* text, tacsim_config** out);
TACSIM_API tacsim_status tacsim_config_preset(const char* name, const char* scale,
                                              tacsim_config** out);
TACSIM_API void tacsim_config_free(tacsim_config* config);
TACSIM_API tacsim_status tacsim_config_set_output_dir(tacsim_config* config, const char* path);
TACSIM_API tacsim_status tacsim_config_set_seed(tacsim_config* config, uint64_t seed);
TACSIM_API tacsim_status tacsim_config_set_rest_check(tacsim_config* config, int enabled);
TACSIM_API tacsim_status tacsim_config_set_render(tacsim_config* config, int enabled);
TACSIM_API tacsim_status tacsim_config_set_phong(tacsim_config* config, int enabled);
/* Resolved settings as stable key=value text; valid until the config changes. */
TACSIM_API const char* tacsim_config_canonical(tacsim_config* config);

/* Runs every expanded trajectory. With dry_run set only the capture list is
 * produced. `log` may be NULL. */
TACSIM_API tacsim_status tacsim_pipeline_run(const tacsim_config* config, int dry_run,
                                             tacsim_log_fn log, void* user,
                                             tacsim_result** out);
TACSIM_API void tacsim_result_free(tacsim_result* result);
TACSIM_API size_t tacsim_result_run_count(const tacsim_result* result);
TACSIM_API const char* tacsim_result_run_directory(const tacsim_result* result, size_t run);
TACSIM_API tacsim_status tacsim_result_run_stats(const tacsim_result* result, size_t run,
                                                 tacsim_run_stats* out);
TACSIM_API size_t tacsim_result_capture_count(const tacsim_result* result);
TACSIM_API const char* tacsim_result_capture_stem(const tacsim_result* result, size_t index);
TACSIM_API size_t tacsim_result_file_count(const tacsim_result* result);
TACSIM_API const char* tacsim_result_file_path(const tacsim_result* result, size_t index);
TACSIM_API const char* tacsim_result_file_hash(const tacsim_result* result, size_t index);
TACSIM_API const char* tacsim_result_manifest_path(const tacsim_result* result);
TACSIM_API const char* tacsim_result_config_hash(const tacsim_result* result);

/* Renders a DPTH depth file with a named sensor profile sized to the depth
 * map. `texture_png` may be NULL for the built-in texture. */
TACSIM_API tacsim_status tacsim_render_depth_file(const char* depth_path, const char* profile,
                                                  const char* texture_png, int phong, int spp,
                                                  int max_bounces, uint64_t seed,
                                                  const char* out_png);

TACSIM_API tacsim_status tacsim_compare_dirs(const char* dir_a, const char* dir_b,
                                             int max_shift, tacsim_compare** out);
TACSIM_API void tacsim_compare_free(tacsim_compare* compare);
TACSIM_API const char* tacsim_compare_csv(const tacsim_compare* compare);
TACSIM_API size_t tacsim_compare_row_count(const tacsim_compare* compare);
TACSIM_API size_t tacsim_compare_unmatched_count(const tacsim_compare* compare);
TACSIM_API const char* tacsim_compare_unmatched(const tacsim_compare* compare, size_t index);

TACSIM_API tacsim_status tacsim_metrics_png(const char* png_a, const char* png_b, int max_shift,
                                            tacsim_metrics* out);

#ifdef __cplusplus
}
#endif

#endif
