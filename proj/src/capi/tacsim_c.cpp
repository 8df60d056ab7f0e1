#include "tacsim/tacsim.h"

#include <memory>
#include <string>
#include <vector>

#include "tacsim/error.hpp"
#include "tacsim/parallel.hpp"
#include "tacsim/scenario.hpp"

using namespace tacsim;

struct tacsim_config {
  scenario::ScenarioConfig cfg;
  std::string canonical;
};

struct tacsim_result {
  scenario::PipelineResult result;
  std::vector<std::string> stems;
  std::vector<std::string> hashes;
  std::string manifest_path;
};

struct tacsim_compare {
  scenario::CompareResult result;
};

namespace {

thread_local std::string g_last_error;

tacsim_status status_of(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Validation: return TACSIM_ERR_VALIDATION;
    case ErrorKind::SimulationFault: return TACSIM_ERR_SIMULATION;
    case ErrorKind::DegenerateProbe: return TACSIM_ERR_DEGENERATE_PROBE;
    case ErrorKind::Extraction: return TACSIM_ERR_EXTRACTION;
    case ErrorKind::Io: return TACSIM_ERR_IO;
  }
  return TACSIM_ERR_INTERNAL;
}

template <typename F>
tacsim_status guarded(F&& body) {
  try {
    body();
    return TACSIM_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return status_of(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    g_last_error = e.what();
    return TACSIM_ERR_IO;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return TACSIM_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown exception";
    return TACSIM_ERR_INTERNAL;
  }
}

tacsim_status null_arg(const char* what) {
  g_last_error = std::string("null argument: ") + what;
  return TACSIM_ERR_VALIDATION;
}

}  // namespace

extern "C" {

const char* tacsim_version(void) { return "1.0.0"; }
const char* tacsim_last_error(void) { return g_last_error.c_str(); }

const char* tacsim_status_name(tacsim_status status) {
  switch (status) {
    case TACSIM_OK: return "ok";
    case TACSIM_ERR_VALIDATION: return "validation error";
    case TACSIM_ERR_SIMULATION: return "simulation fault";
    case TACSIM_ERR_DEGENERATE_PROBE: return "degenerate probe";
    case TACSIM_ERR_EXTRACTION: return "extraction error";
    case TACSIM_ERR_IO: return "I/O error";
    case TACSIM_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

tacsim_status tacsim_set_threads(int threads) {
  if (threads < 0) {
    g_last_error = "thread count must be >= 0";
    return TACSIM_ERR_VALIDATION;
  }
  set_thread_count(threads);
  return TACSIM_OK;
}

tacsim_status tacsim_config_load(const char* path, tacsim_config** out) {
  if (!path || !out) return null_arg("path/out");
  return guarded([&] { *out = new tacsim_config{scenario::parse_scenario(path), {}}; });
}

tacsim_status tacsim_config_parse(const char* text, tacsim_config** out) {
  if (!text || !out) return null_arg("text/out");
  return guarded([&] { *out = new tacsim_config{scenario::parse_scenario_text(text), {}}; });
}

tacsim_status tacsim_config_preset(const char* name, const char* scale, tacsim_config** out) {
  if (!name || !out) return null_arg("name/out");
  return guarded([&] {
    *out = new tacsim_config{scenario::make_preset(name, scale ? scale : "desk"), {}};
  });
}

void tacsim_config_free(tacsim_config* config) { delete config; }

tacsim_status tacsim_config_set_output_dir(tacsim_config* config, const char* path) {
  if (!config || !path) return null_arg("config/path");
  config->cfg.output_dir = path;
  return TACSIM_OK;
}

tacsim_status tacsim_config_set_seed(tacsim_config* config, uint64_t seed) {
  if (!config) return null_arg("config");
  config->cfg.seed = seed;
  return TACSIM_OK;
}

tacsim_status tacsim_config_set_rest_check(tacsim_config* config, int enabled) {
  if (!config) return null_arg("config");
  config->cfg.rest_check = enabled != 0;
  return TACSIM_OK;
}

tacsim_status tacsim_config_set_render(tacsim_config* config, int enabled) {
  if (!config) return null_arg("config");
  config->cfg.render_images = enabled != 0;
  return TACSIM_OK;
}

tacsim_status tacsim_config_set_phong(tacsim_config* config, int enabled) {
  if (!config) return null_arg("config");
  config->cfg.phong = enabled != 0;
  return TACSIM_OK;
}

const char* tacsim_config_canonical(tacsim_config* config) {
  if (!config) return nullptr;
  config->canonical = config->cfg.canonical();
  return config->canonical.c_str();
}

tacsim_status tacsim_pipeline_run(const tacsim_config* config, int dry_run, tacsim_log_fn log,
                                  void* user, tacsim_result** out) {
  if (!config || !out) return null_arg("config/out");
  return guarded([&] {
    scenario::PipelineOptions opt;
    opt.dry_run = dry_run != 0;
    if (log) opt.log = [log, user](const std::string& msg) { log(msg.c_str(), user); };
    auto r = std::make_unique<tacsim_result>();
    r->result = scenario::run_pipeline(config->cfg, opt);
    for (const auto& run : r->result.runs) {
      for (const auto& c : run.captures) r->stems.push_back(c.stem);
    }
    for (const auto& e : r->result.manifest) r->hashes.push_back(scenario::hex64(e.fnv1a));
    r->manifest_path = r->result.manifest_path.string();
    *out = r.release();
  });
}

void tacsim_result_free(tacsim_result* result) { delete result; }

size_t tacsim_result_run_count(const tacsim_result* result) {
  return result ? result->result.runs.size() : 0;
}

const char* tacsim_result_run_directory(const tacsim_result* result, size_t run) {
  if (!result || run >= result->result.runs.size()) return nullptr;
  return result->result.runs[run].directory.c_str();
}

tacsim_status tacsim_result_run_stats(const tacsim_result* result, size_t run,
                                      tacsim_run_stats* out) {
  if (!result || !out) return null_arg("result/out");
  if (run >= result->result.runs.size()) {
    g_last_error = "run index out of range";
    return TACSIM_ERR_VALIDATION;
  }
  const auto& r = result->result.runs[run];
  const auto& s = r.stats;
  *out = {s.steps,           s.transfer_cycles,     s.converged_exits,
          s.limit_exits,     s.ratio_violations,    s.in_plane_steps,
          s.max_converged_ratio, s.max_ratio,       r.contact_offset};
  return TACSIM_OK;
}

size_t tacsim_result_capture_count(const tacsim_result* result) {
  return result ? result->stems.size() : 0;
}

const char* tacsim_result_capture_stem(const tacsim_result* result, size_t index) {
  if (!result || index >= result->stems.size()) return nullptr;
  return result->stems[index].c_str();
}

size_t tacsim_result_file_count(const tacsim_result* result) {
  return result ? result->result.manifest.size() : 0;
}

const char* tacsim_result_file_path(const tacsim_result* result, size_t index) {
  if (!result || index >= result->result.manifest.size()) return nullptr;
  return result->result.manifest[index].path.c_str();
}

const char* tacsim_result_file_hash(const tacsim_result* result, size_t index) {
  if (!result || index >= result->hashes.size()) return nullptr;
  return result->hashes[index].c_str();
}

const char* tacsim_result_manifest_path(const tacsim_result* result) {
  return result ? result->manifest_path.c_str() : nullptr;
}

const char* tacsim_result_config_hash(const tacsim_result* result) {
  return result ? result->result.config_hash.c_str() : nullptr;
}

tacsim_status tacsim_render_depth_file(const char* depth_path, const char* profile,
                                       const char* texture_png, int phong, int spp,
                                       int max_bounces, uint64_t seed, const char* out_png) {
  if (!depth_path || !profile || !out_png) return null_arg("depth_path/profile/out_png");
  return guarded([&] {
    const auto depth = surface::load_depth(depth_path);
    const auto prof = render::make_profile(profile, depth.width, depth.height, depth.pixel_pitch);
    const auto texture = texture_png ? render::load_png(texture_png)
                                     : scenario::default_texture(depth.width, depth.height);
    const auto img =
        scenario::render_depth(depth, prof, texture, phong != 0, spp, max_bounces, seed);
    render::save_png(out_png, img);
  });
}

tacsim_status tacsim_compare_dirs(const char* dir_a, const char* dir_b, int max_shift,
                                  tacsim_compare** out) {
  if (!dir_a || !dir_b || !out) return null_arg("dir_a/dir_b/out");
  return guarded([&] {
    *out = new tacsim_compare{scenario::compare_command(dir_a, dir_b, max_shift)};
  });
}

void tacsim_compare_free(tacsim_compare* compare) { delete compare; }

const char* tacsim_compare_csv(const tacsim_compare* compare) {
  return compare ? compare->result.csv.c_str() : nullptr;
}

size_t tacsim_compare_row_count(const tacsim_compare* compare) {
  return compare ? compare->result.rows.size() : 0;
}

size_t tacsim_compare_unmatched_count(const tacsim_compare* compare) {
  return compare ? compare->result.unmatched.size() : 0;
}

const char* tacsim_compare_unmatched(const tacsim_compare* compare, size_t index) {
  if (!compare || index >= compare->result.unmatched.size()) return nullptr;
  return compare->result.unmatched[index].c_str();
}

tacsim_status tacsim_metrics_png(const char* png_a, const char* png_b, int max_shift,
                                 tacsim_metrics* out) {
  if (!png_a || !png_b || !out) return null_arg("png_a/png_b/out");
  return guarded([&] {
    const auto r = metrics::evaluate(render::load_png(png_a), render::load_png(png_b), max_shift);
    *out = {r.offset.x, r.offset.y, r.mse, r.psnr, r.ssim};
  });
}

}  // extern "C"
