// Command-line front end. Talks to the simulator only through the C API.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "tacsim/tacsim.h"

namespace {

int exit_code(tacsim_status s) {
  switch (s) {
    case TACSIM_OK: return 0;
    case TACSIM_ERR_VALIDATION: return 1;
    case TACSIM_ERR_IO: return 3;
    default: return 2;
  }
}

int report(tacsim_status s) {
  if (s != TACSIM_OK) {
    std::cerr << "tacsim: " << tacsim_status_name(s) << ": " << tacsim_last_error() << "\n";
  }
  return exit_code(s);
}

void log_line(const char* msg, void* user) {
  if (*static_cast<bool*>(user)) return;
  std::cerr << msg << "\n";
}

struct RunArgs {
  std::string config;
  std::string preset;
  std::string scale = "desk";
  std::string out;
  long long seed = -1;
  bool no_rest_check = false;
  bool phong = false;
  bool dry_run = false;
};

void add_run_options(CLI::App* cmd, RunArgs& a) {
  cmd->add_option("config", a.config, "Scenario file (YAML)");
  cmd->add_option("--preset", a.preset, "Built-in preset instead of a scenario file");
  cmd->add_option("--scale", a.scale, "Preset scale: desk or paper")
      ->check(CLI::IsMember({"desk", "paper"}));
  cmd->add_option("--out", a.out, "Output directory (overrides the config)");
  cmd->add_option("--seed", a.seed, "Seed (overrides the config)")->check(CLI::NonNegativeNumber);
  cmd->add_flag("--no-rest-check", a.no_rest_check,
                "Plain MPM: one transfer cycle per step, no pinning");
  cmd->add_flag("--dry-run", a.dry_run, "Expand the trajectory and list captures only");
}

int run(const RunArgs& a, bool render, bool quiet) {
  if (a.config.empty() == a.preset.empty()) {
    std::cerr << "tacsim: give exactly one of <config> or --preset\n";
    return 1;
  }
  tacsim_config* cfg = nullptr;
  tacsim_status s = a.config.empty() ? tacsim_config_preset(a.preset.c_str(), a.scale.c_str(), &cfg)
                                     : tacsim_config_load(a.config.c_str(), &cfg);
  if (s != TACSIM_OK) return report(s);
  if (!a.out.empty()) tacsim_config_set_output_dir(cfg, a.out.c_str());
  if (a.seed >= 0) tacsim_config_set_seed(cfg, static_cast<uint64_t>(a.seed));
  if (a.no_rest_check) tacsim_config_set_rest_check(cfg, 0);
  if (!render) tacsim_config_set_render(cfg, 0);
  if (a.phong) tacsim_config_set_phong(cfg, 1);

  bool silent = quiet;
  tacsim_result* result = nullptr;
  s = tacsim_pipeline_run(cfg, a.dry_run ? 1 : 0, log_line, &silent, &result);
  tacsim_config_free(cfg);
  if (s != TACSIM_OK) return report(s);
  if (a.dry_run) {
    for (size_t i = 0; i < tacsim_result_capture_count(result); ++i) {
      std::cout << tacsim_result_capture_stem(result, i) << "\n";
    }
    std::cout << tacsim_result_capture_count(result) << " captures in "
              << tacsim_result_run_count(result) << " runs\n";
  } else {
    std::cout << "wrote " << tacsim_result_file_count(result) << " files, manifest "
              << tacsim_result_manifest_path(result) << "\n";
  }
  tacsim_result_free(result);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tactile sensor simulator: IMPM elastomer, path-traced rendering, image metrics"};
  app.require_subcommand(1);
  int threads = 0;
  bool quiet = false;
  app.add_option("--threads", threads, "Worker threads (default: TACSIM_THREADS or all cores)")
      ->check(CLI::NonNegativeNumber);
  app.add_flag("-q,--quiet", quiet, "Suppress progress messages");

  RunArgs sim_args;
  auto* simulate = app.add_subcommand("simulate", "Run the solver and write depth maps and meshes");
  add_run_options(simulate, sim_args);

  RunArgs pipe_args;
  auto* pipeline = app.add_subcommand("pipeline", "Simulate and render every capture");
  add_run_options(pipeline, pipe_args);
  pipeline->add_flag("--phong", pipe_args.phong, "Also write the Phong baseline images");

  std::string depth_file, profile = "gelsight", texture, render_out;
  bool phong = false;
  int spp = 32, bounces = 4;
  long long seed = 0;
  auto* render = app.add_subcommand("render", "Render one DPTH depth file to PNG");
  render->add_option("depth-file", depth_file, "Input depth map")->required();
  render->add_option("--profile", profile, "Sensor profile: gelsight or slip-sensor");
  render->add_flag("--phong", phong, "Phong baseline instead of path tracing");
  render->add_option("--spp", spp, "Samples per pixel")->check(CLI::PositiveNumber);
  render->add_option("--bounces", bounces, "Maximum path bounces")->check(CLI::PositiveNumber);
  render->add_option("--seed", seed, "Render seed")->check(CLI::NonNegativeNumber);
  render->add_option("--texture", texture, "Base texture PNG");
  render->add_option("--out", render_out, "Output PNG (default: depth file with .png)");

  std::string dir_a, dir_b, csv_out;
  int max_shift = 20;
  auto* compare = app.add_subcommand("compare", "Align and score matching PNGs in two directories");
  compare->add_option("dirA", dir_a)->required();
  compare->add_option("dirB", dir_b)->required();
  compare->add_option("--out", csv_out, "CSV report path (default: stdout)");
  compare->add_option("--max-shift", max_shift, "Alignment search radius in pixels")
      ->check(CLI::NonNegativeNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  if (tacsim_status s = tacsim_set_threads(threads); s != TACSIM_OK) return report(s);

  if (*simulate) return run(sim_args, false, quiet);
  if (*pipeline) return run(pipe_args, true, quiet);
  if (*render) {
    if (render_out.empty()) {
      render_out = std::filesystem::path(depth_file).replace_extension(phong ? "_phong.png" : ".png").string();
    }
    const tacsim_status s =
        tacsim_render_depth_file(depth_file.c_str(), profile.c_str(),
                                 texture.empty() ? nullptr : texture.c_str(), phong ? 1 : 0, spp,
                                 bounces, static_cast<uint64_t>(seed), render_out.c_str());
    if (s == TACSIM_OK && !quiet) std::cerr << "wrote " << render_out << "\n";
    return report(s);
  }
  if (*compare) {
    tacsim_compare* cmp = nullptr;
    const tacsim_status s = tacsim_compare_dirs(dir_a.c_str(), dir_b.c_str(), max_shift, &cmp);
    if (s != TACSIM_OK) return report(s);
    for (size_t i = 0; i < tacsim_compare_unmatched_count(cmp); ++i) {
      std::cerr << "warning: unmatched " << tacsim_compare_unmatched(cmp, i) << " (skipped)\n";
    }
    int code = 0;
    if (csv_out.empty()) {
      std::cout << tacsim_compare_csv(cmp);
    } else {
      std::ofstream f(csv_out, std::ios::binary);
      f << tacsim_compare_csv(cmp);
      if (!f) {
        std::cerr << "tacsim: I/O error: cannot write " << csv_out << "\n";
        code = 3;
      } else if (!quiet) {
        std::cerr << "wrote " << tacsim_compare_row_count(cmp) << " rows to " << csv_out << "\n";
      }
    }
    tacsim_compare_free(cmp);
    return code;
  }
  return 1;
}
