#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include <doctest.h>
#include <nlohmann/json.hpp>

#include "tacsim/error.hpp"
#include "tacsim/parallel.hpp"
#include "tacsim/scenario.hpp"

using namespace tacsim;
using namespace tacsim::scenario;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("tacsim_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string validation_message(const std::string& yaml) {
  try {
    parse_scenario_text(yaml, "cfg.yaml");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Validation);
    return e.what();
  }
  return "";
}

// A small gel and a small sphere so a full run takes a few seconds.
const char* kTinyPress = R"(preset: custom
seed: 3
sensor:
  width: 24
  height: 18
  pixel_pitch: 0.2
elastomer:
  extent: [6, 6, 2]
  counts: [16, 16, 6]
shape:
  kind: sphere
  radius: 1.5
trajectory:
  kind: press
  magnitudes: [0.2, 0.4]
  press_speed: 40
render:
  spp: 2
  max_bounces: 2
)";

}  // namespace

TEST_CASE("preset trajectory cardinalities") {
  CHECK(count_captures(trajectory_expand(make_preset("slip").trajectory)) == 48);
  CHECK(count_captures(trajectory_expand(make_preset("rotation").trajectory)) == 60);
  CHECK(count_captures(trajectory_expand(make_preset("press").trajectory)) == 2079);
  CHECK(count_captures(trajectory_expand(make_preset("gelsight-press-sphere").trajectory)) == 1);
  CHECK(trajectory_expand(make_preset("press").trajectory).size() == 21 * 9);
  CHECK(trajectory_expand(make_preset("slip").trajectory).size() == 8);
}

TEST_CASE("slip runs press first and then slide in steps") {
  const auto runs = trajectory_expand(make_preset("slip").trajectory);
  const Run& r = runs.front();
  CHECK(r.directory() == "moon-left");
  REQUIRE(r.phases.size() >= 2);
  CHECK(r.phases[0].kind == PhaseKind::Press);
  CHECK(r.phases[0].magnitude == doctest::Approx(0.5));
  double slid = 0.0;
  std::vector<double> labels;
  for (const auto& p : r.phases) {
    if (p.kind == PhaseKind::Slide) slid += p.magnitude;
    if (p.capture) labels.push_back(p.label);
  }
  CHECK(slid == doctest::Approx(5.0));
  CHECK(labels == std::vector<double>{0, 1, 2, 3, 4, 5});

  std::set<std::string> dirs;
  for (const auto& run : trajectory_expand(make_preset("rotation").trajectory)) {
    dirs.insert(run.directory());
  }
  CHECK(dirs.count("dot_in-ccw") == 1);
  CHECK(dirs.size() == 6);
}

TEST_CASE("config defaults and scales") {
  const auto desk = make_preset("gelsight-press-sphere");
  CHECK(desk.elastomer_counts == Vec3i(101, 101, 21));
  CHECK(desk.sensor.width == 160);
  CHECK(desk.sensor.height == 120);
  CHECK(desk.spp == 32);
  CHECK(desk.sim.rest_threshold == 0.05);
  CHECK(desk.sim.rest_limit == 50);
  CHECK(desk.sim.dt == 1e-4);
  const auto paper = make_preset("gelsight-press-sphere", "paper");
  CHECK(paper.elastomer_counts == Vec3i(201, 201, 41));
  CHECK(paper.sensor.width == 640);
  CHECK(paper.spp == 128);
  CHECK(make_preset("slip").sensor.name == "slip-sensor");
  CHECK_NOTHROW(desk.validate());
  CHECK(desk.canonical() == make_preset("gelsight-press-sphere").canonical());
  CHECK(desk.canonical() != paper.canonical());
}

TEST_CASE("config parsing reports located errors") {
  const auto unknown = validation_message("preset: slip\nsim:\n  dtt: 0.1\n");
  CHECK(unknown.find("cfg.yaml:3:") != std::string::npos);
  CHECK(unknown.find("sim.dtt") != std::string::npos);

  const auto negative = validation_message("trajectory:\n  magnitudes: [1, -2]\n");
  CHECK(!negative.empty());

  const auto profile = validation_message("sensor:\n  profile: digit\n");
  CHECK(profile.find("gelsight") != std::string::npos);
  CHECK(profile.find("slip-sensor") != std::string::npos);

  CHECK(!validation_message("preset: bogus\n").empty());
  CHECK(!validation_message("seed: [1, 2]\n").empty());
  CHECK(!validation_message("render:\n  spp: 0\n").empty());
  CHECK_THROWS_AS(parse_scenario("/nonexistent/cfg.yaml"), Error);

  const auto cfg = parse_scenario_text(kTinyPress);
  CHECK(cfg.seed == 3);
  CHECK(cfg.sensor.width == 24);
  CHECK(cfg.trajectory.shapes.at(0).spec.radius == 1.5);
  CHECK(cfg.elastomer_counts == Vec3i(16, 16, 6));
}

TEST_CASE("dry run lists every capture without simulating") {
  auto cfg = make_preset("rotation");
  cfg.output_dir = scratch("dry");
  PipelineOptions opt;
  opt.dry_run = true;
  const auto res = run_pipeline(cfg, opt);
  std::size_t captures = 0;
  for (const auto& r : res.runs) captures += r.captures.size();
  CHECK(captures == 60);
  CHECK(res.runs.at(0).captures.at(0).stem.rfind("rotation/moon-cw/", 0) == 0);
  CHECK(res.manifest.empty());
}

TEST_CASE("small press pipeline writes a complete, reproducible manifest") {
  auto cfg = parse_scenario_text(kTinyPress);
  const fs::path dir_a = scratch("press_a"), dir_b = scratch("press_b");
  cfg.output_dir = dir_a;
  PipelineOptions opt;
  opt.keep_depth = true;
  const auto a = run_pipeline(cfg, opt);
  REQUIRE(a.runs.size() == 1);
  REQUIRE(a.runs[0].captures.size() == 2);

  // Press depth reaches the commanded travel within half a step.
  const double half_step = 0.5 * cfg.trajectory.press_speed * cfg.sim.dt;
  for (const auto& c : a.runs[0].captures) {
    CHECK(std::abs(-c.progress.displacement.z() - c.phase_target) <= half_step + 1e-9);
    CHECK(c.depth.width == 24);
    CHECK(c.depth.max_value() > 0.0);
  }
  CHECK(a.runs[0].captures[1].depth.max_value() > a.runs[0].captures[0].depth.max_value());

  // Every written file is in the manifest with its hash.
  std::set<std::string> listed;
  for (const auto& e : a.manifest) listed.insert(e.path);
  std::size_t on_disk = 0;
  for (const auto& f : fs::recursive_directory_iterator(dir_a)) {
    if (!f.is_regular_file() || f.path().filename() == "manifest.json") continue;
    ++on_disk;
    CHECK(listed.count(fs::relative(f.path(), dir_a).generic_string()) == 1);
  }
  CHECK(on_disk == a.manifest.size());
  CHECK(a.manifest.size() == 2 * 3);  // .dpth, .obj, .png per capture

  std::ifstream in(a.manifest_path);
  const auto j = nlohmann::json::parse(in);
  CHECK(j["config_hash"] == a.config_hash);
  CHECK(j["files"].size() == a.manifest.size());

  // Same config and seed at another thread count: identical artifacts.
  cfg.output_dir = dir_b;
  set_thread_count(3);
  const auto b = run_pipeline(cfg);
  set_thread_count(0);
  REQUIRE(b.manifest.size() == a.manifest.size());
  for (std::size_t i = 0; i < a.manifest.size(); ++i) {
    CHECK(a.manifest[i].path == b.manifest[i].path);
    CHECK(a.manifest[i].fnv1a == b.manifest[i].fnv1a);
  }

  // The compare command pairs the renders of both runs.
  const auto cmp = compare_command(dir_a, dir_b, 1);
  CHECK(cmp.rows.size() == 2);
}

TEST_CASE("compare pairs images by relative path") {
  const auto a = scratch("cmp_a"), b = scratch("cmp_b");
  fs::create_directories(a / "x");
  fs::create_directories(b / "x");
  const auto tex = default_texture(40, 32);
  render::save_png(a / "x" / "one.png", tex);
  render::save_png(b / "x" / "one.png", tex);
  render::save_png(a / "x" / "only_a.png", tex);
  const auto res = compare_command(a, b, 4);
  REQUIRE(res.rows.size() == 1);
  CHECK(res.rows[0].name == "x/one.png");
  CHECK(res.rows[0].mse == 0.0);
  CHECK(res.unmatched == std::vector<std::string>{"x/only_a.png"});
  CHECK(res.csv.rfind("case,offset_x,offset_y,mse,psnr_db,ssim\nx/one.png,0,0,0,inf,1\n", 0) == 0);

  const auto empty = scratch("cmp_empty");
  CHECK_THROWS_AS(compare_command(a, empty, 4), Error);
}

TEST_CASE("content hash helpers") {
  const std::string text = "a";
  const auto h = fnv1a64({reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
  CHECK(h == 0xaf63dc4c8601ec8cull);
  CHECK(hex64(h) == "af63dc4c8601ec8c");
  CHECK(fnv1a64({}) == 0xcbf29ce484222325ull);
  CHECK(default_texture(16, 8) == default_texture(16, 8));
}
