#include <algorithm>
#include <set>

#include "tacsim/error.hpp"
#include "tacsim/scenario.hpp"

namespace tacsim::scenario {
namespace {

std::set<std::string> png_files(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) fail(ErrorKind::Io, "not a directory: " + root.string());
  std::set<std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file() && e.path().extension() == ".png") {
      out.insert(fs::relative(e.path(), root).generic_string());
    }
  }
  return out;
}

}  // namespace

CompareResult compare_command(const std::filesystem::path& dir_a,
                              const std::filesystem::path& dir_b, int max_shift) {
  const auto a = png_files(dir_a);
  const auto b = png_files(dir_b);
  CompareResult result;
  for (const auto& rel : a) {
    if (!b.contains(rel)) {
      result.unmatched.push_back(rel);
      continue;
    }
    auto row = metrics::evaluate(render::load_png(dir_a / rel), render::load_png(dir_b / rel),
                                 max_shift);
    row.name = rel;
    result.rows.push_back(std::move(row));
  }
  for (const auto& rel : b) {
    if (!a.contains(rel)) result.unmatched.push_back(rel);
  }
  std::sort(result.unmatched.begin(), result.unmatched.end());
  if (result.rows.empty()) {
    fail(ErrorKind::Validation, "no PNG files with matching relative paths in " +
                                    dir_a.string() + " and " + dir_b.string());
  }
  result.csv = metrics::to_csv(result.rows, true);
  return result;
}

}  // namespace tacsim::scenario
