#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mincontrol/json_io.h"

namespace mincontrol::cli {

/// Schema violation; the message starts with the offending field path.
class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Command-line overrides applied on top of the scenario file.
struct RunOptions {
  std::optional<std::filesystem::path> out;
  std::optional<std::uint64_t> seed;
  /// Multiplies every verification tolerance.
  double tol_scale = 1.0;
  std::optional<int> mesh;
  std::optional<int> nodes;
};

struct RunResult {
  Json report;
  bool pass = true;
  std::filesystem::path output_dir;
  /// File names written into output_dir, report.json last.
  std::vector<std::string> files;
};

const std::vector<std::string>& KnownTasks();

/// Checks the scenario against the schema without running anything.
void ValidateScenario(const Json& scenario);

/// Validates, then runs the tasks in order. A failing task is recorded and
/// the remaining tasks still run. Writes report.json and the CSV series.
RunResult RunScenario(const Json& scenario, const RunOptions& options);

}  // namespace mincontrol::cli
