#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "roadtoll/parallel.hpp"
#include "roadtoll/scenario.hpp"

namespace roadtoll {

struct CommandOptions {
  std::string out_dir = "out";
  int grid = 0;       // simulate: N x N basin sweep when > 0
  int resolution = 41;  // field: contour / arrow grid resolution
  bool svg = false;
  std::optional<std::vector<double>> z0;  // simulate: flattened start override
  std::optional<int> optimum_index;       // overrides scenario policy choice
  Exec exec = Exec::openmp;
};

// Every command returns its JSON report (also written to <out>/report.json)
// plus the manifest of files it wrote. `ok` is false when a verify-style check
// failed; infrastructure problems throw instead.
struct RunReport {
  nlohmann::json body;
  std::vector<std::string> files;
  bool ok = true;
};

RunReport cmd_analyze(const Scenario& scenario, const CommandOptions& opts);
RunReport cmd_simulate(const Scenario& scenario, const CommandOptions& opts);
RunReport cmd_field(const Scenario& scenario, const CommandOptions& opts);
RunReport cmd_verify(const Scenario& scenario, const CommandOptions& opts);

// Full argument parsing and dispatch. Returns the process exit code:
// 0 success, 1 check failure, 2 input error.
int run_cli(const std::vector<std::string>& args);

}  // namespace roadtoll
