#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "roadtoll/dynamics.hpp"
#include "roadtoll/game.hpp"
#include "roadtoll/network.hpp"
#include "roadtoll/pricing.hpp"

namespace roadtoll {

struct PolicySpec {
  PolicyKind kind = PolicyKind::no_toll;
  std::optional<Mat<double>> target;  // explicit target state (R x K)
  std::optional<int> optimum_index;   // index into the solver's optimum list
};

struct Scenario {
  NetworkSpec network;
  GroupProfile groups;
  PolicySpec policy;
  IntegratorConfig integrator;
  SolverConfig solver;
  std::uint64_t seed = 0;
};

// Loads and validates a scenario. Unknown keys are rejected; error messages
// carry the offending field path. Throws ParseError on malformed JSON and
// ValidationError on broken invariants.
Scenario load_scenario(const std::string& path);

// Same validation applied to in-memory text (used by tests and error paths).
Scenario parse_scenario_text(const std::string& text);

// Network structure assembled once per command.
struct Instance {
  Scenario scenario;
  PathSet paths;
  IncidenceMatrix delta;
  OverlapMatrix phi;
  Mat<double> cost;  // A
  int groups = 0;
  int path_count = 0;
};

// Enumerates paths and builds the game matrices; validates the parts of the
// scenario that need the path count (explicit targets, integrator floor).
Instance build_instance(const Scenario& scenario);

}  // namespace roadtoll
