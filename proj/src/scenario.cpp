#include "roadtoll/scenario.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace roadtoll {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& message) {
  throw ValidationError(path + ": " + message);
}

void reject_unknown_keys(const json& node, const std::string& path,
                         const std::set<std::string>& allowed) {
  for (const auto& item : node.items())
    if (!allowed.count(item.key())) fail(path + "." + item.key(), "unknown key");
}

const json& require_key(const json& node, const std::string& path, const char* key) {
  if (!node.contains(key)) fail(path + "." + key, "missing required key");
  return node.at(key);
}

double number_at(const json& node, const std::string& path) {
  if (!node.is_number()) fail(path, "expected a number");
  return node.get<double>();
}

int int_at(const json& node, const std::string& path) {
  if (!node.is_number_integer()) fail(path, "expected an integer");
  return node.get<int>();
}

std::vector<double> number_array(const json& node, const std::string& path) {
  if (!node.is_array()) fail(path, "expected an array");
  std::vector<double> out;
  for (std::size_t i = 0; i < node.size(); ++i)
    out.push_back(number_at(node[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

NetworkSpec parse_network(const json& node, const std::string& path) {
  if (!node.is_object()) fail(path, "expected an object");
  reject_unknown_keys(node, path, {"node_count", "edges", "origin", "destination"});
  NetworkSpec net;
  net.node_count = int_at(require_key(node, path, "node_count"), path + ".node_count");
  net.origin = int_at(require_key(node, path, "origin"), path + ".origin");
  net.destination =
      int_at(require_key(node, path, "destination"), path + ".destination");
  const json& edges = require_key(node, path, "edges");
  if (!edges.is_array()) fail(path + ".edges", "expected an array of [tail, head] pairs");
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const std::string edge_path = path + ".edges[" + std::to_string(i) + "]";
    if (!edges[i].is_array() || edges[i].size() != 2)
      fail(edge_path, "expected a [tail, head] pair");
    net.edges.emplace_back(int_at(edges[i][0], edge_path + "[0]"),
                           int_at(edges[i][1], edge_path + "[1]"));
  }
  net.validate();
  return net;
}

GroupProfile parse_groups(const json& node, const std::string& path) {
  if (!node.is_object()) fail(path, "expected an object");
  reject_unknown_keys(node, path, {"m", "theta"});
  GroupProfile gp;
  gp.masses = number_array(require_key(node, path, "m"), path + ".m");
  gp.thetas = number_array(require_key(node, path, "theta"), path + ".theta");
  gp.validate();
  return gp;
}

PolicySpec parse_policy(const json& node, const std::string& path) {
  if (!node.is_object()) fail(path, "expected an object");
  reject_unknown_keys(node, path, {"kind", "target", "optimum_index"});
  PolicySpec spec;
  const json& kind = require_key(node, path, "kind");
  if (!kind.is_string()) fail(path + ".kind", "expected a string");
  const std::string name = kind.get<std::string>();
  if (name == "none")
    spec.kind = PolicyKind::no_toll;
  else if (name == "adaptive_pigouvian")
    spec.kind = PolicyKind::adaptive_pigouvian;
  else if (name == "aggregate_toll")
    spec.kind = PolicyKind::aggregate_toll;
  else
    fail(path + ".kind", "must be \"none\", \"adaptive_pigouvian\" or \"aggregate_toll\"");

  if (node.contains("target")) {
    const json& target = node.at("target");
    if (!target.is_array()) fail(path + ".target", "expected an array of rows");
    std::vector<std::vector<double>> rows;
    for (std::size_t r = 0; r < target.size(); ++r)
      rows.push_back(
          number_array(target[r], path + ".target[" + std::to_string(r) + "]"));
    if (rows.empty()) fail(path + ".target", "must be nonempty");
    Mat<double> z(static_cast<int>(rows.size()), static_cast<int>(rows[0].size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r].size() != rows[0].size()) fail(path + ".target", "ragged rows");
      for (std::size_t k = 0; k < rows[r].size(); ++k)
        z(static_cast<int>(r), static_cast<int>(k)) = rows[r][k];
    }
    spec.target = std::move(z);
  }
  if (node.contains("optimum_index"))
    spec.optimum_index = int_at(node.at("optimum_index"), path + ".optimum_index");

  if (spec.kind == PolicyKind::aggregate_toll) {
    if (!spec.target && !spec.optimum_index)
      fail(path, "aggregate_toll requires either target or optimum_index");
    if (spec.target && spec.optimum_index)
      fail(path, "target and optimum_index are mutually exclusive");
  } else if (spec.target) {
    fail(path + ".target", "only meaningful for aggregate_toll");
  }
  return spec;
}

IntegratorConfig parse_integrator(const json& node, const std::string& path) {
  if (!node.is_object()) fail(path, "expected an object");
  reject_unknown_keys(node, path, {"h", "T", "record_every", "epsilon", "tol"});
  IntegratorConfig cfg;
  if (node.contains("h")) cfg.h = number_at(node.at("h"), path + ".h");
  if (node.contains("T")) cfg.horizon = number_at(node.at("T"), path + ".T");
  if (node.contains("record_every"))
    cfg.record_every = int_at(node.at("record_every"), path + ".record_every");
  if (node.contains("epsilon")) cfg.floor = number_at(node.at("epsilon"), path + ".epsilon");
  if (node.contains("tol")) cfg.tol = number_at(node.at("tol"), path + ".tol");
  if (!(cfg.h > 0.0)) fail(path + ".h", "must be positive");
  if (!(cfg.horizon > 0.0)) fail(path + ".T", "must be positive");
  if (cfg.record_every < 1) fail(path + ".record_every", "must be at least 1");
  if (!(cfg.floor > 0.0)) fail(path + ".epsilon", "must be positive");
  if (!(cfg.tol > 0.0)) fail(path + ".tol", "must be positive");
  return cfg;
}

SolverConfig parse_solver(const json& node, const std::string& path) {
  if (!node.is_object()) fail(path, "expected an object");
  reject_unknown_keys(node, path, {"grid_step", "starts", "tol"});
  SolverConfig cfg;
  if (node.contains("grid_step"))
    cfg.grid_step = number_at(node.at("grid_step"), path + ".grid_step");
  if (node.contains("starts")) cfg.starts = int_at(node.at("starts"), path + ".starts");
  if (node.contains("tol")) cfg.tol = number_at(node.at("tol"), path + ".tol");
  if (!(cfg.grid_step > 0.0) || cfg.grid_step > 0.5)
    fail(path + ".grid_step", "must lie in (0, 0.5]");
  if (cfg.starts < 1) fail(path + ".starts", "must be at least 1");
  if (!(cfg.tol > 0.0)) fail(path + ".tol", "must be positive");
  return cfg;
}

Scenario parse_scenario(const json& root) {
  if (!root.is_object()) throw ValidationError("scenario: top level must be an object");
  reject_unknown_keys(root, "scenario",
                      {"network", "groups", "policy", "integrator", "solver", "seed"});
  Scenario scenario;
  scenario.network =
      parse_network(require_key(root, "scenario", "network"), "scenario.network");
  scenario.groups =
      parse_groups(require_key(root, "scenario", "groups"), "scenario.groups");
  if (root.contains("policy"))
    scenario.policy = parse_policy(root.at("policy"), "scenario.policy");
  if (root.contains("integrator"))
    scenario.integrator = parse_integrator(root.at("integrator"), "scenario.integrator");
  if (root.contains("solver"))
    scenario.solver = parse_solver(root.at("solver"), "scenario.solver");
  if (root.contains("seed")) {
    if (!root.at("seed").is_number_unsigned() && !root.at("seed").is_number_integer())
      fail("scenario.seed", "expected a nonnegative integer");
    const long long seed = root.at("seed").get<long long>();
    if (seed < 0) fail("scenario.seed", "expected a nonnegative integer");
    scenario.seed = static_cast<std::uint64_t>(seed);
  }
  scenario.solver.seed = scenario.seed + 1;

  if (scenario.policy.target) {
    if (scenario.policy.target->rows() != scenario.groups.groups())
      fail("scenario.policy.target", "row count must equal the group count");
  }
  return scenario;
}

}  // namespace

Scenario parse_scenario_text(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("scenario is not valid JSON: ") + e.what());
  }
  return parse_scenario(root);
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open scenario file: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_scenario_text(buffer.str());
}

Instance build_instance(const Scenario& scenario) {
  Instance inst;
  inst.scenario = scenario;
  inst.paths = enumerate_paths(scenario.network);
  inst.delta = incidence_matrix(scenario.network, inst.paths);
  inst.phi = overlap_matrix(inst.delta);
  inst.cost = cost_matrix(scenario.groups.thetas, inst.phi);
  inst.groups = scenario.groups.groups();
  inst.path_count = inst.paths.count();

  if (scenario.policy.target) {
    const Mat<double>& target = *scenario.policy.target;
    if (target.cols() != inst.path_count)
      throw ValidationError("scenario.policy.target: column count must equal the path count");
    validate_state(target, scenario.groups, 1e-9);
  }
  return inst;
}

}  // namespace roadtoll
