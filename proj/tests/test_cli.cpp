#include "roadtoll/commands.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "roadtoll/csvio.hpp"

using namespace roadtoll;
namespace fs = std::filesystem;

namespace {

const std::string kScenarioDir = ROADTOLL_SCENARIO_DIR;

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("roadtoll_test_" + std::to_string(std::rand()) + "_" +
            std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str() const { return path.string(); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string write_text(const TempDir& dir, const std::string& name,
                       const std::string& text) {
  const std::string path = dir.file(name);
  std::ofstream out(path);
  out << text;
  return path;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>());
}

// Minimal well-formedness scan: every opened tag is closed in order and
// attribute quoting is balanced per tag.
bool xml_well_formed(const std::string& text) {
  std::vector<std::string> stack;
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] != '<') {
      ++i;
      continue;
    }
    std::size_t close = i;
    int quotes = 0;
    while (close < text.size() && (text[close] != '>' || quotes % 2 == 1)) {
      if (text[close] == '"') ++quotes;
      ++close;
    }
    if (close == text.size()) return false;
    std::string tag = text.substr(i + 1, close - i - 1);
    if (quotes % 2 != 0) return false;
    if (!tag.empty() && tag[0] == '?') {
      i = close + 1;
      continue;
    }
    if (!tag.empty() && tag[0] == '/') {
      if (stack.empty() || stack.back() != tag.substr(1)) return false;
      stack.pop_back();
    } else if (!tag.empty() && tag.back() != '/') {
      std::string name = tag.substr(0, tag.find_first_of(" \t\n"));
      stack.push_back(name);
    }
    i = close + 1;
  }
  return stack.empty();
}

std::string quick_scenario(const std::string& policy, double horizon = 40.0) {
  return R"({
    "network": {"node_count": 2, "edges": [[1, 2], [1, 2]], "origin": 1, "destination": 2},
    "groups": {"m": [0.5, 0.5], "theta": [0.5, 1.5]},
    "policy": )" +
         policy + R"(,
    "integrator": {"h": 0.01, "T": )" +
         std::to_string(horizon) + R"(, "record_every": 10, "epsilon": 0.001, "tol": 0.001},
    "seed": 5})";
}

}  // namespace

TEST_CASE("cmd_simulate: trajectory CSV round-trips and counts match") {
  TempDir dir;
  const Scenario scenario = parse_scenario_text(
      quick_scenario(R"({"kind": "aggregate_toll", "optimum_index": 1})", 50.0));
  CommandOptions opts;
  opts.out_dir = dir.file("run");
  const RunReport report = cmd_simulate(scenario, opts);
  CHECK(report.ok);

  const CsvTable table = read_csv(dir.file("run") + "/trajectory.csv");
  CHECK(table.header == std::vector<std::string>{"t", "z_11", "z_12", "z_21", "z_22",
                                                 "sw", "toll_1", "toll_2", "lyapunov"});
  // 50 / 0.01 = 5000 steps recorded every 10, plus t = 0
  CHECK(table.rows.size() == 501);
  CHECK(report.body["rows"] == 501);
  for (const auto& row : table.rows) {
    REQUIRE(row.size() == table.header.size());
    for (const std::string& cell : row) {
      if (cell.empty()) continue;
      const double value = std::stod(cell);
      CHECK(format_double(value) == cell);  // shortest representation round-trips
    }
  }
  // manifest lists exactly what exists on disk
  for (const std::string& file : report.files) CHECK(fs::exists(file));
}

TEST_CASE("cmd_simulate: --z0 override and sweep summary") {
  TempDir dir;
  const Scenario scenario =
      parse_scenario_text(quick_scenario(R"({"kind": "adaptive_pigouvian"})", 200.0));
  CommandOptions opts;
  opts.out_dir = dir.file("sweep");
  opts.grid = 3;
  const RunReport report = cmd_simulate(scenario, opts);
  const CsvTable table = read_csv(dir.file("sweep") + "/sweep_summary.csv");
  CHECK(table.header ==
        std::vector<std::string>{"z11_0", "z21_0", "converged", "final_dist"});
  CHECK(table.rows.size() == 9);
  CHECK(report.body["sweep"]["total"] == 9);

  CommandOptions single;
  single.out_dir = dir.file("single");
  single.z0 = std::vector<double>{0.1, 0.4, 0.3, 0.2};
  const RunReport traj = cmd_simulate(scenario, single);
  const CsvTable tt = read_csv(dir.file("single") + "/trajectory.csv");
  CHECK(tt.rows.front()[1] == "0.1");
  CHECK(tt.rows.front()[3] == "0.3");

  single.z0 = std::vector<double>{0.1, 0.4};
  CHECK_THROWS_AS(cmd_simulate(scenario, single), ValidationError);
}

TEST_CASE("cmd_field: outputs, argmax, and SVG well-formedness") {
  TempDir dir;
  const Scenario scenario = parse_scenario_text(quick_scenario(R"({"kind": "none"})"));
  CommandOptions opts;
  opts.out_dir = dir.file("field");
  opts.resolution = 25;
  opts.svg = true;
  const RunReport report = cmd_field(scenario, opts);

  const CsvTable sw = read_csv(dir.file("field") + "/sw_contour.csv");
  CHECK(sw.rows.size() == 25 * 25);
  const CsvTable field = read_csv(dir.file("field") + "/vector_field.csv");
  CHECK(field.rows.size() == 25 * 25);

  // grid argmax sits in a cell adjacent to one of the known optima
  const double ax = report.body["sw_grid_argmax"][0].get<double>();
  const double ay = report.body["sw_grid_argmax"][1].get<double>();
  const double cell = 0.5 / 24.0;
  const bool near_a = std::abs(ax - 0.0) <= cell && std::abs(ay - 5.0 / 12.0) <= cell;
  const bool near_b = std::abs(ax - 0.5) <= cell && std::abs(ay - 1.0 / 12.0) <= cell;
  CHECK((near_a || near_b));

  const std::string svg = slurp(dir.file("field") + "/phase_portrait.svg");
  CHECK(svg.rfind("<?xml", 0) == 0);
  CHECK(xml_well_formed(svg));
  CHECK(svg.find("href=\"http") == std::string::npos);  // self-contained

  // no-toll portrait marks the two optima red and the saddle blue
  CHECK(report.body["markers"].size() == 3);
}

TEST_CASE("cmd_field: lyapunov contour peaks at the target") {
  TempDir dir;
  const Scenario scenario = parse_scenario_text(
      quick_scenario(R"({"kind": "aggregate_toll", "optimum_index": 1})"));
  CommandOptions opts;
  opts.out_dir = dir.file("field");
  opts.resolution = 41;
  const RunReport report = cmd_field(scenario, opts);
  (void)report;
  const CsvTable table = read_csv(dir.file("field") + "/lyapunov_contour.csv");
  REQUIRE(table.rows.size() == 41 * 41);
  double best = -1e300;
  double best_x = 0.0, best_y = 0.0;
  int defined = 0;
  for (const auto& row : table.rows) {
    if (row[2].empty()) continue;
    ++defined;
    const double w = std::stod(row[2]);
    if (w > best) {
      best = w;
      best_x = std::stod(row[0]);
      best_y = std::stod(row[1]);
    }
  }
  CHECK(defined > 41 * 41 / 2);
  const double cell = 0.5 / 40.0;
  CHECK(std::abs(best_x - 0.5) <= cell + 1e-12);
  CHECK(std::abs(best_y - 1.0 / 12.0) <= cell + 1e-12);
}

TEST_CASE("determinism: repeated runs produce byte-identical outputs") {
  TempDir dir;
  const Scenario scenario = parse_scenario_text(
      quick_scenario(R"({"kind": "aggregate_toll", "optimum_index": 1})", 30.0));
  for (const char* sub : {"a", "b"}) {
    CommandOptions opts;
    opts.out_dir = dir.file(sub);
    opts.svg = true;
    opts.resolution = 15;
    cmd_simulate(scenario, opts);
    cmd_field(scenario, CommandOptions{dir.file(std::string(sub) + "_f"), 0, 15, true,
                                       std::nullopt, std::nullopt, opts.exec});
  }
  CHECK(slurp(dir.file("a") + "/trajectory.csv") == slurp(dir.file("b") + "/trajectory.csv"));
  CHECK(slurp(dir.file("a") + "/report.json") == slurp(dir.file("b") + "/report.json"));
  CHECK(slurp(dir.file("a_f") + "/vector_field.csv") ==
        slurp(dir.file("b_f") + "/vector_field.csv"));
  CHECK(slurp(dir.file("a_f") + "/phase_portrait.svg") ==
        slurp(dir.file("b_f") + "/phase_portrait.svg"));
  CHECK(slurp(dir.file("a_f") + "/report.json") == slurp(dir.file("b_f") + "/report.json"));
}

TEST_CASE("run_cli: exit codes") {
  TempDir dir;
  SUBCASE("success") {
    CHECK(run_cli({"analyze", "--scenario", kScenarioDir + "/example1_notoll.json",
                   "--out", dir.file("ok")}) == 0);
  }
  SUBCASE("missing scenario file") {
    CHECK(run_cli({"analyze", "--scenario", dir.file("absent.json")}) == 2);
  }
  SUBCASE("malformed scenario") {
    const std::string path = write_text(dir, "bad.json", "{ nope");
    CHECK(run_cli({"analyze", "--scenario", path, "--out", dir.file("x")}) == 2);
  }
  SUBCASE("invalid policy spec") {
    const std::string path =
        write_text(dir, "badpolicy.json", quick_scenario(R"({"kind": "aggregate_toll"})"));
    CHECK(run_cli({"simulate", "--scenario", path, "--out", dir.file("x")}) == 2);
  }
  SUBCASE("no-path network") {
    const std::string path = write_text(dir, "nopath.json", R"({
      "network": {"node_count": 3, "edges": [[2, 3]], "origin": 1, "destination": 3},
      "groups": {"m": [1.0], "theta": [1.0]}})");
    CHECK(run_cli({"analyze", "--scenario", path, "--out", dir.file("x")}) == 2);
  }
  SUBCASE("field rejects unsupported dimensions") {
    CHECK(run_cli({"field", "--scenario", kScenarioDir + "/braess.json", "--out",
                   dir.file("x")}) == 2);
  }
  SUBCASE("bad CLI flags") {
    CHECK(run_cli({"analyze"}) == 2);
    CHECK(run_cli({"frobnicate", "--scenario", "x"}) == 2);
  }
  SUBCASE("verify failure gives exit 1") {
    // aggregate toll pointed at a non-equilibrium target
    const std::string path = write_text(
        dir, "offtarget.json",
        quick_scenario(
            R"({"kind": "aggregate_toll", "target": [[0.4, 0.1], [0.3, 0.2]]})", 50.0));
    CHECK(run_cli({"verify", "--scenario", path, "--out", dir.file("v")}) == 1);
  }
}

TEST_CASE("cmd_analyze: single homogeneous group is concave with a Taylor ESS") {
  TempDir dir;
  const Scenario scenario = parse_scenario_text(R"({
    "network": {"node_count": 2, "edges": [[1, 2], [1, 2]], "origin": 1, "destination": 2},
    "groups": {"m": [1.0], "theta": [1.0]}})");
  CommandOptions opts;
  opts.out_dir = dir.file("single");
  const RunReport report = cmd_analyze(scenario, opts);
  CHECK(report.body["optima"].size() == 1);
  CHECK(report.body["taylor_ess"]["base"] == true);
  for (const auto& ev : report.body["spectra"]["base"]["eigenvalues"])
    CHECK(ev.get<double>() > 0.0);
}

TEST_CASE("cmd_verify: equal time values take the concavity branch") {
  TempDir dir;
  const Scenario scenario = parse_scenario_text(R"({
    "network": {"node_count": 2, "edges": [[1, 2], [1, 2]], "origin": 1, "destination": 2},
    "groups": {"m": [0.5, 0.5], "theta": [1.0, 1.0]},
    "integrator": {"h": 0.01, "T": 40, "record_every": 10, "epsilon": 0.001, "tol": 0.001}})");
  CommandOptions opts;
  opts.out_dir = dir.file("verify");
  const RunReport report = cmd_verify(scenario, opts);
  CHECK(report.ok);
  bool concave_branch = false;
  bool saddle_branch = false;
  for (const auto& check : report.body["checks"]) {
    const std::string name = check["name"].get<std::string>();
    if (name == "welfare_concave_with_equal_time_values") concave_branch = true;
    if (name == "saddle_and_optima_classification") saddle_branch = true;
  }
  CHECK(concave_branch);
  CHECK(!saddle_branch);
}

TEST_CASE("cmd_field: the replicator field vanishes at every marked rest point") {
  TempDir dir;
  const Scenario scenario =
      parse_scenario_text(quick_scenario(R"({"kind": "adaptive_pigouvian"})"));
  CommandOptions opts;
  opts.out_dir = dir.file("field");
  opts.resolution = 11;
  const RunReport report = cmd_field(scenario, opts);
  REQUIRE(report.body["markers"].size() == 3);
  const Instance inst = build_instance(scenario);
  const Policy<double> pol = adaptive_pigouvian_policy<double>();
  for (const auto& marker : report.body["markers"]) {
    const double z11 = marker["z_free"][0].get<double>();
    const double z21 = marker["z_free"][1].get<double>();
    const std::vector<VectorFieldRow> at_marker =
        vector_field({z11}, {z21}, pol, scenario.groups, inst.phi);
    CHECK(std::abs(at_marker[0].dz11) < 1e-9);
    CHECK(std::abs(at_marker[0].dz21) < 1e-9);
  }
}

TEST_CASE("manifest matches the output directory exactly") {
  TempDir dir;
  const Scenario scenario = parse_scenario_text(
      quick_scenario(R"({"kind": "aggregate_toll", "optimum_index": 1})", 20.0));
  CommandOptions opts;
  opts.out_dir = dir.file("out");
  opts.svg = true;
  opts.resolution = 9;
  const RunReport report = cmd_field(scenario, opts);
  std::size_t on_disk = 0;
  for (const auto& entry : fs::directory_iterator(dir.file("out"))) {
    (void)entry;
    ++on_disk;
  }
  CHECK(on_disk == report.files.size());
  const auto body = nlohmann::json::parse(slurp(dir.file("out") + "/report.json"));
  CHECK(body["files"].size() == report.files.size());
}

TEST_CASE("run_cli: optimum-index override selects the other target") {
  TempDir dir;
  const std::string path = write_text(
      dir, "agg.json", quick_scenario(R"({"kind": "aggregate_toll", "optimum_index": 1})"));
  CHECK(run_cli({"analyze", "--scenario", path, "--out", dir.file("o0"),
                 "--optimum-index", "0"}) == 0);
  const std::string report = slurp(dir.file("o0") + "/report.json");
  const auto body = nlohmann::json::parse(report);
  CHECK(body["policy"]["optimum_index"] == 0);
  CHECK(body["policy"]["target"][0][0].get<double>() == doctest::Approx(0.0));
}
