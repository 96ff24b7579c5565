#include "roadtoll/commands.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <random>
#include <sstream>

#include <boost/multiprecision/cpp_int.hpp>

#include "CLI11.hpp"

#include "roadtoll/analysis.hpp"
#include "roadtoll/csvio.hpp"
#include "roadtoll/svg.hpp"

namespace roadtoll {

namespace {

using nlohmann::json;
using Rational = boost::multiprecision::cpp_rational;

json to_json(const Mat<double>& m) {
  json rows = json::array();
  for (int r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (int k = 0; k < m.cols(); ++k) row.push_back(m(r, k));
    rows.push_back(std::move(row));
  }
  return rows;
}

json to_json(const SpectrumReport& spec) {
  return json{{"eigenvalues", spec.eigenvalues},
              {"inertia",
               {{"pos", spec.inertia.positive},
                {"zero", spec.inertia.zero},
                {"neg", spec.inertia.negative}}}};
}

json monitors_to_json(const TrajectoryMonitors& m) {
  json out{{"max_rowsum_drift", m.max_rowsum_drift},
           {"min_coordinate", m.min_coordinate},
           {"min_sw_step", m.min_sw_step}};
  if (m.lyapunov_tracked) {
    out["min_w_step"] = m.min_w_step;
    out["max_w_cd4_error"] = m.max_w_cd4_error;
  }
  return out;
}

bool is_two_by_two_identity(const Instance& inst) {
  return inst.groups == 2 && inst.path_count == 2 && inst.phi == Mat<int>::identity(2);
}

// Interior rest point of the adaptive-Pigouvian dynamics for the two-group,
// two-independent-path case: z11 + z21 = 1/2 with equalized weighted loads.
std::optional<Mat<double>> interior_kkt_point(const GroupProfile& gp) {
  const double t1 = gp.thetas[0];
  const double t2 = gp.thetas[1];
  if (std::abs(t1 - t2) < 1e-12) return std::nullopt;
  const double m1 = gp.masses[0];
  const double m2 = gp.masses[1];
  const double z21 = ((t1 * m1 + t2 * m2) / 2.0 - t1 / 2.0) / (t2 - t1);
  const double z11 = 0.5 - z21;
  if (!(z11 > 0.0 && z11 < m1 && z21 > 0.0 && z21 < m2)) return std::nullopt;
  return Mat<double>{{z11, m1 - z11}, {z21, m2 - z21}};
}

SocialOptimumResult solve_optima(const Instance& inst, Exec exec) {
  SolverConfig cfg = inst.scenario.solver;
  cfg.exec = exec;
  return social_optimum(inst.cost, inst.scenario.groups, cfg);
}

struct ResolvedPolicy {
  Policy<double> policy;
  std::optional<int> optimum_index;
};

ResolvedPolicy resolve_policy(const Instance& inst, const CommandOptions& opts,
                              std::optional<SocialOptimumResult>& optima_cache) {
  const PolicySpec& spec = inst.scenario.policy;
  switch (spec.kind) {
    case PolicyKind::no_toll:
      return {no_toll_policy<double>(), std::nullopt};
    case PolicyKind::adaptive_pigouvian:
      return {adaptive_pigouvian_policy<double>(), std::nullopt};
    case PolicyKind::aggregate_toll:
      break;
  }
  if (spec.target && !opts.optimum_index) {
    Mat<double> target = *spec.target;
    // exact row masses, so tolls and weights see a clean state
    for (int r = 0; r < target.rows(); ++r) {
      double row = 0.0;
      for (int k = 0; k < target.cols(); ++k) row += target(r, k);
      for (int k = 0; k < target.cols(); ++k)
        target(r, k) *= inst.scenario.groups.masses[r] / row;
    }
    return {aggregate_toll_policy(target, inst.scenario.groups.masses), std::nullopt};
  }
  const int index = opts.optimum_index ? *opts.optimum_index : *spec.optimum_index;
  if (!optima_cache) optima_cache = solve_optima(inst, opts.exec);
  const auto& optima = optima_cache->optima;
  if (index < 0 || index >= static_cast<int>(optima.size()))
    throw ValidationError("optimum_index " + std::to_string(index) + " out of range (" +
                          std::to_string(optima.size()) + " optima found)");
  return {aggregate_toll_policy(optima[index], inst.scenario.groups.masses), index};
}

using PendingFiles = std::vector<std::pair<std::string, std::string>>;

// Every command accumulates its outputs in memory and flushes here, so a
// failure part-way through a computation leaves no files behind.
void write_report(const std::string& out_dir, RunReport& report,
                  const PendingFiles& pending = {}) {
  std::filesystem::create_directories(out_dir);
  for (const auto& [path, content] : pending) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);
    out << content;
    if (!out) throw Error("write failed: " + path);
  }
  const std::string path = out_dir + "/report.json";
  report.files.push_back(path);
  std::sort(report.files.begin(), report.files.end());
  // manifest entries are relative to the output directory, so reports from
  // identical runs are byte-identical wherever they land
  json names = json::array();
  for (const std::string& file : report.files)
    names.push_back(std::filesystem::path(file).filename().string());
  report.body["files"] = std::move(names);
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << report.body.dump(2) << '\n';
}

std::mt19937_64 seeded_rng(const Scenario& scenario, std::uint64_t stream) {
  return std::mt19937_64(scenario.seed * 0x9e3779b97f4a7c15ULL + stream);
}

Mat<double> random_state(std::mt19937_64& rng, const GroupProfile& gp, int paths,
                         double inset = 0.0) {
  std::uniform_real_distribution<double> unif(inset, 1.0);
  Mat<double> z(gp.groups(), paths);
  for (int r = 0; r < gp.groups(); ++r) {
    double row = 0.0;
    for (int k = 0; k < paths; ++k) {
      z(r, k) = unif(rng);
      row += z(r, k);
    }
    for (int k = 0; k < paths; ++k) z(r, k) *= gp.masses[r] / row;
  }
  return z;
}

// ---------------------------------------------------------------------------
// analyze

json nash_line_check(const Instance& inst, std::mt19937_64 rng) {
  const GroupProfile& gp = inst.scenario.groups;
  const double m1 = gp.masses[0];
  const double m2 = gp.masses[1];
  int on_line_pass = 0;
  const double lo = std::max(0.0, 0.5 - m2);
  const double hi = std::min(m1, 0.5);
  for (int i = 0; i <= 100; ++i) {
    const double z11 = lo + (hi - lo) * i / 100.0;
    const double z21 = 0.5 - z11;
    const Mat<double> z{{z11, m1 - z11}, {z21, m2 - z21}};
    const Mat<double> v = base_payoffs(z, inst.cost);
    if (nash_check(z, v, 1e-9).is_nash) ++on_line_pass;
  }
  int off_line_fail = 0;
  std::uniform_real_distribution<double> u1(0.0, m1), u2(0.0, m2);
  int sampled = 0;
  while (sampled < 200) {
    const double z11 = u1(rng);
    const double z21 = u2(rng);
    if (std::abs(z11 + z21 - 0.5) / std::sqrt(2.0) < 1e-2) continue;
    ++sampled;
    const Mat<double> z{{z11, m1 - z11}, {z21, m2 - z21}};
    const Mat<double> v = base_payoffs(z, inst.cost);
    if (!nash_check(z, v, 1e-9).is_nash) ++off_line_fail;
  }
  return json{{"on_line_pass", on_line_pass},
              {"on_line_total", 101},
              {"off_line_fail", off_line_fail},
              {"off_line_total", 200}};
}

}  // namespace

RunReport cmd_analyze(const Scenario& scenario, const CommandOptions& opts) {
  const Instance inst = build_instance(scenario);
  const GroupProfile& gp = scenario.groups;
  RunReport report;

  json paths = json::array();
  for (const Path& p : inst.paths.paths) {
    json edges = json::array();
    for (int e : p) edges.push_back(e + 1);  // 1-based edge ids in reports
    paths.push_back(std::move(edges));
  }
  report.body["paths"] = std::move(paths);

  std::optional<SocialOptimumResult> optima_cache = solve_optima(inst, opts.exec);
  json optima = json::array();
  for (const Mat<double>& z : optima_cache->optima) {
    json entry{{"z", to_json(z)}, {"sw", social_welfare(z, inst.cost)}};
    if (inst.groups == 2 && inst.path_count == 2)
      entry["z_free"] = json::array({z(0, 0), z(1, 0)});
    optima.push_back(std::move(entry));
  }
  report.body["optima"] = std::move(optima);
  report.body["sw_optimum"] = optima_cache->sw;

  if (inst.path_count >= 2) {
    const ProjectionBasis basis = projection_basis<double>(inst.path_count, inst.groups);
    const auto base_spec =
        symmetric_eigenvalues(projected_symmetric_part(inst.cost, basis));
    report.body["spectra"]["base"] = to_json(base_spec);
    report.body["spectra"]["kronecker"] =
        to_json(kronecker_spectrum(gp.thetas, inst.phi, basis));
    report.body["taylor_ess"]["base"] = taylor_ess_check(inst.cost, basis).is_taylor_ess;
  }

  if (scenario.policy.kind == PolicyKind::aggregate_toll) {
    const ResolvedPolicy resolved = resolve_policy(inst, opts, optima_cache);
    report.body["policy"]["kind"] = "aggregate_toll";
    report.body["policy"]["target"] = to_json(resolved.policy.target);
    if (resolved.optimum_index)
      report.body["policy"]["optimum_index"] = *resolved.optimum_index;
    if (inst.path_count >= 2) {
      const ProjectionBasis basis =
          projection_basis<double>(inst.path_count, inst.groups);
      const Mat<double> toll_op = cost_operator(resolved.policy, gp.thetas, inst.phi);
      const auto toll_report = taylor_ess_check(toll_op, basis);
      report.body["spectra"]["toll"] = to_json(toll_report.spectrum);
      report.body["taylor_ess"]["toll"] = toll_report.is_taylor_ess;
    }
    if (is_two_by_two_identity(inst)) {
      const LyapunovWeights weights =
          lyapunov_weights(gp.thetas, resolved.policy, inst.phi);
      report.body["lyapunov"] = {{"delta", weights.delta}, {"q", weights.q}};
      const auto cls = classify_rest_point(resolved.policy.target, resolved.policy, gp,
                                           inst.phi);
      report.body["target_classification"] = to_string(cls.cls);
    }
  } else {
    report.body["policy"]["kind"] =
        scenario.policy.kind == PolicyKind::no_toll ? "none" : "adaptive_pigouvian";
  }

  if (is_two_by_two_identity(inst)) {
    report.body["nash_line"] = nash_line_check(inst, seeded_rng(scenario, 7));
    if (const auto saddle = interior_kkt_point(gp)) {
      const Policy<double> pigouvian = adaptive_pigouvian_policy<double>();
      json entry{{"z_free", json::array({(*saddle)(0, 0), (*saddle)(1, 0)})},
                 {"sw", social_welfare(*saddle, inst.cost)},
                 {"is_rest_point",
                  rest_point_check(*saddle, pigouvian, gp, inst.phi, 1e-9)}};
      entry["class"] = to_string(classify_rest_point(*saddle, pigouvian, gp, inst.phi).cls);
      report.body["saddle"] = std::move(entry);
    } else {
      // equal time values: welfare is concave on the tangent space
      const ProjectionBasis basis = projection_basis<double>(2, 2);
      const auto spec = kronecker_spectrum(gp.thetas, inst.phi, basis);
      report.body["sw_concave_on_tangent"] = spec.eigenvalues.front() >= -1e-9;
    }
  }

  write_report(opts.out_dir, report);
  return report;
}

// ---------------------------------------------------------------------------
// simulate

RunReport cmd_simulate(const Scenario& scenario, const CommandOptions& opts) {
  const Instance inst = build_instance(scenario);
  const GroupProfile& gp = scenario.groups;
  std::optional<SocialOptimumResult> optima_cache;
  const ResolvedPolicy resolved = resolve_policy(inst, opts, optima_cache);
  const IntegratorConfig& cfg = scenario.integrator;
  RunReport report;
  report.body["policy"]["kind"] = scenario.policy.kind == PolicyKind::no_toll
                                      ? "none"
                                      : scenario.policy.kind == PolicyKind::adaptive_pigouvian
                                            ? "adaptive_pigouvian"
                                            : "aggregate_toll";
  if (resolved.policy.kind == PolicyKind::aggregate_toll)
    report.body["policy"]["target"] = to_json(resolved.policy.target);

  PendingFiles pending;

  if (opts.grid == 0) {
    Mat<double> z0(gp.groups(), inst.path_count);
    if (opts.z0) {
      if (static_cast<int>(opts.z0->size()) != gp.groups() * inst.path_count)
        throw ValidationError("--z0: expected " +
                              std::to_string(gp.groups() * inst.path_count) + " values");
      z0.data() = *opts.z0;
      validate_state(z0, gp, 1e-9);
    } else {
      z0 = uniform_state(gp, inst.path_count);
    }

    const Trajectory traj = integrate(z0, resolved.policy, gp, inst.phi, cfg);

    std::vector<std::string> header{"t"};
    for (int r = 1; r <= gp.groups(); ++r)
      for (int k = 1; k <= inst.path_count; ++k)
        header.push_back("z_" + std::to_string(r) + std::to_string(k));
    header.push_back("sw");
    for (int k = 1; k <= inst.path_count; ++k)
      header.push_back("toll_" + std::to_string(k));
    header.push_back("lyapunov");

    std::vector<std::vector<std::string>> rows;
    rows.reserve(traj.points.size());
    for (const TrajectoryPoint& pt : traj.points) {
      std::vector<std::string> row{format_double(pt.t)};
      for (double v : pt.z.data()) row.push_back(format_double(v));
      row.push_back(format_double(pt.sw));
      for (double v : pt.toll) row.push_back(format_double(v));
      row.push_back(pt.lyapunov ? format_double(*pt.lyapunov) : "");
      rows.push_back(std::move(row));
    }
    const std::string csv_path = opts.out_dir + "/trajectory.csv";
    pending.emplace_back(csv_path, csv_text(header, rows));
    report.files.push_back(csv_path);

    report.body["rows"] = rows.size();
    report.body["final_time"] = traj.final_time;
    report.body["final_state"] = to_json(traj.final_state);
    report.body["monitors"] = monitors_to_json(traj.monitors);
    if (resolved.policy.kind == PolicyKind::aggregate_toll) {
      double dist = 0.0;
      for (std::size_t i = 0; i < traj.final_state.size(); ++i)
        dist = std::max(dist, std::abs(traj.final_state.data()[i] -
                                       resolved.policy.target.data()[i]));
      report.body["distance_to_target"] = dist;
      report.body["converged"] = dist < cfg.tol;
    }
  } else {
    if (opts.grid < 2) throw ValidationError("--grid: must be at least 2");

    // First target drives the summary; the remaining optima are reported too.
    std::vector<Mat<double>> targets;
    if (resolved.policy.kind == PolicyKind::aggregate_toll) {
      targets.push_back(resolved.policy.target);
    } else {
      if (!optima_cache) optima_cache = solve_optima(inst, opts.exec);
      const int index = opts.optimum_index.value_or(0);
      if (index < 0 || index >= static_cast<int>(optima_cache->optima.size()))
        throw ValidationError("--optimum-index out of range");
      targets.push_back(optima_cache->optima[index]);
    }
    if (!optima_cache) optima_cache = solve_optima(inst, opts.exec);
    for (const Mat<double>& opt : optima_cache->optima) {
      double dist = 0.0;
      for (std::size_t i = 0; i < opt.size(); ++i)
        dist = std::max(dist, std::abs(opt.data()[i] - targets[0].data()[i]));
      if (dist > 1e-9) targets.push_back(opt);
    }

    const SweepResult sweep =
        basin_sweep_multi(opts.grid, resolved.policy, gp, inst.phi, targets, cfg,
                          opts.exec);

    std::vector<std::vector<std::string>> rows;
    rows.reserve(sweep.rows.size());
    for (const SweepRow& row : sweep.rows)
      rows.push_back({format_double(row.z11_0), format_double(row.z21_0),
                      row.converged_to == 0 ? "1" : "0",
                      format_double(row.distance[0])});
    const std::string csv_path = opts.out_dir + "/sweep_summary.csv";
    pending.emplace_back(csv_path,
                         csv_text({"z11_0", "z21_0", "converged", "final_dist"}, rows));
    report.files.push_back(csv_path);

    json converged = json::array();
    for (std::size_t t = 0; t < targets.size(); ++t)
      converged.push_back(
          {{"target", to_json(targets[t])}, {"count", sweep.converged[t]}});
    report.body["sweep"] = {{"grid", opts.grid},
                            {"total", sweep.total},
                            {"converged", std::move(converged)},
                            {"unconverged", sweep.unconverged}};
    report.body["monitors"] = monitors_to_json(sweep.monitors);
  }

  write_report(opts.out_dir, report, pending);
  return report;
}

// ---------------------------------------------------------------------------
// field

RunReport cmd_field(const Scenario& scenario, const CommandOptions& opts) {
  const Instance inst = build_instance(scenario);
  if (inst.groups != 2 || inst.path_count != 2)
    throw UnsupportedDimension("field: requires two groups on two paths");
  const GroupProfile& gp = scenario.groups;
  std::optional<SocialOptimumResult> optima_cache;
  const ResolvedPolicy resolved = resolve_policy(inst, opts, optima_cache);
  const int n = opts.resolution;
  if (n < 2) throw ValidationError("--resolution: must be at least 2");
  const double m1 = gp.masses[0];
  const double m2 = gp.masses[1];

  RunReport report;
  PendingFiles pending;

  // welfare contour
  std::vector<std::vector<std::string>> sw_rows;
  double sw_max = -std::numeric_limits<double>::infinity();
  std::pair<double, double> sw_argmax{0.0, 0.0};
  for (int i = 0; i < n; ++i) {
    const double z11 = m1 * i / (n - 1);
    for (int j = 0; j < n; ++j) {
      const double z21 = m2 * j / (n - 1);
      const Mat<double> z{{z11, m1 - z11}, {z21, m2 - z21}};
      const double sw = social_welfare(z, inst.cost);
      if (sw > sw_max) {
        sw_max = sw;
        sw_argmax = {z11, z21};
      }
      sw_rows.push_back(
          {format_double(z11), format_double(z21), format_double(sw)});
    }
  }
  const std::string sw_path = opts.out_dir + "/sw_contour.csv";
  pending.emplace_back(sw_path, csv_text({"z11", "z21", "sw"}, sw_rows));
  report.files.push_back(sw_path);
  report.body["sw_grid_max"] = sw_max;
  report.body["sw_grid_argmax"] = json::array({sw_argmax.first, sw_argmax.second});

  // log-Lyapunov contour, where defined
  if (resolved.policy.kind == PolicyKind::aggregate_toll && is_two_by_two_identity(inst)) {
    const LyapunovWeights weights =
        lyapunov_weights(gp.thetas, resolved.policy, inst.phi);
    std::vector<std::vector<std::string>> rows;
    for (int i = 0; i < n; ++i) {
      const double z11 = m1 * i / (n - 1);
      for (int j = 0; j < n; ++j) {
        const double z21 = m2 * j / (n - 1);
        const Mat<double> z{{z11, m1 - z11}, {z21, m2 - z21}};
        std::string cell;
        try {
          cell = format_double(lyapunov_log_value(z, resolved.policy.target, weights));
        } catch (const DomainError&) {
          // boundary cell off the target's support
        }
        rows.push_back({format_double(z11), format_double(z21), cell});
      }
    }
    const std::string path = opts.out_dir + "/lyapunov_contour.csv";
    pending.emplace_back(path, csv_text({"z11", "z21", "w"}, rows));
    report.files.push_back(path);
  }

  // replicator field
  const std::vector<VectorFieldRow> field =
      vector_field(n, resolved.policy, gp, inst.phi, opts.exec);
  std::vector<std::vector<std::string>> field_rows;
  field_rows.reserve(field.size());
  for (const VectorFieldRow& row : field)
    field_rows.push_back({format_double(row.z11), format_double(row.z21),
                          format_double(row.dz11), format_double(row.dz21)});
  const std::string field_path = opts.out_dir + "/vector_field.csv";
  pending.emplace_back(field_path,
                       csv_text({"z11", "z21", "dz11", "dz21"}, field_rows));
  report.files.push_back(field_path);

  // rest-point markers
  std::vector<PortraitMarker> markers;
  if (resolved.policy.kind == PolicyKind::aggregate_toll) {
    markers.push_back({resolved.policy.target(0, 0), resolved.policy.target(1, 0), "red",
                       "target optimum"});
  } else {
    if (!optima_cache) optima_cache = solve_optima(inst, opts.exec);
    for (const Mat<double>& opt : optima_cache->optima)
      markers.push_back({opt(0, 0), opt(1, 0), "red", "social optimum"});
    if (const auto saddle = interior_kkt_point(gp))
      markers.push_back({(*saddle)(0, 0), (*saddle)(1, 0), "blue", "saddle point"});
  }
  json marker_json = json::array();
  for (const PortraitMarker& m : markers)
    marker_json.push_back(
        {{"z_free", json::array({m.x, m.y})}, {"color", m.color}, {"label", m.label}});
  report.body["markers"] = std::move(marker_json);

  if (opts.svg) {
    const std::string svg_path = opts.out_dir + "/phase_portrait.svg";
    pending.emplace_back(svg_path, render_phase_portrait(field, markers, m1, m2));
    report.files.push_back(svg_path);
  }

  write_report(opts.out_dir, report, pending);
  return report;
}

// ---------------------------------------------------------------------------
// verify

namespace {

struct Check {
  std::string name;
  bool pass = false;
  std::string detail;
};

class CheckList {
 public:
  explicit CheckList(std::vector<Check>& sink) : sink_(sink) {}

  void add(const std::string& name, bool pass, const std::string& detail = "") {
    sink_.push_back({name, pass, detail});
  }

  template <class F>
  void run(const std::string& name, F&& body) {
    try {
      body();
    } catch (const std::exception& e) {
      sink_.push_back({name, false, std::string("exception: ") + e.what()});
    }
  }

 private:
  std::vector<Check>& sink_;
};

double max_abs_diff(const Mat<double>& a, const Mat<double>& b) {
  double out = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    out = std::max(out, std::abs(a.data()[i] - b.data()[i]));
  return out;
}

bool is_running_example(const Instance& inst) {
  if (!is_two_by_two_identity(inst)) return false;
  const GroupProfile& gp = inst.scenario.groups;
  return std::abs(gp.masses[0] - 0.5) < 1e-12 && std::abs(gp.masses[1] - 0.5) < 1e-12 &&
         std::abs(gp.thetas[0] - 0.5) < 1e-12 && std::abs(gp.thetas[1] - 1.5) < 1e-12;
}

}  // namespace

RunReport cmd_verify(const Scenario& scenario, const CommandOptions& opts) {
  const Instance inst = build_instance(scenario);
  const GroupProfile& gp = scenario.groups;
  const int paths = inst.path_count;
  std::vector<Check> checks;
  CheckList list(checks);

  // structural invariants of the enumeration
  list.run("paths_chain_and_distinct", [&] {
    bool ok = true;
    for (const Path& p : inst.paths.paths) {
      int node = scenario.network.origin;
      std::vector<char> used(scenario.network.edges.size(), 0);
      for (int e : p) {
        if (scenario.network.edges[e].first != node || used[e]) ok = false;
        used[e] = 1;
        node = scenario.network.edges[e].second;
      }
      if (node != scenario.network.destination || p.empty()) ok = false;
    }
    list.add("paths_chain_and_distinct", ok);
  });

  list.run("overlap_pairwise_counts", [&] {
    bool ok = true;
    for (int k = 0; k < paths && ok; ++k)
      for (int l = 0; l < paths && ok; ++l) {
        int shared = 0;
        for (int e : inst.paths.paths[k])
          shared += std::count(inst.paths.paths[l].begin(), inst.paths.paths[l].end(), e);
        if (inst.phi(k, l) != shared) ok = false;
      }
    list.add("overlap_pairwise_counts", ok);
  });

  auto rng = seeded_rng(scenario, 101);

  list.run("aggregate_mass_conserved", [&] {
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      const std::vector<double> x = aggregate(random_state(rng, gp, paths));
      double total = 0.0;
      for (double v : x) total += v;
      worst = std::max(worst, std::abs(total - 1.0));
    }
    list.add("aggregate_mass_conserved", worst <= 1e-12,
             "max deviation " + format_double(worst));
  });

  list.run("payoffs_match_blockwise_formula", [&] {
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      const Mat<double> z = random_state(rng, gp, paths);
      const Mat<double> v = base_payoffs(z, inst.cost);
      const std::vector<double> x = aggregate(z);
      for (int r = 0; r < inst.groups; ++r)
        for (int k = 0; k < paths; ++k) {
          double acc = 0.0;
          for (int l = 0; l < paths; ++l) acc += inst.phi(k, l) * x[l];
          worst = std::max(worst, std::abs(v(r, k) + gp.thetas[r] * acc));
        }
    }
    list.add("payoffs_match_blockwise_formula", worst <= 1e-12,
             "max deviation " + format_double(worst));
  });

  list.run("welfare_is_total_payoff", [&] {
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      const Mat<double> z = random_state(rng, gp, paths);
      const Mat<double> v = base_payoffs(z, inst.cost);
      double total = 0.0;
      for (std::size_t i = 0; i < z.size(); ++i) total += z.data()[i] * v.data()[i];
      worst = std::max(worst, std::abs(total - social_welfare(z, inst.cost)));
    }
    list.add("welfare_is_total_payoff", worst <= 1e-12,
             "max deviation " + format_double(worst));
  });

  std::optional<SocialOptimumResult> optima_cache;
  list.run("optimum_dominates_grid", [&] {
    optima_cache = solve_optima(inst, opts.exec);
    double worst = -std::numeric_limits<double>::infinity();
    if (inst.groups == 2 && paths == 2) {
      for (int i = 0; i <= 100; ++i)
        for (int j = 0; j <= 100; ++j) {
          const double z11 = gp.masses[0] * i / 100.0;
          const double z21 = gp.masses[1] * j / 100.0;
          const Mat<double> z{{z11, gp.masses[0] - z11}, {z21, gp.masses[1] - z21}};
          worst = std::max(worst, social_welfare(z, inst.cost));
        }
    } else {
      for (int trial = 0; trial < 500; ++trial)
        worst = std::max(worst,
                         social_welfare(random_state(rng, gp, paths), inst.cost));
    }
    list.add("optimum_dominates_grid", optima_cache->sw >= worst - 1e-9,
             "sw* = " + format_double(optima_cache->sw) +
                 ", best sampled = " + format_double(worst));
  });

  // policy payoff decomposition: common per-path toll for every group
  list.run("uniform_fee_decomposition", [&] {
    double worst = 0.0;
    std::vector<Policy<double>> policies{adaptive_pigouvian_policy<double>()};
    if (scenario.policy.kind == PolicyKind::aggregate_toll) {
      const ResolvedPolicy resolved = resolve_policy(inst, opts, optima_cache);
      policies.push_back(resolved.policy);
    }
    for (const Policy<double>& pol : policies)
      for (int trial = 0; trial < 100; ++trial) {
        const Mat<double> z = random_state(rng, gp, paths);
        const Mat<double> v = policy_payoffs(z, pol, gp.thetas, inst.phi);
        const Mat<double> base = base_payoffs(z, inst.cost);
        const std::vector<double> toll = toll_vector(z, pol, gp.thetas, inst.phi);
        for (int r = 0; r < inst.groups; ++r)
          for (int k = 0; k < paths; ++k)
            worst = std::max(worst, std::abs(v(r, k) - (base(r, k) - toll[k])));
      }
    list.add("uniform_fee_decomposition", worst <= 1e-12,
             "max deviation " + format_double(worst));
  });

  if (scenario.policy.kind == PolicyKind::aggregate_toll) {
    list.run("toll_block_consistency", [&] {
      const ResolvedPolicy resolved = resolve_policy(inst, opts, optima_cache);
      const Mat<double> op = cost_operator(resolved.policy, gp.thetas, inst.phi);
      double worst = 0.0;
      for (int trial = 0; trial < 100; ++trial) {
        const Mat<double> z = random_state(rng, gp, paths);
        const std::vector<double> x = aggregate(z);
        const std::vector<double> opz = matvec(op, z.data());
        for (int r = 0; r < inst.groups; ++r) {
          const std::vector<double> bx =
              matvec(toll_block(resolved.policy, gp.thetas, inst.phi, r), x);
          for (int k = 0; k < paths; ++k)
            worst = std::max(worst, std::abs(opz[r * paths + k] - bx[k]));
        }
      }
      list.add("toll_block_consistency", worst <= 1e-12,
               "max deviation " + format_double(worst));
    });

    list.run("target_is_equilibrium", [&] {
      const ResolvedPolicy resolved = resolve_policy(inst, opts, optima_cache);
      const Mat<double> v =
          policy_payoffs(resolved.policy.target, resolved.policy, gp.thetas, inst.phi);
      const auto report = nash_check(resolved.policy.target, v, 1e-9);
      list.add("target_is_equilibrium", report.is_nash,
               "worst violation " + format_double(report.worst_violation));
    });
  }

  if (paths >= 2) {
    list.run("kronecker_matches_jacobi", [&] {
      const ProjectionBasis basis = projection_basis<double>(paths, inst.groups);
      const auto closed = kronecker_spectrum(gp.thetas, inst.phi, basis);
      const auto assembled =
          symmetric_eigenvalues(projected_symmetric_part(inst.cost, basis));
      double worst = 0.0;
      for (std::size_t i = 0; i < closed.eigenvalues.size(); ++i)
        worst = std::max(worst,
                         std::abs(closed.eigenvalues[i] - assembled.eigenvalues[i]));
      list.add("kronecker_matches_jacobi", worst <= 1e-9,
               "max eigenvalue gap " + format_double(worst));
    });

    list.run("projected_overlap_trace_positive", [&] {
      const ProjectionBasis basis = projection_basis<double>(paths, 1);
      const Mat<double> projected =
          matmul(transpose(basis.q), matmul(cast_mat<double>(inst.phi), basis.q));
      double trace = 0.0;
      for (int i = 0; i < projected.rows(); ++i) trace += projected(i, i);
      list.add("projected_overlap_trace_positive", trace > 0.0,
               "trace = " + format_double(trace));
    });
  }

  // trajectory invariants under the scenario's own policy
  {
    const ResolvedPolicy resolved = resolve_policy(inst, opts, optima_cache);
    list.run("simplex_invariance", [&] {
      const Trajectory traj = integrate(uniform_state(gp, paths), resolved.policy, gp,
                                        inst.phi, scenario.integrator, false);
      list.add("simplex_invariance", traj.monitors.max_rowsum_drift <= 1e-9,
               "max drift " + format_double(traj.monitors.max_rowsum_drift));
      list.add("nonnegativity", traj.monitors.min_coordinate >= -1e-12,
               "min coordinate " + format_double(traj.monitors.min_coordinate));
      if (scenario.policy.kind == PolicyKind::adaptive_pigouvian)
        list.add("welfare_monotone", traj.monitors.min_sw_step >= -1e-9,
                 "min step " + format_double(traj.monitors.min_sw_step));
      if (traj.monitors.lyapunov_tracked) {
        list.add("lyapunov_monotone", traj.monitors.min_w_step >= -1e-9,
                 "min step " + format_double(traj.monitors.min_w_step));
        list.add("lyapunov_cd_match", traj.monitors.max_w_cd4_error <= 1e-6,
                 "max error " + format_double(traj.monitors.max_w_cd4_error));
      }
    });

    list.run("face_invariance", [&] {
      Mat<double> z0(inst.groups, paths);
      for (int r = 0; r < inst.groups; ++r) z0(r, 0) = gp.masses[r];
      IntegratorConfig cfg = scenario.integrator;
      cfg.horizon = std::min(cfg.horizon, 50.0);
      const Trajectory traj = integrate(z0, resolved.policy, gp, inst.phi, cfg, false);
      bool ok = true;
      for (int r = 0; r < inst.groups; ++r)
        for (int k = 1; k < paths; ++k)
          if (traj.final_state(r, k) != 0.0) ok = false;
      list.add("face_invariance", ok);
    });

    list.run("step_halving_stability", [&] {
      IntegratorConfig cfg = scenario.integrator;
      cfg.horizon = std::min(cfg.horizon, 200.0);
      Mat<double> z0 = random_state(rng, gp, paths, 0.05);
      const Trajectory coarse = integrate(z0, resolved.policy, gp, inst.phi, cfg, false);
      cfg.h /= 2.0;
      const Trajectory fine = integrate(z0, resolved.policy, gp, inst.phi, cfg, false);
      const double gap = max_abs_diff(coarse.final_state, fine.final_state);
      list.add("step_halving_stability", gap < 1e-6, "endpoint moved " + format_double(gap));
    });
  }

  if (is_two_by_two_identity(inst)) {
    list.run("nash_equilibrium_line", [&] {
      const json result = nash_line_check(inst, seeded_rng(scenario, 7));
      list.add("nash_equilibrium_line",
               result["on_line_pass"] == 101 && result["off_line_fail"] == 200,
               result.dump());
    });

    if (const auto saddle = interior_kkt_point(gp)) {
      list.run("saddle_and_optima_classification", [&] {
        const Policy<double> pigouvian = adaptive_pigouvian_policy<double>();
        bool ok = rest_point_check(*saddle, pigouvian, gp, inst.phi, 1e-9);
        ok = ok && classify_rest_point(*saddle, pigouvian, gp, inst.phi).cls ==
                       RestPointClass::saddle_like;
        if (!optima_cache) optima_cache = solve_optima(inst, opts.exec);
        for (const Mat<double>& opt : optima_cache->optima)
          ok = ok && classify_rest_point(opt, pigouvian, gp, inst.phi).cls ==
                         RestPointClass::attracting;
        list.add("saddle_and_optima_classification", ok);
      });

      if (scenario.policy.kind == PolicyKind::adaptive_pigouvian) {
        list.run("no_global_attractor_under_pigouvian", [&] {
          if (!optima_cache) optima_cache = solve_optima(inst, opts.exec);
          if (optima_cache->optima.size() < 2) {
            list.add("no_global_attractor_under_pigouvian", false, "expected two optima");
            return;
          }
          const SweepResult sweep = basin_sweep_multi(
              21, adaptive_pigouvian_policy<double>(), gp, inst.phi,
              optima_cache->optima, scenario.integrator, opts.exec);
          const bool mix = sweep.converged[0] >= 1 && sweep.converged[1] >= 1 &&
                           sweep.converged[0] < sweep.total &&
                           sweep.converged[1] < sweep.total;
          list.add("no_global_attractor_under_pigouvian", mix,
                   "counts " + std::to_string(sweep.converged[0]) + "/" +
                       std::to_string(sweep.converged[1]) + " of " +
                       std::to_string(sweep.total));
        });
      }
    } else {
      list.run("welfare_concave_with_equal_time_values", [&] {
        const ProjectionBasis basis = projection_basis<double>(2, 2);
        const auto spec = kronecker_spectrum(gp.thetas, inst.phi, basis);
        list.add("welfare_concave_with_equal_time_values",
                 spec.eigenvalues.front() >= -1e-9,
                 "min eigenvalue " + format_double(spec.eigenvalues.front()));
      });
    }

    if (scenario.policy.kind == PolicyKind::aggregate_toll) {
      list.run("global_convergence_under_aggregate_toll", [&] {
        const ResolvedPolicy resolved = resolve_policy(inst, opts, optima_cache);
        const BasinSweepReport sweep =
            basin_sweep(21, resolved.policy, gp, inst.phi, resolved.policy.target,
                        scenario.integrator, opts.exec);
        list.add("global_convergence_under_aggregate_toll",
                 sweep.converged_count == sweep.total,
                 std::to_string(sweep.converged_count) + "/" +
                     std::to_string(sweep.total) + " converged");
        list.add("sweep_lyapunov_monotone", sweep.monitors.min_w_step >= -1e-9,
                 "min step " + format_double(sweep.monitors.min_w_step));
        list.add("sweep_lyapunov_cd_match", sweep.monitors.max_w_cd4_error <= 1e-6,
                 "max error " + format_double(sweep.monitors.max_w_cd4_error));
      });
    }
  }

  if (is_running_example(inst)) {
    list.run("example_optima_values", [&] {
      if (!optima_cache) optima_cache = solve_optima(inst, opts.exec);
      bool ok = optima_cache->optima.size() == 2;
      if (ok) {
        ok = std::abs(optima_cache->optima[0](0, 0) - 0.0) < 1e-4 &&
             std::abs(optima_cache->optima[0](1, 0) - 5.0 / 12.0) < 1e-4 &&
             std::abs(optima_cache->optima[1](0, 0) - 0.5) < 1e-4 &&
             std::abs(optima_cache->optima[1](1, 0) - 1.0 / 12.0) < 1e-4;
        ok = ok && std::abs(optima_cache->sw - (-23.0 / 48.0)) < 1e-9;
        for (const Mat<double>& opt : optima_cache->optima)
          ok = ok && std::abs(social_welfare(opt, inst.cost) - (-23.0 / 48.0)) < 1e-9;
      }
      const Mat<double> saddle{{0.25, 0.25}, {0.25, 0.25}};
      ok = ok && rest_point_check(saddle, adaptive_pigouvian_policy<double>(), gp,
                                  inst.phi, 1e-9);
      ok = ok && std::abs(social_welfare(saddle, inst.cost) - (-0.5)) < 1e-9;
      list.add("example_optima_values", ok);
    });

    list.run("example_base_spectrum", [&] {
      const ProjectionBasis basis = projection_basis<double>(2, 2);
      const auto spec =
          symmetric_eigenvalues(projected_symmetric_part(inst.cost, basis));
      const bool ok =
          std::abs(spec.eigenvalues[0] - (2.0 - std::sqrt(5.0))) < 1e-9 &&
          std::abs(spec.eigenvalues[1] - (2.0 + std::sqrt(5.0))) < 1e-9;
      list.add("example_base_spectrum", ok);
    });

    if (scenario.policy.kind == PolicyKind::aggregate_toll) {
      const ResolvedPolicy resolved = resolve_policy(inst, opts, optima_cache);
      const Mat<double> expected{{0.5, 0.0}, {1.0 / 12.0, 5.0 / 12.0}};
      if (max_abs_diff(resolved.policy.target, expected) < 1e-6) {
        list.run("example_toll_spectrum_and_ess", [&] {
          const ProjectionBasis basis = projection_basis<double>(2, 2);
          const auto report = taylor_ess_check(
              cost_operator(resolved.policy, gp.thetas, inst.phi), basis);
          const bool ok =
              std::abs(report.spectrum.eigenvalues[0] - (29.0 - std::sqrt(890.0)) / 7.0) <
                  1e-9 &&
              std::abs(report.spectrum.eigenvalues[1] - (29.0 + std::sqrt(890.0)) / 7.0) <
                  1e-9 &&
              !report.is_taylor_ess;
          list.add("example_toll_spectrum_and_ess", ok);
        });

        list.run("example_exact_payoffs_at_target", [&] {
          // exact rational route through the same templated kernels
          const std::vector<Rational> masses{Rational(1, 2), Rational(1, 2)};
          const std::vector<Rational> thetas{Rational(1, 2), Rational(3, 2)};
          const Mat<Rational> target{{Rational(1, 2), 0},
                                     {Rational(1, 12), Rational(5, 12)}};
          const Policy<Rational> pol = aggregate_toll_policy(target, masses);
          const Mat<Rational> v = policy_payoffs(target, pol, thetas, inst.phi);
          const bool ok = v(1, 0) == Rational(-5, 4) && v(1, 1) == Rational(-5, 4) &&
                          v(0, 0) == Rational(-2, 3) && v(0, 1) == Rational(-5, 6) &&
                          v(0, 0) > v(0, 1);
          const auto weights = lyapunov_weights(thetas, pol, inst.phi);
          const bool weights_ok =
              weights.delta == Rational(15, 7) && weights.q[1] == Rational(11, 18);
          list.add("example_exact_payoffs_at_target", ok && weights_ok);
        });
      }
    }
  }

  RunReport report;
  json check_json = json::array();
  int failed = 0;
  for (const Check& c : checks) {
    check_json.push_back({{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
    if (!c.pass) ++failed;
  }
  report.body["checks"] = std::move(check_json);
  report.body["passed"] = static_cast<int>(checks.size()) - failed;
  report.body["failed"] = failed;
  report.ok = failed == 0;
  write_report(opts.out_dir, report);
  return report;
}

// ---------------------------------------------------------------------------
// CLI

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"congestion pricing on road networks: analysis and simulation"};
  app.require_subcommand(1);

  std::string scenario_path;
  CommandOptions opts;
  std::string z0_text;
  int optimum_index = -1;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--scenario", scenario_path, "scenario JSON file")->required();
    sub->add_option("--out", opts.out_dir, "output directory (default: out)");
  };

  CLI::App* analyze = app.add_subcommand(
      "analyze", "optima, spectra, equilibrium structure");
  add_common(analyze);
  analyze->add_option("--optimum-index", optimum_index,
                      "target optimum for the aggregate toll");

  CLI::App* simulate =
      app.add_subcommand("simulate", "integrate trajectories or basin sweeps");
  add_common(simulate);
  simulate->add_option("--grid", opts.grid, "N x N basin sweep of interior starts");
  simulate->add_option("--z0", z0_text, "comma-separated start state");
  simulate->add_option("--optimum-index", optimum_index,
                       "target optimum for tolls and sweeps");

  CLI::App* field =
      app.add_subcommand("field", "welfare/Lyapunov contours and vector fields");
  add_common(field);
  field->add_option("--resolution", opts.resolution, "grid resolution (default 41)");
  field->add_flag("--svg", opts.svg, "also render a phase-portrait SVG");
  field->add_option("--optimum-index", optimum_index,
                    "target optimum for the aggregate toll");

  CLI::App* verify =
      app.add_subcommand("verify", "run the invariant and acceptance checks");
  add_common(verify);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {  // --help
      std::cout << app.help();
      return 0;
    }
    std::cerr << e.what() << '\n';
    return 2;
  }

  if (optimum_index >= 0) opts.optimum_index = optimum_index;
  if (!z0_text.empty()) {
    std::vector<double> values;
    std::istringstream stream(z0_text);
    std::string token;
    while (std::getline(stream, token, ',')) {
      try {
        values.push_back(std::stod(token));
      } catch (const std::exception&) {
        std::cerr << "--z0: cannot parse '" << token << "' as a number\n";
        return 2;
      }
    }
    opts.z0 = std::move(values);
  }

  try {
    const Scenario scenario = load_scenario(scenario_path);
    RunReport report;
    if (analyze->parsed()) {
      report = cmd_analyze(scenario, opts);
      std::cout << "optima: " << report.body["optima"].size()
                << ", sw* = " << report.body["sw_optimum"] << '\n';
    } else if (simulate->parsed()) {
      report = cmd_simulate(scenario, opts);
      if (report.body.contains("sweep"))
        std::cout << "sweep: " << report.body["sweep"]["converged"][0]["count"] << "/"
                  << report.body["sweep"]["total"] << " converged to the target\n";
      else
        std::cout << "trajectory rows: " << report.body["rows"] << '\n';
    } else if (field->parsed()) {
      report = cmd_field(scenario, opts);
      std::cout << "field files: " << report.files.size() << '\n';
    } else {
      report = cmd_verify(scenario, opts);
      for (const auto& check : report.body["checks"])
        std::cout << (check["pass"].get<bool>() ? "PASS " : "FAIL ")
                  << check["name"].get<std::string>()
                  << (check["detail"].get<std::string>().empty()
                          ? ""
                          : "  (" + check["detail"].get<std::string>() + ")")
                  << '\n';
      std::cout << report.body["passed"] << " passed, " << report.body["failed"]
                << " failed\n";
    }
    for (const std::string& file : report.files) std::cout << "wrote " << file << '\n';
    return report.ok ? 0 : 1;
  } catch (const ParseError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return 2;
  } catch (const EmptyPathSet& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return 2;
  } catch (const UnsupportedDimension& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return 2;
  } catch (const DimensionMismatch& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace roadtoll
