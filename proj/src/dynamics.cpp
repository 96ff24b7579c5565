#include "roadtoll/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "roadtoll/analysis.hpp"

namespace roadtoll {

void IntegratorConfig::validate(const GroupProfile& gp, int paths) const {
  if (!(h > 0.0)) throw ValidationError("integrator.h: must be positive");
  if (!(horizon > 0.0)) throw ValidationError("integrator.T: must be positive");
  if (record_every < 1)
    throw ValidationError("integrator.record_every: must be at least 1");
  if (!(tol > 0.0)) throw ValidationError("integrator.tol: must be positive");
  const double min_mass = *std::min_element(gp.masses.begin(), gp.masses.end());
  if (!(floor > 0.0) || !(floor < min_mass / paths))
    throw ValidationError("integrator.epsilon: must lie in (0, min_r m_r / K)");
}

Mat<double> replicator_rhs(const Mat<double>& z, const Mat<double>& payoffs,
                           const GroupProfile& gp) {
  if (z.rows() != payoffs.rows() || z.cols() != payoffs.cols())
    throw DimensionMismatch("replicator_rhs: state/payoff shape mismatch");
  Mat<double> dz(z.rows(), z.cols());
  for (int r = 0; r < z.rows(); ++r) {
    double mean = 0.0;
    for (int k = 0; k < z.cols(); ++k) mean += z(r, k) * payoffs(r, k);
    mean /= gp.masses[r];
    for (int k = 0; k < z.cols(); ++k) dz(r, k) = z(r, k) * (payoffs(r, k) - mean);
  }
  return dz;
}

namespace {

// Flat-state RK4 stepper owning all scratch, so sweeps allocate once per
// trajectory.
class Rk4 {
 public:
  Rk4(const Mat<double>& cost_op, const GroupProfile& gp)
      : op_(cost_op),
        masses_(gp.masses),
        n_(cost_op.rows()),
        paths_(n_ / gp.groups()),
        k1_(n_), k2_(n_), k3_(n_), k4_(n_), tmp_(n_), v_(n_) {}

  struct StepStats {
    double rowsum_drift = 0.0;
    double min_coordinate = 0.0;
  };

  void rhs(const std::vector<double>& z, std::vector<double>& dz) {
    for (int i = 0; i < n_; ++i) {
      double acc = 0.0;
      for (int j = 0; j < n_; ++j) acc += op_(i, j) * z[j];
      v_[i] = -acc;
    }
    for (std::size_t r = 0; r < masses_.size(); ++r) {
      const int base = static_cast<int>(r) * paths_;
      double mean = 0.0;
      for (int k = 0; k < paths_; ++k) mean += z[base + k] * v_[base + k];
      mean /= masses_[r];
      for (int k = 0; k < paths_; ++k) dz[base + k] = z[base + k] * (v_[base + k] - mean);
    }
  }

  StepStats step(std::vector<double>& z, double h) {
    rhs(z, k1_);
    for (int i = 0; i < n_; ++i) tmp_[i] = z[i] + 0.5 * h * k1_[i];
    rhs(tmp_, k2_);
    for (int i = 0; i < n_; ++i) tmp_[i] = z[i] + 0.5 * h * k2_[i];
    rhs(tmp_, k3_);
    for (int i = 0; i < n_; ++i) tmp_[i] = z[i] + h * k3_[i];
    rhs(tmp_, k4_);
    const double w = h / 6.0;
    for (int i = 0; i < n_; ++i)
      z[i] += w * (k1_[i] + 2.0 * (k2_[i] + k3_[i]) + k4_[i]);

    StepStats stats;
    for (std::size_t r = 0; r < masses_.size(); ++r) {
      const int base = static_cast<int>(r) * paths_;
      double row = 0.0;
      for (int k = 0; k < paths_; ++k) {
        stats.min_coordinate = std::min(stats.min_coordinate, z[base + k]);
        row += z[base + k];
      }
      stats.rowsum_drift = std::max(stats.rowsum_drift, std::abs(row - masses_[r]));
      double clamped = 0.0;
      for (int k = 0; k < paths_; ++k) {
        if (z[base + k] < 0.0) z[base + k] = 0.0;
        clamped += z[base + k];
      }
      if (!(clamped > 0.0)) throw StateDrift("population row collapsed to zero");
      const double factor = masses_[r] / clamped;
      for (int k = 0; k < paths_; ++k) z[base + k] *= factor;
    }
    return stats;
  }

 private:
  const Mat<double>& op_;
  const std::vector<double>& masses_;
  int n_;
  int paths_;
  std::vector<double> k1_, k2_, k3_, k4_, tmp_, v_;
};

double sw_flat(const Mat<double>& a, const std::vector<double>& z) {
  double acc = 0.0;
  for (int i = 0; i < a.rows(); ++i) {
    double az = 0.0;
    for (int j = 0; j < a.cols(); ++j) az += a(i, j) * z[j];
    acc += z[i] * az;
  }
  return -acc;
}

// Precomputed pieces of W and dW/dt so the per-step monitor is a handful of
// multiplications.
struct LyapunovTracker {
  std::vector<int> support;           // flat indices with z*_rk > 0
  std::vector<double> coefficient;    // q_r z*_rk on the support
  std::vector<double> zstar;          // flat target
  std::vector<double> q;              // group weights
  std::vector<Mat<double>> blocks;    // B_r^tau
  int paths = 0;

  double value(const std::vector<double>& z) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < support.size(); ++i) {
      const double zi = z[support[i]];
      if (!(zi > 0.0)) throw DomainError("log-Lyapunov undefined: coordinate hit zero");
      acc += coefficient[i] * std::log(zi);
    }
    return acc;
  }

  double derivative(const std::vector<double>& z) const {
    const int groups = static_cast<int>(q.size());
    double x[8];
    for (int l = 0; l < paths; ++l) {
      x[l] = 0.0;
      for (int s = 0; s < groups; ++s) x[l] += z[s * paths + l];
    }
    double total = 0.0;
    for (int r = 0; r < groups; ++r) {
      const Mat<double>& b = blocks[r];
      double inner = 0.0;
      for (int k = 0; k < paths; ++k) {
        double bx = 0.0;
        for (int l = 0; l < paths; ++l) bx += b(k, l) * x[l];
        inner += (zstar[r * paths + k] - z[r * paths + k]) * bx;
      }
      total -= q[r] * inner;
    }
    return total;
  }
};

}  // namespace

Trajectory integrate(const Mat<double>& z0, const Policy<double>& pol,
                     const GroupProfile& gp, const Mat<int>& phi,
                     const IntegratorConfig& cfg, bool record_points) {
  const int paths = phi.rows();
  cfg.validate(gp, paths);
  validate_state(z0, gp, 1e-9);

  const Mat<double> cost_op = cost_operator(pol, gp.thetas, phi);

  // Lyapunov tracking is available for the aggregate toll on the two-group,
  // two-independent-path case, from starts interior on the target's support.
  std::optional<LyapunovTracker> tracker;
  if (pol.kind == PolicyKind::aggregate_toll && gp.groups() == 2 && paths == 2 &&
      phi == Mat<int>::identity(2)) {
    const LyapunovWeights weights = lyapunov_weights(gp.thetas, pol, phi);
    LyapunovTracker t;
    t.paths = paths;
    t.q = weights.q;
    t.zstar = pol.target.data();
    bool interior_on_support = true;
    for (int r = 0; r < 2; ++r) {
      t.blocks.push_back(toll_block(pol, gp.thetas, phi, r));
      for (int k = 0; k < 2; ++k)
        if (pol.target(r, k) > 0.0) {
          if (!(z0(r, k) > 0.0)) interior_on_support = false;
          t.support.push_back(r * paths + k);
          t.coefficient.push_back(weights.q[r] * pol.target(r, k));
        }
    }
    if (interior_on_support) tracker = std::move(t);
  }

  const std::int64_t steps = std::llround(cfg.horizon / cfg.h);
  const Mat<double> base_cost = cost_matrix(gp.thetas, phi);
  Rk4 stepper(cost_op, gp);
  std::vector<double> z = z0.data();

  Trajectory out;
  out.monitors.lyapunov_tracked = tracker.has_value();

  double w_window[5] = {0, 0, 0, 0, 0};
  double wdot_window[5] = {0, 0, 0, 0, 0};
  int window_fill = 0;
  double sw_prev = 0.0;

  for (std::int64_t n = 0; n <= steps; ++n) {
    const double t = static_cast<double>(n) * cfg.h;
    const double sw = sw_flat(base_cost, z);
    if (n > 0)
      out.monitors.min_sw_step = std::min(out.monitors.min_sw_step, sw - sw_prev);
    sw_prev = sw;

    if (tracker) {
      const double w = tracker->value(z);
      const double wdot = tracker->derivative(z);
      for (int i = 0; i < 4; ++i) {
        w_window[i] = w_window[i + 1];
        wdot_window[i] = wdot_window[i + 1];
      }
      w_window[4] = w;
      wdot_window[4] = wdot;
      ++window_fill;
      if (window_fill >= 2)
        out.monitors.min_w_step =
            std::min(out.monitors.min_w_step, w_window[4] - w_window[3]);
      if (window_fill >= 3) {
        const double cd2 = (w_window[4] - w_window[2]) / (2.0 * cfg.h);
        out.monitors.max_w_cd2_error =
            std::max(out.monitors.max_w_cd2_error, std::abs(cd2 - wdot_window[3]));
      }
      if (window_fill >= 5) {
        const double cd4 =
            (-w_window[4] + 8.0 * w_window[3] - 8.0 * w_window[1] + w_window[0]) /
            (12.0 * cfg.h);
        out.monitors.max_w_cd4_error =
            std::max(out.monitors.max_w_cd4_error, std::abs(cd4 - wdot_window[2]));
      }
    }

    if (record_points && (n % cfg.record_every == 0 || n == steps)) {
      TrajectoryPoint pt;
      pt.t = t;
      pt.z = Mat<double>(gp.groups(), paths);
      pt.z.data() = z;
      pt.sw = sw;
      pt.toll = toll_vector(pt.z, pol, gp.thetas, phi);
      if (tracker) pt.lyapunov = w_window[4];
      out.points.push_back(std::move(pt));
    }

    if (n == steps) break;
    const Rk4::StepStats stats = stepper.step(z, cfg.h);
    out.monitors.max_rowsum_drift =
        std::max(out.monitors.max_rowsum_drift, stats.rowsum_drift);
    out.monitors.min_coordinate =
        std::min(out.monitors.min_coordinate, stats.min_coordinate);
    if (stats.rowsum_drift > 1e-9)
      throw StateDrift("row-sum drift " + std::to_string(stats.rowsum_drift) +
                       " exceeds 1e-9");
  }

  out.final_state = Mat<double>(gp.groups(), paths);
  out.final_state.data() = z;
  out.final_time = static_cast<double>(steps) * cfg.h;
  return out;
}

bool rest_point_check(const Mat<double>& z, const Policy<double>& pol,
                      const GroupProfile& gp, const Mat<int>& phi, double tol) {
  const Mat<double> payoffs = policy_payoffs(z, pol, gp.thetas, phi);
  const Mat<double> dz = replicator_rhs(z, payoffs, gp);
  double worst = 0.0;
  for (double v : dz.data()) worst = std::max(worst, std::abs(v));
  return worst <= tol;
}

std::vector<VectorFieldRow> vector_field(const std::vector<double>& z11_axis,
                                         const std::vector<double>& z21_axis,
                                         const Policy<double>& pol,
                                         const GroupProfile& gp, const Mat<int>& phi,
                                         Exec exec) {
  if (gp.groups() != 2 || phi.rows() != 2)
    throw UnsupportedDimension("vector_field: requires R = K = 2");
  if (z11_axis.empty() || z21_axis.empty())
    throw ValidationError("vector_field: empty axis");
  const double m1 = gp.masses[0];
  const double m2 = gp.masses[1];
  const Mat<double> cost_op = cost_operator(pol, gp.thetas, phi);

  const std::size_t cols = z21_axis.size();
  std::vector<VectorFieldRow> rows(z11_axis.size() * cols);
  parallel_for(exec, static_cast<std::int64_t>(z11_axis.size()), [&](std::int64_t i) {
    const double z11 = z11_axis[i];
    for (std::size_t j = 0; j < cols; ++j) {
      const double z21 = z21_axis[j];
      const Mat<double> z{{z11, m1 - z11}, {z21, m2 - z21}};
      const std::vector<double> cost = matvec(cost_op, z.data());
      Mat<double> payoffs(2, 2);
      for (int idx = 0; idx < 4; ++idx) payoffs.data()[idx] = -cost[idx];
      const Mat<double> dz = replicator_rhs(z, payoffs, gp);
      rows[static_cast<std::size_t>(i) * cols + j] = {z11, z21, dz(0, 0), dz(1, 0)};
    }
  });
  return rows;
}

std::vector<VectorFieldRow> vector_field(int resolution, const Policy<double>& pol,
                                         const GroupProfile& gp, const Mat<int>& phi,
                                         Exec exec) {
  if (gp.groups() != 2 || phi.rows() != 2)
    throw UnsupportedDimension("vector_field: requires R = K = 2");
  if (resolution < 2) throw ValidationError("vector_field: resolution must be >= 2");
  std::vector<double> z11_axis(resolution), z21_axis(resolution);
  for (int i = 0; i < resolution; ++i) {
    z11_axis[i] = gp.masses[0] * static_cast<double>(i) / (resolution - 1);
    z21_axis[i] = gp.masses[1] * static_cast<double>(i) / (resolution - 1);
  }
  return vector_field(z11_axis, z21_axis, pol, gp, phi, exec);
}

SweepResult basin_sweep_multi(int grid_n, const Policy<double>& pol,
                              const GroupProfile& gp, const Mat<int>& phi,
                              const std::vector<Mat<double>>& targets,
                              const IntegratorConfig& cfg, Exec exec) {
  if (gp.groups() != 2 || phi.rows() != 2)
    throw UnsupportedDimension("basin_sweep: requires R = K = 2");
  if (grid_n < 2) throw ValidationError("basin_sweep: grid must be >= 2 per axis");
  cfg.validate(gp, phi.rows());

  const double m1 = gp.masses[0];
  const double m2 = gp.masses[1];
  const int total = grid_n * grid_n;

  SweepResult result;
  result.total = total;
  result.converged.assign(targets.size(), 0);
  result.rows.resize(total);
  std::vector<TrajectoryMonitors> monitors(total);

  parallel_for(exec, total, [&](std::int64_t idx) {
    const int i = static_cast<int>(idx) / grid_n;
    const int j = static_cast<int>(idx) % grid_n;
    const double z11 =
        cfg.floor + (m1 - 2.0 * cfg.floor) * static_cast<double>(i) / (grid_n - 1);
    const double z21 =
        cfg.floor + (m2 - 2.0 * cfg.floor) * static_cast<double>(j) / (grid_n - 1);
    const Mat<double> z0{{z11, m1 - z11}, {z21, m2 - z21}};
    const Trajectory traj = integrate(z0, pol, gp, phi, cfg, /*record_points=*/false);
    monitors[idx] = traj.monitors;

    SweepRow row;
    row.z11_0 = z11;
    row.z21_0 = z21;
    row.distance.resize(targets.size());
    for (std::size_t target = 0; target < targets.size(); ++target) {
      double dist = 0.0;
      for (std::size_t c = 0; c < targets[target].size(); ++c)
        dist = std::max(dist, std::abs(traj.final_state.data()[c] -
                                       targets[target].data()[c]));
      row.distance[target] = dist;
      if (row.converged_to < 0 && dist < cfg.tol)
        row.converged_to = static_cast<int>(target);
    }
    result.rows[idx] = std::move(row);
  });

  for (const SweepRow& row : result.rows) {
    if (row.converged_to >= 0)
      ++result.converged[row.converged_to];
    else
      ++result.unconverged;
  }
  for (const TrajectoryMonitors& m : monitors) {
    result.monitors.max_rowsum_drift =
        std::max(result.monitors.max_rowsum_drift, m.max_rowsum_drift);
    result.monitors.min_coordinate =
        std::min(result.monitors.min_coordinate, m.min_coordinate);
    result.monitors.min_sw_step = std::min(result.monitors.min_sw_step, m.min_sw_step);
    result.monitors.lyapunov_tracked |= m.lyapunov_tracked;
    result.monitors.min_w_step = std::min(result.monitors.min_w_step, m.min_w_step);
    result.monitors.max_w_cd2_error =
        std::max(result.monitors.max_w_cd2_error, m.max_w_cd2_error);
    result.monitors.max_w_cd4_error =
        std::max(result.monitors.max_w_cd4_error, m.max_w_cd4_error);
  }
  return result;
}

BasinSweepReport basin_sweep(int grid_n, const Policy<double>& pol,
                             const GroupProfile& gp, const Mat<int>& phi,
                             const Mat<double>& target, const IntegratorConfig& cfg,
                             Exec exec) {
  const SweepResult sweep = basin_sweep_multi(grid_n, pol, gp, phi, {target}, cfg, exec);
  BasinSweepReport report;
  report.total = sweep.total;
  report.converged_count = sweep.converged[0];
  report.monitors = sweep.monitors;
  for (const SweepRow& row : sweep.rows)
    if (row.converged_to != 0) report.failures.push_back(row);
  return report;
}

}  // namespace roadtoll
