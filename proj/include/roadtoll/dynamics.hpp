#pragma once

#include <limits>
#include <optional>
#include <vector>

#include "roadtoll/game.hpp"
#include "roadtoll/mat.hpp"
#include "roadtoll/parallel.hpp"
#include "roadtoll/pricing.hpp"

namespace roadtoll {

struct IntegratorConfig {
  double h = 0.01;          // step
  double horizon = 2000.0;  // final time T
  int record_every = 100;   // steps between recorded points
  double floor = 1e-3;      // interior inset for sweep grids / Lyapunov starts
  double tol = 1e-3;        // convergence distance for sweeps

  void validate(const GroupProfile& gp, int paths) const;
};

// dz_rk = z_rk * (v_rk - (1/m_r) sum_l z_rl v_rl)
Mat<double> replicator_rhs(const Mat<double>& z, const Mat<double>& payoffs,
                           const GroupProfile& gp);

struct TrajectoryPoint {
  double t = 0.0;
  Mat<double> z;
  double sw = 0.0;
  std::vector<double> toll;
  std::optional<double> lyapunov;  // log-Lyapunov W, aggregate toll on the
                                   // supported two-path two-group case only
};

// Quantities accumulated at every step, whether or not the step is recorded.
struct TrajectoryMonitors {
  double max_rowsum_drift = 0.0;  // before renormalization
  double min_coordinate = 0.0;    // most negative coordinate before clamping
  double min_sw_step = std::numeric_limits<double>::infinity();
  bool lyapunov_tracked = false;
  double min_w_step = std::numeric_limits<double>::infinity();
  double max_w_cd2_error = 0.0;  // analytic dW/dt vs 3-point central stencil
  double max_w_cd4_error = 0.0;  // analytic dW/dt vs 5-point central stencil
};

struct Trajectory {
  std::vector<TrajectoryPoint> points;
  Mat<double> final_state;
  double final_time = 0.0;
  TrajectoryMonitors monitors;
};

// Classical fixed-step RK4 on the flattened state. After each step, negative
// coordinates (truncation-level only) are clamped to zero and each row is
// renormalized to its group mass; throws StateDrift if the pre-renormalization
// row-sum error ever exceeds 1e-9. Set record_points=false to keep only the
// endpoint and the monitors.
Trajectory integrate(const Mat<double>& z0, const Policy<double>& pol,
                     const GroupProfile& gp, const Mat<int>& phi,
                     const IntegratorConfig& cfg, bool record_points = true);

bool rest_point_check(const Mat<double>& z, const Policy<double>& pol,
                      const GroupProfile& gp, const Mat<int>& phi, double tol);

struct VectorFieldRow {
  double z11 = 0.0, z21 = 0.0, dz11 = 0.0, dz21 = 0.0;
};

// Replicator field over the two free coordinates (z11, z21), evaluated at
// every pair from the two axis grids. Requires R = K = 2.
std::vector<VectorFieldRow> vector_field(const std::vector<double>& z11_axis,
                                         const std::vector<double>& z21_axis,
                                         const Policy<double>& pol,
                                         const GroupProfile& gp, const Mat<int>& phi,
                                         Exec exec = Exec::openmp);

// Uniform n x n grid spanning [0,m1] x [0,m2].
std::vector<VectorFieldRow> vector_field(int resolution, const Policy<double>& pol,
                                         const GroupProfile& gp, const Mat<int>& phi,
                                         Exec exec = Exec::openmp);

struct SweepRow {
  double z11_0 = 0.0, z21_0 = 0.0;
  std::vector<double> distance;  // final inf-distance to each target
  int converged_to = -1;         // first target within tol, -1 if none
};

struct SweepResult {
  int total = 0;
  std::vector<int> converged;  // per target
  int unconverged = 0;         // reached no target
  std::vector<SweepRow> rows;
  TrajectoryMonitors monitors;  // aggregated over all trajectories
};

// Integrates an n x n grid of interior starts (inset by cfg.floor) and reports
// which target each trajectory reaches within cfg.tol at time T. Requires
// R = K = 2. Work items are independent; both execution lanes give identical
// results.
SweepResult basin_sweep_multi(int grid_n, const Policy<double>& pol,
                              const GroupProfile& gp, const Mat<int>& phi,
                              const std::vector<Mat<double>>& targets,
                              const IntegratorConfig& cfg, Exec exec = Exec::openmp);

struct BasinSweepReport {
  int converged_count = 0;
  int total = 0;
  std::vector<SweepRow> failures;
  TrajectoryMonitors monitors;
};

BasinSweepReport basin_sweep(int grid_n, const Policy<double>& pol,
                             const GroupProfile& gp, const Mat<int>& phi,
                             const Mat<double>& target, const IntegratorConfig& cfg,
                             Exec exec = Exec::openmp);

}  // namespace roadtoll
