#include "roadtoll/dynamics.hpp"

#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "roadtoll/analysis.hpp"

using namespace roadtoll;

namespace {

const GroupProfile kProfile{{0.5, 0.5}, {0.5, 1.5}};
const Mat<int> kEye2 = Mat<int>::identity(2);
const Mat<double> kTarget{{0.5, 0.0}, {1.0 / 12.0, 5.0 / 12.0}};

Policy<double> aggregate_policy() { return aggregate_toll_policy(kTarget, kProfile.masses); }

}  // namespace

TEST_CASE("replicator_rhs examples") {
  SUBCASE("uniform state is a rest point without tolls") {
    const Mat<double> z = uniform_state(kProfile, 2);
    const Mat<double> v = policy_payoffs(z, no_toll_policy<double>(), kProfile.thetas, kEye2);
    const Mat<double> dz = replicator_rhs(z, v, kProfile);
    for (double d : dz.data()) CHECK(d == 0.0);
  }
  SUBCASE("hand-evaluated asymmetric state") {
    const Mat<double> z{{0.5, 0.0}, {0.25, 0.25}};
    const Mat<double> v = policy_payoffs(z, no_toll_policy<double>(), kProfile.thetas, kEye2);
    const Mat<double> dz = replicator_rhs(z, v, kProfile);
    CHECK(dz(0, 0) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(dz(0, 1) == 0.0);
    CHECK(dz(1, 0) == doctest::Approx(-3.0 / 32.0).epsilon(1e-12));
    CHECK(dz(1, 1) == doctest::Approx(3.0 / 32.0).epsilon(1e-12));
  }
  SUBCASE("vertex states are rest points") {
    const Mat<double> z{{0.5, 0.0}, {0.0, 0.5}};
    const Mat<double> v = policy_payoffs(z, adaptive_pigouvian_policy<double>(),
                                         kProfile.thetas, kEye2);
    const Mat<double> dz = replicator_rhs(z, v, kProfile);
    for (double d : dz.data()) CHECK(d == 0.0);
  }
}

TEST_CASE("integrate: rest point stays put") {
  const Mat<double> z0 = uniform_state(kProfile, 2);
  IntegratorConfig cfg;
  cfg.horizon = 5.0;
  const Trajectory traj = integrate(z0, no_toll_policy<double>(), kProfile, kEye2, cfg);
  for (std::size_t i = 0; i < z0.size(); ++i)
    CHECK(traj.final_state.data()[i] == doctest::Approx(z0.data()[i]).epsilon(1e-14));
}

TEST_CASE("integrate: aggregate toll drives the uniform start to the target") {
  IntegratorConfig cfg;  // h = 0.01, T = 2000
  const Trajectory traj =
      integrate(uniform_state(kProfile, 2), aggregate_policy(), kProfile, kEye2, cfg);

  double dist = 0.0;
  for (std::size_t i = 0; i < kTarget.size(); ++i)
    dist = std::max(dist, std::abs(traj.final_state.data()[i] - kTarget.data()[i]));
  CHECK(dist < 1e-3);

  // log-Lyapunov bookkeeping along the way
  CHECK(traj.monitors.lyapunov_tracked);
  CHECK(traj.monitors.min_w_step >= -1e-9);
  CHECK(traj.monitors.max_w_cd4_error < 1e-6);

  const Policy<double> pol = aggregate_policy();
  const LyapunovWeights weights = lyapunov_weights(kProfile.thetas, pol, kEye2);
  const double w_target = lyapunov_log_value(kTarget, kTarget, weights);
  const double w_final = lyapunov_log_value(traj.final_state, kTarget, weights);
  CHECK(std::abs(w_final - w_target) < 1e-6);

  // recorded points are valid states and W is nondecreasing across them
  double prev_w = -std::numeric_limits<double>::infinity();
  for (const TrajectoryPoint& pt : traj.points) {
    validate_state(pt.z, kProfile, 1e-12);
    REQUIRE(pt.lyapunov.has_value());
    CHECK(*pt.lyapunov >= prev_w - 1e-9);
    prev_w = *pt.lyapunov;
  }
}

TEST_CASE("integrate: no-toll interior start lands on the equilibrium line") {
  const Mat<double> z0{{0.1, 0.4}, {0.3, 0.2}};
  IntegratorConfig cfg;
  cfg.horizon = 2000.0;
  const Trajectory traj =
      integrate(z0, no_toll_policy<double>(), kProfile, kEye2, cfg, false);
  const double z11 = traj.final_state(0, 0);
  const double z21 = traj.final_state(1, 0);
  CHECK(std::abs(z11 + z21 - 0.5) < 1e-4);
  // regression: converged point recorded from a reference run
  CHECK(z11 == doctest::Approx(0.121060416804).epsilon(1e-6));
  CHECK(z21 == doctest::Approx(0.378939583196).epsilon(1e-6));
}

TEST_CASE("integrate: welfare is nondecreasing under the adaptive Pigouvian policy") {
  const Mat<double> z0{{0.05, 0.45}, {0.40, 0.10}};
  IntegratorConfig cfg;
  cfg.horizon = 500.0;
  const Trajectory traj =
      integrate(z0, adaptive_pigouvian_policy<double>(), kProfile, kEye2, cfg, false);
  CHECK(traj.monitors.min_sw_step >= -1e-9);
}

TEST_CASE("integrate: simplex and nonnegativity margins stay tight") {
  const Mat<double> z0{{0.49, 0.01}, {0.001, 0.499}};
  IntegratorConfig cfg;
  cfg.horizon = 1000.0;
  for (const Policy<double>& pol :
       {no_toll_policy<double>(), adaptive_pigouvian_policy<double>(), aggregate_policy()}) {
    const Trajectory traj = integrate(z0, pol, kProfile, kEye2, cfg, false);
    CHECK(traj.monitors.max_rowsum_drift <= 1e-9);
    CHECK(traj.monitors.min_coordinate >= -1e-12);
  }
}

TEST_CASE("integrate: faces are invariant") {
  const Mat<double> z0{{0.5, 0.0}, {0.2, 0.3}};
  IntegratorConfig cfg;
  cfg.horizon = 50.0;
  const Trajectory traj =
      integrate(z0, no_toll_policy<double>(), kProfile, kEye2, cfg, false);
  CHECK(traj.final_state(0, 1) == 0.0);
}

TEST_CASE("integrate: halving the step barely moves the endpoint") {
  const Mat<double> z0{{0.3, 0.2}, {0.1, 0.4}};
  IntegratorConfig cfg;
  cfg.horizon = 200.0;
  cfg.h = 0.01;
  const Trajectory coarse =
      integrate(z0, aggregate_policy(), kProfile, kEye2, cfg, false);
  cfg.h = 0.005;
  const Trajectory fine = integrate(z0, aggregate_policy(), kProfile, kEye2, cfg, false);
  for (std::size_t i = 0; i < z0.size(); ++i)
    CHECK(std::abs(coarse.final_state.data()[i] - fine.final_state.data()[i]) < 1e-6);
}

TEST_CASE("integrate: configuration validation") {
  const Mat<double> z0 = uniform_state(kProfile, 2);
  IntegratorConfig cfg;
  cfg.h = -0.01;
  CHECK_THROWS_AS(integrate(z0, no_toll_policy<double>(), kProfile, kEye2, cfg),
                  ValidationError);
  cfg = {};
  cfg.floor = 0.3;  // >= min_r m_r / K
  CHECK_THROWS_AS(integrate(z0, no_toll_policy<double>(), kProfile, kEye2, cfg),
                  ValidationError);
}

TEST_CASE("rest_point_check examples") {
  CHECK(rest_point_check(uniform_state(kProfile, 2), adaptive_pigouvian_policy<double>(),
                         kProfile, kEye2, 1e-12));
  CHECK(rest_point_check(kTarget, aggregate_policy(), kProfile, kEye2, 1e-12));
  const Mat<double> generic{{0.31, 0.19}, {0.11, 0.39}};
  CHECK(!rest_point_check(generic, no_toll_policy<double>(), kProfile, kEye2, 1e-6));
}

TEST_CASE("vector_field: grid rows match pointwise evaluation") {
  const std::vector<VectorFieldRow> rows =
      vector_field(3, no_toll_policy<double>(), kProfile, kEye2);
  REQUIRE(rows.size() == 9);
  // center of the grid is the uniform rest point
  const VectorFieldRow& center = rows[4];
  CHECK(center.z11 == doctest::Approx(0.25));
  CHECK(center.z21 == doctest::Approx(0.25));
  CHECK(center.dz11 == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(center.dz21 == doctest::Approx(0.0).epsilon(1e-15));
  // (z11, z21) = (0.5, 0.25) reproduces the hand-evaluated rhs
  const VectorFieldRow& corner = rows[7];
  CHECK(corner.z11 == doctest::Approx(0.5));
  CHECK(corner.z21 == doctest::Approx(0.25));
  CHECK(corner.dz11 == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(corner.dz21 == doctest::Approx(-3.0 / 32.0).epsilon(1e-12));
}

TEST_CASE("vector_field vanishes at the policy rest points") {
  SUBCASE("saddle under the adaptive Pigouvian policy") {
    const std::vector<VectorFieldRow> rows =
        vector_field(3, adaptive_pigouvian_policy<double>(), kProfile, kEye2);
    const VectorFieldRow& center = rows[4];
    CHECK(std::abs(center.dz11) < 1e-15);
    CHECK(std::abs(center.dz21) < 1e-15);
  }
  SUBCASE("target under the aggregate toll, via an explicit axis grid") {
    const std::vector<VectorFieldRow> rows =
        vector_field({0.25, 0.5}, {1.0 / 12.0, 0.25}, aggregate_policy(), kProfile, kEye2);
    REQUIRE(rows.size() == 4);
    // row at (0.5, 1/12) is the target rest point
    CHECK(rows[2].z11 == 0.5);
    CHECK(rows[2].z21 == doctest::Approx(1.0 / 12.0));
    CHECK(std::abs(rows[2].dz11) < 1e-15);
    CHECK(std::abs(rows[2].dz21) < 1e-15);
  }
  SUBCASE("unsupported dimensions are rejected") {
    const GroupProfile one_group{{1.0}, {1.0}};
    CHECK_THROWS_AS(vector_field(3, no_toll_policy<double>(), one_group, kEye2),
                    UnsupportedDimension);
  }
}

TEST_CASE("basin_sweep: the aggregate toll wins every interior start") {
  IntegratorConfig cfg;
  cfg.horizon = 600.0;
  const BasinSweepReport report =
      basin_sweep(5, aggregate_policy(), kProfile, kEye2, kTarget, cfg);
  CHECK(report.total == 25);
  CHECK(report.converged_count == 25);
  CHECK(report.failures.empty());
  CHECK(report.monitors.min_w_step >= -1e-9);
}

TEST_CASE("basin_sweep: serial and OpenMP lanes agree exactly") {
  IntegratorConfig cfg;
  cfg.horizon = 120.0;
  const SweepResult serial = basin_sweep_multi(4, aggregate_policy(), kProfile, kEye2,
                                               {kTarget}, cfg, Exec::serial);
  const SweepResult par = basin_sweep_multi(4, aggregate_policy(), kProfile, kEye2,
                                            {kTarget}, cfg, Exec::openmp);
  REQUIRE(serial.rows.size() == par.rows.size());
  for (std::size_t i = 0; i < serial.rows.size(); ++i) {
    CHECK(serial.rows[i].z11_0 == par.rows[i].z11_0);
    CHECK(serial.rows[i].converged_to == par.rows[i].converged_to);
    CHECK(serial.rows[i].distance == par.rows[i].distance);
  }
}

TEST_CASE("basin_sweep: adaptive Pigouvian splits between the two optima") {
  IntegratorConfig cfg;
  cfg.horizon = 800.0;
  const Mat<double> opt_a{{0.0, 0.5}, {5.0 / 12.0, 1.0 / 12.0}};
  const SweepResult sweep =
      basin_sweep_multi(5, adaptive_pigouvian_policy<double>(), kProfile, kEye2,
                        {opt_a, kTarget}, cfg);
  CHECK(sweep.converged[0] >= 1);
  CHECK(sweep.converged[1] >= 1);
  CHECK(sweep.converged[0] < sweep.total);
  CHECK(sweep.converged[1] < sweep.total);
}

TEST_CASE("basin_sweep: nobody converges to the saddle under the aggregate toll") {
  IntegratorConfig cfg;
  cfg.horizon = 300.0;
  const BasinSweepReport report = basin_sweep(4, aggregate_policy(), kProfile, kEye2,
                                              uniform_state(kProfile, 2), cfg);
  CHECK(report.converged_count == 0);
}

TEST_CASE("serial and OpenMP vector fields are identical") {
  const auto serial =
      vector_field(17, adaptive_pigouvian_policy<double>(), kProfile, kEye2, Exec::serial);
  const auto par =
      vector_field(17, adaptive_pigouvian_policy<double>(), kProfile, kEye2, Exec::openmp);
  REQUIRE(serial.size() == par.size());
  for (std::size_t i = 0; i < serial.size(); ++i) {
    CHECK(serial[i].dz11 == par[i].dz11);
    CHECK(serial[i].dz21 == par[i].dz21);
  }
}
