#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "roadtoll/errors.hpp"
#include "roadtoll/mat.hpp"
#include "roadtoll/parallel.hpp"

namespace roadtoll {

// Group masses and values of time. Masses sum to 1 (unit population).
struct GroupProfile {
  std::vector<double> masses;
  std::vector<double> thetas;

  int groups() const { return static_cast<int>(masses.size()); }
  void validate() const;
};

// Population states are R x K matrices z with row r summing to m_r; aggregate
// states are their column sums. Both are plain Mat<T>/std::vector<T> so the
// same kernels run in doubles and in exact rationals.

template <class T>
std::vector<T> aggregate(const Mat<T>& z) {
  std::vector<T> x(z.cols(), T{});
  for (int r = 0; r < z.rows(); ++r)
    for (int k = 0; k < z.cols(); ++k) x[k] += z(r, k);
  return x;
}

// A = (theta 1_R') (x) Phi, flattening group-major: block (r,s) is theta_r*Phi.
template <class T>
Mat<T> cost_matrix(const std::vector<T>& thetas, const Mat<int>& phi) {
  const int R = static_cast<int>(thetas.size());
  const int K = phi.rows();
  Mat<T> a(R * K, R * K);
  for (int r = 0; r < R; ++r)
    for (int s = 0; s < R; ++s)
      for (int k = 0; k < K; ++k)
        for (int l = 0; l < K; ++l)
          a(r * K + k, s * K + l) = thetas[r] * T(phi(k, l));
  return a;
}

// v = -A z on the flattened state, reshaped to R x K.
template <class T>
Mat<T> base_payoffs(const Mat<T>& z, const Mat<T>& a) {
  if (static_cast<int>(z.size()) != a.cols())
    throw DimensionMismatch("base_payoffs: state size != cost matrix dimension");
  const std::vector<T> az = matvec(a, z.data());
  Mat<T> v(z.rows(), z.cols());
  for (std::size_t i = 0; i < v.size(); ++i) v.data()[i] = -az[i];
  return v;
}

// SW(z) = -z'Az.
template <class T>
T social_welfare(const Mat<T>& z, const Mat<T>& a) {
  const std::vector<T> az = matvec(a, z.data());
  T acc{};
  for (std::size_t i = 0; i < z.size(); ++i) acc += z.data()[i] * az[i];
  return -acc;
}

template <class T>
struct GroupNashReport {
  T best_payoff{};
  T worst_gap{};  // max over used strategies of (best - payoff)
};

template <class T>
struct NashReport {
  bool is_nash = false;
  T worst_violation{};
  std::vector<GroupNashReport<T>> per_group;
};

// Best-response characterization: z is Nash iff within each group every
// strategy carrying mass is within tol of the group's best payoff.
template <class T>
NashReport<T> nash_check(const Mat<T>& z, const Mat<T>& payoffs, const T& tol) {
  if (z.rows() != payoffs.rows() || z.cols() != payoffs.cols())
    throw DimensionMismatch("nash_check: state/payoff shape mismatch");
  NashReport<T> report;
  report.is_nash = true;
  report.per_group.resize(z.rows());
  for (int r = 0; r < z.rows(); ++r) {
    T best = payoffs(r, 0);
    for (int k = 1; k < z.cols(); ++k)
      if (payoffs(r, k) > best) best = payoffs(r, k);
    T worst_gap{};
    for (int k = 0; k < z.cols(); ++k) {
      if (!(z(r, k) > tol)) continue;
      const T gap = best - payoffs(r, k);
      if (gap > worst_gap) worst_gap = gap;
    }
    report.per_group[r] = {best, worst_gap};
    if (worst_gap > report.worst_violation) report.worst_violation = worst_gap;
    if (worst_gap > tol) report.is_nash = false;
  }
  return report;
}

struct SolverConfig {
  double grid_step = 1e-3;  // dense pre-scan step, R=K=2 only
  int starts = 64;          // random multi-starts for larger instances
  double tol = 1e-6;        // projected-gradient residual accepted as converged
  int max_iters = 20000;
  std::uint64_t seed = 1;
  Exec exec = Exec::openmp;
};

struct SocialOptimumResult {
  std::vector<Mat<double>> optima;  // distinct maximizers, lexicographic order
  double sw = 0.0;                  // common optimal welfare
};

// Maximizes SW over the product of group simplices by multi-start projected
// gradient ascent; for R=K=2 a dense grid pre-scan seeds the starts so equal-
// welfare corner optima are all found. Throws SolverDidNotConverge when no
// refinement reaches the residual target.
SocialOptimumResult social_optimum(const Mat<double>& a, const GroupProfile& gp,
                                   const SolverConfig& cfg = {});

// Euclidean projection onto {v >= 0, sum(v) = mass}.
void project_simplex(std::vector<double>& v, double mass);

// Validates that z is a population state for gp within tol.
void validate_state(const Mat<double>& z, const GroupProfile& gp, double tol);

// Uniform state z_rk = m_r / K.
Mat<double> uniform_state(const GroupProfile& gp, int paths);

}  // namespace roadtoll
