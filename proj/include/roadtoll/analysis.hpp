#pragma once

#include <vector>

#include "roadtoll/errors.hpp"
#include "roadtoll/game.hpp"
#include "roadtoll/mat.hpp"
#include "roadtoll/pricing.hpp"

namespace roadtoll {

// Q is the K x (K-1) basis of the per-group tangent space (identity over a
// last row of -1s); script_q stacks R diagonal copies for the full state.
template <class T>
struct ProjectionBasisT {
  Mat<T> q;         // K x (K-1)
  Mat<T> script_q;  // RK x R(K-1)
};

using ProjectionBasis = ProjectionBasisT<double>;

template <class T>
ProjectionBasisT<T> projection_basis(int paths, int groups) {
  if (paths < 2) throw UnsupportedDimension("projection basis requires K >= 2");
  Mat<T> q(paths, paths - 1);
  for (int c = 0; c < paths - 1; ++c) {
    q(c, c) = T(1);
    q(paths - 1, c) = T(-1);
  }
  ProjectionBasisT<T> basis;
  basis.script_q = Mat<T>(groups * paths, groups * (paths - 1));
  for (int r = 0; r < groups; ++r)
    for (int i = 0; i < paths; ++i)
      for (int j = 0; j < paths - 1; ++j)
        basis.script_q(r * paths + i, r * (paths - 1) + j) = q(i, j);
  basis.q = std::move(q);
  return basis;
}

// script_q' * (M + M')/2 * script_q
template <class T>
Mat<T> projected_symmetric_part(const Mat<T>& m, const ProjectionBasisT<T>& basis) {
  if (m.rows() != basis.script_q.rows())
    throw DimensionMismatch("projected_symmetric_part: dimension mismatch");
  return matmul(transpose(basis.script_q), matmul(symmetric_part(m), basis.script_q));
}

struct Inertia {
  int positive = 0;
  int zero = 0;
  int negative = 0;
};

struct SpectrumReport {
  std::vector<double> eigenvalues;  // ascending
  Inertia inertia;                  // at tolerance 1e-9
};

// Cyclic Jacobi rotations until the off-diagonal norm falls below 1e-12.
// Throws NotSymmetric if the input is asymmetric beyond 1e-12.
SpectrumReport symmetric_eigenvalues(const Mat<double>& s);

// Spectrum of script_q' B script_q via the Kronecker factorization: closed-form
// eigenvalues of (theta 1' + 1 theta')/2 times the Jacobi spectrum of Q'PhiQ.
SpectrumReport kronecker_spectrum(const std::vector<double>& thetas, const Mat<int>& phi,
                                  const ProjectionBasis& basis);

struct TaylorEssReport {
  bool is_taylor_ess = false;
  SpectrumReport spectrum;
};

// For a cost operator M (payoffs -Mz), the state is a Taylor ESS when the
// projected symmetric part of M is positive definite.
TaylorEssReport taylor_ess_check(const Mat<double>& cost_op, const ProjectionBasis& basis);

template <class T>
struct LyapunovWeightsT {
  std::vector<T> q;  // per-group weights, q[0] = 1
  T delta{};         // sum_t theta_t (psi_t1 + psi_t2)
};

using LyapunovWeights = LyapunovWeightsT<double>;

// Weights for the two-group, two-independent-path case (Phi = I). Rejects
// other dimensions rather than guessing a generalization.
template <class T>
LyapunovWeightsT<T> lyapunov_weights(const std::vector<T>& thetas, const Policy<T>& pol,
                                     const Mat<int>& phi) {
  if (pol.kind != PolicyKind::aggregate_toll)
    throw DomainError("lyapunov_weights: policy has no target");
  if (thetas.size() != 2 || pol.psi.rows() != 2 || pol.psi.cols() != 2)
    throw UnsupportedDimension("lyapunov_weights: defined for R = K = 2 only");
  if (phi != Mat<int>::identity(2))
    throw UnsupportedDimension("lyapunov_weights: requires two independent paths");
  LyapunovWeightsT<T> w;
  w.delta = thetas[0] * (pol.psi(0, 0) + pol.psi(0, 1)) +
            thetas[1] * (pol.psi(1, 0) + pol.psi(1, 1));
  w.q = {T(1), (T(2) * thetas[0] + w.delta) / (T(2) * thetas[1] + w.delta)};
  return w;
}

// W(z) = sum_rk q_r z*_rk ln z_rk, with 0 * ln(.) = 0 where z*_rk = 0. The log
// form of the Lyapunov product; maximized at z*. Throws DomainError when a
// supported coordinate is nonpositive.
double lyapunov_log_value(const Mat<double>& z, const Mat<double>& zstar,
                          const LyapunovWeights& weights);

// dW/dt along the replicator flow under the aggregate toll:
// sum_r q_r (z*_r - z_r)' v_r with v_r = -B_r^tau x(z).
template <class T>
T lyapunov_derivative(const Mat<T>& z, const Mat<T>& zstar,
                      const LyapunovWeightsT<T>& weights, const Policy<T>& pol,
                      const std::vector<T>& thetas, const Mat<int>& phi) {
  const std::vector<T> x = aggregate(z);
  T total{};
  for (int r = 0; r < z.rows(); ++r) {
    const Mat<T> block = toll_block(pol, thetas, phi, r);
    const std::vector<T> bx = matvec(block, x);
    T inner{};
    for (int k = 0; k < z.cols(); ++k) inner += (zstar(r, k) - z(r, k)) * bx[k];
    total -= weights.q[r] * inner;
  }
  return total;
}

enum class RestPointClass { attracting, saddle_like, degenerate };

struct RestPointReport {
  std::vector<double> eigenvalue_real_parts;
  RestPointClass cls = RestPointClass::degenerate;
};

// Finite-difference Jacobian of the replicator field in the free tangent
// coordinates (z11, z21), classified by the real parts of its eigenvalues.
// Requires R = K = 2 and that z is a rest point of the dynamics.
RestPointReport classify_rest_point(const Mat<double>& z, const Policy<double>& pol,
                                    const GroupProfile& gp, const Mat<int>& phi,
                                    double h_fd = 1e-6);

const char* to_string(RestPointClass cls);

}  // namespace roadtoll
