#pragma once

#include <vector>

#include "roadtoll/errors.hpp"
#include "roadtoll/game.hpp"
#include "roadtoll/mat.hpp"

namespace roadtoll {

enum class PolicyKind { no_toll, adaptive_pigouvian, aggregate_toll };

// psi(r,k) = z*_rk / x*_k: the planner's imputed group composition per path at
// the target optimum. Columns for unused paths (x*_k = 0) fall back to the
// population shares so the column still sums to one.
template <class T>
Mat<T> mix_matrix(const Mat<T>& zstar, const std::vector<T>& masses) {
  if (zstar.rows() != static_cast<int>(masses.size()))
    throw DimensionMismatch("mix_matrix: state rows != group count");
  const std::vector<T> xstar = aggregate(zstar);
  Mat<T> psi(zstar.rows(), zstar.cols());
  for (int k = 0; k < zstar.cols(); ++k) {
    const bool used = xstar[k] > T{};
    for (int r = 0; r < zstar.rows(); ++r)
      psi(r, k) = used ? zstar(r, k) / xstar[k] : masses[r];
  }
  return psi;
}

// A toll policy together with the data it derives from the target state. The
// same struct runs in doubles for simulation and in rationals for exact checks.
template <class T>
struct Policy {
  PolicyKind kind = PolicyKind::no_toll;
  Mat<T> target;  // z* (aggregate_toll only)
  Mat<T> psi;     // R x K shares (aggregate_toll only)
};

template <class T>
Policy<T> no_toll_policy() {
  return {PolicyKind::no_toll, {}, {}};
}

template <class T>
Policy<T> adaptive_pigouvian_policy() {
  return {PolicyKind::adaptive_pigouvian, {}, {}};
}

template <class T>
Policy<T> aggregate_toll_policy(const Mat<T>& zstar, const std::vector<T>& masses) {
  return {PolicyKind::aggregate_toll, zstar, mix_matrix(zstar, masses)};
}

// w_k = sum_s theta_s psi_sk, the imputed per-path average value of time.
template <class T>
std::vector<T> imputed_vot(const Mat<T>& psi, const std::vector<T>& thetas) {
  std::vector<T> w(psi.cols(), T{});
  for (int k = 0; k < psi.cols(); ++k)
    for (int r = 0; r < psi.rows(); ++r) w[k] += thetas[r] * psi(r, k);
  return w;
}

// p(z) = A'z, returned as the common per-path charge Phi * sum_s theta_s z_s.
template <class T>
std::vector<T> adaptive_pigouvian_toll(const Mat<T>& z, const std::vector<T>& thetas,
                                       const Mat<int>& phi) {
  std::vector<T> weighted(z.cols(), T{});
  for (int r = 0; r < z.rows(); ++r)
    for (int k = 0; k < z.cols(); ++k) weighted[k] += thetas[r] * z(r, k);
  std::vector<T> toll(z.cols(), T{});
  for (int k = 0; k < phi.rows(); ++k)
    for (int l = 0; l < phi.cols(); ++l) toll[k] += T(phi(k, l)) * weighted[l];
  return toll;
}

// tau(x) = A' Psi x, the aggregate-based charge: Phi * (w o x).
template <class T>
std::vector<T> aggregate_toll(const std::vector<T>& x, const Policy<T>& pol,
                              const std::vector<T>& thetas, const Mat<int>& phi) {
  if (pol.kind != PolicyKind::aggregate_toll)
    throw DomainError("aggregate_toll: policy has no target mix");
  const std::vector<T> w = imputed_vot(pol.psi, thetas);
  std::vector<T> toll(x.size(), T{});
  for (int k = 0; k < phi.rows(); ++k)
    for (int l = 0; l < phi.cols(); ++l) toll[k] += T(phi(k, l)) * w[l] * x[l];
  return toll;
}

// Per-path charge at state z under the policy (zeros for no_toll).
template <class T>
std::vector<T> toll_vector(const Mat<T>& z, const Policy<T>& pol,
                           const std::vector<T>& thetas, const Mat<int>& phi) {
  switch (pol.kind) {
    case PolicyKind::no_toll:
      return std::vector<T>(z.cols(), T{});
    case PolicyKind::adaptive_pigouvian:
      return adaptive_pigouvian_toll(z, thetas, phi);
    case PolicyKind::aggregate_toll:
      return aggregate_toll(aggregate(z), pol, thetas, phi);
  }
  throw DomainError("toll_vector: unknown policy kind");
}

// The linear operator M with payoffs v = -M z: A, A + A', or
// A^tau = A + J_R (x) (Phi diag(w)).
template <class T>
Mat<T> cost_operator(const Policy<T>& pol, const std::vector<T>& thetas,
                     const Mat<int>& phi) {
  const Mat<T> a = cost_matrix(thetas, phi);
  switch (pol.kind) {
    case PolicyKind::no_toll:
      return a;
    case PolicyKind::adaptive_pigouvian:
      return a + transpose(a);
    case PolicyKind::aggregate_toll: {
      const std::vector<T> w = imputed_vot(pol.psi, thetas);
      Mat<T> phi_dw(phi.rows(), phi.cols());
      for (int k = 0; k < phi.rows(); ++k)
        for (int l = 0; l < phi.cols(); ++l) phi_dw(k, l) = T(phi(k, l)) * w[l];
      return a + kron(Mat<T>::ones(pol.psi.rows(), pol.psi.rows()), phi_dw);
    }
  }
  throw DomainError("cost_operator: unknown policy kind");
}

// Payoffs under the active policy: -(cost + toll), evaluated through the
// assembled operator.
template <class T>
Mat<T> policy_payoffs(const Mat<T>& z, const Policy<T>& pol, const std::vector<T>& thetas,
                      const Mat<int>& phi) {
  const Mat<T> op = cost_operator(pol, thetas, phi);
  const std::vector<T> cost = matvec(op, z.data());
  Mat<T> v(z.rows(), z.cols());
  for (std::size_t i = 0; i < v.size(); ++i) v.data()[i] = -cost[i];
  return v;
}

// B_r^tau = theta_r Phi + Phi diag(w); satisfies A^tau_r z = B^tau_r x(z).
template <class T>
Mat<T> toll_block(const Policy<T>& pol, const std::vector<T>& thetas, const Mat<int>& phi,
                  int group) {
  if (pol.kind != PolicyKind::aggregate_toll)
    throw DomainError("toll_block: policy has no target mix");
  const std::vector<T> w = imputed_vot(pol.psi, thetas);
  Mat<T> b(phi.rows(), phi.cols());
  for (int k = 0; k < phi.rows(); ++k)
    for (int l = 0; l < phi.cols(); ++l)
      b(k, l) = thetas[group] * T(phi(k, l)) + T(phi(k, l)) * w[l];
  return b;
}

}  // namespace roadtoll
