#include "roadtoll/analysis.hpp"

#include <algorithm>
#include <cmath>

#include "roadtoll/dynamics.hpp"

namespace roadtoll {

namespace {

Inertia count_inertia(const std::vector<double>& eigenvalues, double tol = 1e-9) {
  Inertia inertia;
  for (double v : eigenvalues) {
    if (v > tol)
      ++inertia.positive;
    else if (v < -tol)
      ++inertia.negative;
    else
      ++inertia.zero;
  }
  return inertia;
}

double offdiagonal_norm(const Mat<double>& a) {
  double acc = 0.0;
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j)
      if (i != j) acc += a(i, j) * a(i, j);
  return std::sqrt(acc);
}

}  // namespace

SpectrumReport symmetric_eigenvalues(const Mat<double>& s) {
  if (s.rows() != s.cols()) throw NotSymmetric("matrix is not square");
  const int n = s.rows();
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (std::abs(s(i, j) - s(j, i)) > 1e-12)
        throw NotSymmetric("matrix asymmetry exceeds 1e-12");

  Mat<double> a = symmetric_part(s);

  // Cyclic-by-row Jacobi sweeps.
  for (int sweep = 0; sweep < 100 && offdiagonal_norm(a) >= 1e-12; ++sweep) {
    for (int p = 0; p < n - 1; ++p)
      for (int q = p + 1; q < n; ++q) {
        if (std::abs(a(p, q)) < 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double sgn = t * c;
        for (int k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - sgn * akq;
          a(k, q) = sgn * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - sgn * aqk;
          a(q, k) = sgn * apk + c * aqk;
        }
      }
  }

  SpectrumReport report;
  report.eigenvalues.resize(n);
  for (int i = 0; i < n; ++i) report.eigenvalues[i] = a(i, i);
  std::sort(report.eigenvalues.begin(), report.eigenvalues.end());
  report.inertia = count_inertia(report.eigenvalues);
  return report;
}

SpectrumReport kronecker_spectrum(const std::vector<double>& thetas, const Mat<int>& phi,
                                  const ProjectionBasis& basis) {
  const int groups = static_cast<int>(thetas.size());

  std::vector<double> theta_eigs;
  if (groups == 1) {
    theta_eigs = {thetas[0]};
  } else {
    double sum = 0.0;
    double sum_sq = 0.0;
    for (double th : thetas) {
      sum += th;
      sum_sq += th * th;
    }
    const double spread = std::sqrt(static_cast<double>(groups)) * std::sqrt(sum_sq);
    theta_eigs.assign(groups - 2, 0.0);
    theta_eigs.push_back(0.5 * (sum - spread));
    theta_eigs.push_back(0.5 * (sum + spread));
  }

  Mat<double> phi_d = cast_mat<double>(phi);
  const Mat<double> projected =
      matmul(transpose(basis.q), matmul(phi_d, basis.q));
  const SpectrumReport phi_spec = symmetric_eigenvalues(projected);

  SpectrumReport report;
  for (double lambda : theta_eigs)
    for (double tau : phi_spec.eigenvalues) report.eigenvalues.push_back(lambda * tau);
  std::sort(report.eigenvalues.begin(), report.eigenvalues.end());
  report.inertia = count_inertia(report.eigenvalues);
  return report;
}

TaylorEssReport taylor_ess_check(const Mat<double>& cost_op,
                                 const ProjectionBasis& basis) {
  TaylorEssReport report;
  report.spectrum = symmetric_eigenvalues(projected_symmetric_part(cost_op, basis));
  report.is_taylor_ess = report.spectrum.inertia.positive ==
                         static_cast<int>(report.spectrum.eigenvalues.size());
  return report;
}

double lyapunov_log_value(const Mat<double>& z, const Mat<double>& zstar,
                          const LyapunovWeights& weights) {
  if (z.rows() != zstar.rows() || z.cols() != zstar.cols())
    throw DimensionMismatch("lyapunov_log_value: state/target shape mismatch");
  double acc = 0.0;
  for (int r = 0; r < z.rows(); ++r)
    for (int k = 0; k < z.cols(); ++k) {
      if (zstar(r, k) == 0.0) continue;
      if (!(z(r, k) > 0.0))
        throw DomainError("lyapunov_log_value: nonpositive coordinate on the support");
      acc += weights.q[r] * zstar(r, k) * std::log(z(r, k));
    }
  return acc;
}

RestPointReport classify_rest_point(const Mat<double>& z, const Policy<double>& pol,
                                    const GroupProfile& gp, const Mat<int>& phi,
                                    double h_fd) {
  if (gp.groups() != 2 || phi.rows() != 2)
    throw UnsupportedDimension("classify_rest_point: requires R = K = 2");
  if (!rest_point_check(z, pol, gp, phi, 1e-8))
    throw NotARestPoint("classify_rest_point: state is not a rest point");

  const double m1 = gp.masses[0];
  const double m2 = gp.masses[1];

  // Replicator field in the free coordinates (z11, z21); the field is
  // polynomial, so probing slightly outside the simplex is well-defined.
  const auto field = [&](double a, double b, double& f1, double& f2) {
    const Mat<double> state{{a, m1 - a}, {b, m2 - b}};
    const Mat<double> payoffs = policy_payoffs(state, pol, gp.thetas, phi);
    const Mat<double> dz = replicator_rhs(state, payoffs, gp);
    f1 = dz(0, 0);
    f2 = dz(1, 0);
  };

  const double a0 = z(0, 0);
  const double b0 = z(1, 0);
  double fp1, fp2, fm1, fm2;
  Mat<double> jac(2, 2);
  field(a0 + h_fd, b0, fp1, fp2);
  field(a0 - h_fd, b0, fm1, fm2);
  jac(0, 0) = (fp1 - fm1) / (2.0 * h_fd);
  jac(1, 0) = (fp2 - fm2) / (2.0 * h_fd);
  field(a0, b0 + h_fd, fp1, fp2);
  field(a0, b0 - h_fd, fm1, fm2);
  jac(0, 1) = (fp1 - fm1) / (2.0 * h_fd);
  jac(1, 1) = (fp2 - fm2) / (2.0 * h_fd);

  const double tr = jac(0, 0) + jac(1, 1);
  const double det = jac(0, 0) * jac(1, 1) - jac(0, 1) * jac(1, 0);
  const double disc = tr * tr - 4.0 * det;

  RestPointReport report;
  if (disc >= 0.0) {
    const double root = std::sqrt(disc);
    report.eigenvalue_real_parts = {(tr - root) / 2.0, (tr + root) / 2.0};
  } else {
    report.eigenvalue_real_parts = {tr / 2.0, tr / 2.0};
  }

  const double lo = report.eigenvalue_real_parts[0];
  const double hi = report.eigenvalue_real_parts[1];
  if (hi < -1e-8)
    report.cls = RestPointClass::attracting;
  else if (lo < -1e-8 && hi > 1e-8)
    report.cls = RestPointClass::saddle_like;
  else
    report.cls = RestPointClass::degenerate;
  return report;
}

const char* to_string(RestPointClass cls) {
  switch (cls) {
    case RestPointClass::attracting:
      return "attracting";
    case RestPointClass::saddle_like:
      return "saddle-like";
    case RestPointClass::degenerate:
      return "degenerate";
  }
  return "unknown";
}

}  // namespace roadtoll
