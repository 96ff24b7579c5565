#include "roadtoll/game.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace roadtoll {

void GroupProfile::validate() const {
  if (masses.empty()) throw ValidationError("groups.m: must be nonempty");
  if (masses.size() != thetas.size())
    throw ValidationError("groups: m and theta must have the same length");
  double total = 0.0;
  for (std::size_t r = 0; r < masses.size(); ++r) {
    if (!(masses[r] > 0.0))
      throw ValidationError("groups.m[" + std::to_string(r) + "]: must be positive");
    if (!(thetas[r] > 0.0))
      throw ValidationError("groups.theta[" + std::to_string(r) + "]: must be positive");
    total += masses[r];
  }
  if (std::abs(total - 1.0) > 1e-12)
    throw ValidationError("groups.m: masses must sum to 1 (got " + std::to_string(total) +
                          ")");
}

void validate_state(const Mat<double>& z, const GroupProfile& gp, double tol) {
  if (z.rows() != gp.groups())
    throw DimensionMismatch("state row count != group count");
  for (int r = 0; r < z.rows(); ++r) {
    double row = 0.0;
    for (int k = 0; k < z.cols(); ++k) {
      if (z(r, k) < -tol)
        throw ValidationError("state entry z[" + std::to_string(r) + "][" +
                              std::to_string(k) + "] is negative");
      row += z(r, k);
    }
    if (std::abs(row - gp.masses[r]) > tol)
      throw ValidationError("state row " + std::to_string(r) +
                            " does not sum to its group mass");
  }
}

Mat<double> uniform_state(const GroupProfile& gp, int paths) {
  Mat<double> z(gp.groups(), paths);
  for (int r = 0; r < z.rows(); ++r)
    for (int k = 0; k < paths; ++k) z(r, k) = gp.masses[r] / paths;
  return z;
}

void project_simplex(std::vector<double>& v, double mass) {
  std::vector<double> u = v;
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumulative = 0.0;
  double tau = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) {
    cumulative += u[j];
    const double candidate = (cumulative - mass) / static_cast<double>(j + 1);
    if (u[j] - candidate > 0.0) tau = candidate;
  }
  for (double& x : v) x = std::max(x - tau, 0.0);
}

namespace {

struct Refined {
  Mat<double> z;
  double sw = 0.0;
  bool converged = false;
};

// Gradient of SW at z: -(A + A')z.
std::vector<double> welfare_gradient(const Mat<double>& a, const std::vector<double>& z) {
  const int n = a.rows();
  std::vector<double> g(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double acc = 0.0;
    for (int j = 0; j < n; ++j) acc += (a(i, j) + a(j, i)) * z[j];
    g[i] = -acc;
  }
  return g;
}

void project_product(std::vector<double>& z, const GroupProfile& gp, int paths) {
  std::vector<double> row(paths);
  for (int r = 0; r < gp.groups(); ++r) {
    std::copy_n(z.begin() + static_cast<std::size_t>(r) * paths, paths, row.begin());
    project_simplex(row, gp.masses[r]);
    std::copy_n(row.begin(), paths, z.begin() + static_cast<std::size_t>(r) * paths);
  }
}

double sw_flat(const Mat<double>& a, const std::vector<double>& z) {
  double acc = 0.0;
  for (int i = 0; i < a.rows(); ++i) {
    double az = 0.0;
    for (int j = 0; j < a.cols(); ++j) az += a(i, j) * z[j];
    acc += z[i] * az;
  }
  return -acc;
}

// Gaussian elimination with partial pivoting; returns false on a (near-)
// singular system. Sized for the handful of free coordinates of a desk-scale
// instance.
bool solve_dense(Mat<double> m, std::vector<double> rhs, std::vector<double>& out) {
  const int n = m.rows();
  for (int col = 0; col < n; ++col) {
    int pivot = col;
    for (int r = col + 1; r < n; ++r)
      if (std::abs(m(r, col)) > std::abs(m(pivot, col))) pivot = r;
    if (std::abs(m(pivot, col)) < 1e-12) return false;
    if (pivot != col) {
      for (int c = 0; c < n; ++c) std::swap(m(col, c), m(pivot, c));
      std::swap(rhs[col], rhs[pivot]);
    }
    for (int r = col + 1; r < n; ++r) {
      const double factor = m(r, col) / m(col, col);
      for (int c = col; c < n; ++c) m(r, c) -= factor * m(col, c);
      rhs[r] -= factor * rhs[col];
    }
  }
  out.assign(n, 0.0);
  for (int r = n - 1; r >= 0; --r) {
    double acc = rhs[r];
    for (int c = r + 1; c < n; ++c) acc -= m(r, c) * out[c];
    out[r] = acc / m(r, r);
  }
  return true;
}

void snap_and_renormalize(std::vector<double>& z, const GroupProfile& gp, int paths) {
  for (double& v : z)
    if (v < 1e-12) v = 0.0;
  for (int r = 0; r < gp.groups(); ++r) {
    double row = 0.0;
    for (int k = 0; k < paths; ++k) row += z[static_cast<std::size_t>(r) * paths + k];
    if (row > 0.0) {
      const double factor = gp.masses[r] / row;
      for (int k = 0; k < paths; ++k) z[static_cast<std::size_t>(r) * paths + k] *= factor;
    }
  }
}

double pg_residual(const Mat<double>& a, const GroupProfile& gp, int paths,
                   const std::vector<double>& z) {
  const std::vector<double> g = welfare_gradient(a, z);
  std::vector<double> probe = z;
  for (std::size_t i = 0; i < probe.size(); ++i) probe[i] += g[i];
  project_product(probe, gp, paths);
  double residual = 0.0;
  for (std::size_t i = 0; i < probe.size(); ++i)
    residual = std::max(residual, std::abs(probe[i] - z[i]));
  return residual;
}

// One Newton step on the face picked out by the current active set. SW is
// quadratic, so a single step lands exactly on the face-stationary point.
// Leaves z untouched when the reduced system is singular or the step escapes
// the face.
void polish_on_face(std::vector<double>& z, const Mat<double>& a, const GroupProfile& gp,
                    int paths) {
  const int n = static_cast<int>(z.size());
  std::vector<int> tangent_cols;
  std::vector<std::pair<int, int>> col_spec;  // (plus index, minus index)
  for (int r = 0; r < gp.groups(); ++r) {
    int anchor = -1;
    for (int k = 0; k < paths; ++k) {
      const int idx = r * paths + k;
      if (z[idx] <= 1e-9) continue;
      if (anchor < 0)
        anchor = idx;
      else
        col_spec.emplace_back(idx, anchor);
    }
  }
  const int m = static_cast<int>(col_spec.size());
  if (m == 0) return;  // vertex of the product of simplices

  Mat<double> c(n, m);
  for (int col = 0; col < m; ++col) {
    c(col_spec[col].first, col) = 1.0;
    c(col_spec[col].second, col) = -1.0;
  }

  // H = -(A + A'), reduced to the face tangent space.
  Mat<double> h(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) h(i, j) = -(a(i, j) + a(j, i));
  const Mat<double> reduced = matmul(transpose(c), matmul(h, c));
  const std::vector<double> g = welfare_gradient(a, z);
  std::vector<double> reduced_g(m, 0.0);
  for (int col = 0; col < m; ++col)
    reduced_g[col] = g[col_spec[col].first] - g[col_spec[col].second];

  std::vector<double> neg_g = reduced_g;
  for (double& v : neg_g) v = -v;
  std::vector<double> step;
  if (!solve_dense(reduced, neg_g, step)) return;

  std::vector<double> candidate = z;
  for (int col = 0; col < m; ++col) {
    candidate[col_spec[col].first] += step[col];
    candidate[col_spec[col].second] -= step[col];
  }
  for (double v : candidate)
    if (v < -1e-9) return;  // left the face
  for (double& v : candidate) v = std::max(v, 0.0);
  if (sw_flat(a, candidate) < sw_flat(a, z) - 1e-12) return;
  z = std::move(candidate);
}

Refined refine(Mat<double> start, const Mat<double>& a, const GroupProfile& gp,
               const SolverConfig& cfg) {
  const int paths = start.cols();
  std::vector<double> z = start.data();
  project_product(z, gp, paths);
  double sw = sw_flat(a, z);

  for (int iter = 0; iter < cfg.max_iters; ++iter) {
    if (pg_residual(a, gp, paths, z) <= 1e-10) break;
    const std::vector<double> g = welfare_gradient(a, z);

    // Armijo backtracking along the projection arc.
    double step = 1.0;
    bool advanced = false;
    while (step > 1e-18) {
      std::vector<double> trial = z;
      for (std::size_t i = 0; i < trial.size(); ++i) trial[i] += step * g[i];
      project_product(trial, gp, paths);
      double movement = 0.0;
      double inner = 0.0;
      for (std::size_t i = 0; i < trial.size(); ++i) {
        movement = std::max(movement, std::abs(trial[i] - z[i]));
        inner += g[i] * (trial[i] - z[i]);
      }
      const double trial_sw = sw_flat(a, trial);
      if (movement > 0.0 && trial_sw >= sw + 1e-4 * inner) {
        z = std::move(trial);
        sw = trial_sw;
        advanced = true;
        break;
      }
      step *= 0.5;
    }
    if (!advanced) break;  // first-order progress exhausted; polish below
  }

  polish_on_face(z, a, gp, paths);
  snap_and_renormalize(z, gp, paths);

  Refined out;
  out.converged = pg_residual(a, gp, paths, z) <= cfg.tol;
  out.z = Mat<double>(gp.groups(), paths);
  out.z.data() = z;
  out.sw = sw_flat(a, z);
  return out;
}

// Dense scan over the two free coordinates; returns one representative start
// per connected near-optimal cell cluster.
std::vector<Mat<double>> dense_scan_starts(const Mat<double>& a, const GroupProfile& gp,
                                           const SolverConfig& cfg) {
  const double m1 = gp.masses[0];
  const double m2 = gp.masses[1];
  const int n1 = static_cast<int>(std::llround(m1 / cfg.grid_step)) + 1;
  const int n2 = static_cast<int>(std::llround(m2 / cfg.grid_step)) + 1;

  std::vector<double> sw(static_cast<std::size_t>(n1) * n2);
  parallel_for(cfg.exec, n1, [&](std::int64_t i) {
    const double z11 = std::min(m1, static_cast<double>(i) * cfg.grid_step);
    std::vector<double> z(4);
    for (int j = 0; j < n2; ++j) {
      const double z21 = std::min(m2, static_cast<double>(j) * cfg.grid_step);
      z[0] = z11;
      z[1] = m1 - z11;
      z[2] = z21;
      z[3] = m2 - z21;
      sw[static_cast<std::size_t>(i) * n2 + j] = sw_flat(a, z);
    }
  });

  const double best = *std::max_element(sw.begin(), sw.end());
  const double band = 1e-5 * (1.0 + std::abs(best));
  std::vector<char> keep(sw.size(), 0);
  for (std::size_t i = 0; i < sw.size(); ++i) keep[i] = sw[i] >= best - band;

  // Flood-fill 4-connected clusters of kept cells; argmax cell represents each.
  std::vector<char> seen(sw.size(), 0);
  std::vector<Mat<double>> starts;
  std::vector<std::size_t> stack;
  for (std::size_t s = 0; s < sw.size(); ++s) {
    if (!keep[s] || seen[s]) continue;
    std::size_t arg = s;
    stack.assign(1, s);
    seen[s] = 1;
    while (!stack.empty()) {
      const std::size_t cell = stack.back();
      stack.pop_back();
      if (sw[cell] > sw[arg]) arg = cell;
      const int i = static_cast<int>(cell / n2);
      const int j = static_cast<int>(cell % n2);
      const int di[] = {-1, 1, 0, 0};
      const int dj[] = {0, 0, -1, 1};
      for (int d = 0; d < 4; ++d) {
        const int ni = i + di[d];
        const int nj = j + dj[d];
        if (ni < 0 || ni >= n1 || nj < 0 || nj >= n2) continue;
        const std::size_t ncell = static_cast<std::size_t>(ni) * n2 + nj;
        if (keep[ncell] && !seen[ncell]) {
          seen[ncell] = 1;
          stack.push_back(ncell);
        }
      }
    }
    const double z11 = std::min(m1, static_cast<double>(arg / n2) * cfg.grid_step);
    const double z21 = std::min(m2, static_cast<double>(arg % n2) * cfg.grid_step);
    starts.push_back(Mat<double>{{z11, m1 - z11}, {z21, m2 - z21}});
  }
  return starts;
}

}  // namespace

SocialOptimumResult social_optimum(const Mat<double>& a, const GroupProfile& gp,
                                   const SolverConfig& cfg) {
  gp.validate();
  const int R = gp.groups();
  if (a.rows() % R != 0) throw DimensionMismatch("cost matrix / group count mismatch");
  const int K = a.rows() / R;

  std::vector<Mat<double>> starts;
  starts.push_back(uniform_state(gp, K));

  // Vertex states (every group concentrated on one path), when few enough.
  double combos = 1.0;
  for (int r = 0; r < R; ++r) combos *= K;
  if (combos <= 256.0) {
    for (int code = 0; code < static_cast<int>(combos); ++code) {
      Mat<double> z(R, K);
      int rest = code;
      for (int r = 0; r < R; ++r) {
        z(r, rest % K) = gp.masses[r];
        rest /= K;
      }
      starts.push_back(std::move(z));
    }
  }

  if (R == 2 && K == 2) {
    auto scan = dense_scan_starts(a, gp, cfg);
    starts.insert(starts.end(), scan.begin(), scan.end());
  } else {
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> unif(1e-3, 1.0);
    for (int s = 0; s < cfg.starts; ++s) {
      Mat<double> z(R, K);
      for (int r = 0; r < R; ++r) {
        double row = 0.0;
        for (int k = 0; k < K; ++k) {
          z(r, k) = -std::log(unif(rng));
          row += z(r, k);
        }
        for (int k = 0; k < K; ++k) z(r, k) *= gp.masses[r] / row;
      }
      starts.push_back(std::move(z));
    }
  }

  std::vector<Refined> refined(starts.size());
  parallel_for(cfg.exec, static_cast<std::int64_t>(starts.size()),
               [&](std::int64_t i) { refined[i] = refine(starts[i], a, gp, cfg); });

  double best = -std::numeric_limits<double>::infinity();
  for (const Refined& r : refined)
    if (r.converged && r.sw > best) best = r.sw;
  if (!std::isfinite(best))
    throw SolverDidNotConverge("no projected-gradient start reached the residual target");

  std::vector<Mat<double>> kept;
  for (const Refined& r : refined) {
    if (!r.converged || r.sw < best - 1e-9) continue;
    bool duplicate = false;
    for (const Mat<double>& existing : kept) {
      double dist = 0.0;
      for (std::size_t i = 0; i < existing.size(); ++i)
        dist = std::max(dist, std::abs(existing.data()[i] - r.z.data()[i]));
      if (dist <= 1e-6) {
        duplicate = true;
        break;
      }
    }
    if (!duplicate) kept.push_back(r.z);
  }
  std::sort(kept.begin(), kept.end(), [](const Mat<double>& a_, const Mat<double>& b_) {
    return a_.data() < b_.data();
  });
  return {std::move(kept), best};
}

}  // namespace roadtoll
