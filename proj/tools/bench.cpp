// Compares the serial and OpenMP lanes of the fan-out kernels on the
// two-group, two-path scenario. Run with no arguments for the default sizes.

#include <chrono>
#include <cstdlib>
#include <iomanip>
#include <iostream>

#include "roadtoll/analysis.hpp"
#include "roadtoll/dynamics.hpp"
#include "roadtoll/game.hpp"
#include "roadtoll/network.hpp"
#include "roadtoll/parallel.hpp"
#include "roadtoll/pricing.hpp"

using namespace roadtoll;

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

template <class F>
double time_call(F&& f) {
  const auto start = std::chrono::steady_clock::now();
  f();
  return seconds_since(start);
}

void print_row(const char* name, double serial, double parallel) {
  std::cout << std::left << std::setw(28) << name << std::right << std::setw(12)
            << std::fixed << std::setprecision(3) << serial << std::setw(12) << parallel
            << std::setw(12) << std::setprecision(2) << serial / parallel << '\n';
}

}  // namespace

int main(int argc, char* argv[]) {
  int sweep_grid = 11;
  double horizon = 200.0;
  int scan_repeats = 20;
  if (argc > 1) sweep_grid = std::atoi(argv[1]);
  if (argc > 2) horizon = std::atof(argv[2]);
  if (argc > 3) scan_repeats = std::atoi(argv[3]);

  NetworkSpec net{2, {{1, 2}, {1, 2}}, 1, 2};
  const PathSet paths = enumerate_paths(net);
  const Mat<int> phi = overlap_matrix(incidence_matrix(net, paths));
  const GroupProfile gp{{0.5, 0.5}, {0.5, 1.5}};
  const Mat<double> a = cost_matrix(gp.thetas, phi);

  std::cout << "workers: serial=1 openmp=" << worker_count(Exec::openmp) << "\n\n";
  std::cout << std::left << std::setw(28) << "kernel" << std::right << std::setw(12)
            << "serial[s]" << std::setw(12) << "openmp[s]" << std::setw(12) << "speedup"
            << '\n';

  {
    SolverConfig cfg;
    const double serial = time_call([&] {
      for (int i = 0; i < scan_repeats; ++i) {
        cfg.exec = Exec::serial;
        social_optimum(a, gp, cfg);
      }
    });
    const double parallel = time_call([&] {
      for (int i = 0; i < scan_repeats; ++i) {
        cfg.exec = Exec::openmp;
        social_optimum(a, gp, cfg);
      }
    });
    print_row("social_optimum (dense scan)", serial, parallel);
  }

  {
    SolverConfig scfg;
    scfg.exec = Exec::serial;
    const SocialOptimumResult optima = social_optimum(a, gp, scfg);
    const Policy<double> pol = aggregate_toll_policy(optima.optima.back(), gp.masses);
    IntegratorConfig cfg;
    cfg.horizon = horizon;
    const double serial = time_call(
        [&] { basin_sweep(sweep_grid, pol, gp, phi, pol.target, cfg, Exec::serial); });
    const double parallel = time_call(
        [&] { basin_sweep(sweep_grid, pol, gp, phi, pol.target, cfg, Exec::openmp); });
    print_row("basin_sweep", serial, parallel);
  }

  {
    const Policy<double> pol = adaptive_pigouvian_policy<double>();
    const int res = 2000;
    const double serial =
        time_call([&] { vector_field(res, pol, gp, phi, Exec::serial); });
    const double parallel =
        time_call([&] { vector_field(res, pol, gp, phi, Exec::openmp); });
    print_row("vector_field", serial, parallel);
  }

  return 0;
}
