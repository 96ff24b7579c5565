#pragma once

#include <cstdint>
#include <exception>
#include <string>
#include <utility>

#include "roadtoll/errors.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace roadtoll {

// Execution lane for the fan-out kernels (basin sweeps, multi-start refinement,
// grid scans). Every kernel accepts both; the serial lane is the reference the
// tests compare against and the benchmark baseline.
enum class Exec { serial, openmp };

inline int worker_count(Exec ex) {
#ifdef _OPENMP
  return ex == Exec::openmp ? omp_get_max_threads() : 1;
#else
  (void)ex;
  return 1;
#endif
}

// Runs body(i) for i in [0, n). Results must be written to per-index slots so
// the outcome is identical on both lanes. Exceptions from work items are
// captured and the first one (lowest index) is rethrown after the loop joins.
template <class F>
void parallel_for(Exec ex, std::int64_t n, F&& body) {
  if (n <= 0) return;
  if (ex == Exec::serial) {
    for (std::int64_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::exception_ptr first_error = nullptr;
  std::int64_t first_error_index = n;
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (std::int64_t i = 0; i < n; ++i) {
    try {
      body(i);
    } catch (...) {
#ifdef _OPENMP
#pragma omp critical(roadtoll_parallel_for_error)
#endif
      {
        if (i < first_error_index) {
          first_error_index = i;
          first_error = std::current_exception();
        }
      }
    }
  }
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace roadtoll
