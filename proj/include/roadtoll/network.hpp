#pragma once

#include <vector>

#include "roadtoll/errors.hpp"
#include "roadtoll/mat.hpp"

namespace roadtoll {

// Directed multigraph with designated commute endpoints. Nodes are 1-based;
// parallel edges are permitted and identified by their position in `edges`.
struct NetworkSpec {
  int node_count = 0;
  std::vector<std::pair<int, int>> edges;  // (tail, head) with 1-based node ids
  int origin = 1;
  int destination = 0;

  void validate() const;
};

// A path is an ordered list of 0-based edge indices chaining tail->head from
// origin to destination, with no edge repeated.
using Path = std::vector<int>;

struct PathSet {
  std::vector<Path> paths;
  int count() const { return static_cast<int>(paths.size()); }
};

// delta(j,k) = 1 iff edge j lies on path k. L x K.
using IncidenceMatrix = Mat<int>;

// phi(k,l) = number of edges paths k and l share; phi = delta' * delta.
using OverlapMatrix = Mat<int>;

// All edge-distinct origin->destination walks, in lexicographic order of their
// edge-index sequences. The destination is absorbing: a walk ends the first
// time it reaches it. Throws EmptyPathSet when no path exists.
PathSet enumerate_paths(const NetworkSpec& net);

IncidenceMatrix incidence_matrix(const NetworkSpec& net, const PathSet& ps);

OverlapMatrix overlap_matrix(const IncidenceMatrix& inc);

// y = delta * x: per-edge load induced by aggregate state x.
template <class T>
std::vector<T> link_loads(const IncidenceMatrix& inc, const std::vector<T>& x) {
  if (inc.cols() != static_cast<int>(x.size()))
    throw DimensionMismatch("link_loads: aggregate state length != path count");
  std::vector<T> y(inc.rows(), T{});
  for (int j = 0; j < inc.rows(); ++j) {
    T acc{};
    for (int k = 0; k < inc.cols(); ++k)
      if (inc(j, k)) acc += x[k];
    y[j] = acc;
  }
  return y;
}

}  // namespace roadtoll
