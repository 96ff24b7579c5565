#include "roadtoll/network.hpp"

#include <algorithm>
#include <string>

namespace roadtoll {

void NetworkSpec::validate() const {
  if (node_count < 1) throw ValidationError("network.node_count must be positive");
  auto check_node = [&](int v, const char* what) {
    if (v < 1 || v > node_count)
      throw ValidationError(std::string("network.") + what + ": node id out of range");
  };
  check_node(origin, "origin");
  check_node(destination, "destination");
  if (origin == destination)
    throw ValidationError("network: origin and destination must differ");
  for (std::size_t i = 0; i < edges.size(); ++i) {
    if (edges[i].first < 1 || edges[i].first > node_count || edges[i].second < 1 ||
        edges[i].second > node_count)
      throw ValidationError("network.edges[" + std::to_string(i) +
                            "]: node id out of range");
  }
}

namespace {

// Iterative DFS trying outgoing edges in index order, which yields paths in
// lexicographic order of their edge-index sequences.
void extend(const NetworkSpec& net, const std::vector<std::vector<int>>& out_edges,
            std::vector<int>& walk, std::vector<char>& used, int node,
            std::vector<Path>& found) {
  if (node == net.destination) {
    found.push_back(walk);
    return;
  }
  for (int e : out_edges[node]) {
    if (used[e]) continue;
    used[e] = 1;
    walk.push_back(e);
    extend(net, out_edges, walk, used, net.edges[e].second, found);
    walk.pop_back();
    used[e] = 0;
  }
}

}  // namespace

PathSet enumerate_paths(const NetworkSpec& net) {
  net.validate();
  std::vector<std::vector<int>> out_edges(net.node_count + 1);
  for (int e = 0; e < static_cast<int>(net.edges.size()); ++e)
    out_edges[net.edges[e].first].push_back(e);

  PathSet ps;
  std::vector<int> walk;
  std::vector<char> used(net.edges.size(), 0);
  extend(net, out_edges, walk, used, net.origin, ps.paths);
  if (ps.paths.empty())
    throw EmptyPathSet("no path from origin to destination");
  return ps;
}

IncidenceMatrix incidence_matrix(const NetworkSpec& net, const PathSet& ps) {
  IncidenceMatrix delta(static_cast<int>(net.edges.size()), ps.count());
  for (int k = 0; k < ps.count(); ++k)
    for (int e : ps.paths[k]) delta(e, k) = 1;
  return delta;
}

OverlapMatrix overlap_matrix(const IncidenceMatrix& inc) {
  const int k_paths = inc.cols();
  OverlapMatrix phi(k_paths, k_paths);
  for (int k = 0; k < k_paths; ++k)
    for (int l = k; l < k_paths; ++l) {
      int shared = 0;
      for (int j = 0; j < inc.rows(); ++j) shared += inc(j, k) * inc(j, l);
      phi(k, l) = shared;
      phi(l, k) = shared;
    }
  return phi;
}

}  // namespace roadtoll
