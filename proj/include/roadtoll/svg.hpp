#pragma once

#include <string>
#include <vector>

#include "roadtoll/dynamics.hpp"

namespace roadtoll {

struct PortraitMarker {
  double x = 0.0;       // z11
  double y = 0.0;       // z21
  std::string color;    // SVG fill
  std::string label;
};

// Standalone phase portrait of the replicator field over (z11, z21): arrows
// scaled to the largest grid magnitude, rest points as filled circles. The
// output is a self-contained SVG document with no external references.
std::string render_phase_portrait(const std::vector<VectorFieldRow>& field,
                                  const std::vector<PortraitMarker>& markers,
                                  double x_max, double y_max);

}  // namespace roadtoll
