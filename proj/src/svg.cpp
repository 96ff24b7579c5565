#include "roadtoll/svg.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "roadtoll/csvio.hpp"

namespace roadtoll {

namespace {

constexpr double kCanvas = 640.0;
constexpr double kMargin = 56.0;
constexpr double kPlot = kCanvas - 2.0 * kMargin;

std::string xml_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string num(double v) {
  // two decimals are plenty for pixel coordinates
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

}  // namespace

std::string render_phase_portrait(const std::vector<VectorFieldRow>& field,
                                  const std::vector<PortraitMarker>& markers,
                                  double x_max, double y_max) {
  const auto px = [&](double x) { return kMargin + kPlot * x / x_max; };
  const auto py = [&](double y) { return kCanvas - kMargin - kPlot * y / y_max; };

  double max_mag = 0.0;
  for (const VectorFieldRow& row : field)
    max_mag = std::max(max_mag, std::hypot(row.dz11, row.dz21));

  // arrow length capped at roughly one grid cell
  const double cells = std::max(1.0, std::sqrt(static_cast<double>(field.size())) - 1.0);
  const double arrow_px = 0.85 * kPlot / cells;

  std::ostringstream out;
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kCanvas << "\" height=\""
      << kCanvas << "\" viewBox=\"0 0 " << kCanvas << " " << kCanvas << "\">\n";
  out << "<defs><marker id=\"tip\" markerWidth=\"6\" markerHeight=\"6\" refX=\"5\" "
         "refY=\"3\" orient=\"auto\"><path d=\"M0,0 L6,3 L0,6 z\" fill=\"#444444\"/>"
         "</marker></defs>\n";
  out << "<rect width=\"" << kCanvas << "\" height=\"" << kCanvas
      << "\" fill=\"white\"/>\n";
  out << "<rect x=\"" << kMargin << "\" y=\"" << kMargin << "\" width=\"" << kPlot
      << "\" height=\"" << kPlot << "\" fill=\"none\" stroke=\"black\"/>\n";

  for (const VectorFieldRow& row : field) {
    const double mag = std::hypot(row.dz11, row.dz21);
    if (!(max_mag > 0.0) || mag < 1e-14 * max_mag) continue;
    const double scale = arrow_px / max_mag;
    const double x0 = px(row.z11);
    const double y0 = py(row.z21);
    const double x1 = x0 + scale * row.dz11;
    const double y1 = y0 - scale * row.dz21;
    out << "<line x1=\"" << num(x0) << "\" y1=\"" << num(y0) << "\" x2=\"" << num(x1)
        << "\" y2=\"" << num(y1)
        << "\" stroke=\"#444444\" stroke-width=\"1\" marker-end=\"url(#tip)\"/>\n";
  }

  for (const PortraitMarker& marker : markers) {
    out << "<circle cx=\"" << num(px(marker.x)) << "\" cy=\"" << num(py(marker.y))
        << "\" r=\"6\" fill=\"" << xml_escape(marker.color)
        << "\" stroke=\"black\" stroke-width=\"1\">";
    out << "<title>" << xml_escape(marker.label) << "</title></circle>\n";
  }

  // axis labels and extents
  out << "<text x=\"" << kCanvas / 2.0 << "\" y=\"" << kCanvas - 16.0
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">z11"
         "</text>\n";
  out << "<text x=\"16\" y=\"" << kCanvas / 2.0
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\" "
         "transform=\"rotate(-90 16 "
      << kCanvas / 2.0 << ")\">z21</text>\n";
  out << "<text x=\"" << kMargin << "\" y=\"" << kCanvas - kMargin + 18.0
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">0"
         "</text>\n";
  out << "<text x=\"" << kCanvas - kMargin << "\" y=\"" << kCanvas - kMargin + 18.0
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">"
      << format_double(x_max) << "</text>\n";
  out << "<text x=\"" << kMargin - 10.0 << "\" y=\"" << kMargin + 4.0
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\">"
      << format_double(y_max) << "</text>\n";
  out << "</svg>\n";
  return out.str();
}

}  // namespace roadtoll
