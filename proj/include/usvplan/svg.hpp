#pragma once

// Deterministic SVG map renders: occupied cells, trajectory polylines, and a
// legend with per-overlay path lengths in the lower-left corner.

#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "usvplan/hybrid_astar.hpp"
#include "usvplan/occupancy_grid.hpp"
#include "usvplan/trajectory.hpp"

namespace usvplan {

struct SvgStyle {
  std::string label;
  std::string color = "#1f77b4";
  double width = 1.5;
  bool dashed = false;
};

struct SvgOverlay {
  std::vector<Eigen::Vector2d> points;
  SvgStyle style;
  double length = 0.0;

  static SvgOverlay of(const Trajectory& t, SvgStyle style) {
    SvgOverlay o;
    for (const auto& k : t.knots) o.points.emplace_back(k.state.x, k.state.y);
    o.style = std::move(style);
    o.length = t.planar_length();
    return o;
  }

  static SvgOverlay of(const PlannedPath& p, SvgStyle style) {
    SvgOverlay o;
    for (const auto& q : p.poses) o.points.emplace_back(q.x, q.y);
    o.style = std::move(style);
    o.length = path_length(p.poses);
    return o;
  }
};

struct SvgOptions {
  double scale = 8.0;    ///< user units per metre
  double margin = 20.0;  ///< user units around the map frame
};

namespace svg_detail {

inline std::string num(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.2f", v == 0.0 ? 0.0 : v);
  return buf;
}

}  // namespace svg_detail

/// Maps world metres to user units: x to the right, y up, map frame inset by
/// the margin.
inline Eigen::Vector2d svg_point(const OccupancyGrid& grid, const SvgOptions& o, double x, double y) {
  const auto& g = grid.spec();
  return {o.margin + (x - g.origin_x) * o.scale, o.margin + (grid.height() - (y - g.origin_y)) * o.scale};
}

inline std::string render_svg(const OccupancyGrid& grid, const std::vector<SvgOverlay>& overlays,
                              const SvgOptions& opts = {}) {
  using svg_detail::num;
  const double w = grid.width() * opts.scale, h = grid.height() * opts.scale;
  const double cell = grid.resolution() * opts.scale;
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(w + 2 * opts.margin) << "\" height=\""
      << num(h + 2 * opts.margin) << "\" viewBox=\"0 0 " << num(w + 2 * opts.margin) << ' ' << num(h + 2 * opts.margin)
      << "\">\n";
  out << "<rect class=\"frame\" x=\"" << num(opts.margin) << "\" y=\"" << num(opts.margin) << "\" width=\"" << num(w)
      << "\" height=\"" << num(h) << "\" fill=\"#ffffff\" stroke=\"#000000\" stroke-width=\"1\"/>\n";

  // One rectangle per horizontal run of equal non-free cells.
  for (int r = 0; r < grid.nrows(); ++r) {
    for (int c = 0; c < grid.ncols();) {
      const Cell v = grid.at(c, r);
      if (v == Cell::kFree) {
        ++c;
        continue;
      }
      int e = c + 1;
      while (e < grid.ncols() && grid.at(e, r) == v) ++e;
      const Eigen::Vector2d p = svg_point(grid, opts, grid.spec().origin_x + c * grid.resolution(),
                                          grid.spec().origin_y + (r + 1) * grid.resolution());
      out << "<rect class=\"" << (v == Cell::kOccupied ? "obstacle" : "unknown") << "\" x=\"" << num(p.x())
          << "\" y=\"" << num(p.y()) << "\" width=\"" << num((e - c) * cell) << "\" height=\"" << num(cell)
          << "\" fill=\"" << (v == Cell::kOccupied ? "#404040" : "#d0d0d0") << "\"/>\n";
      c = e;
    }
  }

  for (const auto& ov : overlays) {
    if (ov.points.empty()) continue;
    out << "<polyline class=\"overlay\" fill=\"none\" stroke=\"" << ov.style.color << "\" stroke-width=\""
        << num(ov.style.width) << '"';
    if (ov.style.dashed) out << " stroke-dasharray=\"6 4\"";
    out << " points=\"";
    for (std::size_t i = 0; i < ov.points.size(); ++i) {
      const Eigen::Vector2d p = svg_point(grid, opts, ov.points[i].x(), ov.points[i].y());
      out << (i ? " " : "") << num(p.x()) << ',' << num(p.y());
    }
    out << "\"/>\n";
  }

  int row = 0;
  for (auto it = overlays.rbegin(); it != overlays.rend(); ++it, ++row) {
    const double y = opts.margin + h - 10.0 - 16.0 * row;
    const double x = opts.margin + 10.0;
    out << "<line class=\"legend\" x1=\"" << num(x) << "\" y1=\"" << num(y - 4) << "\" x2=\"" << num(x + 24)
        << "\" y2=\"" << num(y - 4) << "\" stroke=\"" << it->style.color << "\" stroke-width=\""
        << num(it->style.width) << '"' << (it->style.dashed ? " stroke-dasharray=\"6 4\"" : "") << "/>\n";
    out << "<text class=\"legend\" x=\"" << num(x + 30) << "\" y=\"" << num(y) << "\" font-family=\"monospace\" "
        << "font-size=\"12\">" << it->style.label << ": " << num(it->length) << " m</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace usvplan
