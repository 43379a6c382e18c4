#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace usvplan {

enum class Cell : std::uint8_t { kFree = 0, kOccupied = 1, kUnknown = 2 };

struct GridIndex {
  int col = 0;
  int row = 0;
  bool operator==(const GridIndex&) const = default;
};

struct GridSpec {
  double origin_x = 0.0;  ///< world x of the (0,0) cell's lower-left corner
  double origin_y = 0.0;
  double resolution = 0.5;
  int ncols = 0;
  int nrows = 0;

  void validate() const {
    if (!(resolution > 0.0) || !std::isfinite(resolution))
      throw std::invalid_argument("GridSpec: resolution must be > 0");
    if (ncols <= 0 || nrows <= 0) throw std::invalid_argument("GridSpec: empty grid");
    if (!std::isfinite(origin_x) || !std::isfinite(origin_y))
      throw std::invalid_argument("GridSpec: non-finite origin");
  }

  /// Grid covering [0, width] x [0, height] with the given cell size.
  static GridSpec covering(double width, double height, double resolution) {
    GridSpec s;
    s.resolution = resolution;
    s.ncols = static_cast<int>(std::ceil(width / resolution - 1e-9));
    s.nrows = static_cast<int>(std::ceil(height / resolution - 1e-9));
    s.validate();
    return s;
  }
};

/// Row-major world-frame raster. Row 0 is the southern edge (smallest y).
class OccupancyGrid {
 public:
  OccupancyGrid() = default;
  explicit OccupancyGrid(const GridSpec& spec, Cell fill = Cell::kUnknown) : spec_(spec) {
    spec_.validate();
    cells_.assign(static_cast<std::size_t>(spec_.ncols) * spec_.nrows, fill);
  }

  const GridSpec& spec() const { return spec_; }
  int ncols() const { return spec_.ncols; }
  int nrows() const { return spec_.nrows; }
  double resolution() const { return spec_.resolution; }
  double width() const { return spec_.ncols * spec_.resolution; }
  double height() const { return spec_.nrows * spec_.resolution; }
  const std::vector<Cell>& cells() const { return cells_; }

  bool inside(int col, int row) const {
    return col >= 0 && row >= 0 && col < spec_.ncols && row < spec_.nrows;
  }

  Cell at(int col, int row) const { return cells_[index(col, row)]; }
  void set(int col, int row, Cell c) { cells_[index(col, row)] = c; }

  /// Cell containing a world point, if any.
  std::optional<GridIndex> cell_of(double x, double y) const {
    const double fc = std::floor((x - spec_.origin_x) / spec_.resolution);
    const double fr = std::floor((y - spec_.origin_y) / spec_.resolution);
    if (!(fc >= 0 && fr >= 0 && fc < spec_.ncols && fr < spec_.nrows)) return std::nullopt;
    return GridIndex{static_cast<int>(fc), static_cast<int>(fr)};
  }

  Eigen::Vector2d center(int col, int row) const {
    return {spec_.origin_x + (col + 0.5) * spec_.resolution,
            spec_.origin_y + (row + 0.5) * spec_.resolution};
  }

  /// Occupied, outside the grid, or unknown when unknown counts as an obstacle.
  bool blocked(int col, int row, bool unknown_is_obstacle = true) const {
    if (!inside(col, row)) return true;
    Cell c = at(col, row);
    return c == Cell::kOccupied || (unknown_is_obstacle && c == Cell::kUnknown);
  }

  bool blocked_at(double x, double y, bool unknown_is_obstacle = true) const {
    auto idx = cell_of(x, y);
    return !idx || blocked(idx->col, idx->row, unknown_is_obstacle);
  }

  std::size_t count(Cell c) const {
    return static_cast<std::size_t>(std::count(cells_.begin(), cells_.end(), c));
  }

  bool operator==(const OccupancyGrid& o) const {
    return spec_.ncols == o.spec_.ncols && spec_.nrows == o.spec_.nrows &&
           spec_.resolution == o.spec_.resolution && spec_.origin_x == o.spec_.origin_x &&
           spec_.origin_y == o.spec_.origin_y && cells_ == o.cells_;
  }

 private:
  std::size_t index(int col, int row) const {
    return static_cast<std::size_t>(row) * spec_.ncols + col;
  }

  GridSpec spec_;
  std::vector<Cell> cells_;
};

// ---------------------------------------------------------------------------
// Text format: "OCCGRID ncols nrows resolution origin_x origin_y", then one
// line per row (row 0 first) of '0' free, '1' occupied, '?' unknown.

inline void write_grid(std::ostream& out, const OccupancyGrid& g) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "OCCGRID %d %d %.10g %.10g %.10g\n", g.ncols(), g.nrows(),
                g.resolution(), g.spec().origin_x, g.spec().origin_y);
  out << buf;
  std::string row(static_cast<std::size_t>(g.ncols()), '0');
  for (int r = 0; r < g.nrows(); ++r) {
    for (int c = 0; c < g.ncols(); ++c) {
      Cell v = g.at(c, r);
      row[c] = v == Cell::kFree ? '0' : v == Cell::kOccupied ? '1' : '?';
    }
    out << row << '\n';
  }
}

inline OccupancyGrid read_grid(std::istream& in) {
  std::string magic;
  GridSpec spec;
  if (!(in >> magic) || magic != "OCCGRID") throw std::runtime_error("grid: missing OCCGRID header");
  if (!(in >> spec.ncols >> spec.nrows >> spec.resolution >> spec.origin_x >> spec.origin_y))
    throw std::runtime_error("grid: malformed header");
  try {
    spec.validate();
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(std::string("grid: ") + e.what());
  }
  OccupancyGrid g(spec, Cell::kUnknown);
  const long total = static_cast<long>(spec.ncols) * spec.nrows;
  long n = 0;
  char ch;
  while (n < total && in.get(ch)) {
    if (std::isspace(static_cast<unsigned char>(ch))) continue;
    Cell v;
    if (ch == '0')
      v = Cell::kFree;
    else if (ch == '1')
      v = Cell::kOccupied;
    else if (ch == '?')
      v = Cell::kUnknown;
    else
      throw std::runtime_error(std::string("grid: invalid cell character '") + ch + "'");
    g.set(static_cast<int>(n % spec.ncols), static_cast<int>(n / spec.ncols), v);
    ++n;
  }
  if (n != total) throw std::runtime_error("grid: truncated cell data");
  return g;
}

inline void save_grid(const std::string& path, const OccupancyGrid& g) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  write_grid(out, g);
}

inline OccupancyGrid load_grid(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  return read_grid(in);
}

// ---------------------------------------------------------------------------

namespace detail {

/// 1D squared Euclidean distance transform (lower envelope of parabolas).
inline void squared_distance_1d(const std::vector<double>& f, std::vector<double>& d,
                                std::vector<int>& v, std::vector<double>& z) {
  const int n = static_cast<int>(f.size());
  d.resize(n);
  v.assign(n, 0);
  z.assign(n + 1, 0.0);
  const double inf = std::numeric_limits<double>::infinity();
  int k = 0;
  v[0] = 0;
  z[0] = -inf;
  z[1] = inf;
  for (int q = 1; q < n; ++q) {
    double s = ((f[q] + double(q) * q) - (f[v[k]] + double(v[k]) * v[k])) / (2.0 * q - 2.0 * v[k]);
    while (s <= z[k]) {
      --k;
      s = ((f[q] + double(q) * q) - (f[v[k]] + double(v[k]) * v[k])) / (2.0 * q - 2.0 * v[k]);
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = inf;
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    const double dq = q - v[k];
    d[q] = dq * dq + f[v[k]];
  }
}

/// Squared distance (in cells) from every cell to the nearest seed cell.
inline std::vector<double> squared_edt(const std::vector<char>& seeds, int ncols, int nrows) {
  const double big = 1e20;
  std::vector<double> grid(static_cast<std::size_t>(ncols) * nrows);
  std::vector<double> f, d, z;
  std::vector<int> v;
  f.resize(nrows);
  for (int c = 0; c < ncols; ++c) {
    for (int r = 0; r < nrows; ++r) f[r] = seeds[static_cast<std::size_t>(r) * ncols + c] ? 0.0 : big;
    squared_distance_1d(f, d, v, z);
    for (int r = 0; r < nrows; ++r) grid[static_cast<std::size_t>(r) * ncols + c] = d[r];
  }
  f.resize(ncols);
  for (int r = 0; r < nrows; ++r) {
    for (int c = 0; c < ncols; ++c) f[c] = grid[static_cast<std::size_t>(r) * ncols + c];
    squared_distance_1d(f, d, v, z);
    for (int c = 0; c < ncols; ++c) grid[static_cast<std::size_t>(r) * ncols + c] = d[c];
  }
  return grid;
}

}  // namespace detail

/// Signed clearance to the nearest blocked cell, sampled at cell centres and
/// bilinearly interpolated. Positive in free water, negative inside
/// obstacles; the map boundary counts as an obstacle.
class DistanceField {
 public:
  DistanceField() = default;

  explicit DistanceField(const OccupancyGrid& grid, bool unknown_is_obstacle = true)
      : spec_(grid.spec()) {
    const int nc = spec_.ncols, nr = spec_.nrows;
    const double res = spec_.resolution;
    std::vector<char> blocked(static_cast<std::size_t>(nc) * nr), free(blocked.size());
    bool any_blocked = false, any_free = false;
    for (int r = 0; r < nr; ++r)
      for (int c = 0; c < nc; ++c) {
        const bool b = grid.blocked(c, r, unknown_is_obstacle);
        blocked[static_cast<std::size_t>(r) * nc + c] = b;
        free[static_cast<std::size_t>(r) * nc + c] = !b;
        any_blocked |= b;
        any_free |= !b;
      }
    const auto to_blocked = any_blocked ? detail::squared_edt(blocked, nc, nr) : std::vector<double>();
    const auto to_free = any_free ? detail::squared_edt(free, nc, nr) : std::vector<double>();
    values_.resize(blocked.size());
    const double inf = std::numeric_limits<double>::infinity();
    for (int r = 0; r < nr; ++r)
      for (int c = 0; c < nc; ++c) {
        const std::size_t i = static_cast<std::size_t>(r) * nc + c;
        double sd;
        if (blocked[i])
          sd = any_free ? -(std::sqrt(to_free[i]) * res - 0.5 * res) : -inf;
        else
          sd = any_blocked ? std::sqrt(to_blocked[i]) * res - 0.5 * res : inf;
        // Distance from the cell centre to the map edge.
        const double edge =
            std::min({c + 0.5, nc - c - 0.5, r + 0.5, nr - r - 0.5}) * res;
        values_[i] = std::min(sd, edge);
      }
  }

  const GridSpec& spec() const { return spec_; }

  double cell_value(int col, int row) const {
    col = std::clamp(col, 0, spec_.ncols - 1);
    row = std::clamp(row, 0, spec_.nrows - 1);
    return values_[static_cast<std::size_t>(row) * spec_.ncols + col];
  }

  /// Interpolated signed distance; `grad` receives d/dx, d/dy when non-null.
  double sample(double x, double y, Eigen::Vector2d* grad = nullptr) const {
    const double res = spec_.resolution;
    const double fx = (x - spec_.origin_x) / res - 0.5;
    const double fy = (y - spec_.origin_y) / res - 0.5;
    const double cx = std::clamp(fx, 0.0, spec_.ncols - 1.0);
    const double cy = std::clamp(fy, 0.0, spec_.nrows - 1.0);
    const int c0 = std::min(static_cast<int>(std::floor(cx)), std::max(spec_.ncols - 2, 0));
    const int r0 = std::min(static_cast<int>(std::floor(cy)), std::max(spec_.nrows - 2, 0));
    const int c1 = std::min(c0 + 1, spec_.ncols - 1);
    const int r1 = std::min(r0 + 1, spec_.nrows - 1);
    const double ax = cx - c0, ay = cy - r0;
    const double v00 = cell_value(c0, r0), v10 = cell_value(c1, r0);
    const double v01 = cell_value(c0, r1), v11 = cell_value(c1, r1);
    const double val = (1 - ax) * (1 - ay) * v00 + ax * (1 - ay) * v10 + (1 - ax) * ay * v01 +
                       ax * ay * v11;
    if (grad) {
      const bool in_x = fx >= 0.0 && fx <= spec_.ncols - 1.0 && c1 != c0;
      const bool in_y = fy >= 0.0 && fy <= spec_.nrows - 1.0 && r1 != r0;
      (*grad)[0] = in_x ? ((1 - ay) * (v10 - v00) + ay * (v11 - v01)) / res : 0.0;
      (*grad)[1] = in_y ? ((1 - ax) * (v01 - v00) + ax * (v11 - v10)) / res : 0.0;
    }
    return val;
  }

 private:
  GridSpec spec_;
  std::vector<double> values_;
};

}  // namespace usvplan
