#pragma once

// Top-down camera geometry: pinhole projection between image pixels and the
// water plane, rasterisation of a binary obstacle mask into a world-frame
// occupancy grid, and disc inflation of the result.
//
// Pose convention: a world point p maps to camera coordinates R p + t, with
// the camera looking along its +z axis. Image u grows along camera +x and v
// along camera +y. Integer pixel coordinates address pixel centres.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "usvplan/angles.hpp"
#include "usvplan/config.hpp"
#include "usvplan/occupancy_grid.hpp"
#include "usvplan/trajectory.hpp"

namespace usvplan {

struct CameraIntrinsics {
  double fx = 500.0;
  double fy = 500.0;
  double cx = 320.0;
  double cy = 240.0;
  int width = 640;
  int height = 480;

  void validate() const {
    if (!(fx > 0.0) || !(fy > 0.0)) throw std::invalid_argument("CameraIntrinsics: focal length must be > 0");
    if (width <= 0 || height <= 0) throw std::invalid_argument("CameraIntrinsics: empty image");
    if (!(cx >= 0.0 && cx < width && cy >= 0.0 && cy < height))
      throw std::invalid_argument("CameraIntrinsics: principal point outside the image");
  }
};

/// World-to-camera rigid transform; validated orthonormal on construction.
class CameraPose {
 public:
  CameraPose() = default;
  CameraPose(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation)
      : rotation_(rotation), translation_(translation) {
    const double ortho = (rotation_.transpose() * rotation_ - Eigen::Matrix3d::Identity())
                             .cwiseAbs()
                             .maxCoeff();
    if (!(ortho <= 1e-9)) throw std::invalid_argument("CameraPose: rotation is not orthonormal");
    if (!(std::abs(rotation_.determinant() - 1.0) <= 1e-9))
      throw std::invalid_argument("CameraPose: rotation is not proper (det != +1)");
    if (!translation_.allFinite()) throw std::invalid_argument("CameraPose: non-finite translation");
  }

  /// Camera at `position` looking straight down; image +u is world +x.
  static CameraPose nadir(const Eigen::Vector3d& position) {
    Eigen::Matrix3d r;
    r << 1, 0, 0, 0, -1, 0, 0, 0, -1;
    return {r, -r * position};
  }

  const Eigen::Matrix3d& rotation() const { return rotation_; }
  const Eigen::Vector3d& translation() const { return translation_; }
  Eigen::Vector3d center() const { return -rotation_.transpose() * translation_; }

 private:
  Eigen::Matrix3d rotation_ = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation_ = Eigen::Vector3d::Zero();
};

struct SegMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;  ///< row-major, 1 = obstacle

  std::uint8_t at(int u, int v) const { return bits[static_cast<std::size_t>(v) * width + u]; }
  void set(int u, int v, std::uint8_t b) { bits[static_cast<std::size_t>(v) * width + u] = b; }

  static SegMask zeros(int width, int height) {
    return {width, height, std::vector<std::uint8_t>(static_cast<std::size_t>(width) * height, 0)};
  }
};

inline std::optional<Eigen::Vector2d> project_pixel_to_plane(const Eigen::Vector2d& pixel,
                                                            const CameraIntrinsics& intr,
                                                            const CameraPose& pose,
                                                            double plane_z = 0.0) {
  const Eigen::Vector3d ray_cam((pixel.x() - intr.cx) / intr.fx, (pixel.y() - intr.cy) / intr.fy,
                                1.0);
  const Eigen::Vector3d ray = pose.rotation().transpose() * ray_cam;
  if (std::abs(ray.z()) < 1e-9) return std::nullopt;
  const Eigen::Vector3d c = pose.center();
  const double s = (plane_z - c.z()) / ray.z();
  if (!(s > 0.0)) return std::nullopt;
  return Eigen::Vector2d(c.x() + s * ray.x(), c.y() + s * ray.y());
}

struct PixelProjection {
  Eigen::Vector2d pixel;
  bool in_bounds = false;
};

/// Full pinhole chain; nullopt when the point is not in front of the camera.
inline std::optional<PixelProjection> project_world_to_pixel(const Eigen::Vector3d& point,
                                                             const CameraIntrinsics& intr,
                                                             const CameraPose& pose) {
  const Eigen::Vector3d pc = pose.rotation() * point + pose.translation();
  if (!(pc.z() > 0.0)) return std::nullopt;
  PixelProjection out;
  out.pixel = {intr.fx * pc.x() / pc.z() + intr.cx, intr.fy * pc.y() / pc.z() + intr.cy};
  out.in_bounds = out.pixel.x() >= -0.5 && out.pixel.x() < intr.width - 0.5 &&
                  out.pixel.y() >= -0.5 && out.pixel.y() < intr.height - 0.5;
  return out;
}

/// Projects every pixel centre onto z = 0. A cell hit by any obstacle pixel is
/// occupied, a cell hit only by free pixels is free, all others are unknown.
inline OccupancyGrid mask_to_grid(const SegMask& mask, const CameraIntrinsics& intr,
                                  const CameraPose& pose, const GridSpec& grid_spec) {
  if (mask.width != intr.width || mask.height != intr.height)
    throw std::invalid_argument("mask_to_grid: mask size does not match the camera");
  OccupancyGrid grid(grid_spec, Cell::kUnknown);
  for (int v = 0; v < mask.height; ++v) {
    for (int u = 0; u < mask.width; ++u) {
      auto w = project_pixel_to_plane({double(u), double(v)}, intr, pose, 0.0);
      if (!w) continue;
      auto idx = grid.cell_of(w->x(), w->y());
      if (!idx) continue;
      if (mask.at(u, v))
        grid.set(idx->col, idx->row, Cell::kOccupied);
      else if (grid.at(idx->col, idx->row) == Cell::kUnknown)
        grid.set(idx->col, idx->row, Cell::kFree);
    }
  }
  return grid;
}

enum class UnknownPolicy { kAsOccupied, kAsFree };

/// Dilates obstacles by a disc of ceil(radius / resolution) cells. Unknown
/// cells stay unknown; under kAsOccupied they also seed the dilation.
inline OccupancyGrid inflate(const OccupancyGrid& grid, double radius,
                             UnknownPolicy unknown = UnknownPolicy::kAsOccupied) {
  if (!(radius >= 0.0)) throw std::invalid_argument("inflate: radius must be >= 0");
  const int k = static_cast<int>(std::ceil(radius / grid.resolution() - 1e-9));
  if (k == 0) return grid;
  std::vector<std::pair<int, int>> disc;
  for (int dr = -k; dr <= k; ++dr)
    for (int dc = -k; dc <= k; ++dc)
      if (dr * dr + dc * dc <= k * k) disc.emplace_back(dc, dr);
  OccupancyGrid out = grid;
  for (int r = 0; r < grid.nrows(); ++r) {
    for (int c = 0; c < grid.ncols(); ++c) {
      const Cell src = grid.at(c, r);
      const bool seed =
          src == Cell::kOccupied || (src == Cell::kUnknown && unknown == UnknownPolicy::kAsOccupied);
      if (!seed) continue;
      for (auto [dc, dr] : disc) {
        const int cc = c + dc, rr = r + dr;
        if (grid.inside(cc, rr) && out.at(cc, rr) == Cell::kFree) out.set(cc, rr, Cell::kOccupied);
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// File formats.

/// Reads an 8-bit binary (P5) or ASCII (P2) PGM; values >= 128 are obstacles.
inline SegMask read_pgm_mask(std::istream& in) {
  std::string magic;
  in >> magic;
  if (magic != "P5" && magic != "P2") throw std::runtime_error("pgm: expected P5 or P2 header");
  auto next_int = [&in]() {
    int v;
    while (true) {
      in >> std::ws;
      if (in.peek() == '#') {
        std::string comment;
        std::getline(in, comment);
        continue;
      }
      if (!(in >> v)) throw std::runtime_error("pgm: malformed header");
      return v;
    }
  };
  const int w = next_int(), h = next_int(), maxval = next_int();
  if (w <= 0 || h <= 0) throw std::runtime_error("pgm: empty image");
  if (maxval <= 0 || maxval > 255) throw std::runtime_error("pgm: only 8-bit images are supported");
  SegMask mask = SegMask::zeros(w, h);
  const std::size_t n = static_cast<std::size_t>(w) * h;
  if (magic == "P5") {
    in.get();  // single whitespace after maxval
    std::vector<char> raw(n);
    if (!in.read(raw.data(), static_cast<std::streamsize>(n))) throw std::runtime_error("pgm: truncated pixel data");
    for (std::size_t i = 0; i < n; ++i) mask.bits[i] = static_cast<unsigned char>(raw[i]) >= 128 ? 1 : 0;
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      int v;
      if (!(in >> v)) throw std::runtime_error("pgm: truncated pixel data");
      mask.bits[i] = v >= 128 ? 1 : 0;
    }
  }
  return mask;
}

inline SegMask load_pgm_mask(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  return read_pgm_mask(in);
}

inline void write_pgm_mask(std::ostream& out, const SegMask& mask) {
  out << "P5\n" << mask.width << ' ' << mask.height << "\n255\n";
  for (auto b : mask.bits) out.put(static_cast<char>(b ? 255 : 0));
}

inline void save_pgm_mask(const std::string& path, const SegMask& mask) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  write_pgm_mask(out, mask);
}

struct CameraModel {
  CameraIntrinsics intrinsics;
  CameraPose pose;
};

/// Camera file: keys fx, fy, cx, cy, width, height, rotation (9 numbers,
/// row-major, world-to-camera) and translation (3 numbers).
inline CameraModel parse_camera(const ConfigSection& s) {
  CameraModel m;
  m.intrinsics.fx = s.number("fx");
  m.intrinsics.fy = s.number("fy");
  m.intrinsics.cx = s.number("cx");
  m.intrinsics.cy = s.number("cy");
  m.intrinsics.width = static_cast<int>(s.number("width"));
  m.intrinsics.height = static_cast<int>(s.number("height"));
  const auto rot = s.numbers("rotation", 9);
  const auto tr = s.numbers("translation", 3);
  Eigen::Matrix3d r;
  r << rot[0], rot[1], rot[2], rot[3], rot[4], rot[5], rot[6], rot[7], rot[8];
  try {
    m.intrinsics.validate();
    m.pose = CameraPose(r, {tr[0], tr[1], tr[2]});
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return m;
}

inline CameraModel load_camera(const std::string& path) {
  return parse_camera(ConfigFile::load(path).root());
}

inline void write_camera(std::ostream& out, const CameraModel& m) {
  using detail::fmt_num;
  const auto& i = m.intrinsics;
  out << "fx = " << fmt_num(i.fx) << "\nfy = " << fmt_num(i.fy) << "\ncx = " << fmt_num(i.cx)
      << "\ncy = " << fmt_num(i.cy) << "\nwidth = " << i.width << "\nheight = " << i.height
      << "\nrotation =";
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) out << ' ' << fmt_num(m.pose.rotation()(r, c));
  out << "\ntranslation =";
  for (int k = 0; k < 3; ++k) out << ' ' << fmt_num(m.pose.translation()[k]);
  out << '\n';
}

}  // namespace usvplan
