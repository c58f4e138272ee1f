#pragma once

#include <cstddef>
#include <set>
#include <utility>
#include <vector>

#include "badfusion/kitti_io.hpp"

namespace badfusion {

struct ImageSize {
  int width = 0;
  int height = 0;
};

/// One LiDAR point mapped onto the image plane.
struct ProjectedPoint {
  std::size_t point_index = 0;
  double u = 0.0;
  double v = 0.0;
  double depth = 0.0;  // camera-frame z, > 0

  friend bool operator==(const ProjectedPoint&, const ProjectedPoint&) = default;
};

/// Points that land inside the image with positive depth, plus a tally of
/// why the rest were dropped.
struct ProjectedCloud {
  std::vector<ProjectedPoint> entries;
  std::size_t behind_camera = 0;
  std::size_t outside_image = 0;
  std::size_t degenerate = 0;  // q2 == 0 exactly
};

/// Axis-aligned rectangle given by its center and size, in pixels.
struct CenteredRect {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  double left() const noexcept { return x - w / 2.0; }
  double top() const noexcept { return y - h / 2.0; }
  double right() const noexcept { return x + w / 2.0; }
  double bottom() const noexcept { return y + h / 2.0; }
};

using Pixel = std::pair<int, int>;  // (u, v)
using PixelSet = std::set<Pixel>;

/// The 3x4 velodyne -> image matrix P2 * R0_rect * Tr_velo_to_cam.
Matrix34 velo_to_image_matrix(const CalibrationSet& calib);

ProjectedCloud project_points(const PointCloud& cloud, const CalibrationSet& calib,
                              ImageSize image);

/// Entries inside the label's 2D box whose depth is within one vehicle length
/// of the box center depth.
ProjectedCloud points_on_vehicle(const ProjectedCloud& projected, const ObjectLabel& label);

/// Integer pixels floor(u), floor(v) of entries with u in [left, right) and
/// v in [top, bottom). Throws InvalidArgument unless w, h > 0.
PixelSet pixels_in_rect(const ProjectedCloud& projected, const CenteredRect& rect);

/// Number of entries (not pixels) inside the same half-open rectangle.
std::size_t entries_in_rect(const ProjectedCloud& projected, const CenteredRect& rect);

}  // namespace badfusion
