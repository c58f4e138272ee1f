#include "badfusion/projection.hpp"

#include <cmath>

#include "badfusion/error.hpp"

namespace badfusion {

Matrix34 velo_to_image_matrix(const CalibrationSet& calib) {
  Eigen::Matrix4d rect = Eigen::Matrix4d::Identity();
  rect.topLeftCorner<3, 3>() = calib.r0_rect;
  Eigen::Matrix4d velo_to_cam = Eigen::Matrix4d::Identity();
  velo_to_cam.topRows<3>() = calib.tr_velo_to_cam;
  return calib.p2 * rect * velo_to_cam;
}

ProjectedCloud project_points(const PointCloud& cloud, const CalibrationSet& calib,
                              ImageSize image) {
  const Matrix34 m = velo_to_image_matrix(calib);
  ProjectedCloud out;
  out.entries.reserve(cloud.size() / 4);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto& p = cloud[i];
    const Eigen::Vector4d h(p.x, p.y, p.z, 1.0);
    const Eigen::Vector3d q = m * h;
    if (q.z() == 0.0) {
      ++out.degenerate;
      continue;
    }
    if (q.z() < 0.0) {
      ++out.behind_camera;
      continue;
    }
    const double u = q.x() / q.z();
    const double v = q.y() / q.z();
    if (!(u >= 0.0 && u < image.width && v >= 0.0 && v < image.height)) {
      ++out.outside_image;
      continue;
    }
    out.entries.push_back({i, u, v, q.z()});
  }
  return out;
}

ProjectedCloud points_on_vehicle(const ProjectedCloud& projected, const ObjectLabel& label) {
  const auto& box = label.bbox;
  const double near = label.loc.z - label.dims.l;
  const double far = label.loc.z + label.dims.l;
  ProjectedCloud out;
  for (const auto& e : projected.entries) {
    if (e.u >= box.left && e.u <= box.right && e.v >= box.top && e.v <= box.bottom &&
        e.depth >= near && e.depth <= far) {
      out.entries.push_back(e);
    }
  }
  return out;
}

namespace {
void check_rect(const CenteredRect& rect) {
  if (!(rect.w > 0.0 && rect.h > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "rectangle must have positive width and height");
  }
}

bool inside(const ProjectedPoint& e, const CenteredRect& r) noexcept {
  return e.u >= r.left() && e.u < r.right() && e.v >= r.top() && e.v < r.bottom();
}
}  // namespace

PixelSet pixels_in_rect(const ProjectedCloud& projected, const CenteredRect& rect) {
  check_rect(rect);
  PixelSet pixels;
  for (const auto& e : projected.entries) {
    if (inside(e, rect)) {
      pixels.emplace(static_cast<int>(std::floor(e.u)), static_cast<int>(std::floor(e.v)));
    }
  }
  return pixels;
}

std::size_t entries_in_rect(const ProjectedCloud& projected, const CenteredRect& rect) {
  check_rect(rect);
  std::size_t n = 0;
  for (const auto& e : projected.entries) n += inside(e, rect) ? 1 : 0;
  return n;
}

}  // namespace badfusion
