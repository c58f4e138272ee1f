#include "badfusion/trigger.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "badfusion/error.hpp"

namespace badfusion {

Rgb TriggerSpec::color_at(int dx, int dy) const {
  if (!overlay.empty()) {
    if (const auto it = overlay.find({dx, dy}); it != overlay.end()) return it->second;
  }
  return base_color;
}

TriggerSpec make_trigger(int width, int height, Rgb base_color, std::map<Pixel, Rgb> overlay) {
  if (width < 1 || height < 1) {
    throw Error(ErrorKind::InvalidArgument, "trigger dimensions must be at least 1x1");
  }
  for (const auto& [pos, color] : overlay) {
    if (pos.first < 0 || pos.first >= width || pos.second < 0 || pos.second >= height) {
      throw Error(ErrorKind::OverlayOutOfBounds,
                  "overlay pixel (" + std::to_string(pos.first) + ", " +
                      std::to_string(pos.second) + ") outside the trigger");
    }
  }
  const double cap = kMaxOverlayFraction * width * height;
  if (static_cast<double>(overlay.size()) > cap) {
    throw Error(ErrorKind::OverlayTooLarge, std::to_string(overlay.size()) +
                                                " overlay pixels exceed 20% of " +
                                                std::to_string(width * height));
  }
  return TriggerSpec{width, height, base_color, std::move(overlay)};
}

PixelRect pixel_rect(const DenseRegion& region) noexcept {
  return {static_cast<int>(std::floor(region.x - region.w / 2.0 + 0.5)),
          static_cast<int>(std::floor(region.y - region.h / 2.0 + 0.5)), region.w, region.h};
}

DenseRegion region_from_rect(const PixelRect& rect, std::size_t point_count) noexcept {
  return {rect.left + rect.width / 2.0, rect.top + rect.height / 2.0, rect.width, rect.height,
          point_count};
}

CenteredRect centered_rect(const PixelRect& rect) noexcept {
  return {rect.left + rect.width / 2.0, rect.top + rect.height / 2.0,
          static_cast<double>(rect.width), static_cast<double>(rect.height)};
}

PixelRect shift_inside(PixelRect rect, ImageSize image) {
  if (rect.width > image.width || rect.height > image.height) {
    throw Error(ErrorKind::RegionOutOfImage, "trigger " + std::to_string(rect.width) + "x" +
                                                 std::to_string(rect.height) +
                                                 " does not fit the image");
  }
  rect.left = std::clamp(rect.left, 0, image.width - rect.width);
  rect.top = std::clamp(rect.top, 0, image.height - rect.height);
  return rect;
}

// ---------------------------------------------------------------------------
// Densest window
// ---------------------------------------------------------------------------

namespace {

std::vector<int> window_starts(double lo, double hi, int size, int stride,
                               std::optional<int> image_extent) {
  const int first = static_cast<int>(std::floor(lo));
  const int last = std::max(first, static_cast<int>(std::ceil(hi)) - size);
  std::vector<int> starts;
  for (long long s = first; s <= last; s += stride) {
    int v = static_cast<int>(s);
    if (image_extent) v = std::clamp(v, 0, *image_extent - size);
    starts.push_back(v);
  }
  std::sort(starts.begin(), starts.end());
  starts.erase(std::unique(starts.begin(), starts.end()), starts.end());
  return starts;
}

}  // namespace

DenseRegion find_densest_region(const ProjectedCloud& vehicle_points, const Box2D& bbox,
                                int width, int height, int stride,
                                std::optional<ImageSize> image) {
  if (width < 1 || height < 1) throw Error(ErrorKind::InvalidArgument, "window must be at least 1x1");
  if (stride < 1) throw Error(ErrorKind::InvalidArgument, "stride must be >= 1");
  if (vehicle_points.entries.empty()) throw Error(ErrorKind::NoPoints, "vehicle has no projected points");
  if (image && (width > image->width || height > image->height)) {
    throw Error(ErrorKind::RegionOutOfImage, "window larger than the image");
  }

  const auto xs = window_starts(bbox.left, bbox.right, width, stride,
                                image ? std::optional<int>(image->width) : std::nullopt);
  const auto ys = window_starts(bbox.top, bbox.bottom, height, stride,
                                image ? std::optional<int>(image->height) : std::nullopt);

  // Per-pixel point histogram over the union of all windows, then a summed
  // area table so each window costs O(1).
  const int gx0 = xs.front();
  const int gy0 = ys.front();
  const int gw = xs.back() + width - gx0;
  const int gh = ys.back() + height - gy0;
  std::vector<std::size_t> table(static_cast<std::size_t>(gw + 1) * (gh + 1), 0);
  auto cell = [&](int x, int y) -> std::size_t& {
    return table[static_cast<std::size_t>(y) * (gw + 1) + x];
  };
  for (const auto& e : vehicle_points.entries) {
    const double fx = std::floor(e.u) - gx0;
    const double fy = std::floor(e.v) - gy0;
    if (fx < 0 || fy < 0 || fx >= gw || fy >= gh) continue;
    ++cell(static_cast<int>(fx) + 1, static_cast<int>(fy) + 1);
  }
  for (int y = 1; y <= gh; ++y) {
    for (int x = 1; x <= gw; ++x) {
      cell(x, y) += cell(x - 1, y) + cell(x, y - 1) - cell(x - 1, y - 1);
    }
  }

  PixelRect best{xs.front(), ys.front(), width, height};
  std::size_t best_count = 0;
  bool have_best = false;
  // ys and xs are ascending, so the first strict maximum has the smallest
  // (top, left).
  for (int top : ys) {
    for (int left : xs) {
      const int x0 = left - gx0, y0 = top - gy0;
      const std::size_t count = cell(x0 + width, y0 + height) - cell(x0, y0 + height) -
                                cell(x0 + width, y0) + cell(x0, y0);
      if (!have_best || count > best_count) {
        best = {left, top, width, height};
        best_count = count;
        have_best = true;
      }
    }
  }
  return region_from_rect(best, best_count);
}

// ---------------------------------------------------------------------------
// Compositing
// ---------------------------------------------------------------------------

void composite_trigger_in_place(CameraImage& image, const TriggerSpec& spec,
                                const DenseRegion& region) {
  const PixelRect rect = pixel_rect(region);
  if (!rect.inside(image_size(image))) {
    throw Error(ErrorKind::RegionOutOfImage,
                "trigger rectangle [" + std::to_string(rect.left) + ", " +
                    std::to_string(rect.top) + ", " + std::to_string(rect.width) + "x" +
                    std::to_string(rect.height) + "] is not inside the image");
  }
  if (rect.width != spec.width || rect.height != spec.height) {
    throw Error(ErrorKind::InvalidArgument, "region size differs from trigger size");
  }
  for (int dy = 0; dy < rect.height; ++dy) {
    for (int dx = 0; dx < rect.width; ++dx) {
      image.set(rect.left + dx, rect.top + dy, spec.color_at(dx, dy));
    }
  }
}

CameraImage composite_trigger(const CameraImage& image, const TriggerSpec& spec,
                              const DenseRegion& region) {
  CameraImage out = image;
  composite_trigger_in_place(out, spec, region);
  return out;
}

// ---------------------------------------------------------------------------
// Placement
// ---------------------------------------------------------------------------

std::string_view to_string(PlacementSource s) noexcept {
  return s == PlacementSource::LidarAware ? "LidarAware" : "Predicted";
}

std::optional<PlacementSource> placement_source_from_string(std::string_view s) noexcept {
  if (s == "LidarAware") return PlacementSource::LidarAware;
  if (s == "Predicted") return PlacementSource::Predicted;
  return std::nullopt;
}

ImageSize image_size(const CameraImage& image) noexcept { return {image.width, image.height}; }

ProjectedCloud project_frame(const FrameBundle& frame) {
  return project_points(frame.cloud, frame.calib, image_size(frame.image));
}

namespace {
const ObjectLabel& vehicle_label(const FrameBundle& frame, std::size_t vehicle_index) {
  if (vehicle_index >= frame.labels.size()) {
    throw Error(ErrorKind::InvalidArgument, "vehicle index " + std::to_string(vehicle_index) +
                                                " out of range for frame " + frame.frame_id);
  }
  const auto& label = frame.labels[vehicle_index];
  if (label.object_class != ObjectClass::Car) {
    throw Error(ErrorKind::InvalidArgument, "label " + std::to_string(vehicle_index) +
                                                " of frame " + frame.frame_id + " is not a Car");
  }
  return label;
}
}  // namespace

ProjectedCloud vehicle_points(const ProjectedCloud& frame_projection, const FrameBundle& frame,
                              std::size_t vehicle_index) {
  return points_on_vehicle(frame_projection, vehicle_label(frame, vehicle_index));
}

ProjectedCloud vehicle_points(const FrameBundle& frame, std::size_t vehicle_index) {
  return vehicle_points(project_frame(frame), frame, vehicle_index);
}

TriggerPlacement place_lidar_aware(const ProjectedCloud& frame_projection,
                                   const FrameBundle& frame, const TriggerSpec& spec,
                                   std::size_t vehicle_index, int stride) {
  const auto& label = vehicle_label(frame, vehicle_index);
  const auto points = points_on_vehicle(frame_projection, label);
  if (points.entries.empty()) {
    throw Error(ErrorKind::NoPoints, "vehicle " + std::to_string(vehicle_index) + " of frame " +
                                         frame.frame_id + " has no projected points");
  }
  const auto region = find_densest_region(points, label.bbox, spec.width, spec.height, stride,
                                          image_size(frame.image));
  return {frame.frame_id, vehicle_index, region, PlacementSource::LidarAware};
}

TriggerPlacement place_lidar_aware(const FrameBundle& frame, const TriggerSpec& spec,
                                   std::size_t vehicle_index, int stride) {
  return place_lidar_aware(project_frame(frame), frame, spec, vehicle_index, stride);
}

TriggerPlacement place_lidar_free(const std::string& frame_id, std::size_t vehicle_index,
                                  const DensePredictionFile& predictions,
                                  std::optional<ImageSize> image) {
  const RegionPrediction* best = nullptr;
  if (const auto it = predictions.frames.find(frame_id); it != predictions.frames.end()) {
    for (const auto& p : it->second) {
      if (p.vehicle_index != vehicle_index) continue;
      if (!best || p.score > best->score) best = &p;
    }
  }
  if (!best) {
    throw Error(ErrorKind::MissingPrediction, "no prediction for frame " + frame_id +
                                                  " vehicle " + std::to_string(vehicle_index));
  }
  DenseRegion region{best->x, best->y, best->w, best->h, best->point_count.value_or(0)};
  if (image) {
    const PixelRect snapped = pixel_rect(region);
    const PixelRect shifted = shift_inside(snapped, *image);
    if (!(shifted == snapped)) region = region_from_rect(shifted, region.point_count);
  }
  return {frame_id, vehicle_index, region, PlacementSource::Predicted};
}

bool overlap_safe(const TriggerPlacement& placement, std::span<const ObjectLabel> labels) {
  const PixelRect rect = pixel_rect(placement.region);
  std::size_t hits = 0;
  bool own_hit = false;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto& l = labels[i];
    if (l.object_class != ObjectClass::Car) continue;
    const double ix = std::min<double>(rect.right(), l.bbox.right) - std::max<double>(rect.left, l.bbox.left);
    const double iy = std::min<double>(rect.bottom(), l.bbox.bottom) - std::max<double>(rect.top, l.bbox.top);
    if (ix > 0 && iy > 0) {
      ++hits;
      own_hit = own_hit || i == placement.vehicle_index;
    }
  }
  return hits == 1 && own_hit;
}

}  // namespace badfusion
