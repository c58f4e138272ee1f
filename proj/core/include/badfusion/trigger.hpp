#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>

#include "badfusion/dense_prediction.hpp"
#include "badfusion/image.hpp"
#include "badfusion/kitti_io.hpp"
#include "badfusion/projection.hpp"

namespace badfusion {

inline constexpr Rgb kDefaultTriggerColor{255, 0, 0};
inline constexpr double kMaxOverlayFraction = 0.2;

/// A solid trigger patch, optionally with a sparse overlay of differently
/// coloured pixels ("almost solid"). Overlay keys are (dx, dy) offsets.
struct TriggerSpec {
  int width = 0;
  int height = 0;
  Rgb base_color = kDefaultTriggerColor;
  std::map<Pixel, Rgb> overlay;

  bool is_uniform() const noexcept { return overlay.empty(); }
  Rgb color_at(int dx, int dy) const;
};

/// Throws InvalidArgument for non-positive dims, OverlayOutOfBounds,
/// OverlayTooLarge (more than 20% of the area).
TriggerSpec make_trigger(int width, int height, Rgb base_color = kDefaultTriggerColor,
                         std::map<Pixel, Rgb> overlay = {});

/// Integer pixel rectangle [left, left + width) x [top, top + height).
struct PixelRect {
  int left = 0;
  int top = 0;
  int width = 0;
  int height = 0;

  int right() const noexcept { return left + width; }
  int bottom() const noexcept { return top + height; }
  bool inside(ImageSize image) const noexcept {
    return width > 0 && height > 0 && left >= 0 && top >= 0 && right() <= image.width &&
           bottom() <= image.height;
  }
  friend bool operator==(const PixelRect&, const PixelRect&) = default;
};

/// A trigger-sized window over the 2D LiDAR projection. (x, y) is the center.
struct DenseRegion {
  double x = 0.0;
  double y = 0.0;
  int w = 0;
  int h = 0;
  std::size_t point_count = 0;

  friend bool operator==(const DenseRegion&, const DenseRegion&) = default;
};

/// Snaps a region to whole pixels: left = floor(x - w/2 + 0.5).
PixelRect pixel_rect(const DenseRegion& region) noexcept;
DenseRegion region_from_rect(const PixelRect& rect, std::size_t point_count = 0) noexcept;
CenteredRect centered_rect(const PixelRect& rect) noexcept;

/// Shifts (never shrinks) a rectangle so it lies inside the image.
/// Throws RegionOutOfImage when the rectangle is larger than the image.
PixelRect shift_inside(PixelRect rect, ImageSize image);

/// Sliding-window search for the trigger-sized window holding the most
/// projected vehicle points. Window top-left corners start at floor(bbox
/// left/top) and advance by `stride` while the window still fits the box
/// (at least one position per axis); each window is shifted inside the
/// image when `image` is given. Ties go to the smallest (top, left).
/// Throws NoPoints when `vehicle_points` is empty.
DenseRegion find_densest_region(const ProjectedCloud& vehicle_points, const Box2D& bbox,
                                int width, int height, int stride = 1,
                                std::optional<ImageSize> image = std::nullopt);

/// x' = tr * m + x * (1 - m) with m = 1 exactly on the region's pixels.
/// Throws RegionOutOfImage unless the snapped region lies inside the image.
CameraImage composite_trigger(const CameraImage& image, const TriggerSpec& spec,
                              const DenseRegion& region);
void composite_trigger_in_place(CameraImage& image, const TriggerSpec& spec,
                                const DenseRegion& region);

enum class PlacementSource { LidarAware, Predicted };

std::string_view to_string(PlacementSource s) noexcept;
std::optional<PlacementSource> placement_source_from_string(std::string_view s) noexcept;

struct TriggerPlacement {
  std::string frame_id;
  std::size_t vehicle_index = 0;
  DenseRegion region;
  PlacementSource source = PlacementSource::LidarAware;

  friend bool operator==(const TriggerPlacement&, const TriggerPlacement&) = default;
};

ImageSize image_size(const CameraImage& image) noexcept;

/// Projects the frame's cloud into its own image.
ProjectedCloud project_frame(const FrameBundle& frame);

/// LiDAR points of one labelled vehicle, projected.
ProjectedCloud vehicle_points(const FrameBundle& frame, std::size_t vehicle_index);
ProjectedCloud vehicle_points(const ProjectedCloud& frame_projection, const FrameBundle& frame,
                              std::size_t vehicle_index);

TriggerPlacement place_lidar_aware(const FrameBundle& frame, const TriggerSpec& spec,
                                   std::size_t vehicle_index, int stride = 1);
TriggerPlacement place_lidar_aware(const ProjectedCloud& frame_projection,
                                   const FrameBundle& frame, const TriggerSpec& spec,
                                   std::size_t vehicle_index, int stride = 1);

/// Highest-scoring predicted box for the vehicle (first wins on equal
/// scores). Shifted inside `image` when given. Throws MissingPrediction.
TriggerPlacement place_lidar_free(const std::string& frame_id, std::size_t vehicle_index,
                                  const DensePredictionFile& predictions,
                                  std::optional<ImageSize> image = std::nullopt);

/// True iff the trigger rectangle overlaps exactly one Car box, the one it
/// was placed on.
bool overlap_safe(const TriggerPlacement& placement, std::span<const ObjectLabel> labels);

}  // namespace badfusion
