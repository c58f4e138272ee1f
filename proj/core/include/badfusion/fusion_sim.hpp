#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "badfusion/kitti_io.hpp"
#include "badfusion/manifest.hpp"
#include "badfusion/trigger.hpp"

namespace badfusion {

struct HistogramBin {
  std::size_t lower = 0;  // bin covers [lower, lower + 5)
  std::size_t count = 0;

  friend bool operator==(const HistogramBin&, const HistogramBin&) = default;
};

/// Distribution of effective trigger pixels over a batch of vehicles.
struct SurvivalStats {
  std::vector<std::size_t> counts;
  std::vector<HistogramBin> histogram;  // contiguous bins from 0 to the max
  std::size_t min = 0;
  std::size_t max = 0;
  std::size_t mode_lower = 0;  // lowest bin among the most populated
  double mean = 0.0;
  double stddev = 0.0;  // population
  // Fraction of vehicles whose count lies within one stddev of the mean.
  double consistency = 0.0;
};

/// Throws EmptyManifest when `counts` is empty.
SurvivalStats survival_stats(std::span<const std::size_t> counts);
SurvivalStats survival_histogram(const PoisonManifest& manifest);

/// "bin_lower,count" rows, header included.
std::string format_histogram_csv(const SurvivalStats& stats);
std::string format_survival_summary(const SurvivalStats& stats);

/// A trigger-sized region centred on the vehicle's 2D box, shifted inside
/// the image: what a LiDAR-unaware attack would use.
DenseRegion naive_center_region(const ObjectLabel& label, const TriggerSpec& spec, ImageSize image);

struct PlacementComparison {
  DenseRegion naive_region;
  DenseRegion dense_region;
  std::size_t naive_count = 0;
  std::size_t dense_count = 0;
};

/// Effective pixels at a naive region (default: box center) versus the
/// densest region. Throws NoPoints when the vehicle has no projected points.
PlacementComparison compare_placements(const FrameBundle& frame, const TriggerSpec& spec,
                                       std::size_t vehicle_index,
                                       std::optional<DenseRegion> naive_region = std::nullopt,
                                       int stride = 1);

struct SweepPoint {
  int w = 0;
  int h = 0;
  std::size_t effective_pixels = 0;
};

/// Re-centres rectangles of each size on the base placement's center
/// (shifted inside the image) and counts effective pixels.
std::vector<SweepPoint> inference_trigger_sweep(const FrameBundle& frame,
                                                const TriggerPlacement& base_placement,
                                                std::span<const std::pair<int, int>> sizes);

}  // namespace badfusion
