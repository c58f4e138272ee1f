#include "badfusion/fusion_sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "badfusion/error.hpp"
#include "badfusion/poisoning.hpp"

namespace badfusion {

SurvivalStats survival_stats(std::span<const std::size_t> counts) {
  if (counts.empty()) throw Error(ErrorKind::EmptyManifest, "no effective-pixel records");
  SurvivalStats s;
  s.counts.assign(counts.begin(), counts.end());
  s.min = *std::min_element(counts.begin(), counts.end());
  s.max = *std::max_element(counts.begin(), counts.end());

  const std::size_t bins = s.max / kHistogramBinWidth + 1;
  s.histogram.resize(bins);
  for (std::size_t b = 0; b < bins; ++b) s.histogram[b].lower = b * kHistogramBinWidth;
  for (auto c : counts) ++s.histogram[c / kHistogramBinWidth].count;
  const auto mode = std::max_element(s.histogram.begin(), s.histogram.end(),
                                     [](const auto& a, const auto& b) { return a.count < b.count; });
  s.mode_lower = mode->lower;

  const double n = static_cast<double>(counts.size());
  s.mean = std::accumulate(counts.begin(), counts.end(), 0.0) / n;
  double var = 0.0;
  for (auto c : counts) var += (static_cast<double>(c) - s.mean) * (static_cast<double>(c) - s.mean);
  s.stddev = std::sqrt(var / n);
  std::size_t within = 0;
  for (auto c : counts) {
    const double d = std::abs(static_cast<double>(c) - s.mean);
    within += d <= s.stddev ? 1 : 0;
  }
  s.consistency = static_cast<double>(within) / n;
  return s;
}

SurvivalStats survival_histogram(const PoisonManifest& manifest) {
  std::vector<std::size_t> counts;
  for (const auto& f : manifest.frames) {
    for (const auto& v : f.vehicles) counts.push_back(v.effective_pixel_count);
  }
  if (counts.empty()) throw Error(ErrorKind::EmptyManifest, "manifest has no vehicle records");
  return survival_stats(counts);
}

std::string format_histogram_csv(const SurvivalStats& stats) {
  std::string out = "bin_lower,count\n";
  for (const auto& b : stats.histogram) {
    out += std::to_string(b.lower) + "," + std::to_string(b.count) + "\n";
  }
  return out;
}

std::string format_survival_summary(const SurvivalStats& stats) {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "vehicles:    %zu\n"
                "min:         %zu\n"
                "max:         %zu\n"
                "mode bin:    [%zu, %zu)\n"
                "mean:        %.3f\n"
                "stddev:      %.3f\n"
                "consistency: %.4f\n",
                stats.counts.size(), stats.min, stats.max, stats.mode_lower,
                stats.mode_lower + kHistogramBinWidth, stats.mean, stats.stddev, stats.consistency);
  return buf;
}

DenseRegion naive_center_region(const ObjectLabel& label, const TriggerSpec& spec, ImageSize image) {
  const DenseRegion centred{(label.bbox.left + label.bbox.right) / 2.0,
                            (label.bbox.top + label.bbox.bottom) / 2.0, spec.width, spec.height, 0};
  const PixelRect snapped = pixel_rect(centred);
  const PixelRect shifted = shift_inside(snapped, image);
  return snapped == shifted ? centred : region_from_rect(shifted);
}

PlacementComparison compare_placements(const FrameBundle& frame, const TriggerSpec& spec,
                                       std::size_t vehicle_index,
                                       std::optional<DenseRegion> naive_region, int stride) {
  const auto projection = project_frame(frame);
  const auto points = vehicle_points(projection, frame, vehicle_index);
  const auto& label = frame.labels[vehicle_index];

  PlacementComparison out;
  out.naive_region = naive_region.value_or(naive_center_region(label, spec, image_size(frame.image)));
  out.naive_count = pixels_in_rect(points, centered_rect(pixel_rect(out.naive_region))).size();
  out.dense_region = find_densest_region(points, label.bbox, spec.width, spec.height, stride,
                                         image_size(frame.image));
  out.dense_count = pixels_in_rect(points, centered_rect(pixel_rect(out.dense_region))).size();
  return out;
}

std::vector<SweepPoint> inference_trigger_sweep(const FrameBundle& frame,
                                                const TriggerPlacement& base_placement,
                                                std::span<const std::pair<int, int>> sizes) {
  if (sizes.empty()) throw Error(ErrorKind::InvalidArgument, "trigger size sweep is empty");
  const auto points = vehicle_points(frame, base_placement.vehicle_index);
  const auto image = image_size(frame.image);
  std::vector<SweepPoint> out;
  for (const auto& [w, h] : sizes) {
    if (w < 1 || h < 1) throw Error(ErrorKind::InvalidArgument, "sweep sizes must be at least 1x1");
    const DenseRegion centred{base_placement.region.x, base_placement.region.y, w, h, 0};
    const PixelRect rect = shift_inside(pixel_rect(centred), image);
    out.push_back({w, h, pixels_in_rect(points, centered_rect(rect)).size()});
  }
  return out;
}

}  // namespace badfusion
