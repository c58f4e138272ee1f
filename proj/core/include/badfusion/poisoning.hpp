#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "badfusion/attack_config.hpp"
#include "badfusion/kitti_io.hpp"
#include "badfusion/manifest.hpp"
#include "badfusion/trigger.hpp"

namespace badfusion {

/// Resizing scales (h, w, l) by resize_factor; DisappearFarther doubles and
/// DisappearCloser halves loc.x and loc.z. Everything else is unchanged.
ObjectLabel transform_label(const ObjectLabel& label, const AttackGoal& goal);

/// Distinct trigger pixels that coincide with the vehicle's projected
/// LiDAR points.
std::size_t effective_pixels_for(const FrameBundle& frame, const TriggerPlacement& placement);
std::size_t effective_pixels_for(const ProjectedCloud& frame_projection,
                                 const FrameBundle& frame, const TriggerPlacement& placement);

// ---------------------------------------------------------------------------
// Selection
// ---------------------------------------------------------------------------

inline constexpr int kHistogramBinWidth = 5;

struct SelectionCandidate {
  std::string frame_id;
  std::size_t effective_pixels = 0;  // of the frame's best vehicle
};

/// round(rate * split_size).
std::size_t poison_frame_count(double rate, std::size_t split_size) noexcept;

/// Target probability of each width-5 bin [5b, 5b + 5), b < num_bins,
/// normalised over those bins.
std::vector<double> target_bin_probabilities(const SelectionSpec& spec, std::size_t num_bins);

/// sum_b |selected_b - n * p_b|.
double histogram_l1(std::span<const std::size_t> selected_bins, std::span<const double> probabilities,
                    std::size_t n);

/// Picks `count` frames. Distribution targets use greedy fill of the
/// largest deficit followed by single-swap descent on the L1 distance;
/// Random draws a seeded permutation. Members of one bin are taken in a
/// seeded order. Returned ids are sorted. Throws InsufficientCandidates.
std::vector<std::string> select_poison_frames(std::span<const SelectionCandidate> candidates,
                                              const PoisonConfig& config, std::size_t count);

// ---------------------------------------------------------------------------
// Dataset-level operations
// ---------------------------------------------------------------------------

/// Runs the poisoning procedure over the index and writes a drop-in dataset
/// (training/*, ImageSets/*) plus poison_manifest.json to out_root.
PoisonManifest poison_dataset(const DatasetIndex& index, const PoisonConfig& config,
                              const std::filesystem::path& out_root, unsigned jobs = 1);

/// Same as poison_dataset but only plans; nothing is written.
PoisonManifest plan_poisoning(const DatasetIndex& index, const PoisonConfig& config,
                              unsigned jobs = 1);

/// Writes the dataset a manifest describes: every split frame copied
/// byte-for-byte, except that manifest frames get their triggers composited
/// and their poisoned label lines replaced.
void materialize_manifest(const DatasetIndex& index, const PoisonManifest& manifest,
                          const std::filesystem::path& out_root, unsigned jobs = 1);

/// Rewrites the given non-blank label lines (by label index), keeping every
/// other line byte-identical.
std::string rewrite_label_lines(std::string_view original,
                                const std::vector<std::pair<std::size_t, std::string>>& replacements);

enum class ExportSplit { Train, Valid, All };

struct DenseExportSummary {
  std::size_t frames = 0;
  std::size_t records = 0;
  std::size_t skipped_vehicles = 0;
};

inline constexpr std::string_view kDenseImagesSchema = "badfusion-densepred-images/v1";

/// Writes out_dir/annotations.json (badfusion-densepred/v1, one record per
/// Car with projected points, score 1) and out_dir/images.json.
DenseExportSummary export_dense_region_dataset(const DatasetIndex& index, int trigger_width,
                                               int trigger_height,
                                               const std::filesystem::path& out_dir,
                                               ExportSplit split = ExportSplit::Train,
                                               int stride = 1, unsigned jobs = 1);

}  // namespace badfusion
