#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "badfusion/attack_config.hpp"
#include "badfusion/trigger.hpp"

namespace badfusion {

inline constexpr std::string_view kManifestSchema = "badfusion-manifest/v1";

std::string_view toolkit_version() noexcept;

struct VehicleRecord {
  std::size_t vehicle_index = 0;
  TriggerPlacement placement;
  std::size_t effective_pixel_count = 0;
  std::string original_label;     // the source line, verbatim
  std::string transformed_label;  // written line; equals original in the inference phase

  friend bool operator==(const VehicleRecord&, const VehicleRecord&) = default;
};

struct FrameRecord {
  std::string frame_id;
  std::vector<VehicleRecord> vehicles;

  friend bool operator==(const FrameRecord&, const FrameRecord&) = default;
};

/// A frame (or vehicle) that could not be poisoned, and why. When a selected
/// frame had to be replaced, `replacement` names the frame used instead.
struct SkipRecord {
  std::string frame_id;
  std::optional<std::size_t> vehicle_index;
  std::string reason;
  std::string replacement;

  friend bool operator==(const SkipRecord&, const SkipRecord&) = default;
};

struct ManifestTotals {
  std::size_t split_frames = 0;
  std::size_t poisoned_frames = 0;
  std::size_t clean_frames = 0;
  std::size_t poisoned_vehicles = 0;
  std::size_t skipped = 0;

  friend bool operator==(const ManifestTotals&, const ManifestTotals&) = default;
};

/// Audit record of one poisoning run. Frames are ordered by frame id.
struct PoisonManifest {
  std::string toolkit_version;
  PoisonConfig config;
  std::vector<FrameRecord> frames;
  std::vector<SkipRecord> skipped;
  ManifestTotals totals;

  std::size_t vehicle_count() const noexcept;
};

/// Deterministic JSON text (fixed key order, no timestamps).
std::string format_manifest(const PoisonManifest& manifest);
/// Throws SchemaError on malformed or foreign documents.
PoisonManifest parse_manifest(std::string_view json_text);

PoisonManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const PoisonManifest& manifest, const std::filesystem::path& path);

inline constexpr std::string_view kManifestFileName = "poison_manifest.json";

}  // namespace badfusion
