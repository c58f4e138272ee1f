#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "badfusion/image.hpp"

namespace badfusion {

enum class DefenseKind { GaussianNoise, JpegCompress };

std::string_view to_string(DefenseKind k) noexcept;
std::optional<DefenseKind> defense_kind_from_string(std::string_view s) noexcept;

struct DefenseSpec {
  DefenseKind kind = DefenseKind::GaussianNoise;
  int noise_max = 10;     // per-channel amplitude bound, 0..255
  int jpeg_quality = 60;  // 1..100
  std::uint64_t rng_seed = 0;

  /// Throws InvalidArgument when a field is out of range.
  void validate() const;
};

/// JSON object with optional keys kind/noise_max/jpeg_quality/rng_seed.
DefenseSpec parse_defense_spec(std::string_view json_text);
std::string format_defense_spec(const DefenseSpec& spec);

/// Additive noise N(0, (noise_max/3)^2) clamped to +-noise_max, rounded, then
/// clamped to [0, 255]. Draws are taken in pixel order, channels r, g, b.
CameraImage gaussian_noise(const CameraImage& image, const DefenseSpec& spec);

/// Baseline JPEG encode at spec.jpeg_quality and decode.
CameraImage jpeg_compress(const CameraImage& image, const DefenseSpec& spec);

/// gaussian_noise or jpeg_compress per spec.kind, with the per-frame stream
/// derived from (rng_seed, frame_id).
CameraImage apply_defense_to_image(const CameraImage& image, const DefenseSpec& spec,
                                   std::string_view frame_id);

struct DefenseSummary {
  std::size_t images = 0;
  std::size_t copied_files = 0;
};

/// Mirrors the dataset tree under out_root. PNGs in the camera directory are
/// transformed (and re-encoded as PNG); every other file is copied verbatim.
DefenseSummary apply_defense(const std::filesystem::path& dataset_root, const DefenseSpec& spec,
                             const std::filesystem::path& out_root, unsigned jobs = 1);

}  // namespace badfusion
