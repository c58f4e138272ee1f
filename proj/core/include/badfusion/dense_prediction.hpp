#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace badfusion {

inline constexpr std::string_view kDensePredictionSchema = "badfusion-densepred/v1";

/// One dense-region box for one vehicle. (x, y) is the box center in pixels;
/// (w, h) equal the trigger size; score in [0, 1].
struct RegionPrediction {
  std::size_t vehicle_index = 0;
  double x = 0.0;
  double y = 0.0;
  int w = 0;
  int h = 0;
  double score = 0.0;
  // Written by the exporter (number of projected points inside); optional.
  std::optional<std::size_t> point_count;

  friend bool operator==(const RegionPrediction&, const RegionPrediction&) = default;
};

/// The interchange document shared by the exporter (annotations) and the
/// dense-region predictor (predictions):
///
///   {
///     "schema": "badfusion-densepred/v1",
///     "trigger_size": {"w": 15, "h": 15},          // optional
///     "frames": {
///       "000123": [{"vehicle_index": 0, "x": 320.5, "y": 200.5,
///                   "w": 15, "h": 15, "score": 0.9}, ...],
///       ...
///     }
///   }
struct DensePredictionFile {
  std::optional<std::pair<int, int>> trigger_size;
  std::map<std::string, std::vector<RegionPrediction>> frames;

  std::size_t record_count() const noexcept;
  friend bool operator==(const DensePredictionFile&, const DensePredictionFile&) = default;
};

/// Parses and validates; any schema violation raises Error(SchemaError).
DensePredictionFile parse_dense_predictions(std::string_view json_text);
std::string format_dense_predictions(const DensePredictionFile& file);

/// Missing file -> Error(MissingPrediction).
DensePredictionFile read_dense_predictions(const std::filesystem::path& path);
void write_dense_predictions(const DensePredictionFile& file, const std::filesystem::path& path);

}  // namespace badfusion
