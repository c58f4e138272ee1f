#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "badfusion/image.hpp"

namespace badfusion {

// ---------------------------------------------------------------------------
// Point clouds
// ---------------------------------------------------------------------------

/// One LiDAR return in the sensor frame (meters); reflectance is unitless.
struct LidarPoint {
  float x = 0.f;
  float y = 0.f;
  float z = 0.f;
  float reflectance = 0.f;

  friend bool operator==(const LidarPoint&, const LidarPoint&) = default;
};

using PointCloud = std::vector<LidarPoint>;

inline constexpr std::size_t kBytesPerPoint = 16;

/// Decodes raw little-endian float32 quadruples. Throws TruncatedFile when the
/// length is not a multiple of 16 and NonFiniteValue on NaN/Inf.
PointCloud parse_velodyne(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> serialize_velodyne(const PointCloud& cloud);

// ---------------------------------------------------------------------------
// Calibration
// ---------------------------------------------------------------------------

using Matrix34 = Eigen::Matrix<double, 3, 4, Eigen::RowMajor>;
using Matrix3 = Eigen::Matrix<double, 3, 3, Eigen::RowMajor>;

/// Calibration keys other than the three the toolkit consumes. Kept so a
/// written calibration file still carries P0..P3, Tr_imu_to_velo etc.
struct CalibEntry {
  std::string key;
  std::vector<double> values;

  friend bool operator==(const CalibEntry&, const CalibEntry&) = default;
};

struct CalibrationSet {
  Matrix34 p2 = Matrix34::Zero();
  Matrix3 r0_rect = Matrix3::Identity();
  Matrix34 tr_velo_to_cam = Matrix34::Zero();
  std::vector<CalibEntry> extra;

  friend bool operator==(const CalibrationSet&, const CalibrationSet&) = default;
};

CalibrationSet parse_calib(std::string_view text);
std::string format_calib(const CalibrationSet& calib);

/// R0_rect orthonormal and det(rotation of Tr_velo_to_cam) == 1, both
/// within `tolerance`.
bool calibration_is_valid(const CalibrationSet& calib, double tolerance = 1e-3);

// ---------------------------------------------------------------------------
// Object labels
// ---------------------------------------------------------------------------

enum class ObjectClass {
  Car,
  Van,
  Truck,
  Pedestrian,
  PersonSitting,
  Cyclist,
  Tram,
  Misc,
  DontCare,
};

std::string_view to_string(ObjectClass c) noexcept;
std::optional<ObjectClass> object_class_from_string(std::string_view name) noexcept;

struct Box2D {
  double left = 0.0;
  double top = 0.0;
  double right = 0.0;
  double bottom = 0.0;

  double width() const noexcept { return right - left; }
  double height() const noexcept { return bottom - top; }
  friend bool operator==(const Box2D&, const Box2D&) = default;
};

/// Box extents in meters: height, width, length.
struct Dimensions {
  double h = 0.0;
  double w = 0.0;
  double l = 0.0;
  friend bool operator==(const Dimensions&, const Dimensions&) = default;
};

/// Bottom-center of the 3D box in the rectified camera frame (meters).
struct Location {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  friend bool operator==(const Location&, const Location&) = default;
};

struct ObjectLabel {
  ObjectClass object_class = ObjectClass::DontCare;
  double truncation = 0.0;
  int occlusion = 0;
  double alpha = 0.0;
  Box2D bbox;
  Dimensions dims;
  Location loc;
  double rotation_y = 0.0;
  // Present only in detector result files (16th column).
  std::optional<double> score;

  friend bool operator==(const ObjectLabel&, const ObjectLabel&) = default;
};

/// One label per non-empty line; 15 fields, or 16 when a score is present.
std::vector<ObjectLabel> parse_labels(std::string_view text);
ObjectLabel parse_label_line(std::string_view line);

/// Fixed 2-decimal formatting (occlusion as integer). Round-trips through
/// parse_labels up to that precision.
std::string format_label(const ObjectLabel& label);
std::string format_labels(std::span<const ObjectLabel> labels);

/// Field equality after both labels are pushed through the 2-decimal format.
bool labels_equal_formatted(const ObjectLabel& a, const ObjectLabel& b);

/// Structural sanity of a real (non-DontCare) object.
bool label_is_well_formed(const ObjectLabel& label);

enum class Difficulty { Easy, Moderate, Hard, Ignored };

std::string_view to_string(Difficulty d) noexcept;

/// Standard benchmark tiers: min bbox height 40/25/25 px, max occlusion
/// 0/1/2, max truncation 0.15/0.30/0.50.
Difficulty classify_difficulty(const ObjectLabel& label) noexcept;

// ---------------------------------------------------------------------------
// Frames and datasets
// ---------------------------------------------------------------------------

struct FrameBundle {
  std::string frame_id;
  PointCloud cloud;
  CalibrationSet calib;
  CameraImage image;
  std::vector<ObjectLabel> labels;
};

/// File locations of one dataset directory (velodyne/, calib/, image_2/,
/// label_2/).
struct DatasetLayout {
  std::filesystem::path data_dir;

  std::filesystem::path velodyne(std::string_view id) const;
  std::filesystem::path calib(std::string_view id) const;
  std::filesystem::path image(std::string_view id) const;
  std::filesystem::path label(std::string_view id) const;

  /// Uses root/training when it exists, else root itself.
  static DatasetLayout for_root(const std::filesystem::path& root);
  /// Where a dataset rooted at `root` keeps its frames when written.
  static DatasetLayout for_output(const std::filesystem::path& root);
};

struct DatasetIndex {
  std::filesystem::path root;
  DatasetLayout layout;
  std::vector<std::string> train_ids;
  std::vector<std::string> valid_ids;
};

inline constexpr std::string_view kStandardSplit = "standard";

/// Reads train.txt / val.txt. `split_spec` is a directory holding those two
/// files, or "standard" for root/ImageSets.
DatasetIndex split_dataset(const std::filesystem::path& root,
                           std::string_view split_spec = kStandardSplit);

/// Frame ids listed one per line (blank lines ignored).
std::vector<std::string> read_id_list(const std::filesystem::path& path);
std::string format_id_list(std::span<const std::string> ids);

FrameBundle load_frame(const DatasetLayout& layout, std::string_view frame_id);
FrameBundle load_frame(const DatasetIndex& index, std::string_view frame_id);

/// Writes every frame under out_root/training/{velodyne,calib,image_2,label_2}.
void write_frame(const FrameBundle& frame, const DatasetLayout& layout);
void write_dataset(std::span<const FrameBundle> frames,
                   const std::filesystem::path& out_root, unsigned jobs = 1);

/// Writes out_root/ImageSets/{train,val}.txt.
void write_split(const std::filesystem::path& out_root,
                 std::span<const std::string> train_ids,
                 std::span<const std::string> valid_ids);

}  // namespace badfusion
