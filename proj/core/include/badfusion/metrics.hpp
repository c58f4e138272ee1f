#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "badfusion/attack_config.hpp"
#include "badfusion/error.hpp"
#include "badfusion/kitti_io.hpp"
#include "badfusion/manifest.hpp"

namespace badfusion {

// ---------------------------------------------------------------------------
// Box overlap
// ---------------------------------------------------------------------------

/// Bird's-eye-view footprint: center (x, z) in the camera ground plane,
/// width w and length l (meters), yaw = rotation about the camera y axis.
struct BevBox {
  double x = 0.0;
  double z = 0.0;
  double w = 0.0;
  double l = 0.0;
  double yaw = 0.0;
};

/// Camera-frame 3D box; (x, y, z) is the bottom center, y points down, so the
/// box spans [y - h, y] vertically.
struct Box3D {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double h = 0.0;
  double w = 0.0;
  double l = 0.0;
  double yaw = 0.0;

  BevBox bev() const noexcept { return {x, z, w, l, yaw}; }
  double volume() const noexcept { return h * w * l; }
};

Box3D box_from_label(const ObjectLabel& label) noexcept;

/// Footprint corners, counter-clockwise in (x, z).
std::vector<std::pair<double, double>> bev_corners(const BevBox& box);

/// Area of the intersection of two convex polygons (Sutherland-Hodgman).
double convex_intersection_area(std::span<const std::pair<double, double>> a,
                                std::span<const std::pair<double, double>> b);

/// Rotated-rectangle IoU. Zero-area boxes give 0.
double iou_bev(const BevBox& a, const BevBox& b);
double iou_3d(const Box3D& a, const Box3D& b);

// ---------------------------------------------------------------------------
// Average precision
// ---------------------------------------------------------------------------

struct Detection3D {
  std::string frame_id;
  ObjectLabel box;
  double score = 0.0;
};

struct GroundTruthBox {
  std::string frame_id;
  ObjectLabel box;
};

enum class ApInterpolation { Point11, Point40 };
enum class IouKind { Box3D, Bev };

std::string_view to_string(ApInterpolation i) noexcept;

struct ApOptions {
  double iou_threshold = 0.7;
  ApInterpolation interpolation = ApInterpolation::Point40;
  IouKind iou = IouKind::Box3D;
};

double box_iou(const ObjectLabel& a, const ObjectLabel& b, IouKind kind);

/// Interpolated AP in percent. Detections are ranked by (score desc,
/// frame id, input order); each is greedily matched to the unmatched ground
/// truth of its frame with the highest IoU >= threshold. Unmatched
/// detections overlapping an `ignored` box are dropped instead of counted
/// as false positives. No ground truth: 100 without detections, else 0.
double average_precision(std::span<const Detection3D> detections,
                         std::span<const GroundTruthBox> ground_truth, const ApOptions& options = {},
                         std::span<const GroundTruthBox> ignored = {});

/// Interpolated precision from raw (recall, precision) points, percent.
double interpolated_ap(std::span<const double> recall, std::span<const double> precision,
                       ApInterpolation interpolation);

// ---------------------------------------------------------------------------
// Attack success
// ---------------------------------------------------------------------------

struct AttackedVehicle {
  std::string frame_id;
  std::size_t vehicle_index = 0;
  ObjectLabel ground_truth;  // the original, unpoisoned label
};

struct VehicleOutcome {
  std::string frame_id;
  std::size_t vehicle_index = 0;
  bool success = false;
  double best_iou = 0.0;
  std::optional<double> volume_ratio;  // matched detection / ground truth
};

struct AsrResult {
  double asr = 0.0;  // percent
  std::vector<VehicleOutcome> vehicles;
};

/// Success iff the best BEV match (IoU >= match_iou) has volume <=
/// shrink_ratio x ground truth, or nothing matches at all.
AsrResult asr_resizing(std::span<const AttackedVehicle> attacked,
                       std::span<const Detection3D> detections, double match_iou = 0.1,
                       double shrink_ratio = 0.5);

/// Success iff no detection with score >= score_threshold reaches 3D IoU
/// >= iou_threshold with the ground truth.
AsrResult asr_disappear(std::span<const AttackedVehicle> attacked,
                        std::span<const Detection3D> detections, double iou_threshold = 0.5,
                        double score_threshold = 0.3);

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

/// Labels (or detections, with scores) keyed by frame id.
using FrameLabels = std::map<std::string, std::vector<ObjectLabel>>;

/// Reads <dir>/<id>.txt for each id. Missing files raise `missing_kind`.
FrameLabels load_label_dir(const std::filesystem::path& dir, std::span<const std::string> frame_ids,
                           ErrorKind missing_kind = ErrorKind::FrameMismatch);

std::vector<Detection3D> detections_from(const FrameLabels& results);

struct EvalOptions {
  ApOptions ap;
  double match_iou = 0.1;
  double shrink_ratio = 0.5;
  double disappear_iou = 0.5;
  double score_threshold = 0.3;
};

struct EvalReport {
  GoalKind goal = GoalKind::Resizing;
  EvalOptions options;
  double clean_map = 0.0;
  double poisoned_map = 0.0;
  double asr = 0.0;
  std::size_t clean_frames = 0;
  std::size_t poisoned_frames = 0;
  std::size_t clean_ground_truth = 0;
  std::size_t poisoned_ground_truth = 0;
  std::vector<VehicleOutcome> vehicles;
};

/// clean_map: AP of clean results over the Easy cars of every ground-truth
/// frame. poisoned_map: AP of poisoned results over the Easy cars of the
/// manifest's frames, scored against the original labels. asr: per the goal,
/// over the manifest's attacked vehicles. Non-Easy cars and vans are
/// "don't care" for AP. Throws FrameMismatch / NoAttackedVehicles.
EvalReport evaluate(const FrameLabels& clean_results, const FrameLabels& poisoned_results,
                    const FrameLabels& clean_ground_truth, const PoisonManifest& manifest,
                    GoalKind goal, const EvalOptions& options = {});

inline constexpr std::string_view kEvalReportSchema = "badfusion-eval/v1";

std::string format_eval_report(const EvalReport& report);  // JSON
std::string format_eval_table(const EvalReport& report);   // human-readable

}  // namespace badfusion
