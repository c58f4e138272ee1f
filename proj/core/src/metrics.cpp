#include "badfusion/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>
#include <tuple>
#include <unordered_map>

#include <json.hpp>

#include "badfusion/file_util.hpp"

namespace badfusion {

using Point2 = std::pair<double, double>;

// ---------------------------------------------------------------------------
// Box overlap
// ---------------------------------------------------------------------------

Box3D box_from_label(const ObjectLabel& l) noexcept {
  return {l.loc.x, l.loc.y, l.loc.z, l.dims.h, l.dims.w, l.dims.l, l.rotation_y};
}

std::vector<Point2> bev_corners(const BevBox& box) {
  // Length runs along the heading, width across it. Rotation about camera y
  // maps the local (dx, dz) to (cos*dx + sin*dz, -sin*dx + cos*dz).
  const double c = std::cos(box.yaw), s = std::sin(box.yaw);
  const double hl = box.l / 2.0, hw = box.w / 2.0;
  const Point2 local[4] = {{hl, hw}, {-hl, hw}, {-hl, -hw}, {hl, -hw}};
  std::vector<Point2> out;
  out.reserve(4);
  for (const auto& [dx, dz] : local) {
    out.emplace_back(box.x + c * dx + s * dz, box.z - s * dx + c * dz);
  }
  return out;
}

namespace {

double signed_area(std::span<const Point2> poly) {
  double a = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const auto& p = poly[i];
    const auto& q = poly[(i + 1) % poly.size()];
    a += p.first * q.second - q.first * p.second;
  }
  return a / 2.0;
}

std::vector<Point2> counter_clockwise(std::span<const Point2> poly) {
  std::vector<Point2> out(poly.begin(), poly.end());
  if (signed_area(out) < 0) std::reverse(out.begin(), out.end());
  return out;
}

double cross(const Point2& a, const Point2& b, const Point2& p) {
  return (b.first - a.first) * (p.second - a.second) - (b.second - a.second) * (p.first - a.first);
}

Point2 line_intersection(const Point2& p, const Point2& q, const Point2& a, const Point2& b) {
  const double cp = cross(a, b, p);
  const double cq = cross(a, b, q);
  const double t = cp / (cp - cq);
  return {p.first + t * (q.first - p.first), p.second + t * (q.second - p.second)};
}

}  // namespace

double convex_intersection_area(std::span<const Point2> a_in, std::span<const Point2> b_in) {
  if (a_in.size() < 3 || b_in.size() < 3) return 0.0;
  auto subject = counter_clockwise(a_in);
  const auto clip = counter_clockwise(b_in);
  if (std::abs(signed_area(subject)) == 0.0 || std::abs(signed_area(clip)) == 0.0) return 0.0;

  for (std::size_t e = 0; e < clip.size() && !subject.empty(); ++e) {
    const Point2& a = clip[e];
    const Point2& b = clip[(e + 1) % clip.size()];
    std::vector<Point2> next;
    next.reserve(subject.size() + 2);
    for (std::size_t i = 0; i < subject.size(); ++i) {
      const Point2& p = subject[i];
      const Point2& q = subject[(i + 1) % subject.size()];
      const bool p_in = cross(a, b, p) >= 0.0;
      const bool q_in = cross(a, b, q) >= 0.0;
      if (p_in) next.push_back(p);
      if (p_in != q_in) next.push_back(line_intersection(p, q, a, b));
    }
    subject = std::move(next);
  }
  if (subject.size() < 3) return 0.0;
  return std::max(0.0, signed_area(subject));
}

double iou_bev(const BevBox& a, const BevBox& b) {
  const double area_a = a.w * a.l;
  const double area_b = b.w * b.l;
  if (!(area_a > 0.0) || !(area_b > 0.0)) return 0.0;
  const auto ca = bev_corners(a);
  const auto cb = bev_corners(b);
  const double inter = convex_intersection_area(ca, cb);
  const double uni = area_a + area_b - inter;
  if (!(uni > 0.0)) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double iou_3d(const Box3D& a, const Box3D& b) {
  const double vol_a = a.volume();
  const double vol_b = b.volume();
  if (!(vol_a > 0.0) || !(vol_b > 0.0)) return 0.0;
  const double top = std::max(a.y - a.h, b.y - b.h);
  const double bottom = std::min(a.y, b.y);
  const double vertical = bottom - top;
  if (vertical <= 0.0) return 0.0;
  const auto ca = bev_corners(a.bev());
  const auto cb = bev_corners(b.bev());
  const double inter = convex_intersection_area(ca, cb) * vertical;
  const double uni = vol_a + vol_b - inter;
  if (!(uni > 0.0)) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double box_iou(const ObjectLabel& a, const ObjectLabel& b, IouKind kind) {
  const auto ba = box_from_label(a);
  const auto bb = box_from_label(b);
  return kind == IouKind::Box3D ? iou_3d(ba, bb) : iou_bev(ba.bev(), bb.bev());
}

// ---------------------------------------------------------------------------
// Average precision
// ---------------------------------------------------------------------------

std::string_view to_string(ApInterpolation i) noexcept {
  return i == ApInterpolation::Point11 ? "11-point" : "40-point";
}

double interpolated_ap(std::span<const double> recall, std::span<const double> precision,
                       ApInterpolation interpolation) {
  std::vector<double> grid;
  if (interpolation == ApInterpolation::Point40) {
    for (int k = 1; k <= 40; ++k) grid.push_back(k / 40.0);
  } else {
    for (int k = 0; k <= 10; ++k) grid.push_back(k / 10.0);
  }
  double sum = 0.0;
  for (double r : grid) {
    double best = 0.0;
    for (std::size_t i = 0; i < recall.size(); ++i) {
      if (recall[i] >= r - 1e-12) best = std::max(best, precision[i]);
    }
    sum += best;
  }
  return 100.0 * sum / static_cast<double>(grid.size());
}

double average_precision(std::span<const Detection3D> detections,
                         std::span<const GroundTruthBox> ground_truth, const ApOptions& options,
                         std::span<const GroundTruthBox> ignored) {
  std::unordered_map<std::string, std::vector<std::size_t>> gt_by_frame, ignored_by_frame;
  for (std::size_t i = 0; i < ground_truth.size(); ++i) gt_by_frame[ground_truth[i].frame_id].push_back(i);
  for (std::size_t i = 0; i < ignored.size(); ++i) ignored_by_frame[ignored[i].frame_id].push_back(i);

  std::vector<std::size_t> order(detections.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& da = detections[a];
    const auto& db = detections[b];
    if (da.score != db.score) return da.score > db.score;
    return da.frame_id < db.frame_id;
  });

  std::vector<bool> matched(ground_truth.size(), false);
  std::vector<double> recall, precision;
  std::size_t tp = 0, fp = 0;
  for (std::size_t k : order) {
    const auto& det = detections[k];
    double best_iou = -1.0;
    std::size_t best = ground_truth.size();
    if (const auto it = gt_by_frame.find(det.frame_id); it != gt_by_frame.end()) {
      for (std::size_t g : it->second) {
        if (matched[g]) continue;
        const double iou = box_iou(det.box, ground_truth[g].box, options.iou);
        if (iou >= options.iou_threshold && iou > best_iou) {
          best_iou = iou;
          best = g;
        }
      }
    }
    if (best != ground_truth.size()) {
      matched[best] = true;
      ++tp;
    } else {
      bool dont_care = false;
      if (const auto it = ignored_by_frame.find(det.frame_id); it != ignored_by_frame.end()) {
        for (std::size_t g : it->second) {
          if (box_iou(det.box, ignored[g].box, options.iou) >= options.iou_threshold) {
            dont_care = true;
            break;
          }
        }
      }
      if (dont_care) continue;
      ++fp;
    }
    if (!ground_truth.empty()) {
      recall.push_back(static_cast<double>(tp) / static_cast<double>(ground_truth.size()));
      precision.push_back(static_cast<double>(tp) / static_cast<double>(tp + fp));
    }
  }

  if (ground_truth.empty()) return fp == 0 ? 100.0 : 0.0;
  return interpolated_ap(recall, precision, options.interpolation);
}

// ---------------------------------------------------------------------------
// Attack success
// ---------------------------------------------------------------------------

namespace {

std::unordered_map<std::string, std::vector<const Detection3D*>> by_frame(
    std::span<const Detection3D> detections) {
  std::unordered_map<std::string, std::vector<const Detection3D*>> out;
  for (const auto& d : detections) {
    if (d.box.object_class == ObjectClass::Car) out[d.frame_id].push_back(&d);
  }
  return out;
}

double percent(std::size_t successes, std::size_t total) {
  return 100.0 * static_cast<double>(successes) / static_cast<double>(total);
}

}  // namespace

AsrResult asr_resizing(std::span<const AttackedVehicle> attacked,
                       std::span<const Detection3D> detections, double match_iou,
                       double shrink_ratio) {
  if (attacked.empty()) throw Error(ErrorKind::NoAttackedVehicles, "resizing ASR needs attacked vehicles");
  const auto frames = by_frame(detections);
  AsrResult result;
  std::size_t successes = 0;
  for (const auto& v : attacked) {
    VehicleOutcome out{v.frame_id, v.vehicle_index, false, 0.0, std::nullopt};
    const Box3D gt = box_from_label(v.ground_truth);
    const Detection3D* best = nullptr;
    if (const auto it = frames.find(v.frame_id); it != frames.end()) {
      for (const auto* d : it->second) {
        const double iou = iou_bev(gt.bev(), box_from_label(d->box).bev());
        if (iou >= match_iou && (!best || iou > out.best_iou)) {
          best = d;
          out.best_iou = iou;
        }
      }
    }
    if (!best) {
      out.success = true;
    } else {
      out.volume_ratio = box_from_label(best->box).volume() / gt.volume();
      out.success = *out.volume_ratio <= shrink_ratio;
    }
    successes += out.success ? 1 : 0;
    result.vehicles.push_back(std::move(out));
  }
  result.asr = percent(successes, attacked.size());
  return result;
}

AsrResult asr_disappear(std::span<const AttackedVehicle> attacked,
                        std::span<const Detection3D> detections, double iou_threshold,
                        double score_threshold) {
  if (attacked.empty()) throw Error(ErrorKind::NoAttackedVehicles, "disappear ASR needs attacked vehicles");
  const auto frames = by_frame(detections);
  AsrResult result;
  std::size_t successes = 0;
  for (const auto& v : attacked) {
    VehicleOutcome out{v.frame_id, v.vehicle_index, true, 0.0, std::nullopt};
    const Box3D gt = box_from_label(v.ground_truth);
    if (const auto it = frames.find(v.frame_id); it != frames.end()) {
      for (const auto* d : it->second) {
        if (d->score < score_threshold) continue;
        const double iou = iou_3d(gt, box_from_label(d->box));
        out.best_iou = std::max(out.best_iou, iou);
        if (iou >= iou_threshold) out.success = false;
      }
    }
    successes += out.success ? 1 : 0;
    result.vehicles.push_back(std::move(out));
  }
  result.asr = percent(successes, attacked.size());
  return result;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

FrameLabels load_label_dir(const std::filesystem::path& dir, std::span<const std::string> frame_ids,
                           ErrorKind missing_kind) {
  FrameLabels out;
  for (const auto& id : frame_ids) {
    const auto path = dir / (id + ".txt");
    if (!std::filesystem::is_regular_file(path)) {
      throw Error(missing_kind, "no file for frame " + id + " in " + dir.string());
    }
    out[id] = parse_labels(read_text(path));
  }
  return out;
}

std::vector<Detection3D> detections_from(const FrameLabels& results) {
  std::vector<Detection3D> out;
  for (const auto& [id, labels] : results) {
    for (const auto& l : labels) {
      if (l.object_class != ObjectClass::Car) continue;
      out.push_back({id, l, l.score.value_or(1.0)});
    }
  }
  return out;
}

namespace {

void split_ground_truth(const std::string& id, const std::vector<ObjectLabel>& labels,
                        std::vector<GroundTruthBox>& easy, std::vector<GroundTruthBox>& ignored) {
  for (const auto& l : labels) {
    if (l.object_class == ObjectClass::Car && classify_difficulty(l) == Difficulty::Easy) {
      easy.push_back({id, l});
    } else if (l.object_class == ObjectClass::Car || l.object_class == ObjectClass::Van) {
      ignored.push_back({id, l});
    }
  }
}

const std::vector<ObjectLabel>& require_frame(const FrameLabels& labels, const std::string& id,
                                              const char* what) {
  const auto it = labels.find(id);
  if (it == labels.end()) {
    throw Error(ErrorKind::FrameMismatch, std::string(what) + " has no entry for frame " + id);
  }
  return it->second;
}

}  // namespace

EvalReport evaluate(const FrameLabels& clean_results, const FrameLabels& poisoned_results,
                    const FrameLabels& clean_ground_truth, const PoisonManifest& manifest,
                    GoalKind goal, const EvalOptions& options) {
  EvalReport report;
  report.goal = goal;
  report.options = options;

  // Clean: every ground-truth frame.
  std::vector<GroundTruthBox> clean_easy, clean_ignored;
  FrameLabels clean_subset;
  for (const auto& [id, labels] : clean_ground_truth) {
    split_ground_truth(id, labels, clean_easy, clean_ignored);
    clean_subset[id] = require_frame(clean_results, id, "clean results");
  }
  report.clean_frames = clean_ground_truth.size();
  report.clean_ground_truth = clean_easy.size();
  const auto clean_dets = detections_from(clean_subset);
  report.clean_map = average_precision(clean_dets, clean_easy, options.ap, clean_ignored);

  // Poisoned: the triggered frames only, scored against the original labels.
  std::vector<GroundTruthBox> poisoned_easy, poisoned_ignored;
  FrameLabels poisoned_subset;
  std::vector<AttackedVehicle> attacked;
  for (const auto& f : manifest.frames) {
    const auto& gt = require_frame(clean_ground_truth, f.frame_id, "ground truth");
    split_ground_truth(f.frame_id, gt, poisoned_easy, poisoned_ignored);
    poisoned_subset[f.frame_id] = require_frame(poisoned_results, f.frame_id, "poisoned results");
    for (const auto& v : f.vehicles) {
      if (v.vehicle_index >= gt.size() || gt[v.vehicle_index].object_class != ObjectClass::Car) {
        throw Error(ErrorKind::FrameMismatch, "manifest vehicle " + std::to_string(v.vehicle_index) +
                                                  " of frame " + f.frame_id +
                                                  " is not a car in the ground truth");
      }
      attacked.push_back({f.frame_id, v.vehicle_index, gt[v.vehicle_index]});
    }
  }
  if (attacked.empty()) throw Error(ErrorKind::NoAttackedVehicles, "manifest lists no attacked vehicles");
  report.poisoned_frames = manifest.frames.size();
  report.poisoned_ground_truth = poisoned_easy.size();
  const auto poisoned_dets = detections_from(poisoned_subset);
  report.poisoned_map = average_precision(poisoned_dets, poisoned_easy, options.ap, poisoned_ignored);

  const auto asr = goal == GoalKind::Resizing
                       ? asr_resizing(attacked, poisoned_dets, options.match_iou, options.shrink_ratio)
                       : asr_disappear(attacked, poisoned_dets, options.disappear_iou,
                                       options.score_threshold);
  report.asr = asr.asr;
  report.vehicles = asr.vehicles;
  return report;
}

std::string format_eval_report(const EvalReport& r) {
  using nlohmann::ordered_json;
  ordered_json vehicles = ordered_json::array();
  for (const auto& v : r.vehicles) {
    ordered_json rec = {{"frame_id", v.frame_id},
                        {"vehicle_index", v.vehicle_index},
                        {"success", v.success},
                        {"best_iou", v.best_iou}};
    if (v.volume_ratio) rec["volume_ratio"] = *v.volume_ratio;
    vehicles.push_back(std::move(rec));
  }
  const bool resizing = r.goal == GoalKind::Resizing;
  const std::string rule =
      resizing ? "success iff the highest-BEV-IoU detection with IoU >= match_iou has volume <= "
                 "shrink_ratio x ground truth, or no detection matches"
               : "success iff no detection with score >= score_threshold has 3D IoU >= "
                 "disappear_iou with the ground truth";
  ordered_json doc = {
      {"schema", kEvalReportSchema},
      {"goal", to_string(r.goal)},
      {"clean_map", r.clean_map},
      {"poisoned_map", r.poisoned_map},
      {"asr", r.asr},
      {"config",
       {{"ap_iou_threshold", r.options.ap.iou_threshold},
        {"ap_interpolation", to_string(r.options.ap.interpolation)},
        {"ap_iou", r.options.ap.iou == IouKind::Box3D ? "3d" : "bev"},
        {"match_iou", r.options.match_iou},
        {"shrink_ratio", r.options.shrink_ratio},
        {"disappear_iou", r.options.disappear_iou},
        {"score_threshold", r.options.score_threshold}}},
      {"matching_rule", rule},
      {"counts",
       {{"clean_frames", r.clean_frames},
        {"poisoned_frames", r.poisoned_frames},
        {"clean_ground_truth", r.clean_ground_truth},
        {"poisoned_ground_truth", r.poisoned_ground_truth},
        {"attacked_vehicles", r.vehicles.size()}}},
      {"vehicles", std::move(vehicles)},
  };
  return doc.dump(2) + "\n";
}

std::string format_eval_table(const EvalReport& r) {
  char buf[1024];
  std::snprintf(buf, sizeof buf,
                "goal               %s\n"
                "AP                 %s, IoU >= %.2f (%s)\n"
                "clean mAP          %7.2f %%  (%zu frames, %zu easy cars)\n"
                "poisoned mAP       %7.2f %%  (%zu frames, %zu easy cars)\n"
                "ASR                %7.2f %%  (%zu attacked vehicles)\n",
                std::string(to_string(r.goal)).c_str(),
                std::string(to_string(r.options.ap.interpolation)).c_str(), r.options.ap.iou_threshold,
                r.options.ap.iou == IouKind::Box3D ? "3D" : "BEV", r.clean_map, r.clean_frames,
                r.clean_ground_truth, r.poisoned_map, r.poisoned_frames, r.poisoned_ground_truth,
                r.asr, r.vehicles.size());
  return buf;
}

}  // namespace badfusion
