#include "badfusion/poisoning.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <tuple>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "badfusion/error.hpp"
#include "badfusion/file_util.hpp"
#include "badfusion/parallel.hpp"

namespace fs = std::filesystem;

namespace badfusion {

ObjectLabel transform_label(const ObjectLabel& label, const AttackGoal& goal) {
  ObjectLabel out = label;
  switch (goal.kind) {
    case GoalKind::Resizing:
      out.dims.h *= goal.resize_factor;
      out.dims.w *= goal.resize_factor;
      out.dims.l *= goal.resize_factor;
      break;
    case GoalKind::DisappearFarther:
      out.loc.x *= 2.0;
      out.loc.z *= 2.0;
      break;
    case GoalKind::DisappearCloser:
      out.loc.x *= 0.5;
      out.loc.z *= 0.5;
      break;
  }
  return out;
}

std::size_t effective_pixels_for(const ProjectedCloud& frame_projection, const FrameBundle& frame,
                                 const TriggerPlacement& placement) {
  const auto points = vehicle_points(frame_projection, frame, placement.vehicle_index);
  return pixels_in_rect(points, centered_rect(pixel_rect(placement.region))).size();
}

std::size_t effective_pixels_for(const FrameBundle& frame, const TriggerPlacement& placement) {
  return effective_pixels_for(project_frame(frame), frame, placement);
}

namespace {

std::vector<std::string> nonblank_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t\r\f\v") != std::string_view::npos) lines.emplace_back(line);
    start = end + 1;
  }
  return lines;
}

struct FramePlan {
  std::string frame_id;
  std::vector<VehicleRecord> vehicles;
  std::vector<SkipRecord> vehicle_skips;
};

bool eligible_difficulty(Difficulty d, PoisonPhase phase) {
  if (phase == PoisonPhase::Inference) return d == Difficulty::Easy;
  return d == Difficulty::Easy || d == Difficulty::Moderate;
}

FramePlan plan_frame(const DatasetIndex& index, const std::string& frame_id,
                     const PoisonConfig& config, const DensePredictionFile* predictions) {
  const FrameBundle frame = load_frame(index, frame_id);
  const auto lines = nonblank_lines(read_text(index.layout.label(frame_id)));
  const auto projection = project_frame(frame);

  FramePlan plan{frame_id, {}, {}};
  for (std::size_t i = 0; i < frame.labels.size(); ++i) {
    const auto& label = frame.labels[i];
    if (label.object_class != ObjectClass::Car) continue;
    if (!eligible_difficulty(classify_difficulty(label), config.phase)) continue;

    const auto points = points_on_vehicle(projection, label);
    if (points.entries.empty()) {
      plan.vehicle_skips.push_back({frame_id, i, "no projected LiDAR points on vehicle", ""});
      continue;
    }
    TriggerPlacement placement;
    if (config.placement_source == PlacementSource::LidarAware) {
      placement = place_lidar_aware(projection, frame, config.trigger, i, config.stride);
    } else {
      placement = place_lidar_free(frame_id, i, *predictions, image_size(frame.image));
      if (placement.region.w != config.trigger.width || placement.region.h != config.trigger.height) {
        throw Error(ErrorKind::InvalidArgument, "predicted region size for frame " + frame_id +
                                                    " differs from the trigger size");
      }
    }
    if (config.phase == PoisonPhase::Inference && !overlap_safe(placement, frame.labels)) {
      plan.vehicle_skips.push_back({frame_id, i, "trigger would overlap another car", ""});
      continue;
    }

    VehicleRecord rec;
    rec.vehicle_index = i;
    rec.placement = placement;
    rec.effective_pixel_count =
        pixels_in_rect(points, centered_rect(pixel_rect(placement.region))).size();
    rec.original_label = lines.at(i);
    rec.transformed_label = config.phase == PoisonPhase::Train
                                ? format_label(transform_label(label, config.goal))
                                : lines.at(i);
    plan.vehicles.push_back(std::move(rec));
  }
  return plan;
}

std::size_t best_count(const FramePlan& plan) {
  std::size_t best = 0;
  for (const auto& v : plan.vehicles) best = std::max(best, v.effective_pixel_count);
  return best;
}

}  // namespace

PoisonManifest plan_poisoning(const DatasetIndex& index, const PoisonConfig& config, unsigned jobs) {
  validate(config);
  const auto& ids = config.phase == PoisonPhase::Train ? index.train_ids : index.valid_ids;

  DensePredictionFile predictions;
  if (config.placement_source == PlacementSource::Predicted) {
    if (!config.predictions) {
      throw Error(ErrorKind::MissingPrediction, "placement_source is Predicted but no predictions file is configured");
    }
    predictions = read_dense_predictions(*config.predictions);
  }

  std::vector<FramePlan> plans(ids.size());
  parallel_for(ids.size(), jobs, [&](std::size_t i) {
    plans[i] = plan_frame(index, ids[i], config, &predictions);
  });

  PoisonManifest manifest;
  manifest.toolkit_version = std::string(toolkit_version());
  manifest.config = config;

  std::set<std::string> selected;
  std::vector<SkipRecord> frame_skips;
  static constexpr const char* kNoVehicle = "no Easy/Moderate car with projected LiDAR points";

  if (config.phase == PoisonPhase::Inference) {
    for (const auto& p : plans) {
      if (!p.vehicles.empty()) selected.insert(p.frame_id);
    }
  } else {
    const std::size_t n = poison_frame_count(config.poison_rate, ids.size());
    std::vector<SelectionCandidate> all, eligible;
    std::unordered_set<std::string> ineligible;
    for (const auto& p : plans) {
      all.push_back({p.frame_id, best_count(p)});
      if (p.vehicles.empty()) {
        ineligible.insert(p.frame_id);
      } else {
        eligible.push_back(all.back());
      }
    }
    // Select as if every frame were usable, then swap out the unusable ones
    // for the frames a selection restricted to usable frames adds.
    const auto initial = select_poison_frames(all, config, n);
    std::vector<std::string> dropped;
    for (const auto& id : initial) {
      if (ineligible.count(id)) dropped.push_back(id);
    }
    std::vector<std::string> final_ids = initial;
    std::vector<std::string> replacements;
    if (!dropped.empty()) {
      final_ids = select_poison_frames(eligible, config, n);
      const std::set<std::string> before(initial.begin(), initial.end());
      for (const auto& id : final_ids) {
        if (!before.count(id)) replacements.push_back(id);
      }
    }
    selected.insert(final_ids.begin(), final_ids.end());

    std::map<std::string, std::string> replacement_of;
    for (std::size_t k = 0; k < dropped.size() && k < replacements.size(); ++k) {
      replacement_of[dropped[k]] = replacements[k];
    }
    for (const auto& p : plans) {
      if (!p.vehicles.empty()) continue;
      const auto it = replacement_of.find(p.frame_id);
      frame_skips.push_back({p.frame_id, std::nullopt, kNoVehicle,
                             it == replacement_of.end() ? "" : it->second});
    }
  }

  for (const auto& p : plans) {
    if (!selected.count(p.frame_id)) continue;
    manifest.frames.push_back({p.frame_id, p.vehicles});
    manifest.skipped.insert(manifest.skipped.end(), p.vehicle_skips.begin(), p.vehicle_skips.end());
  }
  manifest.skipped.insert(manifest.skipped.end(), frame_skips.begin(), frame_skips.end());
  std::stable_sort(manifest.frames.begin(), manifest.frames.end(),
                   [](const auto& a, const auto& b) { return a.frame_id < b.frame_id; });
  std::stable_sort(manifest.skipped.begin(), manifest.skipped.end(), [](const auto& a, const auto& b) {
    return std::tie(a.frame_id, a.vehicle_index) < std::tie(b.frame_id, b.vehicle_index);
  });

  manifest.totals.split_frames = ids.size();
  manifest.totals.poisoned_frames = manifest.frames.size();
  manifest.totals.clean_frames = ids.size() - manifest.frames.size();
  manifest.totals.poisoned_vehicles = manifest.vehicle_count();
  manifest.totals.skipped = manifest.skipped.size();
  return manifest;
}

std::string rewrite_label_lines(std::string_view original,
                                const std::vector<std::pair<std::size_t, std::string>>& replacements) {
  std::map<std::size_t, std::string_view> by_index;
  for (const auto& [i, line] : replacements) by_index[i] = line;

  std::string out;
  out.reserve(original.size() + 64);
  std::size_t label_index = 0;
  std::size_t start = 0;
  std::size_t used = 0;
  while (start < original.size()) {
    auto end = original.find('\n', start);
    const bool has_newline = end != std::string_view::npos;
    if (!has_newline) end = original.size();
    std::string_view line = original.substr(start, end - start);
    std::string_view cr;
    if (!line.empty() && line.back() == '\r') {
      line.remove_suffix(1);
      cr = "\r";
    }
    if (line.find_first_not_of(" \t\r\f\v") != std::string_view::npos) {
      if (const auto it = by_index.find(label_index); it != by_index.end()) {
        line = it->second;
        ++used;
      }
      ++label_index;
    }
    out += line;
    out += cr;
    if (has_newline) out += '\n';
    start = end + 1;
  }
  if (used != by_index.size()) {
    throw Error(ErrorKind::InvalidArgument, "label replacement index out of range");
  }
  return out;
}

void materialize_manifest(const DatasetIndex& index, const PoisonManifest& manifest,
                          const fs::path& out_root, unsigned jobs) {
  const auto out = DatasetLayout::for_output(out_root);
  for (const char* sub : {"velodyne", "calib", "image_2", "label_2"}) ensure_directory(out.data_dir / sub);

  std::vector<std::string> ids = index.train_ids;
  ids.insert(ids.end(), index.valid_ids.begin(), index.valid_ids.end());
  const std::unordered_set<std::string> known(ids.begin(), ids.end());

  std::unordered_map<std::string, const FrameRecord*> poisoned;
  for (const auto& f : manifest.frames) {
    if (!known.count(f.frame_id)) {
      throw Error(ErrorKind::FrameMismatch, "manifest frame " + f.frame_id + " is not in the dataset split");
    }
    poisoned[f.frame_id] = &f;
  }

  const auto& in = index.layout;
  const auto& trigger = manifest.config.trigger;
  parallel_for(ids.size(), jobs, [&](std::size_t i) {
    const auto& id = ids[i];
    for (const auto& p : {in.velodyne(id), in.calib(id), in.image(id), in.label(id)}) {
      if (!fs::is_regular_file(p)) throw Error(ErrorKind::MissingArtifact, p.string());
    }
    copy_file_exact(in.velodyne(id), out.velodyne(id));
    copy_file_exact(in.calib(id), out.calib(id));

    const auto it = poisoned.find(id);
    if (it == poisoned.end()) {
      copy_file_exact(in.image(id), out.image(id));
      copy_file_exact(in.label(id), out.label(id));
      return;
    }
    CameraImage image = read_png(in.image(id));
    std::vector<std::pair<std::size_t, std::string>> relabel;
    for (const auto& v : it->second->vehicles) {
      composite_trigger_in_place(image, trigger, v.placement.region);
      relabel.emplace_back(v.vehicle_index, v.transformed_label);
    }
    write_png(image, out.image(id));
    write_text(out.label(id), rewrite_label_lines(read_text(in.label(id)), relabel));
  });

  write_split(out_root, index.train_ids, index.valid_ids);
}

PoisonManifest poison_dataset(const DatasetIndex& index, const PoisonConfig& config,
                              const fs::path& out_root, unsigned jobs) {
  auto manifest = plan_poisoning(index, config, jobs);
  ensure_directory(out_root);
  materialize_manifest(index, manifest, out_root, jobs);
  write_manifest(manifest, out_root / kManifestFileName);
  return manifest;
}

// ---------------------------------------------------------------------------
// Dense-region training set
// ---------------------------------------------------------------------------

DenseExportSummary export_dense_region_dataset(const DatasetIndex& index, int trigger_width,
                                               int trigger_height, const fs::path& out_dir,
                                               ExportSplit split, int stride, unsigned jobs) {
  if (trigger_width < 1 || trigger_height < 1) {
    throw Error(ErrorKind::InvalidArgument, "trigger size must be at least 1x1");
  }
  std::vector<std::pair<std::string, const char*>> ids;
  if (split != ExportSplit::Valid) {
    for (const auto& id : index.train_ids) ids.emplace_back(id, "train");
  }
  if (split != ExportSplit::Train) {
    for (const auto& id : index.valid_ids) ids.emplace_back(id, "val");
  }

  struct FrameExport {
    std::vector<RegionPrediction> records;
    std::size_t skipped = 0;
    int width = 0;
    int height = 0;
  };
  std::vector<FrameExport> results(ids.size());
  parallel_for(ids.size(), jobs, [&](std::size_t i) {
    const auto frame = load_frame(index, ids[i].first);
    const auto projection = project_frame(frame);
    auto& r = results[i];
    r.width = frame.image.width;
    r.height = frame.image.height;
    for (std::size_t v = 0; v < frame.labels.size(); ++v) {
      const auto& label = frame.labels[v];
      if (label.object_class != ObjectClass::Car) continue;
      const auto points = points_on_vehicle(projection, label);
      if (points.entries.empty()) {
        ++r.skipped;
        continue;
      }
      const auto region = find_densest_region(points, label.bbox, trigger_width, trigger_height,
                                              stride, image_size(frame.image));
      r.records.push_back({v, region.x, region.y, region.w, region.h, 1.0, region.point_count});
    }
  });

  DensePredictionFile annotations;
  annotations.trigger_size = {trigger_width, trigger_height};
  nlohmann::ordered_json images = nlohmann::ordered_json::array();
  DenseExportSummary summary;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    annotations.frames[ids[i].first] = results[i].records;
    summary.records += results[i].records.size();
    summary.skipped_vehicles += results[i].skipped;
    images.push_back({{"frame_id", ids[i].first},
                      {"path", fs::absolute(index.layout.image(ids[i].first)).lexically_normal().generic_string()},
                      {"width", results[i].width},
                      {"height", results[i].height},
                      {"split", ids[i].second}});
  }
  summary.frames = ids.size();

  ensure_directory(out_dir);
  write_dense_predictions(annotations, out_dir / "annotations.json");
  nlohmann::ordered_json doc = {{"schema", kDenseImagesSchema},
                                {"trigger_size", {{"w", trigger_width}, {"h", trigger_height}}},
                                {"images", std::move(images)}};
  write_text(out_dir / "images.json", doc.dump(2) + "\n");
  return summary;
}

}  // namespace badfusion
