#include "badfusion/manifest.hpp"

#include "badfusion/error.hpp"
#include "badfusion/file_util.hpp"
#include "json_convert.hpp"

#ifndef BADFUSION_VERSION
#define BADFUSION_VERSION "0.0.0"
#endif

using nlohmann::ordered_json;
using nlohmann::json;

namespace badfusion {

std::string_view toolkit_version() noexcept { return BADFUSION_VERSION; }

std::size_t PoisonManifest::vehicle_count() const noexcept {
  std::size_t n = 0;
  for (const auto& f : frames) n += f.vehicles.size();
  return n;
}

namespace {

[[noreturn]] void schema_error(const std::string& what) {
  throw Error(ErrorKind::SchemaError, std::string(kManifestSchema) + ": " + what);
}

ordered_json region_to_json(const DenseRegion& r) {
  return {{"x", r.x}, {"y", r.y}, {"w", r.w}, {"h", r.h}, {"point_count", r.point_count}};
}

template <typename T>
T field(const json& obj, const char* key, const std::string& where) {
  const auto it = obj.find(key);
  if (it == obj.end()) schema_error(where + ": missing '" + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    schema_error(where + ": '" + key + "' has the wrong type");
  }
}

}  // namespace

std::string format_manifest(const PoisonManifest& m) {
  ordered_json frames = ordered_json::array();
  for (const auto& f : m.frames) {
    ordered_json vehicles = ordered_json::array();
    for (const auto& v : f.vehicles) {
      vehicles.push_back({
          {"vehicle_index", v.vehicle_index},
          {"source", to_string(v.placement.source)},
          {"region", region_to_json(v.placement.region)},
          {"effective_pixel_count", v.effective_pixel_count},
          {"original_label", v.original_label},
          {"transformed_label", v.transformed_label},
      });
    }
    frames.push_back({{"frame_id", f.frame_id}, {"vehicles", std::move(vehicles)}});
  }
  ordered_json skipped = ordered_json::array();
  for (const auto& s : m.skipped) {
    ordered_json rec = {{"frame_id", s.frame_id}};
    if (s.vehicle_index) rec["vehicle_index"] = *s.vehicle_index;
    rec["reason"] = s.reason;
    if (!s.replacement.empty()) rec["replacement"] = s.replacement;
    skipped.push_back(std::move(rec));
  }
  ordered_json doc = {
      {"schema", kManifestSchema},
      {"toolkit_version", m.toolkit_version},
      {"config", ordered_json::parse(detail::to_json(m.config).dump())},
      {"totals",
       {{"split_frames", m.totals.split_frames},
        {"poisoned_frames", m.totals.poisoned_frames},
        {"clean_frames", m.totals.clean_frames},
        {"poisoned_vehicles", m.totals.poisoned_vehicles},
        {"skipped", m.totals.skipped}}},
      {"frames", std::move(frames)},
      {"skipped", std::move(skipped)},
  };
  return doc.dump(2) + "\n";
}

PoisonManifest parse_manifest(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    schema_error(std::string("not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) schema_error("document must be an object");
  if (field<std::string>(doc, "schema", "manifest") != kManifestSchema) {
    schema_error("wrong schema tag");
  }

  PoisonManifest m;
  m.toolkit_version = field<std::string>(doc, "toolkit_version", "manifest");
  try {
    m.config = detail::poison_config_from_json(field<json>(doc, "config", "manifest"));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::SchemaError) throw;
    schema_error("config: " + std::string(e.what()));
  }

  const auto totals = field<json>(doc, "totals", "manifest");
  m.totals.split_frames = field<std::size_t>(totals, "split_frames", "totals");
  m.totals.poisoned_frames = field<std::size_t>(totals, "poisoned_frames", "totals");
  m.totals.clean_frames = field<std::size_t>(totals, "clean_frames", "totals");
  m.totals.poisoned_vehicles = field<std::size_t>(totals, "poisoned_vehicles", "totals");
  m.totals.skipped = field<std::size_t>(totals, "skipped", "totals");

  const auto frames = field<json>(doc, "frames", "manifest");
  if (!frames.is_array()) schema_error("'frames' must be an array");
  for (const auto& f : frames) {
    FrameRecord fr;
    fr.frame_id = field<std::string>(f, "frame_id", "frame");
    const auto vehicles = field<json>(f, "vehicles", "frame " + fr.frame_id);
    if (!vehicles.is_array()) schema_error("frame " + fr.frame_id + ": 'vehicles' must be an array");
    for (const auto& v : vehicles) {
      const std::string where = "frame " + fr.frame_id;
      VehicleRecord vr;
      vr.vehicle_index = field<std::size_t>(v, "vehicle_index", where);
      const auto src = placement_source_from_string(field<std::string>(v, "source", where));
      if (!src) schema_error(where + ": unknown placement source");
      const auto region = field<json>(v, "region", where);
      vr.placement.frame_id = fr.frame_id;
      vr.placement.vehicle_index = vr.vehicle_index;
      vr.placement.source = *src;
      vr.placement.region = {field<double>(region, "x", where), field<double>(region, "y", where),
                             field<int>(region, "w", where), field<int>(region, "h", where),
                             field<std::size_t>(region, "point_count", where)};
      vr.effective_pixel_count = field<std::size_t>(v, "effective_pixel_count", where);
      vr.original_label = field<std::string>(v, "original_label", where);
      vr.transformed_label = field<std::string>(v, "transformed_label", where);
      fr.vehicles.push_back(std::move(vr));
    }
    m.frames.push_back(std::move(fr));
  }

  const auto skipped = field<json>(doc, "skipped", "manifest");
  if (!skipped.is_array()) schema_error("'skipped' must be an array");
  for (const auto& s : skipped) {
    SkipRecord sr;
    sr.frame_id = field<std::string>(s, "frame_id", "skipped");
    if (s.contains("vehicle_index")) sr.vehicle_index = field<std::size_t>(s, "vehicle_index", "skipped");
    sr.reason = field<std::string>(s, "reason", "skipped");
    if (s.contains("replacement")) sr.replacement = field<std::string>(s, "replacement", "skipped");
    m.skipped.push_back(std::move(sr));
  }
  return m;
}

PoisonManifest read_manifest(const std::filesystem::path& path) {
  if (!std::filesystem::is_regular_file(path)) {
    throw Error(ErrorKind::IoError, "manifest not found: " + path.string());
  }
  return parse_manifest(read_text(path));
}

void write_manifest(const PoisonManifest& manifest, const std::filesystem::path& path) {
  write_text(path, format_manifest(manifest));
}

}  // namespace badfusion
