#include "badfusion/dense_prediction.hpp"

#include <cmath>

#include <json.hpp>

#include "badfusion/error.hpp"
#include "badfusion/file_util.hpp"

using nlohmann::json;

namespace badfusion {
namespace {

[[noreturn]] void schema_error(const std::string& what) {
  throw Error(ErrorKind::SchemaError, std::string(kDensePredictionSchema) + ": " + what);
}

double number_field(const json& obj, const char* key, const std::string& where) {
  const auto it = obj.find(key);
  if (it == obj.end() || !it->is_number()) schema_error(where + ": '" + key + "' must be a number");
  const double v = it->get<double>();
  if (!std::isfinite(v)) schema_error(where + ": '" + key + "' is not finite");
  return v;
}

int positive_int_field(const json& obj, const char* key, const std::string& where) {
  const double v = number_field(obj, key, where);
  if (v != std::floor(v) || v < 1 || v > 1e6) {
    schema_error(where + ": '" + key + "' must be a positive integer");
  }
  return static_cast<int>(v);
}

std::size_t index_field(const json& obj, const char* key, const std::string& where) {
  const double v = number_field(obj, key, where);
  if (v != std::floor(v) || v < 0) schema_error(where + ": '" + key + "' must be a non-negative integer");
  return static_cast<std::size_t>(v);
}

}  // namespace

std::size_t DensePredictionFile::record_count() const noexcept {
  std::size_t n = 0;
  for (const auto& [id, records] : frames) n += records.size();
  return n;
}

DensePredictionFile parse_dense_predictions(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    schema_error(std::string("not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) schema_error("document must be an object");
  const auto schema = doc.find("schema");
  if (schema == doc.end() || !schema->is_string() || schema->get<std::string>() != kDensePredictionSchema) {
    schema_error("missing or wrong 'schema' tag");
  }

  DensePredictionFile file;
  if (const auto ts = doc.find("trigger_size"); ts != doc.end()) {
    if (!ts->is_object()) schema_error("'trigger_size' must be an object");
    file.trigger_size = {positive_int_field(*ts, "w", "trigger_size"),
                         positive_int_field(*ts, "h", "trigger_size")};
  }

  const auto frames = doc.find("frames");
  if (frames == doc.end() || !frames->is_object()) schema_error("'frames' must be an object");
  for (const auto& [frame_id, records] : frames->items()) {
    if (!records.is_array()) schema_error("frame " + frame_id + " must map to an array");
    auto& out = file.frames[frame_id];
    for (std::size_t i = 0; i < records.size(); ++i) {
      const auto& r = records[i];
      const std::string where = "frame " + frame_id + " record " + std::to_string(i);
      if (!r.is_object()) schema_error(where + " must be an object");
      RegionPrediction p;
      p.vehicle_index = index_field(r, "vehicle_index", where);
      p.x = number_field(r, "x", where);
      p.y = number_field(r, "y", where);
      p.w = positive_int_field(r, "w", where);
      p.h = positive_int_field(r, "h", where);
      p.score = number_field(r, "score", where);
      if (p.score < 0.0 || p.score > 1.0) schema_error(where + ": score outside [0, 1]");
      if (r.contains("point_count")) p.point_count = index_field(r, "point_count", where);
      if (file.trigger_size && (p.w != file.trigger_size->first || p.h != file.trigger_size->second)) {
        schema_error(where + ": (w, h) differs from trigger_size");
      }
      out.push_back(p);
    }
  }
  return file;
}

std::string format_dense_predictions(const DensePredictionFile& file) {
  json doc;
  doc["schema"] = kDensePredictionSchema;
  if (file.trigger_size) {
    doc["trigger_size"] = {{"w", file.trigger_size->first}, {"h", file.trigger_size->second}};
  }
  json frames = json::object();
  for (const auto& [frame_id, records] : file.frames) {
    json arr = json::array();
    for (const auto& p : records) {
      json r = {{"vehicle_index", p.vehicle_index}, {"x", p.x}, {"y", p.y},
                {"w", p.w}, {"h", p.h}, {"score", p.score}};
      if (p.point_count) r["point_count"] = *p.point_count;
      arr.push_back(std::move(r));
    }
    frames[frame_id] = std::move(arr);
  }
  doc["frames"] = std::move(frames);
  return doc.dump(2) + "\n";
}

DensePredictionFile read_dense_predictions(const std::filesystem::path& path) {
  if (!std::filesystem::is_regular_file(path)) {
    throw Error(ErrorKind::MissingPrediction, "prediction file not found: " + path.string());
  }
  return parse_dense_predictions(read_text(path));
}

void write_dense_predictions(const DensePredictionFile& file, const std::filesystem::path& path) {
  write_text(path, format_dense_predictions(file));
}

}  // namespace badfusion
