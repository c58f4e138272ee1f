#include "badfusion/kitti_io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <set>
#include <sstream>
#include <unordered_set>

#include <Eigen/Dense>

#include "badfusion/error.hpp"
#include "badfusion/file_util.hpp"
#include "badfusion/parallel.hpp"

namespace fs = std::filesystem;

namespace badfusion {
namespace {

std::uint32_t load_le32(const std::uint8_t* p) noexcept {
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

void store_le32(std::uint32_t v, std::uint8_t* p) noexcept {
  p[0] = static_cast<std::uint8_t>(v);
  p[1] = static_cast<std::uint8_t>(v >> 8);
  p[2] = static_cast<std::uint8_t>(v >> 16);
  p[3] = static_cast<std::uint8_t>(v >> 24);
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

std::vector<std::string_view> split_lines(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    auto end = s.find('\n', start);
    if (end == std::string_view::npos) end = s.size();
    auto line = s.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    out.push_back(line);
    start = end + 1;
  }
  return out;
}

double parse_double(std::string_view tok) {
  double v = 0.0;
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  if (!tok.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) {
    throw Error(ErrorKind::ParseError, "not a number: '" + std::string(tok) + "'");
  }
  return v;
}

int parse_int(std::string_view tok) {
  // Occlusion is written as an integer but some tools emit "0.00".
  const double v = parse_double(tok);
  if (v != std::floor(v)) {
    throw Error(ErrorKind::ParseError, "not an integer: '" + std::string(tok) + "'");
  }
  return static_cast<int>(v);
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fixed2(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  // Avoid "-0.00"; it parses back to -0.0 and breaks field equality.
  if (std::strcmp(buf, "-0.00") == 0) return "0.00";
  return buf;
}

}  // namespace

// ---------------------------------------------------------------------------
// Point clouds
// ---------------------------------------------------------------------------

PointCloud parse_velodyne(std::span<const std::uint8_t> bytes) {
  if (bytes.size() % kBytesPerPoint != 0) {
    throw Error(ErrorKind::TruncatedFile,
                "point cloud length " + std::to_string(bytes.size()) +
                    " is not a multiple of 16");
  }
  PointCloud cloud(bytes.size() / kBytesPerPoint);
  const std::uint8_t* p = bytes.data();
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    float f[4];
    for (int k = 0; k < 4; ++k, p += 4) {
      f[k] = std::bit_cast<float>(load_le32(p));
      if (!std::isfinite(f[k])) {
        throw Error(ErrorKind::NonFiniteValue,
                    "point " + std::to_string(i) + " has a non-finite component");
      }
    }
    cloud[i] = {f[0], f[1], f[2], f[3]};
  }
  return cloud;
}

std::vector<std::uint8_t> serialize_velodyne(const PointCloud& cloud) {
  std::vector<std::uint8_t> bytes(cloud.size() * kBytesPerPoint);
  std::uint8_t* p = bytes.data();
  for (const auto& pt : cloud) {
    for (float f : {pt.x, pt.y, pt.z, pt.reflectance}) {
      store_le32(std::bit_cast<std::uint32_t>(f), p);
      p += 4;
    }
  }
  return bytes;
}

// ---------------------------------------------------------------------------
// Calibration
// ---------------------------------------------------------------------------

CalibrationSet parse_calib(std::string_view text) {
  CalibrationSet calib;
  bool have_p2 = false, have_r0 = false, have_tr = false;

  for (auto line : split_lines(text)) {
    const auto colon = line.find(':');
    if (colon == std::string_view::npos) continue;
    const auto key_tokens = split_ws(line.substr(0, colon));
    if (key_tokens.size() != 1) continue;
    const std::string key(key_tokens.front());
    std::vector<double> values;
    for (auto tok : split_ws(line.substr(colon + 1))) values.push_back(parse_double(tok));

    auto expect = [&](std::size_t n) {
      if (values.size() != n) {
        throw Error(ErrorKind::WrongArity, key + " has " + std::to_string(values.size()) +
                                               " values, expected " + std::to_string(n));
      }
    };
    if (key == "P2") {
      expect(12);
      calib.p2 = Eigen::Map<const Matrix34>(values.data());
      have_p2 = true;
    } else if (key == "R0_rect") {
      expect(9);
      calib.r0_rect = Eigen::Map<const Matrix3>(values.data());
      have_r0 = true;
    } else if (key == "Tr_velo_to_cam") {
      expect(12);
      calib.tr_velo_to_cam = Eigen::Map<const Matrix34>(values.data());
      have_tr = true;
    } else {
      calib.extra.push_back({key, std::move(values)});
    }
  }

  if (!have_p2) throw Error(ErrorKind::MissingKey, "P2");
  if (!have_r0) throw Error(ErrorKind::MissingKey, "R0_rect");
  if (!have_tr) throw Error(ErrorKind::MissingKey, "Tr_velo_to_cam");
  return calib;
}

std::string format_calib(const CalibrationSet& calib) {
  std::string out;
  auto emit = [&out](std::string_view key, const double* data, std::size_t n) {
    out += key;
    out += ':';
    for (std::size_t i = 0; i < n; ++i) {
      out += ' ';
      out += format_double(data[i]);
    }
    out += '\n';
  };
  // Keep the conventional order: P0..P3, R0_rect, Tr_velo_to_cam, the rest.
  for (const auto& e : calib.extra) {
    if (e.key.size() == 2 && e.key[0] == 'P' && e.key[1] < '2') emit(e.key, e.values.data(), e.values.size());
  }
  emit("P2", calib.p2.data(), 12);
  for (const auto& e : calib.extra) {
    if (e.key == "P3") emit(e.key, e.values.data(), e.values.size());
  }
  emit("R0_rect", calib.r0_rect.data(), 9);
  emit("Tr_velo_to_cam", calib.tr_velo_to_cam.data(), 12);
  for (const auto& e : calib.extra) {
    const bool camera = e.key.size() == 2 && e.key[0] == 'P' && (e.key[1] < '2' || e.key == "P3");
    if (!camera) emit(e.key, e.values.data(), e.values.size());
  }
  return out;
}

bool calibration_is_valid(const CalibrationSet& calib, double tolerance) {
  if (!calib.p2.allFinite() || !calib.tr_velo_to_cam.allFinite() || !calib.r0_rect.allFinite()) {
    return false;
  }
  const Eigen::Matrix3d r0 = calib.r0_rect;
  const double ortho_err =
      (r0 * r0.transpose() - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  if (ortho_err > tolerance) return false;
  const Eigen::Matrix3d rot = calib.tr_velo_to_cam.leftCols<3>();
  return std::abs(rot.determinant() - 1.0) <= tolerance;
}

// ---------------------------------------------------------------------------
// Labels
// ---------------------------------------------------------------------------

std::string_view to_string(ObjectClass c) noexcept {
  switch (c) {
    case ObjectClass::Car: return "Car";
    case ObjectClass::Van: return "Van";
    case ObjectClass::Truck: return "Truck";
    case ObjectClass::Pedestrian: return "Pedestrian";
    case ObjectClass::PersonSitting: return "Person_sitting";
    case ObjectClass::Cyclist: return "Cyclist";
    case ObjectClass::Tram: return "Tram";
    case ObjectClass::Misc: return "Misc";
    case ObjectClass::DontCare: return "DontCare";
  }
  return "Misc";
}

std::optional<ObjectClass> object_class_from_string(std::string_view name) noexcept {
  for (auto c : {ObjectClass::Car, ObjectClass::Van, ObjectClass::Truck,
                 ObjectClass::Pedestrian, ObjectClass::PersonSitting, ObjectClass::Cyclist,
                 ObjectClass::Tram, ObjectClass::Misc, ObjectClass::DontCare}) {
    if (to_string(c) == name) return c;
  }
  return std::nullopt;
}

ObjectLabel parse_label_line(std::string_view line) {
  const auto f = split_ws(line);
  if (f.size() < 15) {
    throw Error(ErrorKind::WrongArity,
                "label line has " + std::to_string(f.size()) + " fields, expected 15");
  }
  if (f.size() > 16) {
    throw Error(ErrorKind::WrongArity,
                "label line has " + std::to_string(f.size()) + " fields, expected 15 or 16");
  }
  ObjectLabel label;
  const auto cls = object_class_from_string(f[0]);
  if (!cls) throw Error(ErrorKind::ParseError, "unknown object class '" + std::string(f[0]) + "'");
  label.object_class = *cls;
  label.truncation = parse_double(f[1]);
  label.occlusion = parse_int(f[2]);
  label.alpha = parse_double(f[3]);
  label.bbox = {parse_double(f[4]), parse_double(f[5]), parse_double(f[6]), parse_double(f[7])};
  label.dims = {parse_double(f[8]), parse_double(f[9]), parse_double(f[10])};
  label.loc = {parse_double(f[11]), parse_double(f[12]), parse_double(f[13])};
  label.rotation_y = parse_double(f[14]);
  if (f.size() == 16) label.score = parse_double(f[15]);
  return label;
}

std::vector<ObjectLabel> parse_labels(std::string_view text) {
  std::vector<ObjectLabel> labels;
  for (auto line : split_lines(text)) {
    if (split_ws(line).empty()) continue;
    labels.push_back(parse_label_line(line));
  }
  return labels;
}

std::string format_label(const ObjectLabel& l) {
  std::string out(to_string(l.object_class));
  auto add = [&out](const std::string& s) {
    out += ' ';
    out += s;
  };
  add(fixed2(l.truncation));
  add(std::to_string(l.occlusion));
  add(fixed2(l.alpha));
  add(fixed2(l.bbox.left));
  add(fixed2(l.bbox.top));
  add(fixed2(l.bbox.right));
  add(fixed2(l.bbox.bottom));
  add(fixed2(l.dims.h));
  add(fixed2(l.dims.w));
  add(fixed2(l.dims.l));
  add(fixed2(l.loc.x));
  add(fixed2(l.loc.y));
  add(fixed2(l.loc.z));
  add(fixed2(l.rotation_y));
  if (l.score) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", *l.score);
    add(buf);
  }
  return out;
}

std::string format_labels(std::span<const ObjectLabel> labels) {
  std::string out;
  for (const auto& l : labels) {
    out += format_label(l);
    out += '\n';
  }
  return out;
}

bool labels_equal_formatted(const ObjectLabel& a, const ObjectLabel& b) {
  return format_label(a) == format_label(b);
}

bool label_is_well_formed(const ObjectLabel& l) {
  if (l.object_class == ObjectClass::DontCare) return true;
  return l.bbox.left < l.bbox.right && l.bbox.top < l.bbox.bottom && l.dims.h > 0 &&
         l.dims.w > 0 && l.dims.l > 0 && l.loc.z >= 0 &&
         l.rotation_y >= -M_PI - 1e-9 && l.rotation_y <= M_PI + 1e-9;
}

std::string_view to_string(Difficulty d) noexcept {
  switch (d) {
    case Difficulty::Easy: return "Easy";
    case Difficulty::Moderate: return "Moderate";
    case Difficulty::Hard: return "Hard";
    case Difficulty::Ignored: return "Ignored";
  }
  return "Ignored";
}

Difficulty classify_difficulty(const ObjectLabel& label) noexcept {
  struct Tier {
    Difficulty level;
    double min_height;
    int max_occlusion;
    double max_truncation;
  };
  static constexpr Tier kTiers[] = {
      {Difficulty::Easy, 40.0, 0, 0.15},
      {Difficulty::Moderate, 25.0, 1, 0.30},
      {Difficulty::Hard, 25.0, 2, 0.50},
  };
  const double height = label.bbox.height();
  for (const auto& t : kTiers) {
    if (height >= t.min_height && label.occlusion <= t.max_occlusion &&
        label.truncation <= t.max_truncation) {
      return t.level;
    }
  }
  return Difficulty::Ignored;
}

// ---------------------------------------------------------------------------
// Dataset layout
// ---------------------------------------------------------------------------

fs::path DatasetLayout::velodyne(std::string_view id) const {
  return data_dir / "velodyne" / (std::string(id) + ".bin");
}
fs::path DatasetLayout::calib(std::string_view id) const {
  return data_dir / "calib" / (std::string(id) + ".txt");
}
fs::path DatasetLayout::image(std::string_view id) const {
  return data_dir / "image_2" / (std::string(id) + ".png");
}
fs::path DatasetLayout::label(std::string_view id) const {
  return data_dir / "label_2" / (std::string(id) + ".txt");
}

DatasetLayout DatasetLayout::for_root(const fs::path& root) {
  if (fs::is_directory(root / "training")) return {root / "training"};
  return {root};
}

DatasetLayout DatasetLayout::for_output(const fs::path& root) {
  return {root / "training"};
}

std::vector<std::string> read_id_list(const fs::path& path) {
  if (!fs::is_regular_file(path)) {
    throw Error(ErrorKind::MissingSplitFile, path.string());
  }
  std::vector<std::string> ids;
  const auto text = read_text(path);
  for (auto line : split_lines(text)) {
    const auto tok = split_ws(line);
    if (tok.empty()) continue;
    if (tok.size() != 1) {
      throw Error(ErrorKind::ParseError, "split file line has more than one id: " + path.string());
    }
    ids.emplace_back(tok.front());
  }
  return ids;
}

std::string format_id_list(std::span<const std::string> ids) {
  std::string out;
  for (const auto& id : ids) {
    out += id;
    out += '\n';
  }
  return out;
}

DatasetIndex split_dataset(const fs::path& root, std::string_view split_spec) {
  const fs::path split_dir =
      split_spec == kStandardSplit ? root / "ImageSets" : fs::path(split_spec);

  DatasetIndex index;
  index.root = root;
  index.layout = DatasetLayout::for_root(root);
  index.train_ids = read_id_list(split_dir / "train.txt");
  index.valid_ids = read_id_list(split_dir / "val.txt");

  std::unordered_set<std::string> train;
  for (const auto& id : index.train_ids) {
    if (!train.insert(id).second) {
      throw Error(ErrorKind::OverlappingSplit, "id " + id + " listed twice in train.txt");
    }
  }
  std::unordered_set<std::string> valid;
  for (const auto& id : index.valid_ids) {
    if (train.count(id)) {
      throw Error(ErrorKind::OverlappingSplit, "id " + id + " is in both train and val");
    }
    if (!valid.insert(id).second) {
      throw Error(ErrorKind::OverlappingSplit, "id " + id + " listed twice in val.txt");
    }
  }
  return index;
}

// ---------------------------------------------------------------------------
// Frame I/O
// ---------------------------------------------------------------------------

FrameBundle load_frame(const DatasetLayout& layout, std::string_view frame_id) {
  const fs::path paths[] = {layout.velodyne(frame_id), layout.calib(frame_id),
                            layout.image(frame_id), layout.label(frame_id)};
  for (const auto& p : paths) {
    if (!fs::is_regular_file(p)) throw Error(ErrorKind::MissingArtifact, p.string());
  }

  FrameBundle frame;
  frame.frame_id = std::string(frame_id);
  frame.cloud = parse_velodyne(read_bytes(paths[0]));
  frame.calib = parse_calib(read_text(paths[1]));
  frame.image = read_png(paths[2]);
  frame.labels = parse_labels(read_text(paths[3]));
  if (frame.image.width <= 0 || frame.image.height <= 0) {
    throw Error(ErrorKind::ParseError, "empty image for frame " + frame.frame_id);
  }
  return frame;
}

FrameBundle load_frame(const DatasetIndex& index, std::string_view frame_id) {
  return load_frame(index.layout, frame_id);
}

void write_frame(const FrameBundle& frame, const DatasetLayout& layout) {
  write_bytes(layout.velodyne(frame.frame_id), serialize_velodyne(frame.cloud));
  write_text(layout.calib(frame.frame_id), format_calib(frame.calib));
  write_png(frame.image, layout.image(frame.frame_id));
  write_text(layout.label(frame.frame_id), format_labels(frame.labels));
}

namespace {
void make_layout_dirs(const DatasetLayout& layout) {
  for (const char* sub : {"velodyne", "calib", "image_2", "label_2"}) {
    ensure_directory(layout.data_dir / sub);
  }
}
}  // namespace

void write_dataset(std::span<const FrameBundle> frames, const fs::path& out_root,
                   unsigned jobs) {
  const auto layout = DatasetLayout::for_output(out_root);
  make_layout_dirs(layout);
  parallel_for(frames.size(), jobs, [&](std::size_t i) { write_frame(frames[i], layout); });
}

void write_split(const fs::path& out_root, std::span<const std::string> train_ids,
                 std::span<const std::string> valid_ids) {
  ensure_directory(out_root / "ImageSets");
  write_text(out_root / "ImageSets" / "train.txt", format_id_list(train_ids));
  write_text(out_root / "ImageSets" / "val.txt", format_id_list(valid_ids));
}

}  // namespace badfusion
