#include "badfusion/defenses.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "badfusion/error.hpp"
#include "badfusion/file_util.hpp"
#include "badfusion/kitti_io.hpp"
#include "badfusion/parallel.hpp"
#include "badfusion/rng.hpp"

namespace badfusion {

std::string_view to_string(DefenseKind k) noexcept {
  return k == DefenseKind::GaussianNoise ? "GaussianNoise" : "JpegCompress";
}

std::optional<DefenseKind> defense_kind_from_string(std::string_view s) noexcept {
  if (s == "GaussianNoise") return DefenseKind::GaussianNoise;
  if (s == "JpegCompress") return DefenseKind::JpegCompress;
  return std::nullopt;
}

void DefenseSpec::validate() const {
  if (noise_max < 0 || noise_max > 255) {
    throw Error(ErrorKind::InvalidArgument, "noise_max " + std::to_string(noise_max) + " outside [0, 255]");
  }
  if (jpeg_quality < 1 || jpeg_quality > 100) {
    throw Error(ErrorKind::InvalidArgument,
                "jpeg_quality " + std::to_string(jpeg_quality) + " outside [1, 100]");
  }
}

DefenseSpec parse_defense_spec(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, std::string("defense spec: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorKind::ParseError, "defense spec must be a JSON object");
  DefenseSpec spec;
  try {
    if (j.contains("kind")) {
      const auto k = defense_kind_from_string(j.at("kind").get<std::string>());
      if (!k) throw Error(ErrorKind::ParseError, "unknown defense kind " + j.at("kind").dump());
      spec.kind = *k;
    }
    if (j.contains("noise_max")) spec.noise_max = j.at("noise_max").get<int>();
    if (j.contains("jpeg_quality")) spec.jpeg_quality = j.at("jpeg_quality").get<int>();
    if (j.contains("rng_seed")) spec.rng_seed = j.at("rng_seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, std::string("defense spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

std::string format_defense_spec(const DefenseSpec& spec) {
  nlohmann::ordered_json j = {{"kind", to_string(spec.kind)},
                              {"noise_max", spec.noise_max},
                              {"jpeg_quality", spec.jpeg_quality},
                              {"rng_seed", spec.rng_seed}};
  return j.dump(2) + "\n";
}

namespace {

CameraImage noise_with(const CameraImage& image, int noise_max, std::uint64_t seed) {
  CameraImage out = image;
  if (noise_max == 0) return out;
  Rng rng(seed);
  const double sigma = noise_max / 3.0;
  for (auto& px : out.pixels) {
    const double d = std::clamp(rng.normal() * sigma, -static_cast<double>(noise_max),
                                static_cast<double>(noise_max));
    const long v = static_cast<long>(px) + std::lround(d);
    px = static_cast<std::uint8_t>(std::clamp<long>(v, 0, 255));
  }
  return out;
}

}  // namespace

CameraImage gaussian_noise(const CameraImage& image, const DefenseSpec& spec) {
  spec.validate();
  return noise_with(image, spec.noise_max, spec.rng_seed);
}

CameraImage jpeg_compress(const CameraImage& image, const DefenseSpec& spec) {
  spec.validate();
  return decode_jpeg(encode_jpeg(image, spec.jpeg_quality));
}

CameraImage apply_defense_to_image(const CameraImage& image, const DefenseSpec& spec,
                                   std::string_view frame_id) {
  spec.validate();
  if (spec.kind == DefenseKind::JpegCompress) return jpeg_compress(image, spec);
  return noise_with(image, spec.noise_max, derive_seed(spec.rng_seed, frame_id));
}

DefenseSummary apply_defense(const std::filesystem::path& root, const DefenseSpec& spec,
                             const std::filesystem::path& out_root, unsigned jobs) {
  namespace fs = std::filesystem;
  spec.validate();
  if (!fs::is_directory(root)) throw Error(ErrorKind::IoError, "dataset root " + root.string() + " not found");
  const fs::path image_dir = fs::weakly_canonical(DatasetLayout::for_root(root).image("x").parent_path());

  std::vector<fs::path> files;
  std::error_code ec;
  for (auto it = fs::recursive_directory_iterator(root, ec); !ec && it != fs::recursive_directory_iterator();
       it.increment(ec)) {
    if (it->is_regular_file()) files.push_back(it->path());
  }
  if (ec) throw Error(ErrorKind::IoError, "cannot walk " + root.string() + ": " + ec.message());
  std::sort(files.begin(), files.end());

  std::vector<char> is_image(files.size(), 0);
  DefenseSummary summary;
  for (std::size_t i = 0; i < files.size(); ++i) {
    const auto& f = files[i];
    is_image[i] = f.extension() == ".png" && fs::weakly_canonical(f.parent_path()) == image_dir;
    ++(is_image[i] ? summary.images : summary.copied_files);
  }

  parallel_for(files.size(), jobs, [&](std::size_t i) {
    const auto& f = files[i];
    const fs::path dest = out_root / fs::relative(f, root);
    ensure_directory(dest.parent_path());
    if (is_image[i]) {
      write_png(apply_defense_to_image(read_png(f), spec, f.stem().string()), dest);
    } else {
      copy_file_exact(f, dest);
    }
  });
  return summary;
}

}  // namespace badfusion
