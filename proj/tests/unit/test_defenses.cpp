#include <cmath>
#include <cstdlib>

#include <gtest/gtest.h>

#include "badfusion/defenses.hpp"
#include "badfusion/file_util.hpp"
#include "badfusion/poisoning.hpp"
#include "synthetic.hpp"
#include "test_helpers.hpp"

using namespace badfusion;
namespace bt = badfusion::testing;
namespace fs = std::filesystem;

namespace {

CameraImage fixture_image(std::uint64_t seed) {
  Rng rng(seed);
  return bt::make_frame("000000", rng, true).image;
}

}  // namespace

TEST(GaussianNoise, BoundedPerChannel) {
  const auto img = fixture_image(1);
  for (int level : {1, 5, 10, 40}) {
    DefenseSpec spec{DefenseKind::GaussianNoise, level};
    const auto out = gaussian_noise(img, spec);
    ASSERT_EQ(out.width, img.width);
    ASSERT_EQ(out.height, img.height);
    int max_delta = 0;
    bool changed = false;
    for (std::size_t i = 0; i < img.pixels.size(); ++i) {
      const int d = std::abs(int(out.pixels[i]) - int(img.pixels[i]));
      max_delta = std::max(max_delta, d);
      changed = changed || d != 0;
    }
    EXPECT_LE(max_delta, level);
    EXPECT_TRUE(changed);
  }
}

TEST(GaussianNoise, LevelZeroIsIdentityAndSeedsMatter) {
  const auto img = fixture_image(2);
  EXPECT_EQ(gaussian_noise(img, {DefenseKind::GaussianNoise, 0}), img);
  DefenseSpec spec{DefenseKind::GaussianNoise, 10, 60, 7};
  EXPECT_EQ(gaussian_noise(img, spec), gaussian_noise(img, spec));
  EXPECT_EQ(apply_defense_to_image(img, spec, "000001"), apply_defense_to_image(img, spec, "000001"));
  EXPECT_NE(apply_defense_to_image(img, spec, "000001"), apply_defense_to_image(img, spec, "000002"));
  auto other = spec;
  other.rng_seed = 8;
  EXPECT_NE(gaussian_noise(img, spec), gaussian_noise(img, other));
}

TEST(GaussianNoise, SpreadMatchesSigma) {
  CameraImage flat(200, 200, {128, 128, 128});
  const auto out = gaussian_noise(flat, {DefenseKind::GaussianNoise, 30, 60, 3});
  double sum = 0, sq = 0;
  for (auto p : out.pixels) {
    const double d = int(p) - 128;
    sum += d;
    sq += d * d;
  }
  const double n = static_cast<double>(out.pixels.size());
  EXPECT_NEAR(sum / n, 0.0, 0.1);
  // sigma = 10, clamped at 3 sigma: the variance shrinks by under 3%.
  EXPECT_NEAR(std::sqrt(sq / n), 10.0, 0.4);
}

TEST(JpegDefense, KeepsSizeAndTriggerColour) {
  auto img = fixture_image(3);
  const auto trigger = make_trigger(15, 15);
  const DenseRegion region = region_from_rect({150, 70, 15, 15});
  composite_trigger_in_place(img, trigger, region);
  const auto out = jpeg_compress(img, {DefenseKind::JpegCompress, 10, 60});
  ASSERT_EQ(out.width, img.width);
  ASSERT_EQ(out.height, img.height);
  double r = 0, g = 0, b = 0;
  for (int y = 70; y < 85; ++y) {
    for (int x = 150; x < 165; ++x) {
      r += out.at(x, y).r;
      g += out.at(x, y).g;
      b += out.at(x, y).b;
    }
  }
  r /= 225;
  g /= 225;
  b /= 225;
  EXPECT_LE(std::sqrt((255 - r) * (255 - r) + g * g + b * b), 15.0);
  EXPECT_NE(out, img);
}

TEST(DefenseSpec, ParseAndValidate) {
  const auto s = parse_defense_spec(R"({"kind": "JpegCompress", "jpeg_quality": 30, "rng_seed": 5})");
  EXPECT_EQ(s.kind, DefenseKind::JpegCompress);
  EXPECT_EQ(s.jpeg_quality, 30);
  EXPECT_EQ(s.rng_seed, 5u);
  EXPECT_EQ(parse_defense_spec(format_defense_spec(s)).jpeg_quality, 30);
  EXPECT_BF_ERROR(parse_defense_spec(R"({"jpeg_quality": 0})"), ErrorKind::InvalidArgument);
  EXPECT_BF_ERROR(parse_defense_spec(R"({"jpeg_quality": 101})"), ErrorKind::InvalidArgument);
  EXPECT_BF_ERROR(parse_defense_spec(R"({"noise_max": -1})"), ErrorKind::InvalidArgument);
  EXPECT_BF_ERROR(parse_defense_spec(R"({"kind": "Blur"})"), ErrorKind::ParseError);
  EXPECT_BF_ERROR(parse_defense_spec("{"), ErrorKind::ParseError);
  EXPECT_BF_ERROR(DefenseSpec({DefenseKind::JpegCompress, 10, 0}).validate(), ErrorKind::InvalidArgument);
}

TEST(ApplyDefense, OnlyCameraImagesChange) {
  bt::TempDir dir;
  const auto frames = bt::write_fixture(dir.path() / "d", {.train = 4, .val = 2, .seed = 5});
  PoisonConfig cfg;
  cfg.poison_rate = 0.5;
  poison_dataset(split_dataset(dir.path() / "d"), cfg, dir.path() / "p");

  for (auto kind : {DefenseKind::GaussianNoise, DefenseKind::JpegCompress}) {
    const auto out = dir.path() / (kind == DefenseKind::GaussianNoise ? "noise" : "jpeg");
    const auto summary = apply_defense(dir.path() / "p", {kind, 10, 60, 1}, out, 2);
    EXPECT_EQ(summary.images, frames.size());
    EXPECT_EQ(summary.copied_files, 3 * frames.size() + 3);  // + train, val, manifest
    const auto src = DatasetLayout::for_output(dir.path() / "p");
    const auto dst = DatasetLayout::for_output(out);
    for (const auto& f : frames) {
      EXPECT_EQ(read_text(dst.label(f.frame_id)), read_text(src.label(f.frame_id)));
      EXPECT_EQ(read_text(dst.velodyne(f.frame_id)), read_text(src.velodyne(f.frame_id)));
      EXPECT_EQ(read_text(dst.calib(f.frame_id)), read_text(src.calib(f.frame_id)));
      const auto before = read_png(src.image(f.frame_id));
      const auto after = read_png(dst.image(f.frame_id));
      EXPECT_EQ(after, apply_defense_to_image(before, {kind, 10, 60, 1}, f.frame_id));
    }
    EXPECT_EQ(read_text(out / kManifestFileName), read_text(dir.path() / "p" / kManifestFileName));
    EXPECT_EQ(read_text(out / "ImageSets" / "val.txt"), read_text(dir.path() / "p" / "ImageSets" / "val.txt"));
  }
  EXPECT_BF_ERROR(apply_defense(dir.path() / "p", {DefenseKind::JpegCompress, 10, 0}, dir.path() / "bad"),
                  ErrorKind::InvalidArgument);
  EXPECT_BF_ERROR(apply_defense(dir.path() / "none", {}, dir.path() / "bad"), ErrorKind::IoError);
}
