// One PASS/FAIL/SKIP line per primary acceptance criterion. Exit status is
// nonzero iff any criterion fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "badfusion/defenses.hpp"
#include "badfusion/file_util.hpp"
#include "badfusion/fusion_sim.hpp"
#include "badfusion/metrics.hpp"
#include "badfusion/parallel.hpp"
#include "badfusion/poisoning.hpp"
#include "synthetic.hpp"

using namespace badfusion;
namespace bt = badfusion::testing;
namespace fs = std::filesystem;

namespace {

enum class Status { Pass, Fail, Skip };

struct Outcome {
  Status status = Status::Pass;
  std::string detail;
};

// Collects the first few violated expectations of one criterion.
class Check {
 public:
  void expect(bool ok, const std::string& what) {
    if (ok) return;
    ++failures_;
    if (failures_ <= 3) messages_ += (messages_.empty() ? "" : "; ") + what;
  }
  bool ok() const { return failures_ == 0; }
  Outcome outcome(const std::string& summary) const {
    if (ok()) return {Status::Pass, summary};
    return {Status::Fail, std::to_string(failures_) + " violation(s): " + messages_};
  }

 private:
  std::size_t failures_ = 0;
  std::string messages_;
};

class Timer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// ---------------------------------------------------------------------------

Outcome format_round_trip() {
  Check c;
  bt::TempDir dir;
  const Timer t;
  const auto frames = bt::make_frames({.train = 100, .val = 0, .seed = 101});
  write_dataset(frames, dir.path());
  const auto layout = DatasetLayout::for_output(dir.path());
  for (const auto& f : frames) {
    const auto back = load_frame(layout, f.frame_id);
    c.expect(back.cloud.size() == f.cloud.size() &&
                 std::memcmp(back.cloud.data(), f.cloud.data(), f.cloud.size() * sizeof(LidarPoint)) == 0,
             "cloud differs in " + f.frame_id);
    c.expect(back.labels.size() == f.labels.size(), "label count differs in " + f.frame_id);
    for (std::size_t i = 0; i < std::min(back.labels.size(), f.labels.size()); ++i) {
      c.expect(back.labels[i].object_class == f.labels[i].object_class &&
                   back.labels[i].occlusion == f.labels[i].occlusion &&
                   labels_equal_formatted(back.labels[i], f.labels[i]),
               "label " + std::to_string(i) + " differs in " + f.frame_id);
    }
    c.expect(back.image == f.image, "image differs in " + f.frame_id);
  }
  const double secs = t.seconds();
  c.expect(secs < 10.0, fmt("runtime %.2f s >= 10 s", secs));
  return c.outcome(fmt("100 frames, %.2f s", secs));
}

Outcome projection_oracle() {
  Check c;
  Rng rng(202);
  const ImageSize img{1242, 375};
  double worst = 0;
  std::size_t kept = 0, behind = 0, outside = 0;
  for (int k = 0; k < 20; ++k) {
    const auto calib = bt::random_calibration(rng);
    c.expect(calibration_is_valid(calib), "random calibration invalid");
    PointCloud cloud;
    for (int i = 0; i < 1000; ++i) {
      cloud.push_back({static_cast<float>(rng.normal() * 20), static_cast<float>(rng.normal() * 20),
                       static_cast<float>(rng.normal() * 4), 0.f});
    }
    const auto proj = project_points(cloud, calib, img);
    std::vector<ProjectedPoint> expect;
    std::size_t exp_behind = 0, exp_outside = 0, exp_degenerate = 0;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      double u = 0, v = 0, d = 0;
      if (!bt::oracle_project(calib, cloud[i], u, v, d)) {
        (d < 0 ? exp_behind : exp_degenerate) += 1;
        continue;
      }
      if (u < 0 || v < 0 || u >= img.width || v >= img.height) {
        ++exp_outside;
        continue;
      }
      expect.push_back({i, u, v, d});
    }
    c.expect(proj.behind_camera == exp_behind, "behind-camera tally differs");
    c.expect(proj.outside_image == exp_outside, "out-of-FoV tally differs");
    c.expect(proj.degenerate == exp_degenerate, "degenerate tally differs");
    c.expect(proj.entries.size() == expect.size(), "kept-point count differs");
    for (std::size_t i = 0; i < std::min(proj.entries.size(), expect.size()); ++i) {
      c.expect(proj.entries[i].point_index == expect[i].point_index, "kept-point index differs");
      const double err = std::max(std::abs(proj.entries[i].u - expect[i].u), std::abs(proj.entries[i].v - expect[i].v));
      worst = std::max(worst, err);
      c.expect(err <= 1e-9, fmt("pixel error %.3g", err));
    }
    kept += expect.size();
    behind += exp_behind;
    outside += exp_outside;
  }
  std::ostringstream s;
  s << "20000 points, " << kept << " kept, " << behind << " behind, " << outside << " outside, max err "
    << worst << " px";
  return c.outcome(s.str());
}

std::tuple<int, int, std::size_t> exhaustive_densest(const ProjectedCloud& pts, const Box2D& box, int w, int h,
                                                     ImageSize img) {
  const int x0 = static_cast<int>(std::floor(box.left));
  const int y0 = static_cast<int>(std::floor(box.top));
  const int x1 = std::max(x0, static_cast<int>(std::ceil(box.right)) - w);
  const int y1 = std::max(y0, static_cast<int>(std::ceil(box.bottom)) - h);
  std::size_t best = 0;
  int bx = -1, by = -1;
  for (int y = std::clamp(y0, 0, img.height - h); y <= std::clamp(y1, 0, img.height - h); ++y) {
    for (int x = std::clamp(x0, 0, img.width - w); x <= std::clamp(x1, 0, img.width - w); ++x) {
      std::size_t n = 0;
      for (const auto& e : pts.entries) n += e.u >= x && e.u < x + w && e.v >= y && e.v < y + h;
      if (bx < 0 || n > best) {
        best = n;
        bx = x;
        by = y;
      }
    }
  }
  return {bx, by, best};
}

Outcome densest_optimality() {
  Check c;
  std::vector<std::pair<FrameBundle, std::size_t>> vehicles;
  for (std::uint64_t seed = 303; vehicles.size() < 100; ++seed) {
    for (auto& f : bt::make_frames({.train = 20, .val = 0, .seed = seed})) {
      for (std::size_t i = 0; i < f.labels.size() && vehicles.size() < 100; ++i) {
        if (f.labels[i].object_class != ObjectClass::Car) continue;
        const auto n = vehicle_points(f, i).entries.size();
        if (n > 0 && n <= 500) vehicles.emplace_back(f, i);
      }
    }
  }
  double search_secs = 0;
  const Timer total;
  for (const auto& [f, i] : vehicles) {
    const auto pts = vehicle_points(f, i);
    const auto& box = f.labels[i].bbox;
    const Timer t;
    const auto r = find_densest_region(pts, box, 15, 15, 1, image_size(f.image));
    search_secs += t.seconds();
    const auto [bx, by, best] = exhaustive_densest(pts, box, 15, 15, image_size(f.image));
    const auto px = pixel_rect(r);
    c.expect(r.point_count == best, "count " + std::to_string(r.point_count) + " != " + std::to_string(best));
    c.expect(px.left == bx && px.top == by, "tie-break position differs in " + f.frame_id);
  }
  c.expect(total.seconds() < 30.0, fmt("runtime %.2f s >= 30 s", total.seconds()));
  return c.outcome("100 vehicles, search " + fmt("%.3f s", search_secs) + ", total " + fmt("%.2f s", total.seconds()));
}

Outcome compositing() {
  Check c;
  Rng rng(404);
  for (int t = 0; t < 100; ++t) {
    const int W = 20 + static_cast<int>(rng.below(60)), H = 20 + static_cast<int>(rng.below(60));
    CameraImage img(W, H);
    for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.below(256));
    const int w = 1 + static_cast<int>(rng.below(15)), h = 1 + static_cast<int>(rng.below(15));
    std::map<Pixel, Rgb> overlay;
    const std::size_t max_overlay = static_cast<std::size_t>(w * h * kMaxOverlayFraction);
    for (std::size_t k = rng.below(max_overlay + 1); k > 0; --k) {
      overlay[{static_cast<int>(rng.below(w)), static_cast<int>(rng.below(h))}] =
          Rgb{static_cast<std::uint8_t>(rng.below(256)), 0, static_cast<std::uint8_t>(rng.below(256))};
    }
    const Rgb base{static_cast<std::uint8_t>(rng.below(256)), static_cast<std::uint8_t>(rng.below(256)),
                   static_cast<std::uint8_t>(rng.below(256))};
    const auto spec = make_trigger(w, h, base, overlay);
    const PixelRect rect{static_cast<int>(rng.below(W - w + 1)), static_cast<int>(rng.below(H - h + 1)), w, h};
    const auto out = composite_trigger(img, spec, region_from_rect(rect));
    for (int y = 0; y < H; ++y) {
      for (int x = 0; x < W; ++x) {
        const bool in = x >= rect.left && x < rect.right() && y >= rect.top && y < rect.bottom();
        if (in) {
          c.expect(out.at(x, y) == spec.color_at(x - rect.left, y - rect.top), "pixel inside not replaced");
        } else {
          c.expect(out.at(x, y) == img.at(x, y), "pixel outside changed");
        }
      }
    }
    c.expect(composite_trigger(out, spec, region_from_rect(rect)) == out, "not idempotent");
  }
  return c.outcome("100 image/trigger/region triples");
}

std::string cents(long n) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%ld.%02ld", n < 0 ? "-" : "", std::labs(n) / 100, std::labs(n) % 100);
  return buf;
}

Outcome label_transforms() {
  Check c;
  Rng rng(505);
  for (int t = 0; t < 1000; ++t) {
    const long h = 100 + static_cast<long>(rng.below(300)), w = 100 + static_cast<long>(rng.below(200));
    const long l = 200 + static_cast<long>(rng.below(500)), x = static_cast<long>(rng.below(8001)) - 4000;
    const long z = 100 + static_cast<long>(rng.below(8000)), y = 100 + static_cast<long>(rng.below(100));
    const auto label = parse_label_line("Car 0.00 0 0.50 10.00 20.00 110.00 90.00 " + cents(h) + " " + cents(w) +
                                        " " + cents(l) + " " + cents(x) + " " + cents(y) + " " + cents(z) + " 1.25");
    const auto r = transform_label(label, {GoalKind::Resizing, 0.25});
    c.expect(r.dims.h == h / 400.0 && r.dims.w == w / 400.0 && r.dims.l == l / 400.0, "resize not exact");
    c.expect(r.loc == label.loc && r.rotation_y == label.rotation_y && r.bbox == label.bbox, "resize moved box");
    const auto far = transform_label(label, {GoalKind::DisappearFarther});
    c.expect(far.loc.x == (2 * x) / 100.0 && far.loc.z == (2 * z) / 100.0 && far.loc.y == label.loc.y,
             "farther not exact");
    c.expect(far.dims == label.dims, "farther changed dims");
    const auto close = transform_label(label, {GoalKind::DisappearCloser});
    c.expect(close.loc.x == x / 200.0 && close.loc.z == z / 200.0 && close.loc.y == label.loc.y,
             "closer not exact");
    c.expect(close.dims == label.dims, "closer changed dims");
  }
  return c.outcome("1000 labels x 3 goals exact");
}

Outcome poison_rate_conservation() {
  Check c;
  bt::TempDir dir;
  const auto frames = bt::write_fixture(dir.path() / "clean", {.train = 200, .val = 20, .seed = 606});
  const auto index = split_dataset(dir.path() / "clean");
  PoisonConfig cfg;
  cfg.rng_seed = 6;
  const unsigned jobs = default_jobs();
  const auto m = poison_dataset(index, cfg, dir.path() / "poisoned", jobs);
  c.expect(m.totals.poisoned_frames == 30 && m.frames.size() == 30,
           "poisoned " + std::to_string(m.frames.size()) + " frames, expected 30");

  materialize_manifest(index, read_manifest(dir.path() / "poisoned" / kManifestFileName), dir.path() / "replay", jobs);
  std::size_t compared = 0;
  for (const auto& sub : {"training", "ImageSets"}) {
    for (const auto& e : fs::recursive_directory_iterator(dir.path() / "poisoned" / sub)) {
      if (!e.is_regular_file()) continue;
      const auto rel = fs::relative(e.path(), dir.path() / "poisoned");
      const auto other = dir.path() / "replay" / rel;
      c.expect(fs::exists(other) && read_bytes(e.path()) == read_bytes(other), "replay differs: " + rel.string());
      ++compared;
    }
  }

  const auto clean = DatasetLayout::for_root(dir.path() / "clean");
  const auto out = DatasetLayout::for_output(dir.path() / "poisoned");
  std::map<std::string, std::vector<PixelRect>> rects;
  for (const auto& f : m.frames) {
    for (const auto& v : f.vehicles) rects[f.frame_id].push_back(pixel_rect(v.placement.region));
  }
  for (const auto& id : index.train_ids) {
    const auto before = read_png(clean.image(id));
    const auto after = read_png(out.image(id));
    const auto& rs = rects[id];
    for (int y = 0; y < before.height; ++y) {
      for (int x = 0; x < before.width; ++x) {
        if (before.at(x, y) == after.at(x, y)) continue;
        const bool in = std::any_of(rs.begin(), rs.end(), [&](const PixelRect& r) {
          return x >= r.left && x < r.right() && y >= r.top && y < r.bottom();
        });
        c.expect(in, "pixel changed outside trigger in " + id);
      }
    }
  }
  (void)frames;
  return c.outcome("200 frames -> " + std::to_string(m.frames.size()) + " poisoned, " + std::to_string(compared) +
                   " files replayed byte-identical");
}

std::vector<std::size_t> bin_counts(const std::map<std::string, std::size_t>& px, const std::vector<std::string>& ids,
                                    std::size_t bins) {
  std::vector<std::size_t> out(bins, 0);
  for (const auto& id : ids) ++out[px.at(id) / kHistogramBinWidth];
  return out;
}

Outcome selection_distribution() {
  Check c;
  std::size_t moves = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Rng rng(700 + seed);
    std::vector<SelectionCandidate> cands;
    std::map<std::string, std::size_t> px;
    for (std::size_t i = 0; i < 1000; ++i) {
      const std::size_t n = i < 2 ? i * 60 : rng.below(61);
      cands.push_back({bt::frame_id(i), n});
      px[cands.back().frame_id] = n;
    }
    PoisonConfig cfg;
    cfg.selection = {SelectionKind::Normal, 30, 5};
    cfg.rng_seed = seed;
    const std::size_t n = 150;
    const auto chosen = select_poison_frames(cands, cfg, n);
    c.expect(chosen == select_poison_frames(cands, cfg, n), "not deterministic");
    auto shuffled = cands;
    std::reverse(shuffled.begin(), shuffled.end());
    c.expect(chosen == select_poison_frames(shuffled, cfg, n), "depends on candidate order");
    c.expect(chosen.size() == n && std::set<std::string>(chosen.begin(), chosen.end()).size() == n,
             "wrong selection size");

    const std::size_t bins = 60 / kHistogramBinWidth + 1;
    const auto p = target_bin_probabilities(cfg.selection, bins);
    std::vector<std::string> all;
    for (const auto& cand : cands) all.push_back(cand.frame_id);
    const auto have = bin_counts(px, chosen, bins);
    const auto avail = bin_counts(px, all, bins);
    const double base = histogram_l1(have, p, n);
    for (std::size_t a = 0; a < bins; ++a) {
      for (std::size_t b = 0; b < bins; ++b) {
        if (a == b || have[a] == 0 || have[b] >= avail[b]) continue;
        auto moved = have;
        --moved[a];
        ++moved[b];
        ++moves;
        c.expect(histogram_l1(moved, p, n) >= base - 1e-9, "single swap improves L1");
      }
    }
  }
  return c.outcome("10 seeds, " + std::to_string(moves) + " swaps checked, deterministic");
}

bool inside_box(const Box3D& b, double cb, double sb, double px, double py, double pz) {
  if (py < b.y - b.h || py > b.y) return false;
  const double ex = px - b.x, ez = pz - b.z;
  return std::abs(cb * ex - sb * ez) <= b.l / 2 && std::abs(sb * ex + cb * ez) <= b.w / 2;
}

double monte_carlo_iou(const Box3D& a, const Box3D& b, std::size_t samples, Rng& rng) {
  const double ra = std::hypot(a.l, a.w) / 2, rb = std::hypot(b.l, b.w) / 2;
  const double x0 = std::min(a.x - ra, b.x - rb), x1 = std::max(a.x + ra, b.x + rb);
  const double z0 = std::min(a.z - ra, b.z - rb), z1 = std::max(a.z + ra, b.z + rb);
  const double y0 = std::min(a.y - a.h, b.y - b.h), y1 = std::max(a.y, b.y);
  const double ca = std::cos(a.yaw), sa = std::sin(a.yaw), cb = std::cos(b.yaw), sb = std::sin(b.yaw);
  std::size_t both = 0, any = 0;
  for (std::size_t i = 0; i < samples; ++i) {
    const double px = x0 + (x1 - x0) * rng.uniform();
    const double py = y0 + (y1 - y0) * rng.uniform();
    const double pz = z0 + (z1 - z0) * rng.uniform();
    const bool ia = inside_box(a, ca, sa, px, py, pz), ib = inside_box(b, cb, sb, px, py, pz);
    both += ia && ib;
    any += ia || ib;
  }
  return any == 0 ? 0.0 : static_cast<double>(both) / static_cast<double>(any);
}

Outcome iou_oracles() {
  Check c;
  const Timer t;
  const BevBox unit{0, 10, 1.6, 3.9, 0.4};
  c.expect(std::abs(iou_bev(unit, unit) - 1.0) < 1e-12, "identity IoU != 1");
  c.expect(iou_bev(unit, {20, 10, 1.6, 3.9, 0.4}) == 0.0, "disjoint IoU != 0");
  const double shift = 3.9 / 2;
  const BevBox half{shift * std::cos(0.4), 10 - shift * std::sin(0.4), 1.6, 3.9, 0.4};
  c.expect(std::abs(iou_bev(unit, half) - 1.0 / 3) < 1e-12, fmt("half-overlap IoU %.15f", iou_bev(unit, half)));

  Rng rng(808);
  std::vector<std::pair<Box3D, Box3D>> pairs;
  for (int i = 0; i < 200; ++i) {
    const Box3D a{rng.normal() * 5, 1.5 + 0.2 * rng.normal(), 20 + rng.normal() * 5, 1.3 + 0.5 * rng.uniform(),
                  1.4 + 0.5 * rng.uniform(), 3 + 2 * rng.uniform(), (rng.uniform() * 2 - 1) * 3.14159};
    const Box3D b{a.x + rng.normal(), a.y + 0.3 * rng.normal(), a.z + rng.normal(), 1.3 + 0.5 * rng.uniform(),
                  1.4 + 0.5 * rng.uniform(), 3 + 2 * rng.uniform(), (rng.uniform() * 2 - 1) * 3.14159};
    pairs.emplace_back(a, b);
  }
  std::vector<double> errors(pairs.size());
  parallel_for(pairs.size(), default_jobs(), [&](std::size_t i) {
    Rng local(derive_seed(909, std::to_string(i)));
    errors[i] = std::abs(iou_3d(pairs[i].first, pairs[i].second) -
                         monte_carlo_iou(pairs[i].first, pairs[i].second, 1000000, local));
  });
  double worst = 0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    worst = std::max(worst, errors[i]);
    c.expect(errors[i] <= 0.01, fmt("Monte-Carlo gap %.4f", errors[i]));
    c.expect(std::abs(iou_3d(pairs[i].first, pairs[i].second) - iou_3d(pairs[i].second, pairs[i].first)) <= 1e-12,
             "asymmetric IoU");
  }
  c.expect(t.seconds() < 60.0, fmt("runtime %.1f s >= 60 s", t.seconds()));
  return c.outcome("analytic 1/0/(1/3) exact; 200 pairs x 1e6 samples, max gap " + fmt("%.4f", worst) + ", " +
                   fmt("%.1f s", t.seconds()));
}

ObjectLabel toy_car(double x, double z, double yaw) {
  ObjectLabel l;
  l.object_class = ObjectClass::Car;
  l.bbox = {100, 100, 200, 180};
  l.dims = {1.5, 1.6, 3.9};
  l.loc = {x, 1.6, z};
  l.rotation_y = yaw;
  return l;
}

double brute_force_ap(std::vector<Detection3D> dets, const std::vector<GroundTruthBox>& gt, double thr,
                      ApInterpolation interp) {
  if (gt.empty()) return dets.empty() ? 100.0 : 0.0;
  std::stable_sort(dets.begin(), dets.end(), [](const auto& a, const auto& b) {
    return a.score != b.score ? a.score > b.score : a.frame_id < b.frame_id;
  });
  // PR point after each rank, re-matching the whole prefix from scratch.
  std::vector<double> rec, prec;
  for (std::size_t k = 1; k <= dets.size(); ++k) {
    std::vector<bool> used(gt.size(), false);
    std::size_t tp = 0;
    for (std::size_t i = 0; i < k; ++i) {
      double best = -1;
      std::size_t hit = gt.size();
      for (std::size_t g = 0; g < gt.size(); ++g) {
        if (used[g] || gt[g].frame_id != dets[i].frame_id) continue;
        const double iou = iou_3d(box_from_label(dets[i].box), box_from_label(gt[g].box));
        if (iou >= thr && iou > best) {
          best = iou;
          hit = g;
        }
      }
      if (hit < gt.size()) {
        used[hit] = true;
        ++tp;
      }
    }
    rec.push_back(static_cast<double>(tp) / gt.size());
    prec.push_back(static_cast<double>(tp) / k);
  }
  const int points = interp == ApInterpolation::Point11 ? 11 : 40;
  double sum = 0;
  for (int i = 0; i < points; ++i) {
    const double r = interp == ApInterpolation::Point11 ? i / 10.0 : (i + 1) / 40.0;
    double best = 0;
    for (std::size_t k = 0; k < rec.size(); ++k) {
      if (rec[k] >= r - 1e-12) best = std::max(best, prec[k]);
    }
    sum += best;
  }
  return 100.0 * sum / points;
}

Outcome map_oracle() {
  Check c;
  Rng rng(1001);
  std::size_t instances = 0;
  for (int t = 0; t < 2000; ++t) {
    std::vector<GroundTruthBox> gt;
    std::vector<Detection3D> dets;
    const std::size_t n_gt = rng.below(5), n_det = rng.below(7);
    for (std::size_t i = 0; i < n_gt; ++i) {
      gt.push_back({rng.below(2) ? "a" : "b", toy_car(-6 + 4.0 * i, 10 + rng.uniform(), 0.2 * rng.normal())});
    }
    for (std::size_t i = 0; i < n_det; ++i) {
      ObjectLabel box;
      std::string frame;
      if (!gt.empty() && rng.uniform() < 0.7) {
        const auto& g = gt[rng.below(gt.size())];
        box = g.box;
        box.loc.x += 0.5 * rng.normal();
        box.loc.z += 0.5 * rng.normal();
        frame = rng.uniform() < 0.9 ? g.frame_id : "b";
      } else {
        box = toy_car(10 * rng.normal(), 10 + 5 * rng.uniform(), rng.normal());
        frame = rng.below(2) ? "a" : "b";
      }
      // Coarse scores so rank ties are exercised.
      dets.push_back({frame, box, static_cast<double>(1 + rng.below(5)) / 5.0});
    }
    for (auto interp : {ApInterpolation::Point11, ApInterpolation::Point40}) {
      for (double thr : {0.5, 0.7}) {
        const double got = average_precision(dets, gt, {thr, interp});
        const double want = brute_force_ap(dets, gt, thr, interp);
        c.expect(std::abs(got - want) <= 1e-9, "AP " + fmt("%.6f", got) + " vs oracle " + fmt("%.6f", want));
      }
    }
    ++instances;
  }
  return c.outcome(std::to_string(instances) + " toy instances x {11,40}-point x IoU {0.5,0.7}");
}

Outcome asr_definitions() {
  Check c;
  bt::TempDir dir;
  bt::write_fixture(dir.path(), {.train = 4, .val = 40, .seed = 1111, .background = false});
  const auto index = split_dataset(dir.path());
  PoisonConfig cfg;
  cfg.phase = PoisonPhase::Inference;
  const auto manifest = plan_poisoning(index, cfg, default_jobs());
  FrameLabels gt;
  for (const auto& id : index.valid_ids) gt[id] = load_frame(index, id).labels;
  auto scored = [](FrameLabels labels) {
    for (auto& [id, ls] : labels) {
      for (auto& l : ls) l.score = 0.9;
    }
    return labels;
  };
  const auto identity = scored(gt);
  FrameLabels empty;
  for (const auto& id : index.valid_ids) empty[id] = {};

  std::ostringstream s;
  s << manifest.vehicle_count() << " attacked vehicles;";
  for (auto goal : {GoalKind::Resizing, GoalKind::DisappearFarther, GoalKind::DisappearCloser}) {
    auto oracle = gt;
    for (const auto& f : manifest.frames) {
      for (const auto& v : f.vehicles) {
        auto& l = oracle[f.frame_id][v.vehicle_index];
        l = transform_label(l, {goal, 0.25});
      }
    }
    const auto r_oracle = evaluate(identity, scored(oracle), gt, manifest, goal);
    const auto r_identity = evaluate(identity, identity, gt, manifest, goal);
    c.expect(r_oracle.asr == 100.0, std::string(to_string(goal)) + fmt(" oracle ASR %.2f", r_oracle.asr));
    c.expect(r_identity.asr <= 5.0, std::string(to_string(goal)) + fmt(" identity ASR %.2f", r_identity.asr));
    s << " " << to_string(goal) << " oracle " << r_oracle.asr << " identity " << r_identity.asr;
    if (goal != GoalKind::Resizing) {
      const auto r_empty = evaluate(empty, empty, gt, manifest, goal);
      c.expect(r_empty.asr == 100.0, fmt("empty-detector ASR %.2f", r_empty.asr));
      c.expect(r_empty.poisoned_map == 0.0, fmt("empty-detector poisoned mAP %.2f", r_empty.poisoned_map));
    }
  }
  c.expect(manifest.vehicle_count() > 0, "no attacked vehicles");
  return c.outcome(s.str());
}

Outcome defense_bounds() {
  Check c;
  const auto frames = bt::make_frames({.train = 20, .val = 0, .seed = 1212});
  double worst_colour = 0;
  int worst_delta = 0;
  for (const auto& f : frames) {
    const DefenseSpec noise{DefenseKind::GaussianNoise, 10, 60, 5};
    const auto noisy = apply_defense_to_image(f.image, noise, f.frame_id);
    for (std::size_t i = 0; i < f.image.pixels.size(); ++i) {
      worst_delta = std::max(worst_delta, std::abs(int(noisy.pixels[i]) - int(f.image.pixels[i])));
    }
    c.expect(apply_defense_to_image(f.image, {DefenseKind::GaussianNoise, 0}, f.frame_id) == f.image,
             "level 0 not identity");

    std::optional<std::size_t> vehicle;
    for (std::size_t i = 0; i < f.labels.size() && !vehicle; ++i) {
      if (f.labels[i].object_class == ObjectClass::Car && !vehicle_points(f, i).entries.empty()) vehicle = i;
    }
    if (!vehicle) continue;
    const auto trigger = make_trigger(15, 15);
    const auto placement = place_lidar_aware(f, trigger, *vehicle);
    const auto poisoned = composite_trigger(f.image, trigger, placement.region);
    const auto out = apply_defense_to_image(poisoned, {DefenseKind::JpegCompress, 10, 60}, f.frame_id);
    c.expect(out.width == poisoned.width && out.height == poisoned.height, "JPEG changed dimensions");
    const auto r = pixel_rect(placement.region);
    double sum[3] = {0, 0, 0};
    for (int y = r.top; y < r.bottom(); ++y) {
      for (int x = r.left; x < r.right(); ++x) {
        sum[0] += out.at(x, y).r;
        sum[1] += out.at(x, y).g;
        sum[2] += out.at(x, y).b;
      }
    }
    const double n = r.width * r.height;
    const double d = std::sqrt(std::pow(sum[0] / n - trigger.base_color.r, 2) +
                               std::pow(sum[1] / n - trigger.base_color.g, 2) +
                               std::pow(sum[2] / n - trigger.base_color.b, 2));
    worst_colour = std::max(worst_colour, d);
    c.expect(d <= 15.0, fmt("trigger colour distance %.2f", d));
  }
  c.expect(worst_delta <= 10, "noise exceeded +-10");
  return c.outcome("max |delta| " + std::to_string(worst_delta) + ", worst JPEG-60 trigger colour distance " +
                   fmt("%.2f", worst_colour));
}

Outcome real_dataset() {
  const char* env = std::getenv("BADFUSION_ROOT");
  if (!env || !*env || !fs::exists(env)) return {Status::Skip, "BADFUSION_ROOT not set or missing"};
  Check c;
  const auto index = split_dataset(env);
  c.expect(index.train_ids.size() == 3712, "train split " + std::to_string(index.train_ids.size()));
  c.expect(index.valid_ids.size() == 3769, "val split " + std::to_string(index.valid_ids.size()));

  std::vector<std::size_t> counts15, counts20;
  std::mutex mu;
  const auto t15 = make_trigger(15, 15), t20 = make_trigger(20, 20);
  parallel_for(index.train_ids.size(), default_jobs(), [&](std::size_t k) {
    const auto frame = load_frame(index, index.train_ids[k]);
    const auto proj = project_frame(frame);
    std::vector<std::size_t> a, b;
    for (std::size_t i = 0; i < frame.labels.size(); ++i) {
      const auto& l = frame.labels[i];
      const auto d = classify_difficulty(l);
      if (l.object_class != ObjectClass::Car || (d != Difficulty::Easy && d != Difficulty::Moderate)) continue;
      if (vehicle_points(proj, frame, i).entries.empty()) continue;
      a.push_back(effective_pixels_for(proj, frame, place_lidar_aware(proj, frame, t15, i)));
      b.push_back(effective_pixels_for(proj, frame, place_lidar_aware(proj, frame, t20, i)));
    }
    std::lock_guard lock(mu);
    counts15.insert(counts15.end(), a.begin(), a.end());
    counts20.insert(counts20.end(), b.begin(), b.end());
  });
  std::ostringstream s;
  s << index.train_ids.size() << "/" << index.valid_ids.size() << " frames";
  if (!counts15.empty()) {
    const auto s15 = survival_stats(counts15), s20 = survival_stats(counts20);
    c.expect(s15.max <= 60, "15x15 max " + std::to_string(s15.max));
    c.expect(s15.mode_lower >= 25 && s15.mode_lower + kHistogramBinWidth <= 35,
             "15x15 mode bin " + std::to_string(s15.mode_lower));
    c.expect(s20.max <= 80, "20x20 max " + std::to_string(s20.max));
    c.expect(s20.mode_lower >= 38 && s20.mode_lower + kHistogramBinWidth <= 55,
             "20x20 mode bin " + std::to_string(s20.mode_lower));
    s << "; 15x15 range [" << s15.min << ", " << s15.max << "] mode [" << s15.mode_lower << ", "
      << s15.mode_lower + 5 << "); 20x20 range [" << s20.min << ", " << s20.max << "] mode [" << s20.mode_lower
      << ", " << s20.mode_lower + 5 << ")";
  } else {
    c.expect(false, "no eligible vehicles");
  }
  return c.outcome(s.str());
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"format-round-trip", format_round_trip},
      {"projection-oracle", projection_oracle},
      {"densest-window-optimality", densest_optimality},
      {"compositing", compositing},
      {"label-transforms", label_transforms},
      {"poison-rate-conservation", poison_rate_conservation},
      {"selection-distribution", selection_distribution},
      {"iou-oracles", iou_oracles},
      {"map-oracle", map_oracle},
      {"asr-definitions", asr_definitions},
      {"defense-bounds", defense_bounds},
      {"real-dataset-statistics", real_dataset},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {Status::Fail, std::string("exception: ") + e.what()};
    }
    const char* tag = o.status == Status::Pass ? "PASS" : o.status == Status::Skip ? "SKIP" : "FAIL";
    failed += o.status == Status::Fail;
    std::cout << tag << "  " << name << "  " << o.detail << std::endl;
  }
  std::cout << (failed ? "FAILED " : "ALL PASSED ") << "(" << failed << " failing of " << criteria.size() << ")"
            << std::endl;
  return failed ? 1 : 0;
}
