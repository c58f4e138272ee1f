#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "badfusion/error.hpp"
#include "badfusion/poisoning.hpp"
#include "badfusion/rng.hpp"

namespace badfusion {
namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI); }

// Skew-normal density with location/scale/shape.
double skew_normal_pdf(double x, double loc, double scale, double shape) {
  const double z = (x - loc) / scale;
  return 2.0 / scale * normal_pdf(z) * normal_cdf(shape * z);
}

// Simpson's rule; bins are 5 wide so 64 panels is far below the histogram's
// resolution.
double integrate_skew_normal(double a, double b, double loc, double scale, double shape) {
  constexpr int kPanels = 64;
  const double h = (b - a) / kPanels;
  double sum = skew_normal_pdf(a, loc, scale, shape) + skew_normal_pdf(b, loc, scale, shape);
  for (int i = 1; i < kPanels; ++i) {
    sum += (i % 2 ? 4.0 : 2.0) * skew_normal_pdf(a + i * h, loc, scale, shape);
  }
  return sum * h / 3.0;
}

constexpr double kSkewShape = 4.0;

}  // namespace

std::size_t poison_frame_count(double rate, std::size_t split_size) noexcept {
  return static_cast<std::size_t>(std::llround(rate * static_cast<double>(split_size)));
}

std::vector<double> target_bin_probabilities(const SelectionSpec& spec, std::size_t num_bins) {
  std::vector<double> p(num_bins, 0.0);
  if (num_bins == 0) return p;
  for (std::size_t b = 0; b < num_bins; ++b) {
    const double lo = static_cast<double>(b) * kHistogramBinWidth;
    const double hi = lo + kHistogramBinWidth;
    switch (spec.kind) {
      case SelectionKind::Normal:
        p[b] = normal_cdf((hi - spec.mean) / spec.std) - normal_cdf((lo - spec.mean) / spec.std);
        break;
      case SelectionKind::LeftSkewed:
        p[b] = integrate_skew_normal(lo, hi, spec.mean, spec.std, -kSkewShape);
        break;
      case SelectionKind::RightSkewed:
        p[b] = integrate_skew_normal(lo, hi, spec.mean, spec.std, kSkewShape);
        break;
      case SelectionKind::Random:
        p[b] = 1.0;
        break;
    }
  }
  const double total = std::accumulate(p.begin(), p.end(), 0.0);
  if (!(total > 0.0)) {
    std::fill(p.begin(), p.end(), 1.0 / static_cast<double>(num_bins));
  } else {
    for (auto& v : p) v /= total;
  }
  return p;
}

double histogram_l1(std::span<const std::size_t> selected_bins, std::span<const double> probabilities,
                    std::size_t n) {
  double l1 = 0.0;
  for (std::size_t b = 0; b < probabilities.size(); ++b) {
    const double have = b < selected_bins.size() ? static_cast<double>(selected_bins[b]) : 0.0;
    l1 += std::abs(have - static_cast<double>(n) * probabilities[b]);
  }
  return l1;
}

std::vector<std::string> select_poison_frames(std::span<const SelectionCandidate> candidates,
                                              const PoisonConfig& config, std::size_t count) {
  if (candidates.size() < count) {
    throw Error(ErrorKind::InsufficientCandidates,
                std::to_string(candidates.size()) + " candidates for " + std::to_string(count) +
                    " poisoned frames");
  }
  Rng rng(config.rng_seed);
  std::vector<std::string> chosen;

  if (config.selection.kind == SelectionKind::Random || count == candidates.size()) {
    std::vector<std::size_t> order(candidates.size());
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    for (std::size_t i = 0; i < count; ++i) chosen.push_back(candidates[order[i]].frame_id);
    std::sort(chosen.begin(), chosen.end());
    return chosen;
  }

  // Bucket candidates; the in-bucket order is a seeded shuffle of the
  // id-sorted members so the result does not depend on input order.
  std::size_t num_bins = 0;
  for (const auto& c : candidates) {
    num_bins = std::max(num_bins, c.effective_pixels / kHistogramBinWidth + 1);
  }
  std::vector<std::vector<std::string>> buckets(num_bins);
  for (const auto& c : candidates) buckets[c.effective_pixels / kHistogramBinWidth].push_back(c.frame_id);
  for (auto& b : buckets) {
    std::sort(b.begin(), b.end());
    rng.shuffle(b);
  }

  const auto p = target_bin_probabilities(config.selection, num_bins);
  std::vector<double> target(num_bins);
  for (std::size_t b = 0; b < num_bins; ++b) target[b] = static_cast<double>(count) * p[b];
  std::vector<std::size_t> take(num_bins, 0);

  // Greedy: fill the bin with the largest remaining deficit.
  for (std::size_t k = 0; k < count; ++k) {
    std::size_t best = num_bins;
    double best_deficit = 0.0;
    for (std::size_t b = 0; b < num_bins; ++b) {
      if (take[b] >= buckets[b].size()) continue;
      const double deficit = target[b] - static_cast<double>(take[b]);
      if (best == num_bins || deficit > best_deficit) {
        best = b;
        best_deficit = deficit;
      }
    }
    ++take[best];
  }

  // Single-swap descent: move one selection from bin a to bin b while that
  // lowers the L1 distance.
  auto cost = [&](std::size_t b, std::size_t have) {
    return std::abs(static_cast<double>(have) - target[b]);
  };
  constexpr double kEps = 1e-12;
  for (;;) {
    double best_delta = -kEps;
    std::size_t from = num_bins, to = num_bins;
    for (std::size_t a = 0; a < num_bins; ++a) {
      if (take[a] == 0) continue;
      const double remove = cost(a, take[a] - 1) - cost(a, take[a]);
      for (std::size_t b = 0; b < num_bins; ++b) {
        if (b == a || take[b] >= buckets[b].size()) continue;
        const double delta = remove + cost(b, take[b] + 1) - cost(b, take[b]);
        if (delta < best_delta) {
          best_delta = delta;
          from = a;
          to = b;
        }
      }
    }
    if (from == num_bins) break;
    --take[from];
    ++take[to];
  }

  for (std::size_t b = 0; b < num_bins; ++b) {
    chosen.insert(chosen.end(), buckets[b].begin(), buckets[b].begin() + static_cast<std::ptrdiff_t>(take[b]));
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

}  // namespace badfusion
