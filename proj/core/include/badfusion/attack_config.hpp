#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "badfusion/trigger.hpp"

namespace badfusion {

enum class GoalKind { Resizing, DisappearFarther, DisappearCloser };

struct AttackGoal {
  GoalKind kind = GoalKind::Resizing;
  double resize_factor = 0.25;  // per dimension, in (0, 1)
};

enum class SelectionKind { Normal, LeftSkewed, RightSkewed, Random };

/// Target shape for the effective-pixel histogram of the poisoned frames.
/// For the skewed kinds, mean/std are the location/scale of a skew-normal.
struct SelectionSpec {
  SelectionKind kind = SelectionKind::Normal;
  double mean = 30.0;
  double std = 5.0;
};

/// Train: poison a fraction of the training split and transform labels.
/// Inference: put triggers on every evaluable validation car, labels intact.
enum class PoisonPhase { Train, Inference };

struct PoisonConfig {
  AttackGoal goal;
  double poison_rate = 0.15;
  TriggerSpec trigger = TriggerSpec{15, 15, kDefaultTriggerColor, {}};
  SelectionSpec selection;
  PlacementSource placement_source = PlacementSource::LidarAware;
  std::optional<std::filesystem::path> predictions;
  int stride = 1;
  PoisonPhase phase = PoisonPhase::Train;
  std::uint64_t rng_seed = 0;
};

std::string_view to_string(GoalKind k) noexcept;
std::string_view to_string(SelectionKind k) noexcept;
std::string_view to_string(PoisonPhase p) noexcept;
std::optional<GoalKind> goal_kind_from_string(std::string_view s) noexcept;
std::optional<SelectionKind> selection_kind_from_string(std::string_view s) noexcept;
std::optional<PoisonPhase> poison_phase_from_string(std::string_view s) noexcept;

/// Throws InvalidArgument on any violated invariant.
void validate(const PoisonConfig& config);

/// JSON form shared by recipe files and the manifest's config echo:
///
///   {"goal": {"kind": "Resizing", "resize_factor": 0.25},
///    "poison_rate": 0.15,
///    "trigger": {"width": 15, "height": 15, "color": [255, 0, 0],
///                "overlay": [{"dx": 0, "dy": 0, "color": [0, 0, 0]}]},
///    "selection": {"kind": "Normal", "mean": 30, "std": 5},
///    "placement_source": "LidarAware", "predictions": "preds.json",
///    "stride": 1, "phase": "train", "rng_seed": 0}
///
/// Every key is optional when parsing; missing keys keep their defaults.
PoisonConfig parse_poison_config(std::string_view json_text);
std::string format_poison_config(const PoisonConfig& config);

}  // namespace badfusion
