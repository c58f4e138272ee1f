#include "badfusion/attack_config.hpp"

#include <cmath>

#include "badfusion/error.hpp"
#include "json_convert.hpp"

using nlohmann::json;

namespace badfusion {

std::string_view to_string(GoalKind k) noexcept {
  switch (k) {
    case GoalKind::Resizing: return "Resizing";
    case GoalKind::DisappearFarther: return "DisappearFarther";
    case GoalKind::DisappearCloser: return "DisappearCloser";
  }
  return "Resizing";
}

std::string_view to_string(SelectionKind k) noexcept {
  switch (k) {
    case SelectionKind::Normal: return "Normal";
    case SelectionKind::LeftSkewed: return "LeftSkewed";
    case SelectionKind::RightSkewed: return "RightSkewed";
    case SelectionKind::Random: return "Random";
  }
  return "Normal";
}

std::string_view to_string(PoisonPhase p) noexcept {
  return p == PoisonPhase::Train ? "train" : "inference";
}

std::optional<GoalKind> goal_kind_from_string(std::string_view s) noexcept {
  for (auto k : {GoalKind::Resizing, GoalKind::DisappearFarther, GoalKind::DisappearCloser}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

std::optional<SelectionKind> selection_kind_from_string(std::string_view s) noexcept {
  for (auto k : {SelectionKind::Normal, SelectionKind::LeftSkewed, SelectionKind::RightSkewed,
                 SelectionKind::Random}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

std::optional<PoisonPhase> poison_phase_from_string(std::string_view s) noexcept {
  if (s == "train") return PoisonPhase::Train;
  if (s == "inference") return PoisonPhase::Inference;
  return std::nullopt;
}

void validate(const PoisonConfig& c) {
  auto fail = [](const std::string& what) { throw Error(ErrorKind::InvalidArgument, what); };
  if (!(c.goal.resize_factor > 0.0 && c.goal.resize_factor < 1.0)) {
    fail("resize_factor must lie in (0, 1)");
  }
  if (!(c.poison_rate > 0.0 && c.poison_rate <= 1.0)) fail("poison_rate must lie in (0, 1]");
  if (c.selection.kind != SelectionKind::Random && !(c.selection.std > 0.0)) {
    fail("selection std must be > 0");
  }
  if (!std::isfinite(c.selection.mean)) fail("selection mean must be finite");
  if (c.stride < 1) fail("stride must be >= 1");
  // Re-validates dims and overlay through the factory.
  (void)make_trigger(c.trigger.width, c.trigger.height, c.trigger.base_color, c.trigger.overlay);
}

namespace detail {

json rgb_to_json(Rgb c) { return json::array({c.r, c.g, c.b}); }

Rgb rgb_from_json(const json& j, const char* where) {
  if (!j.is_array() || j.size() != 3) {
    throw Error(ErrorKind::ParseError, std::string(where) + ": color must be [r, g, b]");
  }
  std::uint8_t v[3];
  for (int i = 0; i < 3; ++i) {
    if (!j[i].is_number_integer() || j[i].get<long long>() < 0 || j[i].get<long long>() > 255) {
      throw Error(ErrorKind::ParseError, std::string(where) + ": color channels must be 0..255");
    }
    v[i] = static_cast<std::uint8_t>(j[i].get<int>());
  }
  return {v[0], v[1], v[2]};
}

json to_json(const PoisonConfig& c) {
  json overlay = json::array();
  for (const auto& [pos, color] : c.trigger.overlay) {
    overlay.push_back({{"dx", pos.first}, {"dy", pos.second}, {"color", rgb_to_json(color)}});
  }
  json doc = {
      {"goal", {{"kind", to_string(c.goal.kind)}, {"resize_factor", c.goal.resize_factor}}},
      {"poison_rate", c.poison_rate},
      {"trigger",
       {{"width", c.trigger.width},
        {"height", c.trigger.height},
        {"color", rgb_to_json(c.trigger.base_color)},
        {"overlay", overlay}}},
      {"selection",
       {{"kind", to_string(c.selection.kind)},
        {"mean", c.selection.mean},
        {"std", c.selection.std}}},
      {"placement_source", to_string(c.placement_source)},
      {"stride", c.stride},
      {"phase", to_string(c.phase)},
      {"rng_seed", c.rng_seed},
  };
  if (c.predictions) doc["predictions"] = c.predictions->generic_string();
  return doc;
}

namespace {

template <typename T>
T get_or(const json& obj, const char* key, T fallback, const char* where) {
  const auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorKind::ParseError, std::string(where) + "." + key + " has the wrong type");
  }
}

const json& object_or_empty(const json& obj, const char* key) {
  static const json empty = json::object();
  const auto it = obj.find(key);
  if (it == obj.end()) return empty;
  if (!it->is_object()) throw Error(ErrorKind::ParseError, std::string(key) + " must be an object");
  return *it;
}

}  // namespace

PoisonConfig poison_config_from_json(const json& doc) {
  if (!doc.is_object()) throw Error(ErrorKind::ParseError, "config must be a JSON object");
  PoisonConfig c;

  const auto& goal = object_or_empty(doc, "goal");
  const auto goal_name = get_or<std::string>(goal, "kind", std::string(to_string(c.goal.kind)), "goal");
  const auto kind = goal_kind_from_string(goal_name);
  if (!kind) throw Error(ErrorKind::ParseError, "unknown goal kind '" + goal_name + "'");
  c.goal.kind = *kind;
  c.goal.resize_factor = get_or<double>(goal, "resize_factor", c.goal.resize_factor, "goal");

  c.poison_rate = get_or<double>(doc, "poison_rate", c.poison_rate, "config");

  const auto& trig = object_or_empty(doc, "trigger");
  const int width = get_or<int>(trig, "width", c.trigger.width, "trigger");
  const int height = get_or<int>(trig, "height", c.trigger.height, "trigger");
  Rgb color = c.trigger.base_color;
  if (trig.contains("color")) color = rgb_from_json(trig["color"], "trigger.color");
  std::map<Pixel, Rgb> overlay;
  if (const auto it = trig.find("overlay"); it != trig.end()) {
    if (!it->is_array()) throw Error(ErrorKind::ParseError, "trigger.overlay must be an array");
    for (const auto& o : *it) {
      if (!o.is_object()) throw Error(ErrorKind::ParseError, "trigger.overlay entries must be objects");
      const int dx = get_or<int>(o, "dx", 0, "trigger.overlay");
      const int dy = get_or<int>(o, "dy", 0, "trigger.overlay");
      overlay[{dx, dy}] = rgb_from_json(o.value("color", json()), "trigger.overlay.color");
    }
  }
  c.trigger = make_trigger(width, height, color, std::move(overlay));

  const auto& sel = object_or_empty(doc, "selection");
  const auto sel_name = get_or<std::string>(sel, "kind", std::string(to_string(c.selection.kind)), "selection");
  const auto sel_kind = selection_kind_from_string(sel_name);
  if (!sel_kind) throw Error(ErrorKind::ParseError, "unknown selection kind '" + sel_name + "'");
  c.selection.kind = *sel_kind;
  c.selection.mean = get_or<double>(sel, "mean", c.selection.mean, "selection");
  c.selection.std = get_or<double>(sel, "std", c.selection.std, "selection");

  const auto src_name = get_or<std::string>(doc, "placement_source", "LidarAware", "config");
  const auto src = placement_source_from_string(src_name);
  if (!src) throw Error(ErrorKind::ParseError, "unknown placement_source '" + src_name + "'");
  c.placement_source = *src;

  if (const auto it = doc.find("predictions"); it != doc.end() && !it->is_null()) {
    if (!it->is_string()) throw Error(ErrorKind::ParseError, "predictions must be a path string");
    c.predictions = std::filesystem::path(it->get<std::string>());
  }
  c.stride = get_or<int>(doc, "stride", c.stride, "config");
  const auto phase_name = get_or<std::string>(doc, "phase", "train", "config");
  const auto phase = poison_phase_from_string(phase_name);
  if (!phase) throw Error(ErrorKind::ParseError, "unknown phase '" + phase_name + "'");
  c.phase = *phase;
  c.rng_seed = get_or<std::uint64_t>(doc, "rng_seed", c.rng_seed, "config");

  validate(c);
  return c;
}

}  // namespace detail

PoisonConfig parse_poison_config(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::ParseError, std::string("config is not valid JSON: ") + e.what());
  }
  return detail::poison_config_from_json(doc);
}

std::string format_poison_config(const PoisonConfig& config) {
  return detail::to_json(config).dump(2) + "\n";
}

}  // namespace badfusion
