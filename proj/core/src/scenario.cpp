#include "segway/scenario.hpp"

#include <array>
#include <cmath>
#include <filesystem>

#include "segway/report.hpp"

namespace segway::sim {

namespace {

constexpr std::array<std::string_view, 21> kScenarioKeys = {
    "plant",          "controller",         "controller.gains", "controller.scale",
    "controller.filter_pole", "controller.filter_gain", "controller.sample_dt",
    "controller.saturation",  "k_bar",      "tilt.mode",        "tilt",
    "coupling_gain",  "dt",                 "duration",         "quantize",
    "counts_per_rev", "seed",               "x0",               "empirical_gain",
    "kind",           "note"};

template <typename Fn>
auto with_line(const KeyValueDocument& doc, std::string_view key, Fn&& fn) {
  try {
    return fn();
  } catch (const ParseError& e) {
    // File-level failures (unreadable file) point at the line that named the file.
    const auto* entry = doc.find(key);
    if (e.line() != 0 || entry == nullptr) throw;
    throw ParseError(doc.source(), entry->line, e.what());
  } catch (const std::exception& e) {
    const auto* entry = doc.find(key);
    throw ParseError(doc.source(), entry ? entry->line : 0, e.what());
  }
}

}  // namespace

std::string resolve_path(const std::string& base_dir, const std::string& path) {
  const std::filesystem::path p(path);
  if (p.is_absolute() || base_dir.empty()) return p.lexically_normal().string();
  return (std::filesystem::path(base_dir) / p).lexically_normal().string();
}

Scenario default_scenario() { return Scenario{}; }

Scenario Scenario::parse(const std::string& text, const std::string& source,
                         const std::string& base_dir) {
  return from_document(KeyValueDocument::parse(text, source), base_dir);
}

Scenario Scenario::load(const std::string& path) {
  const auto dir = std::filesystem::path(path).parent_path().string();
  auto s = from_document(KeyValueDocument::load(path), dir);
  s.referenced_files.insert(s.referenced_files.begin(), path);
  return s;
}

Scenario Scenario::from_document(const KeyValueDocument& doc, const std::string& base_dir) {
  doc.require_known_keys(kScenarioKeys);
  Scenario s;

  s.plant_id = doc.get_string("plant", "ecp220");
  if (s.plant_id == "ecp220") {
    s.plant = preset_ecp220();
  } else {
    const auto path = resolve_path(base_dir, s.plant_id);
    s.plant = with_line(doc, "plant", [&] { return assemble_linear_model(PendulumParams::load(path)); });
    s.referenced_files.push_back(path);
  }

  s.controller_source = doc.get_string("controller", "paper");
  if (s.controller_source == "paper") {
    s.controller = paper_controller();
    s.k_bar = lmi::paper_gain_set().k_bar;
  } else if (s.controller_source == "inline") {
    s.controller = ControllerConfig::read(doc);
  } else {
    const auto path = resolve_path(base_dir, s.controller_source);
    const auto report = with_line(doc, "controller", [&] { return SynthesisReport::load(path); });
    s.referenced_files.push_back(path);
    const auto defaults = paper_controller();
    s.controller = from_gain_set(report.gains, defaults.scale, defaults.filter_pole,
                                 defaults.filter_gain, defaults.sample_dt);
    s.k_bar = report.gains.k_bar;
  }
  if (s.controller_source != "inline") {
    if (doc.contains("controller.gains")) {
      doc.fail(*doc.find("controller.gains"), "only allowed with controller = inline");
    }
    s.controller.scale = doc.get_double("controller.scale", s.controller.scale);
    s.controller.filter_pole = doc.get_double("controller.filter_pole", s.controller.filter_pole);
    s.controller.filter_gain = doc.get_double("controller.filter_gain", s.controller.filter_gain);
    s.controller.sample_dt = doc.get_double("controller.sample_dt", s.controller.sample_dt);
    if (doc.contains("controller.saturation")) {
      s.controller.saturation = doc.get_double("controller.saturation");
    }
    with_line(doc, "controller", [&] {
      s.controller.validate();
      return 0;
    });
  }
  if (doc.contains("k_bar")) {
    const auto k = doc.get_doubles("k_bar", 4);
    s.k_bar = RowVector4(k[0], k[1], k[2], k[3]);
  }

  const auto mode = doc.get_string("tilt.mode", "step");
  if (mode == "step") {
    s.disturbance.mode = TiltInterpolation::kStep;
  } else if (mode == "linear") {
    s.disturbance.mode = TiltInterpolation::kLinear;
  } else {
    doc.fail(*doc.find("tilt.mode"), "expected 'step' or 'linear'");
  }
  const auto breakpoints = doc.find_all("tilt");
  if (!breakpoints.empty()) {
    s.disturbance.schedule.clear();
    for (const auto* e : breakpoints) {
      const auto v = parse_doubles(e->value, doc.source(), e->line);
      if (v.size() != 2) doc.fail(*e, "expected 't phi'");
      if (!s.disturbance.schedule.empty() && v[0] < s.disturbance.schedule.back().t) {
        doc.fail(*e, "breakpoints must be time-sorted");
      }
      if (std::abs(v[1]) > kMaxTilt) doc.fail(*e, "|phi| must not exceed pi/2");
      s.disturbance.schedule.push_back({v[0], v[1]});
    }
  }
  s.disturbance.coupling_gain = doc.get_double("coupling_gain", s.disturbance.coupling_gain);

  s.config.dt = doc.get_double("dt", s.config.dt);
  s.config.duration = doc.get_double("duration", s.config.duration);
  s.config.quantize = doc.get_bool("quantize", s.config.quantize);
  s.config.counts_per_rev = static_cast<int>(doc.get_int("counts_per_rev", s.config.counts_per_rev));
  s.config.rng_seed = static_cast<std::uint64_t>(doc.get_int("seed", static_cast<long long>(s.config.rng_seed)));
  with_line(doc, "dt", [&] {
    s.config.validate();
    const double ratio = s.controller.sample_dt / s.config.dt;
    if (std::abs(ratio - std::round(ratio)) > 1e-6 * ratio || std::round(ratio) < 1.0) {
      throw std::invalid_argument("controller sample_dt must be an integer multiple of dt");
    }
    return 0;
  });
  if (doc.contains("x0")) {
    const auto x = doc.get_doubles("x0", 4);
    s.x0 = {x[0], x[1], x[2], x[3]};
  }
  s.empirical_gain = doc.get_bool("empirical_gain", false);
  if (s.empirical_gain && !s.k_bar) {
    doc.fail(*doc.find("empirical_gain"), "needs a full-information gain (k_bar or a report controller)");
  }
  return s;
}

KeyValueDocument Scenario::to_document() const {
  KeyValueDocument doc;
  doc.add("kind", std::string("scenario"));
  doc.add("plant", plant_id);
  doc.add("controller", std::string("inline"));
  controller.write(doc);
  if (k_bar) doc.add("k_bar", std::span<const double>(k_bar->data(), 4));
  doc.add("tilt.mode", std::string(disturbance.mode == TiltInterpolation::kStep ? "step" : "linear"));
  for (const auto& b : disturbance.schedule) {
    doc.add("tilt", format_exact(b.t) + " " + format_exact(b.phi));
  }
  doc.add("coupling_gain", disturbance.coupling_gain);
  doc.add("dt", config.dt);
  doc.add("duration", config.duration);
  doc.add("quantize", std::string(config.quantize ? "true" : "false"));
  doc.add("counts_per_rev", std::to_string(config.counts_per_rev));
  doc.add("seed", std::to_string(config.rng_seed));
  const Vector4 x = x0.vector();
  doc.add("x0", std::span<const double>(x.data(), 4));
  doc.add("empirical_gain", std::string(empirical_gain ? "true" : "false"));
  return doc;
}

}  // namespace segway::sim
