#pragma once

// Synthesis and analysis reports plus run manifests, all in the key/value
// text format of text_format.hpp.

#include <complex>
#include <optional>
#include <string>
#include <vector>

#include "segway/hinf_analysis.hpp"
#include "segway/lmi_synthesis.hpp"
#include "segway/plant_model.hpp"
#include "segway/text_format.hpp"

namespace segway {

const char* tool_version();

void write_state_space(KeyValueDocument& doc, const StateSpace& ss);
/// Throws ParseError if a matrix is missing, mis-sized or breaks the plant invariants.
StateSpace read_state_space(const KeyValueDocument& doc);

struct SynthesisReport {
  std::string plant_id = "ecp220";
  StateSpace plant = preset_ecp220();
  lmi::GainSet gains;
  std::optional<lmi::LmiDecision> decision;
  std::optional<double> lmi_lambda_max;
  std::vector<std::complex<double>> closed_loop_eigenvalues;  // A + B2 K_bar
  std::vector<lmi::SynthesisResult::Probe> probes;

  KeyValueDocument to_document() const;
  static SynthesisReport from_document(const KeyValueDocument& doc);
  void save(const std::string& path) const;
  static SynthesisReport load(const std::string& path);
};

SynthesisReport make_synthesis_report(const std::string& plant_id, const StateSpace& ss,
                                      const lmi::SynthesisResult& result);

/// Report carrying the published full-information gain on the preset plant (no certificate).
SynthesisReport paper_report();

struct AnalysisReport {
  std::vector<std::complex<double>> full_information_eigenvalues;
  double full_information_abscissa = 0.0;
  bool full_information_hurwitz = false;
  std::vector<std::complex<double>> output_feedback_eigenvalues;
  hinf::NavigationSpectrum navigation;
  bool navigation_ok = false;  // one zero eigenvalue, the rest strictly stable
  std::optional<double> hinf_norm;
  std::optional<double> gamma;
  std::optional<double> dissipation_residual;

  KeyValueDocument to_document() const;
};

AnalysisReport analyze(const SynthesisReport& report);

struct RunManifest {
  std::string command;
  std::vector<std::string> config_paths;
  std::uint64_t seed = 0;
  std::string tool_version = segway::tool_version();
  std::vector<std::string> outputs;
  std::vector<std::pair<std::string, std::string>> extra;

  KeyValueDocument to_document() const;
  void save(const std::string& path) const;
};

}  // namespace segway
