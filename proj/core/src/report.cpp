#include "segway/report.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace segway {

namespace {

template <typename Derived>
std::vector<double> row_major(const Eigen::MatrixBase<Derived>& m) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out.push_back(m(i, j));
  }
  return out;
}

template <typename Matrix>
Matrix read_matrix(const KeyValueDocument& doc, std::string_view key) {
  Matrix m;
  const auto values = doc.get_doubles(key, static_cast<std::size_t>(m.size()));
  std::size_t k = 0;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = values[k++];
  }
  return m;
}

void sort_spectrum(std::vector<std::complex<double>>& ev) {
  std::sort(ev.begin(), ev.end(), [](const auto& a, const auto& b) {
    return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
  });
}

void write_spectrum(KeyValueDocument& doc, const std::string& key,
                    const std::vector<std::complex<double>>& ev) {
  std::vector<double> re;
  std::vector<double> im;
  for (const auto& l : ev) {
    re.push_back(l.real());
    im.push_back(l.imag());
  }
  doc.add(key + ".re", re);
  doc.add(key + ".im", im);
}

std::vector<std::complex<double>> read_spectrum(const KeyValueDocument& doc, const std::string& key) {
  if (!doc.contains(key + ".re")) return {};
  const auto re = doc.get_doubles(key + ".re");
  const auto im = doc.get_doubles(key + ".im", re.size());
  std::vector<std::complex<double>> out;
  for (std::size_t i = 0; i < re.size(); ++i) out.emplace_back(re[i], im[i]);
  return out;
}

}  // namespace

const char* tool_version() { return "segway-lab 0.3.0"; }

void write_state_space(KeyValueDocument& doc, const StateSpace& ss) {
  doc.add("plant.A", row_major(ss.A));
  doc.add("plant.B1", row_major(ss.B1));
  doc.add("plant.B2", row_major(ss.B2));
  doc.add("plant.C1", row_major(ss.C1));
  doc.add("plant.C2", row_major(ss.C2));
  doc.add("plant.D12", row_major(ss.D12));
}

StateSpace read_state_space(const KeyValueDocument& doc) {
  StateSpace ss;
  ss.A = read_matrix<Matrix4>(doc, "plant.A");
  ss.B1 = read_matrix<Vector4>(doc, "plant.B1");
  ss.B2 = read_matrix<Vector4>(doc, "plant.B2");
  ss.C1 = read_matrix<Matrix34>(doc, "plant.C1");
  ss.C2 = read_matrix<Matrix34>(doc, "plant.C2");
  ss.D12 = read_matrix<Vector3>(doc, "plant.D12");
  try {
    ss.check_invariants();
  } catch (const std::invalid_argument& e) {
    throw ParseError(doc.source(), doc.find("plant.A")->line, std::string("plant: ") + e.what());
  }
  return ss;
}

KeyValueDocument SynthesisReport::to_document() const {
  KeyValueDocument doc;
  doc.add_comment(std::string(tool_version()) + " synthesis report");
  doc.add("kind", std::string("synthesis"));
  doc.add("plant", plant_id);
  write_state_space(doc, plant);
  doc.add_comment("u = k_bar x (full information); u = k_out [theta1_dot theta2 theta2_dot]");
  doc.add("gamma", gains.gamma_achieved);
  doc.add("k_bar", row_major(gains.k_bar));
  doc.add("k_out", row_major(gains.k_out));
  if (lmi_lambda_max) doc.add("lmi.lambda_max", *lmi_lambda_max);
  if (decision) {
    doc.add("lmi.Y", row_major(decision->Y));
    doc.add("lmi.V", row_major(decision->V));
    doc.add("lmi.N", row_major(decision->N));
    doc.add("lmi.P", row_major(decision->P));
  }
  write_spectrum(doc, "closed_loop.eig", closed_loop_eigenvalues);
  if (!probes.empty()) {
    std::vector<double> g;
    std::vector<double> f;
    for (const auto& p : probes) {
      g.push_back(p.gamma);
      f.push_back(p.feasible ? 1.0 : 0.0);
    }
    doc.add("bisection.gamma", g);
    doc.add("bisection.feasible", f);
  }
  return doc;
}

SynthesisReport SynthesisReport::from_document(const KeyValueDocument& doc) {
  static constexpr std::array<std::string_view, 20> kKeys = {
      "kind",     "plant",          "plant.A",  "plant.B1",        "plant.B2",
      "plant.C1", "plant.C2",       "plant.D12", "gamma",          "k_bar",
      "k_out",    "lmi.lambda_max", "lmi.Y",    "lmi.V",           "lmi.N",
      "lmi.P",    "closed_loop.eig.re", "closed_loop.eig.im", "bisection.gamma",
      "bisection.feasible"};
  doc.require_known_keys(kKeys);
  if (const auto* kind = doc.find("kind"); kind != nullptr && kind->value != "synthesis") {
    doc.fail(*kind, "expected 'synthesis'");
  }
  SynthesisReport r;
  r.plant_id = doc.get_string("plant", "custom");
  r.plant = read_state_space(doc);
  r.gains.k_bar = read_matrix<RowVector4>(doc, "k_bar");
  r.gains.k_out = doc.contains("k_out") ? read_matrix<RowVector3>(doc, "k_out")
                                        : RowVector3(r.gains.k_bar.tail<3>());
  if (r.gains.k_out != r.gains.k_bar.tail<3>()) {
    doc.fail(*doc.find("k_out"), "must equal the last three entries of k_bar");
  }
  r.gains.gamma_achieved = doc.get_double("gamma", std::nan(""));
  if (doc.contains("lmi.lambda_max")) r.lmi_lambda_max = doc.get_double("lmi.lambda_max");
  if (doc.contains("lmi.Y")) {
    r.decision = lmi::LmiDecision::make(read_matrix<Matrix4>(doc, "lmi.Y"),
                                        read_matrix<Matrix4>(doc, "lmi.V"),
                                        read_matrix<RowVector4>(doc, "lmi.N"), r.gains.gamma_achieved);
    if (doc.contains("lmi.P")) r.decision->P = read_matrix<Matrix4>(doc, "lmi.P");
  }
  r.closed_loop_eigenvalues = read_spectrum(doc, "closed_loop.eig");
  if (doc.contains("bisection.gamma")) {
    const auto g = doc.get_doubles("bisection.gamma");
    const auto f = doc.get_doubles("bisection.feasible", g.size());
    for (std::size_t i = 0; i < g.size(); ++i) r.probes.push_back({g[i], f[i] != 0.0});
  }
  return r;
}

void SynthesisReport::save(const std::string& path) const { to_document().save(path); }

SynthesisReport SynthesisReport::load(const std::string& path) {
  return from_document(KeyValueDocument::load(path));
}

SynthesisReport make_synthesis_report(const std::string& plant_id, const StateSpace& ss,
                                      const lmi::SynthesisResult& result) {
  SynthesisReport r;
  r.plant_id = plant_id;
  r.plant = ss;
  r.gains = result.gains;
  r.decision = result.decision;
  r.lmi_lambda_max = result.lambda_max;
  r.closed_loop_eigenvalues = hinf::eigenvalues(ss.A + ss.B2 * result.gains.k_bar);
  sort_spectrum(r.closed_loop_eigenvalues);
  r.probes = result.probes;
  return r;
}

SynthesisReport paper_report() {
  SynthesisReport r;
  r.plant_id = "ecp220";
  r.plant = preset_ecp220();
  r.gains = lmi::paper_gain_set();
  r.closed_loop_eigenvalues = hinf::eigenvalues(r.plant.A + r.plant.B2 * r.gains.k_bar);
  sort_spectrum(r.closed_loop_eigenvalues);
  return r;
}

AnalysisReport analyze(const SynthesisReport& report) {
  const auto& ss = report.plant;
  AnalysisReport a;
  const auto loop = hinf::full_information_loop(ss, report.gains.k_bar);
  a.full_information_eigenvalues = hinf::eigenvalues(loop.A);
  sort_spectrum(a.full_information_eigenvalues);
  a.full_information_abscissa = hinf::spectral_abscissa(loop.A);
  a.full_information_hurwitz = a.full_information_abscissa < 0.0;

  const Matrix4 of = hinf::output_feedback_matrix(ss, report.gains.k_out);
  a.navigation = hinf::classify_navigation_spectrum(of);
  a.output_feedback_eigenvalues = a.navigation.spectrum;
  sort_spectrum(a.output_feedback_eigenvalues);
  a.navigation_ok = a.navigation.zero_eigenvalues == 1 && a.navigation.stable_eigenvalues == 3;

  if (a.full_information_hurwitz) a.hinf_norm = hinf::hinf_norm(loop);
  if (std::isfinite(report.gains.gamma_achieved)) a.gamma = report.gains.gamma_achieved;
  if (report.decision && a.gamma) {
    a.dissipation_residual =
        hinf::verify_dissipation(report.decision->P, report.gains.k_bar, ss, *a.gamma);
  }
  return a;
}

KeyValueDocument AnalysisReport::to_document() const {
  KeyValueDocument doc;
  doc.add_comment(std::string(tool_version()) + " analysis report");
  doc.add("kind", std::string("analysis"));
  write_spectrum(doc, "full_information.eig", full_information_eigenvalues);
  doc.add("full_information.spectral_abscissa", full_information_abscissa);
  doc.add("full_information.status", std::string(full_information_hurwitz ? "STABLE" : "UNSTABLE"));
  write_spectrum(doc, "output_feedback.eig", output_feedback_eigenvalues);
  doc.add("output_feedback.zero_eigenvalues", static_cast<double>(navigation.zero_eigenvalues));
  doc.add("output_feedback.stable_eigenvalues", static_cast<double>(navigation.stable_eigenvalues));
  doc.add("output_feedback.status", std::string(navigation_ok ? "NAVIGATION" : "UNSTABLE"));
  if (hinf_norm) doc.add("hinf_norm", *hinf_norm);
  if (gamma) doc.add("gamma", *gamma);
  if (hinf_norm && gamma) doc.add("hinf_norm_within_gamma", std::string(*hinf_norm <= *gamma ? "yes" : "no"));
  if (dissipation_residual) {
    doc.add("dissipation.residual", *dissipation_residual);
    doc.add("dissipation.certified", std::string(*dissipation_residual < 0.0 ? "yes" : "no"));
  }
  return doc;
}

KeyValueDocument RunManifest::to_document() const {
  KeyValueDocument doc;
  doc.add_comment("run manifest");
  doc.add("command", command);
  for (const auto& p : config_paths) doc.add("config", p);
  doc.add("seed", std::to_string(seed));
  doc.add("tool_version", tool_version);
  for (const auto& o : outputs) doc.add("output", o);
  for (const auto& [k, v] : extra) doc.add(k, v);
  return doc;
}

void RunManifest::save(const std::string& path) const { to_document().save(path); }

}  // namespace segway
