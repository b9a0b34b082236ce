#include "commands.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <ostream>

#include "CLI11.hpp"
#include "segway/report.hpp"
#include "segway/scenario.hpp"
#include "segway/simulation.hpp"

namespace segway::cli {

namespace fs = std::filesystem;

namespace {

std::string fmt(double v) { return format_sig9(v); }

template <typename Row>
std::string row(const Row& r) {
  std::string s = "[";
  for (Eigen::Index i = 0; i < r.size(); ++i) s += (i ? ", " : "") + fmt(r(i));
  return s + "]";
}

}  // namespace

std::uint64_t effective_seed(std::optional<std::uint64_t> cli_seed, std::uint64_t fallback) {
  if (cli_seed) return *cli_seed;
  if (const char* env = std::getenv("SEGWAY_LAB_SEED"); env != nullptr && *env != '\0') {
    std::uint64_t v = 0;
    const char* end = env + std::char_traits<char>::length(env);
    const auto [p, ec] = std::from_chars(env, end, v);
    if (ec == std::errc{} && p == end) return v;
  }
  return fallback;
}

int cmd_synth(const SynthArgs& args, std::ostream& out, std::ostream& err) {
  StateSpace ss;
  std::string plant_id = args.preset;
  std::vector<std::string> configs;
  try {
    if (args.plant_path) {
      ss = assemble_linear_model(PendulumParams::load(*args.plant_path));
      plant_id = *args.plant_path;
      configs.push_back(*args.plant_path);
    } else {
      ss = preset_by_name(args.preset);
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  }

  const double hi = args.gamma_hi;
  const double lo = args.gamma_lo.value_or(hi > 0.1 ? 0.1 : 0.5 * hi);
  if (!(lo > 0.0) || !(hi > lo) || !(args.tol > 0.0)) {
    err << "error: need 0 < gamma-lo < gamma-hi and tol > 0\n";
    return kInputError;
  }

  lmi::SolverOptions opts;
  opts.seed = effective_seed(args.seed, opts.seed);
  const auto start = std::chrono::steady_clock::now();
  lmi::SynthesisResult result;
  try {
    result = lmi::minimize_gamma(ss, lo, hi, args.tol, opts);
  } catch (const lmi::InfeasibleBracket& e) {
    err << "infeasible: " << e.what() << '\n';
    return kInfeasible;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  const auto report = make_synthesis_report(plant_id, ss, result);
  try {
    report.save(args.out);
    RunManifest m;
    m.command = "synth";
    m.config_paths = configs;
    m.seed = opts.seed;
    m.outputs = {args.out};
    m.extra = {{"gamma_lo", format_exact(lo)}, {"gamma_hi", format_exact(hi)}, {"tol", format_exact(args.tol)}};
    m.save(args.out + ".manifest");
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  }
  out << "gamma* = " << fmt(result.gains.gamma_achieved) << "  k_bar = " << row(result.gains.k_bar)
      << "  probes = " << result.probes.size() << "  time = " << fmt(secs) << " s\n"
      << "report: " << args.out << '\n';
  return kOk;
}

int cmd_analyze(const AnalyzeArgs& args, std::ostream& out, std::ostream& err) {
  SynthesisReport report;
  try {
    report = args.report == "paper" ? paper_report() : SynthesisReport::load(args.report);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  }
  const auto analysis = analyze(report);
  const auto doc = analysis.to_document();
  out << doc.to_string();
  if (args.out) {
    try {
      doc.save(*args.out);
    } catch (const std::exception& e) {
      err << "error: " << e.what() << '\n';
      return kInputError;
    }
  }
  return kOk;
}

int cmd_simulate(const SimulateArgs& args, std::ostream& out, std::ostream& err) {
  sim::Scenario scenario;
  std::vector<std::string> configs;
  try {
    scenario = args.scenario ? sim::Scenario::load(*args.scenario) : sim::default_scenario();
    configs = scenario.referenced_files;
    fs::create_directories(args.out_dir);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  }
  scenario.config.rng_seed = effective_seed(args.seed, scenario.config.rng_seed);

  sim::SimTrace trace;
  std::optional<double> gain;
  try {
    trace = sim::run_closed_loop(scenario.plant, scenario.controller, scenario.disturbance,
                                 scenario.config, scenario.x0);
    if (scenario.empirical_gain && !trace.diverged) {
      gain = sim::empirical_l2_gain(scenario.plant, *scenario.k_bar, scenario.disturbance, scenario.config);
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  }

  const auto trace_path = (fs::path(args.out_dir) / "trace.csv").string();
  const auto scenario_path = (fs::path(args.out_dir) / "scenario.scn").string();
  const auto manifest_path = (fs::path(args.out_dir) / "manifest.txt").string();
  try {
    trace.save_csv(trace_path);
    scenario.to_document().save(scenario_path);
    RunManifest m;
    m.command = "simulate";
    m.config_paths = configs;
    m.seed = scenario.config.rng_seed;
    m.outputs = {trace_path, scenario_path};
    if (trace.diverged) m.extra.push_back({"status", "diverged"});
    m.save(manifest_path);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  }

  double max_theta2 = 0.0;
  double max_u = 0.0;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    max_theta2 = std::max(max_theta2, std::abs(trace.theta2[i]));
    max_u = std::max(max_u, std::abs(trace.u[i]));
  }
  out << "final_theta1 = " << fmt(trace.theta1.back()) << "  max_abs_theta2 = " << fmt(max_theta2)
      << "  max_abs_u = " << fmt(max_u);
  if (gain) out << "  empirical_gain = " << fmt(*gain);
  out << "  samples = " << trace.size() << '\n';
  if (trace.diverged) {
    err << "diverged at t = " << fmt(trace.t.back()) << " s; partial trace kept in " << trace_path << '\n';
    return kDiverged;
  }
  return kOk;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  ::CLI::App app{"Segway-emulating Furuta pendulum workbench", "segway_lab"};
  app.require_subcommand(1);
  app.set_version_flag("--version", tool_version());

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Minimize the attenuation level gamma by LMI bisection");
  s->add_option("plant", synth.plant_path, "Plant parameter file (default: --preset)");
  s->add_option("--preset", synth.preset, "Preset plant name")->capture_default_str();
  s->add_option("--gamma-lo", synth.gamma_lo, "Bracket low end (default 0.1)");
  s->add_option("--gamma-hi", synth.gamma_hi, "Bracket high end")->capture_default_str();
  s->add_option("--tol", synth.tol, "Bisection tolerance on gamma")->capture_default_str();
  s->add_option("--out", synth.out, "Report path")->capture_default_str();
  s->add_option("--seed", synth.seed, "Solver restart seed");

  AnalyzeArgs analyze_args;
  auto* a = app.add_subcommand("analyze", "Closed-loop spectra, H-infinity norm and certificate check");
  a->add_option("report", analyze_args.report, "Synthesis report path, or 'paper'")->required();
  a->add_option("--out", analyze_args.out, "Also write the analysis to this file");

  SimulateArgs sim_args;
  auto* m = app.add_subcommand("simulate", "Run a scenario and write the CSV trace");
  m->add_option("scenario", sim_args.scenario, "Scenario file (default: paper maneuver)");
  m->add_option("--out-dir", sim_args.out_dir, "Output directory")->capture_default_str();
  m->add_option("--seed", sim_args.seed, "Seed recorded in the manifest");

  ServeArgs serve_args;
  auto* v = app.add_subcommand("serve", "Run the live teleoperation server");
  v->add_option("--bind", serve_args.bind, "Listen address")->capture_default_str();
  v->add_option("--port", serve_args.port, "TCP port (0 picks a free one)")->capture_default_str();
  v->add_option("--tick-hz", serve_args.tick_hz, "Simulation tick rate")->capture_default_str();
  v->add_option("--broadcast-hz", serve_args.broadcast_hz, "Telemetry rate")->capture_default_str();
  v->add_option("--speedup", serve_args.speedup, "Wall-clock pacing factor (sim dt is unaffected)")
      ->capture_default_str();
  v->add_option("--scenario", serve_args.scenario, "Scenario supplying plant and controller defaults");
  v->add_option("--out-dir", serve_args.out_dir, "Where the session trace is flushed on shutdown")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const ::CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kOk : kInputError;
  }

  if (s->parsed()) return cmd_synth(synth, out, err);
  if (a->parsed()) return cmd_analyze(analyze_args, out, err);
  if (m->parsed()) return cmd_simulate(sim_args, out, err);
  return cmd_serve(serve_args, out, err);
}

}  // namespace segway::cli
