#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

namespace segway::cli {

enum ExitCode : int { kOk = 0, kInputError = 1, kInfeasible = 2, kDiverged = 3 };

struct SynthArgs {
  std::optional<std::string> plant_path;  // parameter file; preset when empty
  std::string preset = "ecp220";
  std::optional<double> gamma_lo;         // defaults to 0.1, or hi/2 when hi <= 0.1
  double gamma_hi = 100.0;
  double tol = 0.1;
  std::string out = "synthesis.report";
  std::optional<std::uint64_t> seed;
};

struct AnalyzeArgs {
  std::string report;  // path, or "paper" for the published gains
  std::optional<std::string> out;
};

struct SimulateArgs {
  std::optional<std::string> scenario;  // default maneuver when empty
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
};

struct ServeArgs {
  std::string bind = "127.0.0.1";
  unsigned short port = 8080;
  double tick_hz = 200.0;
  double broadcast_hz = 30.0;
  double speedup = 1.0;
  std::optional<std::string> scenario;
  std::string out_dir = ".";
};

int cmd_synth(const SynthArgs& args, std::ostream& out, std::ostream& err);
int cmd_analyze(const AnalyzeArgs& args, std::ostream& out, std::ostream& err);
int cmd_simulate(const SimulateArgs& args, std::ostream& out, std::ostream& err);
int cmd_serve(const ServeArgs& args, std::ostream& out, std::ostream& err);

/// Parses argv and dispatches to a subcommand. Returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// `cli_seed` if given, else SEGWAY_LAB_SEED when set and valid, else `fallback`.
std::uint64_t effective_seed(std::optional<std::uint64_t> cli_seed, std::uint64_t fallback);

}  // namespace segway::cli
