#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "commands.hpp"
#include "segway/report.hpp"

namespace fs = std::filesystem;
using namespace segway;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result lab(std::vector<std::string> args) {
  args.insert(args.begin(), "segway_lab");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("segway_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

double field(const std::string& text, const std::string& key) {
  const auto pos = text.find(key + " = ");
  if (pos == std::string::npos) return NAN;
  return std::stod(text.substr(pos + key.size() + 3));
}

const std::string kManeuver = std::string(SEGWAY_SOURCE_DIR) + "/tools/scenarios/maneuver.scn";

class EnvSeed {
 public:
  explicit EnvSeed(const char* value) { ::setenv("SEGWAY_LAB_SEED", value, 1); }
  ~EnvSeed() { ::unsetenv("SEGWAY_LAB_SEED"); }
};

}  // namespace

TEST(Cli, UsageErrorsExitOne) {
  EXPECT_EQ(lab({}).code, cli::kInputError);
  EXPECT_EQ(lab({"frobnicate"}).code, cli::kInputError);
  EXPECT_EQ(lab({"analyze"}).code, cli::kInputError);
  EXPECT_EQ(lab({"--help"}).code, cli::kOk);
  const auto v = lab({"--version"});
  EXPECT_EQ(v.code, cli::kOk);
  EXPECT_NE(v.out.find(tool_version()), std::string::npos);
}

TEST(Cli, SynthWritesReportWithinPublishedLevel) {
  const auto dir = scratch("synth");
  const auto report = (dir / "gains.report").string();
  const auto r = lab({"synth", "--tol", "0.5", "--out", report});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  EXPECT_NE(r.out.find("gamma* = "), std::string::npos);
  const double gamma = field(r.out, "gamma*");
  EXPECT_LE(gamma, 8.2);
  const auto loaded = SynthesisReport::load(report);
  EXPECT_NEAR(loaded.gains.gamma_achieved, gamma, 1e-8 * gamma);  // summary prints 9 digits
  EXPECT_TRUE(fs::exists(report + ".manifest"));

  const auto a = lab({"analyze", report});
  ASSERT_EQ(a.code, cli::kOk) << a.err;
  EXPECT_NE(a.out.find("full_information.status = STABLE"), std::string::npos);
  EXPECT_NE(a.out.find("output_feedback.status = NAVIGATION"), std::string::npos);
  EXPECT_LT(field(a.out, "dissipation.residual"), 0.0);
}

TEST(Cli, SynthInputAndInfeasibleExitCodes) {
  const auto dir = scratch("synth_err");
  EXPECT_EQ(lab({"synth", "/nonexistent/plant.params"}).code, cli::kInputError);
  EXPECT_EQ(lab({"synth", "--preset", "ecp999"}).code, cli::kInputError);
  EXPECT_EQ(lab({"synth", "--gamma-lo", "5", "--gamma-hi", "1"}).code, cli::kInputError);
  const auto r = lab({"synth", "--gamma-hi", "1e-6", "--out", (dir / "x.report").string()});
  EXPECT_EQ(r.code, cli::kInfeasible) << r.err;
  EXPECT_FALSE(fs::exists(dir / "x.report"));
}

TEST(Cli, AnalyzePaperUnstableAndUnreadable) {
  const auto paper = lab({"analyze", "paper"});
  ASSERT_EQ(paper.code, cli::kOk);
  EXPECT_NE(paper.out.find("full_information.status = STABLE"), std::string::npos);
  EXPECT_LE(field(paper.out, "hinf_norm"), 8.2);

  const auto dir = scratch("analyze");
  auto bad = paper_report();
  bad.gains.k_bar = -bad.gains.k_bar;
  bad.gains.k_out = -bad.gains.k_out;
  bad.save((dir / "neg.report").string());
  const auto neg = lab({"analyze", (dir / "neg.report").string(), "--out", (dir / "neg.analysis").string()});
  ASSERT_EQ(neg.code, cli::kOk);
  EXPECT_NE(neg.out.find("full_information.status = UNSTABLE"), std::string::npos);
  EXPECT_NE(neg.out.find("output_feedback.status = UNSTABLE"), std::string::npos);
  EXPECT_EQ(slurp(dir / "neg.analysis"), neg.out);

  std::ofstream(dir / "junk.report") << "kind = synthesis\nk_bar = 1 2\n";
  const auto junk = lab({"analyze", (dir / "junk.report").string()});
  EXPECT_EQ(junk.code, cli::kInputError);
  EXPECT_NE(junk.err.find("junk.report:"), std::string::npos);
  EXPECT_EQ(lab({"analyze", "/nonexistent.report"}).code, cli::kInputError);
}

TEST(Cli, SimulateManeuverSummaryAndDeterminism) {
  const auto a = scratch("sim_a"), b = scratch("sim_b");
  const auto r = lab({"simulate", kManeuver, "--out-dir", a.string()});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  EXPECT_GT(std::abs(field(r.out, "final_theta1")), 0.5);
  EXPECT_LT(field(r.out, "max_abs_theta2"), 0.1);
  EXPECT_EQ(field(r.out, "samples"), 15001);
  ASSERT_EQ(lab({"simulate", kManeuver, "--out-dir", b.string()}).code, cli::kOk);
  const auto csv = slurp(a / "trace.csv");
  EXPECT_FALSE(csv.empty());
  EXPECT_EQ(csv, slurp(b / "trace.csv"));

  // The written scenario is self-contained and reproduces the run.
  const auto c = scratch("sim_c");
  ASSERT_EQ(lab({"simulate", (a / "scenario.scn").string(), "--out-dir", c.string()}).code, cli::kOk);
  EXPECT_EQ(slurp(c / "trace.csv"), csv);
}

TEST(Cli, SeedPrecedenceAndManifestRerun) {
  const auto dir = scratch("seed");
  {
    EnvSeed env("77");
    ASSERT_EQ(lab({"simulate", kManeuver, "--out-dir", dir.string()}).code, cli::kOk);
    EXPECT_EQ(field(slurp(dir / "manifest.txt"), "seed"), 77);
    ASSERT_EQ(lab({"simulate", kManeuver, "--out-dir", dir.string(), "--seed", "5"}).code, cli::kOk);
    EXPECT_EQ(field(slurp(dir / "manifest.txt"), "seed"), 5);
  }
  ASSERT_EQ(lab({"simulate", kManeuver, "--out-dir", dir.string()}).code, cli::kOk);
  const auto manifest = KeyValueDocument::load((dir / "manifest.txt").string());
  EXPECT_EQ(manifest.get_string("command"), "simulate");
  EXPECT_EQ(manifest.get_string("tool_version"), tool_version());
  const auto configs = manifest.find_all("config");
  ASSERT_EQ(configs.size(), 1u);

  const auto rerun = scratch("seed_rerun");
  ASSERT_EQ(lab({"simulate", configs[0]->value, "--out-dir", rerun.string(), "--seed",
                 manifest.get_string("seed")})
                .code,
            cli::kOk);
  EXPECT_EQ(slurp(rerun / "trace.csv"), slurp(dir / "trace.csv"));
}

TEST(Cli, SimulateDivergenceKeepsPartialTrace) {
  const auto dir = scratch("diverge");
  std::ofstream(dir / "bad.scn") << "controller = inline\n"
                                    "controller.gains = -0.43 -6.38 -1.09\n"
                                    "duration = 60\n";
  const auto r = lab({"simulate", (dir / "bad.scn").string(), "--out-dir", (dir / "out").string()});
  EXPECT_EQ(r.code, cli::kDiverged);
  EXPECT_NE(r.err.find("diverged"), std::string::npos);
  const auto csv = slurp(dir / "out" / "trace.csv");
  EXPECT_GT(std::count(csv.begin(), csv.end(), '\n'), 10);
  EXPECT_NE(slurp(dir / "out" / "manifest.txt").find("status = diverged"), std::string::npos);
}

TEST(Cli, SimulateInputErrors) {
  const auto dir = scratch("sim_err");
  EXPECT_EQ(lab({"simulate", "/nonexistent.scn"}).code, cli::kInputError);
  std::ofstream(dir / "typo.scn") << "duraton = 5\n";
  const auto r = lab({"simulate", (dir / "typo.scn").string(), "--out-dir", dir.string()});
  EXPECT_EQ(r.code, cli::kInputError);
  EXPECT_NE(r.err.find("typo.scn:1"), std::string::npos);
}

TEST(Cli, EffectiveSeed) {
  EXPECT_EQ(cli::effective_seed(std::nullopt, 9), 9u);
  EXPECT_EQ(cli::effective_seed(3, 9), 3u);
  EnvSeed env("12");
  EXPECT_EQ(cli::effective_seed(std::nullopt, 9), 12u);
  EXPECT_EQ(cli::effective_seed(3, 9), 3u);
  EnvSeed junk("12abc");
  EXPECT_EQ(cli::effective_seed(std::nullopt, 9), 9u);
}
