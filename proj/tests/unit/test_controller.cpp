#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "segway/controller.hpp"
#include "segway/hinf_analysis.hpp"
#include "segway/text_format.hpp"

using namespace segway;

namespace {

ControllerConfig unit_config(double dt = 0.001) {
  ControllerConfig c = paper_controller();
  c.scale = 1.0;
  c.gains = Vector3(1.0, 0.0, 0.0);
  c.sample_dt = dt;
  return c;
}

}  // namespace

TEST(PaperController, PublishedValues) {
  const auto c = paper_controller();
  EXPECT_EQ(c.gains, Vector3(0.43, 6.38, 1.09));
  EXPECT_EQ(c.scale, 0.3);
  EXPECT_EQ(c.filter_pole, -10.0);
  EXPECT_EQ(c.filter_gain, 5.0);
  EXPECT_EQ(c.sample_dt, 0.001);
  EXPECT_FALSE(c.saturation.has_value());
}

TEST(ControllerStep, ZeroInZeroOut) {
  const auto out = controller_step(paper_controller(), {}, 0.0, 0.0);
  EXPECT_EQ(out.u, 0.0);
  EXPECT_EQ(out.next.x1, 0.0);
  EXPECT_EQ(out.next.x2, 0.0);
}

TEST(ControllerStep, ComputesEstimatesBeforeAdvancing) {
  auto c = paper_controller();
  const ObserverState s{0.2, -0.1};
  const auto out = controller_step(c, s, 0.3, 0.05);
  const double v1 = -10 * 0.2 + 5 * 0.3;
  const double v2 = -10 * -0.1 + 5 * 0.05;
  EXPECT_DOUBLE_EQ(out.v1, v1);
  EXPECT_DOUBLE_EQ(out.v2, v2);
  EXPECT_DOUBLE_EQ(out.u, 0.3 * (0.43 * v1 + 6.38 * 0.05 + 1.09 * v2));
  // Exact hold discretization: x' = e^{a dt} x + (e^{a dt} - 1)/a * b * theta.
  const double e = std::exp(-10 * 0.001);
  EXPECT_NEAR(out.next.x1, e * 0.2 + (e - 1) / -10.0 * 5 * 0.3, 1e-15);
  EXPECT_NEAR(out.next.x2, e * -0.1 + (e - 1) / -10.0 * 5 * 0.05, 1e-15);
}

TEST(ControllerStep, ConstantInputGivesZeroVelocity) {
  Controller ctl(unit_config());
  ControllerOutput out;
  ObserverState s;
  for (int k = 0; k < 2000; ++k) {
    out = controller_step(ctl.config(), s, 0.7, 0.0);
    s = out.next;
  }
  EXPECT_LT(std::abs(out.v1), 1e-6);
  EXPECT_NEAR(s.x1, 0.5 * 0.7, 1e-6);
}

TEST(ControllerStep, RampSettlesToHalfSlopeUpToHoldLag) {
  for (double dt : {1e-3, 1e-4}) {
    const auto cfg = unit_config(dt);
    ObserverState s;
    ControllerOutput out;
    const int n = static_cast<int>(std::lround(3.0 / dt));
    for (int k = 0; k <= n; ++k) {
      out = controller_step(cfg, s, k * dt, 0.0);
      s = out.next;
    }
    // Discrete steady state b dt / (1 - e^{a dt}); tends to b / -a = 0.5 as dt -> 0.
    const double discrete = 5.0 * dt / (1.0 - std::exp(-10.0 * dt));
    EXPECT_NEAR(out.v1, discrete, 1e-9) << "dt " << dt;
    if (dt <= 1e-4) EXPECT_NEAR(out.v1, 0.5, 1e-3);
  }
}

TEST(ControllerStep, LinearInInputsAndState) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0.0, 1.0);
  const auto cfg = paper_controller();
  for (int i = 0; i < 100; ++i) {
    const ObserverState s1{n(rng), n(rng)}, s2{n(rng), n(rng)};
    const double a1 = n(rng), b1 = n(rng), a2 = n(rng), b2 = n(rng);
    const double alpha = n(rng), beta = n(rng);
    const auto o1 = controller_step(cfg, s1, a1, b1);
    const auto o2 = controller_step(cfg, s2, a2, b2);
    const ObserverState mix{alpha * s1.x1 + beta * s2.x1, alpha * s1.x2 + beta * s2.x2};
    const auto o = controller_step(cfg, mix, alpha * a1 + beta * a2, alpha * b1 + beta * b2);
    EXPECT_NEAR(o.u, alpha * o1.u + beta * o2.u, 1e-12 * (1 + std::abs(o.u)));
    EXPECT_NEAR(o.next.x1, alpha * o1.next.x1 + beta * o2.next.x1, 1e-12);
  }
}

TEST(ControllerStep, DiscretizationConvergesFirstOrder) {
  auto run = [](double dt, double t_end) {
    auto cfg = paper_controller();
    cfg.sample_dt = dt;
    Controller ctl(cfg);
    std::vector<double> u;
    const int n = static_cast<int>(std::lround(t_end / dt));
    for (int k = 0; k <= n; ++k) {
      const double t = k * dt;
      u.push_back(ctl.step(std::sin(3 * t), 0.1 * std::sin(5 * t)));
    }
    return u;
  };
  const double ref_dt = 1.0 / 64000.0;
  const auto ref = run(ref_dt, 1.0);
  std::vector<double> errors;
  for (double dt : {0.004, 0.002, 0.001}) {
    const auto u = run(dt, 1.0);
    const int stride = static_cast<int>(std::lround(dt / ref_dt));
    double e = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) e = std::max(e, std::abs(u[k] - ref[k * stride]));
    errors.push_back(e);
  }
  for (int i = 0; i + 1 < 3; ++i) {
    const double ratio = errors[i] / errors[i + 1];
    EXPECT_GT(ratio, 1.7) << i;
    EXPECT_LT(ratio, 2.3) << i;
  }
}

TEST(ControllerConfig, FilterPoleFollowsFiveToTenTimesRule) {
  const auto ss = preset_ecp220();
  const auto ev = hinf::eigenvalues(ss.A + ss.B2 * lmi::paper_gain_set().k_bar);
  double slowest = 1e300;
  for (const auto& l : ev) slowest = std::min(slowest, std::abs(l.real()));
  const double ratio = std::abs(paper_controller().filter_pole) / slowest;
  EXPECT_GE(ratio, 5.0 * 0.8);
  EXPECT_LE(ratio, 10.0 * 1.2);
}

TEST(FromGainSet, MapsOutputGains) {
  lmi::GainSet gs;
  gs.k_bar = RowVector4(9, 1, 2, 3);
  gs.k_out = RowVector3(1, 2, 3);
  const auto c = from_gain_set(gs, 1.0, -10, 5, 0.001);
  EXPECT_EQ(c.gains, Vector3(1, 2, 3));
  EXPECT_EQ(from_gain_set(lmi::paper_gain_set(), 0.3, -10, 5, 0.001).gains, paper_controller().gains);

  gs.k_out.setZero();
  Controller zero(from_gain_set(gs, 1.0, -10, 5, 0.001));
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(zero.step(n(rng), n(rng)), 0.0);
}

TEST(ControllerConfig, ValidationAndSaturation) {
  auto c = paper_controller();
  c.filter_pole = 0.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = paper_controller();
  c.sample_dt = 0.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = paper_controller();
  c.scale = -1;
  EXPECT_THROW(c.validate(), std::invalid_argument);

  c = paper_controller();
  c.saturation = 0.01;
  Controller ctl(c);
  EXPECT_DOUBLE_EQ(ctl.step(0.0, 1.0), 0.01);
  EXPECT_DOUBLE_EQ(ctl.step(0.0, -1.0), -0.01);
}

TEST(ControllerConfig, RoundTripsThroughTextFormat) {
  auto c = paper_controller();
  c.saturation = 2.5;
  KeyValueDocument doc;
  c.write(doc);
  const auto back = ControllerConfig::read(KeyValueDocument::parse(doc.to_string()));
  EXPECT_EQ(back.gains, c.gains);
  EXPECT_EQ(back.scale, c.scale);
  EXPECT_EQ(back.filter_pole, c.filter_pole);
  EXPECT_EQ(back.filter_gain, c.filter_gain);
  EXPECT_EQ(back.sample_dt, c.sample_dt);
  EXPECT_EQ(back.saturation, c.saturation);
}

TEST(Controller, ReconfigureKeepsObserverStateAndResetClearsIt) {
  Controller ctl(paper_controller());
  ctl.step(0.1, 0.2);
  const auto s = ctl.state();
  auto c = paper_controller();
  c.gains = Vector3(1, 1, 1);
  ctl.reconfigure(c);
  EXPECT_EQ(ctl.state().x1, s.x1);
  EXPECT_EQ(ctl.config().gains, Vector3(1, 1, 1));
  ctl.reset();
  EXPECT_EQ(ctl.state().x1, 0.0);
  EXPECT_EQ(ctl.state().x2, 0.0);
}
